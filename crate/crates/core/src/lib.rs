//! Lefschetz numbers of self-maps of model constant-curvature manifolds,
//! computed by integrating pulled-back Mathai–Quillen Thom forms and checked
//! against topological oracles.

pub mod bounds;
pub mod cutflow;
pub mod error;
pub mod geometry;
pub mod integrand;
pub mod maps;
pub mod mqthom;
pub mod oracles;
pub mod quadrature;

pub use error::{LefError, Result};
pub use geometry::{GeodesicData, ManifoldPoint, ModelGeometry, TangentVector};
pub use integrand::{ProfileKind, RadialProfile};
pub use maps::{MapFamily, SelfMap, SmoothSelfMap};
pub use quadrature::{compute_lefschetz, sweep_t, ComputeOptions, LefschetzReport};
