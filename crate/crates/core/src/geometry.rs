//! Model constant-curvature manifolds with closed-form geodesics.
//!
//! Points and tangent vectors are small fixed-size value types. Flat models
//! (circle, torus) carry angle or arc-length coordinates and tangent
//! components in the global orthonormal frame. The round sphere and the
//! hyperbolic patch carry tangents as ambient 3-vectors (Euclidean and
//! Minkowski respectively); the hyperbolic patch stores points by their
//! chart coordinates `(x1, x2)` on the hyperboloid `x0 = sqrt(1 + x1² + x2²)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LefError, Result};

/// Margin below which a pair is treated as lying on the cut locus.
pub const CUT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelGeometry {
    Circle { radius: f64 },
    Torus { periods: Vec<f64> },
    #[serde(rename = "sphere2")]
    Sphere2,
    HyperbolicPatch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldPoint {
    c: [f64; 3],
    len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    c: [f64; 3],
    len: usize,
}

#[derive(Clone, Debug)]
pub struct GeodesicData {
    pub x: ManifoldPoint,
    pub y: ManifoldPoint,
    pub d: f64,
    pub midpoint: ManifoldPoint,
    pub unit_tangent_at_midpoint: TangentVector,
    /// Unit tangent at `x` pointing toward `y`.
    pub tangent_x: TangentVector,
    /// Velocity of the same geodesic on arrival at `y`.
    pub tangent_y: TangentVector,
    /// Parallel translation from `y` to `x` in the standard frames at `y` and `x`.
    pub transport_y_to_x: DMatrix<f64>,
}

impl ManifoldPoint {
    pub fn new(coords: &[f64]) -> Self {
        assert!(coords.len() <= 3 && !coords.is_empty());
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Self { c, len: coords.len() }
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.len]
    }

    pub fn v3(&self) -> [f64; 3] {
        self.c
    }
}

impl TangentVector {
    pub fn new(base: ManifoldPoint, comps: &[f64]) -> Self {
        assert!(comps.len() <= 3 && !comps.is_empty());
        let mut c = [0.0; 3];
        c[..comps.len()].copy_from_slice(comps);
        Self { base, c, len: comps.len() }
    }

    pub fn comps(&self) -> &[f64] {
        &self.c[..self.len]
    }

    pub fn v3(&self) -> [f64; 3] {
        self.c
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn axpy3(a: f64, x: [f64; 3], b: f64, y: [f64; 3]) -> [f64; 3] {
    [a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2]]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn scale3(s: f64, a: [f64; 3]) -> [f64; 3] {
    [s * a[0], s * a[1], s * a[2]]
}

pub(crate) fn normalize3(a: [f64; 3]) -> [f64; 3] {
    scale3(1.0 / norm3(a), a)
}

/// Minkowski product of signature (−,+,+).
pub(crate) fn mdot(a: [f64; 3], b: [f64; 3]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lift_hyperboloid(p: &ManifoldPoint) -> [f64; 3] {
    let (a, b) = (p.c[0], p.c[1]);
    [(1.0 + a * a + b * b).sqrt(), a, b]
}

/// Representative of `a` modulo `period` in `[-period/2, period/2)`.
pub fn wrap_centered(a: f64, period: f64) -> f64 {
    let r = a - period * (a / period + 0.5).floor();
    if r >= 0.5 * period {
        r - period
    } else {
        r
    }
}

/// Representative of `a` modulo `period` in `[0, period)`.
pub fn reduce_mod(a: f64, period: f64) -> f64 {
    let r = a.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

impl ModelGeometry {
    pub fn circle(radius: f64) -> Self {
        ModelGeometry::Circle { radius }
    }

    pub fn torus(periods: &[f64]) -> Self {
        ModelGeometry::Torus { periods: periods.to_vec() }
    }

    pub fn standard_torus(n: usize) -> Self {
        ModelGeometry::Torus { periods: vec![2.0 * PI; n] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelGeometry::Circle { radius } if !(*radius > 0.0 && radius.is_finite()) => {
                Err(LefError::InvalidArgument(format!("circle radius {radius}")))
            }
            ModelGeometry::Torus { periods }
                if periods.is_empty()
                    || periods.len() > 3
                    || periods.iter().any(|p| !(*p > 0.0 && p.is_finite())) =>
            {
                Err(LefError::InvalidArgument(format!("torus periods {periods:?}")))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelGeometry::Circle { .. } => 1,
            ModelGeometry::Torus { periods } => periods.len(),
            ModelGeometry::Sphere2 | ModelGeometry::HyperbolicPatch => 2,
        }
    }

    /// Length of tangent component vectors.
    pub fn ambient_dim(&self) -> usize {
        match self {
            ModelGeometry::Sphere2 | ModelGeometry::HyperbolicPatch => 3,
            _ => self.dim(),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. })
    }

    pub fn curvature(&self) -> f64 {
        match self {
            ModelGeometry::Sphere2 => 1.0,
            ModelGeometry::HyperbolicPatch => -1.0,
            _ => 0.0,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ModelGeometry::Circle { radius } => PI * radius,
            ModelGeometry::Torus { periods } => 0.5 * periods.iter().cloned().fold(f64::INFINITY, f64::min),
            ModelGeometry::Sphere2 => PI,
            ModelGeometry::HyperbolicPatch => f64::INFINITY,
        }
    }

    pub fn volume(&self) -> Option<f64> {
        match self {
            ModelGeometry::Circle { radius } => Some(2.0 * PI * radius),
            ModelGeometry::Torus { periods } => Some(periods.iter().product()),
            ModelGeometry::Sphere2 => Some(4.0 * PI),
            ModelGeometry::HyperbolicPatch => None,
        }
    }

    pub fn euler_characteristic(&self) -> Option<i64> {
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => Some(0),
            ModelGeometry::Sphere2 => Some(2),
            ModelGeometry::HyperbolicPatch => None,
        }
    }

    /// Coordinate periods and arc-length scales of a flat model.
    pub(crate) fn flat_periods_scales(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            ModelGeometry::Circle { radius } => ([2.0 * PI, 0.0, 0.0], [*radius, 0.0, 0.0]),
            ModelGeometry::Torus { periods } => {
                let mut p = [0.0; 3];
                p[..periods.len()].copy_from_slice(periods);
                (p, [1.0; 3])
            }
            _ => unreachable!("flat model expected"),
        }
    }

    /// Builds a point, reducing angles modulo periods and normalizing sphere vectors.
    pub fn point(&self, coords: &[f64]) -> Result<ManifoldPoint> {
        let bad = || LefError::InvalidArgument(format!("coordinates {coords:?} for {self}"));
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(bad());
        }
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => {
                if coords.len() != self.dim() {
                    return Err(bad());
                }
                let (p, _) = self.flat_periods_scales();
                let mut c = [0.0; 3];
                for i in 0..coords.len() {
                    c[i] = reduce_mod(coords[i], p[i]);
                }
                Ok(ManifoldPoint::new(&c[..coords.len()]))
            }
            ModelGeometry::Sphere2 => {
                if coords.len() != 3 {
                    return Err(bad());
                }
                let v = [coords[0], coords[1], coords[2]];
                let n = norm3(v);
                if n < 1e-300 {
                    return Err(bad());
                }
                Ok(ManifoldPoint::new(&scale3(1.0 / n, v)))
            }
            ModelGeometry::HyperbolicPatch => {
                if coords.len() != 2 {
                    return Err(bad());
                }
                Ok(ManifoldPoint::new(coords))
            }
        }
    }

    pub fn tangent(&self, base: ManifoldPoint, comps: &[f64]) -> Result<TangentVector> {
        if comps.len() != self.ambient_dim() {
            return Err(LefError::InvalidArgument(format!("tangent of length {} on {self}", comps.len())));
        }
        let mut v = TangentVector::new(base, comps);
        match self {
            ModelGeometry::Sphere2 => {
                let x = base.v3();
                v.c = axpy3(1.0, v.c, -dot3(v.c, x), x);
            }
            ModelGeometry::HyperbolicPatch => {
                let x = lift_hyperboloid(&base);
                v.c = axpy3(1.0, v.c, mdot(v.c, x), x);
            }
            _ => {}
        }
        Ok(v)
    }

    /// Norm of a tangent vector in the Riemannian metric.
    pub fn tangent_norm(&self, v: &TangentVector) -> f64 {
        match self {
            ModelGeometry::HyperbolicPatch => mdot(v.c, v.c).max(0.0).sqrt(),
            _ => v.comps().iter().map(|a| a * a).sum::<f64>().sqrt(),
        }
    }

    pub fn inner(&self, a: &TangentVector, b: &TangentVector) -> f64 {
        match self {
            ModelGeometry::HyperbolicPatch => mdot(a.c, b.c),
            _ => dot3(a.c, b.c),
        }
    }

    /// Ambient coordinates used for tangent computations.
    pub(crate) fn ambient(&self, p: &ManifoldPoint) -> [f64; 3] {
        match self {
            ModelGeometry::HyperbolicPatch => lift_hyperboloid(p),
            _ => p.c,
        }
    }

    fn from_ambient(&self, a: [f64; 3]) -> ManifoldPoint {
        match self {
            ModelGeometry::Sphere2 => ManifoldPoint::new(&normalize3(a)),
            ModelGeometry::HyperbolicPatch => ManifoldPoint::new(&[a[1], a[2]]),
            _ => unreachable!(),
        }
    }

    /// Oriented orthonormal frame at `x`, as columns of an `ambient_dim × dim` matrix.
    pub fn frame(&self, x: &ManifoldPoint) -> DMatrix<f64> {
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => DMatrix::identity(self.dim(), self.dim()),
            ModelGeometry::Sphere2 => {
                let (e1, e2) = sphere_frame(x.v3());
                DMatrix::from_column_slice(3, 2, &[e1[0], e1[1], e1[2], e2[0], e2[1], e2[2]])
            }
            ModelGeometry::HyperbolicPatch => {
                let (e1, e2) = hyperbolic_frame(lift_hyperboloid(x));
                DMatrix::from_column_slice(3, 2, &[e1[0], e1[1], e1[2], e2[0], e2[1], e2[2]])
            }
        }
    }

    /// Components of an ambient tangent vector in the standard frame.
    pub fn to_frame(&self, v: &TangentVector) -> Vec<f64> {
        let f = self.frame(&v.base);
        (0..self.dim())
            .map(|j| {
                let col = [f[(0, j)], f.get((1, j)).copied().unwrap_or(0.0), f.get((2, j)).copied().unwrap_or(0.0)];
                match self {
                    ModelGeometry::HyperbolicPatch => mdot(col, v.c),
                    _ => dot3(col, v.c),
                }
            })
            .collect()
    }

    /// Tangent vector at `x` with the given standard-frame components.
    pub fn from_frame(&self, x: &ManifoldPoint, comps: &[f64]) -> TangentVector {
        if self.is_flat() {
            return TangentVector::new(*x, comps);
        }
        let f = self.frame(x);
        let mut a = [0.0; 3];
        for (j, cj) in comps.iter().enumerate() {
            for i in 0..3 {
                a[i] += f[(i, j)] * cj;
            }
        }
        TangentVector::new(*x, &a)
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ManifoldPoint {
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => {
                let (p, _) = self.flat_periods_scales();
                let c: Vec<f64> = (0..self.dim()).map(|i| rng.random::<f64>() * p[i]).collect();
                ManifoldPoint::new(&c)
            }
            ModelGeometry::Sphere2 => loop {
                let v = [
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ];
                let n = norm3(v);
                if n > 0.1 && n <= 1.0 {
                    break ManifoldPoint::new(&scale3(1.0 / n, v));
                }
            },
            ModelGeometry::HyperbolicPatch => {
                ManifoldPoint::new(&[rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0])
            }
        }
    }

    /// Random tangent vector at `x` with standard-frame components uniform in `[-s, s]`.
    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R, x: &ManifoldPoint, s: f64) -> TangentVector {
        let comps: Vec<f64> = (0..self.dim()).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * s).collect();
        self.from_frame(x, &comps)
    }

    pub fn exp_map(&self, v: &TangentVector) -> ManifoldPoint {
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => {
                let (p, s) = self.flat_periods_scales();
                let x = v.base.coords();
                let c: Vec<f64> = (0..x.len()).map(|i| reduce_mod(x[i] + v.c[i] / s[i], p[i])).collect();
                ManifoldPoint::new(&c)
            }
            ModelGeometry::Sphere2 => {
                let x = v.base.v3();
                let t = norm3(v.c);
                if t == 0.0 {
                    return v.base;
                }
                self.from_ambient(axpy3(t.cos(), x, t.sin() / t, v.c))
            }
            ModelGeometry::HyperbolicPatch => {
                let x = lift_hyperboloid(&v.base);
                let t = mdot(v.c, v.c).max(0.0).sqrt();
                if t == 0.0 {
                    return v.base;
                }
                self.from_ambient(axpy3(t.cosh(), x, t.sinh() / t, v.c))
            }
        }
    }

    /// Minimal displacement from `x` to `y` in arc-length units (flat models only).
    pub(crate) fn flat_delta(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> [f64; 3] {
        let (p, s) = self.flat_periods_scales();
        let mut d = [0.0; 3];
        for i in 0..self.dim() {
            d[i] = wrap_centered(y.c[i] - x.c[i], p[i]) * s[i];
        }
        d
    }

    pub fn distance(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => norm3(self.flat_delta(x, y)),
            ModelGeometry::Sphere2 => {
                let (a, b) = (x.v3(), y.v3());
                norm3(cross3(a, b)).atan2(dot3(a, b))
            }
            ModelGeometry::HyperbolicPatch => {
                let (a, b) = (lift_hyperboloid(x), lift_hyperboloid(y));
                (-mdot(a, b)).max(1.0).acosh()
            }
        }
    }

    /// Signed distance from `y` to the cut locus of `x`; positive strictly inside.
    pub fn cut_margin(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Sphere2 => self.injectivity_radius() - self.distance(x, y),
            ModelGeometry::Torus { periods } => {
                let d = self.flat_delta(x, y);
                (0..periods.len()).map(|i| 0.5 * periods[i] - d[i].abs()).fold(f64::INFINITY, f64::min)
            }
            ModelGeometry::HyperbolicPatch => f64::INFINITY,
        }
    }

    /// Distance from `x` to its cut locus along the unit direction `u`.
    pub fn directional_cut_distance(&self, u: &TangentVector) -> f64 {
        match self {
            ModelGeometry::Torus { periods } => (0..periods.len())
                .map(|i| if u.c[i] == 0.0 { f64::INFINITY } else { 0.5 * periods[i] / u.c[i].abs() })
                .fold(f64::INFINITY, f64::min),
            _ => self.injectivity_radius(),
        }
    }

    pub fn tube_membership(&self, x: &ManifoldPoint, y: &ManifoldPoint, eps: f64) -> bool {
        self.distance(x, y) < std::f64::consts::SQRT_2 * eps
    }

    pub fn geodesic_between(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<GeodesicData> {
        let margin = self.cut_margin(x, y);
        if margin <= CUT_TOL {
            return Err(LefError::CutLocusViolation { margin });
        }
        let n = self.dim();
        match self {
            ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => {
                let delta = self.flat_delta(x, y);
                let d = norm3(delta);
                let u = if d > 0.0 {
                    scale3(1.0 / d, delta)
                } else {
                    [1.0, 0.0, 0.0]
                };
                let mid = self.exp_map(&TangentVector::new(*x, &scale3(0.5, delta)[..n]));
                Ok(GeodesicData {
                    x: *x,
                    y: *y,
                    d,
                    midpoint: mid,
                    unit_tangent_at_midpoint: TangentVector::new(mid, &u[..n]),
                    tangent_x: TangentVector::new(*x, &u[..n]),
                    tangent_y: TangentVector::new(*y, &u[..n]),
                    transport_y_to_x: DMatrix::identity(n, n),
                })
            }
            ModelGeometry::Sphere2 => {
                let (a, b) = (x.v3(), y.v3());
                let d = self.distance(x, y);
                let raw = axpy3(1.0, b, -dot3(a, b), a);
                let tx = if norm3(raw) > 1e-300 && d > 0.0 {
                    normalize3(raw)
                } else {
                    sphere_frame(a).0
                };
                let ty = axpy3(-d.sin(), a, d.cos(), tx);
                let mid = self.from_ambient(axpy3((0.5 * d).cos(), a, (0.5 * d).sin(), tx));
                let tm = axpy3(-(0.5 * d).sin(), a, (0.5 * d).cos(), tx);
                let nrm = cross3(a, tx);
                let transport = self.frame_transport(x, y, [tx, nrm], [ty, nrm]);
                Ok(GeodesicData {
                    x: *x,
                    y: *y,
                    d,
                    midpoint: mid,
                    unit_tangent_at_midpoint: TangentVector::new(mid, &tm),
                    tangent_x: TangentVector::new(*x, &tx),
                    tangent_y: TangentVector::new(*y, &ty),
                    transport_y_to_x: transport,
                })
            }
            ModelGeometry::HyperbolicPatch => {
                let (a, b) = (lift_hyperboloid(x), lift_hyperboloid(y));
                let d = self.distance(x, y);
                let tx = if d > 0.0 {
                    let raw = axpy3(1.0, b, mdot(a, b), a);
                    scale3(1.0 / mdot(raw, raw).sqrt(), raw)
                } else {
                    hyperbolic_frame(a).0
                };
                let ty = axpy3(d.sinh(), a, d.cosh(), tx);
                let mid = self.from_ambient(axpy3((0.5 * d).cosh(), a, (0.5 * d).sinh(), tx));
                let tm = axpy3((0.5 * d).sinh(), a, (0.5 * d).cosh(), tx);
                let nrm = hyperbolic_normal(a, tx, &self.frame(x));
                let transport = self.frame_transport(x, y, [tx, nrm], [ty, nrm]);
                Ok(GeodesicData {
                    x: *x,
                    y: *y,
                    d,
                    midpoint: mid,
                    unit_tangent_at_midpoint: TangentVector::new(mid, &tm),
                    tangent_x: TangentVector::new(*x, &tx),
                    tangent_y: TangentVector::new(*y, &ty),
                    transport_y_to_x: transport,
                })
            }
        }
    }

    /// Standard-frame matrix of the map sending the parallel frame at `y` to the one at `x`.
    fn frame_transport(&self, x: &ManifoldPoint, y: &ManifoldPoint, px: [[f64; 3]; 2], py: [[f64; 3]; 2]) -> DMatrix<f64> {
        let (fx, fy) = (self.frame(x), self.frame(y));
        let ip = |a: [f64; 3], f: &DMatrix<f64>, j: usize| {
            let col = [f[(0, j)], f[(1, j)], f[(2, j)]];
            match self {
                ModelGeometry::HyperbolicPatch => mdot(a, col),
                _ => dot3(a, col),
            }
        };
        // Q = Px^T-coords * Py-coords^T with both parallel frames orthonormal.
        let cx = DMatrix::from_fn(2, 2, |i, k| ip(px[k], &fx, i));
        let cy = DMatrix::from_fn(2, 2, |i, k| ip(py[k], &fy, i));
        cx * cy.transpose()
    }

    /// Parallel frames along the geodesic: columns are `(T, normals…)` in standard-frame components at `x` and at `y`.
    pub fn geodesic_frames(&self, g: &GeodesicData) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        if self.is_flat() {
            let t = g.tangent_x.comps().to_vec();
            let m = completed_frame(&t);
            return (m.clone(), m);
        }
        let (tx, ty) = (g.tangent_x.v3(), g.tangent_y.v3());
        let nrm = match self {
            ModelGeometry::Sphere2 => cross3(g.x.v3(), tx),
            _ => hyperbolic_normal(lift_hyperboloid(&g.x), tx, &self.frame(&g.x)),
        };
        let cx = self.to_frame(&TangentVector::new(g.x, &tx));
        let nx = self.to_frame(&TangentVector::new(g.x, &nrm));
        let cy = self.to_frame(&TangentVector::new(g.y, &ty));
        let ny = self.to_frame(&TangentVector::new(g.y, &nrm));
        debug_assert_eq!(n, 2);
        (
            DMatrix::from_column_slice(2, 2, &[cx[0], cx[1], nx[0], nx[1]]),
            DMatrix::from_column_slice(2, 2, &[cy[0], cy[1], ny[0], ny[1]]),
        )
    }

    pub fn parallel_transport(&self, g: &GeodesicData, w: &TangentVector) -> Result<TangentVector> {
        if !same_point(&w.base, &g.y) {
            return Err(LefError::BaseMismatch);
        }
        let c = self.to_frame(w);
        let out = &g.transport_y_to_x * nalgebra::DVector::from_vec(c);
        Ok(self.from_frame(&g.x, out.as_slice()))
    }
}

fn same_point(a: &ManifoldPoint, b: &ManifoldPoint) -> bool {
    a.len == b.len && a.coords().iter().zip(b.coords()).all(|(p, q)| (p - q).abs() <= 1e-12)
}

/// Oriented orthonormal completion of a unit vector in R^n, `n ≤ 3`.
pub(crate) fn completed_frame(t: &[f64]) -> DMatrix<f64> {
    let n = t.len();
    match n {
        1 => DMatrix::from_element(1, 1, if t[0] < 0.0 { -1.0 } else { 1.0 }),
        2 => DMatrix::from_column_slice(2, 2, &[t[0], t[1], -t[1], t[0]]),
        _ => {
            let a = [t[0], t[1], t[2]];
            let (e1, e2) = sphere_frame(a);
            // (a, e1, e2) is positively oriented since e1 × e2 = a.
            DMatrix::from_column_slice(3, 3, &[a[0], a[1], a[2], e1[0], e1[1], e1[2], e2[0], e2[1], e2[2]])
        }
    }
}

/// Oriented orthonormal tangent frame of the unit sphere at `x` (outward normal orientation).
pub(crate) fn sphere_frame(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let reference = if x[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = normalize3(cross3(reference, x));
    let e2 = cross3(x, e1);
    (e1, e2)
}

fn hyperbolic_frame(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let d1 = [x[1] / x[0], 1.0, 0.0];
    let e1 = scale3(1.0 / mdot(d1, d1).sqrt(), d1);
    let d2 = [x[2] / x[0], 0.0, 1.0];
    let r = axpy3(1.0, d2, -mdot(d2, e1), e1);
    let e2 = scale3(1.0 / mdot(r, r).sqrt(), r);
    (e1, e2)
}

/// Unit normal completing `t` to an oriented frame at `x` on the hyperboloid.
fn hyperbolic_normal(x: [f64; 3], t: [f64; 3], frame: &DMatrix<f64>) -> [f64; 3] {
    let c = cross3(x, t);
    let n = [-c[0], c[1], c[2]];
    let n = scale3(1.0 / mdot(n, n).sqrt(), n);
    let col = |j: usize| [frame[(0, j)], frame[(1, j)], frame[(2, j)]];
    let det = mdot(t, col(0)) * mdot(n, col(1)) - mdot(t, col(1)) * mdot(n, col(0));
    if det < 0.0 {
        scale3(-1.0, n)
    } else {
        n
    }
}

impl fmt::Display for ModelGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelGeometry::Circle { radius } => write!(f, "circle:{radius}"),
            ModelGeometry::Torus { periods } => {
                let p: Vec<String> = periods.iter().map(|p| p.to_string()).collect();
                write!(f, "torus:{}", p.join(","))
            }
            ModelGeometry::Sphere2 => write!(f, "sphere2"),
            ModelGeometry::HyperbolicPatch => write!(f, "hyperbolic_patch"),
        }
    }
}

impl FromStr for ModelGeometry {
    type Err = LefError;

    /// Accepts `circle[:r]`, `torus[:p1,p2,…]`, `sphere`/`sphere2`, `hyperbolic_patch`, or a JSON descriptor.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: &str| LefError::Parse(format!("manifold '{s}': {m}"));
        if s.starts_with('{') {
            return Err(bad("JSON descriptors are parsed by the caller"));
        }
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let nums = |t: &str| -> Result<Vec<f64>> {
            t.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad number"))).collect()
        };
        let g = match head {
            "circle" => ModelGeometry::Circle { radius: tail.map(|t| nums(t)).transpose()?.map_or(1.0, |v| v[0]) },
            "torus" => ModelGeometry::Torus {
                periods: tail.map(|t| nums(t)).transpose()?.unwrap_or_else(|| vec![2.0 * PI; 2]),
            },
            "sphere" | "sphere2" => ModelGeometry::Sphere2,
            "hyperbolic" | "hyperbolic_patch" => ModelGeometry::HyperbolicPatch,
            _ => return Err(bad("unknown kind")),
        };
        g.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(g)
    }
}
