//! Self-map families on the model manifolds and their differentials.
//!
//! Differentials are matrices in the standard oriented orthonormal frames of
//! [`ModelGeometry::frame`] at `x` and at `f(x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{LefError, Result};
use crate::geometry::{axpy3, cross3, dot3, norm3, normalize3, reduce_mod, ManifoldPoint, ModelGeometry, TangentVector};

/// Anything that can be pulled back by the Lefschetz integrand.
pub trait SelfMap: Sync {
    fn geometry(&self) -> &ModelGeometry;
    fn eval(&self, x: &ManifoldPoint) -> ManifoldPoint;
    fn differential(&self, x: &ManifoldPoint) -> DMatrix<f64>;
}

pub type ChartFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ChartJacobian = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A map on a flat model given by coordinate functions (results are reduced mod periods).
#[derive(Clone)]
pub struct GenericChartMap {
    pub label: String,
    pub func: ChartFn,
    pub jacobian: Option<ChartJacobian>,
}

impl GenericChartMap {
    pub fn new(label: &str, func: ChartFn, jacobian: Option<ChartJacobian>) -> Self {
        Self { label: label.to_string(), func, jacobian }
    }
}

impl fmt::Debug for GenericChartMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GenericChartMap({}, jacobian: {})", self.label, self.jacobian.is_some())
    }
}

#[derive(Clone, Debug)]
pub enum MapFamily {
    CirclePower(i64),
    /// Integer matrix acting on period-normalized coordinates, row-major.
    TorusLinear { n: usize, entries: Vec<i64> },
    SphereRotation { axis: [f64; 3], angle: f64 },
    SphereReflection { normal: [f64; 3] },
    /// `z ↦ zⁿ` (or `z̄^|n|` for negative n) on the Riemann sphere; fixes both poles for n ≠ 0.
    SphereSuspension(i64),
    Identity,
    Generic(GenericChartMap),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DifferentialMode {
    Analytic,
    FiniteDifference(f64),
}

#[derive(Clone, Debug)]
pub struct SmoothSelfMap {
    pub geometry: ModelGeometry,
    pub family: MapFamily,
    pub mode: DifferentialMode,
}

impl SmoothSelfMap {
    pub fn new(geometry: ModelGeometry, family: MapFamily) -> Result<Self> {
        let ok = match (&family, &geometry) {
            (MapFamily::CirclePower(_), ModelGeometry::Circle { .. }) => true,
            (MapFamily::TorusLinear { n, entries }, ModelGeometry::Torus { periods }) => {
                *n == periods.len() && entries.len() == n * n
            }
            (
                MapFamily::SphereRotation { .. } | MapFamily::SphereReflection { .. } | MapFamily::SphereSuspension(_),
                ModelGeometry::Sphere2,
            ) => true,
            (MapFamily::Identity, g) => *g != ModelGeometry::HyperbolicPatch,
            (MapFamily::Generic(_), g) => g.is_flat(),
            _ => false,
        };
        if !ok {
            return Err(LefError::ManifoldMismatch(format!("{family:?} on {geometry}")));
        }
        let family = match family {
            MapFamily::SphereRotation { axis, angle } => MapFamily::SphereRotation { axis: unit(axis)?, angle },
            MapFamily::SphereReflection { normal } => MapFamily::SphereReflection { normal: unit(normal)? },
            f => f,
        };
        Ok(Self { geometry, family, mode: DifferentialMode::Analytic })
    }

    pub fn with_mode(mut self, mode: DifferentialMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn circle_power(n: i64) -> Self {
        Self::new(ModelGeometry::circle(1.0), MapFamily::CirclePower(n)).unwrap()
    }

    /// Linear map on the standard torus `(R/2πZ)^n` from a row-major integer matrix.
    pub fn torus_linear(n: usize, entries: &[i64]) -> Self {
        Self::new(ModelGeometry::standard_torus(n), MapFamily::TorusLinear { n, entries: entries.to_vec() }).unwrap()
    }

    pub fn sphere_rotation(axis: [f64; 3], angle: f64) -> Self {
        Self::new(ModelGeometry::Sphere2, MapFamily::SphereRotation { axis, angle }).unwrap()
    }

    pub fn sphere_reflection(normal: [f64; 3]) -> Self {
        Self::new(ModelGeometry::Sphere2, MapFamily::SphereReflection { normal }).unwrap()
    }

    pub fn suspension(n: i64) -> Self {
        Self::new(ModelGeometry::Sphere2, MapFamily::SphereSuspension(n)).unwrap()
    }

    pub fn identity(geometry: ModelGeometry) -> Self {
        Self::new(geometry, MapFamily::Identity).unwrap()
    }

    /// Default finite-difference step.
    pub fn default_step(&self) -> f64 {
        1e-5 * self.geometry.injectivity_radius()
    }

    /// Manifold a descriptor acts on when none is given: the unit circle, the standard torus
    /// of matching dimension, or the round sphere. `identity` needs an explicit manifold.
    pub fn natural_geometry(desc: &str) -> Result<ModelGeometry> {
        let desc = desc.trim();
        let (head, tail) = desc.split_once(':').unwrap_or((desc, ""));
        match head {
            "circle_power" => Ok(ModelGeometry::circle(1.0)),
            "torus_linear" => {
                let k = tail.split(',').count();
                let n = (k as f64).sqrt().round() as usize;
                if tail.is_empty() || n * n != k {
                    return Err(LefError::Parse(format!("map '{desc}': matrix is not square")));
                }
                Ok(ModelGeometry::standard_torus(n))
            }
            "sphere_rotation" | "sphere_reflection" | "suspension" => Ok(ModelGeometry::Sphere2),
            _ => Err(LefError::Parse(format!("map '{desc}': no natural manifold, pass one explicitly"))),
        }
    }

    /// Parses `circle_power:3`, `torus_linear:2,0,0,3`, `sphere_rotation:0,0,1:1.57`,
    /// `sphere_reflection:0,0,1`, `suspension:2` or `identity` on the given manifold.
    pub fn parse(desc: &str, geometry: &ModelGeometry) -> Result<Self> {
        let desc = desc.trim();
        let bad = |m: &str| LefError::Parse(format!("map '{desc}': {m}"));
        let mut parts = desc.split(':');
        let head = parts.next().unwrap_or("");
        let args: Vec<&str> = parts.collect();
        let floats = |s: &str| -> Result<Vec<f64>> {
            s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad number"))).collect()
        };
        let int = |s: &str| s.trim().parse::<i64>().map_err(|_| bad("bad integer"));
        let need = |k: usize| if args.len() == k { Ok(()) } else { Err(bad("wrong number of fields")) };
        let family = match head {
            "circle_power" => {
                need(1)?;
                MapFamily::CirclePower(int(args[0])?)
            }
            "torus_linear" => {
                need(1)?;
                let entries = args[0].split(',').map(&int).collect::<Result<Vec<i64>>>()?;
                let n = (entries.len() as f64).sqrt().round() as usize;
                if n * n != entries.len() || n == 0 {
                    return Err(bad("matrix is not square"));
                }
                MapFamily::TorusLinear { n, entries }
            }
            "sphere_rotation" => {
                need(2)?;
                let a = floats(args[0])?;
                if a.len() != 3 {
                    return Err(bad("axis needs 3 components"));
                }
                let angle = args[1].trim().parse::<f64>().map_err(|_| bad("bad angle"))?;
                MapFamily::SphereRotation { axis: [a[0], a[1], a[2]], angle }
            }
            "sphere_reflection" => {
                need(1)?;
                let a = floats(args[0])?;
                if a.len() != 3 {
                    return Err(bad("normal needs 3 components"));
                }
                MapFamily::SphereReflection { normal: [a[0], a[1], a[2]] }
            }
            "suspension" => {
                need(1)?;
                MapFamily::SphereSuspension(int(args[0])?)
            }
            "identity" => {
                need(0)?;
                MapFamily::Identity
            }
            _ => return Err(bad("unknown family")),
        };
        Self::new(geometry.clone(), family).map_err(|e| bad(&e.to_string()))
    }

    pub fn descriptor(&self) -> String {
        match &self.family {
            MapFamily::CirclePower(n) => format!("circle_power:{n}"),
            MapFamily::TorusLinear { entries, .. } => {
                let e: Vec<String> = entries.iter().map(|v| v.to_string()).collect();
                format!("torus_linear:{}", e.join(","))
            }
            MapFamily::SphereRotation { axis, angle } => {
                format!("sphere_rotation:{},{},{}:{}", axis[0], axis[1], axis[2], angle)
            }
            MapFamily::SphereReflection { normal } => format!("sphere_reflection:{},{},{}", normal[0], normal[1], normal[2]),
            MapFamily::SphereSuspension(n) => format!("suspension:{n}"),
            MapFamily::Identity => "identity".to_string(),
            MapFamily::Generic(g) => format!("generic:{}", g.label),
        }
    }

    /// Integer matrix of a torus-linear map.
    pub fn integer_matrix(&self) -> Option<DMatrix<f64>> {
        match &self.family {
            MapFamily::TorusLinear { n, entries } => Some(DMatrix::from_fn(*n, *n, |i, j| entries[i * n + j] as f64)),
            _ => None,
        }
    }

    fn analytic_differential(&self, x: &ManifoldPoint) -> Option<DMatrix<f64>> {
        let m = &self.geometry;
        match &self.family {
            MapFamily::CirclePower(n) => Some(DMatrix::from_element(1, 1, *n as f64)),
            MapFamily::TorusLinear { n, entries } => {
                let (p, _) = m.flat_periods_scales();
                Some(DMatrix::from_fn(*n, *n, |i, j| p[i] * entries[i * n + j] as f64 / p[j]))
            }
            MapFamily::Identity => Some(DMatrix::identity(m.dim(), m.dim())),
            MapFamily::SphereRotation { axis, angle } => {
                let fx = self.eval(x);
                Some(sphere_linear_differential(m, x, &fx, |v| rotate(*axis, *angle, v)))
            }
            MapFamily::SphereReflection { normal } => {
                let fx = self.eval(x);
                Some(sphere_linear_differential(m, x, &fx, |v| reflect(*normal, v)))
            }
            MapFamily::SphereSuspension(n) => {
                let fx = self.eval(x);
                Some(sphere_linear_differential(m, x, &fx, |v| suspension_push(*n, x.v3(), v)))
            }
            MapFamily::Generic(g) => g.jacobian.as_ref().map(|j| j(x.coords())),
        }
    }
}

fn unit(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = norm3(v);
    if !(n > 1e-300) || !n.is_finite() {
        return Err(LefError::InvalidArgument(format!("zero or non-finite vector {v:?}")));
    }
    Ok(normalize3(v))
}

/// Rodrigues rotation of `v` about unit `axis` by `angle`.
pub(crate) fn rotate(axis: [f64; 3], angle: f64, v: [f64; 3]) -> [f64; 3] {
    let (c, s) = (angle.cos(), angle.sin());
    let kxv = cross3(axis, v);
    let kv = dot3(axis, v);
    [0, 1, 2].map(|i| v[i] * c + kxv[i] * s + axis[i] * kv * (1.0 - c))
}

fn reflect(normal: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    axpy3(1.0, v, -2.0 * dot3(normal, v), normal)
}

/// Standard-frame matrix of a pushforward given on ambient tangent vectors.
fn sphere_linear_differential(
    m: &ModelGeometry,
    x: &ManifoldPoint,
    fx: &ManifoldPoint,
    push: impl Fn([f64; 3]) -> [f64; 3],
) -> DMatrix<f64> {
    let (sx, sy) = (m.frame(x), m.frame(fx));
    let mut d = DMatrix::zeros(2, 2);
    for j in 0..2 {
        let w = push([sx[(0, j)], sx[(1, j)], sx[(2, j)]]);
        for i in 0..2 {
            d[(i, j)] = dot3(w, [sy[(0, i)], sy[(1, i)], sy[(2, i)]]);
        }
    }
    d
}

#[derive(Clone, Copy)]
struct Cx(f64, f64);

impl Cx {
    fn mul(self, o: Cx) -> Cx {
        Cx(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }
    fn conj(self) -> Cx {
        Cx(self.0, -self.1)
    }
    fn powi(self, k: u32) -> Cx {
        let mut r = Cx(1.0, 0.0);
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }
}

/// Chart coordinate of `x`: north chart (projection from the south pole) when `north`, else the
/// orientation-compatible south chart `w' = 1/w`.
fn sphere_chart(x: [f64; 3]) -> (bool, Cx) {
    if x[2] >= 0.0 {
        (true, Cx(x[0] / (1.0 + x[2]), x[1] / (1.0 + x[2])))
    } else {
        (false, Cx(x[0] / (1.0 - x[2]), -x[1] / (1.0 - x[2])))
    }
}

fn sphere_chart_inverse(north: bool, w: Cx) -> [f64; 3] {
    let s = 1.0 + w.0 * w.0 + w.1 * w.1;
    if north {
        [2.0 * w.0 / s, 2.0 * w.1 / s, 2.0 / s - 1.0]
    } else {
        [2.0 * w.0 / s, -2.0 * w.1 / s, 1.0 - 2.0 / s]
    }
}

fn suspension_chart_map(n: i64, w: Cx) -> Cx {
    if n >= 0 {
        w.powi(n as u32)
    } else {
        w.conj().powi((-n) as u32)
    }
}

pub(crate) fn suspension_eval(n: i64, x: [f64; 3]) -> [f64; 3] {
    if n == 0 {
        return [1.0, 0.0, 0.0];
    }
    let (north, w) = sphere_chart(x);
    normalize3(sphere_chart_inverse(north, suspension_chart_map(n, w)))
}

fn suspension_push(n: i64, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    if n == 0 {
        return [0.0; 3];
    }
    let (north, w) = sphere_chart(x);
    // Chart differential applied to v.
    let (du, dv) = if north {
        let a = 1.0 + x[2];
        (v[0] / a - x[0] * v[2] / (a * a), v[1] / a - x[1] * v[2] / (a * a))
    } else {
        let a = 1.0 - x[2];
        (v[0] / a + x[0] * v[2] / (a * a), -v[1] / a - x[1] * v[2] / (a * a))
    };
    // Derivative of the chart map.
    let k = n.unsigned_abs() as u32;
    let (gu, gv) = if n > 0 {
        let c = w.powi(k - 1);
        let c = Cx(c.0 * n as f64, c.1 * n as f64);
        (c.0 * du - c.1 * dv, c.1 * du + c.0 * dv)
    } else {
        let c = w.conj().powi(k - 1);
        let c = Cx(c.0 * k as f64, c.1 * k as f64);
        (c.0 * du + c.1 * dv, c.1 * du - c.0 * dv)
    };
    let g = suspension_chart_map(n, w);
    let (u, vv) = (g.0, g.1);
    let s = 1.0 + u * u + vv * vv;
    let s2 = s * s;
    let xu = [2.0 / s - 4.0 * u * u / s2, -4.0 * u * vv / s2, -4.0 * u / s2];
    let xv = [-4.0 * u * vv / s2, 2.0 / s - 4.0 * vv * vv / s2, -4.0 * vv / s2];
    let (xu, xv) = if north {
        (xu, xv)
    } else {
        ([xu[0], -xu[1], -xu[2]], [xv[0], -xv[1], -xv[2]])
    };
    axpy3(gu, xu, gv, xv)
}

impl SelfMap for SmoothSelfMap {
    fn geometry(&self) -> &ModelGeometry {
        &self.geometry
    }

    fn eval(&self, x: &ManifoldPoint) -> ManifoldPoint {
        let m = &self.geometry;
        match &self.family {
            MapFamily::CirclePower(n) => ManifoldPoint::new(&[reduce_mod(*n as f64 * x.coords()[0], 2.0 * PI)]),
            MapFamily::TorusLinear { n, entries } => {
                let (p, _) = m.flat_periods_scales();
                let u: Vec<f64> = (0..*n).map(|j| x.coords()[j] / p[j]).collect();
                let y: Vec<f64> = (0..*n)
                    .map(|i| {
                        let s: f64 = (0..*n).map(|j| entries[i * n + j] as f64 * u[j]).sum();
                        reduce_mod(s, 1.0) * p[i]
                    })
                    .collect();
                m.point(&y).expect("finite torus image")
            }
            MapFamily::SphereRotation { axis, angle } => ManifoldPoint::new(&normalize3(rotate(*axis, *angle, x.v3()))),
            MapFamily::SphereReflection { normal } => ManifoldPoint::new(&normalize3(reflect(*normal, x.v3()))),
            MapFamily::SphereSuspension(n) => ManifoldPoint::new(&suspension_eval(*n, x.v3())),
            MapFamily::Identity => *x,
            MapFamily::Generic(g) => m.point(&(g.func)(x.coords())).expect("finite chart image"),
        }
    }

    fn differential(&self, x: &ManifoldPoint) -> DMatrix<f64> {
        match self.mode {
            DifferentialMode::Analytic => match self.analytic_differential(x) {
                Some(d) => d,
                None => finite_difference_differential(self, x, self.default_step()),
            },
            DifferentialMode::FiniteDifference(h) => finite_difference_differential(self, x, h),
        }
    }
}

/// Central-difference differential in standard frames, error O(h²).
pub fn finite_difference_differential<F: SelfMap + ?Sized>(f: &F, x: &ManifoldPoint, h: f64) -> DMatrix<f64> {
    let m = f.geometry();
    let n = m.dim();
    let fx = f.eval(x);
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = h;
        let plus = f.eval(&m.exp_map(&m.from_frame(x, &e)));
        e[j] = -h;
        let minus = f.eval(&m.exp_map(&m.from_frame(x, &e)));
        if m.is_flat() {
            let dp = m.flat_delta(&fx, &plus);
            let dm = m.flat_delta(&fx, &minus);
            for i in 0..n {
                d[(i, j)] = (dp[i] - dm[i]) / (2.0 * h);
            }
        } else {
            let diff = axpy3(1.0, m.ambient(&plus), -1.0, m.ambient(&minus));
            let comps = m.to_frame(&TangentVector::new(fx, &diff));
            for i in 0..n {
                d[(i, j)] = comps[i] / (2.0 * h);
            }
        }
    }
    d
}

pub fn spectral_norm(d: &DMatrix<f64>) -> f64 {
    d.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// `sup_x |df_x|` over the given sample points.
pub fn operator_norm_sup<F: SelfMap + ?Sized>(f: &F, samples: &[ManifoldPoint]) -> f64 {
    samples.iter().map(|x| spectral_norm(&f.differential(x))).fold(0.0, f64::max)
}

/// `f ∘ g` on a flat model as a chart map with chain-rule Jacobian.
pub fn compose(f: &SmoothSelfMap, g: &SmoothSelfMap) -> Result<SmoothSelfMap> {
    if f.geometry != g.geometry || !f.geometry.is_flat() {
        return Err(LefError::ManifoldMismatch("composition needs one flat model".into()));
    }
    let (f1, g1) = (f.clone(), g.clone());
    let (f2, g2) = (f.clone(), g.clone());
    let geom = f.geometry.clone();
    let func: ChartFn = Arc::new(move |c: &[f64]| {
        let x = ManifoldPoint::new(c);
        f1.eval(&g1.eval(&x)).coords().to_vec()
    });
    let jac: ChartJacobian = Arc::new(move |c: &[f64]| {
        let x = ManifoldPoint::new(c);
        f2.differential(&g2.eval(&x)) * g2.differential(&x)
    });
    let label = format!("({})∘({})", f.descriptor(), g.descriptor());
    SmoothSelfMap::new(geom, MapFamily::Generic(GenericChartMap::new(&label, func, Some(jac))))
}
