//! Deformations `tf` through the cut-locus tube and the cut set `C(f)`.
//!
//! `tf(x) = exp_x(c·g_t(s)·u)` where `u` is the unit direction from `x` to
//! `f(x)`, `c` the tube radius in that direction, `s = d(x, f(x))/c` and
//! `g_t = μ⁻¹(t·μ(·))`. Points with `f(x)` on or beyond the tube are left at
//! `f(x)`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LefError, Result};
use crate::geometry::{cross3, wrap_centered, ManifoldPoint, ModelGeometry, TangentVector};
use crate::integrand::{lefschetz_density, sn_cn, RadialProfile};
use crate::maps::{finite_difference_differential, spectral_norm, SelfMap, SmoothSelfMap};
use crate::oracles::{antipodal_displacement, cohomological_lefschetz, cut_point_index, newton_zero};
use crate::quadrature::{build_grid, gauss_legendre, integrate_density, tree_sum, QuadratureGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    /// `μ(s) = s/(1 − s)`.
    Rational,
    /// `μ(s) = tan(πs/2)`; `g_t(s)/s` is even in `s`, so `tf` stays smooth at fixed points.
    TangentHalf,
}

impl TimeProfile {
    pub fn mu(&self, s: f64) -> f64 {
        match self {
            TimeProfile::Rational => s / (1.0 - s),
            TimeProfile::TangentHalf => (0.5 * PI * s).tan(),
        }
    }

    pub fn mu_inv(&self, m: f64) -> f64 {
        match self {
            TimeProfile::Rational => m / (1.0 + m),
            TimeProfile::TangentHalf => 2.0 / PI * m.atan(),
        }
    }

    pub fn dmu(&self, s: f64) -> f64 {
        match self {
            TimeProfile::Rational => 1.0 / ((1.0 - s) * (1.0 - s)),
            TimeProfile::TangentHalf => {
                let c = (0.5 * PI * s).cos();
                0.5 * PI / (c * c)
            }
        }
    }

    pub fn dmu_inv(&self, m: f64) -> f64 {
        match self {
            TimeProfile::Rational => 1.0 / ((1.0 + m) * (1.0 + m)),
            TimeProfile::TangentHalf => 2.0 / PI / (1.0 + m * m),
        }
    }

    /// `g_t(s) = μ⁻¹(t·μ(s))`, with `g_1(s) = s` exactly.
    pub fn g(&self, t: f64, s: f64) -> f64 {
        if t == 1.0 {
            return s;
        }
        self.mu_inv(t * self.mu(s))
    }

    /// `∂g_t/∂s`, written to stay finite as `s → 1`.
    pub fn dg(&self, t: f64, s: f64) -> f64 {
        if t == 1.0 {
            return 1.0;
        }
        match self {
            TimeProfile::Rational => {
                let q = (1.0 - s) + t * s;
                t / (q * q)
            }
            TimeProfile::TangentHalf => {
                let (sn, cn) = (0.5 * PI * s).sin_cos();
                t / (cn * cn + t * t * sn * sn)
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "rational" => Ok(TimeProfile::Rational),
            "tangent_half" | "tan" => Ok(TimeProfile::TangentHalf),
            other => Err(LefError::Parse(format!("time profile '{other}'"))),
        }
    }
}

/// Tube through which `tf` contracts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformationTube {
    /// Radius = distance to the cut locus in the direction of `f(x)`.
    CutLocus,
    /// Radius = injectivity radius; round, hence `tf` is smooth wherever it moves points.
    InjectivityBall,
}

impl DeformationTube {
    /// Round tube on tori (whose cut-locus tube is a cube), cut-locus tube elsewhere.
    pub fn default_for(m: &ModelGeometry) -> Self {
        match m {
            ModelGeometry::Torus { .. } => DeformationTube::InjectivityBall,
            _ => DeformationTube::CutLocus,
        }
    }

    fn radius(&self, m: &ModelGeometry, u: &TangentVector) -> f64 {
        match self {
            DeformationTube::CutLocus => m.directional_cut_distance(u),
            DeformationTube::InjectivityBall => m.injectivity_radius(),
        }
    }

    fn is_round(&self, m: &ModelGeometry) -> bool {
        match self {
            DeformationTube::CutLocus => !matches!(m, ModelGeometry::Torus { .. }),
            DeformationTube::InjectivityBall => true,
        }
    }
}

/// `tf(x)` through the cut-locus tube.
pub fn t_map<F: SelfMap + ?Sized>(f: &F, mu: TimeProfile, t: f64, x: &ManifoldPoint) -> ManifoldPoint {
    t_map_in_tube(f, mu, t, DeformationTube::CutLocus, x)
}

pub fn t_map_in_tube<F: SelfMap + ?Sized>(f: &F, mu: TimeProfile, t: f64, tube: DeformationTube, x: &ManifoldPoint) -> ManifoldPoint {
    let m = f.geometry();
    let y = f.eval(x);
    if t == 1.0 {
        return y;
    }
    let g = match m.geodesic_between(x, &y) {
        Ok(g) => g,
        Err(_) => return y,
    };
    if g.d == 0.0 {
        return *x;
    }
    let c = tube.radius(m, &g.tangent_x);
    let s = g.d / c;
    if s >= 1.0 {
        return y;
    }
    let len = c * mu.g(t, s);
    let v: Vec<f64> = g.tangent_x.comps().iter().map(|a| a * len).collect();
    m.exp_map(&TangentVector::new(*x, &v))
}

/// The map `tf` as a [`SelfMap`].
pub struct DeformedMap<'a, F: SelfMap + ?Sized> {
    pub base: &'a F,
    pub t: f64,
    pub mu: TimeProfile,
    pub tube: DeformationTube,
}

impl<'a, F: SelfMap + ?Sized> DeformedMap<'a, F> {
    pub fn new(base: &'a F, t: f64, mu: TimeProfile, tube: DeformationTube) -> Self {
        Self { base, t, mu, tube }
    }

    /// Exact differential through Jacobi fields along the geodesic `x → f(x)` (round tubes only).
    fn jacobi_differential(&self, x: &ManifoldPoint) -> DMatrix<f64> {
        let m = self.base.geometry();
        let n = m.dim();
        let df = self.base.differential(x);
        if self.t == 1.0 {
            return df;
        }
        let y = self.base.eval(x);
        let g = match m.geodesic_between(x, &y) {
            Ok(g) => g,
            Err(_) => return df,
        };
        let c = self.tube.radius(m, &g.tangent_x);
        let s = g.d / c;
        if s >= 1.0 {
            return df;
        }
        let (ex, fy) = m.geodesic_frames(&g);
        if g.d < 1e-14 {
            let a = self.mu.dg(self.t, 0.0);
            return DMatrix::identity(n, n) * (1.0 - a) + df * a;
        }
        let gp = fy.transpose() * &df * &ex;
        let kappa = m.curvature();
        let len = c * self.mu.g(self.t, s);
        let dlen = self.mu.dg(self.t, s);
        let snd = sn_cn(kappa, g.d).0;
        let a_n = sn_cn(kappa, g.d - len).0 / snd;
        let b_n = sn_cn(kappa, len).0 / snd;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            let (a, b) = if i == 0 { (1.0 - dlen, dlen) } else { (a_n, b_n) };
            for j in 0..n {
                k[(i, j)] = b * gp[(i, j)] + if i == j { a } else { 0.0 };
            }
        }
        let out_frame = if m.is_flat() {
            ex.clone()
        } else {
            let xv = x.v3();
            let tx = g.tangent_x.v3();
            let (sl, cl) = len.sin_cos();
            let z = self.eval(x);
            let tz = [0, 1, 2].map(|i| -sl * xv[i] + cl * tx[i]);
            let nz = cross3(xv, tx);
            let ct = m.to_frame(&TangentVector::new(z, &tz));
            let cn = m.to_frame(&TangentVector::new(z, &nz));
            DMatrix::from_column_slice(2, 2, &[ct[0], ct[1], cn[0], cn[1]])
        };
        out_frame * k * ex.transpose()
    }
}

impl<F: SelfMap + ?Sized> SelfMap for DeformedMap<'_, F> {
    fn geometry(&self) -> &ModelGeometry {
        self.base.geometry()
    }

    fn eval(&self, x: &ManifoldPoint) -> ManifoldPoint {
        t_map_in_tube(self.base, self.mu, self.t, self.tube, x)
    }

    fn differential(&self, x: &ManifoldPoint) -> DMatrix<f64> {
        let m = self.base.geometry();
        if self.tube.is_round(m) {
            self.jacobi_differential(x)
        } else {
            finite_difference_differential(self, x, 1e-6 * m.injectivity_radius())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutSample {
    pub x: ManifoldPoint,
    pub margin: f64,
    pub in_c_f: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutClass {
    Empty,
    Finite,
    CurveLike,
}

#[derive(Clone, Debug)]
pub struct CutSetEstimate {
    pub samples: Vec<CutSample>,
    pub tolerance: f64,
    pub clusters: Vec<Vec<usize>>,
    /// Quadrature measure of the flagged nodes.
    pub measure: f64,
    /// Flagged measure at spacing `h` over that at `h/2`.
    pub measure_ratio: Option<f64>,
    pub class: CutClass,
    /// Refined points of `C(f)` when finite.
    pub points: Vec<ManifoldPoint>,
}

impl CutSetEstimate {
    pub fn count(&self) -> Option<usize> {
        match self.class {
            CutClass::Empty => Some(0),
            CutClass::Finite => Some(self.points.len()),
            CutClass::CurveLike => None,
        }
    }
}

struct Flagged {
    samples: Vec<CutSample>,
    tolerance: f64,
    measure: f64,
}

fn flag_nodes<F: SelfMap + ?Sized>(f: &F, grid: &QuadratureGrid) -> Flagged {
    let m = f.geometry();
    let margins: Vec<f64> = grid.nodes.par_iter().map(|x| m.cut_margin(x, &f.eval(x))).collect();
    let sup = grid.nodes.par_iter().map(|x| spectral_norm(&f.differential(x))).reduce(|| 0.0, f64::max);
    // Margin changes by at most (1 + |df|)·dist between a node and the nearest cut point.
    let tolerance = grid.spacing() * (1.0 + sup) * (m.dim() as f64).sqrt() / 2.0;
    let samples: Vec<CutSample> = grid
        .nodes
        .iter()
        .zip(&margins)
        .map(|(x, &margin)| CutSample { x: *x, margin, in_c_f: margin <= tolerance })
        .collect();
    let w: Vec<f64> = samples.iter().zip(&grid.weights).map(|(s, w)| if s.in_c_f { *w } else { 0.0 }).collect();
    Flagged { samples, tolerance, measure: tree_sum(&w) }
}

fn clusters(grid: &QuadratureGrid, samples: &[CutSample]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; samples.len()];
    let mut out = Vec::new();
    for start in 0..samples.len() {
        if seen[start] || !samples[start].in_c_f {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            for j in grid.neighbours(i) {
                if !seen[j] && samples[j].in_c_f {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Zero of the cut condition `f(x) ∈ C_x` near `x0` (sphere: `f(x) = −x`; circle: `f(x) = x + πr`).
fn refine_cut_point<F: SelfMap + ?Sized>(f: &F, x0: ManifoldPoint) -> Option<ManifoldPoint> {
    let m = f.geometry();
    match m {
        ModelGeometry::Sphere2 => newton_zero(m, x0, |x| antipodal_displacement(f, x), 50, 1e-13),
        ModelGeometry::Circle { radius } => {
            let r = *radius;
            newton_zero(
                m,
                x0,
                |x| {
                    let d = wrap_centered(f.eval(x).coords()[0] - x.coords()[0] - PI, 2.0 * PI);
                    vec![d * r]
                },
                50,
                1e-13,
            )
        }
        _ => None,
    }
}

/// Flags nodes near `C(f)`, clusters them, and classifies `C(f)` by comparing with a grid of half the spacing.
pub fn cut_set_estimate<F: SelfMap + ?Sized>(f: &F, grid: &QuadratureGrid) -> Result<CutSetEstimate> {
    let m = f.geometry();
    let coarse = flag_nodes(f, grid);
    let fine_grid = build_grid(m, 2 * grid.resolution)?;
    let fine = flag_nodes(f, &fine_grid);
    let cl = clusters(grid, &coarse.samples);
    let dim = m.dim() as f64;
    let (class, ratio) = if coarse.measure == 0.0 && fine.measure == 0.0 {
        (CutClass::Empty, None)
    } else if fine.measure == 0.0 {
        (CutClass::Finite, Some(f64::INFINITY))
    } else {
        let r = coarse.measure / fine.measure;
        // Isolated points scale like h^dim, hypersurfaces like h^(dim−1); split at the geometric mean.
        let class = if r > 2f64.powf(dim - 0.5) { CutClass::Finite } else { CutClass::CurveLike };
        (class, Some(r))
    };
    let mut points: Vec<ManifoldPoint> = Vec::new();
    if class == CutClass::Finite {
        for c in &cl {
            let best = *c
                .iter()
                .min_by(|a, b| coarse.samples[**a].margin.total_cmp(&coarse.samples[**b].margin))
                .unwrap();
            let x0 = coarse.samples[best].x;
            let p = refine_cut_point(f, x0).unwrap_or(x0);
            if !points.iter().any(|q| m.distance(q, &p) < 1e-6) {
                points.push(p);
            }
        }
    }
    Ok(CutSetEstimate {
        samples: coarse.samples,
        tolerance: coarse.tolerance,
        clusters: cl,
        measure: coarse.measure,
        measure_ratio: ratio,
        class,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "L")]
    pub l: i64,
    pub chi: i64,
    pub cut_class: CutClass,
    /// `None` encodes an infinite cut set.
    pub cut_count: Option<usize>,
    pub inequality_holds: bool,
    pub sgn_sum: Option<i64>,
}

/// `|L(f) − χ(M)| ≤ |C(f)|` with `C(f)` estimated on a grid of the given resolution.
pub fn bound_check(f: &SmoothSelfMap, resolution: usize) -> Result<BoundReport> {
    let m = f.geometry();
    let l = cohomological_lefschetz(f)?;
    let chi = m.euler_characteristic().unwrap_or(0);
    let grid = build_grid(m, resolution)?;
    let est = cut_set_estimate(f, &grid)?;
    let count = est.count();
    let inequality_holds = match count {
        Some(c) => (l - chi).unsigned_abs() as usize <= c,
        None => true,
    };
    let sgn_sum = if matches!(m, ModelGeometry::Sphere2) && est.class != CutClass::CurveLike {
        Some(sign_sum(f, &est.points)?)
    } else {
        None
    };
    Ok(BoundReport { l, chi, cut_class: est.class, cut_count: count, inequality_holds, sgn_sum })
}

fn sign_sum<F: SelfMap + ?Sized>(f: &F, points: &[ManifoldPoint]) -> Result<i64> {
    let mut total = 0;
    for x in points {
        let det = f.differential(x).determinant();
        if det.abs() <= 1e-9 {
            return Err(LefError::DegenerateRecord(x.coords().to_vec()));
        }
        total += det.signum() as i64;
    }
    Ok(total)
}

/// `Σ_{x ∈ C(f)} sgn det df_x` for a sphere map with finite cut set.
pub fn sign_refinement_sphere(f: &SmoothSelfMap, resolution: usize) -> Result<i64> {
    let m = f.geometry();
    if !matches!(m, ModelGeometry::Sphere2) {
        return Err(LefError::UnsupportedManifold(format!("sign refinement on {m}")));
    }
    let est = cut_set_estimate(f, &build_grid(m, resolution)?)?;
    if est.class == CutClass::CurveLike {
        return Err(LefError::NonFiniteCutSet);
    }
    sign_sum(f, &est.points)
}

/// Polynomial extrapolation to `t = 0` through `(t_i, v_i)` (Neville).
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    let mut p: Vec<f64> = points.iter().map(|q| q.1).collect();
    for k in 1..n {
        for i in 0..n - k {
            let (ti, tk) = (points[i].0, points[i + k].0);
            p[i] = (tk * p[i] - ti * p[i + 1]) / (tk - ti);
        }
    }
    p[0]
}

/// `(∫(tf)*dvol − vol)/vol` over `t_small`, extrapolated to `t = 0`; approximates `deg f − 1`.
pub fn degree_current_estimate(f: &SmoothSelfMap, resolution: usize, t_small: &[f64]) -> Result<f64> {
    let m = f.geometry();
    let vol = m.volume().ok_or_else(|| LefError::UnsupportedManifold(m.to_string()))?;
    let grid = build_grid(m, resolution)?;
    let tube = DeformationTube::default_for(m);
    let mut pts = Vec::with_capacity(t_small.len());
    for &t in t_small {
        let g = DeformedMap::new(f, t, TimeProfile::TangentHalf, tube);
        let q = integrate_density(&grid, |x| Ok(g.differential(x).determinant()))?;
        pts.push((t, (q - vol) / vol));
    }
    Ok(extrapolate_to_zero(&pts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPartEstimate {
    /// `(t, Σ_i ∫_{B_i} (D_t − K/2π))` over balls around the cut points.
    pub per_t: Vec<(f64, f64)>,
    pub extrapolated: f64,
    /// `−Σ_i ind_{x_i}(log_x(−f(x)))`.
    pub from_winding: i64,
    pub cut_points: usize,
}

/// Integral of `D_t − K/2π` over a geodesic ball of `radius` about `center`, on log-spaced radial panels.
pub fn local_excess<F: SelfMap + ?Sized>(
    f: &F,
    profile: &RadialProfile,
    t: f64,
    center: &ManifoldPoint,
    radius: f64,
    angular: usize,
) -> Result<f64> {
    let m = ModelGeometry::Sphere2;
    let g = DeformedMap::new(f, t, TimeProfile::TangentHalf, DeformationTube::CutLocus);
    let (gx, gw) = gauss_legendre(8);
    let panels = 48;
    let mut nodes = Vec::new();
    for j in 0..panels {
        let (hi, lo) = (radius * 0.5f64.powi(j), radius * 0.5f64.powi(j + 1));
        for (u, w) in gx.iter().zip(&gw) {
            let r = 0.5 * (hi - lo) * u + 0.5 * (hi + lo);
            nodes.push((r, 0.5 * (hi - lo) * w * r.sin()));
        }
    }
    let dphi = 2.0 * PI / angular as f64;
    let vals: Vec<Result<f64>> = (0..nodes.len() * angular)
        .into_par_iter()
        .map(|k| {
            let (r, w) = nodes[k / angular];
            let phi = (k % angular) as f64 * dphi + 0.5 * dphi;
            let x = m.exp_map(&m.from_frame(center, &[r * phi.cos(), r * phi.sin()]));
            Ok(w * dphi * (lefschetz_density(&g, profile, &x)? - 1.0 / (2.0 * PI)))
        })
        .collect();
    let vals: Result<Vec<f64>> = vals.into_iter().collect();
    Ok(tree_sum(&vals?))
}

/// `C^f(1)` on the sphere from local integrals at small `t` and, independently, from cut-point indices.
pub fn singular_part_estimate(
    f: &SmoothSelfMap,
    profile: &RadialProfile,
    ts: &[f64],
    radius: f64,
    resolution: usize,
) -> Result<SingularPartEstimate> {
    let m = f.geometry();
    if !matches!(m, ModelGeometry::Sphere2) {
        return Err(LefError::UnsupportedManifold(format!("singular part on {m}")));
    }
    let est = cut_set_estimate(f, &build_grid(m, resolution)?)?;
    if est.class == CutClass::CurveLike {
        return Err(LefError::NonFiniteCutSet);
    }
    let mut per_t = Vec::new();
    for &t in ts {
        let mut total = 0.0;
        for x in &est.points {
            total += local_excess(f, profile, t, x, radius, 256)?;
        }
        per_t.push((t, total));
    }
    let mut from_winding = 0;
    for x in &est.points {
        from_winding -= cut_point_index(f, x, 0.05 * radius)?;
    }
    Ok(SingularPartEstimate { extrapolated: extrapolate_to_zero(&per_t), per_t, from_winding, cut_points: est.points.len() })
}
