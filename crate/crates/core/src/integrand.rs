//! Pointwise Lefschetz integrand.
//!
//! The tube `{d(x, y) < √2 ε}` around the diagonal is identified with the
//! ε-disk bundle of `TM` through the geodesic midpoint `x̄` and the half
//! displacement `ξ = (1/√2)·(d/2)·γ̇(x̄)`, then radially reparametrized by a
//! profile `ρ`. The pullback of the Thom form is assembled from two matrices
//! read off Jacobi fields along the geodesic from `x` to `f(x)`:
//!
//! * `A` (horizontal): `−√2` times the value at `x̄` of the Jacobi field that
//!   is parallel at `x̄` and has endpoints `(q + ‖df q)/2`-like data;
//! * `B` (vertical): `1/√2` times the `x̄`-velocity, in the unit-speed-on-`[−½, ½]`
//!   parametrization, of the Jacobi field vanishing at `x̄`.
//!
//! Rows of `A` and `B` are indexed by the input frame vector, columns by the
//! parallel frame `(γ̇, normals…)` at `x̄`; column 0 is radial.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LefError, Result};
use crate::geometry::{GeodesicData, ManifoldPoint, ModelGeometry, CUT_TOL};
use crate::maps::SelfMap;
use crate::mqthom::{c_coefficient, permutation_sign, permutations, pfaffian_sum_constcurv, shuffle_sign, submatrix, MultiIndex};
use crate::quadrature::gauss_legendre;

/// Beyond this value `e^{-ρ²}` underflows and the integrand is exactly zero.
const RHO_CUTOFF: f64 = 27.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Secant,
    Tangent,
    RationalOdd,
}

impl ProfileKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "sec" | "secant" => Ok(ProfileKind::Secant),
            "tan" | "tangent" => Ok(ProfileKind::Tangent),
            "rational" | "rational_odd" => Ok(ProfileKind::RationalOdd),
            other => Err(LefError::Parse(format!("profile '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ProfileKind::Secant => "sec",
            ProfileKind::Tangent => "tan",
            ProfileKind::RationalOdd => "rational",
        }
    }

    /// Profile used when none is requested: odd on flat models, even where curvature enters.
    pub fn default_for(m: &ModelGeometry) -> Self {
        if m.is_flat() {
            ProfileKind::RationalOdd
        } else {
            ProfileKind::Secant
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub kind: ProfileKind,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProfileValue {
    Inside { rho: f64, drho: f64, rho_over_r: f64 },
    Outside,
}

impl RadialProfile {
    pub fn new(kind: ProfileKind, eps: f64) -> Self {
        Self { kind, eps }
    }

    pub fn eval(&self, r: f64) -> ProfileValue {
        let eps = self.eps;
        if !(r < eps) {
            return ProfileValue::Outside;
        }
        let r = r.abs();
        match self.kind {
            ProfileKind::Secant => {
                let a = PI / (2.0 * eps);
                let (s, c) = (a * r).sin_cos();
                let half = (0.5 * a * r).sin();
                let rho = 2.0 * half * half / c;
                let rho_over_r = if r > 0.0 { rho / r } else { 0.0 };
                ProfileValue::Inside { rho, drho: a * s / (c * c), rho_over_r }
            }
            ProfileKind::Tangent => {
                let a = PI / (2.0 * eps);
                let (s, c) = (a * r).sin_cos();
                let rho = s / c;
                let rho_over_r = if r > 0.0 { rho / r } else { a };
                ProfileValue::Inside { rho, drho: a / (c * c), rho_over_r }
            }
            ProfileKind::RationalOdd => {
                let q = (r / eps) * (r / eps);
                let inv = 1.0 / (1.0 - q);
                ProfileValue::Inside { rho: r * inv, drho: (1.0 + q) * inv * inv, rho_over_r: inv }
            }
        }
    }
}

/// `(sn(s), cn(s), s/sn(s))` for curvature `κ`.
pub fn sn_cn(kappa: f64, s: f64) -> (f64, f64, f64) {
    let ratio = |sn: f64| if s.abs() < 1e-300 { 1.0 } else { s / sn };
    if kappa > 0.0 {
        let (a, b) = s.sin_cos();
        (a, b, ratio(a))
    } else if kappa < 0.0 {
        (s.sinh(), s.cosh(), ratio(s.sinh()))
    } else {
        (s, 1.0, 1.0)
    }
}

/// Vertical/horizontal splitting of `(q, w)` with `w` the pushforward of `q`.
///
/// All vectors are components in the parallel frame `(γ̇, normals…)`: `q` at
/// `x`, `w` at `f(x)`, midpoint data at `x̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct VHDecomposition {
    pub kappa: f64,
    pub d: f64,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub vertical_x: Vec<f64>,
    pub vertical_y: Vec<f64>,
    pub horizontal_x: Vec<f64>,
    pub horizontal_y: Vec<f64>,
    /// Value at `x̄` of the horizontal field (parallel at `x̄`).
    pub midpoint_position: Vec<f64>,
    /// `d` times the arc-length velocity at `x̄` of the vertical field (vanishing at `x̄`).
    pub midpoint_velocity_scaled: Vec<f64>,
}

impl VHDecomposition {
    /// Arc-length velocity of the vertical field at `x̄`; infinite when `d = 0`.
    pub fn midpoint_velocity(&self) -> Vec<f64> {
        self.midpoint_velocity_scaled.iter().map(|v| v / self.d).collect()
    }
}

/// Closed-form Jacobi splitting along a geodesic of length `d` in curvature `κ`.
pub fn jacobi_decompose(kappa: f64, d: f64, q: &[f64], w: &[f64]) -> Result<VHDecomposition> {
    if kappa > 0.0 && d >= PI {
        return Err(LefError::ConjugatePoint { d });
    }
    let (_, cn, s_over_sn) = sn_cn(kappa, 0.5 * d);
    let n = q.len();
    let mut out = VHDecomposition {
        kappa,
        d,
        q: q.to_vec(),
        w: w.to_vec(),
        vertical_x: vec![0.0; n],
        vertical_y: vec![0.0; n],
        horizontal_x: vec![0.0; n],
        horizontal_y: vec![0.0; n],
        midpoint_position: vec![0.0; n],
        midpoint_velocity_scaled: vec![0.0; n],
    };
    for i in 0..n {
        let diff = 0.5 * (w[i] - q[i]);
        let mean = 0.5 * (w[i] + q[i]);
        out.vertical_x[i] = -diff;
        out.vertical_y[i] = diff;
        out.horizontal_x[i] = mean;
        out.horizontal_y[i] = mean;
        if i == 0 {
            out.midpoint_position[i] = mean;
            out.midpoint_velocity_scaled[i] = 2.0 * diff;
        } else {
            out.midpoint_position[i] = mean / cn;
            // d·(w−q)/(2 sn(d/2)) = (w−q)·(d/2)/sn(d/2).
            out.midpoint_velocity_scaled[i] = 2.0 * diff * s_over_sn;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ABMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub kappa: f64,
    pub d: f64,
}

impl ABMatrices {
    /// `A` rescaled to the midpoint differential: `½(‖∘df + Id)` on flat models.
    pub fn a_half(&self) -> DMatrix<f64> {
        self.a.transpose() * (-1.0 / SQRT_2)
    }

    /// `B` rescaled to `½(‖∘df − Id)` on flat models.
    pub fn b_half(&self) -> DMatrix<f64> {
        self.b.transpose() * (1.0 / SQRT_2)
    }
}

/// A/B matrices from the df matrix `g` in parallel frames (`g[(i, j)]` = component `i` at `f(x)` of `df(e_j)`).
pub fn ab_matrices(kappa: f64, d: f64, g: &DMatrix<f64>) -> Result<ABMatrices> {
    let n = g.nrows();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut q = vec![0.0; n];
        q[i] = 1.0;
        let w: Vec<f64> = (0..n).map(|k| g[(k, i)]).collect();
        let vh = jacobi_decompose(kappa, d, &q, &w)?;
        for j in 0..n {
            a[(i, j)] = -SQRT_2 * vh.midpoint_position[j];
            b[(i, j)] = vh.midpoint_velocity_scaled[j] / SQRT_2;
        }
    }
    Ok(ABMatrices { a, b, kappa, d })
}

/// Weight of the `I` term in the assembly: `2^{-|I|} c_{|I|} Σ_{σ,τ} R…` for constant curvature.
pub fn curvature_term_weight(i: &MultiIndex, kappa: f64) -> f64 {
    if i.is_empty() {
        return 1.0;
    }
    2f64.powi(-(i.len() as i32)) * c_coefficient(i.len()) * pfaffian_sum_constcurv(i, kappa)
}

/// Generic assembly of the density for dimension `n`:
/// `(−1)^n π^{-n/2} e^{-ρ²} Σ_I ε(I,I′) w_I /(|I|!|I′|!) Σ_μ sgn μ det(A^μ_I) det((BP)^μ_{I′})`,
/// where `P` scales the radial column by `ρ′` and angular columns by `ρ/r`.
pub fn generic_assembly(ab: &ABMatrices, rho: f64, drho: f64, rho_over_r: f64) -> f64 {
    let n = ab.a.nrows();
    if rho > RHO_CUTOFF {
        return 0.0;
    }
    let mut bp = ab.b.clone();
    for j in 0..n {
        let s = if j == 0 { drho } else { rho_over_r };
        for i in 0..n {
            bp[(i, j)] *= s;
        }
    }
    let perms = permutations(n);
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let mut total = 0.0;
    for idx in MultiIndex::all_even(n) {
        let weight = curvature_term_weight(&idx, ab.kappa);
        if weight == 0.0 {
            continue;
        }
        let k = idx.len();
        let cols_i = idx.zero_based();
        let cols_c = idx.complement().zero_based();
        let mut s = 0.0;
        for mu in &perms {
            let da = submatrix(&ab.a, &mu[..k], &cols_i).determinant();
            let db = submatrix(&bp, &mu[k..], &cols_c).determinant();
            s += permutation_sign(mu) * da * db;
        }
        total += shuffle_sign(&idx) * weight * s / (fact(k) * fact(n - k));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * PI.powf(-(n as f64) / 2.0) * (-rho * rho).exp() * total
}

/// Closed-form surface density for curvature `κ ∈ {−1, 0, 1}`:
/// `(1/2π) e^{-ρ²} [κ det(½(G+I))/cn(d/2) + ρ′ (ρ/r) (d/2)/sn(d/2) det(G − I)]`.
pub fn surface_closed_form(kappa: f64, d: f64, g: &DMatrix<f64>, rho: f64, drho: f64, rho_over_r: f64) -> f64 {
    if rho > RHO_CUTOFF {
        return 0.0;
    }
    let id = DMatrix::identity(2, 2);
    let (_, cn, s_over_sn) = sn_cn(kappa, 0.5 * d);
    let horiz = kappa * ((g + &id) * 0.5).determinant() / cn;
    let vert = drho * rho_over_r * s_over_sn * (g - &id).determinant();
    (-rho * rho).exp() * (horiz + vert) / (2.0 * PI)
}

/// The κ = −1 surface formula with the vertical term `ρ′ (d/2)/sinh(d/2) det(½(G − I))`.
///
/// Kept for comparison: its d → 0 limit differs from the flat density by `4ρ/r`.
pub fn surface_closed_form_unscaled_vertical(d: f64, g: &DMatrix<f64>, rho: f64, drho: f64) -> f64 {
    let id = DMatrix::identity(2, 2);
    let (_, cn, s_over_sn) = sn_cn(-1.0, 0.5 * d);
    let horiz = -((g + &id) * 0.5).determinant() / cn;
    let vert = drho * s_over_sn * ((g - &id) * 0.5).determinant();
    (-rho * rho).exp() * (horiz + vert) / (2.0 * PI)
}

/// Flat density `(2π)^{-n/2} e^{-ρ²} ρ′ (ρ/r)^{n−1} det(I − G)`.
pub fn flat_closed_form(g: &DMatrix<f64>, rho: f64, drho: f64, rho_over_r: f64) -> f64 {
    if rho > RHO_CUTOFF {
        return 0.0;
    }
    let n = g.nrows();
    let det = (DMatrix::identity(n, n) - g).determinant();
    (2.0 * PI).powf(-(n as f64) / 2.0) * (-rho * rho).exp() * drho * rho_over_r.powi(n as i32 - 1) * det
}

/// Pointwise density of the curved assembly from `(κ, d, G)` in parallel frames.
pub fn constcurv_density(kappa: f64, d: f64, g: &DMatrix<f64>, profile: &RadialProfile) -> Result<f64> {
    match profile.eval(d / SQRT_2) {
        ProfileValue::Outside => Ok(0.0),
        ProfileValue::Inside { rho, drho, rho_over_r } => {
            let ab = ab_matrices(kappa, d, g)?;
            Ok(generic_assembly(&ab, rho, drho, rho_over_r))
        }
    }
}

/// Matrix of `df_x` in the parallel frames along the geodesic from `x` to `f(x)`.
pub fn parallel_frame_differential(m: &ModelGeometry, g: &GeodesicData, df: &DMatrix<f64>) -> DMatrix<f64> {
    let (ex, fy) = m.geodesic_frames(g);
    fy.transpose() * df * ex
}

/// Density of the flat integrand at `x` (zero outside the tube).
pub fn lefschetz_integrand_flat<F: SelfMap + ?Sized>(f: &F, p: &RadialProfile, x: &ManifoldPoint) -> Result<f64> {
    let m = f.geometry();
    if !m.is_flat() {
        return Err(LefError::UnsupportedManifold(format!("flat integrand on {m}")));
    }
    let y = f.eval(x);
    if m.cut_margin(x, &y) <= CUT_TOL {
        return Ok(0.0);
    }
    let d = m.distance(x, &y);
    match p.eval(d / SQRT_2) {
        ProfileValue::Outside => Ok(0.0),
        ProfileValue::Inside { rho, drho, rho_over_r } => {
            if rho > RHO_CUTOFF {
                return Ok(0.0);
            }
            Ok(flat_closed_form(&f.differential(x), rho, drho, rho_over_r))
        }
    }
}

/// Density of the constant-curvature surface integrand at `x` (zero outside the tube).
pub fn lefschetz_integrand_constcurv<F: SelfMap + ?Sized>(f: &F, p: &RadialProfile, x: &ManifoldPoint) -> Result<f64> {
    let m = f.geometry();
    if m.is_flat() || m.dim() != 2 {
        return Err(LefError::UnsupportedManifold(format!("curved integrand on {m}")));
    }
    let y = f.eval(x);
    if m.cut_margin(x, &y) <= CUT_TOL {
        return Ok(0.0);
    }
    let d = m.distance(x, &y);
    if !(d / SQRT_2 < p.eps) {
        return Ok(0.0);
    }
    let g = m.geodesic_between(x, &y)?;
    let gp = parallel_frame_differential(m, &g, &f.differential(x));
    constcurv_density(m.curvature(), g.d, &gp, p)
}

/// Dispatches to the flat or curved integrand.
pub fn lefschetz_density<F: SelfMap + ?Sized>(f: &F, p: &RadialProfile, x: &ManifoldPoint) -> Result<f64> {
    if f.geometry().is_flat() {
        lefschetz_integrand_flat(f, p, x)
    } else {
        lefschetz_integrand_constcurv(f, p, x)
    }
}

/// Mass of the pulled-back top vertical term over one `n`-dimensional fiber disk.
///
/// With the angular factor `(ρ/r)^{n−1}` the Thom condition gives exactly 1.
pub fn fiber_mass(n: usize, p: &RadialProfile, with_angular_factor: bool) -> f64 {
    let sphere_area = match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => panic!("fiber_mass supports n ≤ 4"),
    };
    let (nodes, weights) = gauss_legendre(16);
    let panels = 400;
    let mut sum = 0.0;
    for k in 0..panels {
        // Panels cluster geometrically toward the tube edge where ρ blows up.
        let lo = p.eps * (1.0 - 0.97f64.powi(k));
        let hi = p.eps * (1.0 - 0.97f64.powi(k + 1));
        for (t, w) in nodes.iter().zip(&weights) {
            let r = 0.5 * (hi - lo) * t + 0.5 * (hi + lo);
            if let ProfileValue::Inside { rho, drho, rho_over_r } = p.eval(r) {
                if rho > RHO_CUTOFF {
                    continue;
                }
                let ang = if with_angular_factor { rho_over_r.powi(n as i32 - 1) } else { 1.0 };
                sum += 0.5 * (hi - lo) * w * (-rho * rho).exp() * drho * ang * r.powi(n as i32 - 1);
            }
        }
    }
    sphere_area * PI.powf(-(n as f64) / 2.0) * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::SmoothSelfMap;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix<R: Rng>(rng: &mut R, n: usize, s: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * s)
    }

    #[test]
    fn profile_values_at_zero_and_edge() {
        let eps = 1.3;
        match RadialProfile::new(ProfileKind::Secant, eps).eval(0.0) {
            ProfileValue::Inside { rho, drho, rho_over_r } => assert_eq!((rho, drho, rho_over_r), (0.0, 0.0, 0.0)),
            _ => panic!(),
        }
        match RadialProfile::new(ProfileKind::RationalOdd, eps).eval(0.0) {
            ProfileValue::Inside { rho, drho, rho_over_r } => assert_eq!((rho, drho, rho_over_r), (0.0, 1.0, 1.0)),
            _ => panic!(),
        }
        for kind in [ProfileKind::Secant, ProfileKind::Tangent, ProfileKind::RationalOdd] {
            assert_eq!(RadialProfile::new(kind, eps).eval(eps), ProfileValue::Outside);
        }
    }

    #[test]
    fn profile_derivatives_match_differences() {
        for kind in [ProfileKind::Secant, ProfileKind::Tangent, ProfileKind::RationalOdd] {
            let p = RadialProfile::new(kind, 1.0);
            for &r in &[0.05, 0.3, 0.7, 0.95] {
                let get = |r: f64| match p.eval(r) {
                    ProfileValue::Inside { rho, drho, rho_over_r } => (rho, drho, rho_over_r),
                    _ => panic!(),
                };
                let h = 1e-6;
                let fd = (get(r + h).0 - get(r - h).0) / (2.0 * h);
                let (rho, drho, ror) = get(r);
                assert!((fd - drho).abs() < 1e-5 * (1.0 + drho.abs()), "{kind:?} r={r}");
                assert!((ror - rho / r).abs() < 1e-12 * (1.0 + ror));
            }
        }
    }

    #[test]
    fn profile_tail_vanishes() {
        for kind in [ProfileKind::Secant, ProfileKind::Tangent, ProfileKind::RationalOdd] {
            let p = RadialProfile::new(kind, 1.0);
            if let ProfileValue::Inside { rho, drho, .. } = p.eval(1.0 - 1e-4) {
                assert!((-rho * rho).exp() * drho < 1e-12);
            }
        }
    }

    #[test]
    fn fiber_mass_is_one_with_angular_factor() {
        for kind in [ProfileKind::Secant, ProfileKind::Tangent, ProfileKind::RationalOdd] {
            for n in 1..=4 {
                let m = fiber_mass(n, &RadialProfile::new(kind, 0.9), true);
                assert!((m - 1.0).abs() < 1e-9, "{kind:?} n={n}: {m}");
            }
        }
        // Without the angular factor the mass is wrong once n ≥ 2.
        let m = fiber_mass(2, &RadialProfile::new(ProfileKind::RationalOdd, 0.9), false);
        assert!((m - 1.0).abs() > 0.1);
    }

    #[test]
    fn flat_decomposition_pattern() {
        let q = [0.3, -1.2];
        let w = [0.7, 0.4];
        let vh = jacobi_decompose(0.0, 0.8, &q, &w).unwrap();
        for i in 0..2 {
            assert_eq!(vh.vertical_x[i], 0.5 * (q[i] - w[i]));
            assert_eq!(vh.vertical_y[i], 0.5 * (w[i] - q[i]));
        }
    }

    #[test]
    fn hyperbolic_midpoint_velocity() {
        let (q, w, d) = ([0.2, -0.5], [1.1, 0.9], 1.7);
        let vh = jacobi_decompose(-1.0, d, &q, &w).unwrap();
        let v = vh.midpoint_velocity();
        assert!((v[1] - (w[1] - q[1]) / (2.0 * (d / 2.0).sinh())).abs() < 1e-14);
        assert!((v[0] - (w[0] - q[0]) / d).abs() < 1e-14);
    }

    #[test]
    fn conjugate_point_error() {
        assert!(matches!(jacobi_decompose(1.0, PI, &[1.0, 0.0], &[1.0, 0.0]), Err(LefError::ConjugatePoint { .. })));
    }

    #[test]
    fn spherical_decomposition_tends_to_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let q = [rng.random::<f64>(), rng.random::<f64>()];
            let w = [rng.random::<f64>(), rng.random::<f64>()];
            for &d in &[1e-2, 5e-3] {
                let a = jacobi_decompose(1.0, d, &q, &w).unwrap();
                let b = jacobi_decompose(0.0, d, &q, &w).unwrap();
                for i in 0..2 {
                    assert!((a.midpoint_position[i] - b.midpoint_position[i]).abs() < d * d);
                    assert!((a.midpoint_velocity_scaled[i] - b.midpoint_velocity_scaled[i]).abs() < d * d);
                }
            }
        }
    }

    #[test]
    fn hyperbolic_b_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let g = random_matrix(&mut rng, 2, 2.0);
            let d = rng.random::<f64>() * 3.0;
            let ab = ab_matrices(-1.0, d, &g).unwrap();
            let want_b = d / (4.0 * (d / 2.0).sinh()) * (&g - DMatrix::identity(2, 2)).determinant();
            assert!((ab.b.determinant() - want_b).abs() < 1e-10);
            let want_a = 2.0 / (d / 2.0).cosh() * ((&g + DMatrix::identity(2, 2)) * 0.5).determinant();
            assert!((ab.a.determinant() - want_a).abs() < 1e-10);
        }
        let ab = ab_matrices(-1.0, 0.9, &DMatrix::identity(2, 2)).unwrap();
        assert!(ab.b.determinant().abs() < 1e-15);
    }

    #[test]
    fn flat_ab_are_half_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in 1..=3 {
            let g = random_matrix(&mut rng, n, 2.0);
            let ab = ab_matrices(0.0, 0.7, &g).unwrap();
            let id = DMatrix::identity(n, n);
            assert!((ab.a_half() - (&g + &id) * 0.5).amax() < 1e-15);
            assert!((ab.b_half() - (&g - &id) * 0.5).amax() < 1e-15);
        }
    }

    #[test]
    fn generic_assembly_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let g = random_matrix(&mut rng, 2, 2.0);
            let d = rng.random::<f64>() * 2.0;
            let (rho, drho, ror) = (rng.random::<f64>(), rng.random::<f64>() * 3.0, rng.random::<f64>() * 2.0);
            for kappa in [-1.0, 0.0, 1.0] {
                let ab = ab_matrices(kappa, d, &g).unwrap();
                let gen = generic_assembly(&ab, rho, drho, ror);
                let cf = surface_closed_form(kappa, d, &g, rho, drho, ror);
                assert!((gen - cf).abs() < 1e-10, "κ={kappa}: {gen} vs {cf}");
            }
        }
        for n in [1, 3] {
            for _ in 0..200 {
                let g = random_matrix(&mut rng, n, 2.0);
                let (rho, drho, ror) = (rng.random::<f64>(), rng.random::<f64>() * 3.0, rng.random::<f64>() * 2.0);
                let ab = ab_matrices(0.0, 0.5, &g).unwrap();
                let gen = generic_assembly(&ab, rho, drho, ror);
                assert!((gen - flat_closed_form(&g, rho, drho, ror)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unscaled_vertical_term_disagrees_with_flat_limit() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, -0.4, 0.5]);
        let p = RadialProfile::new(ProfileKind::RationalOdd, 1.0);
        let r = 0.3;
        let d = r * SQRT_2;
        let ProfileValue::Inside { rho, drho, rho_over_r } = p.eval(r) else { panic!() };
        let ours = surface_closed_form(-1.0, d, &g, rho, drho, rho_over_r);
        let other = surface_closed_form_unscaled_vertical(d, &g, rho, drho);
        let horiz = surface_closed_form(-1.0, d, &g, 0.0, 0.0, 0.0) * (-rho * rho).exp();
        let ratio = (ours - horiz) / (other - horiz);
        assert!((ratio - 4.0 * rho_over_r).abs() < 1e-10);
    }

    #[test]
    fn fixed_point_limit() {
        // At d = 0: (1/2π)[κ det(½(G+I)) + ρ′(0)·(ρ/r)(0)·det(G − I)].
        let g = DMatrix::from_row_slice(2, 2, &[0.3, 0.8, -0.2, 1.4]);
        let p = RadialProfile::new(ProfileKind::Tangent, 1.0);
        let a = PI / 2.0;
        let v0 = constcurv_density(1.0, 0.0, &g, &p).unwrap();
        let want = (((&g + DMatrix::identity(2, 2)) * 0.5).determinant() + a * a * (&g - DMatrix::identity(2, 2)).determinant())
            / (2.0 * PI);
        assert!((v0 - want).abs() < 1e-14);
        let v1 = constcurv_density(1.0, 1e-4, &g, &p).unwrap();
        assert!((v1 - v0).abs() < 1e-6);
    }

    #[test]
    fn identity_on_sphere_is_curvature_over_two_pi() {
        let f = SmoothSelfMap::identity(ModelGeometry::Sphere2);
        let p = RadialProfile::new(ProfileKind::Secant, 0.45 * PI);
        let x = ManifoldPoint::new(&[0.6, 0.0, 0.8]);
        assert!((lefschetz_density(&f, &p, &x).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let t = SmoothSelfMap::identity(ModelGeometry::standard_torus(2));
        assert_eq!(lefschetz_density(&t, &p, &ManifoldPoint::new(&[0.1, 0.2])).unwrap(), 0.0);
    }

    #[test]
    fn curved_tends_to_flat_for_small_displacements() {
        // Rescaling a small sphere patch: the vertical part dominates and tends to the flat density.
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let p = RadialProfile::new(ProfileKind::RationalOdd, 1.0);
        for _ in 0..1000 {
            let g = random_matrix(&mut rng, 2, 2.0);
            let d = rng.random::<f64>() * 0.02;
            let ProfileValue::Inside { rho, drho, rho_over_r } = p.eval(d / SQRT_2) else { panic!() };
            for kappa in [-1.0, 1.0] {
                let c = surface_closed_form(kappa, d, &g, rho, drho, rho_over_r);
                let hor = surface_closed_form(kappa, 0.0, &g, rho, 0.0, 0.0);
                let flat = flat_closed_form(&g, rho, drho, rho_over_r);
                let scale = 1.0 + g.amax() * g.amax();
                assert!((c - hor - flat).abs() < 2.0 * d * d * scale);
            }
        }
    }

    proptest! {
        #[test]
        fn prop_vh_linearity(kappa in prop::sample::select(vec![-1.0, 0.0, 1.0]),
                             d in 0.0f64..3.0,
                             q in prop::array::uniform2(-3.0f64..3.0),
                             w in prop::array::uniform2(-3.0f64..3.0)) {
            let vh = jacobi_decompose(kappa, d, &q, &w).unwrap();
            for i in 0..2 {
                prop_assert!((vh.vertical_x[i] + vh.horizontal_x[i] - q[i]).abs() < 1e-10);
                prop_assert!((vh.vertical_y[i] + vh.horizontal_y[i] - w[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn prop_profile_monotone(kind in prop::sample::select(vec![ProfileKind::Secant, ProfileKind::Tangent, ProfileKind::RationalOdd]),
                                 a in 0.0f64..0.99, b in 0.0f64..0.99) {
            let p = RadialProfile::new(kind, 1.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            let get = |r: f64| match p.eval(r) { ProfileValue::Inside { rho, .. } => rho, _ => f64::INFINITY };
            prop_assert!(get(lo) < get(hi));
        }
    }
}
