//! Deterministic product-grid quadrature on the compact models.
//!
//! Node values are computed in parallel into a vector and reduced by a fixed
//! balanced binary tree over node index, so the result does not depend on the
//! number of workers.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutflow::{DeformationTube, DeformedMap, TimeProfile};
use crate::error::{LefError, Result};
use crate::geometry::{ManifoldPoint, ModelGeometry};
use crate::integrand::{lefschetz_density, ProfileKind, RadialProfile};
use crate::maps::{SelfMap, SmoothSelfMap};
use crate::oracles;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LEFSCHETZ_THREADS";

/// Gauss–Hermite nodes and weights for `∫ e^{-x²} g(x) dx` (Golub–Welsch).
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            (0.5 * i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|k| (eig.eigenvalues[k], PI.sqrt() * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 0 { 1.0 } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub geometry: ModelGeometry,
    pub resolution: usize,
    /// Node counts along each grid axis (latitude then longitude on the sphere).
    pub shape: Vec<usize>,
    pub nodes: Vec<ManifoldPoint>,
    pub weights: Vec<f64>,
    pub total_weight: f64,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest geodesic node spacing.
    pub fn spacing(&self) -> f64 {
        match &self.geometry {
            ModelGeometry::Circle { radius } => 2.0 * PI * radius / self.resolution as f64,
            ModelGeometry::Torus { periods } => periods.iter().cloned().fold(0.0, f64::max) / self.resolution as f64,
            _ => 2.0 * PI / self.shape[1] as f64 * 1.5,
        }
    }

    /// Multi-index of node `i` along the grid axes.
    pub fn grid_index(&self, i: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        let mut r = i;
        for a in (0..self.shape.len()).rev() {
            out[a] = r % self.shape[a];
            r /= self.shape[a];
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    /// Grid neighbours of node `i` (periodic axes wrap; sphere latitude does not).
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let idx = self.grid_index(i);
        let mut out = Vec::with_capacity(2 * idx.len());
        for a in 0..idx.len() {
            let periodic = !(matches!(self.geometry, ModelGeometry::Sphere2) && a == 0);
            for step in [-1i64, 1] {
                let v = idx[a] as i64 + step;
                let s = self.shape[a] as i64;
                let v = if periodic {
                    v.rem_euclid(s)
                } else if v < 0 || v >= s {
                    continue;
                } else {
                    v
                };
                let mut j = idx.clone();
                j[a] = v as usize;
                let k = self.flat_index(&j);
                if k != i && !out.contains(&k) {
                    out.push(k);
                }
            }
        }
        out
    }
}

/// Uniform product grid on the flat models; Gauss–Legendre in `cos` colatitude times uniform longitude on the sphere.
pub fn build_grid(m: &ModelGeometry, resolution: usize) -> Result<QuadratureGrid> {
    if resolution < 8 {
        return Err(LefError::InvalidArgument(format!("resolution {resolution} < 8")));
    }
    m.validate()?;
    let (shape, nodes, weights): (Vec<usize>, Vec<ManifoldPoint>, Vec<f64>) = match m {
        ModelGeometry::Circle { radius } => {
            let h = 2.0 * PI / resolution as f64;
            let nodes = (0..resolution).map(|k| ManifoldPoint::new(&[k as f64 * h])).collect();
            (vec![resolution], nodes, vec![h * radius; resolution])
        }
        ModelGeometry::Torus { periods } => {
            let n = periods.len();
            let count = resolution.pow(n as u32);
            let w = periods.iter().product::<f64>() / count as f64;
            let mut nodes = Vec::with_capacity(count);
            for i in 0..count {
                let mut c = vec![0.0; n];
                let mut r = i;
                for a in (0..n).rev() {
                    c[a] = (r % resolution) as f64 * periods[a] / resolution as f64;
                    r /= resolution;
                }
                nodes.push(ManifoldPoint::new(&c));
            }
            (vec![resolution; n], nodes, vec![w; count])
        }
        ModelGeometry::Sphere2 => {
            let (nlat, nlon) = (resolution, 2 * resolution);
            let (z, wz) = gauss_legendre(nlat);
            let dphi = 2.0 * PI / nlon as f64;
            let mut nodes = Vec::with_capacity(nlat * nlon);
            let mut weights = Vec::with_capacity(nlat * nlon);
            for (zi, wi) in z.iter().zip(&wz) {
                let s = (1.0 - zi * zi).sqrt();
                for k in 0..nlon {
                    let phi = (k as f64 + 0.5) * dphi;
                    nodes.push(ManifoldPoint::new(&[s * phi.cos(), s * phi.sin(), *zi]));
                    weights.push(wi * dphi);
                }
            }
            (vec![nlat, nlon], nodes, weights)
        }
        ModelGeometry::HyperbolicPatch => {
            return Err(LefError::UnsupportedManifold("no compact quadrature domain on the hyperbolic patch".into()))
        }
    };
    let total_weight = tree_sum(&weights);
    Ok(QuadratureGrid { geometry: m.clone(), resolution, shape, nodes, weights, total_weight })
}

/// Balanced pairwise sum with a tree shape fixed by the slice length.
pub fn tree_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 16;
    const PAR: usize = 1 << 14;
    if v.len() <= LEAF {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    if v.len() >= PAR {
        let (a, b) = rayon::join(|| tree_sum(&v[..mid]), || tree_sum(&v[mid..]));
        a + b
    } else {
        tree_sum(&v[..mid]) + tree_sum(&v[mid..])
    }
}

/// Worker cap from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs `op` on a pool of `workers` threads, or on the global pool when `None`.
pub fn run_with_workers<T: Send>(workers: Option<usize>, op: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        },
        None => op(),
    }
}

/// Weighted node values `w_i·density(x_i)`, checked for finiteness.
pub fn weighted_values<D>(grid: &QuadratureGrid, density: D) -> Result<Vec<f64>>
where
    D: Fn(&ManifoldPoint) -> Result<f64> + Sync,
{
    let raw: Vec<Result<f64>> = grid
        .nodes
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(x, w)| density(x).map(|v| v * w))
        .collect();
    let mut out = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let v = r?;
        if !v.is_finite() {
            return Err(LefError::NonFiniteDensity { index: i, coords: grid.nodes[i].coords().to_vec(), value: v });
        }
        out.push(v);
    }
    Ok(out)
}

/// `Σ w_i·density(x_i)` using the worker cap from the environment.
pub fn integrate_density<D>(grid: &QuadratureGrid, density: D) -> Result<f64>
where
    D: Fn(&ManifoldPoint) -> Result<f64> + Sync + Send,
{
    integrate_density_with_workers(grid, density, workers_from_env())
}

pub fn integrate_density_with_workers<D>(grid: &QuadratureGrid, density: D, workers: Option<usize>) -> Result<f64>
where
    D: Fn(&ManifoldPoint) -> Result<f64> + Sync + Send,
{
    run_with_workers(workers, || weighted_values(grid, density).map(|v| tree_sum(&v)))
}

/// Quadrature options shared by single runs and sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComputeOptions {
    pub profile: ProfileKind,
    /// Absolute tube parameter ε.
    pub eps: f64,
    pub resolution: usize,
    pub t: f64,
    pub time_profile: TimeProfile,
    pub tube: DeformationTube,
}

impl ComputeOptions {
    /// Defaults for `m`: ε = 0.45·inj, the model's default profile, `t = 1`.
    pub fn for_geometry(m: &ModelGeometry, resolution: usize) -> Self {
        Self {
            profile: ProfileKind::default_for(m),
            eps: 0.45 * m.injectivity_radius(),
            resolution,
            t: 1.0,
            time_profile: TimeProfile::TangentHalf,
            tube: DeformationTube::default_for(m),
        }
    }

    pub fn radial(&self) -> RadialProfile {
        RadialProfile::new(self.profile, self.eps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LefschetzReport {
    pub manifold: String,
    pub map: String,
    pub integral: f64,
    pub oracle: Option<i64>,
    pub residual: Option<f64>,
    pub resolution: usize,
    pub nodes: usize,
    pub profile: ProfileKind,
    pub eps: f64,
    pub t: f64,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_fraction: Option<f64>,
}

/// Quadrature of the integrand of `tf` (with `1f = f`) against the cohomological oracle.
pub fn compute_lefschetz(f: &SmoothSelfMap, opts: &ComputeOptions) -> Result<LefschetzReport> {
    let start = Instant::now();
    let m = f.geometry();
    if matches!(m, ModelGeometry::HyperbolicPatch) {
        return Err(LefError::UnsupportedManifold("compute_lefschetz on the hyperbolic patch".into()));
    }
    let grid = build_grid(m, opts.resolution)?;
    let values = deformed_values(f, opts, &grid)?;
    let integral = tree_sum(&values);
    let oracle = oracles::cohomological_lefschetz(f).ok();
    Ok(LefschetzReport {
        manifold: m.to_string(),
        map: f.descriptor(),
        integral,
        oracle,
        residual: oracle.map(|o| (integral - o as f64).abs()),
        resolution: opts.resolution,
        nodes: grid.len(),
        profile: opts.profile,
        eps: opts.eps,
        t: opts.t,
        wall_time_s: start.elapsed().as_secs_f64(),
        mass_fraction: None,
    })
}

fn deformed_values(f: &SmoothSelfMap, opts: &ComputeOptions, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    let p = opts.radial();
    run_with_workers(workers_from_env(), || {
        if opts.t == 1.0 {
            weighted_values(grid, |x| lefschetz_density(f, &p, x))
        } else {
            let g = DeformedMap::new(f, opts.t, opts.time_profile, opts.tube);
            weighted_values(grid, |x| lefschetz_density(&g, &p, x))
        }
    })
}

/// One report per `t`, each carrying the localization mass fraction at `δ = 0.1·inj` when a fixed set exists.
pub fn sweep_t(f: &SmoothSelfMap, opts: &ComputeOptions, t_values: &[f64]) -> Result<Vec<LefschetzReport>> {
    let delta = 0.1 * f.geometry().injectivity_radius();
    let fixed = oracles::find_fixed_points(f).ok();
    let mut out = Vec::with_capacity(t_values.len());
    for &t in t_values {
        if !(t > 0.0 && t.is_finite()) {
            return Err(LefError::InvalidArgument(format!("t = {t} outside (0, ∞)")));
        }
        let o = ComputeOptions { t, ..opts.clone() };
        let start = Instant::now();
        let m = f.geometry();
        let grid = build_grid(m, o.resolution)?;
        let values = deformed_values(f, &o, &grid)?;
        let integral = tree_sum(&values);
        let mass_fraction = fixed.as_ref().map(|fs| mass_fraction(m, &grid, &values, |x| fs.distance(m, x) <= delta));
        let oracle = oracles::cohomological_lefschetz(f).ok();
        out.push(LefschetzReport {
            manifold: m.to_string(),
            map: f.descriptor(),
            integral,
            oracle,
            residual: oracle.map(|v| (integral - v as f64).abs()),
            resolution: o.resolution,
            nodes: grid.len(),
            profile: o.profile,
            eps: o.eps,
            t,
            wall_time_s: start.elapsed().as_secs_f64(),
            mass_fraction,
        });
    }
    Ok(out)
}

fn mass_fraction<P: Fn(&ManifoldPoint) -> bool>(_m: &ModelGeometry, grid: &QuadratureGrid, values: &[f64], near: P) -> f64 {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let inside: Vec<f64> = abs.iter().zip(&grid.nodes).map(|(a, x)| if near(x) { *a } else { 0.0 }).collect();
    let total = tree_sum(&abs);
    if total == 0.0 {
        return 1.0;
    }
    tree_sum(&inside) / total
}

/// Share of `Σ|density|` carried by nodes within `δ` of the fixed set of `f`.
pub fn localization_mass(f: &SmoothSelfMap, opts: &ComputeOptions, delta: f64) -> Result<f64> {
    let fixed = oracles::find_fixed_points(f)?;
    if fixed.is_empty() {
        return Err(LefError::EmptyFixedSet);
    }
    let m = f.geometry();
    let grid = build_grid(m, opts.resolution)?;
    let values = deformed_values(f, opts, &grid)?;
    Ok(mass_fraction(m, &grid, &values, |x| fixed.distance(m, x) <= delta))
}

/// Quadrature of the curvature density `K/(2π)` over the sphere.
pub fn gauss_bonnet_sphere(resolution: usize) -> Result<f64> {
    let grid = build_grid(&ModelGeometry::Sphere2, resolution)?;
    integrate_density(&grid, |_| Ok(1.0 / (2.0 * PI)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(12);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-13);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((m8 - 105.0 * PI.sqrt() / 16.0).abs() < 1e-11);
    }

    #[test]
    fn legendre_exact_for_polynomials() {
        for m in [1, 2, 5, 16, 257] {
            let (x, w) = gauss_legendre(m);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "m={m}");
            let deg = 2 * m - 1;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg.min(40) as i32 - 1)).sum();
            let k = deg.min(40) - 1;
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - want).abs() < 1e-12, "m={m}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(&ModelGeometry::circle(1.0), 100).unwrap();
        assert_eq!(g.len(), 100);
        assert!(g.weights.iter().all(|w| (w - 2.0 * PI / 100.0).abs() < 1e-16));
        let s = build_grid(&ModelGeometry::Sphere2, 64).unwrap();
        assert!((s.total_weight - 4.0 * PI).abs() < 1e-10);
        assert!(s.nodes.iter().all(|p| p.v3()[2].abs() < 1.0));
        let t = build_grid(&ModelGeometry::standard_torus(2), 32).unwrap();
        assert!((t.total_weight - 4.0 * PI * PI).abs() < 1e-10);
        assert!(matches!(build_grid(&ModelGeometry::Sphere2, 7), Err(LefError::InvalidArgument(_))));
        assert!(matches!(build_grid(&ModelGeometry::HyperbolicPatch, 64), Err(LefError::UnsupportedManifold(_))));
    }

    #[test]
    fn grid_indexing_round_trip() {
        let t = build_grid(&ModelGeometry::standard_torus(2), 10).unwrap();
        for i in [0, 7, 55, 99] {
            assert_eq!(t.flat_index(&t.grid_index(i)), i);
        }
        assert_eq!(t.neighbours(0).len(), 4);
        assert!(t.neighbours(0).contains(&90));
        let s = build_grid(&ModelGeometry::Sphere2, 8).unwrap();
        assert_eq!(s.neighbours(0).len(), 3);
    }

    #[test]
    fn constant_density_gives_area() {
        let s = build_grid(&ModelGeometry::Sphere2, 32).unwrap();
        assert!((integrate_density(&s, |_| Ok(1.0)).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((gauss_bonnet_sphere(128).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_density_reports_node() {
        let g = build_grid(&ModelGeometry::circle(1.0), 16).unwrap();
        let err = integrate_density(&g, |x| Ok(if x.coords()[0] > 3.0 { f64::NAN } else { 1.0 })).unwrap_err();
        match err {
            LefError::NonFiniteDensity { index, .. } => assert_eq!(index, 8),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn tree_sum_is_worker_independent() {
        let g = build_grid(&ModelGeometry::Sphere2, 128).unwrap();
        let d = |x: &ManifoldPoint| Ok((3.0 * x.v3()[0]).sin() * x.v3()[2].exp());
        let a = integrate_density_with_workers(&g, d, Some(1)).unwrap();
        let b = integrate_density_with_workers(&g, d, Some(2)).unwrap();
        let c = integrate_density_with_workers(&g, d, Some(8)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c.to_bits());
    }
}
