//! Norms of alternating forms and a priori bounds on `|L(f)|`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LefError, Result};
use crate::geometry::ModelGeometry;
use crate::integrand::{ProfileValue, RadialProfile};
use crate::maps::{operator_norm_sup, spectral_norm, SelfMap, SmoothSelfMap};
use crate::mqthom::{submatrix, MultiIndex};
use crate::oracles::cohomological_lefschetz;
use crate::quadrature::build_grid;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// A `k`-form on `Rⁿ` in an orthonormal coframe, coefficients in lexicographic index order.
#[derive(Clone, Debug, PartialEq)]
pub struct AlternatingForm {
    pub k: usize,
    pub n: usize,
    pub indices: Vec<MultiIndex>,
    pub coeffs: Vec<f64>,
}

impl AlternatingForm {
    pub fn new(k: usize, n: usize, coeffs: Vec<f64>) -> Result<Self> {
        let indices = MultiIndex::all_of_size(k, n);
        if k == 0 || k > n || coeffs.len() != indices.len() {
            return Err(LefError::InvalidArgument(format!("{} coefficients for a {k}-form on R^{n}", coeffs.len())));
        }
        Ok(Self { k, n, indices, coeffs })
    }

    /// `θ^I` for a single 1-based index set.
    pub fn basis(members: &[usize], n: usize) -> Result<Self> {
        let idx = MultiIndex::new(members, n)?;
        let all = MultiIndex::all_of_size(idx.len(), n);
        let coeffs = all.iter().map(|j| if *j == idx { 1.0 } else { 0.0 }).collect();
        Self::new(idx.len(), n, coeffs)
    }

    pub fn random<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Self {
        let len = MultiIndex::all_of_size(k, n).len();
        Self::new(k, n, (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
    }

    /// `α(v_1, …, v_k)` for the columns of the `n × k` matrix `v`.
    pub fn eval(&self, v: &DMatrix<f64>) -> f64 {
        let cols: Vec<usize> = (0..self.k).collect();
        self.indices
            .iter()
            .zip(&self.coeffs)
            .map(|(i, c)| c * submatrix(v, &i.zero_based(), &cols).determinant())
            .sum()
    }
}

pub fn norm_l2(a: &AlternatingForm) -> f64 {
    a.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn normalize_columns(v: &mut DMatrix<f64>) -> bool {
    for j in 0..v.ncols() {
        let n = v.column(j).norm();
        if !(n > 1e-300) {
            return false;
        }
        v.column_mut(j).scale_mut(1.0 / n);
    }
    true
}

/// Block-coordinate ascent of `|α(v)|` over unit columns; each step is the exact maximizer in one column.
fn ascend(a: &AlternatingForm, mut v: DMatrix<f64>) -> f64 {
    if !normalize_columns(&mut v) {
        return 0.0;
    }
    let mut best = a.eval(&v).abs();
    for _ in 0..200 {
        for q in 0..a.k {
            // α is linear in column q: gradient by evaluation on basis vectors.
            let mut grad = vec![0.0; a.n];
            for (i, g) in grad.iter_mut().enumerate() {
                let mut w = v.clone();
                w.column_mut(q).fill(0.0);
                w[(i, q)] = 1.0;
                *g = a.eval(&w);
            }
            let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gn > 1e-300 {
                for i in 0..a.n {
                    v[(i, q)] = grad[i] / gn;
                }
            }
        }
        let val = a.eval(&v).abs();
        if val <= best * (1.0 + 1e-14) {
            best = best.max(val);
            break;
        }
        best = val;
    }
    best
}

/// Lower estimate of `|α|_∞ = sup |α(v)|/Π|v_q|` over decomposable `v`, seeded by coordinate tuples and random restarts.
pub fn norm_linf(a: &AlternatingForm, restarts: usize, seed: u64) -> f64 {
    let mut best: f64 = 0.0;
    for idx in &a.indices {
        let v = DMatrix::from_fn(a.n, a.k, |i, j| if i + 1 == idx.members()[j] { 1.0 } else { 0.0 });
        best = best.max(ascend(a, v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let v = DMatrix::from_fn(a.n, a.k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        best = best.max(ascend(a, v));
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    /// `binom(n,k)^{-1/2}`.
    pub lower: f64,
    /// `C(k, n) = sqrt(C′)`.
    pub upper: f64,
    /// Sampled sup of `Σ_I θ^I(v)²` over unit decomposable `v`.
    pub c_prime: f64,
    /// `sqrt(k!/binom(n,k) · C′)`, too small already at `k = 1, n = 2`.
    pub unscaled_upper: f64,
}

/// Sup of the Gram determinant `det(VᵀV)` over unit columns, by orthogonalizing ascent.
fn gram_sup(k: usize, n: usize, restarts: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..restarts.max(1) {
        let mut v = DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        if !normalize_columns(&mut v) {
            continue;
        }
        for _ in 0..50 {
            // Replacing a column by its unit component orthogonal to the others maximizes the Gram determinant in it.
            for q in 0..k {
                let mut col = v.column(q).clone_owned();
                let others: Vec<usize> = (0..k).filter(|&j| j != q).collect();
                if !others.is_empty() {
                    let o = DMatrix::from_fn(n, others.len(), |i, j| v[(i, others[j])]);
                    let g = o.transpose() * &o;
                    if let Some(gi) = g.try_inverse() {
                        col -= &o * (gi * (o.transpose() * &col));
                    }
                }
                let cn = col.norm();
                if cn > 1e-300 {
                    v.set_column(q, &(col / cn));
                }
            }
        }
        best = best.max((v.transpose() * &v).determinant());
    }
    best
}

pub fn lemma_constants(k: usize, n: usize, restarts: usize) -> Result<LemmaConstants> {
    if !(1 <= k && k <= n && n <= 4) {
        return Err(LefError::InvalidArgument(format!("lemma constants for k={k}, n={n}")));
    }
    let c_prime = gram_sup(k, n, restarts, 17 + (k * 10 + n) as u64);
    Ok(LemmaConstants {
        lower: binom(n, k).powf(-0.5),
        upper: c_prime.sqrt(),
        c_prime,
        unscaled_upper: (factorial(k) / binom(n, k) * c_prime).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatBound {
    /// `sup_r e^{-ρ²} ρ′ (ρ/r)^{n−1}`.
    pub c: f64,
    pub df_norm: f64,
    pub bound: f64,
    #[serde(rename = "L")]
    pub l: i64,
}

/// `sup_{0 ≤ r < ε} e^{-ρ²} ρ′ (ρ/r)^{n−1}` by dense sampling and golden-section polish.
pub fn profile_sup(p: &RadialProfile, n: usize) -> f64 {
    let val = |r: f64| match p.eval(r) {
        ProfileValue::Inside { rho, drho, rho_over_r } => (-rho * rho).exp() * drho * rho_over_r.powi(n as i32 - 1),
        ProfileValue::Outside => 0.0,
    };
    let samples = 20_000;
    let h = p.eps / samples as f64;
    let (mut best_r, mut best) = (0.0, val(0.0));
    for i in 1..samples {
        let v = val(i as f64 * h);
        if v > best {
            best = v;
            best_r = i as f64 * h;
        }
    }
    let (mut a, mut b) = ((best_r - h).max(0.0), (best_r + h).min(p.eps * (1.0 - 1e-12)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if val(c) > val(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(val(0.5 * (a + b)))
}

/// `C/(2π)^{n/2} · vol · (‖df‖ + 1)^n` for a flat model.
pub fn flat_bound(f: &SmoothSelfMap, p: &RadialProfile) -> Result<FlatBound> {
    let m = f.geometry();
    if !m.is_flat() {
        return Err(LefError::UnsupportedManifold(format!("flat bound on {m}")));
    }
    let n = m.dim();
    let res = if n == 1 { 512 } else { 32 };
    let grid = build_grid(m, res)?;
    let df_norm = operator_norm_sup(f, &grid.nodes);
    let c = profile_sup(p, n);
    let vol = m.volume().unwrap();
    let bound = c / (2.0 * PI).powf(n as f64 / 2.0) * vol * (df_norm + 1.0).powi(n as i32);
    Ok(FlatBound { c, df_norm, bound, l: cohomological_lefschetz(f)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeBound {
    pub df_norm: f64,
    pub bound: f64,
    #[serde(rename = "L")]
    pub l: i64,
}

/// `1 + Σ_{k ≥ 1} C(k,n) binom(n,k) β_k |df|^k` with parallel harmonic forms, `β_k = binom(n,k)`.
pub fn hodge_bound_flat_torus(f: &SmoothSelfMap) -> Result<HodgeBound> {
    let m = f.geometry();
    if !matches!(m, ModelGeometry::Torus { .. }) {
        return Err(LefError::UnsupportedManifold(format!("Hodge bound on {m}")));
    }
    let n = m.dim();
    let df_norm = match f.integer_matrix() {
        Some(_) => spectral_norm(&f.differential(&m.point(&vec![0.0; n])?)),
        None => operator_norm_sup(f, &build_grid(m, 32)?.nodes),
    };
    let mut bound = 1.0;
    for k in 1..=n {
        let c = lemma_constants(k, n, 64)?.upper;
        bound += c * binom(n, k) * binom(n, k) * df_norm.powi(k as i32);
    }
    Ok(HodgeBound { df_norm, bound, l: cohomological_lefschetz(f)? })
}
