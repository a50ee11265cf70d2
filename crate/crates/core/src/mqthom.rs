//! Multi-index algebra and the Mathai-Quillen Thom form in a synchronous frame.
//!
//! The form on a rank-n bundle at fiber point `x` with curvature `Ω` is
//! `π^{-n/2} e^{-|x|²} Σ_{|I| even} ε(I,I′) Pf(½Ω_I) dx^{I′}`; the normalization
//! is `π^{-n/2}` for every rank, odd ranks included.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{LefError, Result};
use crate::quadrature::gauss_hermite;

/// Strictly increasing subset of `{1..n}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    members: Vec<usize>,
    n: usize,
}

impl MultiIndex {
    pub fn new(members: &[usize], n: usize) -> Result<Self> {
        let ok = members.windows(2).all(|w| w[0] < w[1]) && members.iter().all(|&m| m >= 1 && m <= n);
        if !ok {
            return Err(LefError::InvalidArgument(format!("multi-index {members:?} in rank {n}")));
        }
        Ok(Self { members: members.to_vec(), n })
    }

    pub fn empty(n: usize) -> Self {
        Self { members: vec![], n }
    }

    pub fn full(n: usize) -> Self {
        Self { members: (1..=n).collect(), n }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Zero-based members.
    pub fn zero_based(&self) -> Vec<usize> {
        self.members.iter().map(|m| m - 1).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn complement(&self) -> Self {
        Self { members: (1..=self.n).filter(|i| !self.members.contains(i)).collect(), n: self.n }
    }

    /// All k-element multi-indices of `{1..n}` in lexicographic order.
    pub fn all_of_size(k: usize, n: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if cur.len() == k {
                out.push(MultiIndex { members: cur.clone(), n });
                return;
            }
            for i in start..=n {
                cur.push(i);
                rec(i + 1, k, n, cur, out);
                cur.pop();
            }
        }
        rec(1, k, n, &mut cur, &mut out);
        out
    }

    /// All subsets of `{1..n}` of even size.
    pub fn all_even(n: usize) -> Vec<Self> {
        (0..=n).step_by(2).flat_map(|k| Self::all_of_size(k, n)).collect()
    }
}

/// Sign of the shuffle permutation `(I, I′)`: `dx^I ∧ dx^{I′} = ε(I,I′) dx^1∧…∧dx^n`.
pub fn shuffle_sign(i: &MultiIndex) -> f64 {
    // Each member m at position p is preceded in the concatenation by the
    // (m − 1 − p) complement elements smaller than m that it jumps over.
    let inversions: usize = i.members.iter().enumerate().map(|(p, &m)| m - 1 - p).sum();
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of a permutation given as an array.
pub fn permutation_sign(p: &[usize]) -> f64 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1.0;
    for s in 0..p.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut j = s;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// All permutations of `0..k` in Heap order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..k).collect();
    fn heap(m: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..m {
            heap(m - 1, a, out);
            if m % 2 == 0 {
                a.swap(i, m - 1);
            } else {
                a.swap(0, m - 1);
            }
        }
    }
    heap(k, &mut a, &mut out);
    out
}

pub fn antisymmetry_defect(a: &DMatrix<f64>) -> f64 {
    (a + a.transpose()).amax()
}

/// Pfaffian by expansion along the first row; sizes up to 8 are intended.
pub fn pfaffian(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(LefError::InvalidArgument("pfaffian of a non-square matrix".into()));
    }
    let defect = antisymmetry_defect(a);
    if defect > 1e-12 * (1.0 + a.amax()) {
        return Err(LefError::NotAntisymmetric { defect });
    }
    if a.nrows() % 2 == 1 {
        return Ok(0.0);
    }
    let idx: Vec<usize> = (0..a.nrows()).collect();
    Ok(pf_rec(a, &idx))
}

fn pf_rec(a: &DMatrix<f64>, idx: &[usize]) -> f64 {
    match idx.len() {
        0 => 1.0,
        2 => a[(idx[0], idx[1])],
        _ => {
            let mut s = 0.0;
            for j in 1..idx.len() {
                let v = a[(idx[0], idx[j])];
                if v == 0.0 {
                    continue;
                }
                let rest: Vec<usize> = idx[1..].iter().enumerate().filter(|(p, _)| p + 1 != j).map(|(_, &q)| q).collect();
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                s += sign * v * pf_rec(a, &rest);
            }
            s
        }
    }
}

/// Principal submatrix on a zero-based index list.
pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Coefficient table of the Thom form at one fiber point.
#[derive(Clone, Debug)]
pub struct MQCoefficients {
    pub n: usize,
    pub x: Vec<f64>,
    pub curvature: DMatrix<f64>,
    /// Pairs `(I, c_I)` over even `|I|`; `c_I` multiplies `dx^{I′}`.
    pub terms: Vec<(MultiIndex, f64)>,
}

impl MQCoefficients {
    pub fn coefficient(&self, i: &MultiIndex) -> Option<f64> {
        self.terms.iter().find(|(j, _)| j == i).map(|(_, c)| *c)
    }

    /// Coefficient of the top vertical-degree term `dx^1∧…∧dx^n`.
    pub fn top_vertical(&self) -> f64 {
        self.terms[0].1
    }
}

pub fn mq_coefficients(n: usize, curvature: &DMatrix<f64>, x: &[f64]) -> Result<MQCoefficients> {
    if curvature.nrows() != n || curvature.ncols() != n || x.len() != n {
        return Err(LefError::InvalidArgument("rank mismatch in Thom form".into()));
    }
    let defect = antisymmetry_defect(curvature);
    if defect > 1e-12 * (1.0 + curvature.amax()) {
        return Err(LefError::NotAntisymmetric { defect });
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let base = PI.powf(-(n as f64) / 2.0) * (-r2).exp();
    let half = curvature * 0.5;
    let mut terms = Vec::new();
    for i in MultiIndex::all_even(n) {
        let zi = i.zero_based();
        let pf = pf_rec(&half, &zi);
        terms.push((i.clone(), base * shuffle_sign(&i) * pf));
    }
    Ok(MQCoefficients { n, x: x.to_vec(), curvature: curvature.clone(), terms })
}

/// Integral over one fiber of the top vertical-degree part, by tensor Gauss-Hermite quadrature.
pub fn fiber_integral(n: usize, curvature: &DMatrix<f64>) -> Result<f64> {
    let (nodes, weights) = gauss_hermite(12);
    let m = nodes.len();
    let total = m.pow(n as u32);
    let mut sum = 0.0;
    let mut x = vec![0.0; n];
    for flat in 0..total {
        let mut k = flat;
        let mut w = 1.0;
        for xi in x.iter_mut() {
            let j = k % m;
            k /= m;
            *xi = nodes[j];
            w *= weights[j];
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let c = mq_coefficients(n, curvature, &x)?.top_vertical();
        // Gauss-Hermite weights already carry e^{-|x|²}.
        sum += w * c * r2.exp();
    }
    Ok(sum)
}

/// `Σ_{σ,τ∈Σ_{|I|}} sgn σ sgn τ Π R_{σ(2i−1)σ(2i)τ(2i−1)τ(2i)}` for constant curvature `κ`,
/// with the sign convention `R_{1212} = −κ`.
pub fn pfaffian_sum_constcurv(i: &MultiIndex, kappa: f64) -> f64 {
    let k = i.len();
    assert!(k % 2 == 0, "odd multi-index in curvature sum");
    if k == 0 {
        return 1.0;
    }
    let r = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        let dd = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
        -kappa * (dd(a, c) * dd(b, d) - dd(a, d) * dd(b, c))
    };
    let perms = permutations(k);
    let mut s = 0.0;
    for sg in &perms {
        let ss = permutation_sign(sg);
        for tau in &perms {
            let mut prod = ss * permutation_sign(tau);
            for p in 0..k / 2 {
                prod *= r(sg[2 * p], sg[2 * p + 1], tau[2 * p], tau[2 * p + 1]);
                if prod == 0.0 {
                    break;
                }
            }
            s += prod;
        }
    }
    s
}

/// Closed form of [`pfaffian_sum_constcurv`]: `(2k)! 2^k (−κ)^k` for `|I| = 2k`.
pub fn pfaffian_sum_closed_form(size: usize, kappa: f64) -> f64 {
    let k = size / 2;
    let fact: f64 = (1..=size).map(|v| v as f64).product();
    fact * 2f64.powi(k as i32) * (-kappa).powi(k as i32)
}

/// Expansion constant of `Pf(½Ω_I)` in curvature components: `(−1)^k / (2^{2k} k!)` for `|I| = 2k`.
pub fn c_coefficient(size: usize) -> f64 {
    let k = size / 2;
    let kf: f64 = (1..=k).map(|v| v as f64).product();
    (-1f64).powi(k as i32) / (4f64.powi(k as i32) * kf)
}
