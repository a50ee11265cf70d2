//! Topological oracles for `L(f)`: fixed-point indices, fixed submanifolds,
//! traces on cohomology and winding numbers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LefError, Result};
use crate::geometry::{dot3, wrap_centered, ManifoldPoint, ModelGeometry, TangentVector};
use crate::maps::{MapFamily, SelfMap, SmoothSelfMap};

/// `|det(Id − df)|` at or below this is degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointRecord {
    pub point: ManifoldPoint,
    pub differential: DMatrix<f64>,
    /// `sgn det(Id − df)`; `None` when degenerate.
    pub sign: Option<i64>,
    pub nondegenerate: bool,
}

impl FixedPointRecord {
    pub fn new(point: ManifoldPoint, differential: DMatrix<f64>) -> Self {
        let n = differential.nrows();
        let det = (DMatrix::identity(n, n) - &differential).determinant();
        let nondegenerate = det.abs() > DEGENERACY_TOL;
        Self { point, differential, sign: nondegenerate.then(|| det.signum() as i64), nondegenerate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmanifoldKind {
    /// The great circle orthogonal to a unit normal.
    GreatCircle { normal: [f64; 3] },
    Whole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedSubmanifold {
    pub kind: SubmanifoldKind,
    pub dim: usize,
    pub chi: i64,
    /// `det(Id − df_ν)` on the normal bundle (1 for normal rank 0).
    pub normal_det: f64,
}

/// One entry of the fixed-submanifold sum: `χ(N)` and `det(Id − df_ν)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedComponent {
    pub chi: i64,
    pub normal_det: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FixedSet {
    pub points: Vec<FixedPointRecord>,
    pub submanifolds: Vec<FixedSubmanifold>,
}

impl FixedSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.submanifolds.is_empty()
    }

    pub fn components(&self) -> Vec<FixedComponent> {
        let pts = self.points.iter().map(|r| {
            let n = r.differential.nrows();
            FixedComponent { chi: 1, normal_det: (DMatrix::identity(n, n) - &r.differential).determinant() }
        });
        let subs = self.submanifolds.iter().map(|s| FixedComponent { chi: s.chi, normal_det: s.normal_det });
        pts.chain(subs).collect()
    }

    /// Geodesic distance from `x` to the fixed set.
    pub fn distance(&self, m: &ModelGeometry, x: &ManifoldPoint) -> f64 {
        let p = self.points.iter().map(|r| m.distance(x, &r.point));
        let s = self.submanifolds.iter().map(|s| match &s.kind {
            SubmanifoldKind::Whole => 0.0,
            SubmanifoldKind::GreatCircle { normal } => dot3(*normal, x.v3()).clamp(-1.0, 1.0).asin().abs(),
        });
        p.chain(s).fold(f64::INFINITY, f64::min)
    }
}

/// Closed-form fixed sets for the built-in families; Newton-refined grid search for chart maps.
pub fn find_fixed_points(f: &SmoothSelfMap) -> Result<FixedSet> {
    let m = f.geometry();
    let whole = || FixedSet {
        points: vec![],
        submanifolds: vec![FixedSubmanifold {
            kind: SubmanifoldKind::Whole,
            dim: m.dim(),
            chi: m.euler_characteristic().unwrap_or(0),
            normal_det: 1.0,
        }],
    };
    let record = |p: ManifoldPoint| FixedPointRecord::new(p, f.differential(&p));
    let mut set = FixedSet::default();
    match &f.family {
        MapFamily::Identity => return Ok(whole()),
        MapFamily::CirclePower(1) => return Ok(whole()),
        MapFamily::CirclePower(n) => {
            let k = (n - 1).unsigned_abs() as usize;
            for j in 0..k {
                set.points.push(record(ManifoldPoint::new(&[2.0 * PI * j as f64 / k as f64])));
            }
        }
        MapFamily::TorusLinear { n, entries } => {
            let periods = match m {
                ModelGeometry::Torus { periods } => periods.clone(),
                _ => unreachable!(),
            };
            for frac in torus_fixed_fractions(*n, entries)? {
                let c: Vec<f64> = frac.iter().zip(&periods).map(|(q, p)| q * p).collect();
                set.points.push(record(ManifoldPoint::new(&c)));
            }
        }
        MapFamily::SphereRotation { axis, angle } => {
            if wrap_centered(*angle, 2.0 * PI) == 0.0 {
                return Ok(whole());
            }
            set.points.push(record(ManifoldPoint::new(axis)));
            set.points.push(record(ManifoldPoint::new(&axis.map(|a| -a))));
        }
        MapFamily::SphereReflection { normal } => {
            set.submanifolds.push(FixedSubmanifold {
                kind: SubmanifoldKind::GreatCircle { normal: *normal },
                dim: 1,
                chi: 0,
                normal_det: 2.0,
            });
        }
        MapFamily::SphereSuspension(n) => match *n {
            1 => return Ok(whole()),
            0 => set.points.push(record(ManifoldPoint::new(&[1.0, 0.0, 0.0]))),
            -1 => set.submanifolds.push(FixedSubmanifold {
                kind: SubmanifoldKind::GreatCircle { normal: [0.0, 1.0, 0.0] },
                dim: 1,
                chi: 0,
                normal_det: 2.0,
            }),
            n => {
                set.points.push(record(ManifoldPoint::new(&[0.0, 0.0, 1.0])));
                set.points.push(record(ManifoldPoint::new(&[0.0, 0.0, -1.0])));
                // z^n = z (n ≥ 2) or z̄^|n| = z (n ≤ −2) on the unit circle: |n − 1| equally spaced roots.
                let k = (n - 1).unsigned_abs() as usize;
                for j in 0..k {
                    let th = 2.0 * PI * j as f64 / k as f64;
                    set.points.push(record(ManifoldPoint::new(&[th.cos(), th.sin(), 0.0])));
                }
            }
        },
        MapFamily::Generic(_) => {
            for p in search_fixed_points(f)? {
                set.points.push(record(p));
            }
        }
    }
    Ok(set)
}

/// Period-normalized fixed points of `x ↦ Mx` on `Rⁿ/Zⁿ`: `x = adj(M − I)k / det(M − I)` in `[0, 1)ⁿ`.
pub fn torus_fixed_fractions(n: usize, entries: &[i64]) -> Result<Vec<Vec<f64>>> {
    let a: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| entries[i * n + j] - i64::from(i == j)).collect()).collect();
    let det = int_det(&a);
    if det == 0 {
        return Err(LefError::DegenerateFixedSet(format!("det(M − I) = 0 for {entries:?}")));
    }
    let adj = int_adjugate(&a);
    let bound: Vec<i64> = a.iter().map(|row| row.iter().map(|v| v.abs()).sum()).collect();
    let mut out: Vec<Vec<i64>> = Vec::new();
    let mut k = bound.iter().map(|b| -b).collect::<Vec<i64>>();
    loop {
        // num = adj·k; x = num/det must lie in [0, 1).
        let num: Vec<i64> = (0..n).map(|i| (0..n).map(|j| adj[i][j] * k[j]).sum()).collect();
        let inside = num.iter().all(|&v| {
            let (v, d) = if det > 0 { (v, det) } else { (-v, -det) };
            v >= 0 && v < d
        });
        if inside && !out.contains(&num) {
            out.push(num);
        }
        let mut a_idx = 0;
        loop {
            if a_idx == n {
                let mut fr: Vec<Vec<f64>> = out.iter().map(|v| v.iter().map(|x| *x as f64 / det as f64).collect()).collect();
                fr.sort_by(|p, q| p.partial_cmp(q).unwrap());
                return Ok(fr);
            }
            k[a_idx] += 1;
            if k[a_idx] > bound[a_idx] {
                k[a_idx] = -bound[a_idx];
                a_idx += 1;
            } else {
                break;
            }
        }
    }
}

fn int_det(a: &[Vec<i64>]) -> i64 {
    let n = a.len();
    match n {
        0 => 1,
        1 => a[0][0],
        _ => (0..n)
            .map(|j| {
                let minor: Vec<Vec<i64>> = a[1..].iter().map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect()).collect();
                let s = if j % 2 == 0 { 1 } else { -1 };
                s * a[0][j] * int_det(&minor)
            })
            .sum(),
    }
}

fn int_adjugate(a: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i64>> = a
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != j)
                .map(|(_, row)| row.iter().enumerate().filter(|(c, _)| *c != i).map(|(_, v)| *v).collect())
                .collect();
            adj[i][j] = if (i + j) % 2 == 0 { 1 } else { -1 } * int_det(&minor);
        }
    }
    adj
}

/// Displacement field `log_x f(x)` in standard-frame components.
pub fn displacement<F: SelfMap + ?Sized>(f: &F, x: &ManifoldPoint) -> Vec<f64> {
    let m = f.geometry();
    let y = f.eval(x);
    log_components(m, x, &y)
}

fn log_components(m: &ModelGeometry, x: &ManifoldPoint, y: &ManifoldPoint) -> Vec<f64> {
    if m.is_flat() {
        return m.flat_delta(x, y)[..m.dim()].to_vec();
    }
    match m.geodesic_between(x, y) {
        Ok(g) => m.to_frame(&g.tangent_x).iter().map(|c| c * g.d).collect(),
        Err(_) => vec![f64::NAN; m.dim()],
    }
}

/// Newton iteration for a zero of `field` in exponential charts.
pub fn newton_zero<V>(m: &ModelGeometry, x0: ManifoldPoint, field: V, steps: usize, tol: f64) -> Option<ManifoldPoint>
where
    V: Fn(&ManifoldPoint) -> Vec<f64>,
{
    let n = m.dim();
    let mut x = x0;
    let h = 1e-7;
    for _ in 0..steps {
        let v0 = field(&x);
        if v0.iter().any(|c| !c.is_finite()) {
            return None;
        }
        let norm = v0.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < tol {
            return Some(x);
        }
        let chart = |u: &[f64]| -> Vec<f64> {
            let p = m.exp_map(&m.from_frame(&x, u));
            let v = field(&p);
            if m.is_flat() {
                v
            } else {
                // Components re-expressed in the frame at x by ambient projection.
                let amb = m.from_frame(&p, &v).v3();
                let fr = m.frame(&x);
                (0..n).map(|j| (0..3).map(|i| fr[(i, j)] * amb[i]).sum()).collect()
            }
        };
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = h;
            let vp = chart(&e);
            e[j] = -h;
            let vm = chart(&e);
            for i in 0..n {
                jac[(i, j)] = (vp[i] - vm[i]) / (2.0 * h);
            }
        }
        let step = jac.lu().solve(&DVector::from_vec(v0))?;
        let u: Vec<f64> = step.iter().map(|s| -s).collect();
        x = m.exp_map(&m.from_frame(&x, &u));
    }
    let last = field(&x);
    (last.iter().map(|c| c * c).sum::<f64>().sqrt() < tol.sqrt()).then_some(x)
}

fn search_fixed_points(f: &SmoothSelfMap) -> Result<Vec<ManifoldPoint>> {
    let m = f.geometry();
    let res = if m.dim() == 1 { 512 } else { 64 };
    let grid = crate::quadrature::build_grid(m, res)?;
    let dist: Vec<f64> = grid.nodes.iter().map(|x| m.distance(x, &f.eval(x))).collect();
    let mut found: Vec<ManifoldPoint> = Vec::new();
    for i in 0..grid.len() {
        if grid.neighbours(i).iter().any(|&j| dist[j] < dist[i]) {
            continue;
        }
        if let Some(p) = newton_zero(m, grid.nodes[i], |x| displacement(f, x), 40, 1e-12) {
            if !found.iter().any(|q| m.distance(q, &p) < 1e-7) {
                found.push(p);
            }
        }
    }
    Ok(found)
}

/// `Σ sgn det(Id − df_p)` over isolated nondegenerate fixed points.
pub fn fixed_point_lefschetz_sum(records: &[FixedPointRecord]) -> Result<i64> {
    let mut total = 0;
    for r in records {
        match r.sign {
            Some(s) if r.nondegenerate => total += s,
            _ => return Err(LefError::DegenerateRecord(r.point.coords().to_vec())),
        }
    }
    Ok(total)
}

/// Fixed-point sum over a full fixed set; submanifolds are rejected.
pub fn fixed_set_point_sum(set: &FixedSet) -> Result<i64> {
    if let Some(s) = set.submanifolds.first() {
        return Err(LefError::DegenerateRecord(match &s.kind {
            SubmanifoldKind::GreatCircle { normal } => normal.to_vec(),
            SubmanifoldKind::Whole => vec![],
        }));
    }
    fixed_point_lefschetz_sum(&set.points)
}

/// `Σ sgn det(Id − df_ν) χ(N_j)`.
pub fn fixed_submanifold_sum(components: &[FixedComponent]) -> Result<i64> {
    let mut total = 0;
    for c in components {
        if c.normal_det.abs() <= DEGENERACY_TOL {
            return Err(LefError::CleanIntersectionViolation);
        }
        total += c.normal_det.signum() as i64 * c.chi;
    }
    Ok(total)
}

/// Induced matrix on `H¹` of a flat model, from lifts along the coordinate loops.
pub fn induced_h1_matrix<F: SelfMap + ?Sized>(f: &F) -> Result<DMatrix<f64>> {
    let m = f.geometry();
    if !m.is_flat() {
        return Err(LefError::UnsupportedManifold(format!("H¹ lift on {m}")));
    }
    let (p, _) = m.flat_periods_scales();
    let n = m.dim();
    let steps = 4096;
    let mut out = DMatrix::zeros(n, n);
    let base: Vec<f64> = (0..n).map(|i| 0.137 * p[i]).collect();
    for j in 0..n {
        let mut acc = vec![0.0; n];
        let mut prev = f.eval(&ManifoldPoint::new(&base));
        for s in 1..=steps {
            let mut c = base.clone();
            c[j] += p[j] * s as f64 / steps as f64;
            let cur = f.eval(&m.point(&c)?);
            for i in 0..n {
                acc[i] += wrap_centered(cur.coords()[i] - prev.coords()[i], p[i]);
            }
            prev = cur;
        }
        for i in 0..n {
            out[(i, j)] = (acc[i] / p[i]).round();
        }
    }
    Ok(out)
}

/// Brouwer degree; stored per family on the sphere, from `H¹` lifts on flat models.
pub fn degree(f: &SmoothSelfMap) -> Result<i64> {
    let m = f.geometry();
    match &f.family {
        MapFamily::Identity => Ok(1),
        MapFamily::SphereRotation { .. } => Ok(1),
        MapFamily::SphereReflection { .. } => Ok(-1),
        MapFamily::SphereSuspension(n) => Ok(*n),
        MapFamily::CirclePower(n) => Ok(*n),
        MapFamily::TorusLinear { .. } => Ok(f.integer_matrix().unwrap().determinant().round() as i64),
        MapFamily::Generic(_) => {
            if m.is_flat() {
                Ok(induced_h1_matrix(f)?.determinant().round() as i64)
            } else {
                Err(LefError::UnsupportedManifold(format!("degree of a chart map on {m}")))
            }
        }
    }
}

/// `Σ_q (−1)^q tr f*|H^q`.
pub fn cohomological_lefschetz(f: &SmoothSelfMap) -> Result<i64> {
    let m = f.geometry();
    match m {
        ModelGeometry::Sphere2 => Ok(1 + degree(f)?),
        ModelGeometry::Circle { .. } | ModelGeometry::Torus { .. } => {
            let a = match &f.family {
                MapFamily::Identity => DMatrix::identity(m.dim(), m.dim()),
                MapFamily::CirclePower(n) => DMatrix::from_element(1, 1, *n as f64),
                MapFamily::TorusLinear { .. } => f.integer_matrix().unwrap(),
                _ => induced_h1_matrix(f)?,
            };
            // On a torus H* = Λ*H¹, so the supertrace is det(I − A).
            let n = a.nrows();
            Ok((DMatrix::identity(n, n) - a).determinant().round() as i64)
        }
        ModelGeometry::HyperbolicPatch => Err(LefError::UnsupportedManifold("no compact model".into())),
    }
}

/// Winding number of a planar field over `samples` points on the circle of `radius` about `center`.
pub fn winding_number<V>(field: V, center: [f64; 2], radius: f64, samples: usize) -> Result<i64>
where
    V: Fn(f64, f64) -> [f64; 2],
{
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for k in 0..=samples {
        let th = 2.0 * PI * k as f64 / samples as f64;
        let v = field(center[0] + radius * th.cos(), center[1] + radius * th.sin());
        let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if !(nv > 1e-12) {
            return Err(LefError::ZeroOnCircle);
        }
        let ang = v[1].atan2(v[0]);
        if let Some(p) = prev {
            total += wrap_centered(ang - p, 2.0 * PI);
        }
        prev = Some(ang);
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Winding number over the default 256-point circle.
pub fn winding_index<V>(field: V, center: [f64; 2], radius: f64) -> Result<i64>
where
    V: Fn(f64, f64) -> [f64; 2],
{
    winding_number(field, center, radius, 256)
}

/// Field `log_x(−f(x))` near a point of `C(f)` on the sphere, in the exponential chart at `center`.
pub fn antipodal_displacement_chart<'a, F: SelfMap + ?Sized>(f: &'a F, center: ManifoldPoint) -> impl Fn(f64, f64) -> [f64; 2] + 'a {
    let m = ModelGeometry::Sphere2;
    let frame = m.frame(&center);
    move |u, v| {
        let p = m.exp_map(&m.from_frame(&center, &[u, v]));
        let q = f.eval(&p).v3().map(|c| -c);
        let g = match m.geodesic_between(&p, &ManifoldPoint::new(&q)) {
            Ok(g) => g,
            Err(_) => return [0.0, 0.0],
        };
        let amb = TangentVector::new(p, &g.tangent_x.v3().map(|c| c * g.d)).v3();
        let e1 = [frame[(0, 0)], frame[(1, 0)], frame[(2, 0)]];
        let e2 = [frame[(0, 1)], frame[(1, 1)], frame[(2, 1)]];
        [dot3(amb, e1), dot3(amb, e2)]
    }
}

/// Index of `log_x(−f(x))` at a point of `C(f)` on the sphere.
pub fn cut_point_index<F: SelfMap + ?Sized>(f: &F, x: &ManifoldPoint, radius: f64) -> Result<i64> {
    let field = antipodal_displacement_chart(f, *x);
    winding_index(field, [0.0, 0.0], radius)
}

/// Antipode-corrected displacement, zero exactly on `C(f)` of a sphere map.
pub fn antipodal_displacement<F: SelfMap + ?Sized>(f: &F, x: &ManifoldPoint) -> Vec<f64> {
    let m = f.geometry();
    let q = f.eval(x).v3().map(|c| -c);
    let q = ManifoldPoint::new(&q);
    log_components(m, x, &q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_power_fixed_points() {
        let s = find_fixed_points(&SmoothSelfMap::circle_power(3)).unwrap();
        assert_eq!(s.points.len(), 2);
        assert!(s.points.iter().all(|r| r.sign == Some(-1)));
        for n in -4i64..=6 {
            if n == 1 {
                continue;
            }
            let f = SmoothSelfMap::circle_power(n);
            let fp = fixed_point_lefschetz_sum(&find_fixed_points(&f).unwrap().points).unwrap();
            assert_eq!(fp, 1 - n);
            assert_eq!(cohomological_lefschetz(&f).unwrap(), 1 - n);
        }
        assert_eq!(cohomological_lefschetz(&SmoothSelfMap::circle_power(4)).unwrap(), -3);
    }

    #[test]
    fn torus_fixed_points_by_enumeration_and_grid() {
        let f = SmoothSelfMap::torus_linear(2, &[2, 0, 0, 3]);
        let s = find_fixed_points(&f).unwrap();
        assert_eq!(s.points.len(), 2);
        assert!(s.points.iter().all(|r| r.sign == Some(1)));
        // Brute-force lattice cross-check on a grid of denominators.
        let fr = torus_fixed_fractions(2, &[2, 0, 0, 3]).unwrap();
        let mut brute = vec![];
        let den = 6;
        for a in 0..den {
            for b in 0..den {
                let (x, y) = (a as f64 / den as f64, b as f64 / den as f64);
                let (fx, fy) = ((2.0 * x).fract(), (3.0 * y).fract());
                if (fx - x).abs() < 1e-12 && (fy - y).abs() < 1e-12 {
                    brute.push(vec![x, y]);
                }
            }
        }
        assert_eq!(fr, brute);
        assert!(matches!(
            find_fixed_points(&SmoothSelfMap::torus_linear(2, &[1, 1, 0, 1])),
            Err(LefError::DegenerateFixedSet(_))
        ));
    }

    #[test]
    fn torus_oracles_agree_exhaustively() {
        for a in -4..=4 {
            for d in -4..=4 {
                if a == 1 || d == 1 {
                    continue;
                }
                let f = SmoothSelfMap::torus_linear(2, &[a, 0, 0, d]);
                let fp = fixed_point_lefschetz_sum(&find_fixed_points(&f).unwrap().points).unwrap();
                assert_eq!(fp, (1 - a) * (1 - d));
                assert_eq!(cohomological_lefschetz(&f).unwrap(), fp);
            }
        }
        for e in [[2, 1, 1, 1], [0, 1, -1, 0], [3, -2, 1, 2], [-3, 1, 2, 0]] {
            let f = SmoothSelfMap::torus_linear(2, &e);
            let s = find_fixed_points(&f).unwrap();
            let det = (1 - e[0]) * (1 - e[3]) - e[1] * e[2];
            assert_eq!(s.points.len() as i64, det.abs());
            assert_eq!(fixed_point_lefschetz_sum(&s.points).unwrap(), det);
            assert_eq!(cohomological_lefschetz(&f).unwrap(), det);
        }
    }

    #[test]
    fn sphere_oracles() {
        let r = SmoothSelfMap::sphere_rotation([0.0, 0.0, 1.0], 1.0);
        assert_eq!(fixed_set_point_sum(&find_fixed_points(&r).unwrap()).unwrap(), 2);
        assert_eq!(cohomological_lefschetz(&r).unwrap(), 2);
        let refl = SmoothSelfMap::sphere_reflection([0.0, 0.0, 1.0]);
        let s = find_fixed_points(&refl).unwrap();
        assert_eq!(s.submanifolds.len(), 1);
        assert_eq!(fixed_submanifold_sum(&s.components()).unwrap(), 0);
        assert_eq!(cohomological_lefschetz(&refl).unwrap(), 0);
        for n in -3..=4 {
            let f = SmoothSelfMap::suspension(n);
            let s = find_fixed_points(&f).unwrap();
            let c = cohomological_lefschetz(&f).unwrap();
            assert_eq!(c, 1 + n);
            assert_eq!(fixed_submanifold_sum(&s.components()).unwrap(), c, "n={n}");
            if s.submanifolds.is_empty() {
                assert_eq!(fixed_set_point_sum(&s).unwrap(), c);
            }
            for r in &s.points {
                assert!(f.geometry().distance(&f.eval(&r.point), &r.point) < 1e-12);
            }
        }
    }

    #[test]
    fn identity_is_degenerate_but_has_submanifold_sum() {
        let id = SmoothSelfMap::identity(ModelGeometry::Sphere2);
        let rec = FixedPointRecord::new(ManifoldPoint::new(&[0.0, 0.0, 1.0]), id.differential(&ManifoldPoint::new(&[0.0, 0.0, 1.0])));
        assert!(!rec.nondegenerate);
        assert!(matches!(fixed_point_lefschetz_sum(&[rec]), Err(LefError::DegenerateRecord(_))));
        assert_eq!(fixed_submanifold_sum(&find_fixed_points(&id).unwrap().components()).unwrap(), 2);
        let two = [FixedComponent { chi: 1, normal_det: -3.0 }, FixedComponent { chi: 1, normal_det: -0.5 }];
        assert_eq!(fixed_submanifold_sum(&two).unwrap(), -2);
        assert!(matches!(
            fixed_submanifold_sum(&[FixedComponent { chi: 0, normal_det: 0.0 }]),
            Err(LefError::CleanIntersectionViolation)
        ));
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_index(|x, y| [x, y], [0.0, 0.0], 0.5).unwrap(), 1);
        assert_eq!(winding_index(|x, y| [x, -y], [0.0, 0.0], 0.5).unwrap(), -1);
        assert_eq!(winding_index(|x, y| [x * x - y * y, 2.0 * x * y], [0.0, 0.0], 1.0).unwrap(), 2);
        assert_eq!(winding_index(|x, y| [x - 3.0, y], [0.0, 0.0], 1.0).unwrap(), 0);
        assert!(matches!(winding_index(|x, y| [x - 1.0, y], [0.0, 0.0], 1.0), Err(LefError::ZeroOnCircle)));
    }

    #[test]
    fn suspension_cut_point_index() {
        let f = SmoothSelfMap::suspension(2);
        let x = ManifoldPoint::new(&[-1.0, 0.0, 0.0]);
        assert!(antipodal_displacement(&f, &x).iter().all(|c| c.abs() < 1e-12));
        assert_eq!(cut_point_index(&f, &x, 0.05).unwrap(), -1);
    }

    #[test]
    fn generic_map_matches_family_oracles() {
        use crate::maps::{GenericChartMap, MapFamily};
        use std::sync::Arc;
        let func: crate::maps::ChartFn = Arc::new(|c: &[f64]| vec![2.0 * c[0] + c[1] + 0.1 * c[0].sin(), c[0] + c[1]]);
        let g = SmoothSelfMap::new(
            ModelGeometry::standard_torus(2),
            MapFamily::Generic(GenericChartMap::new("perturbed", func, None)),
        )
        .unwrap();
        let a = induced_h1_matrix(&g).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        assert_eq!(cohomological_lefschetz(&g).unwrap(), -1);
        let s = find_fixed_points(&g).unwrap();
        assert_eq!(fixed_point_lefschetz_sum(&s.points).unwrap(), -1);
    }
}
