use lefschetz_core::cutflow::{bound_check, BoundReport};
use lefschetz_core::mqthom::fiber_integral as core_fiber_integral;
use lefschetz_core::oracles::{cohomological_lefschetz, find_fixed_points, fixed_set_point_sum, fixed_submanifold_sum};
use lefschetz_core::{
    compute_lefschetz as core_compute, sweep_t as core_sweep, ComputeOptions, LefError, LefschetzReport, ModelGeometry,
    ProfileKind, SelfMap, SmoothSelfMap,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: LefError) -> PyErr {
    match e {
        LefError::NonFiniteDensity { .. } | LefError::ConjugatePoint { .. } | LefError::CutLocusViolation { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A smooth self-map of a model manifold, built from a descriptor such as `suspension:2`.
#[pyclass(name = "SelfMap", frozen)]
struct PySelfMap {
    inner: SmoothSelfMap,
}

#[pymethods]
impl PySelfMap {
    #[new]
    #[pyo3(signature = (descriptor, manifold=None))]
    fn new(descriptor: &str, manifold: Option<&str>) -> PyResult<Self> {
        let m: ModelGeometry = match manifold {
            Some(s) => s.parse().map_err(to_py)?,
            None => SmoothSelfMap::natural_geometry(descriptor).map_err(to_py)?,
        };
        Ok(Self { inner: SmoothSelfMap::parse(descriptor, &m).map_err(to_py)? })
    }

    #[getter]
    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    #[getter]
    fn manifold(&self) -> String {
        self.inner.geometry().to_string()
    }

    fn eval(&self, coords: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.inner.geometry().point(&coords).map_err(to_py)?;
        Ok(self.inner.eval(&x).coords().to_vec())
    }

    /// Differential in the orthonormal frames at `x` and `f(x)`, as nested rows.
    fn differential(&self, coords: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let x = self.inner.geometry().point(&coords).map_err(to_py)?;
        let d = self.inner.differential(&x);
        Ok((0..d.nrows()).map(|i| d.row(i).iter().copied().collect()).collect())
    }

    fn lefschetz(&self) -> PyResult<i64> {
        cohomological_lefschetz(&self.inner).map_err(to_py)
    }

    /// Sum of local indices over the fixed set.
    fn fixed_point_sum(&self) -> PyResult<i64> {
        let set = find_fixed_points(&self.inner).map_err(to_py)?;
        if set.submanifolds.is_empty() {
            fixed_set_point_sum(&set).map_err(to_py)
        } else {
            fixed_submanifold_sum(&set.components()).map_err(to_py)
        }
    }

    fn fixed_points(&self) -> PyResult<Vec<Vec<f64>>> {
        let set = find_fixed_points(&self.inner).map_err(to_py)?;
        Ok(set.points.iter().map(|r| r.point.coords().to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("SelfMap('{}', manifold='{}')", self.inner.descriptor(), self.inner.geometry())
    }
}

#[pyclass(name = "LefschetzReport", frozen, get_all)]
struct PyReport {
    manifold: String,
    map: String,
    integral: f64,
    oracle: Option<i64>,
    residual: Option<f64>,
    resolution: usize,
    nodes: usize,
    profile: String,
    eps: f64,
    t: f64,
    wall_time_s: f64,
    mass_fraction: Option<f64>,
}

impl From<LefschetzReport> for PyReport {
    fn from(r: LefschetzReport) -> Self {
        Self {
            manifold: r.manifold,
            map: r.map,
            integral: r.integral,
            oracle: r.oracle,
            residual: r.residual,
            resolution: r.resolution,
            nodes: r.nodes,
            profile: r.profile.label().to_string(),
            eps: r.eps,
            t: r.t,
            wall_time_s: r.wall_time_s,
            mass_fraction: r.mass_fraction,
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!("LefschetzReport(map='{}', integral={:.10}, oracle={:?})", self.map, self.integral, self.oracle)
    }
}

#[pyclass(name = "BoundReport", frozen, get_all)]
struct PyBound {
    lefschetz: i64,
    chi: i64,
    cut_class: String,
    cut_count: Option<usize>,
    inequality_holds: bool,
    sgn_sum: Option<i64>,
}

impl From<BoundReport> for PyBound {
    fn from(b: BoundReport) -> Self {
        Self {
            lefschetz: b.l,
            chi: b.chi,
            cut_class: format!("{:?}", b.cut_class).to_lowercase(),
            cut_count: b.cut_count,
            inequality_holds: b.inequality_holds,
            sgn_sum: b.sgn_sum,
        }
    }
}

fn options(
    f: &SmoothSelfMap,
    resolution: Option<usize>,
    profile: Option<&str>,
    epsilon_frac: Option<f64>,
) -> PyResult<ComputeOptions> {
    let m = f.geometry();
    let res = resolution.unwrap_or(match m {
        ModelGeometry::Circle { .. } => 4096,
        ModelGeometry::Torus { .. } => 256,
        _ => 512,
    });
    let mut o = ComputeOptions::for_geometry(m, res);
    if let Some(p) = profile {
        o.profile = ProfileKind::parse(p).map_err(to_py)?;
    }
    if let Some(e) = epsilon_frac {
        if !(e > 0.0 && e <= 0.5) {
            return Err(PyValueError::new_err(format!("epsilon_frac {e} outside (0, 0.5]")));
        }
        o.eps = e * m.injectivity_radius();
    }
    Ok(o)
}

/// Quadrature of the pulled-back Thom form for `f` deformed to time `t`.
#[pyfunction]
#[pyo3(signature = (f, resolution=None, profile=None, epsilon_frac=None, t=1.0))]
fn compute_lefschetz(
    py: Python<'_>,
    f: &PySelfMap,
    resolution: Option<usize>,
    profile: Option<&str>,
    epsilon_frac: Option<f64>,
    t: f64,
) -> PyResult<PyReport> {
    let mut o = options(&f.inner, resolution, profile, epsilon_frac)?;
    o.t = t;
    let map = &f.inner;
    let r = py.detach(|| core_compute(map, &o)).map_err(to_py)?;
    Ok(r.into())
}

#[pyfunction]
#[pyo3(signature = (f, ts, resolution=None, profile=None, epsilon_frac=None))]
fn sweep_t(
    py: Python<'_>,
    f: &PySelfMap,
    ts: Vec<f64>,
    resolution: Option<usize>,
    profile: Option<&str>,
    epsilon_frac: Option<f64>,
) -> PyResult<Vec<PyReport>> {
    let o = options(&f.inner, resolution, profile, epsilon_frac)?;
    let map = &f.inner;
    let reps = py.detach(|| core_sweep(map, &o, &ts)).map_err(to_py)?;
    Ok(reps.into_iter().map(PyReport::from).collect())
}

/// `|L − χ|` against the estimated cut set of `f`.
#[pyfunction]
#[pyo3(signature = (f, resolution=128))]
fn bounds(py: Python<'_>, f: &PySelfMap, resolution: usize) -> PyResult<PyBound> {
    let map = &f.inner;
    Ok(py.detach(|| bound_check(map, resolution)).map_err(to_py)?.into())
}

/// Fiber integral of the Thom form for an antisymmetric curvature matrix given as rows.
#[pyfunction]
fn fiber_integral(curvature: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = curvature.len();
    if curvature.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("curvature must be square"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| curvature[i][j]);
    core_fiber_integral(n, &m).map_err(to_py)
}

#[pymodule]
fn lefschetz_mq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySelfMap>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyBound>()?;
    m.add_function(wrap_pyfunction!(compute_lefschetz, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_t, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(fiber_integral, m)?)?;
    Ok(())
}
