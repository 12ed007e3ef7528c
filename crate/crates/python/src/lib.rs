//! Python bindings: density evaluation, sampling, zonal polynomials and the
//! validation suites. Matrices cross the boundary as nested lists; a bare
//! float stands for a 1×1 matrix.

use std::path::PathBuf;
use std::sync::Arc;

use dncbeta::densities::{self, BetaParams, DensityValue, GammaParams, Mode, TriParams};
use dncbeta::invariant::shared_invariant_table;
use dncbeta::invariant::table::InvariantTable;
use dncbeta::partitions::Partition;
use dncbeta::sampling::{sample_batch, RngHandle, SampleDist, SampleParams};
use dncbeta::validation::{run_suite, ValidationConfig};
use dncbeta::zonal::{real_spectrum, shared_table, zonal_eval};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

type Mat = DMatrix<f64>;

create_exception!(dncbeta_py, DncbetaError, PyValueError, "Raised with (code, message) for any library error.");

fn err(e: dncbeta::Error) -> PyErr {
    DncbetaError::new_err((e.code(), e.to_string()))
}

#[derive(FromPyObject)]
enum MatArg {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatArg {
    fn to_mat(&self) -> PyResult<Mat> {
        match self {
            MatArg::Scalar(x) => Ok(Mat::from_element(1, 1, *x)),
            MatArg::Rows(r) => dncbeta::matrixkit::from_rows(r).map_err(err),
        }
    }
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    dncbeta::matrixkit::to_rows(m)
}

fn omega(o: Option<MatArg>, m: usize) -> PyResult<Mat> {
    o.map_or(Ok(Mat::zeros(m, m)), |o| o.to_mat())
}

fn mode(s: &str) -> PyResult<Mode> {
    match s {
        "sym" => Ok(Mode::Sym),
        "nonsym" => Ok(Mode::Nonsym),
        _ => Err(DncbetaError::new_err(("input", format!("mode must be \"sym\" or \"nonsym\", got {s:?}")))),
    }
}

fn table(dir: Option<PathBuf>) -> PyResult<Arc<InvariantTable>> {
    match dir {
        Some(d) => Ok(Arc::new(InvariantTable::load(&d.join("invariants.json")).map_err(err)?)),
        None => Ok(shared_invariant_table()),
    }
}

/// A density value with its series diagnostics.
#[pyclass(frozen, get_all, name = "Density")]
struct PyDensity {
    value: f64,
    log_value: f64,
    shells_used: usize,
    last_shell_magnitude: f64,
    truncation: usize,
    clamped: bool,
}

#[pymethods]
impl PyDensity {
    fn __repr__(&self) -> String {
        format!("Density(value={:e}, truncation={}, clamped={})", self.value, self.truncation, self.clamped)
    }

    fn __float__(&self) -> f64 {
        self.value
    }
}

impl From<DensityValue> for PyDensity {
    fn from(d: DensityValue) -> Self {
        PyDensity {
            value: d.value,
            log_value: d.log_value,
            shells_used: d.shells_used,
            last_shell_magnitude: d.last_shell_magnitude,
            truncation: d.truncation,
            clamped: d.clamped,
        }
    }
}

/// Noncentral matrix gamma density with scale Θ (identity when omitted).
#[pyfunction]
#[pyo3(signature = (x, a, theta=None, omega=None, truncation=None))]
fn matgamma_pdf(x: MatArg, a: f64, theta: Option<MatArg>, omega: Option<MatArg>, truncation: Option<usize>) -> PyResult<PyDensity> {
    let x = x.to_mat()?;
    let m = x.nrows();
    let theta = theta.map_or(Ok(Mat::identity(m, m)), |t| t.to_mat())?;
    let p = GammaParams { a, theta, omega: self::omega(omega, m)? };
    densities::matgamma_pdf(&x, &p, truncation).map(Into::into).map_err(err)
}

#[allow(clippy::too_many_arguments)]
fn beta_pdf(
    kind: u8,
    x: MatArg,
    a: f64,
    b: f64,
    omega1: Option<MatArg>,
    omega2: Option<MatArg>,
    mode_s: &str,
    truncation: Option<usize>,
    tables: Option<PathBuf>,
) -> PyResult<PyDensity> {
    let x = x.to_mat()?;
    let m = x.nrows();
    let p = BetaParams { a, b, omega1: omega(omega1, m)?, omega2: omega(omega2, m)? };
    let t = table(tables)?;
    let r = if kind == 1 {
        densities::beta1_pdf(&x, &p, mode(mode_s)?, truncation, &t)
    } else {
        densities::beta2_pdf(&x, &p, mode(mode_s)?, truncation, &t)
    };
    r.map(Into::into).map_err(err)
}

/// Doubly noncentral matrix beta type I density.
#[pyfunction]
#[pyo3(signature = (u, a, b, omega1=None, omega2=None, mode="nonsym", truncation=None, tables=None))]
#[allow(clippy::too_many_arguments)]
fn beta1_pdf(
    u: MatArg,
    a: f64,
    b: f64,
    omega1: Option<MatArg>,
    omega2: Option<MatArg>,
    mode: &str,
    truncation: Option<usize>,
    tables: Option<PathBuf>,
) -> PyResult<PyDensity> {
    beta_pdf(1, u, a, b, omega1, omega2, mode, truncation, tables)
}

/// Doubly noncentral matrix beta type II density.
#[pyfunction]
#[pyo3(signature = (f, a, b, omega1=None, omega2=None, mode="nonsym", truncation=None, tables=None))]
#[allow(clippy::too_many_arguments)]
fn beta2_pdf(
    f: MatArg,
    a: f64,
    b: f64,
    omega1: Option<MatArg>,
    omega2: Option<MatArg>,
    mode: &str,
    truncation: Option<usize>,
    tables: Option<PathBuf>,
) -> PyResult<PyDensity> {
    beta_pdf(2, f, a, b, omega1, omega2, mode, truncation, tables)
}

#[allow(clippy::too_many_arguments)]
fn bgb_pdf(
    kind: u8,
    x1: MatArg,
    x2: MatArg,
    abc: [f64; 3],
    om: [Option<MatArg>; 3],
    mode_s: &str,
    truncation: Option<usize>,
    tables: Option<PathBuf>,
) -> PyResult<PyDensity> {
    let x1 = x1.to_mat()?;
    let x2 = x2.to_mat()?;
    let m = x1.nrows();
    let [o1, o2, o3] = om;
    let p = TriParams { a: abc[0], b: abc[1], c: abc[2], omega1: omega(o1, m)?, omega2: omega(o2, m)?, omega3: omega(o3, m)? };
    let t = table(tables)?;
    let r = if kind == 1 {
        densities::bgb1_pdf(&x1, &x2, &p, mode(mode_s)?, truncation, &t)
    } else {
        densities::bgb2_pdf(&x1, &x2, &p, mode(mode_s)?, truncation, &t)
    };
    r.map(Into::into).map_err(err)
}

/// Noncentral bimatrix beta type I density at (U₁, U₂).
#[pyfunction]
#[pyo3(signature = (u1, u2, a, b, c, omega1=None, omega2=None, omega3=None, mode="nonsym", truncation=None, tables=None))]
#[allow(clippy::too_many_arguments)]
fn bgb1_pdf(
    u1: MatArg,
    u2: MatArg,
    a: f64,
    b: f64,
    c: f64,
    omega1: Option<MatArg>,
    omega2: Option<MatArg>,
    omega3: Option<MatArg>,
    mode: &str,
    truncation: Option<usize>,
    tables: Option<PathBuf>,
) -> PyResult<PyDensity> {
    bgb_pdf(1, u1, u2, [a, b, c], [omega1, omega2, omega3], mode, truncation, tables)
}

/// Noncentral bimatrix beta type II density at (F₁, F₂).
#[pyfunction]
#[pyo3(signature = (f1, f2, a, b, c, omega1=None, omega2=None, omega3=None, mode="nonsym", truncation=None, tables=None))]
#[allow(clippy::too_many_arguments)]
fn bgb2_pdf(
    f1: MatArg,
    f2: MatArg,
    a: f64,
    b: f64,
    c: f64,
    omega1: Option<MatArg>,
    omega2: Option<MatArg>,
    omega3: Option<MatArg>,
    mode: &str,
    truncation: Option<usize>,
    tables: Option<PathBuf>,
) -> PyResult<PyDensity> {
    bgb_pdf(2, f1, f2, [a, b, c], [omega1, omega2, omega3], mode, truncation, tables)
}

/// Draws `n` samples; each draw is a list of one or two m×m matrices.
/// `shapes` and `omegas` hold one entry per gamma input (1, 2 or 3).
#[pyfunction]
#[pyo3(signature = (dist, n, seed, shapes, omegas=None, m=1, stream=0))]
fn sample(
    dist: &str,
    n: usize,
    seed: u64,
    shapes: Vec<f64>,
    omegas: Option<Vec<MatArg>>,
    m: usize,
    stream: u64,
) -> PyResult<Vec<Vec<Vec<Vec<f64>>>>> {
    let d = SampleDist::parse(dist).map_err(err)?;
    let omegas = match omegas {
        Some(os) => os.iter().map(MatArg::to_mat).collect::<PyResult<Vec<_>>>()?,
        None => vec![Mat::zeros(m, m); shapes.len()],
    };
    let params = SampleParams { m, shapes, omegas };
    let batch = sample_batch(d, &params, n, RngHandle::new(seed, stream)).map_err(err)?;
    Ok(batch.draws.iter().map(|d| d.iter().map(rows).collect()).collect())
}

/// Zonal polynomial C_κ at a symmetric matrix.
#[pyfunction]
fn zonal(kappa: Vec<u32>, x: MatArg) -> PyResult<f64> {
    let k = Partition::new(kappa).map_err(err)?;
    let x = x.to_mat()?;
    let t = shared_table(k.weight().max(1), x.nrows());
    let ev = real_spectrum(&x).map_err(err)?;
    zonal_eval(&t, &k, &ev).map_err(err)
}

/// Runs a validation suite and returns the report array as JSON text.
#[pyfunction]
#[pyo3(signature = (suite="all", seed=1, tables=None))]
fn validate(py: Python<'_>, suite: &str, seed: u64, tables: Option<PathBuf>) -> PyResult<String> {
    let t = table(tables)?;
    let cfg = ValidationConfig::new(seed);
    let suite = suite.to_string();
    let reports = py.detach(|| run_suite(&suite, &cfg, &t)).map_err(err)?;
    serde_json::to_string(&reports).map_err(|e| err(e.into()))
}

#[pymodule]
fn dncbeta_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DncbetaError", m.py().get_type::<DncbetaError>())?;
    m.add("TABLE_VERSION", dncbeta::TABLE_VERSION)?;
    m.add_class::<PyDensity>()?;
    m.add_function(wrap_pyfunction!(matgamma_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(beta1_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(beta2_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(bgb1_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(bgb2_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(zonal, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
