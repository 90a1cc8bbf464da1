//! Python module `hyperkernel`.
//!
//! Reals are accepted as `str` (parsed at full working precision) or `float`,
//! and returned as decimal strings carrying every significant digit of the
//! working precision. Callers wanting doubles can apply `float()`.

use hyperkernel::kernels::{self, EvalReport, KernelParams, LaguerreKernelParams};
use hyperkernel::matelem::{self, ChannelIndices, GaussianPotential, PotentialChannel};
use hyperkernel::{Error, ExtReal, PrecisionContext};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

fn context(bits: u32, tol: &str) -> PyResult<PrecisionContext> {
    let ctx = PrecisionContext::new(bits).map_err(to_py)?;
    let t = ctx.parse(tol).map_err(to_py)?;
    ctx.with_tol_ext(&t).map_err(to_py)
}

fn real(x: &Bound<'_, PyAny>, ctx: &PrecisionContext) -> PyResult<ExtReal> {
    if let Ok(s) = x.extract::<String>() {
        return ctx.parse(&s).map_err(to_py);
    }
    let v: f64 = x.extract()?;
    Ok(ctx.real(v))
}

fn text(x: &ExtReal, bits: u32) -> String {
    let digits = (f64::from(bits) * std::f64::consts::LOG10_2).ceil() as usize + 1;
    x.to_string_radix(10, Some(digits))
}

/// Outcome of a Bessel–Gaussian kernel evaluation.
#[pyclass(frozen, get_all, name = "EvalReport")]
#[derive(Clone)]
struct PyEvalReport {
    value: String,
    method: String,
    est_rel_err: f64,
    work_bits_used: u32,
    cancellation_ratio: f64,
    terms: usize,
    escalations: u32,
}

#[pymethods]
impl PyEvalReport {
    fn __float__(&self) -> f64 {
        self.value.parse().unwrap_or(f64::NAN)
    }

    fn __repr__(&self) -> String {
        format!("EvalReport(value={}, method={}, est_rel_err={:e})", self.value, self.method, self.est_rel_err)
    }
}

fn report(r: EvalReport, bits: u32) -> PyEvalReport {
    PyEvalReport {
        value: text(&r.value, bits),
        method: r.method.to_string(),
        est_rel_err: r.est_rel_err.to_f64(),
        work_bits_used: r.work_bits_used,
        cancellation_ratio: r.cancellation_ratio.to_f64(),
        terms: r.terms,
        escalations: r.escalations,
    }
}

fn kernel_call(
    f: fn(&KernelParams, &PrecisionContext) -> hyperkernel::Result<EvalReport>,
    m: u32,
    p: &Bound<'_, PyAny>,
    beta: &Bound<'_, PyAny>,
    kappa: &Bound<'_, PyAny>,
    bits: u32,
    tol: &str,
) -> PyResult<PyEvalReport> {
    let ctx = context(bits, tol)?;
    let params = KernelParams::new(m, real(p, &ctx)?, real(beta, &ctx)?, real(kappa, &ctx)?).map_err(to_py)?;
    f(&params, &ctx).map(|r| report(r, bits)).map_err(to_py)
}

/// K^p_{m+1/2}(beta, kappa) with automatic method selection.
#[pyfunction]
#[pyo3(signature = (m, p, beta, kappa, bits = 256, tol = "1e-30"))]
fn k_eval(m: u32, p: &Bound<'_, PyAny>, beta: &Bound<'_, PyAny>, kappa: &Bound<'_, PyAny>, bits: u32, tol: &str) -> PyResult<PyEvalReport> {
    kernel_call(kernels::k_eval, m, p, beta, kappa, bits, tol)
}

#[pyfunction]
#[pyo3(signature = (m, p, beta, kappa, bits = 256, tol = "1e-30"))]
fn k_series(m: u32, p: &Bound<'_, PyAny>, beta: &Bound<'_, PyAny>, kappa: &Bound<'_, PyAny>, bits: u32, tol: &str) -> PyResult<PyEvalReport> {
    kernel_call(kernels::k_series, m, p, beta, kappa, bits, tol)
}

#[pyfunction]
#[pyo3(signature = (m, p, beta, kappa, bits = 256, tol = "1e-30"))]
fn k_closed(m: u32, p: &Bound<'_, PyAny>, beta: &Bound<'_, PyAny>, kappa: &Bound<'_, PyAny>, bits: u32, tol: &str) -> PyResult<PyEvalReport> {
    kernel_call(kernels::k_closed, m, p, beta, kappa, bits, tol)
}

#[pyfunction]
#[pyo3(signature = (m, p, beta, kappa, bits = 256, tol = "1e-30"))]
fn k_quadrature(m: u32, p: &Bound<'_, PyAny>, beta: &Bound<'_, PyAny>, kappa: &Bound<'_, PyAny>, bits: u32, tol: &str) -> PyResult<PyEvalReport> {
    kernel_call(kernels::k_quadrature, m, p, beta, kappa, bits, tol)
}

/// Integral of exp(-gamma x^2 - x) x^nu over [0, inf).
#[pyfunction]
#[pyo3(signature = (nu, gamma, bits = 256, tol = "1e-30"))]
fn j_integral(nu: &Bound<'_, PyAny>, gamma: &Bound<'_, PyAny>, bits: u32, tol: &str) -> PyResult<String> {
    let ctx = context(bits, tol)?;
    let v = kernels::j_integral(&real(nu, &ctx)?, &real(gamma, &ctx)?, &ctx).map_err(to_py)?;
    Ok(text(&v, bits))
}

/// Laguerre kernel by the "expansion" or "erfc" route.
#[pyfunction]
#[pyo3(signature = (k, n1, n2, gamma, route = "expansion", bits = 256, tol = "1e-30"))]
#[allow(clippy::too_many_arguments)]
fn laguerre_kernel(k: u32, n1: u32, n2: u32, gamma: &Bound<'_, PyAny>, route: &str, bits: u32, tol: &str) -> PyResult<String> {
    let ctx = context(bits, tol)?;
    let params = LaguerreKernelParams::new(k, n1, n2, real(gamma, &ctx)?);
    let v = match route {
        "expansion" => kernels::laguerre_kernel_expansion(&params, &ctx),
        "erfc" => kernels::laguerre_kernel_erfc(&params, &ctx),
        other => return Err(PyValueError::new_err(format!("unknown route {other:?}"))),
    }
    .map_err(to_py)?;
    Ok(text(&v, bits))
}

/// The (x, lambda) kernel B^{(k)}_{n1,n2}(beta, kappa) for the Legendre pair (l1, l2).
#[pyfunction]
#[pyo3(signature = (k, n1, n2, l1, l2, beta, kappa, bits = 256, tol = "1e-30"))]
#[allow(clippy::too_many_arguments)]
fn b_kernel(
    k: u32,
    n1: u32,
    n2: u32,
    l1: u32,
    l2: u32,
    beta: &Bound<'_, PyAny>,
    kappa: &Bound<'_, PyAny>,
    bits: u32,
    tol: &str,
) -> PyResult<String> {
    let ctx = context(bits, tol)?;
    let v = kernels::b_kernel(k, n1, n2, l1, l2, &real(beta, &ctx)?, &real(kappa, &ctx)?, &ctx).map_err(to_py)?;
    Ok(text(&v, bits))
}

/// Exact coefficients A^r as "p/q" strings, r = 0..min(l1, l2).
#[pyfunction]
fn neumann_adams_coeffs(l1: u32, l2: u32) -> Vec<String> {
    let (a, b) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
    kernels::neumann_adams_coeffs(a, b).iter().map(|r| r.to_string()).collect()
}

/// Exact (T, S) coefficient lists, ascending in gamma, as "p/q" strings.
#[pyfunction]
fn ts_coefficients(k: u32, n1: u32, n2: u32) -> (Vec<String>, Vec<String>) {
    let p = kernels::ts_coefficients(k, n1, n2);
    (p.t.iter().map(|r| r.to_string()).collect(), p.s.iter().map(|r| r.to_string()).collect())
}

/// Quantum numbers (l1, l2, mu1, mu2, n1, n2) of a matrix element.
#[pyclass(frozen, get_all, eq, hash, name = "ChannelIndices")]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PyChannelIndices {
    l1: u32,
    l2: u32,
    mu1: u32,
    mu2: u32,
    n1: u32,
    n2: u32,
}

#[pymethods]
impl PyChannelIndices {
    #[new]
    #[pyo3(signature = (l1 = 0, l2 = 0, mu1 = 0, mu2 = 0, n1 = 0, n2 = 0))]
    fn new(l1: u32, l2: u32, mu1: u32, mu2: u32, n1: u32, n2: u32) -> Self {
        Self { l1, l2, mu1, mu2, n1, n2 }
    }

    fn swapped(&self) -> Self {
        let s = self.core().swapped();
        Self { l1: s.l1, l2: s.l2, mu1: s.mu1, mu2: s.mu2, n1: s.n1, n2: s.n2 }
    }

    fn __repr__(&self) -> String {
        format!(
            "ChannelIndices(l1={}, l2={}, mu1={}, mu2={}, n1={}, n2={})",
            self.l1, self.l2, self.mu1, self.mu2, self.n1, self.n2
        )
    }
}

impl PyChannelIndices {
    fn core(&self) -> ChannelIndices {
        ChannelIndices::new(self.l1, self.l2, self.mu1, self.mu2, self.n1, self.n2)
    }
}

/// Sum of Gaussians A_k exp(-zeta_k r^2) with hyperradial scale alpha.
/// Reals are kept as given and parsed at the precision of each call.
#[pyclass(frozen, name = "GaussianPotential")]
struct PyGaussianPotential {
    alpha: PyObject,
    channels: Vec<(PyObject, PyObject)>,
}

#[pymethods]
impl PyGaussianPotential {
    #[new]
    fn new(alpha: PyObject, channels: Vec<(PyObject, PyObject)>) -> PyResult<Self> {
        if channels.is_empty() {
            return Err(PyValueError::new_err("a potential needs at least one channel"));
        }
        Ok(Self { alpha, channels })
    }

    /// Unnormalized matrix element: dict with "pair12", "pair13_23" and a
    /// per-channel "breakdown" list of (A, zeta, I2, I3).
    #[pyo3(signature = (indices, bits = 256, tol = "1e-30"))]
    fn matrix_element<'py>(&self, py: Python<'py>, indices: &PyChannelIndices, bits: u32, tol: &str) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        let ctx = context(bits, tol)?;
        let channels = self
            .channels
            .iter()
            .map(|(a, z)| Ok(PotentialChannel { amplitude: real(a.bind(py), &ctx)?, zeta: real(z.bind(py), &ctx)? }))
            .collect::<PyResult<Vec<_>>>()?;
        let pot = GaussianPotential::new(real(self.alpha.bind(py), &ctx)?, channels).map_err(to_py)?;
        let ch = indices.core();
        let me = py.allow_threads(|| matelem::potential_matrix_element(&pot, &ch, &ctx)).map_err(to_py)?;
        let out = pyo3::types::PyDict::new_bound(py);
        out.set_item("pair12", text(&me.pair12, bits))?;
        out.set_item("pair13_23", text(&me.pair13_23, bits))?;
        let parts: Vec<(String, String, String, String)> = me
            .breakdown
            .iter()
            .map(|c| (text(&c.amplitude, bits), text(&c.zeta, bits), text(&c.i2, bits), text(&c.i3, bits)))
            .collect();
        out.set_item("breakdown", parts)?;
        Ok(out)
    }
}

#[pymodule]
#[pyo3(name = "hyperkernel")]
fn hyperkernel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEvalReport>()?;
    m.add_class::<PyChannelIndices>()?;
    m.add_class::<PyGaussianPotential>()?;
    m.add_function(wrap_pyfunction!(k_eval, m)?)?;
    m.add_function(wrap_pyfunction!(k_series, m)?)?;
    m.add_function(wrap_pyfunction!(k_closed, m)?)?;
    m.add_function(wrap_pyfunction!(k_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(j_integral, m)?)?;
    m.add_function(wrap_pyfunction!(laguerre_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(b_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(neumann_adams_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(ts_coefficients, m)?)?;
    Ok(())
}
