//! Python bindings: `import ebb84`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ebb84_core as core;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Numeric(m) => PyArithmeticError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Channel and hardware conditions for one transmission window.
#[pyclass(frozen, name = "ChannelConditions")]
struct ChannelConditions(core::ChannelConditions);

#[pymethods]
impl ChannelConditions {
    #[new]
    #[pyo3(signature = (eta_loss_db, p_ec, qber_i, integration_time_s, p_ap=None, f_s=None))]
    fn new(
        eta_loss_db: f64,
        p_ec: f64,
        qber_i: f64,
        integration_time_s: f64,
        p_ap: Option<f64>,
        f_s: Option<f64>,
    ) -> PyResult<Self> {
        let mut c = core::ChannelConditions::new(eta_loss_db, p_ec, qber_i, integration_time_s).map_err(to_py)?;
        c.p_ap = p_ap.unwrap_or(c.p_ap);
        c.f_s = f_s.unwrap_or(c.f_s);
        c.validate().map_err(to_py)?;
        Ok(Self(c))
    }

    #[getter]
    fn eta_loss_db(&self) -> f64 {
        self.0.eta_loss_db
    }
    #[getter]
    fn p_ec(&self) -> f64 {
        self.0.p_ec
    }
    #[getter]
    fn qber_i(&self) -> f64 {
        self.0.qber_i
    }
    #[getter]
    fn p_ap(&self) -> f64 {
        self.0.p_ap
    }
    #[getter]
    fn f_s(&self) -> f64 {
        self.0.f_s
    }
    #[getter]
    fn integration_time_s(&self) -> f64 {
        self.0.integration_time_s
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Basis biases, intensities and intensity probabilities.
#[pyclass(frozen, name = "ProtocolParams")]
struct ProtocolParams(core::ProtocolParams);

#[pymethods]
impl ProtocolParams {
    #[new]
    fn new(pax: f64, pbx: f64, mu: [f64; 3], p_mu: [f64; 3]) -> PyResult<Self> {
        core::ProtocolParams::new(pax, pbx, mu, p_mu).map(Self).map_err(to_py)
    }

    #[getter]
    fn pax(&self) -> f64 {
        self.0.pax
    }
    #[getter]
    fn pbx(&self) -> f64 {
        self.0.pbx
    }
    #[getter]
    fn mu(&self) -> [f64; 3] {
        self.0.mu
    }
    #[getter]
    fn p_mu(&self) -> [f64; 3] {
        self.0.p_mu
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Secrecy and correctness parameters.
#[pyclass(frozen, name = "SecurityParams")]
struct SecurityParams(core::SecurityParams);

#[pymethods]
impl SecurityParams {
    #[new]
    #[pyo3(signature = (eps_s=core::finite_key::DEFAULT_EPS_S, eps_c=core::finite_key::DEFAULT_EPS_C, beta=None, f_ec=None))]
    fn new(eps_s: f64, eps_c: f64, beta: Option<f64>, f_ec: Option<f64>) -> PyResult<Self> {
        let mut sec = core::SecurityParams::new(eps_s, eps_c).map_err(to_py)?;
        if let Some(b) = beta {
            sec = sec.with_beta(b).map_err(to_py)?;
        }
        if let Some(f_ec) = f_ec {
            sec = sec.with_reconciliation(core::Reconciliation::FixedEfficiency { f_ec });
        }
        Ok(Self(sec))
    }

    #[getter]
    fn eps_s(&self) -> f64 {
        self.0.eps_s
    }
    #[getter]
    fn eps_c(&self) -> f64 {
        self.0.eps_c
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }
}

/// Key length and the intermediate estimates behind it.
#[pyclass(frozen, name = "KeyLengthResult")]
struct KeyLengthResult(core::KeyLengthResult);

#[pymethods]
impl KeyLengthResult {
    #[getter]
    fn ell(&self) -> u64 {
        self.0.ell
    }
    #[getter]
    fn objective(&self) -> f64 {
        self.0.objective
    }
    #[getter]
    fn s_x0(&self) -> f64 {
        self.0.s_x0
    }
    #[getter]
    fn s_x1(&self) -> f64 {
        self.0.s_x1
    }
    #[getter]
    fn s_z1(&self) -> f64 {
        self.0.s_z1
    }
    #[getter]
    fn v_z1(&self) -> f64 {
        self.0.v_z1
    }
    #[getter]
    fn phi_x(&self) -> f64 {
        self.0.phi_x
    }
    #[getter]
    fn lambda_ec(&self) -> f64 {
        self.0.lambda_ec
    }
    #[getter]
    fn qber_x(&self) -> f64 {
        self.0.qber_x
    }
    #[getter]
    fn n_x(&self) -> f64 {
        self.0.n_x
    }
    /// Why no key was produced, or `None`.
    #[getter]
    fn no_key(&self) -> Option<String> {
        self.0.no_key.map(|r| format!("{r:?}"))
    }

    fn __repr__(&self) -> String {
        format!("KeyLengthResult(ell={}, phi_x={}, lambda_ec={})", self.0.ell, self.0.phi_x, self.0.lambda_ec)
    }
}

fn security(sec: Option<&SecurityParams>) -> core::SecurityParams {
    sec.map(|s| s.0).unwrap_or_default()
}

fn regime(name: &str, pbx: Option<f64>, mu: Option<[f64; 3]>) -> PyResult<core::Regime> {
    let need_pbx = || pbx.ok_or_else(|| PyValueError::new_err(format!("regime `{name}` needs pbx")));
    match name {
        "full" => Ok(core::Regime::Full),
        "fixed-pbx" => Ok(core::Regime::FixedPbx { pbx: need_pbx()? }),
        "fixed-pbx-and-mu" => Ok(core::Regime::FixedPbxAndMu {
            pbx: need_pbx()?,
            mu: mu.ok_or_else(|| PyValueError::new_err("regime `fixed-pbx-and-mu` needs mu"))?,
        }),
        other => Err(PyValueError::new_err(format!("unknown regime `{other}`"))),
    }
}

fn evaluation(
    params: Option<&ProtocolParams>,
    regime_name: &str,
    pbx: Option<f64>,
    mu: Option<[f64; 3]>,
    seed: u64,
) -> PyResult<core::Evaluation> {
    Ok(match params {
        Some(p) => core::Evaluation::Fixed(p.0),
        None => core::Evaluation::Optimized(core::OptimizationSpec::new(regime(regime_name, pbx, mu)?).with_seed(seed)),
    })
}

/// Key length for fixed parameters.
#[pyfunction]
#[pyo3(signature = (params, channel, sec=None))]
fn key_length(
    py: Python<'_>,
    params: &ProtocolParams,
    channel: &ChannelConditions,
    sec: Option<&SecurityParams>,
) -> PyResult<KeyLengthResult> {
    let (p, c, s) = (params.0, channel.0, security(sec));
    py.detach(|| core::key_length(&p, &c, &s)).map(KeyLengthResult).map_err(to_py)
}

/// Best parameters under a regime; returns `(params, result)`.
#[pyfunction]
#[pyo3(signature = (channel, regime="full", pbx=None, mu=None, restarts=8, seed=0, sec=None))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    py: Python<'_>,
    channel: &ChannelConditions,
    regime: &str,
    pbx: Option<f64>,
    mu: Option<[f64; 3]>,
    restarts: usize,
    seed: u64,
    sec: Option<&SecurityParams>,
) -> PyResult<(ProtocolParams, KeyLengthResult)> {
    let spec = core::OptimizationSpec::new(self::regime(regime, pbx, mu)?).with_seed(seed).with_restarts(restarts);
    let (c, s) = (channel.0, security(sec));
    let r = py.detach(|| core::optimize(&spec, &c, &s)).map_err(to_py)?;
    Ok((ProtocolParams(r.best_params), KeyLengthResult(r.best)))
}

/// Minimum key length over the intensity uncertainty grid, as a dict.
#[pyfunction]
#[pyo3(signature = (params, channel, f, grid_points=3, sec=None))]
fn worst_case<'py>(
    py: Python<'py>,
    params: &ProtocolParams,
    channel: &ChannelConditions,
    f: f64,
    grid_points: usize,
    sec: Option<&SecurityParams>,
) -> PyResult<Bound<'py, PyDict>> {
    let model = core::IntensityUncertaintyModel::new(f, params.0)
        .and_then(|m| m.with_grid_points(grid_points))
        .map_err(to_py)?;
    let (c, s) = (channel.0, security(sec));
    let w = py.detach(|| core::worst_case_key_length(&model, &c, &s)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("min_ell", w.min_ell)?;
    d.set_item("nominal_ell", w.nominal_ell)?;
    d.set_item("evaluations", w.evaluations)?;
    d.set_item("states", w.argmin.states.to_vec())?;
    d.set_item("estimator", w.argmin.estimator)?;
    Ok(d)
}

/// Largest loss meeting `target_bits`; returns `(eta_loss_db or None, ell)`.
///
/// With `params` the parameters stay fixed, otherwise they are optimised at
/// each probe under `regime`.
#[pyfunction]
#[pyo3(signature = (channel, target_bits=0, params=None, regime="full", pbx=None, mu=None, seed=0, resolution_db=0.1, sec=None))]
#[allow(clippy::too_many_arguments)]
fn max_loss(
    py: Python<'_>,
    channel: &ChannelConditions,
    target_bits: u64,
    params: Option<&ProtocolParams>,
    regime: &str,
    pbx: Option<f64>,
    mu: Option<[f64; 3]>,
    seed: u64,
    resolution_db: f64,
    sec: Option<&SecurityParams>,
) -> PyResult<(Option<f64>, u64)> {
    let eval = evaluation(params, regime, pbx, mu, seed)?;
    let query = core::LossBudgetQuery::new(target_bits, channel.0, eval, security(sec)).with_resolution(resolution_db);
    let b = py.detach(|| core::max_loss(&query)).map_err(to_py)?;
    Ok((b.eta_loss_db, b.ell))
}

/// Key rate in bits per minute at each integration time; returns `[(tau_s, ell, skr)]`.
#[pyfunction]
#[pyo3(signature = (times, channel, params=None, regime="full", pbx=None, mu=None, seed=0, sec=None))]
#[allow(clippy::too_many_arguments)]
fn skr_vs_time(
    py: Python<'_>,
    times: Vec<f64>,
    channel: &ChannelConditions,
    params: Option<&ProtocolParams>,
    regime: &str,
    pbx: Option<f64>,
    mu: Option<[f64; 3]>,
    seed: u64,
    sec: Option<&SecurityParams>,
) -> PyResult<Vec<(f64, u64, f64)>> {
    let eval = evaluation(params, regime, pbx, mu, seed)?;
    let (c, s) = (channel.0, security(sec));
    let pts = py.detach(|| core::skr_vs_time(&times, &c, &eval, &s)).map_err(to_py)?;
    Ok(pts.iter().map(|p| (p.tau_s, p.ell, p.skr_bits_per_min)).collect())
}

/// Sifting equivalence for basis biases `(pax, pbx)` as a dict.
#[pyfunction]
fn sifting_equivalence<'py>(py: Python<'py>, pax: f64, pbx: f64) -> PyResult<Bound<'py, PyDict>> {
    let s = core::sifting_equivalence(pax, pbx).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("k", s.k)?;
    d.set_item("p_x", s.p_x)?;
    d.set_item("f", s.f)?;
    d.set_item("f_prime", s.f_prime)?;
    Ok(d)
}

/// Binary entropy in bits.
#[pyfunction]
fn binary_entropy(x: f64) -> PyResult<f64> {
    core::binary_entropy(x).map_err(to_py)
}

#[pymodule]
fn ebb84(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ChannelConditions>()?;
    m.add_class::<ProtocolParams>()?;
    m.add_class::<SecurityParams>()?;
    m.add_class::<KeyLengthResult>()?;
    m.add_function(wrap_pyfunction!(key_length, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case, m)?)?;
    m.add_function(wrap_pyfunction!(max_loss, m)?)?;
    m.add_function(wrap_pyfunction!(skr_vs_time, m)?)?;
    m.add_function(wrap_pyfunction!(sifting_equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    Ok(())
}
