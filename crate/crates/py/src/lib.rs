//! Python bindings for the half-line NLS simulator.
//!
//! The module mirrors the core crate's surface with plain Python types:
//! fields travel as `list[complex]`, diagnostics as `list[float]`, and the
//! classifier/certificate/smallness reports as small attribute-bag classes.
//! Python keywords force two renames: `lambda` is `lam` and `RateFit.pass`
//! is `passed`.

use halfline_nls::detector::{
    check_small_data_bound, detect_blowup, fit_decay_rate, DetectorConfig, SmallDataBranch,
};
use halfline_nls::diagnostics::mass_law_deviation;
use halfline_nls::dynamics::{run_simulation, RunPlan, SchemeConfig, Termination, TimeSeries};
use halfline_nls::grid::{chirped_gaussian, DerivMode};
use halfline_nls::theory::{
    blowup_coefficients, check_blowup_hypotheses, classify_regime, critical_boundary_power,
    mu_exponent, smallness_report, BlowupCertificate,
};
use halfline_nls::{Field, Grid, ModelParams, C64};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn py_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "None".to_string(),
    }
}

fn py_bool(v: bool) -> &'static str {
    if v {
        "True"
    } else {
        "False"
    }
}

fn make_grid(length: f64, intervals: usize) -> PyResult<Grid> {
    Grid::new(length, intervals).map_err(value_err)
}

fn make_field(length: f64, intervals: usize, values: Vec<C64>) -> PyResult<Field> {
    let grid = make_grid(length, intervals)?;
    Field::from_values(grid, values).map_err(value_err)
}

/// Model parameters (λ, p, k, r, a). `lam` is the boundary coupling λ.
#[pyclass(frozen, skip_from_py_object, name = "Params")]
#[derive(Clone)]
struct PyParams {
    inner: ModelParams,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(lam: f64, p: f64, k: f64, r: f64, a: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ModelParams::new(lam, p, k, r, a).map_err(value_err)?,
        })
    }

    /// Relaxed validation-mode constructor: λ ≥ 0 and k ≥ 0 are allowed, so
    /// linear and boundary-free configurations can be exercised.
    #[staticmethod]
    fn validation(lam: f64, p: f64, k: f64, r: f64, a: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ModelParams::validation(lam, p, k, r, a).map_err(value_err)?,
        })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }
    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(lam={}, p={}, k={}, r={}, a={})",
            self.inner.lambda, self.inner.p, self.inner.k, self.inner.r, self.inner.a
        )
    }
}

/// Regime classification of one parameter point.
#[pyclass(frozen, name = "Classification")]
struct PyClassification {
    #[pyo3(get)]
    regime: String,
    #[pyo3(get)]
    blowup: String,
    #[pyo3(get)]
    global_existence: String,
    #[pyo3(get)]
    decay_exponent: Option<f64>,
    #[pyo3(get)]
    decay_discounted: Option<bool>,
}

#[pymethods]
impl PyClassification {
    fn __repr__(&self) -> String {
        format!(
            "Classification(regime='{}', blowup='{}', global_existence='{}', \
             decay_exponent={}, decay_discounted={})",
            self.regime,
            self.blowup,
            self.global_existence,
            py_opt(&self.decay_exponent),
            py_opt(&self.decay_discounted.map(py_bool)),
        )
    }
}

/// Blow-up certificate: the data functionals, the momentum condition, and
/// the predicted collapse time when the hypotheses hold.
#[pyclass(frozen, name = "Certificate")]
struct PyCertificate {
    inner: BlowupCertificate,
}

#[pymethods]
impl PyCertificate {
    #[getter]
    fn e0(&self) -> f64 {
        self.inner.e0
    }
    #[getter]
    fn i0(&self) -> f64 {
        self.inner.i0
    }
    #[getter]
    fn y0(&self) -> f64 {
        self.inner.y0
    }
    #[getter]
    fn v0(&self) -> f64 {
        self.inner.v0
    }
    #[getter]
    fn b(&self) -> f64 {
        self.inner.coefficients.b
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.coefficients.kappa
    }
    #[getter]
    fn m(&self) -> f64 {
        self.inner.coefficients.m
    }
    #[getter]
    fn cond3_lhs(&self) -> f64 {
        self.inner.cond3_lhs
    }
    #[getter]
    fn cond3_rhs(&self) -> f64 {
        self.inner.cond3_rhs
    }
    #[getter]
    fn hypotheses_met(&self) -> bool {
        self.inner.hypotheses_met
    }
    #[getter]
    fn t_predicted(&self) -> Option<f64> {
        self.inner.t_predicted
    }

    fn __repr__(&self) -> String {
        format!(
            "Certificate(hypotheses_met={}, e0={:.6e}, y0={:.6e}, t_predicted={})",
            py_bool(self.inner.hypotheses_met),
            self.inner.e0,
            self.inner.y0,
            py_opt(&self.inner.t_predicted),
        )
    }
}

/// Small-data stabilization report for initial data.
#[pyclass(frozen, name = "Smallness")]
struct PySmallness {
    #[pyo3(get)]
    sigma: f64,
    #[pyo3(get)]
    gamma: f64,
    #[pyo3(get)]
    c1: f64,
    #[pyo3(get)]
    c2: f64,
    #[pyo3(get)]
    mass: f64,
    #[pyo3(get)]
    contraction_applicable: bool,
    #[pyo3(get)]
    contraction_ok: bool,
    #[pyo3(get)]
    mass_gap_ok: bool,
    #[pyo3(get)]
    mu: Option<f64>,
    #[pyo3(get)]
    delta: Option<f64>,
    #[pyo3(get)]
    phi_bound: Option<f64>,
}

/// Log-linear decay fit of ln(‖u‖² + ‖u_x‖²) over a time window.
#[pyclass(frozen, name = "RateFit")]
struct PyRateFit {
    #[pyo3(get)]
    slope: f64,
    #[pyo3(get)]
    intercept: f64,
    #[pyo3(get)]
    r_squared: f64,
    #[pyo3(get)]
    n_samples: usize,
    #[pyo3(get)]
    target: f64,
    #[pyo3(get)]
    epsilon: f64,
    #[pyo3(get)]
    passed: bool,
}

#[pymethods]
impl PyRateFit {
    fn __repr__(&self) -> String {
        format!(
            "RateFit(slope={:.4}, target={:.4}, epsilon={:.4}, passed={})",
            self.slope,
            self.target,
            self.epsilon,
            py_bool(self.passed)
        )
    }
}

/// Blow-up verdict combining detection, prediction window, refinement
/// consistency, and the certified trajectory inequalities.
#[pyclass(frozen, name = "Verdict")]
struct PyVerdict {
    #[pyo3(get)]
    detected: bool,
    #[pyo3(get)]
    t_detect: Option<f64>,
    #[pyo3(get)]
    solver_failed: bool,
    #[pyo3(get)]
    refinement_consistent: Option<bool>,
    #[pyo3(get)]
    t_predicted: Option<f64>,
    #[pyo3(get)]
    within_predicted_window: Option<bool>,
    #[pyo3(get)]
    envelope_min_margin: Option<f64>,
    #[pyo3(get)]
    z_nonincreasing: Option<bool>,
    #[pyo3(get)]
    theta_integral_max: Option<f64>,
}

#[pymethods]
impl PyVerdict {
    fn __repr__(&self) -> String {
        format!(
            "Verdict(detected={}, t_detect={}, within_predicted_window={})",
            py_bool(self.detected),
            py_opt(&self.t_detect),
            py_opt(&self.within_predicted_window.map(py_bool)),
        )
    }
}

/// Ceiling check of a trajectory against its small-data bound.
#[pyclass(frozen, name = "CeilingCheck")]
struct PyCeilingCheck {
    #[pyo3(get)]
    branch: String,
    #[pyo3(get)]
    bound: f64,
    #[pyo3(get)]
    observed_sup: f64,
    #[pyo3(get)]
    ok: bool,
}

/// A completed run: sampled diagnostics plus the termination record.
#[pyclass(frozen, name = "Run")]
struct PyRun {
    series: TimeSeries,
}

impl PyRun {
    fn snapshot(&self) -> PyResult<&(f64, Field)> {
        self.series
            .final_snapshot()
            .ok_or_else(|| PyValueError::new_err("run recorded no snapshots"))
    }
}

#[pymethods]
impl PyRun {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.series.rows.iter().map(|r| r.t).collect()
    }
    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.series.rows.iter().map(|r| r.diag.mass).collect()
    }
    #[getter]
    fn ux_sq(&self) -> Vec<f64> {
        self.series.rows.iter().map(|r| r.diag.ux_sq).collect()
    }
    #[getter]
    fn energy(&self) -> Vec<f64> {
        self.series.rows.iter().map(|r| r.diag.e).collect()
    }
    #[getter]
    fn variance(&self) -> Vec<f64> {
        self.series.rows.iter().map(|r| r.diag.i).collect()
    }
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.series.rows.iter().map(|r| r.diag.theta).collect()
    }
    #[getter]
    fn boundary_trace(&self) -> Vec<f64> {
        self.series.rows.iter().map(|r| r.diag.trace_abs).collect()
    }

    /// "completed", "blowup", or "failure".
    #[getter]
    fn termination(&self) -> &'static str {
        match self.series.termination {
            Termination::Completed => "completed",
            Termination::BlowupDetected { .. } => "blowup",
            Termination::SolverFailure { .. } => "failure",
        }
    }
    #[getter]
    fn t_detect(&self) -> Option<f64> {
        match self.series.termination {
            Termination::BlowupDetected { t, .. } => Some(t),
            _ => None,
        }
    }

    #[getter]
    fn final_time(&self) -> PyResult<f64> {
        Ok(self.snapshot()?.0)
    }
    #[getter]
    fn final_state(&self) -> PyResult<Vec<C64>> {
        Ok(self.snapshot()?.1.values().to_vec())
    }

    /// Largest relative deviation of ‖u(t)‖² from e^{−2at}‖u₀‖².
    fn mass_law_max_deviation(&self) -> f64 {
        mass_law_deviation(&self.series)
            .into_iter()
            .map(|(_, d)| d)
            .fold(0.0, f64::max)
    }

    /// Fit the decay rate of ln(‖u‖² + ‖u_x‖²) on [t_lo, t_hi] and compare
    /// the slope against −(target − epsilon).
    fn fit_decay_rate(
        &self,
        t_lo: f64,
        t_hi: f64,
        target: f64,
        epsilon: f64,
    ) -> PyResult<PyRateFit> {
        let fit = fit_decay_rate(&self.series, (t_lo, t_hi), target, epsilon).map_err(value_err)?;
        Ok(PyRateFit {
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            n_samples: fit.n_samples,
            target: fit.target,
            epsilon: fit.epsilon,
            passed: fit.pass,
        })
    }

    /// Blow-up verdict for this run, optionally cross-checked against a
    /// refined run and a certificate.
    #[pyo3(signature = (refined=None, certificate=None))]
    fn detect(
        &self,
        refined: Option<&PyRun>,
        certificate: Option<&PyCertificate>,
    ) -> PyResult<PyVerdict> {
        let v = detect_blowup(
            &self.series,
            refined.map(|r| &r.series),
            certificate.map(|c| &c.inner),
            &DetectorConfig::default(),
        )
        .map_err(value_err)?;
        Ok(PyVerdict {
            detected: v.detected,
            t_detect: v.t_detect,
            solver_failed: v.solver_failed,
            refinement_consistent: v.refinement_consistent,
            t_predicted: v.t_predicted,
            within_predicted_window: v.within_predicted_window,
            envelope_min_margin: v.envelope_min_margin,
            z_nonincreasing: v.z_nonincreasing,
            theta_integral_max: v.theta_integral_max,
        })
    }

    /// Check the trajectory against its small-data ceiling (contraction or
    /// mass-gap branch, chosen from the initial data).
    fn check_ceiling(&self, params: &PyParams, initial: Vec<C64>) -> PyResult<PyCeilingCheck> {
        let grid = self.series.grid;
        let u0 = Field::from_values(grid, initial).map_err(value_err)?;
        let report = smallness_report(&params.inner, &u0).map_err(value_err)?;
        let check = check_small_data_bound(&self.series, &report, &DetectorConfig::default())
            .map_err(value_err)?;
        Ok(PyCeilingCheck {
            branch: match check.branch {
                SmallDataBranch::Contraction => "contraction".into(),
                SmallDataBranch::MassGap => "mass-gap".into(),
            },
            bound: check.bound,
            observed_sup: check.observed_sup,
            ok: check.ok,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Run(samples={}, termination='{}')",
            self.series.rows.len(),
            self.termination()
        )
    }
}

/// Grid nodes x_j = j·L/N for j = 0..N.
#[pyfunction]
fn grid_nodes(length: f64, intervals: usize) -> PyResult<Vec<f64>> {
    let grid = make_grid(length, intervals)?;
    Ok((0..grid.node_count()).map(|j| grid.x(j)).collect())
}

/// Chirped Gaussian datum A·exp(−(x−x₀)²/(2w²))·exp(i·c·x²) sampled on the
/// grid, as a list of complex values.
#[pyfunction]
fn gaussian(
    length: f64,
    intervals: usize,
    amplitude: f64,
    center: f64,
    width: f64,
    chirp: f64,
) -> PyResult<Vec<C64>> {
    let grid = make_grid(length, intervals)?;
    let field = chirped_gaussian(grid, amplitude, center, width, chirp).map_err(value_err)?;
    Ok(field.values().to_vec())
}

/// ‖u‖², ‖u_x‖² (one-sided difference), and ‖u‖_{p+2}^{p+2} of a sampled
/// field, as a (mass, ux_sq, lp_pp) tuple.
#[pyfunction]
fn field_norms(
    length: f64,
    intervals: usize,
    values: Vec<C64>,
    p: f64,
) -> PyResult<(f64, f64, f64)> {
    let field = make_field(length, intervals, values)?;
    let n = field.norms(p, DerivMode::OneSided);
    Ok((n.mass, n.ux_sq, n.lp_pp))
}

/// Classify the parameter regime.
#[pyfunction]
fn classify(params: &PyParams) -> PyResult<PyClassification> {
    let c = classify_regime(&params.inner).map_err(value_err)?;
    Ok(PyClassification {
        regime: c.regime.label().to_string(),
        blowup: c.blowup.label().to_string(),
        global_existence: c.global.label().to_string(),
        decay_exponent: c.decay.map(|d| d.exponent),
        decay_discounted: c.decay.map(|d| d.epsilon_discounted),
    })
}

/// Critical boundary power max(2, p − 2) separating the conditional
/// blow-up regime from the open band.
#[pyfunction]
#[pyo3(name = "critical_boundary_power")]
fn critical_boundary_power_py(p: f64) -> f64 {
    critical_boundary_power(p)
}

/// Interpolated decay exponent μ = (p+2)(p−2r)/(p(p+2)−2r), present in the
/// interior-dominated window 2 ≤ r < p/2.
#[pyfunction]
#[pyo3(name = "mu_exponent")]
fn mu_exponent_py(params: &PyParams) -> PyResult<Option<f64>> {
    mu_exponent(&params.inner).map(Some).or_else(|_| Ok(None))
}

/// Drift/curvature coefficients (M, b, κ) used by the collapse monitors,
/// as a (m, b, kappa) tuple.
#[pyfunction]
fn coefficients(params: &PyParams) -> PyResult<(f64, f64, f64)> {
    let c = blowup_coefficients(&params.inner).map_err(value_err)?;
    Ok((c.m, c.b, c.kappa))
}

/// Evaluate the blow-up certificate (E₀ ≤ 0, momentum condition, predicted
/// time) on initial data.
#[pyfunction]
fn certificate(
    params: &PyParams,
    length: f64,
    intervals: usize,
    values: Vec<C64>,
) -> PyResult<PyCertificate> {
    let u0 = make_field(length, intervals, values)?;
    let cert = check_blowup_hypotheses(&params.inner, &u0).map_err(value_err)?;
    Ok(PyCertificate { inner: cert })
}

/// Evaluate the small-data stabilization report on initial data.
#[pyfunction]
fn smallness(
    params: &PyParams,
    length: f64,
    intervals: usize,
    values: Vec<C64>,
) -> PyResult<PySmallness> {
    let u0 = make_field(length, intervals, values)?;
    let s = smallness_report(&params.inner, &u0).map_err(value_err)?;
    Ok(PySmallness {
        sigma: s.sigma,
        gamma: s.gamma,
        c1: s.c1,
        c2: s.c2,
        mass: s.mass,
        contraction_applicable: s.contraction_applicable,
        contraction_ok: s.contraction_ok,
        mass_gap_ok: s.mass_gap_ok,
        mu: s.mu,
        delta: s.delta,
        phi_bound: s.phi_bound,
    })
}

/// Evolve initial data with the midpoint scheme and return the sampled
/// diagnostics plus the termination record.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (params, length, intervals, values, dt0, t_end,
                    sample_every=1, adapt=false, blowup_factor=1e6, dt_min=1e-9))]
fn simulate(
    params: &PyParams,
    length: f64,
    intervals: usize,
    values: Vec<C64>,
    dt0: f64,
    t_end: f64,
    sample_every: usize,
    adapt: bool,
    blowup_factor: f64,
    dt_min: f64,
) -> PyResult<PyRun> {
    let u0 = make_field(length, intervals, values)?;
    let scheme = SchemeConfig {
        dt0,
        adapt,
        blowup_factor,
        dt_min,
        ..SchemeConfig::default()
    };
    let plan = RunPlan {
        t_end,
        sample_every,
        snapshot_every: None,
    };
    let series = run_simulation(&params.inner, &u0, &scheme, &plan).map_err(value_err)?;
    Ok(PyRun { series })
}

/// Half-line NLS simulator bindings.
#[pymodule]
fn hlnls(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyClassification>()?;
    m.add_class::<PyCertificate>()?;
    m.add_class::<PySmallness>()?;
    m.add_class::<PyRateFit>()?;
    m.add_class::<PyVerdict>()?;
    m.add_class::<PyCeilingCheck>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(grid_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(field_norms, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(critical_boundary_power_py, m)?)?;
    m.add_function(wrap_pyfunction!(mu_exponent_py, m)?)?;
    m.add_function(wrap_pyfunction!(coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(smallness, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
