//! Monitored functionals and the identity-residual suite.
//!
//! For a solution of `i u_t − u_xx + k|u|^p u + i a u = 0` with boundary
//! flux `u_x(0) = −λ|u(0)|^r u(0)`, the continuum satisfies exact balance
//! laws; the simulator is checked against the discrete versions:
//!
//! - mass law:        d/dt ‖u‖² + 2a ‖u‖² = 0
//! - energy balance:  d/dt E + 2a E + (2akp/(p+2))‖u‖^{p+2}_{p+2}
//!   − (2aλr/(r+2))|u(0)|^{r+2} = 0
//! - energy integral: E(t)e^{2bt} = E(0) + ∫₀ᵗ e^{2bs} ρ(s) ds, any b ∈ ℝ
//! - variance law:    I′ + 2a I = V
//! - momentum flux:   V′ + 2a V = θ₁
//!
//! with E = ‖u_x‖² − (2λ/(r+2))|u(0)|^{r+2} + (2k/(p+2))‖u‖^{p+2}_{p+2},
//! I = ∫x²|u|², V = −4·Im∫x ū u_x, y = −V/4, and the θ/θ₁ pair defined
//! below. Residuals are formed per sampled interval with centered
//! differences at interval midpoints and trapezoid cumulative integrals,
//! so a second-order scheme shows residuals of order dt² + h² + Δ²
//! (Δ = sample spacing).

use crate::dynamics::TimeSeries;
use crate::error::DiagnosticsError;
use crate::grid::{DerivMode, Field};
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};

/// Everything measured about the field at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSample {
    /// ‖u‖².
    pub mass: f64,
    /// ‖u_x‖².
    pub ux_sq: f64,
    /// ‖u‖^{p+2}_{p+2}.
    pub lp_pp: f64,
    /// Energy E.
    pub e: f64,
    /// Second moment I = ∫x²|u|².
    pub i: f64,
    /// Momentum functional V = −4 Im ∫ x ū u_x.
    pub v: f64,
    /// y = −V/4 = Im ∫ x ū u_x.
    pub y: f64,
    /// θ: the exponent-shifted energy density (needs a > b).
    pub theta: f64,
    /// θ₁ = 8‖u_x‖² + (4kp/(p+2))‖u‖^{p+2}_{p+2} − 4λ|u(0)|^{r+2}.
    pub theta1: f64,
    /// ρ: the source in the energy-integral law (division-free form).
    pub rho: f64,
    /// |u(0)|.
    pub trace_abs: f64,
}

/// Energy E(u) = ‖u_x‖² − (2λ/(r+2))|u(0)|^{r+2} + (2k/(p+2))‖u‖^{p+2}_{p+2}.
///
/// The boundary term is *focusing* (it enters with a minus sign): strong
/// boundary injection can drive E below zero, which is one of the blow-up
/// certificate's hypotheses.
pub fn energy(params: &ModelParams, f: &Field) -> f64 {
    let n = f.norms(params.p, DerivMode::OneSided);
    energy_from_parts(params, n.ux_sq, f.boundary_trace(), n.lp_pp)
}

pub(crate) fn energy_from_parts(
    params: &ModelParams,
    ux_sq: f64,
    trace_abs: f64,
    lp_pp: f64,
) -> f64 {
    ux_sq - 2.0 * params.lambda / (params.r + 2.0) * trace_abs.powf(params.r + 2.0)
        + 2.0 * params.k / (params.p + 2.0) * lp_pp
}

/// Variance and momentum functionals: returns (I, V, y) with
/// I = ∫x²|u|², y = Im ∫x ū u_x, V = −4y.
pub fn virial(f: &Field) -> (f64, f64, f64) {
    let du = f.derivative(DerivMode::OneSided);
    let grid = f.grid();
    let integrand: Vec<f64> = f
        .values()
        .iter()
        .zip(du.iter())
        .enumerate()
        .map(|(j, (u, d))| grid.x(j) * (u.conj() * d).im)
        .collect();
    let y = grid.trapezoid(&integrand);
    let i = f.second_moment();
    (i, -4.0 * y, y)
}

/// θ, θ₁ and ρ for a given exponent shift b (θ requires a > b):
///
/// ```text
/// θ  = ‖u_x‖² − [(a(r+2)−2b)/(2a−2b)]·(2λ/(r+2))·|u(0)|^{r+2}
///              + (2k/(p+2))·‖u‖^{p+2}_{p+2}
/// θ₁ = 8‖u_x‖² + (4kp/(p+2))·‖u‖^{p+2}_{p+2} − 4λ·|u(0)|^{r+2}
/// ρ  = −(2a−2b)·‖u_x‖² + (a(r+2)−2b)·(2λ/(r+2))·|u(0)|^{r+2}
///              − (a(p+2)−2b)·(2k/(p+2))·‖u‖^{p+2}_{p+2}
/// ```
///
/// ρ is expanded so that it stays defined as a → b (where it vanishes
/// linearly); θ genuinely needs the ratio and errors when a ≤ b.
pub fn theta_functionals(
    params: &ModelParams,
    b: f64,
    f: &Field,
) -> Result<(f64, f64, f64), DiagnosticsError> {
    let n = f.norms(params.p, DerivMode::OneSided);
    theta_from_parts(params, b, n.ux_sq, f.boundary_trace(), n.lp_pp)
}

pub(crate) fn theta_from_parts(
    params: &ModelParams,
    b: f64,
    ux_sq: f64,
    trace_abs: f64,
    lp_pp: f64,
) -> Result<(f64, f64, f64), DiagnosticsError> {
    let (a, r, p) = (params.a, params.r, params.p);
    if !(a > b) {
        return Err(DiagnosticsError::ThetaUndefined { a, b });
    }
    let tr_pow = trace_abs.powf(r + 2.0);
    let boundary_coeff = (a * (r + 2.0) - 2.0 * b) / (2.0 * a - 2.0 * b);
    let theta = ux_sq - boundary_coeff * 2.0 * params.lambda / (r + 2.0) * tr_pow
        + 2.0 * params.k / (p + 2.0) * lp_pp;
    let theta1 =
        8.0 * ux_sq + 4.0 * params.k * p / (p + 2.0) * lp_pp - 4.0 * params.lambda * tr_pow;
    let rho = -(2.0 * a - 2.0 * b) * ux_sq
        + (a * (r + 2.0) - 2.0 * b) * 2.0 * params.lambda / (r + 2.0) * tr_pow
        - (a * (p + 2.0) - 2.0 * b) * 2.0 * params.k / (p + 2.0) * lp_pp;
    Ok((theta, theta1, rho))
}

/// The pointwise bound θ₁ ≤ M·θ uses M = max(8, 2p).
pub fn m_constant(p: f64) -> f64 {
    8.0f64.max(2.0 * p)
}

impl DiagnosticsSample {
    /// Measure every functional on one field. `b` is the exponent shift
    /// used by θ and ρ; it must satisfy b < a.
    pub fn compute(params: &ModelParams, b: f64, f: &Field) -> Result<Self, DiagnosticsError> {
        let n = f.norms(params.p, DerivMode::OneSided);
        let trace_abs = f.boundary_trace();
        let e = energy_from_parts(params, n.ux_sq, trace_abs, n.lp_pp);
        let (i, v, y) = virial(f);
        let (theta, theta1, rho) = theta_from_parts(params, b, n.ux_sq, trace_abs, n.lp_pp)?;
        Ok(Self {
            mass: n.mass,
            ux_sq: n.ux_sq,
            lp_pp: n.lp_pp,
            e,
            i,
            v,
            y,
            theta,
            theta1,
            rho,
            trace_abs,
        })
    }
}

/// One interval's centered residuals for the five balance laws.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualRow {
    /// Midpoint time of the interval.
    pub t_mid: f64,
    /// d/dt ‖u‖² + 2a‖u‖².
    pub mass_law: f64,
    /// Energy balance law residual.
    pub energy_balance: f64,
    /// Energy integral law residual, evaluated at the interval's right end.
    pub energy_integral: f64,
    /// I′ + 2aI − V.
    pub variance_law: f64,
    /// V′ + 2aV − θ₁.
    pub momentum_flux: f64,
}

/// Pointwise inequality margins (≥ 0 up to discretization slack).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarginRow {
    pub t: f64,
    /// M·θ − θ₁.
    pub theta_pair: f64,
    /// 2‖u‖‖u_x‖ − |u(0)|².
    pub trace_cauchy_schwarz: f64,
    /// 2√(I)·√(‖u_x‖²) − ‖u‖².
    pub mass_variance_cauchy_schwarz: f64,
    /// Allowed slack at this sample: max(10⁻⁸, 5(dt² + h²)·scale).
    pub slack: f64,
}

/// Worst-case magnitudes over the table, for convergence studies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_mass_law: f64,
    pub max_energy_balance: f64,
    pub max_energy_integral: f64,
    pub max_variance_law: f64,
    pub max_momentum_flux: f64,
    /// Most negative margin observed after subtracting slack (≥ 0 means
    /// every inequality held within slack).
    pub worst_theta_margin: f64,
    pub worst_trace_margin: f64,
    pub worst_mass_variance_margin: f64,
}

/// Residual table over a uniformly sampled series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualTable {
    /// Base step of the run that produced the series.
    pub dt: f64,
    /// Grid spacing of the run.
    pub h: f64,
    /// Sample spacing Δ.
    pub sample_dt: f64,
    /// Exponent shift used for the energy-integral law.
    pub b: f64,
    pub rows: Vec<ResidualRow>,
    pub margins: Vec<MarginRow>,
    pub summary: ResidualSummary,
}

/// Observed convergence orders between two tables (coarse vs half dt, h, Δ).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualOrders {
    pub mass_law: f64,
    pub energy_balance: f64,
    pub energy_integral: f64,
    pub variance_law: f64,
    pub momentum_flux: f64,
}

impl ResidualTable {
    /// log₂ ratios of max residuals against a table from a run at half the
    /// step sizes; ≈ 2 for a second-order scheme.
    pub fn orders_against(&self, fine: &ResidualTable) -> ResidualOrders {
        let ord = |c: f64, f: f64| (c / f).log2();
        ResidualOrders {
            mass_law: ord(self.summary.max_mass_law, fine.summary.max_mass_law),
            energy_balance: ord(
                self.summary.max_energy_balance,
                fine.summary.max_energy_balance,
            ),
            energy_integral: ord(
                self.summary.max_energy_integral,
                fine.summary.max_energy_integral,
            ),
            variance_law: ord(self.summary.max_variance_law, fine.summary.max_variance_law),
            momentum_flux: ord(
                self.summary.max_momentum_flux,
                fine.summary.max_momentum_flux,
            ),
        }
    }

    /// CSV with one row per interval: residuals, then the margins at the
    /// interval's right endpoint.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t_mid,mass_law,energy_balance,energy_integral,variance_law,momentum_flux,\
             theta_margin,trace_cs_margin,mass_variance_cs_margin,slack\n",
        );
        for (row, margin) in self.rows.iter().zip(self.margins.iter().skip(1)) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.t_mid,
                row.mass_law,
                row.energy_balance,
                row.energy_integral,
                row.variance_law,
                row.momentum_flux,
                margin.theta_pair,
                margin.trace_cauchy_schwarz,
                margin.mass_variance_cauchy_schwarz,
                margin.slack,
            ));
        }
        out
    }
}

/// Relative deviation of the sampled mass from the exact decay law
/// ‖u(t)‖² = e^{−2at}‖u₀‖²; returns (t, deviation) pairs and is the
/// primary convergence observable for the mass law.
pub fn mass_law_deviation(series: &TimeSeries) -> Vec<(f64, f64)> {
    let a = series.params.a;
    let m0 = match series.rows.first() {
        Some(first) => first.diag.mass,
        None => return Vec::new(),
    };
    series
        .rows
        .iter()
        .map(|row| {
            (
                row.t,
                (row.diag.mass - (-2.0 * a * row.t).exp() * m0).abs() / m0,
            )
        })
        .collect()
}

/// Build the residual table for a uniformly sampled series, using the
/// series' own exponent shift b.
pub fn identity_residuals(series: &TimeSeries) -> Result<ResidualTable, DiagnosticsError> {
    identity_residuals_with_b(series, series.b_used)
}

/// Same, with an explicit b for the energy-integral law.
pub fn identity_residuals_with_b(
    series: &TimeSeries,
    b: f64,
) -> Result<ResidualTable, DiagnosticsError> {
    let rows = &series.rows;
    if rows.len() < 3 {
        return Err(DiagnosticsError::TooFewSamples {
            min: 3,
            got: rows.len(),
        });
    }
    let spacings: Vec<f64> = rows.windows(2).map(|w| w[1].t - w[0].t).collect();
    let dmin = spacings.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = spacings.iter().cloned().fold(0.0, f64::max);
    if !(dmin > 0.0) || (dmax - dmin) > 1e-9 * dmax {
        return Err(DiagnosticsError::NonUniformCadence {
            min: dmin,
            max: dmax,
        });
    }
    let delta = 0.5 * (dmin + dmax);
    let params = &series.params;
    let (a, r, p) = (params.a, params.r, params.p);
    let m = m_constant(p);
    let h = series.grid.h();
    let dt = series.dt0;
    let slack_scale = 5.0 * (dt * dt + h * h);

    // Margins at every sample.
    let margins: Vec<MarginRow> = rows
        .iter()
        .map(|row| {
            let d = &row.diag;
            let theta_scale = 1.0f64.max((m * d.theta).abs()).max(d.theta1.abs());
            MarginRow {
                t: row.t,
                theta_pair: m * d.theta - d.theta1,
                trace_cauchy_schwarz: 2.0 * d.mass.sqrt() * d.ux_sq.sqrt()
                    - d.trace_abs * d.trace_abs,
                mass_variance_cauchy_schwarz: 2.0 * (d.i * d.ux_sq).sqrt() - d.mass,
                slack: (1e-8f64).max(slack_scale * theta_scale),
            }
        })
        .collect();

    // Cumulative trapezoid of e^{2bs} ρ(s) at each sample.
    let mut cum = Vec::with_capacity(rows.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in rows.windows(2) {
        let f0 = (2.0 * b * w[0].t).exp() * w[0].diag.rho;
        let f1 = (2.0 * b * w[1].t).exp() * w[1].diag.rho;
        acc += 0.5 * (w[1].t - w[0].t) * (f0 + f1);
        cum.push(acc);
    }

    let e0 = rows[0].diag.e;
    let table_rows: Vec<ResidualRow> = rows
        .windows(2)
        .enumerate()
        .map(|(idx, w)| {
            let (s0, s1) = (&w[0].diag, &w[1].diag);
            let t_mid = 0.5 * (w[0].t + w[1].t);
            let ddt = |f1: f64, f0: f64| (f1 - f0) / delta;
            let avg = |f1: f64, f0: f64| 0.5 * (f1 + f0);
            let tr_pow0 = s0.trace_abs.powf(r + 2.0);
            let tr_pow1 = s1.trace_abs.powf(r + 2.0);
            ResidualRow {
                t_mid,
                mass_law: ddt(s1.mass, s0.mass) + 2.0 * a * avg(s1.mass, s0.mass),
                energy_balance: ddt(s1.e, s0.e)
                    + 2.0 * a * avg(s1.e, s0.e)
                    + 2.0 * a * params.k * p / (p + 2.0) * avg(s1.lp_pp, s0.lp_pp)
                    - 2.0 * a * params.lambda * r / (r + 2.0) * avg(tr_pow1, tr_pow0),
                energy_integral: s1.e * (2.0 * b * w[1].t).exp() - e0 - cum[idx + 1],
                variance_law: ddt(s1.i, s0.i) + 2.0 * a * avg(s1.i, s0.i) - avg(s1.v, s0.v),
                momentum_flux: ddt(s1.v, s0.v) + 2.0 * a * avg(s1.v, s0.v)
                    - avg(s1.theta1, s0.theta1),
            }
        })
        .collect();

    let max_abs = |pick: fn(&ResidualRow) -> f64| {
        table_rows.iter().map(|r| pick(r).abs()).fold(0.0, f64::max)
    };
    let worst = |pick: fn(&MarginRow) -> f64| {
        margins
            .iter()
            .map(|m| pick(m) + m.slack)
            .fold(f64::INFINITY, f64::min)
    };
    let summary = ResidualSummary {
        max_mass_law: max_abs(|r| r.mass_law),
        max_energy_balance: max_abs(|r| r.energy_balance),
        max_energy_integral: max_abs(|r| r.energy_integral),
        max_variance_law: max_abs(|r| r.variance_law),
        max_momentum_flux: max_abs(|r| r.momentum_flux),
        worst_theta_margin: worst(|m| m.theta_pair),
        worst_trace_margin: worst(|m| m.trace_cauchy_schwarz),
        worst_mass_variance_margin: worst(|m| m.mass_variance_cauchy_schwarz),
    };

    Ok(ResidualTable {
        dt,
        h,
        sample_dt: delta,
        b,
        rows: table_rows,
        margins,
        summary,
    })
}

/// Running trapezoid integral of e^{2bs}·θ(s) over the samples. For a
/// certified blow-up trajectory this stays ≤ 0 through the whole run.
pub fn theta_running_integral(series: &TimeSeries, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(series.rows.len());
    let mut acc = 0.0;
    if let Some(first) = series.rows.first() {
        out.push((first.t, 0.0));
    }
    for w in series.rows.windows(2) {
        let f0 = (2.0 * b * w[0].t).exp() * w[0].diag.theta;
        let f1 = (2.0 * b * w[1].t).exp() * w[1].diag.theta;
        acc += 0.5 * (w[1].t - w[0].t) * (f0 + f1);
        out.push((w[1].t, acc));
    }
    out
}

/// Exponent shift used by run diagnostics: the certificate value when it
/// is defined and smaller than a, otherwise a − 1 (any b < a makes the
/// energy-integral law and θ well-defined; the certificate b is required
/// only on certified blow-up runs, where it is always defined).
pub fn default_b(params: &ModelParams) -> f64 {
    match crate::theory::blowup_coefficients(params) {
        Ok(c) if c.b < params.a => c.b,
        _ => params.a - 1.0,
    }
}
