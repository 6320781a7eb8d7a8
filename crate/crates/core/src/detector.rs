//! Verdicts: did a run blow up, how fast did it decay, and did it honor
//! the a-priori bounds?
//!
//! A blow-up *detection* (the gradient norm crossing its threshold) is
//! upgraded to a *verdict* only with corroboration: a refined rerun must
//! detect as well, at a consistent time, and when a certificate is
//! supplied the trajectory is checked against the quantities the
//! certificate controls (the predicted-time window, the gradient lower
//! envelope, monotonicity of the shifted variance, the sign of the
//! running θ-integral). A run that merely crashed is never counted as a
//! detection.
//!
//! Decay verdicts fit a log-linear rate to the H¹ proxy ‖u‖² + ‖u_x‖²
//! over a window and compare the slope against the predicted exponent
//! minus its ε discount; small-data verdicts compare the trajectory
//! against the contraction or mass-gap ceilings.

use crate::diagnostics;
use crate::dynamics::{Termination, TimeSeries};
use crate::error::DetectorError;
use crate::theory::{gradient_envelope, BlowupCertificate, SmallnessReport};
use serde::{Deserialize, Serialize};

/// Detector tunables.
#[derive(Debug, Clone, Copy)]
pub struct DetectorConfig {
    /// Relative agreement required between the coarse and refined
    /// detection times for the detection to count as grid-converged.
    pub refine_rel_tol: f64,
    /// Multiplicative slack granted on inequality checks (envelopes,
    /// monotonicity, a-priori ceilings).
    pub slack: f64,
    /// A detection is "within the predicted window" when it happens no
    /// later than this factor times the certified blow-up time.
    pub window_factor: f64,
    /// Fewest samples a rate-fit window may contain.
    pub min_fit_samples: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            refine_rel_tol: 0.1,
            slack: 0.05,
            window_factor: 1.1,
            min_fit_samples: 10,
        }
    }
}

/// Outcome of the blow-up checks on one (possibly refined) run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupVerdict {
    /// The run terminated by crossing the gradient threshold.
    pub detected: bool,
    /// Time of the threshold crossing.
    pub t_detect: Option<f64>,
    /// The run ended in a solver failure (never counted as a detection).
    pub solver_failed: bool,
    /// Detection agreed between the run and its refined rerun (present
    /// when a refined series was supplied).
    pub refinement_consistent: Option<bool>,
    /// Certified upper bound for the blow-up time, copied from the
    /// certificate when present.
    pub t_predicted: Option<f64>,
    /// t_detect ≤ window_factor · t_predicted.
    pub within_predicted_window: Option<bool>,
    /// Worst relative clearance of ‖u_x(t)‖ above the certified lower
    /// envelope (undamped certificates only; ≥ −slack passes).
    pub envelope_min_margin: Option<f64>,
    /// e^{2bt}·I(t) never increased by more than the slack (certificates
    /// with damping).
    pub z_nonincreasing: Option<bool>,
    /// Largest value of the running integral ∫₀ᵗ e^{2bs}θ(s) ds, which a
    /// certified trajectory keeps nonpositive (up to slack).
    pub theta_integral_max: Option<f64>,
}

fn params_match(series: &TimeSeries, cert: &BlowupCertificate) -> Result<(), DetectorError> {
    let a = series.params;
    let b = cert.params;
    let mut diffs = Vec::new();
    for (name, x, y) in [
        ("lambda", a.lambda, b.lambda),
        ("p", a.p, b.p),
        ("k", a.k, b.k),
        ("r", a.r, b.r),
        ("a", a.a, b.a),
    ] {
        if x != y {
            diffs.push(format!("{name}: {x} vs {y}"));
        }
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(DetectorError::CertificateMismatch {
            what: diffs.join(", "),
        })
    }
}

/// Evaluate the blow-up checks for a run, optionally corroborated by a
/// refined rerun and a certificate for the same parameters.
pub fn detect_blowup(
    series: &TimeSeries,
    refined: Option<&TimeSeries>,
    cert: Option<&BlowupCertificate>,
    cfg: &DetectorConfig,
) -> Result<BlowupVerdict, DetectorError> {
    if let Some(c) = cert {
        params_match(series, c)?;
    }

    let (detected, t_detect, solver_failed) = match &series.termination {
        Termination::BlowupDetected { t, .. } => (true, Some(*t), false),
        Termination::SolverFailure { .. } => (false, None, true),
        Termination::Completed => (false, None, false),
    };

    let refinement_consistent = refined.map(|fine| {
        let fine_detect = match &fine.termination {
            Termination::BlowupDetected { t, .. } => Some(*t),
            _ => None,
        };
        match (t_detect, fine_detect) {
            (Some(tc), Some(tf)) => (tc - tf).abs() <= cfg.refine_rel_tol * tc.abs().max(tf.abs()),
            (None, None) => !solver_failed,
            _ => false,
        }
    });

    let mut verdict = BlowupVerdict {
        detected,
        t_detect,
        solver_failed,
        refinement_consistent,
        t_predicted: None,
        within_predicted_window: None,
        envelope_min_margin: None,
        z_nonincreasing: None,
        theta_integral_max: None,
    };

    let Some(cert) = cert else { return Ok(verdict) };
    verdict.t_predicted = cert.t_predicted;

    if let (Some(tc), Some(tp)) = (t_detect, cert.t_predicted) {
        verdict.within_predicted_window = Some(tc <= cfg.window_factor * tp);
    }

    // Undamped certificates carry the explicit gradient lower envelope.
    if cert.params.a == 0.0 && cert.hypotheses_met {
        let mut min_margin = f64::INFINITY;
        let mut saw_any = false;
        for row in &series.rows {
            if let Some(env) = gradient_envelope(cert, row.t) {
                if env > 0.0 {
                    min_margin = min_margin.min((row.diag.ux_sq.sqrt() - env) / env);
                    saw_any = true;
                }
            }
        }
        if saw_any {
            verdict.envelope_min_margin = Some(min_margin);
        }
    }

    // Damped certificates predict that z(t) = e^{2bt}·I(t) shrinks toward
    // the blow-up time.
    if cert.params.a > 0.0 && cert.hypotheses_met {
        let b = cert.coefficients.b;
        let z: Vec<f64> = series
            .rows
            .iter()
            .map(|row| (2.0 * b * row.t).exp() * row.diag.i)
            .collect();
        if let Some(&z0) = z.first() {
            let tol = cfg.slack * z0.abs().max(f64::MIN_POSITIVE);
            let ok = z.windows(2).all(|w| w[1] <= w[0] + tol);
            verdict.z_nonincreasing = Some(ok);
        }
    }

    if cert.hypotheses_met {
        let running = diagnostics::theta_running_integral(series, cert.coefficients.b);
        verdict.theta_integral_max = running
            .into_iter()
            .map(|(_, v)| v)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |m| m.max(v)))
            });
    }

    Ok(verdict)
}

/// Least-squares fit of an exponential decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted d/dt ln(‖u‖² + ‖u_x‖²); decay shows as a negative slope.
    pub slope: f64,
    /// Fitted intercept of the log-linear model at t = 0.
    pub intercept: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    /// Number of samples in the window.
    pub n_samples: usize,
    /// Predicted exponent the slope is compared against.
    pub target: f64,
    /// Allowed shortfall below the target.
    pub epsilon: f64,
    /// slope ≤ −(target − epsilon).
    pub pass: bool,
}

/// The default fit window: the second half of the recorded samples, where
/// transients have died down.
pub fn default_fit_window(series: &TimeSeries) -> (f64, f64) {
    let t_last = series.rows.last().map(|r| r.t).unwrap_or(0.0);
    (0.5 * t_last, t_last)
}

/// Fit ln(‖u‖² + ‖u_x‖²) against t over `window = (lo, hi)` and compare
/// the slope with −(target − epsilon).
pub fn fit_decay_rate(
    series: &TimeSeries,
    window: (f64, f64),
    target: f64,
    epsilon: f64,
) -> Result<RateFit, DetectorError> {
    fit_decay_rate_with(
        series,
        window,
        target,
        epsilon,
        DetectorConfig::default().min_fit_samples,
    )
}

fn fit_decay_rate_with(
    series: &TimeSeries,
    window: (f64, f64),
    target: f64,
    epsilon: f64,
    min_samples: usize,
) -> Result<RateFit, DetectorError> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(DetectorError::BadWindow { lo, hi });
    }
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for row in &series.rows {
        if row.t < lo || row.t > hi {
            continue;
        }
        let proxy = row.diag.mass + row.diag.ux_sq;
        if !(proxy > 0.0) {
            return Err(DetectorError::NonPositiveSeries { t: row.t });
        }
        ts.push(row.t);
        logs.push(proxy.ln());
    }
    if ts.len() < min_samples {
        return Err(DetectorError::WindowTooSmall {
            lo,
            hi,
            got: ts.len(),
            min: min_samples,
        });
    }

    let n = ts.len() as f64;
    let mean_t = ts.iter().sum::<f64>() / n;
    let mean_y = logs.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (t, y) in ts.iter().zip(&logs) {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
    }
    if stt <= 0.0 {
        return Err(DetectorError::BadWindow { lo, hi });
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, y) in ts.iter().zip(&logs) {
        let fitted = intercept + slope * t;
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        n_samples: ts.len(),
        target,
        epsilon,
        pass: slope <= -(target - epsilon),
    })
}

/// Which a-priori ceiling a small-data trajectory was checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmallDataBranch {
    /// r > 2: the contraction ceiling sup_t ‖u_x(t)‖² e^{2at} ≤
    /// 2(r+2)/(r−2) · C₁.
    Contraction,
    /// r = 2 with the mass gap ‖u₀‖² < 1/(4λ): the energy ceiling
    /// sup_t |E(t)| e^{2at} ≤ |E(0)|/(1−4λm) · exp(2λm/(1−4λm)).
    MassGap,
}

/// Result of checking a trajectory against its small-data ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallDataCheck {
    pub branch: SmallDataBranch,
    /// The theoretical ceiling.
    pub bound: f64,
    /// Largest value the controlled quantity reached over the run.
    pub observed_sup: f64,
    /// observed_sup ≤ (1 + slack) · bound.
    pub ok: bool,
}

/// Check a trajectory against the small-data ceiling its parameters
/// qualify for. Errors when no branch applies (the data are not certified
/// small, or r sits outside both branches).
pub fn check_small_data_bound(
    series: &TimeSeries,
    report: &SmallnessReport,
    cfg: &DetectorConfig,
) -> Result<SmallDataCheck, DetectorError> {
    let params = &series.params;
    let a = params.a;
    if params.r > 2.0 {
        if !report.contraction_ok {
            return Err(DetectorError::BoundInapplicable {
                why: format!(
                    "contraction smallness test failed: C1·C2^γ = {:.3e} with C1 = {:.3e}, \
                     C2 = {:.3e}",
                    report.c1 * report.c2.powf(report.gamma),
                    report.c1,
                    report.c2
                ),
            });
        }
        let bound = 2.0 * (params.r + 2.0) / (params.r - 2.0) * report.c1;
        let observed_sup = series
            .rows
            .iter()
            .map(|row| row.diag.ux_sq * (2.0 * a * row.t).exp())
            .fold(0.0, f64::max);
        Ok(SmallDataCheck {
            branch: SmallDataBranch::Contraction,
            bound,
            observed_sup,
            ok: observed_sup <= (1.0 + cfg.slack) * bound,
        })
    } else if params.r == 2.0 {
        if params.p > 4.0 {
            return Err(DetectorError::BoundInapplicable {
                why: format!("the energy ceiling needs p ≤ 4, got p = {}", params.p),
            });
        }
        if !report.mass_gap_ok {
            return Err(DetectorError::BoundInapplicable {
                why: format!(
                    "mass gap failed: ‖u₀‖² = {:.6} is not below 1/(4λ) = {:.6}",
                    report.mass,
                    1.0 / (4.0 * params.lambda)
                ),
            });
        }
        let q = 4.0 * params.lambda * report.mass;
        let e0 = series.rows.first().map(|r| r.diag.e.abs()).unwrap_or(0.0);
        let bound = e0 / (1.0 - q) * (2.0 * params.lambda * report.mass / (1.0 - q)).exp();
        let observed_sup = series
            .rows
            .iter()
            .map(|row| row.diag.e.abs() * (2.0 * a * row.t).exp())
            .fold(0.0, f64::max);
        Ok(SmallDataCheck {
            branch: SmallDataBranch::MassGap,
            bound,
            observed_sup,
            ok: observed_sup <= (1.0 + cfg.slack) * bound,
        })
    } else {
        Err(DetectorError::BoundInapplicable {
            why: format!("no small-data ceiling covers r = {} < 2", params.r),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::DiagnosticsSample;
    use crate::dynamics::SampleRow;
    use crate::grid::Grid;
    use crate::params::ModelParams;
    use crate::theory;
    use approx::assert_relative_eq;

    /// Synthetic series with mass = m0·e^{−2λ̂t}, ux = x0·e^{−2λ̂t} and the
    /// remaining diagnostics filled mechanically.
    fn decaying_series(rate: f64, n: usize, t_end: f64, term: Termination) -> TimeSeries {
        let params = ModelParams::new(1.0, 4.0, 1.0, 3.0, 0.5 * rate).unwrap();
        series_from(params, term, n, t_end, move |t| {
            let decay = (-rate * t).exp();
            (0.7 * decay, 0.3 * decay, 0.0)
        })
    }

    /// Build a series by sampling closures for (mass, ux_sq, i).
    fn series_from(
        params: ModelParams,
        termination: Termination,
        n: usize,
        t_end: f64,
        f: impl Fn(f64) -> (f64, f64, f64),
    ) -> TimeSeries {
        let grid = Grid::new(40.0, 1024).unwrap();
        let rows = (0..=n)
            .map(|j| {
                let t = t_end * j as f64 / n as f64;
                let (mass, ux_sq, i) = f(t);
                SampleRow {
                    t,
                    dt_used: 1e-3,
                    diag: DiagnosticsSample {
                        mass,
                        ux_sq,
                        lp_pp: 0.0,
                        e: ux_sq,
                        i,
                        v: 0.0,
                        y: 0.0,
                        theta: 0.0,
                        theta1: 0.0,
                        rho: 0.0,
                        trace_abs: 0.0,
                    },
                }
            })
            .collect();
        TimeSeries {
            params,
            grid,
            dt0: 1e-3,
            b_used: 0.0,
            rows,
            snapshots: Vec::new(),
            termination,
        }
    }

    #[test]
    fn rate_fit_recovers_exact_exponential() {
        let series = decaying_series(2.0, 200, 10.0, Termination::Completed);
        let fit = fit_decay_rate(&series, default_fit_window(&series), 2.0, 0.1).unwrap();
        assert_relative_eq!(fit.slope, -2.0, max_relative = 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(fit.pass);
        // A stiffer target fails.
        let fit = fit_decay_rate(&series, default_fit_window(&series), 2.5, 0.1).unwrap();
        assert!(!fit.pass);
    }

    #[test]
    fn rate_fit_rejects_bad_windows_and_nonpositive_series() {
        let series = decaying_series(2.0, 200, 10.0, Termination::Completed);
        assert!(matches!(
            fit_decay_rate(&series, (3.0, 3.0), 2.0, 0.1),
            Err(DetectorError::BadWindow { .. })
        ));
        assert!(matches!(
            fit_decay_rate(&series, (9.99, 10.0), 2.0, 0.1),
            Err(DetectorError::WindowTooSmall { .. })
        ));
        let dead = series_from(series.params, Termination::Completed, 50, 1.0, |_| {
            (0.0, 0.0, 0.0)
        });
        assert!(matches!(
            fit_decay_rate(&dead, (0.0, 1.0), 2.0, 0.1),
            Err(DetectorError::NonPositiveSeries { .. })
        ));
    }

    fn blowup_cert(params: ModelParams) -> BlowupCertificate {
        let coefficients = theory::blowup_coefficients(&params).unwrap();
        let i0 = 1.0;
        let y0 = 0.5 * (params.a - coefficients.b) * i0 + 1.0;
        let mut cert = BlowupCertificate {
            params,
            coefficients,
            e0: -1.0,
            i0,
            y0,
            v0: -4.0 * y0,
            cond3_lhs: 0.5 * (params.a - coefficients.b) * i0,
            cond3_rhs: y0,
            hypotheses_met: true,
            t_predicted: None,
        };
        cert.t_predicted = Some(theory::predicted_blowup_time(&cert).unwrap());
        cert
    }

    #[test]
    fn detection_requires_matching_parameters() {
        let params = ModelParams::new(1.0, 2.0, 1.0, 3.0, 1.0).unwrap();
        let series = series_from(
            params,
            Termination::BlowupDetected {
                t: 0.04,
                ux_sq: 1e8,
                threshold: 1e6,
            },
            50,
            0.04,
            |t| (1.0, 1.0 / (0.05 - t), 0.05 - t),
        );
        let other = ModelParams::new(2.0, 2.0, 1.0, 3.0, 1.0).unwrap();
        let cert = blowup_cert(other);
        assert!(matches!(
            detect_blowup(&series, None, Some(&cert), &DetectorConfig::default()),
            Err(DetectorError::CertificateMismatch { .. })
        ));
    }

    #[test]
    fn detection_with_refinement_and_damped_certificate() {
        let params = ModelParams::new(1.0, 2.0, 1.0, 3.0, 1.0).unwrap();
        let cert = blowup_cert(params);
        let t_pred = cert.t_predicted.unwrap();
        // I(t) shrinking linearly toward the predicted time keeps
        // z = e^{2bt}·I decreasing (b < 0 here).
        let make = |t_detect: f64| {
            series_from(
                params,
                Termination::BlowupDetected {
                    t: t_detect,
                    ux_sq: 1e8,
                    threshold: 1e6,
                },
                60,
                t_detect,
                move |t| {
                    (
                        1.0,
                        1.0 / (t_pred - t).max(1e-6),
                        (1.0 - 0.5 * t / t_pred).max(0.0),
                    )
                },
            )
        };
        let coarse = make(0.9 * t_pred);
        let fine = make(0.93 * t_pred);
        let v = detect_blowup(
            &coarse,
            Some(&fine),
            Some(&cert),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert!(v.detected);
        assert_eq!(v.refinement_consistent, Some(true));
        assert_eq!(v.within_predicted_window, Some(true));
        assert_eq!(v.z_nonincreasing, Some(true));
        assert!(v.theta_integral_max.unwrap() <= 0.0);

        // A refined run detecting at a very different time breaks consistency.
        let inconsistent = make(0.5 * t_pred);
        let v = detect_blowup(
            &coarse,
            Some(&inconsistent),
            Some(&cert),
            &DetectorConfig::default(),
        )
        .unwrap();
        assert_eq!(v.refinement_consistent, Some(false));
    }

    #[test]
    fn solver_failure_is_never_a_detection() {
        let params = ModelParams::new(1.0, 2.0, 1.0, 3.0, 1.0).unwrap();
        let series = series_from(
            params,
            Termination::SolverFailure {
                t: 0.01,
                reason: "stalled".into(),
            },
            30,
            0.01,
            |_| (1.0, 1.0, 1.0),
        );
        let v = detect_blowup(&series, None, None, &DetectorConfig::default()).unwrap();
        assert!(!v.detected);
        assert!(v.solver_failed);
        // A failed coarse run cannot be corroborated by a refined detection.
        let fine = series_from(
            params,
            Termination::BlowupDetected {
                t: 0.02,
                ux_sq: 1e8,
                threshold: 1e6,
            },
            30,
            0.02,
            |t| (1.0, 1.0 / (0.03 - t), 1.0),
        );
        let v = detect_blowup(&series, Some(&fine), None, &DetectorConfig::default()).unwrap();
        assert_eq!(v.refinement_consistent, Some(false));
        assert!(!v.detected);
    }

    #[test]
    fn envelope_margin_on_exactly_saturating_series() {
        // Undamped certificate: ‖u_x(t)‖ = y₀√I₀/(I₀ − κy₀t) exactly on the
        // envelope gives margins ≈ 0.
        let params = ModelParams::new(5.0, 2.0, 1.0, 4.0, 0.0).unwrap();
        let coefficients = theory::blowup_coefficients(&params).unwrap();
        let (i0, y0) = (1.0, 0.5);
        let kappa = coefficients.kappa;
        let mut cert = BlowupCertificate {
            params,
            coefficients,
            e0: -1.0,
            i0,
            y0,
            v0: -4.0 * y0,
            cond3_lhs: 0.0,
            cond3_rhs: y0,
            hypotheses_met: true,
            t_predicted: None,
        };
        cert.t_predicted = Some(theory::predicted_blowup_time(&cert).unwrap());
        let t_detect = 0.9 * cert.t_predicted.unwrap();
        let series = series_from(
            params,
            Termination::BlowupDetected {
                t: t_detect,
                ux_sq: 1e8,
                threshold: 1e6,
            },
            50,
            t_detect,
            move |t| {
                let env = y0 * i0.sqrt() / (i0 - kappa * y0 * t);
                (1.0, env * env, i0)
            },
        );
        let v = detect_blowup(&series, None, Some(&cert), &DetectorConfig::default()).unwrap();
        let margin = v.envelope_min_margin.unwrap();
        assert!(
            margin.abs() < 1e-12,
            "saturating series should sit on the envelope: {margin}"
        );
        assert!(margin >= -DetectorConfig::default().slack);
    }

    #[test]
    fn small_data_contraction_branch_checks_ceiling() {
        let grid = Grid::new(40.0, 1024).unwrap();
        let params = ModelParams::new(1.0, 4.0, 1.0, 3.0, 0.5).unwrap();
        let tiny = crate::grid::chirped_gaussian(grid, 0.05, 2.0, 1.0, 0.1).unwrap();
        let report = theory::smallness_report(&params, &tiny).unwrap();
        assert!(report.contraction_ok);
        let c1 = report.c1;
        let a = params.a;
        // Trajectory safely below the ceiling 2(r+2)/(r−2)·C₁ = 10·C₁.
        let good = series_from(params, Termination::Completed, 40, 2.0, move |t| {
            (0.1 * (-t).exp(), 2.0 * c1 * (-2.0 * a * t).exp(), 0.0)
        });
        let check = check_small_data_bound(&good, &report, &DetectorConfig::default()).unwrap();
        assert_eq!(check.branch, SmallDataBranch::Contraction);
        assert_relative_eq!(check.bound, 10.0 * c1, max_relative = 1e-13);
        assert!(check.ok);

        // A trajectory violating the ceiling is flagged.
        let bad = series_from(params, Termination::Completed, 40, 2.0, move |_| {
            (0.1, 20.0 * c1, 0.0)
        });
        let check = check_small_data_bound(&bad, &report, &DetectorConfig::default()).unwrap();
        assert!(!check.ok);

        // Large data: the smallness test itself fails, so the bound is
        // inapplicable.
        let big = crate::grid::chirped_gaussian(grid, 3.0, 2.0, 1.0, 0.1).unwrap();
        let report_big = theory::smallness_report(&params, &big).unwrap();
        assert!(matches!(
            check_small_data_bound(&good, &report_big, &DetectorConfig::default()),
            Err(DetectorError::BoundInapplicable { .. })
        ));
    }

    #[test]
    fn small_data_mass_gap_branch() {
        let grid = Grid::new(40.0, 2048).unwrap();
        let params = ModelParams::new(1.0, 4.0, 1.0, 2.0, 0.5).unwrap();
        let small = crate::grid::chirped_gaussian(grid, 0.3, 2.0, 1.0, 0.0).unwrap();
        let report = theory::smallness_report(&params, &small).unwrap();
        assert!(report.mass_gap_ok);

        let series = series_from(params, Termination::Completed, 40, 2.0, |t| {
            (0.1 * (-t).exp(), 0.05 * (-t).exp(), 0.0)
        });
        let check = check_small_data_bound(&series, &report, &DetectorConfig::default()).unwrap();
        assert_eq!(check.branch, SmallDataBranch::MassGap);
        // e = ux_sq in the synthetic samples; e(0) = 0.05 and
        // q = 4λm < 1 gives a finite ceiling above the observed sup.
        assert!(check.bound > 0.0);

        // r < 2 has no ceiling at all.
        let weak = ModelParams::new(1.0, 4.0, 1.0, 1.0, 0.5).unwrap();
        let weak_series = series_from(weak, Termination::Completed, 40, 2.0, |t| {
            (0.1 * (-t).exp(), 0.05 * (-t).exp(), 0.0)
        });
        let weak_report = theory::smallness_report(&weak, &small).unwrap();
        assert!(matches!(
            check_small_data_bound(&weak_series, &weak_report, &DetectorConfig::default()),
            Err(DetectorError::BoundInapplicable { .. })
        ));
    }
}
