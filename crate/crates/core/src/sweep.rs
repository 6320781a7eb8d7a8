//! Parameter sweeps over the (r, p) phase plane.
//!
//! A sweep runs one simulation per cell of the Cartesian product of the
//! configured parameter lists, evaluates the blow-up certificate and the
//! detector on each, fits decay rates on damped no-blow-up rows, and then
//! scores every cell by whether the numerics agree with the predicted
//! behaviour. The aggregated phase table is the main artifact: one CSV row
//! per cell, including which side of the critical curve r = max{2, p−2}
//! the cell sits on, so super/sub-critical transitions can be read off
//! directly.
//!
//! Cells are enumerated in a fixed nested order (r, p, a, λ, amplitude,
//! chirp) and results are collected positionally, so the output is
//! byte-deterministic regardless of how the parallel runs are scheduled.

use crate::config::SweepConfig;
use crate::detector::{self, BlowupVerdict, DetectorConfig, RateFit};
use crate::dynamics::{self, RunPlan, SchemeConfig, Termination};
use crate::error::SolverError;
use crate::grid;
use crate::params::ModelParams;
use crate::theory::{self, BlowupCertificate, BlowupStatus, RegimeClass};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// How a cell's simulation relates to its predicted behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Agreement {
    /// The run confirms the prediction (certified blow-up detected, or a
    /// no-blow-up run that completed with the predicted decay rate).
    Agree,
    /// The run contradicts the prediction (blow-up on a no-blow-up row, or
    /// a certified cell that ran calmly far past its predicted time).
    Disagree,
    /// Neither confirmed nor contradicted (solver failure, uncertified
    /// data, horizon too short, fit without a clear rate).
    Inconclusive,
    /// The cell lies in a regime with no prediction to test.
    OpenCell,
}

impl Agreement {
    pub fn label(&self) -> &'static str {
        match self {
            Agreement::Agree => "agree",
            Agreement::Disagree => "disagree",
            Agreement::Inconclusive => "inconclusive",
            Agreement::OpenCell => "open",
        }
    }
}

/// Which side of the critical curve r = max{2, p−2} a cell is on.
pub fn conjecture_marker(r: f64, p: f64) -> &'static str {
    let d = r - theory::critical_boundary_power(p);
    if d.abs() <= 1e-12 {
        "crit"
    } else if d > 0.0 {
        "super"
    } else {
        "sub"
    }
}

/// Score one finished cell.
///
/// The rules, by predicted blow-up status:
///
/// * Open — nothing to test: always [`Agreement::OpenCell`].
/// * ConditionalYes — only certified data (hypotheses met) can score. A
///   consistent detection agrees; a run that completed past 1.5× the
///   predicted time disagrees; everything else is inconclusive.
/// * No — any consistent detection disagrees. Solver failures are
///   inconclusive. Otherwise a passing decay fit agrees (for damped rows);
///   for undamped rows plain completion agrees. A completed run whose fit
///   misses the rate stays inconclusive: a finite window cannot falsify an
///   asymptotic rate, while a detection contradicts "no blow-up" outright.
pub fn classify_agreement(
    class: &RegimeClass,
    certificate: Option<&BlowupCertificate>,
    verdict: &BlowupVerdict,
    termination: &Termination,
    rate_fit: Option<&RateFit>,
    t_end: f64,
) -> Agreement {
    let consistent_detection = verdict.detected && verdict.refinement_consistent != Some(false);
    match class.blowup {
        BlowupStatus::Open => Agreement::OpenCell,
        BlowupStatus::ConditionalYes => {
            let cert_met = certificate.is_some_and(|c| c.hypotheses_met);
            if !cert_met {
                return Agreement::Inconclusive;
            }
            if consistent_detection {
                return Agreement::Agree;
            }
            let t_predicted = certificate.and_then(|c| c.t_predicted);
            match (termination, t_predicted) {
                (Termination::Completed, Some(tp)) if t_end >= 1.5 * tp => Agreement::Disagree,
                _ => Agreement::Inconclusive,
            }
        }
        BlowupStatus::No => {
            if consistent_detection {
                return Agreement::Disagree;
            }
            if verdict.detected || verdict.solver_failed {
                return Agreement::Inconclusive;
            }
            match (class.decay.as_ref(), rate_fit) {
                (Some(_), Some(fit)) if fit.pass => Agreement::Agree,
                (Some(_), _) => Agreement::Inconclusive,
                (None, _) => match termination {
                    Termination::Completed => Agreement::Agree,
                    _ => Agreement::Inconclusive,
                },
            }
        }
    }
}

/// Everything recorded for one sweep cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub params: ModelParams,
    pub amplitude: f64,
    pub chirp: f64,
    pub class: RegimeClass,
    /// Present when the certificate was evaluable (non-degenerate
    /// coefficients); `hypotheses_met` inside says whether it fired.
    pub certificate: Option<BlowupCertificate>,
    pub verdict: BlowupVerdict,
    pub termination: Termination,
    /// Present on damped no-blow-up rows that completed.
    pub rate_fit: Option<RateFit>,
    pub agreement: Agreement,
}

fn run_cell(
    cfg: &SweepConfig,
    r: f64,
    p: f64,
    a: f64,
    lambda: f64,
    amplitude: f64,
    chirp: f64,
) -> Result<CellResult, SolverError> {
    let params = ModelParams::new(lambda, p, cfg.k, r, a)?;
    let class = theory::classify_regime(&params)?;
    let u0 = grid::chirped_gaussian(cfg.grid, amplitude, cfg.center, cfg.width, chirp)?;
    // Degenerate coefficients (and only structural problems like that)
    // leave the cell without a certificate; the hypotheses simply not
    // holding is recorded inside the certificate itself.
    let certificate = theory::check_blowup_hypotheses(&params, &u0).ok();

    let plan = RunPlan {
        t_end: cfg.t_end,
        sample_every: cfg.sample_every,
        snapshot_every: None,
    };
    let series = dynamics::run_simulation(&params, &u0, &cfg.scheme, &plan)?;

    let refined = if cfg.refine_detections
        && matches!(series.termination, Termination::BlowupDetected { .. })
    {
        let rgrid = cfg.grid.refined();
        let ru0 = grid::chirped_gaussian(rgrid, amplitude, cfg.center, cfg.width, chirp)?;
        let rscheme = SchemeConfig {
            dt0: 0.5 * cfg.scheme.dt0,
            ..cfg.scheme.clone()
        };
        let rplan = RunPlan {
            sample_every: cfg.sample_every * 2,
            ..plan
        };
        Some(dynamics::run_simulation(&params, &ru0, &rscheme, &rplan)?)
    } else {
        None
    };

    let verdict = detector::detect_blowup(
        &series,
        refined.as_ref(),
        certificate.as_ref(),
        &DetectorConfig::default(),
    )
    .expect("sweep certificate is built from the cell's own parameters");

    let rate_fit = match (&class.decay, &series.termination) {
        (Some(decay), Termination::Completed) => {
            let window = detector::default_fit_window(&series);
            let epsilon = 0.1 * decay.exponent;
            detector::fit_decay_rate(&series, window, decay.exponent, epsilon).ok()
        }
        _ => None,
    };

    let agreement = classify_agreement(
        &class,
        certificate.as_ref(),
        &verdict,
        &series.termination,
        rate_fit.as_ref(),
        cfg.t_end,
    );

    Ok(CellResult {
        params,
        amplitude,
        chirp,
        class,
        certificate,
        verdict,
        termination: series.termination,
        rate_fit,
        agreement,
    })
}

/// Run every cell of the sweep (in parallel, order-stable output).
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<CellResult>, SolverError> {
    let mut cells = Vec::new();
    for &r in &cfg.r {
        for &p in &cfg.p {
            for &a in &cfg.a {
                for &lambda in &cfg.lambda {
                    for &amplitude in &cfg.amplitude {
                        for &chirp in &cfg.chirp {
                            cells.push((r, p, a, lambda, amplitude, chirp));
                        }
                    }
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|&(r, p, a, lambda, amplitude, chirp)| {
            run_cell(cfg, r, p, a, lambda, amplitude, chirp)
        })
        .collect()
}

/// One row of the aggregated phase table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseRow {
    pub r: f64,
    pub p: f64,
    pub a: f64,
    pub lambda: f64,
    pub amplitude: f64,
    pub chirp: f64,
    pub row_label: String,
    pub certificate_met: bool,
    /// "blowup", "completed", or "failed".
    pub verdict: String,
    pub rate_slope: Option<f64>,
    pub agreement: String,
    pub conjecture_marker: String,
}

/// The aggregated sweep output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTable {
    pub rows: Vec<PhaseRow>,
}

/// Flatten cell results into phase-table rows (input order preserved).
pub fn aggregate_phase_table(cells: &[CellResult]) -> PhaseTable {
    let rows = cells
        .iter()
        .map(|cell| PhaseRow {
            r: cell.params.r,
            p: cell.params.p,
            a: cell.params.a,
            lambda: cell.params.lambda,
            amplitude: cell.amplitude,
            chirp: cell.chirp,
            row_label: cell.class.regime.label().to_string(),
            certificate_met: cell.certificate.is_some_and(|c| c.hypotheses_met),
            verdict: match cell.termination {
                Termination::Completed => "completed".to_string(),
                Termination::BlowupDetected { .. } => "blowup".to_string(),
                Termination::SolverFailure { .. } => "failed".to_string(),
            },
            rate_slope: cell.rate_fit.map(|f| f.slope),
            agreement: cell.agreement.label().to_string(),
            conjecture_marker: conjecture_marker(cell.params.r, cell.params.p).to_string(),
        })
        .collect();
    PhaseTable { rows }
}

impl PhaseTable {
    /// Stable column order; floats use shortest round-trip formatting and
    /// absent rate slopes stay empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "r,p,a,lambda,amplitude,chirp,row_label,certificate_met,verdict,rate_slope,agreement,conjecture_marker\n",
        );
        for row in &self.rows {
            let slope = row.rate_slope.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                row.r,
                row.p,
                row.a,
                row.lambda,
                row.amplitude,
                row.chirp,
                row.row_label,
                row.certificate_met,
                row.verdict,
                slope,
                row.agreement,
                row.conjecture_marker,
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::theory::BlowupCoefficients;

    #[test]
    fn conjecture_marker_flips_across_the_critical_curve() {
        // p = 6: critical power is 4.
        assert_eq!(conjecture_marker(3.5, 6.0), "sub");
        assert_eq!(conjecture_marker(4.0, 6.0), "crit");
        assert_eq!(conjecture_marker(4.5, 6.0), "super");
        // p = 2: the curve floors at 2.
        assert_eq!(conjecture_marker(1.0, 2.0), "sub");
        assert_eq!(conjecture_marker(2.0, 2.0), "crit");
        assert_eq!(conjecture_marker(3.0, 2.0), "super");
    }

    fn verdict_stub(detected: bool, solver_failed: bool) -> BlowupVerdict {
        BlowupVerdict {
            detected,
            t_detect: if detected { Some(0.1) } else { None },
            solver_failed,
            refinement_consistent: None,
            t_predicted: None,
            within_predicted_window: None,
            envelope_min_margin: None,
            z_nonincreasing: None,
            theta_integral_max: None,
        }
    }

    fn fit_stub(slope: f64, target: f64, epsilon: f64) -> RateFit {
        RateFit {
            slope,
            intercept: 0.0,
            r_squared: 0.999,
            n_samples: 50,
            target,
            epsilon,
            pass: slope <= -(target - epsilon),
        }
    }

    fn cert_stub(params: ModelParams, met: bool, t_predicted: Option<f64>) -> BlowupCertificate {
        BlowupCertificate {
            params,
            coefficients: BlowupCoefficients {
                m: 8.0,
                b: -5.0,
                kappa: 0.5,
            },
            e0: -1.0,
            i0: 1.0,
            y0: 1.0,
            v0: -4.0,
            cond3_lhs: 0.0,
            cond3_rhs: 1.0,
            hypotheses_met: met,
            t_predicted,
        }
    }

    #[test]
    fn agreement_rules_on_certified_boundary_cells() {
        let params = ModelParams::new(1.0, 2.0, 1.0, 3.0, 1.0).unwrap();
        let class = theory::classify_regime(&params).unwrap();
        assert_eq!(class.blowup, BlowupStatus::ConditionalYes);
        let cert = cert_stub(params, true, Some(0.2));

        // Certified + detected → agree.
        let detected = verdict_stub(true, false);
        let term = Termination::BlowupDetected {
            t: 0.15,
            ux_sq: 1e8,
            threshold: 1e6,
        };
        assert_eq!(
            classify_agreement(&class, Some(&cert), &detected, &term, None, 1.0),
            Agreement::Agree
        );

        // Certified but the run completed far past the predicted time → disagree.
        let calm = verdict_stub(false, false);
        assert_eq!(
            classify_agreement(
                &class,
                Some(&cert),
                &calm,
                &Termination::Completed,
                None,
                1.0
            ),
            Agreement::Disagree
        );

        // Horizon too short to contradict the certificate → inconclusive.
        assert_eq!(
            classify_agreement(
                &class,
                Some(&cert),
                &calm,
                &Termination::Completed,
                None,
                0.25
            ),
            Agreement::Inconclusive
        );

        // Uncertified data says nothing either way.
        let unmet = cert_stub(params, false, None);
        assert_eq!(
            classify_agreement(&class, Some(&unmet), &detected, &term, None, 1.0),
            Agreement::Inconclusive
        );

        // A detection that fails refinement consistency cannot confirm.
        let mut shaky = verdict_stub(true, false);
        shaky.refinement_consistent = Some(false);
        assert_eq!(
            classify_agreement(&class, Some(&cert), &shaky, &term, None, 1.0),
            Agreement::Inconclusive
        );
    }

    #[test]
    fn agreement_rules_on_no_blowup_rows() {
        // Damped weak-boundary row: decay prediction present.
        let params = ModelParams::new(1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        let class = theory::classify_regime(&params).unwrap();
        assert_eq!(class.blowup, BlowupStatus::No);
        let decay = class.decay.unwrap();

        let calm = verdict_stub(false, false);
        let good_fit = fit_stub(-2.05, decay.exponent, 0.1 * decay.exponent);
        assert!(good_fit.pass);
        assert_eq!(
            classify_agreement(
                &class,
                None,
                &calm,
                &Termination::Completed,
                Some(&good_fit),
                10.0
            ),
            Agreement::Agree
        );

        // Slow fit on a finite window cannot falsify an asymptotic rate.
        let slow_fit = fit_stub(-0.5, decay.exponent, 0.1 * decay.exponent);
        assert_eq!(
            classify_agreement(
                &class,
                None,
                &calm,
                &Termination::Completed,
                Some(&slow_fit),
                10.0
            ),
            Agreement::Inconclusive
        );

        // A blow-up detection on a no-blow-up row is an outright contradiction.
        let detected = verdict_stub(true, false);
        let term = Termination::BlowupDetected {
            t: 0.3,
            ux_sq: 1e8,
            threshold: 1e6,
        };
        assert_eq!(
            classify_agreement(&class, None, &detected, &term, None, 10.0),
            Agreement::Disagree
        );

        // Solver failure is never evidence.
        let failed = verdict_stub(false, true);
        let term = Termination::SolverFailure {
            t: 0.3,
            reason: "stalled".to_string(),
        };
        assert_eq!(
            classify_agreement(&class, None, &failed, &term, None, 10.0),
            Agreement::Inconclusive
        );

        // Undamped no-blow-up row (a = 0): completion itself agrees.
        let params0 = ModelParams::new(1.0, 2.0, 1.0, 1.0, 0.0).unwrap();
        let class0 = theory::classify_regime(&params0).unwrap();
        assert!(class0.decay.is_none());
        assert_eq!(
            classify_agreement(&class0, None, &calm, &Termination::Completed, None, 10.0),
            Agreement::Agree
        );
    }

    fn tiny_sweep() -> SweepConfig {
        SweepConfig {
            grid: Grid::new(20.0, 64).unwrap(),
            scheme: SchemeConfig {
                dt0: 1e-3,
                ..SchemeConfig::default()
            },
            r: vec![1.0, 3.0],
            p: vec![5.0],
            a: vec![1.0],
            lambda: vec![1.0],
            amplitude: vec![0.3],
            chirp: vec![0.0],
            k: 1.0,
            center: 2.0,
            width: 1.0,
            t_end: 0.05,
            sample_every: 1,
            refine_detections: true,
            output_dir: None,
        }
    }

    #[test]
    fn sweep_output_is_deterministic_and_respects_open_rows() {
        let cfg = tiny_sweep();
        let first = run_sweep(&cfg).unwrap();
        let second = run_sweep(&cfg).unwrap();
        let csv_a = aggregate_phase_table(&first).to_csv();
        let csv_b = aggregate_phase_table(&second).to_csv();
        assert_eq!(csv_a, csv_b, "repeated sweeps must be byte-identical");

        assert_eq!(first.len(), 2);
        // r = 1, p = 5 is a weak-boundary cell; r = 3, p = 5 has no
        // prediction and must never be scored.
        assert_eq!(first[0].class.blowup, BlowupStatus::No);
        assert_eq!(first[1].class.blowup, BlowupStatus::Open);
        assert_eq!(first[1].agreement, Agreement::OpenCell);
        assert!(csv_a.lines().nth(2).unwrap().contains(",open,"));

        // Short calm runs terminate normally and stay unscored or agreeing,
        // never contradicting.
        for cell in &first {
            assert_eq!(cell.termination, Termination::Completed);
            assert_ne!(cell.agreement, Agreement::Disagree);
        }

        // Header is the full stable column set.
        assert!(csv_a.starts_with(
            "r,p,a,lambda,amplitude,chirp,row_label,certificate_met,verdict,rate_slope,agreement,conjecture_marker\n"
        ));
    }
}
