//! Command-line driver for the half-line NLS simulator.
//!
//! Four subcommands cover the workflow:
//!
//! * `simulate` — run one configuration, write the diagnostics series,
//!   the final state, optional snapshots and a JSON summary holding the
//!   regime classification, blow-up certificate, detector verdict and
//!   decay-rate fit.
//! * `verify` — run the same configuration at two resolutions (half step,
//!   half spacing) and check that the conservation-law residuals converge
//!   at second order and the pointwise inequalities hold; fails loudly
//!   when they do not.
//! * `sweep` — run a parameter sweep and write the phase table CSV.
//! * `report` — summarize a sweep directory: agreement counts per regime
//!   row and the behaviour along the critical curve.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 solver or verification
//! failures, 4 I/O problems. Output is deterministic: no timestamps, no
//! machine names, stable key and column orders.

use clap::{Args, Parser, Subcommand};
use halfline_nls::config::{self, InitialData, RunConfig};
use halfline_nls::detector::{self, DetectorConfig, RateFit, SmallDataCheck};
use halfline_nls::diagnostics::{self, ResidualOrders, ResidualTable};
use halfline_nls::dynamics::{self, RunPlan, SchemeConfig, Termination, TimeSeries};
use halfline_nls::grid::{chirped_gaussian, Field};
use halfline_nls::sweep::{self, Agreement};
use halfline_nls::theory::{self, BlowupCertificate, RegimeClass, SmallnessReport};
use halfline_nls::{ConfigError, Grid, ModelParams, SolverError};
use serde::Serialize;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hlnls",
    version,
    about = "Half-line nonlinear Schrödinger workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write series, states and a JSON summary.
    Simulate(SimulateArgs),
    /// Check conservation-law residual convergence on one configuration.
    Verify(VerifyArgs),
    /// Run a parameter sweep and write the phase table.
    Sweep(SweepArgs),
    /// Summarize a sweep output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration file (flat `key = value` format).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output.dir` from the config, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resolution levels: 1 runs once, 2+ adds refined companion runs
    /// (half step, half spacing) used to cross-check any blow-up detection.
    #[arg(long, default_value_t = 1)]
    refine: u32,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run configuration file; the run must reach t_end at both resolutions.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for verify.json and the residual tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the check table on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output.dir` from the config, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary line on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// A directory previously written by `hlnls sweep` (holds phase.csv).
    #[arg(long)]
    dir: PathBuf,
    /// Suppress the report on stdout (report.txt is still written).
    #[arg(long)]
    quiet: bool,
}

/// Everything that can end a subcommand early, with its exit code.
#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    /// Bad input that the config parser cannot see (grid/file mismatches).
    Input(String),
    Solver(SolverError),
    /// The run itself broke down (recorded in the outputs, still exit 3).
    RunFailed(String),
    /// One or more verification checks failed.
    VerifyFailed(usize),
    Io(String, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration: {e}"),
            CliError::Input(msg) => write!(f, "configuration: {msg}"),
            CliError::Solver(e) => write!(f, "solver: {e}"),
            CliError::RunFailed(msg) => write!(f, "run failed: {msg}"),
            CliError::VerifyFailed(n) => write!(f, "{n} verification check(s) failed"),
            CliError::Io(what, e) => write!(f, "i/o on {what}: {e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Solver(_) | CliError::RunFailed(_) | CliError::VerifyFailed(_) => 3,
            CliError::Io(..) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Solver(e)
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn make_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Verify(args) => verify(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn build_initial(cfg: &RunConfig, grid: Grid, config_dir: &Path) -> Result<Field, CliError> {
    match &cfg.initial {
        InitialData::Gaussian {
            amplitude,
            center,
            width,
            chirp,
        } => chirped_gaussian(grid, *amplitude, *center, *width, *chirp)
            .map_err(|e| CliError::Input(format!("initial.*: {e}"))),
        InitialData::Csv { path } => {
            let resolved = config_dir.join(path);
            let text = read_file(&resolved)?;
            let field = Field::from_csv(&text)
                .map_err(|e| CliError::Input(format!("initial.csv_path: {e}")))?;
            if field.grid() != grid {
                return Err(CliError::Input(format!(
                    "initial.csv_path grid (length {}, {} intervals) does not match grid.* \
                     (length {}, {} intervals)",
                    field.grid().length(),
                    field.grid().intervals(),
                    grid.length(),
                    grid.intervals()
                )));
            }
            Ok(field)
        }
    }
}

/// Grid facts repeated in the summary so it is self-contained.
#[derive(Serialize)]
struct GridSummary {
    length: f64,
    intervals: usize,
    h: f64,
}

#[derive(Serialize)]
struct SchemeSummary {
    dt0: f64,
    nl_tol: f64,
    nl_max_iter: usize,
    adapt: bool,
    dt_min: f64,
    blowup_factor: f64,
    first_order: bool,
}

#[derive(Serialize)]
struct SnapshotEntry {
    t: f64,
    file: String,
}

#[derive(Serialize)]
struct RunSummary {
    model: ModelParams,
    grid: GridSummary,
    scheme: SchemeSummary,
    t_end: f64,
    termination: Termination,
    t_final: f64,
    samples: usize,
    regime: Option<RegimeClass>,
    certificate: Option<BlowupCertificate>,
    verdict: Option<detector::BlowupVerdict>,
    rate_fit: Option<RateFit>,
    smallness: Option<SmallnessReport>,
    small_data: Option<SmallDataCheck>,
    /// Worst relative deviation from the exact mass decay law.
    mass_law_max_deviation: Option<f64>,
    /// Worst conservation-law residuals (fixed-step runs only).
    residual_maxima: Option<diagnostics::ResidualSummary>,
    snapshots: Vec<SnapshotEntry>,
}

fn refined_scheme(scheme: &SchemeConfig) -> SchemeConfig {
    SchemeConfig {
        dt0: 0.5 * scheme.dt0,
        ..scheme.clone()
    }
}

fn describe_termination(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".to_string(),
        Termination::BlowupDetected {
            t,
            ux_sq,
            threshold,
        } => format!(
            "blow-up detected at t = {t} (gradient norm² {ux_sq:.6e} crossed {threshold:.6e})"
        ),
        Termination::SolverFailure { t, reason } => format!("solver failure at t = {t}: {reason}"),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let text = read_file(&args.config)?;
    let cfg = config::parse_run_config(&text)?;
    let config_dir = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if args.refine >= 2 && matches!(cfg.initial, InitialData::Csv { .. }) {
        return Err(CliError::Input(
            "refined companion runs need analytic initial data (initial.family = gaussian)"
                .to_string(),
        ));
    }

    let u0 = build_initial(&cfg, cfg.grid, &config_dir)?;
    let regime = theory::classify_regime(&cfg.params).ok();
    let certificate = theory::check_blowup_hypotheses(&cfg.params, &u0).ok();
    let smallness = theory::smallness_report(&cfg.params, &u0).ok();

    let series = dynamics::run_simulation(&cfg.params, &u0, &cfg.scheme, &cfg.plan)?;

    // Optional refined companions; the detector sees the finest.
    let mut refined: Option<TimeSeries> = None;
    let mut grid = cfg.grid;
    let mut scheme = cfg.scheme.clone();
    for _ in 1..args.refine {
        grid = grid.refined();
        scheme = refined_scheme(&scheme);
        let plan = RunPlan {
            sample_every: cfg.plan.sample_every * 2,
            ..cfg.plan
        };
        let ru0 = build_initial(&cfg, grid, &config_dir)?;
        refined = Some(dynamics::run_simulation(&cfg.params, &ru0, &scheme, &plan)?);
    }

    let verdict = detector::detect_blowup(
        &series,
        refined.as_ref(),
        certificate.as_ref(),
        &DetectorConfig::default(),
    )
    .ok();

    let rate_fit = match (regime.and_then(|c| c.decay), &series.termination) {
        (Some(decay), Termination::Completed) => {
            let window = detector::default_fit_window(&series);
            detector::fit_decay_rate(&series, window, decay.exponent, 0.1 * decay.exponent).ok()
        }
        _ => None,
    };
    let small_data = smallness.as_ref().and_then(|rep| {
        detector::check_small_data_bound(&series, rep, &DetectorConfig::default()).ok()
    });
    let mass_law_max_deviation = diagnostics::mass_law_deviation(&series)
        .iter()
        .map(|&(_, dev)| dev)
        .fold(None, |acc: Option<f64>, dev| {
            Some(acc.map_or(dev, |a| a.max(dev)))
        });
    let residual_maxima = if cfg.scheme.adapt {
        None
    } else {
        diagnostics::identity_residuals(&uniform_prefix(&series))
            .ok()
            .map(|t| t.summary)
    };

    make_dir(&out_dir)?;
    write_file(&out_dir.join("series.csv"), &series.to_csv())?;
    if let Some((_, field)) = series.final_snapshot() {
        write_file(&out_dir.join("final_state.csv"), &field.to_csv())?;
    }
    let mut snapshot_entries = Vec::new();
    if cfg.plan.snapshot_every.is_some() {
        for (idx, (t, field)) in series.snapshots.iter().enumerate() {
            let file = format!("snapshot_{idx:04}.csv");
            write_file(&out_dir.join(&file), &field.to_csv())?;
            snapshot_entries.push(SnapshotEntry { t: *t, file });
        }
    }

    let summary = RunSummary {
        model: cfg.params,
        grid: GridSummary {
            length: cfg.grid.length(),
            intervals: cfg.grid.intervals(),
            h: cfg.grid.h(),
        },
        scheme: SchemeSummary {
            dt0: cfg.scheme.dt0,
            nl_tol: cfg.scheme.nl_tol,
            nl_max_iter: cfg.scheme.nl_max_iter,
            adapt: cfg.scheme.adapt,
            dt_min: cfg.scheme.dt_min,
            blowup_factor: cfg.scheme.blowup_factor,
            first_order: cfg.scheme.first_order,
        },
        t_end: cfg.plan.t_end,
        termination: series.termination.clone(),
        t_final: series.rows.last().map(|r| r.t).unwrap_or(0.0),
        samples: series.rows.len(),
        regime,
        certificate,
        verdict,
        rate_fit,
        smallness,
        small_data,
        mass_law_max_deviation,
        residual_maxima,
        snapshots: snapshot_entries,
    };
    let json =
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail") + "\n";
    write_file(&out_dir.join("summary.json"), &json)?;

    if !args.quiet {
        println!("{}", describe_termination(&series.termination));
        if let Some(v) = &summary.verdict {
            if v.detected {
                println!(
                    "detector: blow-up at t = {}{}",
                    v.t_detect.unwrap_or(f64::NAN),
                    match v.within_predicted_window {
                        Some(true) => " (within the certified window)",
                        Some(false) => " (outside the certified window)",
                        None => "",
                    }
                );
            }
        }
        if let Some(fit) = &summary.rate_fit {
            println!(
                "decay fit: slope {:.4} vs target -{:.4} ({})",
                fit.slope,
                fit.target,
                if fit.pass { "pass" } else { "short" }
            );
        }
        println!("wrote {}", out_dir.join("summary.json").display());
    }

    match &series.termination {
        Termination::SolverFailure { t, reason } => {
            Err(CliError::RunFailed(format!("at t = {t}: {reason}")))
        }
        _ => Ok(()),
    }
}

/// Clone of the series truncated to its uniformly spaced prefix, so the
/// final clamped step of a fixed-step run does not break the cadence the
/// residual tables require.
fn uniform_prefix(series: &TimeSeries) -> TimeSeries {
    let rows = &series.rows;
    if rows.len() >= 3 {
        let d0 = rows[1].t - rows[0].t;
        let dl = rows[rows.len() - 1].t - rows[rows.len() - 2].t;
        if (dl - d0).abs() > 1e-9 * d0.max(dl) {
            let mut trimmed = series.clone();
            trimmed.rows.pop();
            return trimmed;
        }
    }
    series.clone()
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// One line of the verification table.
#[derive(Serialize)]
struct CheckLine {
    name: &'static str,
    value: f64,
    threshold: f64,
    /// "≥" when the value must stay at or above the threshold, "≤" otherwise.
    sense: &'static str,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    coarse: diagnostics::ResidualSummary,
    fine: diagnostics::ResidualSummary,
    orders: ResidualOrders,
    checks: Vec<CheckLine>,
    passed: bool,
}

const ORDER_MIN: f64 = 1.9;
/// Residuals this small are treated as exactly satisfied (no meaningful
/// convergence order exists at the rounding floor).
const EXACT_FLOOR: f64 = 1e-10;
const MASS_DEV_MAX: f64 = 1e-5;

fn order_check(name: &'static str, order: f64, coarse_max: f64, checks: &mut Vec<CheckLine>) {
    let pass = coarse_max <= EXACT_FLOOR || order >= ORDER_MIN;
    checks.push(CheckLine {
        name,
        value: order,
        threshold: ORDER_MIN,
        sense: "≥",
        pass,
    });
}

fn margin_check(name: &'static str, value: f64, checks: &mut Vec<CheckLine>) {
    checks.push(CheckLine {
        name,
        value,
        threshold: 0.0,
        sense: "≥",
        pass: value >= 0.0,
    });
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let text = read_file(&args.config)?;
    let cfg = config::parse_run_config(&text)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if !matches!(cfg.initial, InitialData::Gaussian { .. }) {
        return Err(CliError::Input(
            "verify needs analytic initial data (initial.family = gaussian)".to_string(),
        ));
    }
    let config_dir = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    // Residual tables need a uniform sample cadence, so the adaptive
    // controller is disabled here regardless of the configuration.
    let scheme = SchemeConfig {
        adapt: false,
        ..cfg.scheme.clone()
    };

    let run_level = |grid: Grid, scheme: &SchemeConfig| -> Result<ResidualTable, CliError> {
        let u0 = build_initial(&cfg, grid, &config_dir)?;
        let series = dynamics::run_simulation(&cfg.params, &u0, scheme, &cfg.plan)?;
        if series.termination != Termination::Completed {
            return Err(CliError::RunFailed(format!(
                "verification run did not reach t_end: {}",
                describe_termination(&series.termination)
            )));
        }
        diagnostics::identity_residuals(&uniform_prefix(&series))
            .map_err(|e| CliError::RunFailed(format!("residual table: {e}")))
    };

    let coarse = run_level(cfg.grid, &scheme)?;
    let fine = run_level(cfg.grid.refined(), &refined_scheme(&scheme))?;
    let orders = coarse.orders_against(&fine);

    let mut checks = Vec::new();
    order_check(
        "order(mass_law)",
        orders.mass_law,
        coarse.summary.max_mass_law,
        &mut checks,
    );
    order_check(
        "order(energy_balance)",
        orders.energy_balance,
        coarse.summary.max_energy_balance,
        &mut checks,
    );
    order_check(
        "order(energy_integral)",
        orders.energy_integral,
        coarse.summary.max_energy_integral,
        &mut checks,
    );
    order_check(
        "order(variance_law)",
        orders.variance_law,
        coarse.summary.max_variance_law,
        &mut checks,
    );
    order_check(
        "order(momentum_flux)",
        orders.momentum_flux,
        coarse.summary.max_momentum_flux,
        &mut checks,
    );
    margin_check(
        "margin(theta_pair)",
        fine.summary.worst_theta_margin,
        &mut checks,
    );
    margin_check(
        "margin(trace)",
        fine.summary.worst_trace_margin,
        &mut checks,
    );
    margin_check(
        "margin(mass_variance)",
        fine.summary.worst_mass_variance_margin,
        &mut checks,
    );
    checks.push(CheckLine {
        name: "mass_law_deviation(coarse)",
        value: coarse.summary.max_mass_law,
        threshold: MASS_DEV_MAX,
        sense: "≤",
        pass: coarse.summary.max_mass_law <= MASS_DEV_MAX,
    });

    let failed = checks.iter().filter(|c| !c.pass).count();
    let report = VerifyReport {
        coarse: coarse.summary,
        fine: fine.summary,
        orders,
        passed: failed == 0,
        checks,
    };

    make_dir(&out_dir)?;
    write_file(&out_dir.join("residuals_coarse.csv"), &coarse.to_csv())?;
    write_file(&out_dir.join("residuals_fine.csv"), &fine.to_csv())?;
    let json =
        serde_json::to_string_pretty(&report).expect("report serialization cannot fail") + "\n";
    write_file(&out_dir.join("verify.json"), &json)?;

    if !args.quiet {
        println!(
            "{:<28} {:>12} {:>3} {:>10}  result",
            "check", "value", "", "threshold"
        );
        for c in &report.checks {
            println!(
                "{:<28} {:>12.4e} {:>3} {:>10.2e}  {}",
                c.name,
                c.value,
                c.sense,
                c.threshold,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
    }

    if failed > 0 {
        Err(CliError::VerifyFailed(failed))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SweepSummary {
    cells: usize,
    agree: usize,
    disagree: usize,
    inconclusive: usize,
    open: usize,
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let text = read_file(&args.config)?;
    let cfg = config::parse_sweep_config(&text)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let cells = sweep::run_sweep(&cfg)?;
    let table = sweep::aggregate_phase_table(&cells);
    let count = |a: Agreement| cells.iter().filter(|c| c.agreement == a).count();
    let summary = SweepSummary {
        cells: cells.len(),
        agree: count(Agreement::Agree),
        disagree: count(Agreement::Disagree),
        inconclusive: count(Agreement::Inconclusive),
        open: count(Agreement::OpenCell),
    };

    make_dir(&out_dir)?;
    write_file(&out_dir.join("phase.csv"), &table.to_csv())?;
    let json =
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail") + "\n";
    write_file(&out_dir.join("sweep_summary.json"), &json)?;

    if !args.quiet {
        println!(
            "{} cells: {} agree, {} disagree, {} inconclusive, {} open",
            summary.cells, summary.agree, summary.disagree, summary.inconclusive, summary.open
        );
        println!("wrote {}", out_dir.join("phase.csv").display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct PhaseRecord {
    r: f64,
    p: f64,
    a: f64,
    lambda: f64,
    amplitude: f64,
    chirp: f64,
    row_label: String,
    verdict: String,
    agreement: String,
    marker: String,
}

fn parse_phase_csv(text: &str) -> Result<Vec<PhaseRecord>, CliError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let expected = "r,p,a,lambda,amplitude,chirp,row_label,certificate_met,verdict,rate_slope,agreement,conjecture_marker";
    if header != expected {
        return Err(CliError::Input(format!(
            "unrecognized phase.csv header: {header}"
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(CliError::Input(format!(
                "phase.csv row {}: expected 12 fields, found {}",
                idx + 2,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            fields[i].parse().map_err(|_| {
                CliError::Input(format!(
                    "phase.csv row {}: bad number {}",
                    idx + 2,
                    fields[i]
                ))
            })
        };
        rows.push(PhaseRecord {
            r: num(0)?,
            p: num(1)?,
            a: num(2)?,
            lambda: num(3)?,
            amplitude: num(4)?,
            chirp: num(5)?,
            row_label: fields[6].to_string(),
            verdict: fields[8].to_string(),
            agreement: fields[10].to_string(),
            marker: fields[11].to_string(),
        });
    }
    Ok(rows)
}

fn report(args: ReportArgs) -> Result<(), CliError> {
    let path = args.dir.join("phase.csv");
    let text = read_file(&path)?;
    let rows = parse_phase_csv(&text)?;

    let mut out = String::new();
    out.push_str(&format!("sweep report — {} cells\n\n", rows.len()));

    // Agreement counts per regime row, in a stable label order.
    let labels = [
        "weak-boundary",
        "interior-dominated",
        "critical-boundary",
        "balanced-open",
        "boundary-dominated",
    ];
    out.push_str("agreement by regime row\n");
    out.push_str(&format!(
        "{:<22} {:>6} {:>9} {:>13} {:>6}\n",
        "row", "agree", "disagree", "inconclusive", "open"
    ));
    for label in labels {
        let of = |a: &str| {
            rows.iter()
                .filter(|r| r.row_label == label && r.agreement == a)
                .count()
        };
        let total = rows.iter().filter(|r| r.row_label == label).count();
        if total == 0 {
            continue;
        }
        out.push_str(&format!(
            "{:<22} {:>6} {:>9} {:>13} {:>6}\n",
            label,
            of("agree"),
            of("disagree"),
            of("inconclusive"),
            of("open")
        ));
    }

    // Behaviour along the critical curve r = max{2, p−2}, grouped by p.
    let mut ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    out.push_str("\ncritical curve r = max{2, p-2}\n");
    for p in ps {
        let mut cells: Vec<&PhaseRecord> = rows.iter().filter(|row| row.p == p).collect();
        cells.sort_by(|x, y| {
            x.r.total_cmp(&y.r)
                .then(x.a.total_cmp(&y.a))
                .then(x.lambda.total_cmp(&y.lambda))
                .then(x.amplitude.total_cmp(&y.amplitude))
                .then(x.chirp.total_cmp(&y.chirp))
        });
        out.push_str(&format!("p = {p}:\n"));
        for c in cells {
            out.push_str(&format!(
                "  r = {:<6} [{}] {} → {} ({})\n",
                c.r, c.marker, c.row_label, c.verdict, c.agreement
            ));
        }
    }

    // Contradictions deserve the spotlight.
    let disagreements: Vec<&PhaseRecord> =
        rows.iter().filter(|r| r.agreement == "disagree").collect();
    out.push_str("\ndisagreements\n");
    if disagreements.is_empty() {
        out.push_str("  none\n");
    } else {
        for d in disagreements {
            out.push_str(&format!(
                "  r={} p={} a={} lambda={} amplitude={} chirp={}: {} row ended {}\n",
                d.r, d.p, d.a, d.lambda, d.amplitude, d.chirp, d.row_label, d.verdict
            ));
        }
    }

    write_file(&args.dir.join("report.txt"), &out)?;
    if !args.quiet {
        print!("{out}");
    }
    Ok(())
}
