//! Command-line front end tying ingestion, estimation, policy evaluation,
//! and inference into reproducible runs.
//!
//! Every report embeds the fully resolved configuration and seed, numbers
//! are serialized at fixed precision, and all randomness flows through
//! per-replicate substreams, so a fixed seed reproduces byte-identical
//! artifacts across runs and thread counts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bunchkit::boundary::{blc_diagnostic, kink_estimates, KinkEstimates, Side};
use bunchkit::bounds::{
    buncher_ate_bounds, isoelastic_blc_bounds, saez_linear_epsilon, small_kink_approx, AteInputs,
    BoundInterval,
};
use bunchkit::counterfactual::{p_fixed, p_from_pto, p_upper_nonchangers, PEstimate, PMethod};
use bunchkit::data::{load_paychecks, PaycheckTable};
use bunchkit::empirical::{bunching_mass, histogram, write_histogram_csv, BinAlignment};
use bunchkit::inference::{
    cluster_bootstrap, im_confidence_interval, se_from_replicates, StatRecord,
};
use bunchkit::policy::{evaluate_policy, kink_shift_curve, write_kink_shift_csv};
use bunchkit::report::{Report, Value};
use bunchkit::simulate::{simulate_family, LatentDist, SimConfig, SimFamily};
use bunchkit::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_ESTIMATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "bunchkit",
    version,
    about = "Bunching-design estimation at a pay-schedule kink"
)]
struct Cli {
    /// Cap worker threads for parallel sections (0 keeps the default pool).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a paycheck CSV, apply sample filters, and write the
    /// canonical table.
    Ingest(IngestArgs),
    /// Estimate net bunching, buncher-ATE bounds, and elasticities with
    /// firm-clustered bootstrap confidence intervals.
    Estimate(EstimateArgs),
    /// Evaluate the ex-post hours effect and counterfactual reforms.
    Policy(PolicyArgs),
    /// Generate a synthetic paycheck panel with latent ground truth.
    Simulate(SimulateArgs),
    /// Run the firm-clustered bootstrap and dump the replicate records.
    Bootstrap(BootstrapArgs),
    /// Data diagnostics: histogram, point masses, shape-constraint checks.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    /// Keep only weekly paychecks.
    #[arg(long)]
    require_weekly: bool,
    /// Keep only hourly paychecks.
    #[arg(long)]
    require_hourly: bool,
    /// Drop workers who never record overtime.
    #[arg(long)]
    require_ever_overtime: bool,
    /// Drop workers whose hours never vary by at least one hour.
    #[arg(long)]
    require_hours_variation: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PMethodArg {
    Fixed,
    Pto,
    Nonchanger,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 40.0)]
    k: f64,
    #[arg(long, value_enum, default_value_t = PMethodArg::Pto)]
    p_method: PMethodArg,
    /// Counterfactual bunching mass for --p-method fixed.
    #[arg(long)]
    p_value: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Master seed for the bootstrap (required for reproducibility).
    #[arg(long)]
    seed: u64,
    /// Override the plug-in bandwidth (hours).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Local polynomial degree.
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Repeat estimation within groups of this column
    /// (firm_id, pay_frequency, pay_basis, or worker_id).
    #[arg(long)]
    group_by: Option<String>,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 40.0)]
    k: f64,
    #[arg(long, value_enum, default_value_t = PMethodArg::Pto)]
    p_method: PMethodArg,
    #[arg(long)]
    p_value: Option<f64>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Premium factor of the counterfactual reform.
    #[arg(long, default_value_t = 2.0)]
    rho_bar: f64,
    /// Kink-shift curve range (defaults to k - 5 .. k + 5, clamped to the
    /// data support).
    #[arg(long)]
    k_prime_lo: Option<f64>,
    #[arg(long)]
    k_prime_hi: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LatentArg {
    Normal,
    Logistic,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Isoelastic,
    Exponential,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    output_dir: PathBuf,
    /// Master seed (required: simulation must be reproducible).
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = -0.17)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Isoelastic)]
    family: FamilyArg,
    /// Production scale for --family exponential.
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = LatentArg::Normal)]
    latent: LatentArg,
    /// Location of ln(eta).
    #[arg(long)]
    location: Option<f64>,
    /// Scale of ln(eta).
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    n_workers: usize,
    #[arg(long, default_value_t = 20)]
    n_weeks: usize,
    #[arg(long, default_value_t = 100)]
    n_firms: usize,
    #[arg(long, default_value_t = 0.0)]
    p_mass: f64,
    #[arg(long, default_value_t = 0.0)]
    pto_prob: f64,
    #[arg(long, default_value_t = 40.0)]
    k: f64,
    /// Snap observed hours to the 1/8 grid.
    #[arg(long)]
    snap: bool,
    /// Share of latent variance at the worker level.
    #[arg(long, default_value_t = 0.0)]
    worker_effect: f64,
    /// Redraw the counterfactual-buncher flag weekly.
    #[arg(long)]
    cf_weekly: bool,
}

#[derive(Args)]
struct BootstrapArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 40.0)]
    k: f64,
    #[arg(long, value_enum, default_value_t = PMethodArg::Pto)]
    p_method: PMethodArg,
    #[arg(long)]
    p_value: Option<f64>,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 1)]
    degree: usize,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 40.0)]
    k: f64,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 0.125)]
    bin_width: f64,
    /// Half-width of the diagnostic grid around the kink.
    #[arg(long, default_value_t = 6.0)]
    grid_span: f64,
    #[arg(long, default_value_t = 0.25)]
    grid_step: f64,
}

struct Logger {
    level: u8, // 0 error, 1 warn, 2 info, 3 debug
}

impl Logger {
    fn from_env() -> Logger {
        let level = match std::env::var("BUNCHKIT_LOG").as_deref() {
            Ok("error") => 0,
            Ok("info") => 2,
            Ok("debug") => 3,
            _ => 1,
        };
        Logger { level }
    }

    fn warn(&self, msg: &str) {
        if self.level >= 1 {
            eprintln!("[warn] {msg}");
        }
    }

    fn info(&self, msg: &str) {
        if self.level >= 2 {
            eprintln!("[info] {msg}");
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    if e.is_data_error() {
        return EXIT_DATA;
    }
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_ESTIMATION,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        bunchkit::par::configure_threads(cli.threads);
    }
    let log = Logger::from_env();
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, &log),
        Command::Estimate(a) => cmd_estimate(&a, &log),
        Command::Policy(a) => cmd_policy(&a, &log),
        Command::Simulate(a) => cmd_simulate(&a, &log),
        Command::Bootstrap(a) => cmd_bootstrap(&a, &log),
        Command::Diagnose(a) => cmd_diagnose(&a, &log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load_table(path: &Path, log: &Logger) -> Result<PaycheckTable, Error> {
    let file = File::open(path)?;
    let outcome = load_paychecks(BufReader::new(file))?;
    if outcome.snapped_rows > 0 {
        log.warn(&format!(
            "{} rows snapped to the 1/8-hour grid",
            outcome.snapped_rows
        ));
    }
    for (col, n) in &outcome.defaulted_cells {
        log.warn(&format!("{n} empty {col} cells defaulted to 0"));
    }
    log.info(&format!(
        "loaded {} paychecks, {} workers, {} firms",
        outcome.table.len(),
        outcome.table.n_workers(),
        outcome.table.n_firms()
    ));
    Ok(outcome.table)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

fn estimate_p(
    table: &PaycheckTable,
    method: PMethodArg,
    p_value: Option<f64>,
    k: f64,
) -> Result<PEstimate, Error> {
    match method {
        PMethodArg::Fixed => {
            let v = p_value.ok_or_else(|| {
                Error::InvalidArgument("--p-method fixed requires --p-value".into())
            })?;
            p_fixed(v)
        }
        PMethodArg::Pto => p_from_pto(table, k),
        PMethodArg::Nonchanger => p_upper_nonchangers(table, k),
    }
}

fn p_method_name(method: PMethodArg) -> &'static str {
    match method {
        PMethodArg::Fixed => PMethod::Fixed.as_str(),
        PMethodArg::Pto => PMethod::Pto.as_str(),
        PMethodArg::Nonchanger => PMethod::NonchangerUpper.as_str(),
    }
}

fn interval_fields(r: &mut Report, prefix: &str, b: &BoundInterval) {
    r.set(&format!("{prefix}_lower"), b.lower);
    r.set(&format!("{prefix}_upper"), b.upper);
}

// ---------------------------------------------------------------------------
// ingest

fn cmd_ingest(a: &IngestArgs, log: &Logger) -> Result<(), Error> {
    let table = load_table(&a.input, log)?;
    let filter = bunchkit::data::SampleFilter {
        require_weekly: a.require_weekly,
        require_hourly: a.require_hourly,
        require_ever_overtime: a.require_ever_overtime,
        require_hours_variation: a.require_hours_variation,
    };
    let filtered = table.apply_sample_filters(&filter)?;
    let mut csv = Vec::new();
    filtered.write_csv(&mut csv)?;
    write_file(&a.output_dir, "paychecks.csv", &csv)?;

    let mut rep = Report::new();
    rep.set("input", a.input.display().to_string());
    rep.set("rows_in", table.len());
    rep.set("rows_out", filtered.len());
    rep.set("workers_out", filtered.n_workers());
    rep.set("firms_out", filtered.n_firms());
    let mut f = Report::new();
    f.set("require_weekly", a.require_weekly);
    f.set("require_hourly", a.require_hourly);
    f.set("require_ever_overtime", a.require_ever_overtime);
    f.set("require_hours_variation", a.require_hours_variation);
    rep.set("filters", Value::Obj(f));
    write_file(
        &a.output_dir,
        "ingest_report.json",
        rep.to_json().as_bytes(),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateCore {
    est: KinkEstimates,
    p: PEstimate,
    mass: f64,
    ate: BoundInterval,
    elasticity: BoundInterval,
    small_kink: f64,
    saez: f64,
}

fn estimate_core(
    table: &PaycheckTable,
    k: f64,
    method: PMethodArg,
    p_value: Option<f64>,
    bandwidth: Option<f64>,
    degree: usize,
) -> Result<EstimateCore, Error> {
    let hours = table.hours_vec();
    let p = estimate_p(table, method, p_value, k)?;
    let est = kink_estimates(&hours, k, p.value, bandwidth, degree)?;
    let mass = est.cdf_plus - est.cdf_minus;
    let inputs = AteInputs::from_estimates(&est, p.value)?;
    let ate = buncher_ate_bounds(&inputs)?;
    let small_kink = small_kink_approx(&inputs);
    let elasticity = isoelastic_blc_bounds(&hours, k, p.value, bandwidth, degree)?;
    let saez = saez_linear_epsilon(&hours, k, p.value, bandwidth, degree)?;
    Ok(EstimateCore {
        est,
        p,
        mass,
        ate,
        elasticity,
        small_kink,
        saez,
    })
}

/// Bootstrap statistic: re-estimate everything on a resample at a frozen
/// bandwidth.
fn replicate_statistic(
    table: &PaycheckTable,
    k: f64,
    method: PMethodArg,
    p_value: Option<f64>,
    bandwidth: f64,
    degree: usize,
) -> Result<StatRecord, Error> {
    let core = estimate_core(table, k, method, p_value, Some(bandwidth), degree)?;
    let mut rec = StatRecord::new();
    rec.insert("ate_lower".into(), core.ate.lower);
    rec.insert("ate_upper".into(), core.ate.upper);
    rec.insert("elasticity_lower".into(), core.elasticity.lower);
    rec.insert("elasticity_upper".into(), core.elasticity.upper);
    rec.insert("net_bunching".into(), core.mass - core.p.value);
    rec.insert("p".into(), core.p.value);
    rec.insert("saez_epsilon".into(), core.saez);
    rec.insert("small_kink".into(), core.small_kink);
    Ok(rec)
}

#[allow(clippy::too_many_arguments)]
fn estimate_report(
    table: &PaycheckTable,
    k: f64,
    method: PMethodArg,
    p_value: Option<f64>,
    alpha: f64,
    reps: usize,
    seed: u64,
    bandwidth: Option<f64>,
    degree: usize,
    log: &Logger,
) -> Result<Report, Error> {
    let core = estimate_core(table, k, method, p_value, bandwidth, degree)?;
    if core.p.clipped {
        log.warn("raw PTO estimate of p was negative; clipped to 0");
    }
    for w in &core.est.warnings {
        log.warn(w);
    }
    let frozen_bw = core.est.bandwidth;
    let stat = |t: &PaycheckTable| replicate_statistic(t, k, method, p_value, frozen_bw, degree);
    let boot = cluster_bootstrap(table, &stat, reps, seed)?;
    if boot.failed_reps > 0 {
        log.warn(&format!(
            "{} of {} bootstrap replicates failed and were excluded",
            boot.failed_reps, reps
        ));
    }
    let se = |field: &str| se_from_replicates(&boot, field);
    let se_ate_lower = se("ate_lower")?;
    let se_ate_upper = se("ate_upper")?;
    let se_el_lower = se("elasticity_lower")?;
    let se_el_upper = se("elasticity_upper")?;
    let se_p = se("p")?;
    let se_net = se("net_bunching")?;

    let ate_ci = im_confidence_interval(
        core.ate.lower,
        core.ate.upper,
        se_ate_lower,
        se_ate_upper,
        alpha,
    )?;
    let el_ci = im_confidence_interval(
        core.elasticity.lower,
        core.elasticity.upper,
        se_el_lower,
        se_el_upper,
        alpha,
    )?;

    let mut r = Report::new();
    r.set("k", k);
    r.set("n_rows", table.len());
    r.set("n_workers", table.n_workers());
    r.set("n_firms", table.n_firms());
    r.set("bunching_mass", core.mass);
    r.set("p_method", p_method_name(method));
    r.set("p", core.p.value);
    r.set("p_is_upper_bound", core.p.is_upper_bound);
    r.set("se_p", se_p);
    r.set("net_bunching", core.mass - core.p.value);
    r.set("se_net_bunching", se_net);
    r.set("F_minus", core.est.cdf_minus);
    r.set("F_plus", core.est.cdf_plus);
    r.set("f_minus", core.est.dens_minus);
    r.set("f_plus", core.est.dens_plus);
    r.set("bandwidth", core.est.bandwidth);
    r.set("n_left", core.est.n_left);
    r.set("n_right", core.est.n_right);
    r.set("ate_lower", core.ate.lower);
    r.set("ate_upper", core.ate.upper);
    r.set("se_ate_lower", se_ate_lower);
    r.set("se_ate_upper", se_ate_upper);
    r.set("ate_ci_lower", ate_ci.lower);
    r.set("ate_ci_upper", ate_ci.upper);
    r.set("ate_im_critical_value", ate_ci.critical_value);
    // demand elasticities are reported signed (negative); magnitudes negate
    // and swap
    r.set("elasticity_lower", -core.elasticity.upper);
    r.set("elasticity_upper", -core.elasticity.lower);
    r.set("se_elasticity_lower", se_el_upper);
    r.set("se_elasticity_upper", se_el_lower);
    r.set("elasticity_ci_lower", -el_ci.upper);
    r.set("elasticity_ci_upper", -el_ci.lower);
    r.set("elasticity_im_critical_value", el_ci.critical_value);
    r.set("small_kink", core.small_kink);
    r.set("saez_epsilon", -core.saez);
    r.set("n_failed_reps", boot.failed_reps);
    Ok(r)
}

fn group_key(table: &PaycheckTable, row: usize, column: &str) -> Result<String, Error> {
    let p = table.get(row);
    Ok(match column {
        "worker_id" => p.worker_id.to_string(),
        "firm_id" => p.firm_id.to_string(),
        "pay_frequency" => p.pay_frequency.as_str().to_string(),
        "pay_basis" => p.pay_basis.as_str().to_string(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "cannot group by {other:?}; use worker_id, firm_id, pay_frequency, or pay_basis"
            )))
        }
    })
}

fn cmd_estimate(a: &EstimateArgs, log: &Logger) -> Result<(), Error> {
    let table = load_table(&a.input, log)?.lag_join();
    let mut root = Report::new();
    root.set("command", "estimate");
    let mut cfg = Report::new();
    cfg.set("input", a.input.display().to_string());
    cfg.set("k", a.k);
    cfg.set("p_method", p_method_name(a.p_method));
    cfg.set("p_value", a.p_value);
    cfg.set("alpha", a.alpha);
    cfg.set("reps", a.reps);
    cfg.set("seed", a.seed as i64);
    cfg.set("bandwidth_override", a.bandwidth);
    cfg.set("degree", a.degree);
    cfg.set("group_by", a.group_by.clone().map(Value::from));
    root.set("config", Value::Obj(cfg));

    match &a.group_by {
        None => {
            let est = estimate_report(
                &table,
                a.k,
                a.p_method,
                a.p_value,
                a.alpha,
                a.reps,
                a.seed,
                a.bandwidth,
                a.degree,
                log,
            )?;
            root.set("estimate", Value::Obj(est));
        }
        Some(col) => {
            let mut keys: Vec<String> = Vec::new();
            let mut assignment: Vec<usize> = Vec::with_capacity(table.len());
            for i in 0..table.len() {
                let key = group_key(&table, i, col)?;
                let idx = match keys.iter().position(|k| *k == key) {
                    Some(idx) => idx,
                    None => {
                        keys.push(key);
                        keys.len() - 1
                    }
                };
                assignment.push(idx);
            }
            let mut order: Vec<usize> = (0..keys.len()).collect();
            order.sort_by(|&x, &y| keys[x].cmp(&keys[y]));
            let mut groups = Vec::new();
            for &g in &order {
                let rows: Vec<usize> = (0..table.len()).filter(|&i| assignment[i] == g).collect();
                let sub = table.subset(&rows)?;
                let mut block = Report::new();
                block.set("group", keys[g].as_str());
                let est = estimate_report(
                    &sub,
                    a.k,
                    a.p_method,
                    a.p_value,
                    a.alpha,
                    a.reps,
                    a.seed,
                    a.bandwidth,
                    a.degree,
                    log,
                )?;
                block.set("estimate", Value::Obj(est));
                groups.push(Value::Obj(block));
            }
            root.set("groups", Value::Arr(groups));
        }
    }
    write_file(
        &a.output_dir,
        "estimate_report.json",
        root.to_json().as_bytes(),
    )
}

// ---------------------------------------------------------------------------
// policy

fn cmd_policy(a: &PolicyArgs, log: &Logger) -> Result<(), Error> {
    let table = load_table(&a.input, log)?.lag_join();
    let hours = table.hours_vec();
    let p = estimate_p(&table, a.p_method, a.p_value, a.k)?;
    let est = kink_estimates(&hours, a.k, p.value, a.bandwidth, a.degree)?;
    for w in &est.warnings {
        log.warn(w);
    }
    let elasticity = isoelastic_blc_bounds(&hours, a.k, p.value, a.bandwidth, a.degree)?;
    let policy = evaluate_policy(&hours, &est, p.value, &elasticity, 1.5, a.rho_bar)?;

    let min_h = hours.iter().copied().fold(f64::INFINITY, f64::min);
    let max_h = hours.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = a.k_prime_lo.unwrap_or(a.k - 5.0).max(min_h);
    let hi = a.k_prime_hi.unwrap_or(a.k + 5.0).min(max_h);
    let curve = kink_shift_curve(&hours, &est, p.value, lo, hi, 0.125)?;
    let mut csv = Vec::new();
    write_kink_shift_csv(&curve, &mut csv)?;
    write_file(&a.output_dir, "kink_shift_curve.csv", &csv)?;

    let mut r = Report::new();
    r.set("command", "policy");
    let mut cfg = Report::new();
    cfg.set("input", a.input.display().to_string());
    cfg.set("k", a.k);
    cfg.set("p_method", p_method_name(a.p_method));
    cfg.set("p_value", a.p_value);
    cfg.set("bandwidth_override", a.bandwidth);
    cfg.set("degree", a.degree);
    cfg.set("rho_bar", a.rho_bar);
    cfg.set(
        "k_prime_range",
        Value::Arr(vec![Value::Num(lo), Value::Num(hi)]),
    );
    r.set("config", Value::Obj(cfg));
    r.set("p", p.value);
    r.set("net_bunching", est.cdf_plus - est.cdf_minus - p.value);
    interval_fields(&mut r, "elasticity_magnitude", &elasticity);
    interval_fields(&mut r, "effect_of_kink", &policy.effect_of_kink);
    interval_fields(&mut r, "wage_effect", &policy.wage_effect);
    interval_fields(&mut r, "total_theta", &policy.total_theta);
    r.set("statics_d_bunching_d_k", policy.statics.d_bunching_d_k);
    r.set("statics_d_mean_hours_d_k", policy.statics.d_mean_hours_d_k);
    interval_fields(
        &mut r,
        "statics_d_bunching_d_rho",
        &policy.statics.d_bunching_d_rho,
    );
    interval_fields(
        &mut r,
        "statics_d_mean_hours_d_rho",
        &policy.statics.d_mean_hours_d_rho,
    );
    interval_fields(&mut r, "double_time", &policy.double_time);
    r.set(
        "double_time_new_buncher_valuation",
        policy.new_buncher_valuation,
    );
    write_file(&a.output_dir, "policy_report.json", r.to_json().as_bytes())
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(a: &SimulateArgs, log: &Logger) -> Result<(), Error> {
    let mut config = SimConfig::baseline(a.seed);
    config.epsilon = a.epsilon;
    config.n_workers = a.n_workers;
    config.n_weeks = a.n_weeks;
    config.n_firms = a.n_firms;
    config.p_mass = a.p_mass;
    config.pto_prob = a.pto_prob;
    config.k = a.k;
    config.snap_to_grid = a.snap;
    config.worker_effect = a.worker_effect;
    config.cf_weekly = a.cf_weekly;
    let default_loc = a.k.ln() / -a.epsilon;
    let location = a.location.unwrap_or(default_loc);
    let scale = a.scale.unwrap_or(0.2 / -a.epsilon);
    config.latent = match a.latent {
        LatentArg::Normal => LatentDist::NormalLog { location, scale },
        LatentArg::Logistic => LatentDist::LogisticLog { location, scale },
        LatentArg::Uniform => LatentDist::UniformLog { location, scale },
    };
    let family = match a.family {
        FamilyArg::Isoelastic => SimFamily::Isoelastic { epsilon: a.epsilon },
        FamilyArg::Exponential => SimFamily::Exponential { gamma: a.gamma },
    };
    let out = simulate_family(&family, &config)?;
    log.info(&format!("simulated {} paychecks", out.table.len()));

    let mut csv = Vec::new();
    out.table.write_csv(&mut csv)?;
    write_file(&a.output_dir, "paychecks.csv", &csv)?;
    let mut latent = Vec::new();
    out.write_latent_csv(&mut latent)?;
    write_file(&a.output_dir, "latent.csv", &latent)?;

    let mut r = Report::new();
    r.set("command", "simulate");
    let mut cfg = Report::new();
    cfg.set("seed", a.seed as i64);
    cfg.set("epsilon", a.epsilon);
    cfg.set(
        "family",
        match a.family {
            FamilyArg::Isoelastic => "isoelastic",
            FamilyArg::Exponential => "exponential",
        },
    );
    cfg.set(
        "latent",
        match a.latent {
            LatentArg::Normal => "normal_log",
            LatentArg::Logistic => "logistic_log",
            LatentArg::Uniform => "uniform_log",
        },
    );
    cfg.set("location", location);
    cfg.set("scale", scale);
    cfg.set("n_workers", a.n_workers);
    cfg.set("n_weeks", a.n_weeks);
    cfg.set("n_firms", a.n_firms);
    cfg.set("p_mass", a.p_mass);
    cfg.set("pto_prob", a.pto_prob);
    cfg.set("k", a.k);
    cfg.set("snap_to_grid", a.snap);
    cfg.set("worker_effect", a.worker_effect);
    cfg.set("cf_weekly", a.cf_weekly);
    r.set("config", Value::Obj(cfg));
    r.set("n_rows", out.table.len());
    r.set("bunching_mass", bunching_mass(&out.table, a.k).mass);
    write_file(
        &a.output_dir,
        "simulate_report.json",
        r.to_json().as_bytes(),
    )
}

// ---------------------------------------------------------------------------
// bootstrap

fn cmd_bootstrap(a: &BootstrapArgs, log: &Logger) -> Result<(), Error> {
    let table = load_table(&a.input, log)?.lag_join();
    let hours = table.hours_vec();
    let p = estimate_p(&table, a.p_method, a.p_value, a.k)?;
    let est = kink_estimates(&hours, a.k, p.value, a.bandwidth, a.degree)?;
    let frozen_bw = est.bandwidth;
    let stat =
        |t: &PaycheckTable| replicate_statistic(t, a.k, a.p_method, a.p_value, frozen_bw, a.degree);
    let boot = cluster_bootstrap(&table, &stat, a.reps, a.seed)?;

    let mut r = Report::new();
    r.set("command", "bootstrap");
    let mut cfg = Report::new();
    cfg.set("input", a.input.display().to_string());
    cfg.set("k", a.k);
    cfg.set("p_method", p_method_name(a.p_method));
    cfg.set("p_value", a.p_value);
    cfg.set("reps", a.reps);
    cfg.set("seed", a.seed as i64);
    cfg.set("bandwidth", frozen_bw);
    cfg.set("degree", a.degree);
    r.set("config", Value::Obj(cfg));
    r.set("n_failed_reps", boot.failed_reps);
    for field in [
        "ate_lower",
        "ate_upper",
        "elasticity_lower",
        "elasticity_upper",
        "net_bunching",
        "p",
    ] {
        r.set(&format!("se_{field}"), se_from_replicates(&boot, field)?);
    }
    let mut arr = Vec::with_capacity(boot.replicates.len());
    for rec in &boot.replicates {
        let mut obj = Report::new();
        for (k, v) in rec {
            obj.set(k, *v);
        }
        arr.push(Value::Obj(obj));
    }
    r.set("replicates", Value::Arr(arr));
    write_file(&a.output_dir, "bootstrap.json", r.to_json().as_bytes())
}

// ---------------------------------------------------------------------------
// diagnose

fn cmd_diagnose(a: &DiagnoseArgs, log: &Logger) -> Result<(), Error> {
    let table = load_table(&a.input, log)?.lag_join();
    let hours = table.hours_vec();
    let min_h = hours.iter().copied().fold(f64::INFINITY, f64::min);
    let max_h = hours.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let bins = histogram(
        &hours,
        a.bin_width,
        (min_h, max_h),
        a.k,
        BinAlignment::EdgeAtK,
    )?;
    let mut csv = Vec::new();
    write_histogram_csv(&bins, &mut csv)?;
    write_file(&a.output_dir, "histogram.csv", &csv)?;

    let stats = bunching_mass(&table, a.k);
    let mut r = Report::new();
    r.set("command", "diagnose");
    let mut cfg = Report::new();
    cfg.set("input", a.input.display().to_string());
    cfg.set("k", a.k);
    cfg.set("bin_width", a.bin_width);
    cfg.set("bandwidth_override", a.bandwidth);
    cfg.set("grid_span", a.grid_span);
    cfg.set("grid_step", a.grid_step);
    r.set("config", Value::Obj(cfg));
    r.set("n_rows", table.len());
    r.set("bunching_mass", stats.mass);
    r.set("n_at_kink", stats.n_at_k);

    // both strategies for p, where the data allows them
    match p_from_pto(&table, a.k) {
        Ok(p) => {
            r.set("p_pto", p.value);
            r.set("p_pto_clipped", p.clipped);
        }
        Err(e) => {
            log.warn(&format!("PTO strategy unavailable: {e}"));
            r.set("p_pto", Value::Null);
        }
    }
    match p_upper_nonchangers(&table, a.k) {
        Ok(p) => r.set("p_nonchanger_upper", p.value),
        Err(e) => {
            log.warn(&format!("non-changer bound unavailable: {e}"));
            r.set("p_nonchanger_upper", Value::Null)
        }
    };

    for (side, name) in [(Side::Left, "left"), (Side::Right, "right")] {
        let grid: Vec<f64> = {
            let (lo, hi) = match side {
                Side::Left => (a.k - a.grid_span, a.k - 2.0 * a.grid_step),
                Side::Right => (a.k + 2.0 * a.grid_step, a.k + a.grid_span),
            };
            let mut g = Vec::new();
            let mut x = lo;
            while x <= hi + 1e-9 {
                g.push(x);
                x += a.grid_step;
            }
            g
        };
        match blc_diagnostic(&hours, a.k, side, &grid, a.bandwidth) {
            Ok(d) => {
                r.set(
                    &format!("blc_{name}_max_violation_log_cdf"),
                    d.max_violation_log_cdf,
                );
                r.set(
                    &format!("blc_{name}_max_violation_log_survival"),
                    d.max_violation_log_survival,
                );
                r.set(&format!("blc_{name}_bandwidth"), d.bandwidth);
            }
            Err(e) => {
                log.warn(&format!("{name}-side shape diagnostic unavailable: {e}"));
                r.set(&format!("blc_{name}_max_violation_log_cdf"), Value::Null);
            }
        }
    }

    // other point masses worth knowing about
    let mut masses = Vec::new();
    let ecdf = bunchkit::empirical::EmpiricalCdf::from_values(&hours)?;
    let values = ecdf.sorted_values();
    let n = values.len() as f64;
    let mut i = 0usize;
    while i < values.len() {
        let v = values[i];
        let mut j = i + 1;
        while j < values.len() && values[j] == v {
            j += 1;
        }
        let share = (j - i) as f64 / n;
        if share >= 0.01 && (v - a.k).abs() > 1e-9 {
            let mut m = Report::new();
            m.set("hours", v);
            m.set("share", share);
            masses.push(Value::Obj(m));
        }
        i = j;
    }
    r.set("secondary_point_masses", Value::Arr(masses));
    write_file(
        &a.output_dir,
        "diagnose_report.json",
        r.to_json().as_bytes(),
    )
}
