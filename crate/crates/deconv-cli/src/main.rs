//! `deconv`: estimate periodic signals observed through a known
//! convolution, run the simulation harness, and compare regularization
//! selectors.

mod artifacts;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{debug, info};

use artifacts::{fmt_f64, CsvWriter, RunManifest};
use deconv_core::bootstrap::{select_g_opt, BootstrapConfig, ScalingRule, SelectionGrid};
use deconv_core::ecdf::{asymptotic_aimse, asymptotic_covariance, residual_ecdf, ErrorModel};
use deconv_core::estimator::{estimate_theta, residuals};
use deconv_core::sim::{
    run_experiment, ExperimentConfig, ResultTable, SelectionMethod, SignalSpec,
};
use deconv_core::spectral::{DesignGrid, GridKind, Sample};
use deconv_core::{DeconvError, SmoothingKernelSpec};

const EXIT_VALIDATION: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }
}

impl From<DeconvError> for CliError {
    fn from(e: DeconvError) -> Self {
        let code = match &e {
            DeconvError::Domain(_)
            | DeconvError::ShapeMismatch(_)
            | DeconvError::FrequencyOverflow { .. }
            | DeconvError::InvalidKernel(_) => EXIT_VALIDATION,
            DeconvError::NonInvertibleDistortion { .. }
            | DeconvError::IntegrationFailure(_)
            | DeconvError::SymmetryViolation { .. }
            | DeconvError::DegenerateDistribution(_) => EXIT_NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::validation(format!("i/o error: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "deconv", version, about = "Deconvolution regression on the circle")]
struct Cli {
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a signal from x,y data observed through a distortion
    Estimate(EstimateArgs),
    /// Run a simulation experiment from a config file
    Simulate(SimulateArgs),
    /// Compare the bootstrap selector against the risk-hull comparator
    CompareRiskhull(SimulateArgs),
    /// Run a quick internal consistency battery
    Selftest,
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV input with header x,y; odd row count on a canonical grid
    #[arg(long)]
    data: PathBuf,
    /// Distortion kind: laplace, uniform or identity
    #[arg(long, default_value = "laplace")]
    distortion: String,
    /// Truncated-Laplace scale parameter
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    /// Distortion coefficient mode: quadrature or closed-form
    #[arg(long, default_value = "quadrature")]
    psi_mode: String,
    /// Kernel flat radius
    #[arg(long, default_value_t = 7)]
    flat_radius: u32,
    /// Kernel decay exponent
    #[arg(long, default_value_t = 6.0)]
    decay: f64,
    /// Fixed regularization parameter
    #[arg(long, conflicts_with = "select_bootstrap")]
    h: Option<f64>,
    /// Choose the regularization by the smooth residual bootstrap
    #[arg(long)]
    select_bootstrap: bool,
    /// Bootstrap replications when selecting
    #[arg(long, default_value_t = 200)]
    boot_reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DECONV_LOG")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()
        {
            eprintln!("error: could not size the thread pool: {e}");
            std::process::exit(EXIT_VALIDATION);
        }
    }
    let result = match &cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::CompareRiskhull(args) => cmd_compare_riskhull(args),
        Command::Selftest => cmd_selftest(),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

/// Parse `x,y` CSV rows and map them onto a canonical design grid.
fn read_sample(path: &Path) -> Result<Sample, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,y" => {}
        _ => return Err(CliError::validation("input must start with the header row 'x,y'")),
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(xs_), Some(ys_), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CliError::validation(format!("row {}: expected two fields", i + 2)));
        };
        let x: f64 = xs_
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("row {}: bad x value", i + 2)))?;
        let y: f64 = ys_
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("row {}: bad y value", i + 2)))?;
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(CliError::validation("no data rows"));
    }
    if xs.len() % 2 == 0 {
        return Err(CliError::validation(format!(
            "row count must be odd (design points j = -n..n); got {}",
            xs.len()
        )));
    }
    for w in xs.windows(2) {
        if !(w[0] < w[1]) {
            return Err(CliError::validation("x values must be strictly increasing"));
        }
    }
    if xs[0] < -0.5 || *xs.last().unwrap() > 0.5 {
        return Err(CliError::validation("x values must lie in [-1/2, 1/2]"));
    }
    let n = xs.len() / 2;
    for kind in [GridKind::Simulation, GridKind::Model] {
        let grid = DesignGrid::new(n, kind)?;
        let matches = grid.points().iter().zip(&xs).all(|(a, b)| (a - b).abs() < 1e-9);
        if matches {
            return Ok(Sample::new(grid, ys)?);
        }
    }
    Err(CliError::validation(
        "x values do not match a canonical design grid (j/(2n+1) or j/(2n), j = -n..n)",
    ))
}

fn build_distortion(
    kind: &str,
    scale: f64,
    mode: &str,
) -> Result<deconv_core::DistortionSpec, CliError> {
    config::parse_distortion(&config::DistortionConfig {
        kind: kind.to_string(),
        scale,
        mode: mode.to_string(),
    })
    .map_err(CliError::validation)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let sample = read_sample(&args.data)?;
    let n = sample.grid().half_count();
    let nn = sample.grid().len() as f64;
    info!("estimating from {} points (n = {n})", sample.grid().len());
    let distortion = build_distortion(&args.distortion, args.scale, &args.psi_mode)?;
    let kernel = SmoothingKernelSpec::PolynomialDecay {
        flat_radius: args.flat_radius,
        decay_exponent: args.decay,
        hard_cutoff: n as u32,
    };
    let seed = args.seed.unwrap_or_else(|| rand::random());

    let mut curve: Option<(Vec<f64>, Vec<f64>)> = None;
    let h = match (args.h, args.select_bootstrap) {
        (Some(h), _) if h > 0.0 => h,
        (Some(_), _) => return Err(CliError::validation("--h must be positive")),
        (None, true) => {
            let pilot_h = 5.0 * nn.powf(-1.0 / 11.0) * nn.ln().powf(1.0 / 11.0);
            let pilot = estimate_theta(&sample, &distortion, &kernel, pilot_h)?;
            let grid = SelectionGrid::paper_defaults(sample.grid().len());
            let boot = BootstrapConfig {
                replications: args.boot_reps,
                rng_seed: seed,
                scaling: ScalingRule::AutoSilverman,
                ..BootstrapConfig::default()
            };
            let (g, objective) = select_g_opt(&sample, &pilot, &grid, &kernel, &boot)?;
            debug!("bootstrap selected g = {g}");
            curve = Some((grid.points(), objective));
            g
        }
        (None, false) => {
            return Err(CliError::validation("either --h or --select-bootstrap is required"))
        }
    };

    let estimate = estimate_theta(&sample, &distortion, &kernel, h)?;
    let res = residuals(&sample, &estimate)?;
    let ecdf = residual_ecdf(&res)?;

    fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();

    let mut w = CsvWriter::new(args.out.join("estimate.csv"), "x,theta_hat");
    for i in 0..512 {
        let x = -0.5 + i as f64 / 512.0;
        w.row(&[fmt_f64(x), fmt_f64(estimate.eval(x)?)]);
    }
    outputs.push(w.finish()?);

    let mut w = CsvWriter::new(args.out.join("residuals.csv"), "x,residual");
    for (x, r) in sample.grid().points().iter().zip(res.values()) {
        w.row(&[fmt_f64(*x), fmt_f64(*r)]);
    }
    outputs.push(w.finish()?);

    let lo = res.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = res.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let mut w = CsvWriter::new(args.out.join("ecdf.csv"), "t,f_hat");
    for i in 0..512 {
        let t = lo - 0.05 * span + i as f64 * 1.1 * span / 511.0;
        w.row(&[fmt_f64(t), fmt_f64(ecdf.eval(t))]);
    }
    outputs.push(w.finish()?);

    if let Some((gs, objective)) = curve {
        let mut w = CsvWriter::new(args.out.join("objective.csv"), "g,bootstrap_imse");
        for (g, v) in gs.iter().zip(&objective) {
            w.row(&[fmt_f64(*g), fmt_f64(*v)]);
        }
        outputs.push(w.finish()?);
    }

    let data_bytes = fs::read(&args.data)?;
    let flags = format!(
        "estimate:{}:{}:{}:{}:{}:{:?}:{}",
        args.distortion, args.scale, args.psi_mode, args.flat_radius, args.decay, args.h, h
    );
    let manifest =
        RunManifest::new(&[&data_bytes, flags.as_bytes()], seed, start.elapsed().as_secs_f64(), &outputs);
    manifest.write(&args.out)?;
    Ok(())
}

fn load_experiment(args: &SimulateArgs) -> Result<(ExperimentConfig, Vec<u8>, u64), CliError> {
    let bytes = fs::read(&args.config)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", args.config.display())))?;
    let parsed: config::ConfigFile = toml::from_str(
        std::str::from_utf8(&bytes).map_err(|_| CliError::validation("config is not UTF-8"))?,
    )
    .map_err(|e| CliError::validation(format!("config: {e}")))?;
    let seed = args.seed.unwrap_or(parsed.master_seed);
    let experiment =
        config::to_experiment(&parsed, Some(seed)).map_err(CliError::validation)?;
    Ok((experiment, bytes, seed))
}

fn method_name(m: SelectionMethod) -> &'static str {
    match m {
        SelectionMethod::Bootstrap => "bootstrap",
        SelectionMethod::IseOracle => "ise_oracle",
        SelectionMethod::RiskHull => "risk_hull",
    }
}

fn emit_result_table(table: &ResultTable, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();

    let mut w = CsvWriter::new(out.join("amse.csv"), "sample_size,t,bias,variance,amse");
    for size in &table.sizes {
        let nn = 2 * size.half_size + 1;
        for cell in &size.cells {
            w.row(&[
                nn.to_string(),
                fmt_f64(cell.t),
                fmt_f64(cell.bias),
                fmt_f64(cell.variance),
                fmt_f64(cell.amse),
            ]);
        }
    }
    outputs.push(w.finish()?);

    let mut w = CsvWriter::new(out.join("aimse.csv"), "sample_size,aimse");
    for size in &table.sizes {
        w.row(&[(2 * size.half_size + 1).to_string(), fmt_f64(size.aimse)]);
    }
    outputs.push(w.finish()?);

    let mut w = CsvWriter::new(out.join("imse.csv"), "sample_size,method,imse,mc_se,failures");
    for size in &table.sizes {
        for ((m, v), (_, se)) in size.imse.iter().zip(&size.imse_se) {
            w.row(&[
                (2 * size.half_size + 1).to_string(),
                method_name(*m).to_string(),
                fmt_f64(*v),
                fmt_f64(*se),
                size.failures.to_string(),
            ]);
        }
    }
    outputs.push(w.finish()?);

    let mut w = CsvWriter::new(out.join("log_ratios.csv"), "sample_size,replication,log_ratio");
    for size in &table.sizes {
        for (i, r) in size.log_ratios.iter().enumerate() {
            w.row(&[(2 * size.half_size + 1).to_string(), i.to_string(), fmt_f64(*r)]);
        }
    }
    outputs.push(w.finish()?);

    Ok(outputs)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (experiment, config_bytes, seed) = load_experiment(args)?;
    info!(
        "simulating {} replications over {} sample sizes",
        experiment.replications,
        experiment.half_sizes.len()
    );
    let table = run_experiment(&experiment)?;
    let outputs = emit_result_table(&table, &args.out)?;
    let manifest =
        RunManifest::new(&[&config_bytes], seed, start.elapsed().as_secs_f64(), &outputs);
    manifest.write(&args.out)?;
    Ok(())
}

fn cmd_compare_riskhull(args: &SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (experiment, config_bytes, seed) = load_experiment(args)?;
    let has_boot = experiment.selection_methods.contains(&SelectionMethod::Bootstrap);
    let has_hull = experiment.selection_methods.contains(&SelectionMethod::RiskHull);
    if !(has_boot && has_hull) {
        return Err(CliError::validation(
            "comparison needs both 'bootstrap' and 'risk_hull' in selection_methods",
        ));
    }
    let table = run_experiment(&experiment)?;

    fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();
    let mut w = CsvWriter::new(
        args.out.join("imse_comparison.csv"),
        "sample_size,imse_bootstrap,imse_risk_hull",
    );
    let pick = |size: &deconv_core::sim::SizeResult, m: SelectionMethod| {
        size.imse.iter().find(|(mm, _)| *mm == m).map(|(_, v)| *v).unwrap_or(f64::NAN)
    };
    for size in &table.sizes {
        w.row(&[
            (2 * size.half_size + 1).to_string(),
            fmt_f64(pick(size, SelectionMethod::Bootstrap)),
            fmt_f64(pick(size, SelectionMethod::RiskHull)),
        ]);
    }
    outputs.push(w.finish()?);

    // per-replication log ISE ratios: the boxplot raw data
    let mut w = CsvWriter::new(
        args.out.join("ise_ratio_samples.csv"),
        "sample_size,replication,log_ise_ratio",
    );
    for size in &table.sizes {
        let boot = size.ise_samples.iter().find(|(m, _)| *m == SelectionMethod::Bootstrap);
        let hull = size.ise_samples.iter().find(|(m, _)| *m == SelectionMethod::RiskHull);
        if let (Some((_, bs)), Some((_, hs))) = (boot, hull) {
            for (i, (b, h)) in bs.iter().zip(hs).enumerate() {
                if *b > 0.0 && *h > 0.0 {
                    w.row(&[
                        (2 * size.half_size + 1).to_string(),
                        i.to_string(),
                        fmt_f64((b / h).ln()),
                    ]);
                }
            }
        }
    }
    outputs.push(w.finish()?);

    let manifest =
        RunManifest::new(&[&config_bytes], seed, start.elapsed().as_secs_f64(), &outputs);
    manifest.write(&args.out)?;
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {}", name, if ok { "ok" } else { "FAILED" });
        if !ok {
            failures += 1;
        }
    };

    let normal = ErrorModel::normal(2.0 / 3.0).map_err(CliError::from)?;
    let t4 = ErrorModel::student_t(4, 2.0 / 3.0).map_err(CliError::from)?;
    check(
        "covariance origin (normal)",
        (asymptotic_covariance(&normal, 0.0, 0.0) - 0.091).abs() < 5e-4,
    );
    check(
        "covariance origin (t4)",
        (asymptotic_covariance(&t4, 0.0, 0.0) - 0.156).abs() < 5e-4,
    );
    check("aimse (normal)", (asymptotic_aimse(&normal)? - 0.188).abs() < 1e-3);
    check("aimse (t4)", (asymptotic_aimse(&t4)? - 0.228).abs() < 1e-3);

    let mut cfg = ExperimentConfig::paper_defaults(SignalSpec::theta1(30)?, normal);
    cfg.half_sizes = vec![10];
    cfg.replications = 4;
    cfg.grid_points = 12;
    cfg.bootstrap.replications = 20;
    cfg.master_seed = 17;
    let a = run_experiment(&cfg)?;
    let b = run_experiment(&cfg)?;
    check(
        "deterministic replay",
        a.sizes[0].aimse.to_bits() == b.sizes[0].aimse.to_bits(),
    );
    check("no failed replications", a.sizes[0].failures == 0);

    if failures > 0 {
        return Err(CliError { code: EXIT_NUMERICAL, message: format!("{failures} selftest check(s) failed") });
    }
    Ok(())
}
