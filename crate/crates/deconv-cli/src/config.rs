//! TOML experiment configuration mirroring the core `ExperimentConfig`.
//! Unknown keys are hard errors: silent misconfiguration would
//! invalidate any reproduced table.

use deconv_core::bootstrap::{BootstrapConfig, ScalingRule};
use deconv_core::ecdf::ErrorModel;
use deconv_core::kernel::SmoothingKernelSpec;
use deconv_core::riskhull::PenaltyMode;
use deconv_core::sim::{ExperimentConfig, SelectionMethod, SignalSpec};
use deconv_core::spectral::{DistortionSpec, PsiMode};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub signal: String,
    #[serde(default = "default_k_truth")]
    pub k_truth: usize,
    pub error_model: ErrorModelConfig,
    #[serde(default)]
    pub distortion: DistortionConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub half_sizes: Vec<usize>,
    /// Omitted means the calibrated default: 2.5 for theta2, 5 otherwise.
    pub pilot_constant: Option<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    pub replications: usize,
    pub selection_methods: Vec<String>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub riskhull: RiskHullSection,
}

fn default_k_truth() -> usize {
    150
}
fn default_grid_points() -> usize {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelConfig {
    pub kind: String,
    pub sd: f64,
    pub df: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionConfig {
    pub kind: String,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_psi_mode")]
    pub mode: String,
}

fn default_scale() -> f64 {
    0.1
}
fn default_psi_mode() -> String {
    "quadrature".into()
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self { kind: "laplace".into(), scale: default_scale(), mode: default_psi_mode() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_flat_radius")]
    pub flat_radius: u32,
    #[serde(default = "default_decay")]
    pub decay: f64,
}

fn default_flat_radius() -> u32 {
    7
}
fn default_decay() -> f64 {
    6.0
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { flat_radius: default_flat_radius(), decay: default_decay() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "default_boot_reps")]
    pub replications: usize,
    /// Explicit contamination scale; omitted means Silverman's rule.
    pub c_n: Option<f64>,
}

fn default_boot_reps() -> usize {
    200
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self { replications: default_boot_reps(), c_n: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskHullSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_draws")]
    pub penalty_draws: usize,
}

fn default_alpha() -> f64 {
    1.1
}
fn default_draws() -> usize {
    10_000
}

impl Default for RiskHullSection {
    fn default() -> Self {
        Self { alpha: default_alpha(), penalty_draws: default_draws() }
    }
}

pub fn parse_distortion(cfg: &DistortionConfig) -> Result<DistortionSpec, String> {
    let spec = match cfg.kind.as_str() {
        "laplace" => DistortionSpec::laplace_truncated(cfg.scale),
        "uniform" => DistortionSpec::uniform(),
        "identity" => DistortionSpec::identity(),
        other => return Err(format!("unknown distortion kind '{other}'")),
    };
    let mode = match cfg.mode.as_str() {
        "quadrature" => PsiMode::Quadrature,
        "closed-form" | "closed_form" => PsiMode::ClosedForm,
        other => return Err(format!("unknown distortion mode '{other}'")),
    };
    Ok(spec.with_mode(mode))
}

pub fn parse_error_model(cfg: &ErrorModelConfig) -> Result<ErrorModel, String> {
    match cfg.kind.as_str() {
        "normal" => ErrorModel::normal(cfg.sd).map_err(|e| e.to_string()),
        "t" | "student_t" => {
            let df = cfg.df.ok_or("t error model needs a df field")?;
            ErrorModel::student_t(df, cfg.sd).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown error model '{other}'")),
    }
}

pub fn parse_method(name: &str) -> Result<SelectionMethod, String> {
    match name {
        "bootstrap" => Ok(SelectionMethod::Bootstrap),
        "ise_oracle" => Ok(SelectionMethod::IseOracle),
        "risk_hull" => Ok(SelectionMethod::RiskHull),
        other => Err(format!("unknown selection method '{other}'")),
    }
}

/// Build the core experiment configuration, applying an optional seed
/// override from the command line.
pub fn to_experiment(cfg: &ConfigFile, seed_override: Option<u64>) -> Result<ExperimentConfig, String> {
    let signal = match cfg.signal.as_str() {
        "theta1" => SignalSpec::theta1(cfg.k_truth).map_err(|e| e.to_string())?,
        "theta2" => SignalSpec::theta2(cfg.k_truth).map_err(|e| e.to_string())?,
        other => return Err(format!("unknown signal '{other}'")),
    };
    let error_model = parse_error_model(&cfg.error_model)?;
    let distortion = parse_distortion(&cfg.distortion)?;
    let kernel = SmoothingKernelSpec::PolynomialDecay {
        flat_radius: cfg.kernel.flat_radius,
        decay_exponent: cfg.kernel.decay,
        hard_cutoff: 0, // pinned per sample size by the harness
    };
    let scaling = match cfg.bootstrap.c_n {
        Some(c) => ScalingRule::Explicit(c),
        None => ScalingRule::AutoSilverman,
    };
    let bootstrap = BootstrapConfig {
        replications: cfg.bootstrap.replications,
        scaling,
        ..BootstrapConfig::default()
    };
    let selection_methods = cfg
        .selection_methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentConfig {
        signal,
        error_model,
        distortion,
        kernel,
        half_sizes: cfg.half_sizes.clone(),
        pilot_constant: cfg
            .pilot_constant
            .unwrap_or(if cfg.signal == "theta2" { 2.5 } else { 5.0 }),
        grid_points: cfg.grid_points,
        bootstrap,
        replications: cfg.replications,
        selection_methods,
        master_seed: seed_override.unwrap_or(cfg.master_seed),
        riskhull_alpha: cfg.riskhull.alpha,
        riskhull_penalty: PenaltyMode::MonteCarlo { draws: cfg.riskhull.penalty_draws },
    })
}
