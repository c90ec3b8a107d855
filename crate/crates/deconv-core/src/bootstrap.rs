//! Smooth residual bootstrap and the bootstrap-IMSE regularization
//! selector.
//!
//! Bootstrap errors are a uniformly resampled centered residual plus a
//! scaled continuous contaminant, eps* = eps~* + c_n U, so the bootstrap
//! error law has a density. The selector minimizes the Monte-Carlo
//! estimate of IMSE*(theta*_g) = int E*[(theta*_g - theta_pilot)^2] over
//! a grid of candidate parameters, sharing the bootstrap draws across
//! grid points (common random numbers).

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{DeconvError, Result};
use crate::estimator::{fitted_values, residuals, RegularizedEstimate};
use crate::kernel::{lambda_eval, SmoothingKernelSpec};
use crate::rng::stream_rng;
use crate::spectral::{empirical_fourier_coefficients, Sample, SpectralCoefficients};

/// Contamination law for the smooth bootstrap.
#[derive(Clone)]
pub enum Contaminant {
    StandardNormal,
    Custom {
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        sampler: Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for Contaminant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::StandardNormal => write!(f, "StandardNormal"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Contaminant {
    fn density(&self, x: f64) -> f64 {
        match self {
            Self::StandardNormal => {
                (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            Self::Custom { density, .. } => density(x),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::StandardNormal => 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2),
            Self::Custom { cdf, .. } => cdf(x),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::StandardNormal => StandardNormal.sample(rng),
            Self::Custom { sampler, .. } => sampler(rng),
        }
    }
}

/// How the contamination scale c_n is chosen.
#[derive(Debug, Clone, Copy)]
pub enum ScalingRule {
    Explicit(f64),
    /// 1.06 sigma_hat (2n+1)^{-1/5} from the pilot residuals.
    AutoSilverman,
}

/// Configuration of the smooth bootstrap.
#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub contaminant: Contaminant,
    pub scaling: ScalingRule,
    pub rng_seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 200,
            contaminant: Contaminant::StandardNormal,
            scaling: ScalingRule::AutoSilverman,
            rng_seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(DeconvError::Domain("need at least one bootstrap replication".into()));
        }
        if let ScalingRule::Explicit(c) = self.scaling {
            if c < 0.0 {
                return Err(DeconvError::Domain("contamination scale must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Center residuals at their sample mean.
pub fn center_residuals(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(DeconvError::Domain("no residuals to center".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(values.iter().map(|v| v - mean).collect())
}

/// Silverman's rule c_n = 1.06 sigma_hat len^{-1/5}, with sigma_hat the
/// sample standard deviation. A zero result flags a degenerate input;
/// the sampler refuses it.
pub fn silverman_cn(centered: &[f64]) -> Result<f64> {
    if centered.len() < 2 {
        return Err(DeconvError::Domain("need at least two residuals for Silverman's rule".into()));
    }
    let n = centered.len() as f64;
    let mean = centered.iter().sum::<f64>() / n;
    let var = centered.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(1.06 * var.sqrt() * n.powf(-0.2))
}

/// The smooth bootstrap error law F_n*: an equal-weight mixture of the
/// contaminant kernel centered at each centered residual and scaled by c_n.
#[derive(Debug, Clone)]
pub struct SmoothErrorDistribution {
    centered: Vec<f64>,
    c_n: f64,
    contaminant: Contaminant,
}

impl SmoothErrorDistribution {
    pub fn new(centered: Vec<f64>, c_n: f64, contaminant: Contaminant) -> Result<Self> {
        if centered.is_empty() {
            return Err(DeconvError::Domain("empty residual set".into()));
        }
        let mean = centered.iter().sum::<f64>() / centered.len() as f64;
        if mean.abs() > 1e-12 {
            return Err(DeconvError::Domain(format!(
                "residuals are not centered: mean = {mean:e}"
            )));
        }
        if c_n < 0.0 {
            return Err(DeconvError::Domain("contamination scale must be nonnegative".into()));
        }
        Ok(Self { centered, c_n, contaminant })
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn centered(&self) -> &[f64] {
        &self.centered
    }

    /// Population variance under F_n*: var(eps~) + c_n^2 var(U).
    pub fn variance(&self) -> f64 {
        let n = self.centered.len() as f64;
        let var = self.centered.iter().map(|v| v * v).sum::<f64>() / n;
        var + self.c_n * self.c_n
    }

    /// Partial mean E*[eps* 1(eps* <= t)] for the standard-normal
    /// contaminant, from the normal mixture closed form.
    pub fn partial_mean(&self, t: f64) -> f64 {
        let c = self.c_n;
        let n = self.centered.len() as f64;
        self.centered
            .iter()
            .map(|&e| {
                let z = (t - e) / c;
                let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                e * self.contaminant.cdf(z) - c * phi
            })
            .sum::<f64>()
            / n
    }
}

/// Draw smooth bootstrap errors eps* = eps~* + c_n U.
pub fn sample_smooth_errors<R: Rng>(
    dist: &SmoothErrorDistribution,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if dist.c_n == 0.0 {
        return Err(DeconvError::DegenerateDistribution(
            "contamination scale is zero; the bootstrap error law has no density".into(),
        ));
    }
    let n = dist.centered.len();
    Ok((0..count)
        .map(|_| {
            let idx = rng.gen_range(0..n);
            dist.centered[idx] + dist.c_n * dist.contaminant.sample(rng)
        })
        .collect())
}

/// Mixture CDF F_n*(t).
pub fn smooth_cdf(dist: &SmoothErrorDistribution, t: f64) -> f64 {
    let n = dist.centered.len() as f64;
    dist.centered
        .iter()
        .map(|&e| dist.contaminant.cdf((t - e) / dist.c_n))
        .sum::<f64>()
        / n
}

/// Mixture density f_n*(t).
pub fn smooth_density(dist: &SmoothErrorDistribution, t: f64) -> f64 {
    let n = dist.centered.len() as f64;
    dist.centered
        .iter()
        .map(|&e| dist.contaminant.density((t - e) / dist.c_n))
        .sum::<f64>()
        / (n * dist.c_n)
}

/// Candidate regularization parameters: an equally spaced inclusive grid.
#[derive(Debug, Clone, Copy)]
pub struct SelectionGrid {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl SelectionGrid {
    pub fn new(lower: f64, upper: f64, count: usize) -> Result<Self> {
        if !(0.0 < lower && lower < upper) || count < 2 {
            return Err(DeconvError::Domain(format!(
                "invalid selection grid [{lower}, {upper}] with {count} points"
            )));
        }
        Ok(Self { lower, upper, count })
    }

    /// The simulation-study defaults: l_n = N^{-1/10} (undersmoothing)
    /// and u_n = 10 N^{-1/12} log^{1/12}(N) (oversmoothing), 100 points,
    /// N = 2n + 1.
    pub fn paper_defaults(sample_size: usize) -> Self {
        let nn = sample_size as f64;
        Self {
            lower: nn.powf(-0.1),
            upper: 10.0 * nn.powf(-1.0 / 12.0) * nn.ln().powf(1.0 / 12.0),
            count: 100,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.upper - self.lower) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.lower + i as f64 * step).collect()
    }
}

/// Everything fixed across bootstrap replications and candidate
/// parameters: pilot fitted values, the smooth error law, and the
/// deconvolution context.
pub struct PreparedBootstrap {
    sample: Sample,
    fitted: Vec<f64>,
    dist: SmoothErrorDistribution,
    pilot_coeffs: SpectralCoefficients,
    psi: SpectralCoefficients,
    kernel: SmoothingKernelSpec,
}

impl PreparedBootstrap {
    pub fn new(
        sample: &Sample,
        pilot: &RegularizedEstimate,
        kernel: &SmoothingKernelSpec,
        config: &BootstrapConfig,
    ) -> Result<Self> {
        config.validate()?;
        let fitted = fitted_values(pilot, sample)?;
        let res = residuals(sample, pilot)?;
        let centered = center_residuals(res.values())?;
        let c_n = match config.scaling {
            ScalingRule::Explicit(c) => c,
            ScalingRule::AutoSilverman => silverman_cn(&centered)?,
        };
        let dist = SmoothErrorDistribution::new(centered, c_n, config.contaminant.clone())?;
        let n = sample.grid().half_count();
        Ok(Self {
            sample: sample.clone(),
            fitted,
            dist,
            pilot_coeffs: pilot.coefficients().clone(),
            psi: pilot.psi().clone(),
            kernel: kernel.with_hard_cutoff(n as u32),
        })
    }

    pub fn smooth_distribution(&self) -> &SmoothErrorDistribution {
        &self.dist
    }

    /// Generate the B bootstrap error vectors, one independent stream per
    /// replication so parallel evaluation cannot change the draws.
    pub fn error_draws(&self, replications: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let len = self.sample.grid().len();
        if self.dist.c_n() == 0.0 {
            // degenerate law is only acceptable when it is a point mass
            // at zero (noiseless self-consistent pilot, up to roundoff)
            if self.dist.centered().iter().any(|e| e.abs() > 1e-10) {
                return Err(DeconvError::DegenerateDistribution(
                    "contamination scale is zero but residuals are spread out".into(),
                ));
            }
            return Ok(vec![vec![0.0; len]; replications]);
        }
        (0..replications)
            .map(|rep| {
                let mut rng = stream_rng(seed, rep as u64);
                sample_smooth_errors(&self.dist, len, &mut rng)
            })
            .collect()
    }

    /// Deconvolved bootstrap coefficients R_hat*(k)/Psi(k) for one error
    /// vector. Candidate-parameter evaluation only multiplies these by
    /// the kernel weights, which is what makes the grid search cheap.
    fn deconvolved(&self, errors: &[f64]) -> Result<SpectralCoefficients> {
        let n = self.sample.grid().half_count();
        let ys: Vec<f64> = self.fitted.iter().zip(errors).map(|(f, e)| f + e).collect();
        let boot_sample = Sample::new(self.sample.grid().clone(), ys)?;
        let r_hat = empirical_fourier_coefficients(&boot_sample, n)?;
        let mut out = SpectralCoefficients::zeros(n);
        for k in -(n as i64)..=n as i64 {
            out.set(k, r_hat.value(k) / self.psi.value(k));
        }
        Ok(out)
    }

    /// Per-replication squared L2 distances between theta*_g and the
    /// pilot estimate, for every g in `grid_points`, sharing `draws`
    /// across the whole grid.
    pub fn imse_curve_samples(
        &self,
        grid_points: &[f64],
        draws: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        let n = self.sample.grid().half_count() as i64;
        // kernel weights per (g, k); Lambda is even so store k = 0..n
        let weights: Vec<Vec<f64>> = grid_points
            .iter()
            .map(|&g| (0..=n).map(|k| lambda_eval(&self.kernel, g * k as f64)).collect())
            .collect();
        let deconvolved: Vec<SpectralCoefficients> = draws
            .par_iter()
            .map(|errors| self.deconvolved(errors))
            .collect::<Result<_>>()?;
        let samples: Vec<Vec<f64>> = deconvolved
            .par_iter()
            .map(|d| {
                weights
                    .iter()
                    .map(|w| {
                        let mut acc = 0.0;
                        for k in 0..=n {
                            let wk = w[k as usize];
                            let dist = |kk: i64| {
                                let v = if wk == 0.0 {
                                    Complex64::new(0.0, 0.0)
                                } else {
                                    d.value(kk) * wk
                                };
                                (v - self.pilot_coeffs.value(kk)).norm_sqr()
                            };
                            acc += dist(k);
                            if k > 0 {
                                acc += dist(-k);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(samples)
    }
}

/// Monte-Carlo estimate of IMSE*(theta*_g) against the pilot, using
/// `config.replications` smooth bootstrap replications.
pub fn bootstrap_imse(
    sample: &Sample,
    pilot: &RegularizedEstimate,
    g: f64,
    kernel: &SmoothingKernelSpec,
    config: &BootstrapConfig,
) -> Result<f64> {
    if !(g > 0.0) {
        return Err(DeconvError::Domain(format!("candidate parameter {g} must be positive")));
    }
    let prepared = PreparedBootstrap::new(sample, pilot, kernel, config)?;
    let draws = prepared.error_draws(config.replications, config.rng_seed)?;
    let samples = prepared.imse_curve_samples(&[g], &draws)?;
    Ok(samples.iter().map(|row| row[0]).sum::<f64>() / samples.len() as f64)
}

/// Minimize the bootstrap IMSE over the candidate grid with common
/// random numbers across grid points. Ties break toward the smallest g.
pub fn select_g_opt(
    sample: &Sample,
    pilot: &RegularizedEstimate,
    grid: &SelectionGrid,
    kernel: &SmoothingKernelSpec,
    config: &BootstrapConfig,
) -> Result<(f64, Vec<f64>)> {
    let prepared = PreparedBootstrap::new(sample, pilot, kernel, config)?;
    let draws = prepared.error_draws(config.replications, config.rng_seed)?;
    let points = grid.points();
    let samples = prepared.imse_curve_samples(&points, &draws)?;
    let b = samples.len() as f64;
    let mut curve = vec![0.0; points.len()];
    for row in &samples {
        for (c, v) in curve.iter_mut().zip(row) {
            *c += v;
        }
    }
    for c in &mut curve {
        *c /= b;
    }
    let mut best = 0;
    for (i, v) in curve.iter().enumerate() {
        if *v < curve[best] {
            best = i;
        }
    }
    Ok((points[best], curve))
}
