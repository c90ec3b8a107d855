//! Fourier-domain smoothing kernels Lambda: flat around frequency zero,
//! damped (or truncated) at high frequencies.

use std::sync::Arc;

use crate::error::{DeconvError, Result};

/// Fourier-domain kernel profile. Evaluated at shrunken real arguments
/// u = h * k, not at rounded integers.
#[derive(Clone)]
pub enum SmoothingKernelSpec {
    /// Flat on [-flat_radius, flat_radius], then (|u|/flat_radius)^{-decay}
    /// up to `hard_cutoff`, zero beyond. The cutoff is a parameter so the
    /// same kernel object can be reused across sample sizes; estimators
    /// set it to the sample's half-count.
    PolynomialDecay {
        flat_radius: u32,
        decay_exponent: f64,
        hard_cutoff: u32,
    },
    /// Indicator of |u| <= radius.
    SpectralCutoff { radius: u32 },
    /// Arbitrary profile with a declared flat radius.
    Custom {
        profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        flat_radius: u32,
    },
}

impl std::fmt::Debug for SmoothingKernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PolynomialDecay { flat_radius, decay_exponent, hard_cutoff } => write!(
                f,
                "PolynomialDecay {{ flat_radius: {flat_radius}, decay_exponent: {decay_exponent}, hard_cutoff: {hard_cutoff} }}"
            ),
            Self::SpectralCutoff { radius } => write!(f, "SpectralCutoff {{ radius: {radius} }}"),
            Self::Custom { flat_radius, .. } => write!(f, "Custom {{ flat_radius: {flat_radius} }}"),
        }
    }
}

impl SmoothingKernelSpec {
    /// The kernel used throughout the simulation study: flat radius 7,
    /// decay exponent 6.
    pub fn paper_sim(hard_cutoff: u32) -> Self {
        Self::PolynomialDecay { flat_radius: 7, decay_exponent: 6.0, hard_cutoff }
    }

    pub fn spectral_cutoff(radius: u32) -> Self {
        Self::SpectralCutoff { radius }
    }

    /// Radius of the flat region I where Lambda = 1.
    pub fn flat_radius(&self) -> u32 {
        match self {
            Self::PolynomialDecay { flat_radius, .. } => *flat_radius,
            Self::SpectralCutoff { radius } => *radius,
            Self::Custom { flat_radius, .. } => *flat_radius,
        }
    }

    /// Reuse the same profile with a different hard cutoff; no-op for
    /// kernels without one.
    pub fn with_hard_cutoff(&self, cutoff: u32) -> Self {
        match self {
            Self::PolynomialDecay { flat_radius, decay_exponent, .. } => Self::PolynomialDecay {
                flat_radius: *flat_radius,
                decay_exponent: *decay_exponent,
                hard_cutoff: cutoff,
            },
            other => other.clone(),
        }
    }

    /// The admissible smoothness window implied by a polynomial-decay
    /// profile: bias control needs s < decay - 1/2 and the moment
    /// condition needs s > (decay - 1)/2 + ... in the simulation setting
    /// this is (decay/2 - 1/2, decay/2 + 1/2). `None` for other kinds.
    pub fn smoothness_window(&self) -> Option<(f64, f64)> {
        match self {
            Self::PolynomialDecay { decay_exponent, .. } => {
                Some((decay_exponent / 2.0 - 0.5, decay_exponent / 2.0 + 0.5))
            }
            _ => None,
        }
    }
}

/// Evaluate the kernel profile at a (real) shrunken frequency u = h * k.
/// The flat region is enforced in closed form.
pub fn lambda_eval(spec: &SmoothingKernelSpec, u: f64) -> f64 {
    let a = u.abs();
    match spec {
        SmoothingKernelSpec::PolynomialDecay { flat_radius, decay_exponent, hard_cutoff } => {
            let m = *flat_radius as f64;
            if a <= m {
                1.0
            } else if a <= *hard_cutoff as f64 {
                (a / m).powf(-decay_exponent)
            } else {
                0.0
            }
        }
        SmoothingKernelSpec::SpectralCutoff { radius } => {
            if a <= *radius as f64 {
                1.0
            } else {
                0.0
            }
        }
        SmoothingKernelSpec::Custom { profile, flat_radius } => {
            if a <= *flat_radius as f64 {
                1.0
            } else {
                profile(u)
            }
        }
    }
}

/// User-declared smoothness metadata consumed by bandwidth formulas.
/// Never estimated from data.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionProfile {
    pub smoothness_s: f64,
    pub ill_posedness_b: f64,
    pub moment_kappa: f64,
    pub holder_gamma: f64,
}

impl AssumptionProfile {
    pub fn new(smoothness_s: f64, ill_posedness_b: f64, moment_kappa: f64, holder_gamma: f64) -> Result<Self> {
        if smoothness_s < 1.0 {
            return Err(DeconvError::Domain("smoothness index must be >= 1".into()));
        }
        if ill_posedness_b <= 0.0 {
            return Err(DeconvError::Domain("ill-posedness degree must be positive".into()));
        }
        if moment_kappa <= 2.0 + 1.0 / (smoothness_s + ill_posedness_b) {
            return Err(DeconvError::Domain(
                "moment order must exceed 2 + 1/(s + b)".into(),
            ));
        }
        if !(0.0 < holder_gamma && holder_gamma <= 1.0) {
            return Err(DeconvError::Domain("Holder exponent must lie in (0, 1]".into()));
        }
        Ok(Self { smoothness_s, ill_posedness_b, moment_kappa, holder_gamma })
    }
}

/// Outcome of checking a kernel against the flatness/boundedness/moment
/// requirements over a working frequency range.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub flat_region_ok: bool,
    pub bounded_ok: bool,
    pub moment_sum: f64,
    pub moment_finite: bool,
    /// Admissible smoothness window implied by the profile, if any.
    pub smoothness_window: Option<(f64, f64)>,
    /// Profiles declared by the caller that fall outside the window.
    pub profile_out_of_window: bool,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.flat_region_ok && self.bounded_ok && self.moment_finite
    }
}

/// Check the kernel on integer frequencies |k| <= working_range: flat on
/// the declared region, bounded by one, and with a finite discrete b-th
/// absolute moment (the numeric proxy for integrability of |u|^b Lambda).
pub fn validate_assumption(
    spec: &SmoothingKernelSpec,
    b: f64,
    working_range: u32,
    profile: Option<&AssumptionProfile>,
) -> Result<ValidationReport> {
    if working_range < spec.flat_radius() {
        return Err(DeconvError::Domain(
            "working range must cover the flat region".into(),
        ));
    }
    let mut flat_region_ok = true;
    let mut bounded_ok = true;
    let mut moment_sum = 0.0;
    for k in -(working_range as i64)..=working_range as i64 {
        let v = lambda_eval(spec, k as f64);
        if k.unsigned_abs() <= spec.flat_radius() as u64 && v != 1.0 {
            flat_region_ok = false;
        }
        if v.abs() > 1.0 {
            bounded_ok = false;
        }
        moment_sum += (k.abs() as f64).powf(b) * v.abs();
    }
    let smoothness_window = spec.smoothness_window();
    let profile_out_of_window = match (smoothness_window, profile) {
        (Some((lo, hi)), Some(p)) => !(p.smoothness_s > lo && p.smoothness_s < hi),
        _ => false,
    };
    Ok(ValidationReport {
        flat_region_ok,
        bounded_ok,
        moment_sum,
        moment_finite: moment_sum.is_finite(),
        smoothness_window,
        profile_out_of_window,
    })
}
