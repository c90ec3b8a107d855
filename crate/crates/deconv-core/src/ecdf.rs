//! Residual-based empirical distribution function and the analytic
//! asymptotic covariance of its normalized deviation process.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT as StudentTSampler};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::gamma;

use crate::error::{DeconvError, Result};
use crate::estimator::ResidualSet;
use crate::quad::adaptive_simpson;

/// Empirical distribution function of a finite set of reals; a
/// right-continuous step function with jumps in multiples of 1/size.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted_values: Vec<f64>,
}

impl Ecdf {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(DeconvError::Domain("empty sample for an ECDF".into()));
        }
        let mut sorted_values = values.to_vec();
        sorted_values.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { sorted_values })
    }

    pub fn size(&self) -> usize {
        self.sorted_values.len()
    }

    /// F_hat(t) = #{v_j <= t} / size, by binary search.
    pub fn eval(&self, t: f64) -> f64 {
        let count = self.sorted_values.partition_point(|v| *v <= t);
        count as f64 / self.sorted_values.len() as f64
    }
}

/// ECDF of the model residuals.
pub fn residual_ecdf(residuals: &ResidualSet) -> Result<Ecdf> {
    Ecdf::from_values(residuals.values())
}

/// A mean-zero error law with known density, CDF and partial means,
/// parameterized by its standard deviation.
#[derive(Debug, Clone, Copy)]
pub enum ErrorModel {
    Normal { sd: f64 },
    /// Student t with `df` degrees of freedom, scaled so the standard
    /// deviation equals `sd` (multiplier sd * sqrt((df-2)/df)).
    StudentT { df: u32, sd: f64 },
}

impl ErrorModel {
    pub fn normal(sd: f64) -> Result<Self> {
        if sd <= 0.0 {
            return Err(DeconvError::Domain("standard deviation must be positive".into()));
        }
        Ok(Self::Normal { sd })
    }

    pub fn student_t(df: u32, sd: f64) -> Result<Self> {
        if sd <= 0.0 {
            return Err(DeconvError::Domain("standard deviation must be positive".into()));
        }
        if df < 3 {
            return Err(DeconvError::Domain("need df >= 3 for a finite variance".into()));
        }
        Ok(Self::StudentT { df, sd })
    }

    /// The base-to-target scale multiplier for the t family.
    fn t_scale(df: u32, sd: f64) -> f64 {
        sd * ((df as f64 - 2.0) / df as f64).sqrt()
    }

    pub fn sd(&self) -> f64 {
        match self {
            Self::Normal { sd } | Self::StudentT { sd, .. } => *sd,
        }
    }

    pub fn variance(&self) -> f64 {
        self.sd() * self.sd()
    }

    pub fn density(&self, t: f64) -> f64 {
        match self {
            Self::Normal { sd } => {
                let z = t / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::StudentT { df, sd } => {
                let c = Self::t_scale(*df, *sd);
                let nu = *df as f64;
                let x = t / c;
                let cnu = gamma((nu + 1.0) / 2.0) / ((nu * std::f64::consts::PI).sqrt() * gamma(nu / 2.0));
                cnu * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0) / c
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Normal { sd } => Normal::new(0.0, *sd).unwrap().cdf(t),
            Self::StudentT { df, sd } => {
                let c = Self::t_scale(*df, *sd);
                StudentsT::new(0.0, 1.0, *df as f64).unwrap().cdf(t / c)
            }
        }
    }

    /// Partial mean E[eps 1(eps <= t)], in closed form.
    ///
    /// Normal: -sd^2 f(t). Student t: the density's antiderivative gives
    /// E[T 1(T <= x)] = -C_nu nu/(nu - 1) (1 + x^2/nu)^{(1-nu)/2}.
    pub fn partial_mean(&self, t: f64) -> f64 {
        match self {
            Self::Normal { sd } => -sd * sd * self.density(t),
            Self::StudentT { df, sd } => {
                let c = Self::t_scale(*df, *sd);
                let nu = *df as f64;
                let x = t / c;
                let cnu = gamma((nu + 1.0) / 2.0) / ((nu * std::f64::consts::PI).sqrt() * gamma(nu / 2.0));
                c * (-cnu * nu / (nu - 1.0) * (1.0 + x * x / nu).powf((1.0 - nu) / 2.0))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Normal { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            Self::StudentT { df, sd } => {
                let t = StudentTSampler::new(*df as f64).unwrap().sample(rng);
                Self::t_scale(*df, *sd) * t
            }
        }
    }
}

/// Asymptotic covariance of the normalized residual-ECDF process:
/// Sigma(u,v) = F(min(u,v)) - F(u)F(v) + f(u)E[eps 1(eps<=v)]
///            + f(v)E[eps 1(eps<=u)] + sigma^2 f(u)f(v).
pub fn asymptotic_covariance(model: &ErrorModel, u: f64, v: f64) -> f64 {
    let fu = model.cdf(u);
    let fv = model.cdf(v);
    let du = model.density(u);
    let dv = model.density(v);
    model.cdf(u.min(v)) - fu * fv
        + du * model.partial_mean(v)
        + dv * model.partial_mean(u)
        + model.variance() * du * dv
}

/// Integral of Sigma(t,t) over the region where it is non-negligible.
pub fn asymptotic_aimse(model: &ErrorModel) -> Result<f64> {
    // expand the range until the integrand drops below 1e-12
    let mut hi = 4.0 * model.sd();
    while asymptotic_covariance(model, hi, hi) > 1e-12 && hi < 1e4 {
        hi *= 1.5;
    }
    let panels = (hi / model.sd()).ceil() as usize * 2;
    adaptive_simpson(&|t| asymptotic_covariance(model, t, t), -hi, hi, 1e-9, panels.max(8))
}
