//! Deconvolution regression on the circle: Fourier-series estimation of
//! a periodic signal observed through a known convolution plus noise,
//! residual-based error-distribution estimates, and fully data-driven
//! regularization selection by a smooth residual bootstrap.

pub mod bootstrap;
pub mod ecdf;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod quad;
pub mod riskhull;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use error::{DeconvError, Result};
pub use estimator::{RegularizedEstimate, ResidualSet};
pub use kernel::{AssumptionProfile, SmoothingKernelSpec};
pub use spectral::{DesignGrid, DistortionSpec, GridKind, Sample, SpectralCoefficients};
