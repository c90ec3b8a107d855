//! Fourier-side primitives: empirical coefficients, distortion
//! coefficients, convolution, series evaluation and L2 metrics.
//!
//! Everything works on the interval [-1/2, 1/2] with the orthonormal
//! basis e^{i 2 pi k x}, so Parseval identities are exact in
//! coefficient space.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{DeconvError, Result};
use crate::quad::adaptive_simpson;

/// Tolerance below which a distortion coefficient is treated as zero and
/// the operator as non-invertible.
pub const PSI_INVERTIBILITY_FLOOR: f64 = 1e-14;

/// Per-coefficient absolute quadrature tolerance. Coefficients enter
/// denominators, so they must be accurate well below 1/|Psi(k)|
/// amplification.
pub const COEFF_QUAD_TOL: f64 = 1e-12;

/// Which formula places the design points on [-1/2, 1/2].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// x_j = j / (2n + 1); admits exact DFT evaluation.
    Simulation,
    /// x_j = j / (2n); endpoints at +-1/2.
    Model,
}

/// The uniform design x_j, j = -n..n.
#[derive(Debug, Clone)]
pub struct DesignGrid {
    half_count: usize,
    kind: GridKind,
    points: Vec<f64>,
}

impl DesignGrid {
    pub fn new(half_count: usize, kind: GridKind) -> Result<Self> {
        if half_count == 0 {
            return Err(DeconvError::Domain("grid half-count must be positive".into()));
        }
        let n = half_count as i64;
        let denom = match kind {
            GridKind::Simulation => (2 * n + 1) as f64,
            GridKind::Model => (2 * n) as f64,
        };
        let points = (-n..=n).map(|j| j as f64 / denom).collect();
        Ok(Self { half_count, kind, points })
    }

    pub fn simulation(half_count: usize) -> Result<Self> {
        Self::new(half_count, GridKind::Simulation)
    }

    pub fn model(half_count: usize) -> Result<Self> {
        Self::new(half_count, GridKind::Model)
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of design points, 2n + 1.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Observed pairs (x_j, Y_j).
#[derive(Debug, Clone)]
pub struct Sample {
    grid: DesignGrid,
    responses: Vec<f64>,
}

impl Sample {
    pub fn new(grid: DesignGrid, responses: Vec<f64>) -> Result<Self> {
        if responses.len() != grid.len() {
            return Err(DeconvError::ShapeMismatch(format!(
                "{} responses for {} design points",
                responses.len(),
                grid.len()
            )));
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(DeconvError::Domain("non-finite response".into()));
        }
        Ok(Self { grid, responses })
    }

    pub fn grid(&self) -> &DesignGrid {
        &self.grid
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }
}

/// Complex Fourier coefficients indexed k = -K..K.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    max_freq: usize,
    values: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn new(max_freq: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != 2 * max_freq + 1 {
            return Err(DeconvError::ShapeMismatch(format!(
                "{} values for max frequency {}",
                values.len(),
                max_freq
            )));
        }
        Ok(Self { max_freq, values })
    }

    pub fn zeros(max_freq: usize) -> Self {
        Self {
            max_freq,
            values: vec![Complex64::new(0.0, 0.0); 2 * max_freq + 1],
        }
    }

    /// Build coefficients by evaluating `coeff` at each k in -K..K.
    pub fn from_fn(max_freq: usize, mut coeff: impl FnMut(i64) -> Complex64) -> Self {
        let kk = max_freq as i64;
        let values = (-kk..=kk).map(&mut coeff).collect();
        Self { max_freq, values }
    }

    pub fn max_freq(&self) -> usize {
        self.max_freq
    }

    pub fn value(&self, k: i64) -> Complex64 {
        assert!(k.unsigned_abs() as usize <= self.max_freq, "frequency {k} out of range");
        self.values[(k + self.max_freq as i64) as usize]
    }

    /// Coefficient at k, zero outside the stored band.
    pub fn value_or_zero(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize <= self.max_freq {
            self.values[(k + self.max_freq as i64) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, k: i64, v: Complex64) {
        assert!(k.unsigned_abs() as usize <= self.max_freq, "frequency {k} out of range");
        self.values[(k + self.max_freq as i64) as usize] = v;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Largest |c(-k) - conj(c(k))| over the band.
    pub fn hermitian_defect(&self) -> f64 {
        (0..=self.max_freq as i64)
            .map(|k| (self.value(-k) - self.value(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Total energy sum_k |c(k)|^2 (the squared L2 norm by Parseval).
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Fourier coefficients of a real function on [-1/2, 1/2] by adaptive
/// quadrature, rho(k) = int f(u) e^{-i 2 pi k u} du.
pub fn coefficients_of_function(
    f: &(dyn Fn(f64) -> f64 + Sync),
    max_freq: usize,
    tol: f64,
) -> Result<SpectralCoefficients> {
    let kk = max_freq as i64;
    let mut values = Vec::with_capacity(2 * max_freq + 1);
    for k in -kk..=kk {
        let w = 2.0 * std::f64::consts::PI * k as f64;
        let panels = 4 * (k.unsigned_abs() as usize + 1);
        let re = adaptive_simpson(&|u| f(u) * (w * u).cos(), -0.5, 0.5, tol, panels)?;
        let im = adaptive_simpson(&|u| -f(u) * (w * u).sin(), -0.5, 0.5, tol, panels)?;
        values.push(Complex64::new(re, im));
    }
    SpectralCoefficients::new(max_freq, values)
}

/// The known convolution distortion psi.
#[derive(Clone)]
pub enum DistortionKind {
    /// Standard Laplace density with the given scale, restricted to
    /// [-1/2, 1/2] and renormalized.
    LaplaceTruncated { scale: f64 },
    /// Uniform density on [-1/2, 1/2]; annihilates every nonzero frequency.
    Uniform,
    /// No distortion at all: Psi(k) = 1 for every k. Not a density; used
    /// for direct-regression checks and trigonometric interpolation.
    Identity,
    /// User-supplied density on [-1/2, 1/2].
    Custom {
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for DistortionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::LaplaceTruncated { scale } => write!(f, "LaplaceTruncated {{ scale: {scale} }}"),
            Self::Uniform => write!(f, "Uniform"),
            Self::Identity => write!(f, "Identity"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// How Psi(k) is computed for the Laplace kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiMode {
    /// Exact quadrature of the truncated, renormalized density (default).
    Quadrature,
    /// Closed form 1 / (1 + 4 pi^2 scale^2 k^2) of the untruncated
    /// Laplace density. Differs from the quadrature of the truncated
    /// density; both are provided because published simulation settings
    /// assume the closed form.
    ClosedForm,
}

/// Distortion density plus the polynomial-decay profile it is declared
/// to satisfy (degree b, onset Gamma, envelope constants).
#[derive(Debug, Clone)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub mode: PsiMode,
    pub ill_posedness_b: f64,
    pub gamma_threshold: f64,
    pub c_psi_lower: f64,
    pub c_psi_upper: f64,
}

impl DistortionSpec {
    /// Truncated Laplace distortion with decay degree b = 2 and onset
    /// Gamma = 1. The envelope constants are computed from the scale so
    /// they bracket both the quadrature and the closed-form coefficients:
    /// with a = 1/scale and eps = e^{-a/2}, |k|^2 Psi(k) lies in
    /// (4a^2/(a^2 + 16 pi^2), a^2 (1 + eps) / ((1 - eps) 4 pi^2)) for
    /// |k| >= 2.
    pub fn laplace_truncated(scale: f64) -> Self {
        let pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let a = 1.0 / scale;
        let eps = (-a / 2.0).exp();
        Self {
            kind: DistortionKind::LaplaceTruncated { scale },
            mode: PsiMode::Quadrature,
            ill_posedness_b: 2.0,
            gamma_threshold: 1.0,
            c_psi_lower: 4.0 * a * a / (a * a + 4.0 * pi2) * (1.0 - 1e-9),
            c_psi_upper: a * a * (1.0 + eps) / ((1.0 - eps) * pi2) * (1.0 + 1e-9),
        }
    }

    pub fn with_mode(mut self, mode: PsiMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_decay_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.c_psi_lower = lower;
        self.c_psi_upper = upper;
        self
    }

    pub fn uniform() -> Self {
        Self {
            kind: DistortionKind::Uniform,
            mode: PsiMode::Quadrature,
            ill_posedness_b: 1.0,
            gamma_threshold: 1.0,
            c_psi_lower: f64::MIN_POSITIVE,
            c_psi_upper: 1.0,
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: DistortionKind::Identity,
            mode: PsiMode::Quadrature,
            ill_posedness_b: 1.0,
            gamma_threshold: 1.0,
            c_psi_lower: f64::MIN_POSITIVE,
            c_psi_upper: 2.0,
        }
    }

    pub fn custom(
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        ill_posedness_b: f64,
        gamma_threshold: f64,
        c_psi_lower: f64,
        c_psi_upper: f64,
    ) -> Self {
        Self {
            kind: DistortionKind::Custom { density },
            mode: PsiMode::Quadrature,
            ill_posedness_b,
            gamma_threshold,
            c_psi_lower,
            c_psi_upper,
        }
    }

    /// Density evaluation; `None` for the identity kind, which has no
    /// density representation.
    pub fn density(&self, x: f64) -> Option<f64> {
        match &self.kind {
            DistortionKind::LaplaceTruncated { scale } => {
                let norm = 1.0 - (-0.5 / scale).exp();
                Some((-x.abs() / scale).exp() / (2.0 * scale * norm))
            }
            DistortionKind::Uniform => Some(1.0),
            DistortionKind::Identity => None,
            DistortionKind::Custom { density } => Some(density(x)),
        }
    }

    /// Check the density is positive on [-1/2, 1/2] and integrates to
    /// one within 1e-10. The identity kind passes vacuously.
    pub fn validate_density(&self) -> Result<()> {
        let Some(()) = self.density(0.0).map(|_| ()) else {
            return Ok(());
        };
        let grid_ok = (0..=200)
            .map(|i| -0.5 + i as f64 / 200.0)
            .all(|x| self.density(x).unwrap() > 0.0);
        if !grid_ok {
            return Err(DeconvError::Domain("distortion density not positive on [-1/2, 1/2]".into()));
        }
        let mass = adaptive_simpson(&|x| self.density(x).unwrap(), -0.5, 0.5, 1e-12, 8)?;
        if (mass - 1.0).abs() > 1e-10 {
            return Err(DeconvError::Domain(format!(
                "distortion density integrates to {mass}, not 1"
            )));
        }
        Ok(())
    }

    /// Numerically validate the decay profile C < |k|^b |Psi(k)| < C*
    /// for Gamma < |k| <= max_freq of the supplied coefficients.
    pub fn validate_decay_profile(&self, psi: &SpectralCoefficients) -> Result<()> {
        for k in 1..=psi.max_freq() as i64 {
            if (k as f64) <= self.gamma_threshold {
                continue;
            }
            let scaled = (k as f64).powf(self.ill_posedness_b) * psi.value(k).norm();
            if scaled <= self.c_psi_lower || scaled >= self.c_psi_upper {
                return Err(DeconvError::Domain(format!(
                    "decay profile violated at k = {k}: |k|^b |Psi(k)| = {scaled}"
                )));
            }
        }
        Ok(())
    }
}

/// Empirical Fourier coefficients R_hat(k) = (2n+1)^-1 sum Y_j e^{-i 2 pi k x_j}.
///
/// On the simulation grid the sums are a DFT and are computed by FFT;
/// on the model grid they are computed directly.
pub fn empirical_fourier_coefficients(
    sample: &Sample,
    max_freq: usize,
) -> Result<SpectralCoefficients> {
    let n = sample.grid().half_count();
    if max_freq > n {
        return Err(DeconvError::FrequencyOverflow { requested: max_freq, limit: n });
    }
    match sample.grid().kind() {
        GridKind::Simulation => {
            let len = 2 * n + 1;
            // x_j = j/(2n+1): reorder responses so slot m holds Y_{j}
            // with j = m mod (2n+1), then e^{-i2pi k x_j} matches the
            // DFT twiddle at (k mod len, m).
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for m in 0..len {
                let j = if m <= n { m as i64 } else { m as i64 - len as i64 };
                buf[m] = Complex64::new(sample.responses()[(j + n as i64) as usize], 0.0);
            }
            FftPlanner::new().plan_fft_forward(len).process(&mut buf);
            let scale = 1.0 / len as f64;
            Ok(SpectralCoefficients::from_fn(max_freq, |k| {
                let idx = k.rem_euclid(len as i64) as usize;
                buf[idx] * scale
            }))
        }
        GridKind::Model => {
            let points = sample.grid().points();
            let ys = sample.responses();
            let scale = 1.0 / points.len() as f64;
            Ok(SpectralCoefficients::from_fn(max_freq, |k| {
                let w = -2.0 * std::f64::consts::PI * k as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, y) in points.iter().zip(ys) {
                    acc += Complex64::from_polar(*y, w * x);
                }
                acc * scale
            }))
        }
    }
}

/// Fourier coefficients Psi(k) of the distortion density.
pub fn distortion_coefficients(
    spec: &DistortionSpec,
    max_freq: usize,
) -> Result<SpectralCoefficients> {
    spec.validate_density()?;
    let coeffs = match (&spec.kind, spec.mode) {
        (DistortionKind::Identity, _) => {
            SpectralCoefficients::from_fn(max_freq, |_| Complex64::new(1.0, 0.0))
        }
        (DistortionKind::Uniform, _) => SpectralCoefficients::from_fn(max_freq, |k| {
            Complex64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0)
        }),
        (DistortionKind::LaplaceTruncated { scale }, PsiMode::ClosedForm) => {
            let pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
            let s2 = scale * scale;
            SpectralCoefficients::from_fn(max_freq, |k| {
                Complex64::new(1.0 / (1.0 + pi2 * s2 * (k * k) as f64), 0.0)
            })
        }
        _ => {
            let spec = spec.clone();
            let f = move |x: f64| spec.density(x).expect("density kinds only");
            coefficients_of_function(&f, max_freq, COEFF_QUAD_TOL)?
        }
    };
    if !matches!(spec.kind, DistortionKind::Uniform) {
        for k in -(max_freq as i64)..=max_freq as i64 {
            let mag = coeffs.value(k).norm();
            if mag < PSI_INVERTIBILITY_FLOOR {
                return Err(DeconvError::NonInvertibleDistortion { k, magnitude: mag });
            }
        }
    }
    Ok(coeffs)
}

/// Elementwise product of coefficient sequences (the convolution theorem).
pub fn apply_convolution(
    theta: &SpectralCoefficients,
    psi: &SpectralCoefficients,
) -> Result<SpectralCoefficients> {
    if theta.max_freq() != psi.max_freq() {
        return Err(DeconvError::ShapeMismatch(format!(
            "max frequencies {} and {}",
            theta.max_freq(),
            psi.max_freq()
        )));
    }
    let values = theta
        .values()
        .iter()
        .zip(psi.values())
        .map(|(a, b)| a * b)
        .collect();
    SpectralCoefficients::new(theta.max_freq(), values)
}

/// Evaluate sum_k c(k) e^{i 2 pi k x} for Hermitian-symmetric
/// coefficients; the imaginary residue must be negligible.
pub fn evaluate_series(coeffs: &SpectralCoefficients, x: f64) -> Result<f64> {
    let kk = coeffs.max_freq() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in -kk..=kk {
        acc += coeffs.value(k) * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * x);
    }
    if acc.im.abs() > 1e-8 {
        return Err(DeconvError::SymmetryViolation { x, residue: acc.im.abs() });
    }
    Ok(acc.re)
}

/// Evaluate the series at every design point of a simulation grid in one
/// pass (inverse-DFT identity). Falls back to pointwise evaluation on
/// model grids.
pub fn evaluate_series_on_grid(coeffs: &SpectralCoefficients, grid: &DesignGrid) -> Result<Vec<f64>> {
    grid.points()
        .iter()
        .map(|&x| evaluate_series(coeffs, x))
        .collect()
}

/// Squared L2 distance sum_k |a(k) - b(k)|^2; equals the integral of the
/// squared difference of the band-limited functions.
pub fn parseval_l2_distance(a: &SpectralCoefficients, b: &SpectralCoefficients) -> Result<f64> {
    if a.max_freq() != b.max_freq() {
        return Err(DeconvError::ShapeMismatch(format!(
            "max frequencies {} and {}",
            a.max_freq(),
            b.max_freq()
        )));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum())
}
