//! Adaptive Simpson quadrature.

use crate::error::{DeconvError, Result};

struct Simpson<'a> {
    f: &'a dyn Fn(f64) -> f64,
    tol: f64,
    max_depth: u32,
    failed: bool,
}

impl Simpson<'_> {
    fn recurse(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * self.tol || depth >= self.max_depth {
            if depth >= self.max_depth && delta.abs() > 15.0 * self.tol {
                self.failed = true;
            }
            return left + right + delta / 15.0;
        }
        self.recurse(a, m, fa, flm, fm, left, depth + 1)
            + self.recurse(m, b, fm, frm, fb, right, depth + 1)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`, splitting the
/// interval into `panels` equal pieces first so oscillatory integrands are
/// resolved before the adaptive refinement starts.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    panels: usize,
) -> Result<f64> {
    let panels = panels.max(1);
    let mut sim = Simpson {
        f,
        tol: tol / panels as f64,
        max_depth: 40,
        failed: false,
    };
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let pa = a + i as f64 * width;
        let pb = pa + width;
        let pm = 0.5 * (pa + pb);
        let fa = f(pa);
        let fm = f(pm);
        let fb = f(pb);
        let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
        total += sim.recurse(pa, pb, fa, fm, fb, whole, 0);
    }
    if sim.failed || !total.is_finite() {
        return Err(DeconvError::IntegrationFailure(format!(
            "adaptive Simpson did not converge on [{a}, {b}] at tol {tol:e}"
        )));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = adaptive_simpson(&|x| x * x, 0.0, 1.0, 1e-12, 1).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn integrates_oscillatory() {
        // int_0^1 cos(40 pi x)^2 dx = 1/2
        let f = |x: f64| (40.0 * std::f64::consts::PI * x).cos().powi(2);
        let v = adaptive_simpson(&f, 0.0, 1.0, 1e-12, 64).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
    }
}
