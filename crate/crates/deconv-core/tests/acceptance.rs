//! Acceptance battery: every release-gating criterion in one target,
//! printing one pass/fail line per criterion. Run with `--nocapture`
//! to see the lines for passing runs too.

use deconv_core::bootstrap::{
    center_residuals, select_g_opt, smooth_cdf, smooth_density, BootstrapConfig, Contaminant,
    SelectionGrid, SmoothErrorDistribution,
};
use deconv_core::ecdf::{asymptotic_aimse, asymptotic_covariance, ErrorModel};
use deconv_core::estimator::{
    estimate_theta, estimate_theta_with_psi, integrated_variance_formula, weighted_coefficients,
};
use deconv_core::quad::adaptive_simpson;
use deconv_core::rng::stream_rng;
use deconv_core::sim::{
    run_experiment, ExperimentConfig, ResultTable, SelectionMethod, SignalSpec, TABLE_TS,
};
use deconv_core::spectral::{
    distortion_coefficients, empirical_fourier_coefficients, evaluate_series, DesignGrid,
    DistortionSpec, Sample, SpectralCoefficients,
};
use deconv_core::SmoothingKernelSpec;
use num_complex::Complex64;

const MASTER_SEED: u64 = 20_260_823;

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Self { failures: Vec::new() }
    }

    fn check(&mut self, criterion: &str, ok: bool, detail: String) {
        println!("{criterion}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures.push(format!("{criterion}: {detail}"));
        }
    }
}

fn theta1_experiment() -> ResultTable {
    let mut config = ExperimentConfig::paper_defaults(
        SignalSpec::theta1(150).expect("theta1 coefficients"),
        ErrorModel::normal(2.0 / 3.0).expect("normal model"),
    );
    config.replications = 500;
    config.selection_methods = vec![SelectionMethod::Bootstrap, SelectionMethod::IseOracle];
    config.master_seed = MASTER_SEED;
    run_experiment(&config).expect("theta1 experiment")
}

fn criterion_1(gate: &mut Gate) {
    let normal = ErrorModel::normal(2.0 / 3.0).unwrap();
    let t4 = ErrorModel::student_t(4, 2.0 / 3.0).unwrap();
    let normal_row = [0.001, 0.046, 0.091, 0.046, 0.001];
    let t_row = [0.006, 0.036, 0.156, 0.036, 0.006];
    let mut worst = 0.0f64;
    let mut ok = true;
    for (i, &t) in TABLE_TS.iter().enumerate() {
        let dn = (asymptotic_covariance(&normal, t, t) - normal_row[i]).abs();
        let dt = (asymptotic_covariance(&t4, t, t) - t_row[i]).abs();
        worst = worst.max(dn).max(dt);
        ok &= dn <= 5e-4 && dt <= 5e-4;
    }
    gate.check("criterion 1 - analytic covariance rows", ok, format!("max |dev| = {worst:.2e}"));
}

fn criterion_2(gate: &mut Gate) {
    let normal = asymptotic_aimse(&ErrorModel::normal(2.0 / 3.0).unwrap()).unwrap();
    let t4 = asymptotic_aimse(&ErrorModel::student_t(4, 2.0 / 3.0).unwrap()).unwrap();
    let ok = (normal - 0.188).abs() <= 1e-3 && (t4 - 0.228).abs() <= 1e-3;
    gate.check(
        "criterion 2 - analytic AIMSE",
        ok,
        format!("normal = {normal:.4}, t4 = {t4:.4}"),
    );
}

fn criterion_3(gate: &mut Gate, table: &ResultTable) {
    let size = table.size(150).expect("n = 150 in table");
    let amse0 = size.cells.iter().find(|c| c.t == 0.0).unwrap().amse;
    let aimse = size.aimse;
    let ok = (amse0 - 0.083).abs() <= 0.02 && (aimse - 0.186).abs() <= 0.02;
    gate.check(
        "criterion 3 - simulated ECDF precision at 2n+1 = 301",
        ok,
        format!("AMSE(0) = {amse0:.4}, AIMSE = {aimse:.4}"),
    );
}

fn criterion_4(gate: &mut Gate, table: &ResultTable) {
    let reference = [0.169, 0.093, 0.056, 0.040];
    let mut values = Vec::new();
    let mut ok = true;
    for (size, want) in table.sizes.iter().zip(reference) {
        let got = size
            .imse
            .iter()
            .find(|(m, _)| *m == SelectionMethod::Bootstrap)
            .map(|(_, v)| *v)
            .unwrap();
        ok &= got >= want / 2.0 && got <= want * 2.0;
        values.push(got);
    }
    for w in values.windows(2) {
        ok &= w[1] < w[0];
    }
    gate.check(
        "criterion 4 - bootstrap IMSE trend",
        ok,
        format!("IMSE = {values:.3?} vs reference {reference:?} (factor-2 band)"),
    );
}

fn criterion_5(gate: &mut Gate, table: &ResultTable) {
    let mut ok = true;
    let mut detail = Vec::new();
    for size in &table.sizes {
        let get = |m: SelectionMethod| {
            size.imse.iter().find(|(mm, _)| *mm == m).map(|(_, v)| *v).unwrap()
        };
        let se_boot = size
            .imse_se
            .iter()
            .find(|(m, _)| *m == SelectionMethod::Bootstrap)
            .map(|(_, v)| *v)
            .unwrap();
        let oracle = get(SelectionMethod::IseOracle);
        let boot = get(SelectionMethod::Bootstrap);
        ok &= oracle <= boot + 2.0 * se_boot;
        detail.push(format!("n={}: {:.3} <= {:.3}", size.half_size, oracle, boot + 2.0 * se_boot));
    }
    gate.check("criterion 5 - oracle dominance", ok, detail.join("; "));
}

fn criterion_6(gate: &mut Gate, table: &ResultTable) {
    let mut medians = Vec::new();
    for &n in &[25usize, 50, 100] {
        let size = table.size(n).unwrap();
        let mut abs: Vec<f64> =
            size.log_ratios.iter().take(100).map(|r| r.abs()).collect();
        abs.sort_by(|a, b| a.total_cmp(b));
        let m = abs.len();
        let median = if m % 2 == 1 { abs[m / 2] } else { 0.5 * (abs[m / 2 - 1] + abs[m / 2]) };
        medians.push(median);
    }
    let ok = medians.windows(2).all(|w| w[1] <= w[0]);
    gate.check(
        "criterion 6 - selector consistency trend",
        ok,
        format!("median |log(g_boot/g_ISE)| = {medians:.4?} over 2n+1 in {{51, 101, 201}}"),
    );
}

fn integrated_variance_by_monte_carlo() -> (f64, f64) {
    let n = 25usize;
    let sigma = 2.0 / 3.0;
    let h = 1.0;
    let kernel = SmoothingKernelSpec::paper_sim(n as u32);
    let psi = distortion_coefficients(&DistortionSpec::laplace_truncated(0.1), n).unwrap();
    let reps = 2000usize;
    let mut acc = 0.0;
    for r in 0..reps {
        let mut rng = stream_rng(41, r as u64);
        let grid = DesignGrid::simulation(n).unwrap();
        let ys: Vec<f64> = (0..grid.len())
            .map(|_| sigma * rand_normal(&mut rng))
            .collect();
        let sample = Sample::new(grid, ys).unwrap();
        let r_hat = empirical_fourier_coefficients(&sample, n).unwrap();
        let coeffs = weighted_coefficients(&r_hat, &psi, &kernel, h).unwrap();
        acc += coeffs.energy();
    }
    let mc = acc / reps as f64;
    let formula = integrated_variance_formula(sigma * sigma, &kernel, &psi, h, n);
    (mc, formula)
}

fn rand_normal(rng: &mut impl rand::Rng) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(rng)
}

fn criterion_7(gate: &mut Gate) {
    let mut ok = true;
    let mut notes = Vec::new();

    // Parseval on a fixed band-limited function
    let coeffs = SpectralCoefficients::from_fn(5, |k| {
        if k == 0 {
            Complex64::new(1.2, 0.0)
        } else {
            let re = 0.7 / (1.0 + k.abs() as f64);
            let im = 0.2 * k.signum() as f64 / (1 + k * k) as f64;
            Complex64::new(re, im)
        }
    });
    let f = |x: f64| evaluate_series(&coeffs, x).unwrap();
    let quad = adaptive_simpson(&|x| f(x) * f(x), -0.5, 0.5, 1e-12, 16).unwrap();
    let parseval_ok = (quad - coeffs.energy()).abs() < 1e-8;
    ok &= parseval_ok;
    notes.push(format!("parseval dev {:.1e}", (quad - coeffs.energy()).abs()));

    // DFT vs direct sum for n <= 8, and Hermitian symmetry
    let mut dft_worst = 0.0f64;
    let mut herm_worst = 0.0f64;
    for n in 1usize..=8 {
        let grid = DesignGrid::simulation(n).unwrap();
        let points = grid.points().to_vec();
        let ys: Vec<f64> =
            (0..grid.len()).map(|j| ((j * 31 + n * 7) % 17) as f64 / 3.0 - 2.5).collect();
        let sample = Sample::new(grid, ys.clone()).unwrap();
        let r_hat = empirical_fourier_coefficients(&sample, n).unwrap();
        herm_worst = herm_worst.max(r_hat.hermitian_defect());
        for k in -(n as i64)..=n as i64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, y) in points.iter().zip(&ys) {
                let phase = -2.0 * std::f64::consts::PI * k as f64 * x;
                acc += y * Complex64::new(phase.cos(), phase.sin());
            }
            acc /= points.len() as f64;
            dft_worst = dft_worst.max((acc - r_hat.value(k)).norm());
        }
    }
    ok &= dft_worst < 1e-10 && herm_worst < 1e-12;
    notes.push(format!("dft dev {dft_worst:.1e}, hermitian {herm_worst:.1e}"));

    // trigonometric interpolation under the identity distortion
    let n = 7usize;
    let grid = DesignGrid::simulation(n).unwrap();
    let points = grid.points().to_vec();
    let ys: Vec<f64> = (0..grid.len()).map(|j| ((j * 13) % 11) as f64 / 2.0 - 2.0).collect();
    let sample = Sample::new(grid, ys.clone()).unwrap();
    let est = estimate_theta(
        &sample,
        &DistortionSpec::identity(),
        &SmoothingKernelSpec::spectral_cutoff(n as u32),
        1.0,
    )
    .unwrap();
    let interp_worst = points
        .iter()
        .zip(&ys)
        .map(|(x, y)| (est.eval(*x).unwrap() - y).abs())
        .fold(0.0f64, f64::max)
        ;
    ok &= interp_worst < 1e-10;
    notes.push(format!("interp dev {interp_worst:.1e}"));

    // integrated variance: closed form vs Monte Carlo
    let (mc, formula) = integrated_variance_by_monte_carlo();
    let var_rel = (mc - formula).abs() / formula;
    ok &= var_rel < 0.05;
    notes.push(format!("variance rel dev {var_rel:.3}"));

    // F_n* axioms and f_n* mass
    let centered = center_residuals(&[0.9, -0.4, 0.1, -1.3, 0.7]).unwrap();
    let dist = SmoothErrorDistribution::new(centered, 0.4, Contaminant::StandardNormal).unwrap();
    let mut cdf_ok = smooth_cdf(&dist, -60.0) < 1e-12 && smooth_cdf(&dist, 60.0) > 1.0 - 1e-12;
    let mut prev = 0.0;
    for i in 0..500 {
        let t = -6.0 + i as f64 * 12.0 / 499.0;
        let v = smooth_cdf(&dist, t);
        cdf_ok &= v >= prev - 1e-15 && (0.0..=1.0).contains(&v);
        prev = v;
    }
    let mass = adaptive_simpson(&|t| smooth_density(&dist, t), -20.0, 20.0, 1e-9, 80).unwrap();
    ok &= cdf_ok && (mass - 1.0).abs() < 1e-6;
    notes.push(format!("density mass dev {:.1e}", (mass - 1.0).abs()));

    // deterministic replay across thread counts
    let distortion = DistortionSpec::laplace_truncated(0.1);
    let kernel = SmoothingKernelSpec::paper_sim(10);
    let grid = DesignGrid::simulation(10).unwrap();
    let mut rng = stream_rng(55, 0);
    let ys: Vec<f64> = (0..grid.len()).map(|_| rand_normal(&mut rng)).collect();
    let sample = Sample::new(grid, ys).unwrap();
    let psi = distortion_coefficients(&distortion, 10).unwrap();
    let pilot = estimate_theta_with_psi(&sample, &psi, &kernel, 2.0).unwrap();
    let sel = SelectionGrid::new(0.5, 4.0, 20).unwrap();
    let boot = BootstrapConfig { replications: 30, rng_seed: 5, ..Default::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| select_g_opt(&sample, &pilot, &sel, &kernel, &boot).unwrap())
    };
    let (g1, c1) = run(1);
    let (g3, c3) = run(3);
    let replay_ok =
        g1.to_bits() == g3.to_bits() && c1.iter().zip(&c3).all(|(a, b)| a.to_bits() == b.to_bits());
    ok &= replay_ok;
    notes.push(format!("replay identical: {replay_ok}"));

    gate.check("criterion 7 - property suite", ok, notes.join("; "));
}

fn criterion_8(gate: &mut Gate) {
    let mut config = ExperimentConfig::paper_defaults(
        SignalSpec::theta2(150).expect("theta2 coefficients"),
        ErrorModel::normal(2.0 / 3.0).unwrap(),
    );
    config.replications = 100;
    config.selection_methods = vec![SelectionMethod::Bootstrap, SelectionMethod::RiskHull];
    config.master_seed = MASTER_SEED + 1;
    let table = run_experiment(&config).expect("theta2 risk-hull experiment");
    let mut ok = true;
    let mut detail = Vec::new();
    for size in &table.sizes {
        let get = |m: SelectionMethod| {
            size.imse.iter().find(|(mm, _)| *mm == m).map(|(_, v)| *v).unwrap()
        };
        let boot = get(SelectionMethod::Bootstrap);
        let hull = get(SelectionMethod::RiskHull);
        ok &= boot <= hull;
        detail.push(format!("n={}: {:.3} vs {:.3}", size.half_size, boot, hull));
    }
    gate.check("criterion 8 - risk-hull comparison", ok, detail.join("; "));
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate::new();
    criterion_1(&mut gate);
    criterion_2(&mut gate);

    let table = theta1_experiment();
    criterion_3(&mut gate, &table);
    criterion_4(&mut gate, &table);
    criterion_5(&mut gate, &table);
    criterion_6(&mut gate, &table);

    criterion_7(&mut gate);
    criterion_8(&mut gate);

    assert!(gate.failures.is_empty(), "failed criteria:\n{}", gate.failures.join("\n"));
}
