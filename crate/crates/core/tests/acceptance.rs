//! End-to-end acceptance checks, one test per criterion. Each prints a single PASS/FAIL line.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use carnot::hermite::{weyl_matrix, WeylOptions};
use carnot::kernel::{group_convolve, invert_to_grid, Axis, KernelSlice};
use carnot::levy::JumpDistribution;
use carnot::mc::{estimate_charfn, simulate_levy_on_g, simulate_levy_ou, PathConfig};
use carnot::poly::{generator_matrix, homogeneous_monomials, monomial_basis, Rational};
use carnot::semigroup::{
    coeigen_residual, default_coeigen_axes, intertwine_residual, numeric_generator_eigenvalues, polynomial_spectrum,
    spectrum_sup_along_rays, CoeigenTest, Pair, TestFunction,
};
use carnot::spectral::SpectrumDescription;
use carnot::{frame_at, CarnotGroup, GroupElement, JumpSpec, LevyExponent, RatPoly};
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::One;
use rand::SeedableRng;

// criteria run one at a time so each runtime budget measures that criterion alone
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn h1() -> CarnotGroup {
    CarnotGroup::heisenberg(1).unwrap()
}

fn gaussian(s2: f64) -> LevyExponent {
    LevyExponent::gaussian(DMatrix::from_element(1, 1, s2)).unwrap()
}

fn gaussian_drift(s2: f64, b: f64) -> LevyExponent {
    LevyExponent::new(DMatrix::from_element(1, 1, s2), vec![b], JumpSpec::None).unwrap()
}

fn compound_poisson(rate: f64, mean: f64, std: f64) -> LevyExponent {
    LevyExponent::new(
        DMatrix::zeros(1, 1),
        vec![0.0],
        JumpSpec::CompoundPoisson { rate, distribution: JumpDistribution::Normal { mean: vec![mean], std } },
    )
    .unwrap()
}

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) -> bool {
    let in_time = elapsed <= budget;
    let ok = pass && in_time;
    // written past the test harness capture so the line shows up in plain `cargo test` logs
    let line = format!(
        "criterion {id:>2} {name}: {} | {detail} | runtime {:.2}s (budget {}s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    ok
}

#[test]
fn criterion_01_eigenvalue_ladder() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let counts: Vec<usize> = (0..=4).map(|k| homogeneous_monomials(2, 1, k).len()).collect();
    let ev = numeric_generator_eigenvalues(&g, None, 4).unwrap();
    let mut expected = Vec::new();
    for (k, c) in counts.iter().enumerate() {
        expected.extend(std::iter::repeat_n(-(k as f64), *c));
    }
    let err = ev.iter().zip(&expected).map(|(a, b)| (a - Complex64::new(*b, 0.0)).norm()).fold(0.0, f64::max);
    let pass = counts == vec![1, 2, 4, 6, 9] && ev.len() == expected.len() && err < 1e-10;
    assert!(report(
        1,
        "eigenvalue ladder",
        pass,
        format!("multiplicities {counts:?}, max eigenvalue error {err:.2e} (tol 1e-10)"),
        start.elapsed(),
        Duration::from_secs(1)
    ));
}

#[test]
fn criterion_02_isospectrality() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let psis: Vec<(&str, Option<LevyExponent>)> = vec![
        ("none", None),
        ("gaussian", Some(gaussian(1.0))),
        ("compound poisson", Some(compound_poisson(3.0, 0.0, 1.0))),
        ("gaussian+drift", Some(gaussian_drift(1.0, 0.7))),
    ];
    let base_ev = numeric_generator_eigenvalues(&g, None, 4).unwrap();
    let base_geo = polynomial_spectrum(&g, None, 4).unwrap();
    let mut worst: f64 = 0.0;
    let mut geo_ok = true;
    for (name, psi) in &psis {
        let ev = numeric_generator_eigenvalues(&g, psi.as_ref(), 4).unwrap();
        let d = ev.iter().zip(&base_ev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(d);
        let geo = polynomial_spectrum(&g, psi.as_ref(), 4).unwrap();
        if geo != base_geo {
            println!("  geometric multiplicities differ for {name}: {geo:?}");
            geo_ok = false;
        }
    }
    assert!(report(
        2,
        "isospectrality",
        geo_ok && worst < 1e-8,
        format!("max eigenvalue gap {worst:.2e} (tol 1e-8), multiplicities {base_geo:?}"),
        start.elapsed(),
        Duration::from_secs(5)
    ));
}

#[test]
fn criterion_03_marginal_identity() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let t = 1.0;
    let axes = vec![
        Axis::new("h1", -2.0, 2.0, 5).unwrap(),
        Axis::new("h2", -1.5, 1.5, 4).unwrap(),
        Axis::new("v1", -14.0, 14.0, 281).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for psi in [None, Some(gaussian(1.0))] {
        let slice = match &psi {
            None => KernelSlice::heat(&g, t).unwrap(),
            Some(p) => KernelSlice::perturbed(&g, p, t).unwrap(),
        };
        let grid = invert_to_grid(&slice, &axes).unwrap();
        let w = carnot::quad::trapezoid_weights(281, axes[2].step());
        for i in 0..5 {
            for j in 0..4 {
                let mut s = 0.0;
                for (k, wk) in w.iter().enumerate().take(281) {
                    s += wk * grid.get(&[i, j, k]);
                }
                let (x, y) = (axes[0].node(i), axes[1].node(j));
                let exact = (4.0 * std::f64::consts::PI * t).recip() * (-(x * x + y * y) / (4.0 * t)).exp();
                worst = worst.max((s - exact).abs());
            }
        }
    }
    assert!(report(
        3,
        "marginal identity",
        worst < 1e-5,
        format!("max |∫q dv − Euclidean heat| = {worst:.2e} over 20 nodes × 2 exponents (tol 1e-5)"),
        start.elapsed(),
        Duration::from_secs(30)
    ));
}

#[test]
fn criterion_04_kernel_semigroup() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let axes = vec![
        Axis::new("h1", -5.0, 5.0, 41).unwrap(),
        Axis::new("h2", -5.0, 5.0, 41).unwrap(),
        Axis::new("v1", -4.0, 4.0, 41).unwrap(),
    ];
    let half = invert_to_grid(&KernelSlice::heat(&g, 0.5).unwrap(), &axes).unwrap();
    let one = invert_to_grid(&KernelSlice::heat(&g, 1.0).unwrap(), &axes).unwrap();
    let conv = group_convolve(&g, &half, &half, 15.0, 0.2).unwrap();
    let err = conv.values.iter().zip(&one.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(report(
        4,
        "kernel semigroup",
        err < 1e-3,
        format!("‖q_1 − q_½ ⋆ q_½‖_∞ = {err:.2e} on 41³ grid (tol 1e-3)"),
        start.elapsed(),
        Duration::from_secs(300)
    ));
}

#[test]
fn criterion_05_mc_vs_kernel() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let panel: Vec<Vec<f64>> = vec![vec![0.5], vec![1.0], vec![2.0]];
    let mut worst: f64 = 0.0;
    for (seed, psi) in [(11u64, None), (12u64, Some(compound_poisson(3.0, 0.2, 0.5)))] {
        let cfg = PathConfig { t: 1.0, steps_per_unit: 4096, paths: 100_000, seed, antithetic: false };
        let samples = simulate_levy_on_g(&g, psi.as_ref(), &cfg).unwrap();
        let est = estimate_charfn(&samples.vertical(), &panel, false).unwrap();
        let slice = match &psi {
            None => KernelSlice::heat(&g, 1.0).unwrap(),
            Some(p) => KernelSlice::perturbed(&g, p, 1.0).unwrap(),
        };
        let exact: Vec<Complex64> = panel.iter().map(|l| slice.vertical_charfn(l).unwrap()).collect();
        worst = worst.max(est.max_z(&exact));
    }
    assert!(report(
        5,
        "MC vs kernel",
        worst < 3.0,
        format!("max |empirical − kernel| / stderr = {worst:.2} (tol 3)"),
        start.elapsed(),
        Duration::from_secs(60)
    ));
}

fn poly_classes(n: usize, m: usize, cap: u32, h_only: bool, v_only: bool) -> Vec<RatPoly> {
    monomial_basis(n, m, cap)
        .into_iter()
        .filter(|e| !(h_only && e[n..].iter().any(|x| *x > 0)) && !(v_only && e[..n].iter().any(|x| *x > 0)))
        .map(|e| RatPoly::monomial(n, m, e, Rational::one()))
        .collect()
}

#[test]
fn criterion_06_intertwining() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let psis: Vec<Option<LevyExponent>> =
        vec![None, Some(gaussian_drift(1.0, 0.7)), Some(compound_poisson(3.0, 0.4, 1.0))];
    let t = 0.5;
    let mut exact_worst: f64 = 0.0;
    let mut quad_worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut record = |r: carnot::semigroup::IntertwinerReport, exact: bool| {
        if exact {
            exact_worst = exact_worst.max(r.residual);
        } else {
            quad_worst = quad_worst.max(r.residual);
        }
        if !r.pass {
            failures.push(format!("{} on {}: {:.2e}", r.pair, r.test_function, r.residual));
        }
    };
    for psi in &psis {
        let p = psi.as_ref();
        for q in poly_classes(2, 1, 4, true, false) {
            record(intertwine_residual(Pair::Pi, &g, p, t, &TestFunction::Polynomial(q)).unwrap(), true);
        }
        for q in poly_classes(2, 1, 4, false, false) {
            for pair in [Pair::Lambda, Pair::Gamma, Pair::Lp] {
                record(intertwine_residual(pair, &g, p, t, &TestFunction::Polynomial(q.clone())).unwrap(), true);
            }
        }
        for q in poly_classes(2, 1, 8, false, true) {
            record(intertwine_residual(Pair::Tbk, &g, p, t, &TestFunction::Polynomial(q)).unwrap(), true);
        }
        let tbk = TestFunction::Gaussian { center: vec![0.3], width: 0.8 };
        record(intertwine_residual(Pair::Tbk, &g, p, t, &tbk).unwrap(), false);
    }
    let pi_g = TestFunction::Gaussian { center: vec![0.4, -0.3], width: 0.9 };
    record(intertwine_residual(Pair::Pi, &g, None, t, &pi_g).unwrap(), false);
    let gd = gaussian_drift(1.0, 0.7);
    record(intertwine_residual(Pair::Pi, &g, Some(&gd), t, &pi_g).unwrap(), false);
    let lam_g = TestFunction::Gaussian { center: vec![0.3, -0.2, 0.4], width: 1.0 };
    record(intertwine_residual(Pair::Lambda, &g, None, t, &lam_g).unwrap(), false);
    record(intertwine_residual(Pair::Lambda, &g, Some(&gd), t, &lam_g).unwrap(), false);
    for (lambda, beta) in [(1.0, 0u32), (1.0, 2), (-2.5, 1)] {
        let mode = TestFunction::Mode { lambda: vec![lambda], beta: vec![beta] };
        record(intertwine_residual(Pair::Mbeta, &g, None, t, &mode).unwrap(), false);
    }
    for f in &failures {
        println!("  {f}");
    }
    assert!(report(
        6,
        "intertwining residuals",
        failures.is_empty() && exact_worst < 1e-12 && quad_worst < 1e-4,
        format!("exact paths {exact_worst:.2e} (tol 1e-12), quadrature paths {quad_worst:.2e} (tol 1e-4)"),
        start.elapsed(),
        Duration::from_secs(60)
    ));
}

#[test]
fn criterion_07_coeigenfunction() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let axes = default_coeigen_axes(2).unwrap();
    let mut worst: f64 = 0.0;
    for psi in [None, Some(gaussian(1.0))] {
        for t in [0.25, 0.5] {
            for test in [CoeigenTest::Linear, CoeigenTest::Bump { center: 0.5, radius: 1.0 }] {
                let r = coeigen_residual(&g, psi.as_ref(), &[1], t, &test, &axes, 1e-3).unwrap();
                worst = worst.max(r.residual);
            }
        }
    }
    assert!(report(
        7,
        "co-eigenfunction relation",
        worst < 1e-3,
        format!("max relative weak-form error {worst:.2e} (tol 1e-3)"),
        start.elapsed(),
        Duration::from_secs(120)
    ));
}

#[test]
fn criterion_08_plancherel() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let two_pi = 2.0 * std::f64::consts::PI;
    // fixed-λ isometry on off-centre anisotropic Gaussians
    let mut iso_worst: f64 = 0.0;
    for (lambda, (x0, y0, sx, sy)) in [(1.3, (0.3, -0.2, 1.0, 0.7)), (-0.6, (0.0, 0.5, 1.4, 0.9)), (4.0, (0.2, 0.1, 0.5, 0.6))] {
        let fr = frame_at(&g, &[lambda]).unwrap();
        let f = move |x: f64, y: f64| {
            Complex64::new((-(x - x0) * (x - x0) / (2.0 * sx * sx) - (y - y0) * (y - y0) / (2.0 * sy * sy)).exp(), 0.0)
        };
        let w = weyl_matrix(&fr, &[f], 80, WeylOptions::default()).unwrap();
        let lhs = fr.pf / two_pi * w.hs_norm_sq();
        let norm = std::f64::consts::PI * sx * sy;
        iso_worst = iso_worst.max((lhs - norm).abs() / norm);
    }
    // global: f(z, v) = e^{−|z|²/2} · e^{−v²/(2w²)} cos(κv)
    let (w, kappa) = (2.0, 3.0);
    let bhat2 = |l: f64| {
        let c = w * two_pi.sqrt() * 0.5;
        let v = c * ((-0.5 * w * w * (l - kappa).powi(2)).exp() + (-0.5 * w * w * (l + kappa).powi(2)).exp());
        v * v
    };
    let a = |x: f64, y: f64| Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0);
    let (gx, gw) = carnot::quad::gauss_legendre(48);
    let (lo, hi) = (0.4, 7.0);
    let mut rhs = 0.0;
    for (x, wt) in gx.iter().zip(&gw) {
        let l = 0.5 * (hi - lo) * x + 0.5 * (hi + lo);
        let fr = frame_at(&g, &[l]).unwrap();
        let wm = weyl_matrix(&fr, &[a], 48, WeylOptions { check_convergence: false, ..Default::default() }).unwrap();
        rhs += wt * 0.5 * (hi - lo) * bhat2(l) * fr.pf * wm.hs_norm_sq();
    }
    // both signs of λ contribute equally
    rhs *= 2.0 / (two_pi * two_pi);
    let b_norm = w * std::f64::consts::PI.sqrt() * 0.5 * (1.0 + (-kappa * kappa * w * w).exp());
    let lhs = std::f64::consts::PI * b_norm;
    let global = (rhs - lhs).abs() / lhs;
    assert!(report(
        8,
        "Plancherel / Weyl isometry",
        iso_worst < 1e-5 && global < 1e-3,
        format!("fixed-λ isometry {iso_worst:.2e} (tol 1e-5), global Plancherel {global:.2e} (tol 1e-3)"),
        start.elapsed(),
        Duration::from_secs(60)
    ));
}

#[test]
fn criterion_09_stationary_law() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let panel: Vec<Vec<f64>> = vec![vec![0.5], vec![1.0], vec![2.0]];
    let mut worst: f64 = 0.0;
    let x0 = GroupElement::new(vec![1.0, -0.5], vec![0.8]);
    for (seed, psi) in [(21u64, gaussian_drift(0.5, 0.6)), (22u64, compound_poisson(2.0, 0.5, 0.7))] {
        let cfg = PathConfig { t: 10.0, steps_per_unit: 4096, paths: 100_000, seed, antithetic: false };
        let samples = simulate_levy_ou(&g, Some(&psi), &cfg, &x0).unwrap();
        let est = estimate_charfn(&samples.vertical(), &panel, false).unwrap();
        let slice = KernelSlice::invariant(&g, &psi).unwrap();
        let exact: Vec<Complex64> = panel.iter().map(|l| slice.vertical_charfn(l).unwrap()).collect();
        worst = worst.max(est.max_z(&exact));
    }
    assert!(report(
        9,
        "stationary law",
        worst < 3.0,
        format!("max |empirical − invariant charfn| / stderr = {worst:.2} (tol 3)"),
        start.elapsed(),
        Duration::from_secs(120)
    ));
}

#[test]
fn criterion_10_spectrum_description() {
    let _guard = serial();
    let start = Instant::now();
    let g = h1();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut inside = true;
    let mut mins = Vec::new();
    for psi in [gaussian(1.0), compound_poisson(3.0, 0.0, 1.0)] {
        let sup = psi.eval(&[0.0]).re;
        let pts = SpectrumDescription::sample(&g, Some(&psi), 200, 5.0, 4, &mut rng).unwrap();
        inside &= pts.len() == 200 && pts.iter().all(|z| z.re <= sup + 1e-12 && z.im.abs() < 1e-12);
        let mut trend = Vec::new();
        for radius in [1.0, 10.0, 100.0] {
            let pts = SpectrumDescription::sample(&g, Some(&psi), 200, radius, 4, &mut rng).unwrap();
            trend.push(pts.iter().map(|z| z.re).fold(f64::INFINITY, f64::min));
        }
        mins.push(trend);
    }
    let unbounded = mins.iter().all(|t| t[1] < t[0] && t[2] < t[1] && t[2] < -100.0);
    let rays = spectrum_sup_along_rays(&g, None, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
    let near_zero = rays.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = inside && unbounded && near_zero <= 0.0 && near_zero > -1e-2;
    assert!(report(
        10,
        "spectrum description",
        pass,
        format!("all samples in (−∞, ψ(0)]: {inside}; infimum trend {mins:.1?}; ψ=0 ray sup {near_zero:.1e}"),
        start.elapsed(),
        Duration::from_secs(1)
    ));
}

#[test]
fn generator_matrix_dimension_matches_monomials() {
    let gm = generator_matrix(&h1(), None, 4).unwrap();
    assert_eq!(gm.dim(), 22);
}
