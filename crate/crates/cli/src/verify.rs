//! Verification checks shared by the `verify` subcommands.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use carnot::hermite::{weyl_matrix, WeylOptions};
use carnot::kernel::{group_convolve, invert_to_grid, Axis, KernelSlice};
use carnot::mc::{estimate_charfn, simulate_levy_on_g, simulate_levy_ou, PathConfig};
use carnot::poly::{homogeneous_monomials, monomial_basis, Rational};
use carnot::semigroup::{
    apply_to_polynomial, coeigen_residual, default_coeigen_axes, eigen_decomposition, intertwine_residual,
    numeric_generator_eigenvalues, polynomial_spectrum, spectrum_sup_along_rays, CoeigenTest, IntertwinerReport, Pair,
    SemigroupKind, SemigroupOperator, TestFunction,
};
use carnot::spectral::SpectrumDescription;
use carnot::{frame_at, CarnotError, CarnotGroup, GroupElement, LevyExponent, RatPoly};
use clap::ValueEnum;
use num_complex::Complex64;
use rand::SeedableRng;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Desk-scale checks, under a minute on one core.
    Quick,
    /// Acceptance-scale grids, path counts and degree caps.
    Full,
}

pub struct Ctx {
    pub g: CarnotGroup,
    pub psi: Option<LevyExponent>,
    pub seed: u64,
}

impl Ctx {
    fn psi(&self) -> Option<&LevyExponent> {
        self.psi.as_ref()
    }

    /// Polynomial calculus needs exponential moments of the jump measure.
    fn no_moments(&self) -> bool {
        self.psi.as_ref().is_some_and(|p| !p.flags().in_n_exp)
    }

    fn lambda_along_first(&self, l: f64) -> Vec<f64> {
        (0..self.g.m()).map(|i| if i == 0 { l } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// "pass", "fail" or "skipped: <reason>"
    pub status: String,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub data: Value,
}

impl CheckResult {
    pub fn failed(&self) -> bool {
        self.status == "fail"
    }
}

/// What a check body reports back.
struct Outcome {
    pass: bool,
    residual: Option<f64>,
    tolerance: Option<f64>,
    detail: String,
    data: Value,
}

impl Outcome {
    fn measured(residual: f64, tolerance: f64, detail: String) -> Self {
        Self { pass: residual < tolerance, residual: Some(residual), tolerance: Some(tolerance), detail, data: Value::Null }
    }

    fn with_data(mut self, data: Value) -> Self {
        self.data = data;
        self
    }
}

enum Body {
    Done(Outcome),
    Skip(String),
}

fn run_check(name: &str, f: impl FnOnce() -> carnot::Result<Body>) -> CheckResult {
    let start = Instant::now();
    let (status, o) = match f() {
        Ok(Body::Done(o)) => ((if o.pass { "pass" } else { "fail" }).to_string(), o),
        Ok(Body::Skip(why)) => (format!("skipped: {why}"), empty_outcome(String::new())),
        Err(CarnotError::Unsupported(msg)) => ("skipped: unsupported".to_string(), empty_outcome(msg)),
        Err(e) => ("fail".to_string(), empty_outcome(format!("error: {e}"))),
    };
    log::info!("{name}: {status} {}", o.detail);
    CheckResult {
        name: name.to_string(),
        status,
        residual: o.residual,
        tolerance: o.tolerance,
        detail: o.detail,
        seconds: start.elapsed().as_secs_f64(),
        data: o.data,
    }
}

fn empty_outcome(detail: String) -> Outcome {
    Outcome { pass: false, residual: None, tolerance: None, detail, data: Value::Null }
}

const NO_MOMENTS: &str = "no moments";

/// Eigenvalue ladder {0, −1, …, −cap} with multiplicities dim 𝒫_k, and agreement with ψ = 0.
pub fn eigen(ctx: &Ctx, cap: u32) -> CheckResult {
    run_check("eigen ladder", || {
        if ctx.no_moments() {
            return Ok(Body::Skip(NO_MOMENTS.into()));
        }
        let g = &ctx.g;
        let counts: Vec<usize> = (0..=cap).map(|k| homogeneous_monomials(g.n(), g.m(), k).len()).collect();
        let ev = numeric_generator_eigenvalues(g, ctx.psi(), cap)?;
        let expected: Vec<f64> = counts.iter().enumerate().flat_map(|(k, c)| std::iter::repeat_n(-(k as f64), *c)).collect();
        if ev.len() != expected.len() {
            return Ok(Body::Done(empty_outcome(format!("{} eigenvalues for {} monomials", ev.len(), expected.len()))));
        }
        let ladder = ev.iter().zip(&expected).map(|(a, b)| (a - Complex64::new(*b, 0.0)).norm()).fold(0.0, f64::max);
        let base = numeric_generator_eigenvalues(g, None, cap)?;
        let gap = ev.iter().zip(&base).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let spec = polynomial_spectrum(g, ctx.psi(), cap)?;
        let base_spec = polynomial_spectrum(g, None, cap)?;
        let algebraic_ok = spec.iter().map(|(_, a, _)| *a).eq(counts.iter().copied());
        let spaces = eigen_decomposition(g, ctx.psi(), cap, 1.0)?;
        let spans = spaces.iter().map(|s| s.basis.len()).eq(counts.iter().copied());
        // a triangular generator with ψ keeps its eigenvalues only up to rounding in the shift
        let tol = if ctx.psi.is_some() { 1e-8 } else { 1e-10 };
        let residual = ladder.max(gap);
        let mut o = Outcome::measured(
            residual,
            tol,
            format!("ladder error {ladder:.2e}, gap to ψ = 0 {gap:.2e}, multiplicities {counts:?}"),
        );
        o.pass &= algebraic_ok && spans && spec == base_spec;
        let mult: Vec<Value> =
            spec.iter().map(|(k, a, gm)| json!({"eigenvalue": -(*k as i64), "algebraic": a, "geometric": gm})).collect();
        Ok(Body::Done(o.with_data(json!({"degree": cap, "multiplicities": mult}))))
    })
}

fn marginal_axes(g: &CarnotGroup, t: f64) -> carnot::Result<Option<Vec<Axis>>> {
    let n = g.n();
    if n > 6 {
        return Ok(None);
    }
    let mut axes = Vec::with_capacity(n + 1);
    for i in 0..n {
        axes.push(if n == 2 {
            let (r, c) = [(2.0, 5), (1.5, 4)][i];
            Axis::new(format!("h{}", i + 1), -r, r, c)?
        } else {
            Axis::new(format!("h{}", i + 1), -1.5, 1.5, 3)?
        });
    }
    let half = 14.0 * t.max(1.0);
    let count = 2 * (half / 0.1).round() as usize + 1;
    axes.push(Axis::new("v1", -half, half, count)?);
    Ok(Some(axes))
}

/// ∫ q^ψ_t(h, v) dv against (4πt)^{−n/2} e^{−|h|²/4t}.
pub fn marginal(ctx: &Ctx, t: f64, artifacts: Option<&Path>) -> CheckResult {
    run_check("marginal identity", || {
        let g = &ctx.g;
        if g.m() != 1 {
            return Ok(Body::Skip("real-space inversion needs m = 1".into()));
        }
        let Some(axes) = marginal_axes(g, t)? else {
            return Ok(Body::Skip("horizontal dimension too large for a tensor grid".into()));
        };
        let n = g.n();
        let heat = |h: &[f64]| (4.0 * PI * t).powf(-(n as f64) / 2.0) * (-h.iter().map(|x| x * x).sum::<f64>() / (4.0 * t)).exp();
        let mut slices = vec![("heat", KernelSlice::heat(g, t)?)];
        if let Some(p) = ctx.psi() {
            slices.push(("perturbed", KernelSlice::perturbed(g, p, t)?));
        }
        let mut worst: f64 = 0.0;
        let mut notes = Vec::new();
        for (name, slice) in &slices {
            let heavy = *name == "perturbed" && ctx.no_moments();
            if heavy {
                // heavy vertical tails: read the marginal off the zero v-frequency instead of a truncated quadrature
                let h_axes = &axes[..n];
                let count: usize = h_axes.iter().map(|a| a.count).product();
                for flat in 0..count {
                    let mut rem = flat;
                    let mut h = vec![0.0; n];
                    for i in (0..n).rev() {
                        h[i] = h_axes[i].node(rem % h_axes[i].count);
                        rem /= h_axes[i].count;
                    }
                    worst = worst.max((slice.slice(&h, &[0.0])?.re - heat(&h)).abs());
                }
                notes.push(format!("{name}: zero-frequency slice"));
                continue;
            }
            let grid = invert_to_grid(slice, &axes)?;
            if let (Some(dir), true) = (artifacts, slices.len() == 1 || *name == "perturbed") {
                crate::io::write_grid(&grid, &dir.join("marginal_density.csv"), false)
                    .map_err(|e| CarnotError::Internal(format!("{e:?}")))?;
            }
            let v = &axes[n];
            let w = carnot::quad::trapezoid_weights(v.count, v.step());
            for block in 0..grid.len() / v.count {
                let s: f64 = (0..v.count).map(|k| w[k] * grid.values[block * v.count + k]).sum();
                let (h, _) = grid.node(block * v.count);
                worst = worst.max((s - heat(&h)).abs());
            }
            notes.push(format!("{name}: v-quadrature on {} nodes", v.count));
        }
        Ok(Body::Done(Outcome::measured(worst, 1e-5, format!("max abs error {worst:.2e} at t = {t} ({})", notes.join("; ")))))
    })
}

fn monomials(n: usize, m: usize, cap: u32, filter: impl Fn(&[u32]) -> bool) -> Vec<RatPoly> {
    monomial_basis(n, m, cap)
        .into_iter()
        .filter(|e| filter(e))
        .map(|e| RatPoly::monomial(n, m, e, Rational::from_integer(1.into())))
        .collect()
}

/// P_{t+s} = P_t P_s on polynomials for all four semigroups; q_1 = q_½ ⋆ q_½ on a grid.
pub fn semigroup(ctx: &Ctx, profile: Profile) -> Vec<CheckResult> {
    let g = &ctx.g;
    let poly = run_check("semigroup law on polynomials", || {
        if ctx.no_moments() {
            return Ok(Body::Skip(NO_MOMENTS.into()));
        }
        let cap = if profile == Profile::Quick { 3 } else { 4 };
        let zero = LevyExponent::zero(g.m());
        let psi = ctx.psi().unwrap_or(&zero);
        // dyadic times keep the exact path free of rounding in t
        let (t, s) = (0.25, 0.5);
        let mut worst: f64 = 0.0;
        for kind in [SemigroupKind::Heat, SemigroupKind::LevyHeat, SemigroupKind::Ou, SemigroupKind::LevyOu] {
            let op = |time: f64| SemigroupOperator::new(kind, g, Some(psi), time);
            let (both, first, second) = (op(t + s)?, op(t)?, op(s)?);
            for p in monomials(g.n(), g.m(), cap, |_| true) {
                let once = apply_to_polynomial(&both, &p)?;
                let twice = apply_to_polynomial(&second, &apply_to_polynomial(&first, &p)?.to_rational())?;
                let scale = once.terms().map(|(_, c)| c.abs()).fold(1.0, f64::max);
                worst = worst.max(once.max_abs_diff(&twice) / scale);
            }
        }
        Ok(Body::Done(Outcome::measured(worst, 1e-12, format!("relative coefficient gap {worst:.2e} on graded degree ≤ {cap}"))))
    });
    let kernel = run_check("semigroup law on heat kernels", || {
        if g.m() != 1 {
            return Ok(Body::Skip("grid convolution needs m = 1".into()));
        }
        if g.n() != 2 && profile == Profile::Quick {
            return Ok(Body::Skip("tensor grid beyond the quick budget".into()));
        }
        let (count, dl) = if profile == Profile::Quick { (33, 0.25) } else { (41, 0.2) };
        let mut axes: Vec<Axis> = (0..g.n()).map(|i| Axis::new(format!("h{}", i + 1), -5.0, 5.0, count)).collect::<carnot::Result<_>>()?;
        axes.push(Axis::new("v1", -4.0, 4.0, count)?);
        let half = invert_to_grid(&KernelSlice::heat(g, 0.5)?, &axes)?;
        let one = invert_to_grid(&KernelSlice::heat(g, 1.0)?, &axes)?;
        let conv = group_convolve(g, &half, &half, 15.0, dl)?;
        let err = conv.values.iter().zip(&one.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(Body::Done(Outcome::measured(err, 1e-3, format!("‖q_1 − q_½ ⋆ q_½‖_∞ = {err:.2e} on a {count}^{} grid", g.n() + 1))))
    });
    vec![poly, kernel]
}

struct Tally {
    exact: f64,
    quadrature: f64,
    reports: Vec<IntertwinerReport>,
    skipped: Vec<String>,
    errors: Vec<String>,
}

impl Tally {
    fn record(&mut self, r: carnot::Result<IntertwinerReport>, exact: bool) {
        match r {
            Ok(r) => {
                if exact {
                    self.exact = self.exact.max(r.residual);
                } else {
                    self.quadrature = self.quadrature.max(r.residual);
                }
                self.reports.push(r);
            }
            Err(CarnotError::Unsupported(msg)) => self.skipped.push(msg),
            Err(e) => self.errors.push(e.to_string()),
        }
    }
}

/// Sup residuals of one intertwining relation over polynomial (exact) and Gaussian or mode (quadrature) test functions.
pub fn intertwine(ctx: &Ctx, pair: Pair, t: f64, profile: Profile) -> CheckResult {
    let name = format!("intertwining {}", format!("{pair:?}").to_lowercase());
    run_check(&name, || {
        let g = &ctx.g;
        let (n, m) = (g.n(), g.m());
        let psi = ctx.psi();
        let cap = if profile == Profile::Quick { 3 } else { 4 };
        let mut tally = Tally { exact: 0.0, quadrature: 0.0, reports: Vec::new(), skipped: Vec::new(), errors: Vec::new() };
        let polys: Vec<RatPoly> = match pair {
            Pair::Pi => monomials(n, m, cap, |e| e[n..].iter().all(|x| *x == 0)),
            Pair::Lambda | Pair::Gamma | Pair::Lp => monomials(n, m, cap, |_| true),
            Pair::Tbk => monomials(n, m, 2 * cap, |e| e[..n].iter().all(|x| *x == 0)),
            Pair::Mbeta => Vec::new(),
        };
        if ctx.no_moments() && !polys.is_empty() {
            tally.skipped.push(format!("polynomial class: {NO_MOMENTS}"));
        } else {
            for p in polys {
                tally.record(intertwine_residual(pair, g, psi, t, &TestFunction::Polynomial(p)), true);
            }
        }
        let pad = |base: &[f64], len: usize| (0..len).map(|i| base.get(i).copied().unwrap_or(0.0)).collect::<Vec<f64>>();
        let quadrature: Vec<TestFunction> = match pair {
            Pair::Pi => vec![TestFunction::Gaussian { center: pad(&[0.4, -0.3], n), width: 0.9 }],
            Pair::Lambda => {
                let mut c = pad(&[0.3, -0.2], n);
                c.extend(pad(&[0.4], m));
                vec![TestFunction::Gaussian { center: c, width: 1.0 }]
            }
            Pair::Tbk => vec![TestFunction::Gaussian { center: vec![0.3; m], width: 0.8 }],
            Pair::Mbeta => {
                let d = g.d();
                [(1.0, 0u32), (1.0, 2), (-2.5, 1)]
                    .iter()
                    .map(|(l, b)| TestFunction::Mode { lambda: ctx.lambda_along_first(*l), beta: pad(&[*b as f64], d).iter().map(|x| *x as u32).collect() })
                    .collect()
            }
            Pair::Gamma | Pair::Lp => Vec::new(),
        };
        for q in &quadrature {
            tally.record(intertwine_residual(pair, g, psi, t, q), false);
        }
        if tally.reports.is_empty() && tally.errors.is_empty() {
            return Ok(Body::Skip(tally.skipped.join("; ")));
        }
        let pass = tally.errors.is_empty() && tally.reports.iter().all(|r| r.pass);
        let mut detail = format!(
            "{} test functions, exact paths {:.2e} (tol {:.0e}), quadrature paths {:.2e} (tol {:.0e})",
            tally.reports.len(),
            tally.exact,
            carnot::semigroup::EXACT_TOL,
            tally.quadrature,
            carnot::semigroup::QUADRATURE_TOL
        );
        for s in &tally.skipped {
            let _ = write!(detail, "; skipped: {s}");
        }
        for e in &tally.errors {
            let _ = write!(detail, "; error: {e}");
        }
        let worst_ratio = tally.reports.iter().map(|r| r.residual / r.tolerance).fold(0.0, f64::max);
        Ok(Body::Done(Outcome {
            pass,
            residual: Some(worst_ratio),
            tolerance: Some(1.0),
            detail,
            data: json!({"reports": tally.reports}),
        }))
    })
}

/// Weak-form co-eigenfunction relation for J^ψ_β.
pub fn coeigen(ctx: &Ctx, beta: u32, times: &[f64], tests: &[CoeigenTest]) -> CheckResult {
    run_check(&format!("co-eigenfunction beta={beta}"), || {
        let g = &ctx.g;
        if g.m() != 1 {
            return Ok(Body::Skip("the weak form is implemented for m = 1".into()));
        }
        let axes = default_coeigen_axes(g.n())?;
        let mut reports = Vec::new();
        let mut skipped = Vec::new();
        for test in tests {
            if ctx.no_moments() && matches!(test, CoeigenTest::Linear) {
                skipped.push(format!("linear test: {NO_MOMENTS}"));
                continue;
            }
            for t in times {
                reports.push(coeigen_residual(g, ctx.psi(), &[beta], *t, test, &axes, 1e-3)?);
            }
        }
        if reports.is_empty() {
            return Ok(Body::Skip(skipped.join("; ")));
        }
        let worst = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
        let mut detail = format!("max relative weak-form error {worst:.2e} over {} cases", reports.len());
        for s in &skipped {
            let _ = write!(detail, "; skipped: {s}");
        }
        Ok(Body::Done(Outcome::measured(worst, 1e-3, detail).with_data(json!({"reports": reports}))))
    })
}

/// Weyl isometry at fixed λ, and global Plancherel for a separable f(z, v) = a(z)·b(v) when m = 1 and k = 0.
pub fn plancherel(ctx: &Ctx, n_trunc: usize) -> CheckResult {
    run_check("plancherel", || {
        let g = &ctx.g;
        let two_pi = 2.0 * PI;
        let gaussians = [(0.3, -0.2, 1.0, 0.7), (0.0, 0.5, 1.4, 0.9), (0.2, 0.1, 0.5, 0.6)];
        let mut iso = Vec::new();
        let mut iso_worst: f64 = 0.0;
        for (l, (x0, y0, sx, sy)) in [1.3, -0.6, 4.0].into_iter().zip(gaussians) {
            let fr = frame_at(g, &ctx.lambda_along_first(l))?;
            if !fr.is_generic() {
                continue;
            }
            let f = move |x: f64, y: f64| {
                Complex64::new((-(x - x0) * (x - x0) / (2.0 * sx * sx) - (y - y0) * (y - y0) / (2.0 * sy * sy)).exp(), 0.0)
            };
            let factors = vec![f; fr.d];
            let w = weyl_matrix(&fr, &factors, n_trunc, WeylOptions::default())?;
            let lhs = fr.pf / two_pi.powi(fr.d as i32) * w.hs_norm_sq();
            let rhs = (PI * sx * sy).powi(fr.d as i32);
            let rel = (lhs - rhs).abs() / rhs;
            iso_worst = iso_worst.max(rel);
            iso.push(json!({"lambda": fr.lambda, "weighted_hs_norm": lhs, "l2_norm_sq": rhs, "relative_error": rel}));
        }
        if iso.is_empty() {
            return Ok(Body::Skip("no generic λ along the first axis".into()));
        }
        let mut data = json!({"N": n_trunc, "isometry": iso});
        let mut global_err = 0.0;
        let mut detail = format!("fixed-λ isometry {iso_worst:.2e} (tol 1e-5)");
        if g.m() == 1 && g.k() == 0 {
            let d = g.d();
            // b(v) = e^{−v²/(2w²)} cos(κv)
            let (w, kappa) = (2.0, 3.0);
            let bhat2 = |l: f64| {
                let c = w * two_pi.sqrt() * 0.5;
                let v = c * ((-0.5 * w * w * (l - kappa).powi(2)).exp() + (-0.5 * w * w * (l + kappa).powi(2)).exp());
                v * v
            };
            let a = |x: f64, y: f64| Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0);
            let factors = vec![a; d];
            let (gx, gw) = carnot::quad::gauss_legendre(48);
            let (lo, hi) = (0.4, 7.0);
            let mut rhs = 0.0;
            for (x, wt) in gx.iter().zip(&gw) {
                let l = 0.5 * (hi - lo) * x + 0.5 * (hi + lo);
                let fr = frame_at(g, &[l])?;
                let wm = weyl_matrix(&fr, &factors, n_trunc, WeylOptions { check_convergence: false, ..Default::default() })?;
                rhs += wt * 0.5 * (hi - lo) * bhat2(l) * fr.pf * wm.hs_norm_sq();
            }
            // both signs of λ contribute equally
            rhs *= 2.0 / two_pi.powi(d as i32 + 1);
            let b_norm = w * PI.sqrt() * 0.5 * (1.0 + (-kappa * kappa * w * w).exp());
            let lhs = PI.powi(d as i32) * b_norm;
            global_err = (rhs - lhs).abs() / lhs;
            data["global"] = json!({"l2_norm_sq": lhs, "plancherel_integral": rhs, "relative_error": global_err});
            let _ = write!(detail, ", global Plancherel {global_err:.2e} (tol 1e-3)");
        } else {
            data["global"] = json!("skipped: needs m = 1 and a trivial radical");
        }
        let pass = iso_worst < 1e-5 && global_err < 1e-3;
        Ok(Body::Done(Outcome { pass, residual: Some(iso_worst.max(global_err)), tolerance: None, detail, data }))
    })
}

fn panel(ctx: &Ctx) -> Vec<Vec<f64>> {
    [0.5, 1.0, 2.0].iter().map(|l| ctx.lambda_along_first(*l)).collect()
}

fn charfn_artifact(dir: &Path, file: &str, panel: &[Vec<f64>], est: &carnot::mc::CharFnEstimate, exact: &[Complex64]) -> carnot::Result<()> {
    let mut s = String::from("lambda,re,im,stderr,exact_re,exact_im\n");
    for i in 0..panel.len() {
        let l: Vec<String> = panel[i].iter().map(|x| x.to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            l.join(";"),
            est.estimate[i].re,
            est.estimate[i].im,
            est.stderr[i],
            exact[i].re,
            exact[i].im
        );
    }
    std::fs::write(dir.join(file), s).map_err(|e| CarnotError::Internal(e.to_string()))
}

/// Monte Carlo E e^{i⟨λ, v(t)⟩} against the perturbed kernel's characteristic function.
pub fn mc_levy(ctx: &Ctx, profile: Profile, artifacts: Option<&Path>) -> CheckResult {
    run_check("MC vs kernel", || {
        let (steps, paths) = if profile == Profile::Quick { (1024, 20_000) } else { (4096, 100_000) };
        let cfg = PathConfig { t: 1.0, steps_per_unit: steps, paths, seed: ctx.seed, antithetic: false };
        let samples = simulate_levy_on_g(&ctx.g, ctx.psi(), &cfg)?;
        let panel = panel(ctx);
        let est = estimate_charfn(&samples.vertical(), &panel, false)?;
        let slice = match ctx.psi() {
            Some(p) => KernelSlice::perturbed(&ctx.g, p, 1.0)?,
            None => KernelSlice::heat(&ctx.g, 1.0)?,
        };
        let exact: Vec<Complex64> = panel.iter().map(|l| slice.vertical_charfn(l)).collect::<carnot::Result<_>>()?;
        if let Some(dir) = artifacts {
            charfn_artifact(dir, "mc_charfn.csv", &panel, &est, &exact)?;
        }
        let z = est.max_z(&exact);
        Ok(Body::Done(Outcome::measured(z, 3.0, format!("max |empirical − kernel| / stderr = {z:.2} with {paths} paths"))))
    })
}

/// Lévy–OU simulation at a long horizon against the invariant law.
pub fn stationary(ctx: &Ctx, profile: Profile, artifacts: Option<&Path>) -> CheckResult {
    run_check("stationary law", || {
        let zero = LevyExponent::zero(ctx.g.m());
        let psi = ctx.psi().unwrap_or(&zero);
        if !psi.flags().in_n_log {
            return Ok(Body::Skip("no logarithmic moment, no invariant law".into()));
        }
        let (t, steps, paths) = if profile == Profile::Quick { (6.0, 512, 20_000) } else { (10.0, 4096, 100_000) };
        let cfg = PathConfig { t, steps_per_unit: steps, paths, seed: ctx.seed.wrapping_add(1), antithetic: false };
        let (n, m) = (ctx.g.n(), ctx.g.m());
        let x0 = GroupElement::new((0..n).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect(), vec![0.8; m]);
        let samples = simulate_levy_ou(&ctx.g, Some(psi), &cfg, &x0)?;
        let panel = panel(ctx);
        let est = estimate_charfn(&samples.vertical(), &panel, false)?;
        let slice = KernelSlice::invariant(&ctx.g, psi)?;
        let exact: Vec<Complex64> = panel.iter().map(|l| slice.vertical_charfn(l)).collect::<carnot::Result<_>>()?;
        if let Some(dir) = artifacts {
            charfn_artifact(dir, "stationary_charfn.csv", &panel, &est, &exact)?;
        }
        let z = est.max_z(&exact);
        Ok(Body::Done(Outcome::measured(z, 3.0, format!("max |empirical − invariant| / stderr = {z:.2} at t = {t}"))))
    })
}

/// Sampled spectrum points lie left of Re ψ(0), reach arbitrarily far left, and approach 0 along λ → 0 when ψ = 0.
pub fn spectrum(ctx: &Ctx) -> CheckResult {
    run_check("spectrum description", || {
        let g = &ctx.g;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ctx.seed);
        let sup = ctx.psi().map(|p| p.eval(&vec![0.0; g.m()]).re).unwrap_or(0.0);
        let pts = SpectrumDescription::sample(g, ctx.psi(), 200, 5.0, 4, &mut rng)?;
        let excess = pts.iter().map(|z| z.re - sup).fold(f64::NEG_INFINITY, f64::max);
        let mut trend = Vec::new();
        for radius in [1.0, 10.0, 100.0] {
            let pts = SpectrumDescription::sample(g, ctx.psi(), 200, radius, 4, &mut rng)?;
            trend.push(pts.iter().map(|z| z.re).fold(f64::INFINITY, f64::min));
        }
        let unbounded = trend[1] < trend[0] && trend[2] < trend[1] && trend[2] < -100.0;
        let mut pass = excess <= 1e-12 && unbounded;
        let mut detail = format!("max Re excess over ψ(0) {excess:.1e}; infimum trend {trend:.1?}");
        if ctx.psi.is_none() {
            let rays = spectrum_sup_along_rays(g, None, &[1e-1, 1e-2, 1e-3, 1e-4])?;
            let near = rays.values().cloned().fold(f64::NEG_INFINITY, f64::max);
            pass &= near <= 0.0 && near > -1e-2;
            let _ = write!(detail, "; sup along λ → 0 rays {near:.1e}");
        }
        Ok(Body::Done(Outcome { pass, residual: Some(excess.max(0.0)), tolerance: Some(1e-12), detail, data: Value::Null }))
    })
}

pub fn all(ctx: &Ctx, profile: Profile, artifacts: Option<&Path>) -> Vec<CheckResult> {
    let quick = profile == Profile::Quick;
    let mut out = vec![eigen(ctx, if quick { 3 } else { 4 }), marginal(ctx, 1.0, artifacts)];
    out.extend(semigroup(ctx, profile));
    for pair in [Pair::Pi, Pair::Lambda, Pair::Gamma, Pair::Lp, Pair::Tbk, Pair::Mbeta] {
        out.push(intertwine(ctx, pair, 0.5, profile));
    }
    let bump = CoeigenTest::Bump { center: 0.5, radius: 1.0 };
    let (times, tests): (&[f64], Vec<CoeigenTest>) = if quick {
        (&[0.5], vec![if ctx.no_moments() { bump } else { CoeigenTest::Linear }])
    } else {
        (&[0.25, 0.5], vec![CoeigenTest::Linear, bump])
    };
    out.push(coeigen(ctx, 1, times, &tests));
    out.push(plancherel(ctx, if quick { 32 } else { 48 }));
    out.push(mc_levy(ctx, profile, artifacts));
    out.push(stationary(ctx, profile, artifacts));
    out.push(spectrum(ctx));
    out
}
