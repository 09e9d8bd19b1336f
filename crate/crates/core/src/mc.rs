//! Monte Carlo paths on G: horizontal Brownian motion with its stochastic area, the
//! pathwise Lévy process X^ψ, and the Lévy–OU process.
//!
//! Brownian convention: E[B_i(t)²] = 2t per coordinate (generator Δ_H = Σ Z_i²).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::group::{dilate_unchecked, CarnotGroup, GroupElement};
use crate::levy::LevyExponent;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub t: f64,
    pub steps_per_unit: usize,
    pub paths: usize,
    pub seed: u64,
    /// Paths 2i and 2i+1 use negated Brownian increments.
    pub antithetic: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { t: 1.0, steps_per_unit: 4096, paths: 10_000, seed: 0, antithetic: false }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return arg("horizon must be finite and nonnegative");
        }
        if !self.steps_per_unit.is_power_of_two() {
            return arg(format!("steps per unit time must be a power of two, got {}", self.steps_per_unit));
        }
        if self.paths < 100 {
            return arg(format!("need at least 100 paths, got {}", self.paths));
        }
        if self.antithetic && self.paths % 2 == 1 {
            return arg("antithetic sampling needs an even path count");
        }
        Ok(())
    }

    fn steps_for(&self, horizon: f64) -> usize {
        ((horizon * self.steps_per_unit as f64).ceil() as usize).max(1)
    }
}

/// Terminal samples, paired consecutively when antithetic.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub points: Vec<GroupElement>,
    pub antithetic: bool,
}

impl SampleSet {
    pub fn horizontal(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.h.clone()).collect()
    }

    pub fn vertical(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.v.clone()).collect()
    }
}

/// (B(τ), ∫_0^τ ½ω(B, dB)) with left-point area sums.
fn brownian_with_area<R: Rng>(g: &CarnotGroup, tau: f64, steps: usize, sign: f64, noise: &mut R) -> GroupElement {
    let dt = tau / steps as f64;
    let sd = (2.0 * dt).sqrt() * sign;
    let mut path = AreaPath::new(g);
    let mut db = vec![0.0; g.n()];
    for _ in 0..steps {
        for x in db.iter_mut() {
            *x = sd * noise.sample::<f64, _>(StandardNormal);
        }
        path.step(g, &db);
    }
    path.finish()
}

/// Running (B, ∫½ω(B, dB)) with left-point sums.
struct AreaPath {
    b: Vec<f64>,
    v: Vec<f64>,
}

impl AreaPath {
    fn new(g: &CarnotGroup) -> Self {
        Self { b: vec![0.0; g.n()], v: vec![0.0; g.m()] }
    }

    fn step(&mut self, g: &CarnotGroup, db: &[f64]) {
        let n = self.b.len();
        for (l, al) in g.structure().iter().enumerate() {
            // ω_l(B, dB) = ⟨A_l B, dB⟩
            let mut s = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += al[(i, j)] * self.b[j];
                }
                s += row * db[i];
            }
            self.v[l] += 0.5 * s;
        }
        for (x, d) in self.b.iter_mut().zip(db) {
            *x += d;
        }
    }

    fn finish(self) -> GroupElement {
        GroupElement { h: self.b, v: self.v }
    }
}

/// Terminal (B(t), area) on the same Brownian paths at `steps` and `2·steps` left-point sums,
/// for step-halving diagnostics.
pub fn coupled_step_halving(g: &CarnotGroup, cfg: &PathConfig) -> Result<(SampleSet, SampleSet)> {
    cfg.validate()?;
    let steps = cfg.steps_for(cfg.t);
    let sd = (2.0 * cfg.t / (2 * steps) as f64).sqrt();
    let (coarse, fine): (Vec<GroupElement>, Vec<GroupElement>) = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let (mut noise, sign, _) = path_rngs(cfg, i);
            let mut c = AreaPath::new(g);
            let mut f = AreaPath::new(g);
            let mut d1 = vec![0.0; g.n()];
            let mut d2 = vec![0.0; g.n()];
            for _ in 0..steps {
                for x in d1.iter_mut().chain(d2.iter_mut()) {
                    *x = sign * sd * noise.sample::<f64, _>(StandardNormal);
                }
                f.step(g, &d1);
                f.step(g, &d2);
                let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
                c.step(g, &sum);
            }
            (c.finish(), f.finish())
        })
        .unzip();
    Ok((SampleSet { points: coarse, antithetic: cfg.antithetic }, SampleSet { points: fine, antithetic: cfg.antithetic }))
}

/// Per-path Brownian noise: antithetic partners share a stream.
fn path_rngs(cfg: &PathConfig, i: usize) -> (ChaCha8Rng, f64, ChaCha8Rng) {
    let (pair, sign) = if cfg.antithetic { (i / 2, if i.is_multiple_of(2) { 1.0 } else { -1.0 }) } else { (i, 1.0) };
    let brownian = stream_rng(cfg.seed, 2 * pair as u64);
    let jumps = stream_rng(cfg.seed, 2 * pair as u64 + 1);
    (brownian, sign, jumps)
}

/// X^ψ(t) = (B(t), Y^ψ(t) + ∫_0^t ½ω(B, dB)).
pub fn simulate_levy_on_g(g: &CarnotGroup, psi: Option<&LevyExponent>, cfg: &PathConfig) -> Result<SampleSet> {
    cfg.validate()?;
    if let Some(p) = psi {
        if p.m() != g.m() {
            return arg("ψ dimension differs from m");
        }
    }
    let steps = cfg.steps_for(cfg.t);
    let points = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let (mut noise, sign, mut jr) = path_rngs(cfg, i);
            let mut x = brownian_with_area(g, cfg.t, steps, sign, &mut noise);
            if let Some(p) = psi {
                for (v, y) in x.v.iter_mut().zip(p.sample_increment(cfg.t, &mut jr)) {
                    *v += y;
                }
            }
            x
        })
        .collect();
    Ok(SampleSet { points, antithetic: cfg.antithetic })
}

/// Lévy–OU state at time t from x0: δ_{e^{−t}}x0 ⋆ X_{(1−e^{−2t})/2} ⋆ (0, ∫_0^t e^{−2(t−s)}dY_s).
pub fn simulate_levy_ou(g: &CarnotGroup, psi: Option<&LevyExponent>, cfg: &PathConfig, x0: &GroupElement) -> Result<SampleSet> {
    cfg.validate()?;
    if x0.h.len() != g.n() || x0.v.len() != g.m() {
        return arg("x0 has the wrong dimensions");
    }
    if let Some(p) = psi {
        if p.m() != g.m() {
            return arg("ψ dimension differs from m");
        }
        if !p.flags().in_n_log {
            log::warn!("exponent has no logarithmic moment: the Lévy–OU process has no stationary law");
        }
    }
    let tau = -(-2.0 * cfg.t).exp_m1() / 2.0;
    let steps = cfg.steps_for(tau).max(64);
    let start = dilate_unchecked((-cfg.t).exp(), x0);
    let points = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let (mut noise, sign, mut jr) = path_rngs(cfg, i);
            let x = brownian_with_area(g, tau, steps, sign, &mut noise);
            let mut z = g.mul_unchecked(&start, &x);
            if let Some(p) = psi {
                for (v, y) in z.v.iter_mut().zip(p.sample_ou_increment(cfg.t, &mut jr)) {
                    *v += y;
                }
            }
            z
        })
        .collect();
    Ok(SampleSet { points, antithetic: cfg.antithetic })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharFnEstimate {
    pub lambda: Vec<Vec<f64>>,
    pub estimate: Vec<Complex64>,
    /// √(E|e^{i⟨λ,x⟩} − mean|² / N) over independent units (pairs when antithetic).
    pub stderr: Vec<f64>,
    pub paths: usize,
}

impl CharFnEstimate {
    /// Largest |estimate − exact| / stderr over the panel (∞ when stderr vanishes and the gap does not).
    pub fn max_z(&self, exact: &[Complex64]) -> f64 {
        self.estimate
            .iter()
            .zip(&self.stderr)
            .zip(exact)
            .map(|((e, s), x)| {
                let gap = (e - x).norm();
                if gap == 0.0 {
                    0.0
                } else {
                    gap / s
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Empirical E e^{i⟨λ,x⟩}; consecutive samples are averaged first when `paired`.
pub fn estimate_charfn(samples: &[Vec<f64>], panel: &[Vec<f64>], paired: bool) -> Result<CharFnEstimate> {
    if samples.is_empty() {
        return arg("no samples");
    }
    if paired && samples.len() % 2 == 1 {
        return arg("paired estimation needs an even sample count");
    }
    let dim = samples[0].len();
    let mut estimate = Vec::with_capacity(panel.len());
    let mut stderr = Vec::with_capacity(panel.len());
    for lambda in panel {
        if lambda.len() != dim {
            return arg(format!("λ has length {}, samples have dimension {dim}", lambda.len()));
        }
        let phase = |x: &Vec<f64>| Complex64::from_polar(1.0, x.iter().zip(lambda).map(|(a, b)| a * b).sum());
        let units: Vec<Complex64> = if paired {
            samples.chunks(2).map(|c| 0.5 * (phase(&c[0]) + phase(&c[1]))).collect()
        } else {
            samples.iter().map(phase).collect()
        };
        let n = units.len() as f64;
        let (mut re, mut im) = (Kahan::default(), Kahan::default());
        for u in &units {
            re.add(u.re);
            im.add(u.im);
        }
        let mean = Complex64::new(re.sum / n, im.sum / n);
        let mut var = Kahan::default();
        for u in &units {
            var.add((u - mean).norm_sqr());
        }
        let se = if units.len() > 1 { (var.sum / (n - 1.0) / n).sqrt() } else { 0.0 };
        estimate.push(mean);
        stderr.push(se);
    }
    Ok(CharFnEstimate { lambda: panel.to_vec(), estimate, stderr, paths: samples.len() })
}

/// One-sample Kolmogorov–Smirnov test against Normal(0, sd²): (D, asymptotic p-value).
pub fn ks_normal(samples: &[f64], sd: f64) -> (f64, f64) {
    use statrs::distribution::{ContinuousCDF, Normal};
    let dist = Normal::new(0.0, sd).expect("positive sd");
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, xi) in x.iter().enumerate() {
        let f = dist.cdf(*xi);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lam).powi(2)).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}
