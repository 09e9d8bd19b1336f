//! Lévy–Khintchine exponents ψ(λ) = −⟨σλ,λ⟩ + i⟨b,λ⟩ + ∫(e^{i⟨v,λ⟩} − 1 − i⟨v,λ⟩1_{|v|≤1}) κ(dv).
//!
//! Sign convention: a Lévy process Y with exponent ψ satisfies E e^{i⟨λ,Y_t⟩} = e^{tψ(λ)},
//! and its generator acts on polynomials as Σ_γ c_γ ∂^γ with ψ(λ) = Σ_γ c_γ (iλ)^γ.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Zero};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{arg, unsupported, CarnotError, Result};
use crate::poly::{multi_indices_of_order, Exponents};
use crate::quad::{gk_complex, GkOptions};

/// Jump law of a compound Poisson component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpDistribution {
    /// Isotropic normal N(mean, std² I).
    Normal { mean: Vec<f64>, std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub at: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpSpec {
    #[default]
    None,
    CompoundPoisson { rate: f64, distribution: JumpDistribution },
    /// Rotationally symmetric α-stable part with exponent −scale·|λ|^α.
    Stable { alpha: f64, scale: f64 },
    /// κ = Σ weight·δ_at.
    Atoms { atoms: Vec<Atom> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub char_integral: bool,
    pub sampler: bool,
    /// Highest finite moment order; `None` means all orders.
    pub moment_order: Option<usize>,
    pub exp_moment: bool,
}

impl JumpSpec {
    pub fn capabilities(&self) -> Capabilities {
        match self {
            JumpSpec::Stable { .. } => Capabilities {
                char_integral: true,
                sampler: true,
                moment_order: Some(0),
                exp_moment: false,
            },
            _ => Capabilities { char_integral: true, sampler: true, moment_order: None, exp_moment: true },
        }
    }

    fn name(&self) -> &'static str {
        match self {
            JumpSpec::None => "none",
            JumpSpec::CompoundPoisson { .. } => "compound_poisson",
            JumpSpec::Stable { .. } => "stable",
            JumpSpec::Atoms { .. } => "atoms",
        }
    }
}

/// JSON form: `{"sigma": [[1.0]], "b": [0.0], "jumps": {"type": "none"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LevySpec {
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub jumps: JumpSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LevyFlags {
    pub in_n_log: bool,
    pub in_n_exp: bool,
    pub is_real_valued: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyExponent {
    m: usize,
    sigma: DMatrix<f64>,
    sigma_sqrt: DMatrix<f64>,
    b: Vec<f64>,
    jumps: JumpSpec,
    /// ∫_{|v|≤1} v κ(dv)
    truncated_mean: Vec<f64>,
    flags: LevyFlags,
}

fn gk_opts() -> GkOptions {
    GkOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 20_000 }
}

/// e^z − 1 without cancellation for small |z|.
pub fn cexpm1(z: Complex64) -> Complex64 {
    let em1 = z.re.exp_m1();
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn symmetric_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let e = s.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

impl LevyExponent {
    pub fn new(sigma: DMatrix<f64>, b: Vec<f64>, jumps: JumpSpec) -> Result<Self> {
        let m = b.len();
        if m == 0 {
            return arg("exponent needs dimension m ≥ 1");
        }
        if sigma.nrows() != m || sigma.ncols() != m {
            return arg(format!("sigma must be {m}x{m}"));
        }
        if b.iter().chain(sigma.iter()).any(|x| !x.is_finite()) {
            return arg("sigma and b must be finite");
        }
        if (&sigma - sigma.transpose()).amax() > 1e-12 {
            return arg("sigma is not symmetric");
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let min_eig = sigma.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-12 {
            return arg(format!("sigma is not positive semidefinite (eigenvalue {min_eig:e})"));
        }
        let truncated_mean = match &jumps {
            JumpSpec::None | JumpSpec::Stable { .. } => vec![0.0; m],
            JumpSpec::CompoundPoisson { rate, distribution } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return arg("compound Poisson rate must be positive");
                }
                let JumpDistribution::Normal { mean, std } = distribution;
                if mean.len() != m || !(*std > 0.0) {
                    return arg("normal jumps need mean of length m and std > 0");
                }
                if m == 1 {
                    let (mu, s) = (mean[0], *std);
                    let a = (-1.0 - mu) / s;
                    let bb = (1.0 - mu) / s;
                    let p = std_normal_cdf(bb) - std_normal_cdf(a);
                    vec![rate * (mu * p + s * (std_normal_pdf(a) - std_normal_pdf(bb)))]
                } else if mean.iter().all(|x| *x == 0.0) {
                    vec![0.0; m]
                } else {
                    return unsupported("normal jumps with nonzero mean need m = 1 (truncated mean over the unit ball)");
                }
            }
            JumpSpec::Atoms { atoms } => {
                let mut tm = vec![0.0; m];
                for a in atoms {
                    if a.at.len() != m || !(a.weight > 0.0) {
                        return arg("atoms need length-m positions and positive weights");
                    }
                    if norm(&a.at) <= 1.0 {
                        for j in 0..m {
                            tm[j] += a.weight * a.at[j];
                        }
                    }
                }
                tm
            }
        };
        if let JumpSpec::Stable { alpha, scale } = &jumps {
            if !(*alpha > 0.0 && *alpha < 2.0) {
                return arg(format!("stable index must lie in (0, 2), got {alpha}"));
            }
            if !(*scale > 0.0) {
                return arg("stable scale must be positive");
            }
        }
        let symmetric = match &jumps {
            JumpSpec::None | JumpSpec::Stable { .. } => true,
            JumpSpec::CompoundPoisson { distribution: JumpDistribution::Normal { mean, .. }, .. } => {
                mean.iter().all(|x| *x == 0.0)
            }
            JumpSpec::Atoms { atoms } => atoms.iter().all(|a| {
                atoms.iter().any(|o| o.weight == a.weight && o.at.iter().zip(&a.at).all(|(x, y)| *x == -*y))
            }),
        };
        let caps = jumps.capabilities();
        let flags = LevyFlags {
            in_n_log: true,
            in_n_exp: caps.exp_moment,
            is_real_valued: symmetric && b.iter().all(|x| *x == 0.0),
        };
        let sigma_sqrt = symmetric_sqrt(&sigma);
        Ok(Self { m, sigma, sigma_sqrt, b, jumps, truncated_mean, flags })
    }

    pub fn zero(m: usize) -> Self {
        Self::new(DMatrix::zeros(m, m), vec![0.0; m], JumpSpec::None).expect("zero exponent is valid")
    }

    pub fn gaussian(sigma: DMatrix<f64>) -> Result<Self> {
        let m = sigma.nrows();
        Self::new(sigma, vec![0.0; m], JumpSpec::None)
    }

    pub fn from_spec(spec: &LevySpec, m: usize) -> Result<Self> {
        let sigma = match &spec.sigma {
            None => DMatrix::zeros(m, m),
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return arg(format!("sigma must be {m}x{m}"));
                }
                DMatrix::from_fn(m, m, |i, j| rows[i][j])
            }
        };
        let b = spec.b.clone().unwrap_or_else(|| vec![0.0; m]);
        if b.len() != m {
            return arg(format!("b must have length {m}"));
        }
        Self::new(sigma, b, spec.jumps.clone())
    }

    pub fn from_json(text: &str, m: usize) -> Result<Self> {
        let spec: LevySpec =
            serde_json::from_str(text).map_err(|e| CarnotError::Argument(format!("psi spec: {e}")))?;
        Self::from_spec(&spec, m)
    }

    pub fn to_spec(&self) -> LevySpec {
        LevySpec {
            sigma: Some((0..self.m).map(|i| (0..self.m).map(|j| self.sigma[(i, j)]).collect()).collect()),
            b: Some(self.b.clone()),
            jumps: self.jumps.clone(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn jumps(&self) -> &JumpSpec {
        &self.jumps
    }
    pub fn flags(&self) -> LevyFlags {
        self.flags
    }
    pub fn capabilities(&self) -> Capabilities {
        self.jumps.capabilities()
    }
    pub fn truncated_mean(&self) -> &[f64] {
        &self.truncated_mean
    }

    pub fn is_zero(&self) -> bool {
        self.sigma.iter().all(|x| *x == 0.0) && self.b.iter().all(|x| *x == 0.0) && self.jumps == JumpSpec::None
    }

    /// Linear drift of the process: b minus the compensator ∫_{|v|≤1} v κ(dv).
    pub fn effective_drift(&self) -> Vec<f64> {
        self.b.iter().zip(&self.truncated_mean).map(|(b, t)| b - t).collect()
    }

    fn continuous_parts(&self, lambda: &[f64]) -> (f64, f64) {
        let mut q = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                q += self.sigma[(i, j)] * lambda[i] * lambda[j];
            }
        }
        (q, dot(&self.b, lambda))
    }

    /// Jump part of ψ including the compensator.
    pub fn jump_part(&self, lambda: &[f64]) -> Complex64 {
        match &self.jumps {
            JumpSpec::None => Complex64::new(0.0, 0.0),
            JumpSpec::Stable { alpha, scale } => Complex64::new(-scale * norm(lambda).powf(*alpha), 0.0),
            JumpSpec::CompoundPoisson { rate, distribution: JumpDistribution::Normal { mean, std } } => {
                let l2 = dot(lambda, lambda);
                let z = Complex64::new(-0.5 * std * std * l2, dot(mean, lambda));
                (cexpm1(z) - Complex64::new(0.0, dot(&self.truncated_mean, lambda) / rate)) * *rate
            }
            JumpSpec::Atoms { atoms } => {
                let mut s = Complex64::new(0.0, 0.0);
                for a in atoms {
                    let xl = dot(&a.at, lambda);
                    let comp = if norm(&a.at) <= 1.0 { xl } else { 0.0 };
                    s += (cexpm1(Complex64::new(0.0, xl)) - Complex64::new(0.0, comp)) * a.weight;
                }
                s
            }
        }
    }

    pub fn eval(&self, lambda: &[f64]) -> Complex64 {
        let (q, bl) = self.continuous_parts(lambda);
        Complex64::new(-q, bl) + self.jump_part(lambda)
    }

    /// ∫_{w0}^{1} ψ_J(wλ)/(2w) dw, the jump part of ∫_0^{T} ψ(e^{−2u}λ)du with w0 = e^{−2T}.
    fn jump_log_integral(&self, w0: f64, lambda: &[f64]) -> Result<Complex64> {
        if let JumpSpec::None = self.jumps {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if let JumpSpec::Stable { alpha, scale } = &self.jumps {
            let r = norm(lambda).powf(*alpha);
            return Ok(Complex64::new(-scale * r * (1.0 - w0.powf(*alpha)) / (2.0 * alpha), 0.0));
        }
        let mut buf = lambda.to_vec();
        let (v, _) = gk_complex(
            |w| {
                for (x, l) in buf.iter_mut().zip(lambda) {
                    *x = w * l;
                }
                self.jump_part(&buf) / (2.0 * w)
            },
            w0,
            1.0,
            gk_opts(),
        )?;
        Ok(v)
    }

    /// ∫_0^T ψ(e^{−2u}λ) du: exponent of the Lévy–OU increment ∫_0^T e^{−2(T−s)} dY_s.
    pub fn ou_exponent(&self, t: f64, lambda: &[f64]) -> Result<Complex64> {
        if !(t >= 0.0) {
            return arg("ou_exponent needs t ≥ 0");
        }
        let (q, bl) = self.continuous_parts(lambda);
        let cont = Complex64::new(-q * (-(-4.0 * t).exp_m1()) / 4.0, bl * (-(-2.0 * t).exp_m1()) / 2.0);
        Ok(cont + self.jump_log_integral((-2.0 * t).exp(), lambda)?)
    }

    /// ψ_t(λ) = ∫_0^t ψ(e^{2s}λ) ds, any real t.
    pub fn psi_t(&self, t: f64, lambda: &[f64]) -> Result<Complex64> {
        if t == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if t < 0.0 {
            return Ok(-self.ou_exponent(-t, lambda)?);
        }
        let (q, bl) = self.continuous_parts(lambda);
        let cont = Complex64::new(-q * (4.0 * t).exp_m1() / 4.0, bl * (2.0 * t).exp_m1() / 2.0);
        let scaled: Vec<f64> = lambda.iter().map(|x| x * (2.0 * t).exp()).collect();
        Ok(cont + self.jump_log_integral((-2.0 * t).exp(), &scaled)?)
    }

    /// ∫_0^∞ ψ(e^{−2s}λ) ds, the log-characteristic function of the invariant law μ_ψ.
    pub fn psi_minus_infinity(&self, lambda: &[f64]) -> Result<Complex64> {
        if !self.flags.in_n_log {
            return unsupported("exponent has no finite logarithmic moment: no invariant law");
        }
        let (q, bl) = self.continuous_parts(lambda);
        Ok(Complex64::new(-q / 4.0, bl / 2.0) + self.jump_log_integral(0.0, lambda)?)
    }

    fn require_moments(&self) -> Result<()> {
        match self.capabilities().moment_order {
            None => Ok(()),
            Some(_) => unsupported(format!(
                "jump component '{}' has no finite moments of the required order",
                self.jumps.name()
            )),
        }
    }

    /// Exact coefficients c_γ with ψ(λ) = Σ c_γ (iλ)^γ for 1 ≤ |γ| ≤ max_order.
    pub fn symbol_coefficients(&self, max_order: usize) -> Result<Vec<(Exponents, BigRational)>> {
        if max_order >= 1 {
            self.require_moments()?;
        }
        let q = |x: f64| BigRational::from_f64(x).expect("finite float");
        let mut out = Vec::new();
        for order in 1..=max_order {
            for g in multi_indices_of_order(self.m, order) {
                let mut c = BigRational::zero();
                if order == 1 {
                    let j = g.iter().position(|e| *e == 1).unwrap();
                    c += q(self.b[j]) - q(self.truncated_mean[j]);
                }
                if order == 2 {
                    let idx: Vec<usize> = g
                        .iter()
                        .enumerate()
                        .flat_map(|(j, e)| std::iter::repeat_n(j, *e as usize))
                        .collect();
                    let (j, k) = (idx[0], idx[1]);
                    c += if j == k { q(self.sigma[(j, j)]) } else { q(self.sigma[(j, k)]) * BigRational::from_integer(2.into()) };
                }
                let moment = self.jump_moment(&g);
                let fact: BigRational = g
                    .iter()
                    .map(|e| (1..=*e).fold(BigRational::one(), |a, k| a * BigRational::from_integer(k.into())))
                    .fold(BigRational::one(), |a, b| a * b);
                c += moment / fact;
                if !c.is_zero() {
                    out.push((g, c));
                }
            }
        }
        Ok(out)
    }

    /// ∫ v^γ κ(dv) exactly (|γ| ≥ 1).
    fn jump_moment(&self, g: &[u32]) -> BigRational {
        let q = |x: f64| BigRational::from_f64(x).expect("finite float");
        match &self.jumps {
            JumpSpec::None | JumpSpec::Stable { .. } => BigRational::zero(),
            JumpSpec::CompoundPoisson { rate, distribution: JumpDistribution::Normal { mean, std } } => {
                let s2 = q(*std) * q(*std);
                let mut total = q(*rate);
                for (j, &e) in g.iter().enumerate() {
                    let mu = q(mean[j]);
                    let mut prev = BigRational::one();
                    let mut cur = mu.clone();
                    if e == 0 {
                        continue;
                    }
                    for k in 2..=e {
                        let next = &mu * &cur + BigRational::from_integer((k - 1).into()) * &s2 * &prev;
                        prev = cur;
                        cur = next;
                    }
                    total *= cur;
                }
                total
            }
            JumpSpec::Atoms { atoms } => {
                let mut s = BigRational::zero();
                for a in atoms {
                    let mut term = q(a.weight);
                    for (j, &e) in g.iter().enumerate() {
                        for _ in 0..e {
                            term *= q(a.at[j]);
                        }
                    }
                    s += term;
                }
                s
            }
        }
    }

    fn gaussian_draw<R: Rng + ?Sized>(&self, var_scale: f64, rng: &mut R, out: &mut [f64]) {
        // covariance 2·var_scale·σ
        let z: Vec<f64> = (0..self.m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = (2.0 * var_scale).sqrt();
        for i in 0..self.m {
            let mut acc = 0.0;
            for j in 0..self.m {
                acc += self.sigma_sqrt[(i, j)] * z[j];
            }
            out[i] += s * acc;
        }
    }

    fn stable_draw<R: Rng + ?Sized>(&self, alpha: f64, scale: f64, rng: &mut R, out: &mut [f64]) {
        // sub-Gaussian representation √A·G, A positive (α/2)-stable, G ~ N(0, 2I):
        // E e^{i⟨λ,√A G⟩} = E e^{−A|λ|²} = e^{−|λ|^α}
        let beta = alpha / 2.0;
        let u: f64 = std::f64::consts::PI * rng.random::<f64>();
        let e: f64 = rng.sample(Exp1);
        // Chambers–Mallows–Stuck with E e^{−sA} = e^{−s^β}
        let a = (beta * u).sin() / u.sin().powf(1.0 / beta) * (((1.0 - beta) * u).sin() / e).powf((1.0 - beta) / beta);
        let c = scale.powf(1.0 / alpha) * (2.0 * a).sqrt();
        for o in out.iter_mut() {
            *o += c * rng.sample::<f64, _>(StandardNormal);
        }
    }

    fn jump_draw<R: Rng + ?Sized>(&self, rng: &mut R, factor: f64, out: &mut [f64]) {
        match &self.jumps {
            JumpSpec::CompoundPoisson { distribution: JumpDistribution::Normal { mean, std }, .. } => {
                for j in 0..self.m {
                    out[j] += factor * (mean[j] + std * rng.sample::<f64, _>(StandardNormal));
                }
            }
            JumpSpec::Atoms { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = &atoms[atoms.len() - 1];
                for a in atoms {
                    if u < a.weight {
                        pick = a;
                        break;
                    }
                    u -= a.weight;
                }
                for j in 0..self.m {
                    out[j] += factor * pick.at[j];
                }
            }
            _ => {}
        }
    }

    fn jump_rate(&self) -> f64 {
        match &self.jumps {
            JumpSpec::CompoundPoisson { rate, .. } => *rate,
            JumpSpec::Atoms { atoms } => atoms.iter().map(|a| a.weight).sum(),
            _ => 0.0,
        }
    }

    fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).expect("positive mean").sample(rng) as u64
    }

    /// Draw from μ^ψ_t (law of Y_t); also returns the number of jumps drawn.
    pub fn sample_increment_counted<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> (Vec<f64>, u64) {
        let mut out: Vec<f64> = self.effective_drift().iter().map(|x| x * t).collect();
        self.gaussian_draw(t, rng, &mut out);
        let mut count = 0;
        match &self.jumps {
            JumpSpec::Stable { alpha, scale } => self.stable_draw(*alpha, scale * t, rng, &mut out),
            JumpSpec::None => {}
            _ => {
                count = Self::poisson(self.jump_rate() * t, rng);
                for _ in 0..count {
                    self.jump_draw(rng, 1.0, &mut out);
                }
            }
        }
        (out, count)
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Vec<f64> {
        self.sample_increment_counted(t, rng).0
    }

    /// Draw of ∫_0^T e^{−2(T−s)} dY_s, whose exponent is `ou_exponent(T, ·)`.
    pub fn sample_ou_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Vec<f64> {
        let decay = -(-2.0 * t).exp_m1() / 2.0;
        let mut out: Vec<f64> = self.effective_drift().iter().map(|x| x * decay).collect();
        self.gaussian_draw(-(-4.0 * t).exp_m1() / 4.0, rng, &mut out);
        match &self.jumps {
            JumpSpec::Stable { alpha, scale } => {
                let c = scale * (-(-2.0 * alpha * t).exp_m1()) / (2.0 * alpha);
                self.stable_draw(*alpha, c, rng, &mut out)
            }
            JumpSpec::None => {}
            _ => {
                let count = Self::poisson(self.jump_rate() * t, rng);
                for _ in 0..count {
                    let age = t * rng.random::<f64>();
                    self.jump_draw(rng, (-2.0 * age).exp(), &mut out);
                }
            }
        }
        out
    }
}
