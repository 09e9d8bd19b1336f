//! Partial-Fourier kernels in the vertical variable, real-space inversion, co-eigenfunctions
//! and group convolution on grids.
//!
//! With S(λ) = Ω(λ)ᵀΩ(λ), the v-Fourier transform ∫ q_s(h,v) e^{i⟨λ,v⟩} dv of the heat kernel is
//! (4π)^{−n/2} det(s(S))^{1/2} exp(−¼ hᵀ g(S) h), s(x) = √x / sinh(√x s), g(x) = √x coth(√x s).
//! In a symplectic frame this is heat_hat: (2π)^{−d} e^{−s|ν|²} ∏ η_j/(2 sinh η_j s) e^{−η_j|z_j|² coth(η_j s)/4}.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{arg, unsupported, CarnotError, Result};
use crate::group::CarnotGroup;
use crate::levy::LevyExponent;
use crate::quad::{gk_adaptive_vec, GkOptions};
use crate::spectral::frame_at;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// √x / sinh(√x s) for x ≥ 0.
fn s_fn(x: f64, s: f64) -> f64 {
    let r = x.max(0.0).sqrt();
    let a = r * s;
    if a < 1e-4 {
        (1.0 - a * a / 6.0) / s
    } else {
        2.0 * r * (-a).exp() / -(-2.0 * a).exp_m1()
    }
}

/// √x coth(√x s) for x ≥ 0.
fn g_fn(x: f64, s: f64) -> f64 {
    let r = x.max(0.0).sqrt();
    let a = r * s;
    if a < 1e-4 {
        (1.0 + a * a / 3.0) / s
    } else {
        r * (1.0 + (-2.0 * a).exp()) / -(-2.0 * a).exp_m1()
    }
}

/// 1/cosh(√x s) for x ≥ 0.
fn sech_fn(x: f64, s: f64) -> f64 {
    let a = x.max(0.0).sqrt() * s;
    2.0 * (-a).exp() / (1.0 + (-2.0 * a).exp())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return arg(format!("time must be positive and finite, got {t}"));
    }
    Ok(())
}

/// Heat kernel in frame coordinates z ∈ ℝ^{2d} (x_1, y_1, …) and radical frequency ν.
pub fn heat_hat(g: &CarnotGroup, t: f64, z: &[f64], lambda: &[f64], nu: &[f64]) -> Result<Complex64> {
    check_time(t)?;
    let fr = frame_at(g, lambda)?;
    fr.require_generic(g.generic_rank())?;
    if z.len() != 2 * fr.d || nu.len() != fr.k {
        return arg(format!("need z of length {} and ν of length {}", 2 * fr.d, fr.k));
    }
    let nu2: f64 = nu.iter().map(|x| x * x).sum();
    let mut v = TWO_PI.powi(-(fr.d as i32)) * (-t * nu2).exp();
    for (j, eta) in fr.eta.iter().enumerate() {
        let e2 = eta * eta;
        let r2 = z[2 * j] * z[2 * j] + z[2 * j + 1] * z[2 * j + 1];
        v *= 0.5 * s_fn(e2, t) * (-0.25 * g_fn(e2, t) * r2).exp();
    }
    Ok(Complex64::new(v, 0.0))
}

/// heat_hat · e^{tψ(λ)}.
pub fn perturbed_hat(g: &CarnotGroup, psi: &LevyExponent, t: f64, z: &[f64], lambda: &[f64], nu: &[f64]) -> Result<Complex64> {
    check_psi(g, psi)?;
    Ok(heat_hat(g, t, z, lambda, nu)? * (t * psi.eval(lambda)).exp())
}

/// heat_hat at t = ½ times the characteristic function exp(∫_0^∞ ψ(e^{−2s}λ) ds) of μ_ψ.
pub fn invariant_hat(g: &CarnotGroup, psi: &LevyExponent, z: &[f64], lambda: &[f64], nu: &[f64]) -> Result<Complex64> {
    check_psi(g, psi)?;
    Ok(heat_hat(g, 0.5, z, lambda, nu)? * psi.psi_minus_infinity(lambda)?.exp())
}

fn check_psi(g: &CarnotGroup, psi: &LevyExponent) -> Result<()> {
    if psi.m() != g.m() {
        return arg(format!("exponent has dimension {}, group has m = {}", psi.m(), g.m()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SliceKind {
    Heat { t: f64 },
    Perturbed { t: f64 },
    Invariant,
    /// Law of the Lévy–OU state at time t started from the identity.
    OuTransition { t: f64 },
}

/// A kernel given by its v-Fourier transform: heat part at time `heat_time` times a vertical multiplier.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    group: CarnotGroup,
    kind: SliceKind,
    psi: Option<LevyExponent>,
    heat_time: f64,
    derivative: Vec<u32>,
    c_norm: f64,
    /// Eigen-decomposition of A_1ᵀA_1 when m = 1.
    eig1: Option<(Vec<f64>, DMatrix<f64>)>,
}

impl KernelSlice {
    fn build(g: &CarnotGroup, kind: SliceKind, psi: Option<&LevyExponent>, heat_time: f64) -> Result<Self> {
        check_time(heat_time)?;
        if let Some(p) = psi {
            check_psi(g, p)?;
        }
        let eig1 = (g.m() == 1).then(|| {
            let a = &g.structure()[0];
            let e = SymmetricEigen::new(a.transpose() * a);
            (e.eigenvalues.iter().map(|x| x.max(0.0)).collect(), e.eigenvectors)
        });
        let mut s = Self {
            group: g.clone(),
            kind,
            psi: psi.cloned(),
            heat_time,
            derivative: vec![0; g.m()],
            c_norm: 1.0,
            eig1,
        };
        s.calibrate()?;
        Ok(s)
    }

    pub fn heat(g: &CarnotGroup, t: f64) -> Result<Self> {
        Self::build(g, SliceKind::Heat { t }, None, t)
    }

    pub fn perturbed(g: &CarnotGroup, psi: &LevyExponent, t: f64) -> Result<Self> {
        Self::build(g, SliceKind::Perturbed { t }, Some(psi), t)
    }

    pub fn invariant(g: &CarnotGroup, psi: &LevyExponent) -> Result<Self> {
        if !psi.flags().in_n_log {
            return unsupported("exponent has no finite logarithmic moment: no invariant density");
        }
        Self::build(g, SliceKind::Invariant, Some(psi), 0.5)
    }

    pub fn ou_transition(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64) -> Result<Self> {
        check_time(t)?;
        Self::build(g, SliceKind::OuTransition { t }, psi, -(-2.0 * t).exp_m1() / 2.0)
    }

    /// ∂^β_v of the kernel: the multiplier gains (−iλ)^β.
    pub fn with_derivative(mut self, beta: &[u32]) -> Result<Self> {
        if beta.len() != self.group.m() {
            return arg("derivative multi-index has the wrong length");
        }
        self.derivative = beta.to_vec();
        Ok(self)
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }
    pub fn kind(&self) -> SliceKind {
        self.kind
    }
    pub fn psi(&self) -> Option<&LevyExponent> {
        self.psi.as_ref()
    }
    pub fn heat_time(&self) -> f64 {
        self.heat_time
    }
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }
    pub fn derivative(&self) -> &[u32] {
        &self.derivative
    }

    /// The total mass is the λ = 0 value of the z-integrated hat, which the analytic
    /// prefactor makes exactly one; C_norm records the correction actually needed.
    fn calibrate(&mut self) -> Result<()> {
        let zero = vec![0.0; self.group.m()];
        let mass = self.heat_charfn(&zero) * self.vertical_multiplier(&zero)?.re;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(CarnotError::Internal(format!("kernel mass {mass} is not positive")));
        }
        self.c_norm = 1.0 / mass;
        log::info!("kernel {:?} on {}: C_norm = {}", self.kind, self.group.label(), self.c_norm);
        Ok(())
    }

    /// Vertical multiplier without the derivative factor.
    pub fn vertical_multiplier(&self, lambda: &[f64]) -> Result<Complex64> {
        let exponent = match (&self.kind, &self.psi) {
            (SliceKind::Heat { .. }, _) | (_, None) => Complex64::new(0.0, 0.0),
            (SliceKind::Perturbed { t }, Some(p)) => *t * p.eval(lambda),
            (SliceKind::Invariant, Some(p)) => p.psi_minus_infinity(lambda)?,
            (SliceKind::OuTransition { t }, Some(p)) => p.ou_exponent(*t, lambda)?,
        };
        Ok(exponent.exp())
    }

    fn derivative_factor(&self, lambda: &[f64]) -> Complex64 {
        let mut f = Complex64::new(1.0, 0.0);
        for (b, l) in self.derivative.iter().zip(lambda) {
            f *= Complex64::new(0.0, -l).powu(*b);
        }
        f
    }

    fn full_multiplier(&self, lambda: &[f64]) -> Result<Complex64> {
        Ok(self.c_norm * self.vertical_multiplier(lambda)? * self.derivative_factor(lambda))
    }

    /// Eigenvalues μ_i and eigenvectors of S(λ).
    fn s_eigen(&self, lambda: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        if let Some((mu, vecs)) = &self.eig1 {
            let l2 = lambda[0] * lambda[0];
            return (mu.iter().map(|x| x * l2).collect(), vecs.clone());
        }
        let o = self.group.omega_matrix(lambda);
        let e = SymmetricEigen::new(o.transpose() * o);
        (e.eigenvalues.iter().map(|x| x.max(0.0)).collect(), e.eigenvectors)
    }

    fn heat_charfn(&self, lambda: &[f64]) -> f64 {
        self.s_eigen(lambda).0.iter().map(|mu| sech_fn(*mu, self.heat_time)).product::<f64>().sqrt()
    }

    /// ∫ hat(h, λ) dh: the characteristic function of the vertical coordinate.
    pub fn vertical_charfn(&self, lambda: &[f64]) -> Result<Complex64> {
        if lambda.len() != self.group.m() {
            return arg("λ has the wrong length");
        }
        Ok(self.heat_charfn(lambda) * self.full_multiplier(lambda)?)
    }

    /// Frame evaluator: value at frame coordinates z, λ generic, radical frequency ν.
    pub fn hat_frame(&self, z: &[f64], lambda: &[f64], nu: &[f64]) -> Result<Complex64> {
        Ok(heat_hat(&self.group, self.heat_time, z, lambda, nu)? * self.full_multiplier(lambda)?)
    }

    /// v-Fourier transform at horizontal point h; λ may be zero or degenerate.
    pub fn slice(&self, h: &[f64], lambda: &[f64]) -> Result<Complex64> {
        if h.len() != self.group.n() || lambda.len() != self.group.m() {
            return arg("h or λ has the wrong length");
        }
        let (mu, vecs) = self.s_eigen(lambda);
        Ok(self.heat_part(&mu, &vecs, h) * self.full_multiplier(lambda)?)
    }

    fn heat_part(&self, mu: &[f64], vecs: &DMatrix<f64>, h: &[f64]) -> f64 {
        let n = h.len();
        let mut pref = FOUR_PI.powf(-(n as f64) / 2.0);
        let mut quad = 0.0;
        for (i, m) in mu.iter().enumerate() {
            let y: f64 = (0..n).map(|r| vecs[(r, i)] * h[r]).sum();
            pref *= s_fn(*m, self.heat_time).sqrt();
            quad += g_fn(*m, self.heat_time) * y * y;
        }
        pref * (-0.25 * quad).exp()
    }

    /// Envelope of |slice| over h, used to truncate the λ-integral (m = 1).
    fn envelope(&self, lambda: f64) -> Result<f64> {
        let (mu, _) = self.s_eigen(&[lambda]);
        let n = self.group.n();
        let heat = FOUR_PI.powf(-(n as f64) / 2.0) * mu.iter().map(|m| s_fn(*m, self.heat_time).sqrt()).product::<f64>();
        Ok(heat * self.full_multiplier(&[lambda])?.norm())
    }

    fn cutoff(&self, tol: f64) -> Result<f64> {
        let mut l = 1.0;
        while self.envelope(l)? >= tol || self.envelope(l * 1.5)? >= tol {
            l *= 2.0;
            if l > 1e6 {
                return Err(CarnotError::Accuracy("kernel hat does not decay in λ".into()));
            }
        }
        Ok(l)
    }
}

/// Uniform axis `name:min:max:count`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, min: f64, max: f64, count: usize) -> Result<Self> {
        let name = name.into();
        if count == 0 || !(min.is_finite() && max.is_finite()) || (count > 1 && max <= min) {
            return arg(format!("axis {name}: need finite min < max and count ≥ 1"));
        }
        Ok(Self { name, min, max, count })
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

/// Parse "h:-3:3:61,v:-4:4:81"; `h`/`v` set every horizontal/vertical axis, `h2`, `v1` set one.
pub fn parse_axes(spec: &str, n: usize, m: usize) -> Result<Vec<Axis>> {
    let mut axes: Vec<Option<Axis>> = vec![None; n + m];
    for tok in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = tok.split(':').collect();
        if parts.len() != 4 {
            return arg(format!("axis '{tok}' is not name:min:max:count"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| CarnotError::Argument(format!("bad number '{s}' in '{tok}'")));
        let (min, max) = (num(parts[1])?, num(parts[2])?);
        let count: usize = parts[3].parse().map_err(|_| CarnotError::Argument(format!("bad count in '{tok}'")))?;
        let name = parts[0];
        let (prefix, rest) = name.split_at(1.min(name.len()));
        let (offset, len) = match prefix {
            "h" => (0, n),
            "v" => (n, m),
            _ => return arg(format!("axis name '{name}' must start with h or v")),
        };
        let targets: Vec<usize> = if rest.is_empty() {
            (0..len).collect()
        } else {
            let i: usize = rest.parse().map_err(|_| CarnotError::Argument(format!("bad axis name '{name}'")))?;
            if i == 0 || i > len {
                return arg(format!("axis '{name}' out of range"));
            }
            vec![i - 1]
        };
        for i in targets {
            let label = if prefix == "h" { format!("h{}", i + 1) } else { format!("v{}", i + 1) };
            axes[offset + i] = Some(Axis::new(label, min, max, count)?);
        }
    }
    axes.into_iter()
        .enumerate()
        .map(|(i, a)| a.ok_or_else(|| CarnotError::Argument(format!("grid is missing coordinate {}", i + 1))))
        .collect()
}

/// Values on a tensor grid over (h_1, …, h_n, v_1, …, v_m), last axis fastest.
#[derive(Debug, Clone, Serialize)]
pub struct DensityGrid {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub n: usize,
    pub t: Option<f64>,
    pub c_norm: f64,
    pub label: String,
    /// Nodes set to NaN because a denominator underflowed.
    pub masked: usize,
}

impl DensityGrid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % a.count;
            flat /= a.count;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.count + i)
    }

    /// (h, v) at a flat index.
    pub fn node(&self, flat: usize) -> (Vec<f64>, Vec<f64>) {
        let c: Vec<f64> = self.unravel(flat).iter().zip(&self.axes).map(|(i, a)| a.node(*i)).collect();
        (c[..self.n].to_vec(), c[self.n..].to_vec())
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.ravel(idx)]
    }

    /// Tensor trapezoid weights per node.
    pub fn weights(&self) -> Vec<f64> {
        let per: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| if a.count == 1 { vec![1.0] } else { crate::quad::trapezoid_weights(a.count, a.step()) })
            .collect();
        (0..self.len())
            .map(|f| self.unravel(f).iter().enumerate().map(|(k, i)| per[k][*i]).product())
            .collect()
    }

    /// Trapezoid integral of `f(value, h, v)` over the grid; NaN nodes are skipped.
    pub fn integrate<F: Fn(f64, &[f64], &[f64]) -> f64>(&self, f: F) -> f64 {
        let w = self.weights();
        let mut s = 0.0;
        for (i, val) in self.values.iter().enumerate() {
            if val.is_nan() {
                continue;
            }
            let (h, v) = self.node(i);
            s += w[i] * f(*val, &h, &v);
        }
        s
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|x, _, _| x)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let names: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        writeln!(w, "{},value", names.join(","))?;
        for i in 0..self.len() {
            let (h, v) = self.node(i);
            let coords: Vec<String> = h.iter().chain(&v).map(|x| format!("{x}")).collect();
            writeln!(w, "{},{:e}", coords.join(","), self.values[i])?;
        }
        Ok(())
    }

    /// Whitespace-separated columns for plotting, blank line between outer blocks.
    pub fn write_dat<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let last = self.axes.last().map(|a| a.count).unwrap_or(1);
        for i in 0..self.len() {
            let (h, v) = self.node(i);
            let coords: Vec<String> = h.iter().chain(&v).map(|x| format!("{x}")).collect();
            writeln!(w, "{} {:e}", coords.join(" "), self.values[i])?;
            if (i + 1) % last == 0 {
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

fn inversion_opts() -> GkOptions {
    GkOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 20_000 }
}

/// Real-space values (1/π)∫_0^L Re(slice(h,λ) e^{−iλv}) dλ on a grid (m = 1).
pub fn invert_to_grid(slice: &KernelSlice, axes: &[Axis]) -> Result<DensityGrid> {
    let g = &slice.group;
    if g.m() != 1 {
        return unsupported(
            "real-space inversion needs a frame independent of λ; for m > 1 the symplectic frame is \
             λ-adapted and only hat-side evaluation is available",
        );
    }
    let n = g.n();
    if axes.len() != n + 1 {
        return arg(format!("grid needs {} axes", n + 1));
    }
    let cutoff = slice.cutoff(1e-13)?;
    let vs = axes[n].nodes();
    let h_axes = &axes[..n];
    let h_count: usize = h_axes.iter().map(|a| a.count).product();
    let (mu, vecs) = slice.s_eigen(&[1.0]);
    let blocks: Vec<Result<Vec<f64>>> = (0..h_count)
        .into_par_iter()
        .map(|hf| {
            let mut r = hf;
            let mut h = vec![0.0; n];
            for k in (0..n).rev() {
                h[k] = h_axes[k].node(r % h_axes[k].count);
                r /= h_axes[k].count;
            }
            let y: Vec<f64> = (0..n).map(|i| (0..n).map(|r| vecs[(r, i)] * h[r]).sum()).collect();
            let mut mult_err = None;
            let res = gk_adaptive_vec(
                |l, out: &mut [Complex64]| {
                    let l2 = l * l;
                    let mut pref = FOUR_PI.powf(-(n as f64) / 2.0);
                    let mut quad = 0.0;
                    for (m1, yi) in mu.iter().zip(&y) {
                        let mm = m1 * l2;
                        pref *= s_fn(mm, slice.heat_time).sqrt();
                        quad += g_fn(mm, slice.heat_time) * yi * yi;
                    }
                    let mult = match slice.full_multiplier(&[l]) {
                        Ok(m) => m,
                        Err(e) => {
                            mult_err = Some(e);
                            Complex64::new(0.0, 0.0)
                        }
                    };
                    let base = pref * (-0.25 * quad).exp() * mult / std::f64::consts::PI;
                    for (o, v) in out.iter_mut().zip(&vs) {
                        *o = base * Complex64::from_polar(1.0, -l * v);
                    }
                },
                0.0,
                cutoff,
                vs.len(),
                inversion_opts(),
            )?;
            if let Some(e) = mult_err {
                return Err(e);
            }
            Ok(res.values.iter().map(|z| z.re).collect())
        })
        .collect();
    let mut values = Vec::with_capacity(h_count * vs.len());
    for b in blocks {
        values.extend(b?);
    }
    let t = match slice.kind {
        SliceKind::Heat { t } | SliceKind::Perturbed { t } | SliceKind::OuTransition { t } => Some(t),
        SliceKind::Invariant => None,
    };
    Ok(DensityGrid {
        axes: axes.to_vec(),
        values,
        n,
        t,
        c_norm: slice.c_norm,
        label: format!("{:?}", slice.kind),
        masked: 0,
    })
}

/// J^ψ_β = (−1)^{|β|} ∂^β_v p_ψ / p_ψ on a grid.
pub fn co_eigenfunction(g: &CarnotGroup, psi: &LevyExponent, beta: &[u32], axes: &[Axis]) -> Result<DensityGrid> {
    let base = KernelSlice::invariant(g, psi)?;
    let p = invert_to_grid(&base, axes)?;
    let order: u32 = beta.iter().sum();
    let mut out = p.clone();
    out.label = format!("J_{beta:?}");
    if order == 0 {
        out.values.iter_mut().for_each(|x| *x = 1.0);
        return Ok(out);
    }
    let dp = invert_to_grid(&base.with_derivative(beta)?, axes)?;
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut masked = 0;
    for (o, (d, pv)) in out.values.iter_mut().zip(dp.values.iter().zip(&p.values)) {
        if pv.abs() < 1e-300 {
            *o = f64::NAN;
            masked += 1;
        } else {
            *o = sign * d / pv;
        }
    }
    if masked > 0 {
        log::warn!("co-eigenfunction: {masked} nodes masked where the density underflows");
    }
    out.masked = masked;
    Ok(out)
}

/// Group convolution (f ⋆ k)(x) = ∫ f(y) k(y⁻¹x) dy of grid data on a group with m = 1.
///
/// Uses the v-Fourier identity (f⋆k)^(h,λ) = ∫ f̂(h',λ) k̂(h−h',λ) e^{iλω(h',h)/2} dh' on a uniform
/// λ grid of spacing `dlambda` up to `lambda_max`. Both grids must share axes, and every horizontal
/// axis must be symmetric about 0 with an odd node count.
pub fn group_convolve(g: &CarnotGroup, f: &DensityGrid, k: &DensityGrid, lambda_max: f64, dlambda: f64) -> Result<DensityGrid> {
    if g.m() != 1 {
        return unsupported("grid group convolution is implemented for m = 1");
    }
    let n = g.n();
    if f.axes != k.axes || f.n != n || f.axes.len() != n + 1 {
        return arg("convolution operands must share a grid over (h, v)");
    }
    for a in &f.axes[..n] {
        if a.count % 2 == 0 || (a.min + a.max).abs() > 1e-12 * a.max.abs().max(1.0) {
            return arg(format!("axis {} must be symmetric about 0 with an odd count", a.name));
        }
    }
    if !(dlambda > 0.0 && lambda_max > 0.0) {
        return arg("λ grid needs positive spacing and extent");
    }
    let va = &f.axes[n];
    let vs = va.nodes();
    let vw = crate::quad::trapezoid_weights(va.count, va.step());
    let hcount: usize = f.axes[..n].iter().map(|a| a.count).product();
    let nv = va.count;
    let hstep: f64 = f.axes[..n].iter().map(|a| a.step()).product();
    let lam: Vec<f64> = {
        let steps = (lambda_max / dlambda).round() as usize;
        (0..=steps).map(|i| i as f64 * dlambda).collect()
    };
    let hnode = |flat: usize| -> (Vec<usize>, Vec<f64>) {
        let mut idx = vec![0; n];
        let mut r = flat;
        for kk in (0..n).rev() {
            idx[kk] = r % f.axes[kk].count;
            r /= f.axes[kk].count;
        }
        let h = idx.iter().zip(&f.axes).map(|(i, a)| a.node(*i)).collect();
        (idx, h)
    };
    let hs: Vec<(Vec<usize>, Vec<f64>)> = (0..hcount).map(hnode).collect();
    // trapezoid v-transforms
    let transform = |grid: &DensityGrid, l: f64| -> Vec<Complex64> {
        (0..hcount)
            .map(|hf| {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..nv {
                    s += grid.values[hf * nv + j] * vw[j] * Complex64::from_polar(1.0, l * vs[j]);
                }
                s
            })
            .collect()
    };
    let a = &g.structure()[0];
    let hat_conv: Vec<Vec<Complex64>> = lam
        .par_iter()
        .map(|&l| {
            let fh = transform(f, l);
            let kh = transform(k, l);
            (0..hcount)
                .map(|x| {
                    let (xi, xh) = &hs[x];
                    let mut s = Complex64::new(0.0, 0.0);
                    'outer: for y in 0..hcount {
                        let (yi, yh) = &hs[y];
                        let mut flat = 0;
                        for kk in 0..n {
                            let c = f.axes[kk].count as isize;
                            let d = xi[kk] as isize - yi[kk] as isize + (c - 1) / 2;
                            if d < 0 || d >= c {
                                continue 'outer;
                            }
                            flat = flat * c as usize + d as usize;
                        }
                        let mut om = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                om += a[(i, j)] * yh[j] * xh[i];
                            }
                        }
                        s += fh[y] * kh[flat] * Complex64::from_polar(1.0, 0.5 * l * om);
                    }
                    s * hstep
                })
                .collect()
        })
        .collect();
    let lw = crate::quad::trapezoid_weights(lam.len(), dlambda);
    let mut values = vec![0.0; hcount * nv];
    values.par_chunks_mut(nv).enumerate().for_each(|(x, row)| {
        for (j, v) in vs.iter().enumerate() {
            let mut s = 0.0;
            for (li, l) in lam.iter().enumerate() {
                s += lw[li] * (hat_conv[li][x] * Complex64::from_polar(1.0, -l * v)).re;
            }
            row[j] = s / std::f64::consts::PI;
        }
    });
    Ok(DensityGrid {
        axes: f.axes.clone(),
        values,
        n,
        t: match (f.t, k.t) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        },
        c_norm: 1.0,
        label: format!("{} * {}", f.label, k.label),
        masked: 0,
    })
}
