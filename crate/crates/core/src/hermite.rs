//! Hermite and Laguerre functions, Weyl-transform matrix elements, and the
//! harmonic-oscillator semigroup in the scaled Hermite basis Φ^λ_β.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{arg, CarnotError, Result};
use crate::quad::GaussHermite;
use crate::spectral::{harmonic_eigenvalue, SpectralFrame};

pub const HERMITE_CAP: usize = 200;

/// (Φ_n(x), Φ_{n−1}(x)) by the normalized three-term recurrence; Φ_{−1} = 0.
pub fn hermite_phi_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Orthonormal Hermite function Φ_n(x) = (2ⁿ n! √π)^{−1/2} H_n(x) e^{−x²/2}.
pub fn hermite_phi(n: usize, x: f64) -> Result<f64> {
    if n > HERMITE_CAP {
        return arg(format!("Hermite index {n} exceeds the cap {HERMITE_CAP}"));
    }
    Ok(hermite_phi_pair(n, x).0)
}

/// Φ_0(x), …, Φ_{count−1}(x).
pub fn hermite_table(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..count {
        out.push(cur);
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

/// Laguerre polynomial L_k with L_k(0) = 1 (Rodrigues form divided by k!).
pub fn laguerre(k: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, 1.0 - x);
    if k == 0 {
        return p0;
    }
    for j in 1..k {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0 - x) * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// φ^λ_β(z) = Pf^{1/2} (2π)^{−d/2} ∏_j L_{β_j}(½η_j|z_j|²) e^{−¼η_j|z_j|²}, z = (x_1, y_1, …).
pub fn laguerre_phi(frame: &SpectralFrame, beta: &[u32], z: &[f64]) -> Result<f64> {
    if !frame.is_generic() {
        return Err(CarnotError::Degenerate { lambda: frame.lambda.clone(), rank: 2 * frame.d, generic: 0 });
    }
    if beta.len() != frame.d || z.len() < 2 * frame.d {
        return arg("laguerre_phi needs |β| = d and z of length 2d");
    }
    let mut v = frame.pf.sqrt() * (2.0 * std::f64::consts::PI).powf(-(frame.d as f64) / 2.0);
    for j in 0..frame.d {
        let r2 = z[2 * j] * z[2 * j] + z[2 * j + 1] * z[2 * j + 1];
        let e = frame.eta[j];
        v *= laguerre(beta[j], 0.5 * e * r2) * (-0.25 * e * r2).exp();
    }
    Ok(v)
}

/// Matrix of W_λ(f) in the basis Φ^λ_β, indices β ∈ {0..N−1}^d in row-major order.
#[derive(Debug, Clone)]
pub struct WeylMatrix {
    pub lambda: Vec<f64>,
    pub n: usize,
    pub d: usize,
    /// entries[(γ, α)] = ⟨W_λ(f)Φ_α, Φ_γ⟩
    pub entries: DMatrix<Complex64>,
}

impl WeylMatrix {
    pub fn hs_norm_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.entries.nrows()).map(|i| self.entries[(i, i)]).collect()
    }

    pub fn off_diagonal_mass(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.entries.nrows() {
            for j in 0..self.entries.ncols() {
                if i != j {
                    s += self.entries[(i, j)].norm_sqr();
                }
            }
        }
        s
    }

    /// Multi-index of a flat position.
    pub fn index(&self, flat: usize) -> Vec<u32> {
        let mut beta = vec![0; self.d];
        let mut r = flat;
        for j in (0..self.d).rev() {
            beta[j] = (r % self.n) as u32;
            r /= self.n;
        }
        beta
    }

    pub fn scale(&mut self, c: Complex64) {
        self.entries *= c;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WeylOptions {
    /// Gauss–Hermite nodes for ξ, ζ and y; `None` picks max(64, 2N + 16).
    pub nodes: Option<usize>,
    /// Repeat with doubled nodes and fail if any element moves by more than `tol`.
    pub check_convergence: bool,
    pub tol: f64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        Self { nodes: None, check_convergence: true, tol: 1e-6 }
    }
}

/// W_η(f) for one symplectic pair: K(ξ,ζ) = ∫ f(ζ−ξ, y) e^{iηy(ξ+ζ)/2} dy, matrix
/// elements by tensor Gauss–Hermite in the scaled variables.
fn weyl_1d<F>(eta: f64, f: &F, n: usize, q: usize) -> DMatrix<Complex64>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let gh = GaussHermite::new(q);
    let s = eta.sqrt();
    let xs: Vec<f64> = gh.nodes.iter().map(|u| u / s).collect();
    let phi: Vec<Vec<f64>> = gh.nodes.iter().map(|&u| hermite_table(n, u)).collect();
    // kernel on the node grid, already weighted
    let kernel: Vec<Complex64> = (0..q * q)
        .into_par_iter()
        .map(|ab| {
            let (a, b) = (ab / q, ab % q);
            let (xi, zeta) = (xs[a], xs[b]);
            let mut k = Complex64::new(0.0, 0.0);
            for (y, wy) in gh.nodes.iter().zip(&gh.scaled_weights) {
                let ph = 0.5 * eta * y * (xi + zeta);
                k += f(zeta - xi, *y) * Complex64::from_polar(*wy, ph);
            }
            k * gh.scaled_weights[a] * gh.scaled_weights[b]
        })
        .collect();
    let norm = 1.0 / s;
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for a in 0..q {
        for b in 0..q {
            let k = kernel[a * q + b] * norm;
            if k == Complex64::new(0.0, 0.0) {
                continue;
            }
            for g in 0..n {
                let kg = k * phi[a][g];
                for al in 0..n {
                    m[(g, al)] += kg * phi[b][al];
                }
            }
        }
    }
    m
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// W_λ(f) for f(z) = ∏_j f_j(x_j, y_j) in frame coordinates.
pub fn weyl_matrix<F>(frame: &SpectralFrame, factors: &[F], n: usize, opts: WeylOptions) -> Result<WeylMatrix>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    if !frame.is_generic() {
        return Err(CarnotError::Degenerate { lambda: frame.lambda.clone(), rank: 2 * frame.d, generic: 0 });
    }
    if factors.len() != frame.d {
        return arg(format!("need {} pair factors, got {}", frame.d, factors.len()));
    }
    if n == 0 || n > HERMITE_CAP {
        return arg(format!("truncation N must lie in 1..={HERMITE_CAP}"));
    }
    let q = opts.nodes.unwrap_or((2 * n + 16).max(64));
    let mut total: Option<DMatrix<Complex64>> = None;
    for (j, f) in factors.iter().enumerate() {
        let m = weyl_1d(frame.eta[j], f, n, q);
        if opts.check_convergence {
            let m2 = weyl_1d(frame.eta[j], f, n, 2 * q);
            let diff = (&m2 - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if diff > opts.tol {
                return Err(CarnotError::Accuracy(format!(
                    "Weyl matrix elements moved by {diff:e} when doubling {q} quadrature nodes"
                )));
            }
        }
        total = Some(match total {
            None => m,
            Some(t) => kron(&t, &m),
        });
    }
    Ok(WeylMatrix { lambda: frame.lambda.clone(), n, d: frame.d, entries: total.expect("d ≥ 1") })
}

/// Diagonal of H^{λ,ν}_t: e^{−t𝔫(β,λ,ν)} for β ∈ {0..=N}^d.
pub fn oscillator_semigroup_diag(frame: &SpectralFrame, nu: &[f64], t: f64, n: usize) -> Result<Vec<(Vec<u32>, f64)>> {
    if t < 0.0 {
        return arg("t must be nonnegative");
    }
    let total = (n + 1).pow(frame.d as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut beta = vec![0u32; frame.d];
        let mut r = flat;
        for j in (0..frame.d).rev() {
            beta[j] = (r % (n + 1)) as u32;
            r /= n + 1;
        }
        let e = harmonic_eigenvalue(frame, &beta, nu)?;
        out.push((beta, (-t * e).exp()));
    }
    Ok(out)
}

/// Closed form Σ_β e^{−2t𝔫} = e^{−2t|ν|²} ∏_j e^{−2tη_j}/(1 − e^{−4tη_j}).
pub fn oscillator_hs_norm_sq(frame: &SpectralFrame, nu: &[f64], t: f64) -> f64 {
    let nu2: f64 = nu.iter().map(|x| x * x).sum();
    frame.eta.iter().fold((-2.0 * t * nu2).exp(), |acc, e| acc * (-2.0 * t * e).exp() / -(-4.0 * t * e).exp_m1())
}

/// 𝓕_G(f)(λ,ν) = W_λ(f^{λ,ν}) for f whose partial Fourier transform in (r, v) factors as
/// `rv_hat` times a product of pair profiles in frame coordinates.
pub fn gft_matrix<F>(frame: &SpectralFrame, rv_hat: Complex64, factors: &[F], n: usize, opts: WeylOptions) -> Result<WeylMatrix>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let mut w = weyl_matrix(frame, factors, n, opts)?;
    w.scale(rv_hat);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::CarnotGroup;
    use crate::spectral::frame_at;

    #[test]
    fn hermite_values() {
        assert!((hermite_phi(0, 0.0).unwrap() - 0.751_126).abs() < 1e-6);
        assert_eq!(hermite_phi(1, 0.0).unwrap(), 0.0);
        assert!(hermite_phi(201, 0.0).is_err());
        // Φ_2(x) = (2x² − 1) e^{−x²/2} / (√2 π^{1/4})
        let x = 0.7f64;
        let exact = (2.0 * x * x - 1.0) * (-x * x / 2.0).exp() / (2f64.sqrt() * std::f64::consts::PI.powf(0.25));
        assert!((hermite_phi(2, x).unwrap() - exact).abs() < 1e-15);
    }

    #[test]
    fn hermite_orthonormal_under_gauss_hermite() {
        let gh = GaussHermite::new(201);
        for n in 0..=50 {
            let s = gh.integrate(|x| hermite_phi_pair(n, x).0.powi(2));
            assert!((s - 1.0).abs() < 1e-10, "n={n}: {s}");
        }
        let s = gh.integrate(|x| hermite_phi_pair(7, x).0 * hermite_phi_pair(12, x).0);
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn laguerre_values() {
        assert_eq!(laguerre(1, 1.0), 0.0);
        assert!((laguerre(2, 0.5) - (1.0 - 1.0 + 0.125)).abs() < 1e-15);
        assert_eq!(laguerre(5, 0.0), 1.0);
    }

    #[test]
    fn laguerre_phi_values() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let f = frame_at(&g, &[1.0]).unwrap();
        let v = laguerre_phi(&f, &[0], &[0.0, 0.0]).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-15);
        // ½η|z|² = 1
        let z = [2f64.sqrt(), 0.0];
        assert!(laguerre_phi(&f, &[1], &z).unwrap().abs() < 1e-15);
    }

    #[test]
    fn zero_function_gives_zero_matrix() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let f = frame_at(&g, &[1.0]).unwrap();
        let w = weyl_matrix(&f, &[|_: f64, _: f64| Complex64::new(0.0, 0.0)], 6, WeylOptions::default()).unwrap();
        assert_eq!(w.hs_norm_sq(), 0.0);
    }

    #[test]
    fn oscillator_diag_examples() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let f = frame_at(&g, &[1.0]).unwrap();
        let d0 = oscillator_semigroup_diag(&f, &[], 0.0, 5).unwrap();
        assert!(d0.iter().all(|(_, v)| *v == 1.0));
        let d1 = oscillator_semigroup_diag(&f, &[], 1.0, 5).unwrap();
        assert!((d1[0].1 - (-1.0f64).exp()).abs() < 1e-15);
        let f = frame_at(&g, &[0.7]).unwrap();
        let s: f64 = oscillator_semigroup_diag(&f, &[], 0.8, 60).unwrap().iter().map(|(_, v)| v * v).sum();
        let c = oscillator_hs_norm_sq(&f, &[], 0.8);
        assert!(((s - c) / c).abs() < 1e-10);
    }
}
