//! Heat, Lévy-heat, OU and Lévy–OU semigroups on polynomials (exact) and on test functions
//! (quadrature), intertwining checks, eigenspaces and the co-eigenfunction weak form.
//!
//! Conventions: Q_t = e^{tΔ_H}; P_t f(g) = E f(δ_{e^{−t}}g ⋆ X_{(1−e^{−2t})/2}); Γ_ψ f(h,v) = E f(h, v+W)
//! with W ~ μ_ψ; Λ f(v) = ∫∫ f(h, v+v') q_{1/2}(h,v') dh dv' = (Q_{1/2}f)(0,v).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{arg, unsupported, CarnotError, Result};
use crate::group::CarnotGroup;
use crate::hermite::{laguerre_phi, weyl_matrix, WeylOptions};
use crate::kernel::{invert_to_grid, Axis, DensityGrid, KernelSlice};
use crate::levy::{JumpSpec, LevyExponent};
use crate::poly::{
    apply_d, apply_sub_laplacian, apply_vertical_symbol, exp_nilpotent, graded_degree, rat, symbol_for, Exponents,
    FloatPoly, GeneratorMatrix, RatPoly, Rational,
};
use crate::quad::{gauss_legendre, gk_adaptive_vec, GaussHermite, GkOptions};
use crate::spectral::{frame_at, harmonic_eigenvalue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SemigroupKind {
    Heat,
    LevyHeat,
    Ou,
    LevyOu,
}

#[derive(Debug, Clone)]
pub struct SemigroupOperator {
    pub kind: SemigroupKind,
    pub group: CarnotGroup,
    pub psi: Option<LevyExponent>,
    pub t: f64,
}

impl SemigroupOperator {
    pub fn new(kind: SemigroupKind, group: &CarnotGroup, psi: Option<&LevyExponent>, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return arg(format!("semigroup time must be finite and ≥ 0, got {t}"));
        }
        if matches!(kind, SemigroupKind::LevyHeat | SemigroupKind::LevyOu) && psi.is_none() {
            return arg("Lévy semigroups need an exponent");
        }
        if let Some(p) = psi {
            if p.m() != group.m() {
                return arg(format!("exponent has dimension {}, group has m = {}", p.m(), group.m()));
            }
        }
        let psi = match kind {
            SemigroupKind::Heat | SemigroupKind::Ou => None,
            _ => psi.cloned(),
        };
        Ok(Self { kind, group: group.clone(), psi, t })
    }
}

fn poly_cap(p: &RatPoly) -> u32 {
    p.graded_degree().unwrap_or(0)
}

fn check_poly(g: &CarnotGroup, p: &RatPoly) -> Result<()> {
    if p.nh() != g.n() || p.nv() != g.m() {
        return arg(format!("polynomial over ({}, {}) variables, group has ({}, {})", p.nh(), p.nv(), g.n(), g.m()));
    }
    Ok(())
}

/// Σ_h ∂²_{h_i} on polynomials.
fn euclidean_laplacian(p: &RatPoly) -> RatPoly {
    let mut r = RatPoly::zero(p.nh(), p.nv());
    for i in 0..p.nh() {
        r = r.add(&p.derivative(i).derivative(i));
    }
    r
}

/// Eigenbasis of a generator whose matrix is −(graded degree) on the diagonal plus a strictly
/// degree-lowering part. Vector j has leading monomial j and only lower-degree terms.
#[derive(Debug, Clone)]
pub struct OuEigenbasis {
    pub matrix: GeneratorMatrix,
    /// vectors[j][i]: coefficient of basis monomial i in eigenvector j.
    pub vectors: Vec<Vec<Rational>>,
    order: Vec<usize>,
}

impl OuEigenbasis {
    pub fn new(matrix: GeneratorMatrix) -> Result<Self> {
        let dim = matrix.dim();
        for i in 0..dim {
            for j in 0..dim {
                let e = &matrix.exact[i][j];
                if i == j {
                    if *e != -Rational::from_integer(matrix.degrees[i].into()) {
                        return Err(CarnotError::Internal(format!("diagonal entry {i} is not minus its degree")));
                    }
                } else if !e.is_zero() && matrix.degrees[i] >= matrix.degrees[j] {
                    return Err(CarnotError::Internal("generator does not lower degree off the diagonal".into()));
                }
            }
        }
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|a, b| matrix.degrees[*b].cmp(&matrix.degrees[*a]).then(a.cmp(b)));
        let vectors = (0..dim)
            .into_par_iter()
            .map(|j| {
                let k = matrix.degrees[j];
                let mut x = vec![Rational::zero(); dim];
                x[j] = Rational::one();
                for &i in &order {
                    let di = matrix.degrees[i];
                    if di >= k {
                        continue;
                    }
                    let mut s = Rational::zero();
                    for (l, xl) in x.iter().enumerate() {
                        if !xl.is_zero() && matrix.degrees[l] > di && !matrix.exact[i][l].is_zero() {
                            s += &matrix.exact[i][l] * xl;
                        }
                    }
                    if !s.is_zero() {
                        x[i] = -s / Rational::from_integer((k - di).into());
                    }
                }
                x
            })
            .collect();
        Ok(Self { matrix, vectors, order })
    }

    /// Coefficients c with p = Σ_j c_j e_j.
    pub fn decompose(&self, p: &RatPoly) -> Result<Vec<Rational>> {
        let mut r = p.coefficients_in(&self.matrix.basis)?;
        let mut c = vec![Rational::zero(); r.len()];
        for &j in &self.order {
            if r[j].is_zero() {
                continue;
            }
            let cj = r[j].clone();
            for (ri, vi) in r.iter_mut().zip(&self.vectors[j]) {
                if !vi.is_zero() {
                    *ri -= &cj * vi;
                }
            }
            c[j] = cj;
        }
        Ok(c)
    }

    pub fn eigenvector(&self, j: usize) -> RatPoly {
        RatPoly::from_coefficients(self.matrix.nh, self.matrix.nv, &self.matrix.basis, &self.vectors[j])
    }

    /// e^{tℒ} p = Σ_j c_j e^{−deg_j t} e_j.
    pub fn apply(&self, t: f64, p: &RatPoly) -> Result<FloatPoly> {
        let c = self.decompose(p)?;
        let dim = c.len();
        let mut y = vec![0.0; dim];
        for (j, cj) in c.iter().enumerate() {
            if cj.is_zero() {
                continue;
            }
            let w = crate::poly::rat_to_f64(cj) * (-(self.matrix.degrees[j] as f64) * t).exp();
            for (yi, vi) in y.iter_mut().zip(&self.vectors[j]) {
                if !vi.is_zero() {
                    *yi += w * crate::poly::rat_to_f64(vi);
                }
            }
        }
        Ok(FloatPoly::from_coefficients(self.matrix.nh, self.matrix.nv, &self.matrix.basis, &y))
    }
}

/// Eigenbasis of ℒ_ψ = Δ_H + 𝔻 + A^ψ on 𝓑_cap.
pub fn ou_eigenbasis(g: &CarnotGroup, psi: Option<&LevyExponent>, cap: u32) -> Result<OuEigenbasis> {
    OuEigenbasis::new(crate::poly::generator_matrix(g, psi, cap)?)
}

/// Euclidean OU Δ − ⟨h,∇⟩ on polynomials in n variables.
pub fn euclidean_ou_eigenbasis(n: usize, cap: u32) -> Result<OuEigenbasis> {
    OuEigenbasis::new(GeneratorMatrix::from_operator(n, 0, cap, |p| Ok(euclidean_laplacian(p).add(&apply_d(p))))?)
}

/// Euclidean Lévy–OU Σ c_γ ∂^γ − 2⟨v,∇⟩ on polynomials in m variables.
pub fn vertical_ou_eigenbasis(psi: Option<&LevyExponent>, m: usize, cap: u32) -> Result<OuEigenbasis> {
    let symbol = match psi {
        None => vec![],
        Some(p) => p.symbol_coefficients((cap / 2) as usize)?,
    };
    OuEigenbasis::new(GeneratorMatrix::from_operator(0, m, cap, |p| Ok(apply_vertical_symbol(p, &symbol).add(&apply_d(p))))?)
}

/// Exact action of the semigroup, returned in floating point.
pub fn apply_to_polynomial(op: &SemigroupOperator, p: &RatPoly) -> Result<FloatPoly> {
    check_poly(&op.group, p)?;
    let g = &op.group;
    let cap = poly_cap(p);
    match op.kind {
        SemigroupKind::Heat | SemigroupKind::LevyHeat => {
            let t = rat(op.t);
            let symbol = symbol_for(op.psi.as_ref(), g, cap)?;
            let out = exp_nilpotent(p, |q| {
                apply_sub_laplacian(g, q).expect("dimensions checked").add(&apply_vertical_symbol(q, &symbol)).scale(&t)
            });
            Ok(out.to_float())
        }
        SemigroupKind::Ou | SemigroupKind::LevyOu => ou_eigenbasis(g, op.psi.as_ref(), cap)?.apply(op.t, p),
    }
}

/// Γ_ψ p = exp(Σ_γ c_γ/(2|γ|) ∂^γ_v) p, exact.
pub fn gamma_apply(g: &CarnotGroup, psi: Option<&LevyExponent>, p: &RatPoly) -> Result<RatPoly> {
    let symbol = gamma_symbol(psi, g, poly_cap(p))?;
    Ok(exp_nilpotent(p, |q| apply_vertical_symbol(q, &symbol)))
}

fn gamma_symbol(psi: Option<&LevyExponent>, g: &CarnotGroup, cap: u32) -> Result<Vec<(Exponents, Rational)>> {
    Ok(symbol_for(psi, g, cap)?
        .into_iter()
        .map(|(gm, c)| {
            let order: u32 = gm.iter().sum();
            (gm, c / Rational::from_integer((2 * order).into()))
        })
        .collect())
}

/// Q_{1/2} p = exp(½Δ_H) p, exact.
pub fn q_half(g: &CarnotGroup, p: &RatPoly) -> Result<RatPoly> {
    check_poly(g, p)?;
    let half = Rational::new(1.into(), 2.into());
    Ok(exp_nilpotent(p, |q| apply_sub_laplacian(g, q).expect("dimensions checked").scale(&half)))
}

/// ∫ p dp_ψ = (Q_{1/2}Γ_ψ p)(0).
pub fn stationary_moment(g: &CarnotGroup, psi: Option<&LevyExponent>, p: &RatPoly) -> Result<Rational> {
    let tp = q_half(g, &gamma_apply(g, psi, p)?)?;
    Ok(tp.coeff(&vec![0; p.nh() + p.nv()]))
}

/// δ_c p(h,v) = p(ch, c²v) in floating point.
fn dilate_poly(p: &FloatPoly, c: f64) -> FloatPoly {
    FloatPoly::from_terms(
        p.nh(),
        p.nv(),
        p.terms().map(|(e, x)| (e.clone(), x * c.powi(graded_degree(e, p.nh()) as i32))),
    )
}

fn float_to_rat(p: &FloatPoly) -> RatPoly {
    p.to_rational()
}

#[derive(Debug, Clone)]
pub struct EigenSpace {
    pub k: u32,
    /// e^{−kt}
    pub eigenvalue: f64,
    pub basis: Vec<RatPoly>,
}

/// 𝓔^ψ_k = (Q_{1/2}Γ_ψ)^{−1}(𝒫_k) for k ≤ cap, each basis element checked against ℒ_ψ e = −k e exactly.
pub fn eigen_decomposition(g: &CarnotGroup, psi: Option<&LevyExponent>, cap: u32, t: f64) -> Result<Vec<EigenSpace>> {
    let gsym = gamma_symbol(psi, g, cap)?;
    let lsym = symbol_for(psi, g, cap)?;
    let half = Rational::new(1.into(), 2.into());
    let (n, m) = (g.n(), g.m());
    let mut out = Vec::new();
    for k in 0..=cap {
        let mons = crate::poly::homogeneous_monomials(n, m, k);
        let basis: Vec<RatPoly> = mons
            .into_par_iter()
            .map(|e| {
                let mono = RatPoly::monomial(n, m, e, Rational::one());
                // Q_{1/2} and Γ_ψ commute, so the inverse is exp(−½Δ_H − Σ c_γ/(2|γ|)∂^γ)
                exp_nilpotent(&mono, |q| {
                    apply_sub_laplacian(g, q)
                        .expect("dimensions match")
                        .scale(&half)
                        .add(&apply_vertical_symbol(q, &gsym))
                        .scale(&-Rational::one())
                })
            })
            .collect();
        for e in &basis {
            let le = crate::poly::apply_generator(g, &lsym, e)?;
            if le != e.scale(&-Rational::from_integer(k.into())) {
                return Err(CarnotError::Internal(format!("eigenfunction check failed at k = {k}: {e}")));
            }
        }
        out.push(EigenSpace { k, eigenvalue: (-(k as f64) * t).exp(), basis });
    }
    Ok(out)
}

/// Per eigenvalue −k: (k, algebraic multiplicity, geometric multiplicity), exact.
pub fn polynomial_spectrum(g: &CarnotGroup, psi: Option<&LevyExponent>, cap: u32) -> Result<Vec<(u32, usize, usize)>> {
    let gm = crate::poly::generator_matrix(g, psi, cap)?;
    let dim = gm.dim();
    let mut out = Vec::new();
    for k in 0..=cap {
        let alg = gm.degrees.iter().filter(|d| **d == k).count();
        let mut a: Vec<Vec<Rational>> = gm.exact.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += Rational::from_integer(k.into());
        }
        out.push((k, alg, dim - exact_rank(a)));
    }
    Ok(out)
}

fn exact_rank(mut a: Vec<Vec<Rational>>) -> usize {
    let rows = a.len();
    let cols = if rows > 0 { a[0].len() } else { 0 };
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|r| !a[*r][c].is_zero()) else { continue };
        a.swap(rank, p);
        let pivot = a[rank][c].clone();
        for r in 0..rows {
            if r != rank && !a[r][c].is_zero() {
                let f = &a[r][c] / &pivot;
                for cc in c..cols {
                    let sub = &f * &a[rank][cc];
                    a[r][cc] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Floating eigenvalues of the generator matrix on 𝓑_cap (real parts, sorted descending).
pub fn numeric_generator_eigenvalues(g: &CarnotGroup, psi: Option<&LevyExponent>, cap: u32) -> Result<Vec<Complex64>> {
    let gm = crate::poly::generator_matrix(g, psi, cap)?;
    let mut ev: Vec<Complex64> = gm.entries.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(ev)
}

/// ‖M*M − MM*‖_F for M the matrix of P^ψ_t on 𝓑_cap, adjoint in L²(p_ψ) via exact moments.
pub fn non_normality_witness(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, cap: u32) -> Result<f64> {
    let eb = ou_eigenbasis(g, psi, cap)?;
    let basis = eb.matrix.basis.clone();
    let dim = basis.len();
    let (n, m) = (g.n(), g.m());
    let mono = |e: &Exponents| RatPoly::monomial(n, m, e.clone(), Rational::one());
    let mut w = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = crate::poly::rat_to_f64(&stationary_moment(g, psi, &mono(&basis[i]).mul(&mono(&basis[j])))?);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let mut mm = DMatrix::zeros(dim, dim);
    for (j, e) in basis.iter().enumerate() {
        let img = eb.apply(t, &mono(e))?;
        for (i, c) in img.coefficients_in(&basis)?.into_iter().enumerate() {
            mm[(i, j)] = c;
        }
    }
    let winv = w.clone().try_inverse().ok_or_else(|| CarnotError::Internal("moment Gram matrix is singular".into()))?;
    let adj = &winv * mm.transpose() * &w;
    Ok((&adj * &mm - &mm * &adj).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Pair {
    Pi,
    Lambda,
    Gamma,
    Lp,
    Tbk,
    Mbeta,
}

impl Pair {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "pi" => Pair::Pi,
            "lambda" => Pair::Lambda,
            "gamma" => Pair::Gamma,
            "lp" => Pair::Lp,
            "tbk" => Pair::Tbk,
            "mbeta" => Pair::Mbeta,
            _ => return arg(format!("unknown intertwining pair '{s}'")),
        })
    }

    fn names(self) -> &'static str {
        match self {
            Pair::Pi => "P^psi_t Pi = Pi P~_t",
            Pair::Lambda => "P^psi_t Lambda = Lambda PP^psi_t",
            Pair::Gamma => "PP_t Gamma_psi = Gamma_psi PP^psi_t",
            Pair::Lp => "Q_1/2 Gamma_psi PP^psi_t = delta_{e^-t} Q_1/2 Gamma_psi",
            Pair::Tbk => "P^sigma_t T_bk = T_bk P^psi_t",
            Pair::Mbeta => "QQ_t M_beta = M_beta Q^beta_t",
        }
    }
}

#[derive(Debug, Clone)]
pub enum TestFunction {
    Polynomial(RatPoly),
    /// exp(−|x − center|²/(2 width²)) on the pair's domain (ℝ^n for Π, G for Λ, ℝ^m for T_{b,κ}).
    Gaussian { center: Vec<f64>, width: f64 },
    /// Coefficient function at a fixed λ and oscillator index β.
    Mode { lambda: Vec<f64>, beta: Vec<u32> },
}

impl TestFunction {
    fn id(&self) -> String {
        match self {
            TestFunction::Polynomial(p) => format!("polynomial {p}"),
            TestFunction::Gaussian { center, width } => format!("gaussian center={center:?} width={width}"),
            TestFunction::Mode { lambda, beta } => format!("mode lambda={lambda:?} beta={beta:?}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntertwinerReport {
    pub pair: String,
    pub test_function: String,
    pub t: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IntertwinerReport {
    fn new(pair: impl Into<String>, test: String, t: f64, residual: f64, tolerance: f64) -> Self {
        Self { pair: pair.into(), test_function: test, t, residual, tolerance, pass: residual < tolerance }
    }
}

pub const EXACT_TOL: f64 = 1e-12;
pub const QUADRATURE_TOL: f64 = 1e-4;

/// Sup-residual of one intertwining relation on the given test function.
pub fn intertwine_residual(pair: Pair, g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, test: &TestFunction) -> Result<IntertwinerReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return arg("t must be finite and ≥ 0");
    }
    if let Some(p) = psi {
        if p.m() != g.m() {
            return arg("exponent dimension differs from m");
        }
    }
    let (res, tol) = match (pair, test) {
        (Pair::Pi, TestFunction::Polynomial(p)) => (pi_poly(g, psi, t, p)?, EXACT_TOL),
        (Pair::Pi, TestFunction::Gaussian { center, width }) => (pi_gaussian(g, psi, t, center, *width)?, QUADRATURE_TOL),
        (Pair::Lambda, TestFunction::Polynomial(p)) => (lambda_poly(g, psi, t, p)?, EXACT_TOL),
        (Pair::Lambda, TestFunction::Gaussian { center, width }) => {
            (lambda_gaussian(g, psi, t, center, *width)?, QUADRATURE_TOL)
        }
        (Pair::Gamma, TestFunction::Polynomial(p)) => (gamma_poly(g, psi, t, p)?, EXACT_TOL),
        (Pair::Lp, TestFunction::Polynomial(p)) => (lp_poly(g, psi, t, p)?, EXACT_TOL),
        (Pair::Tbk, TestFunction::Polynomial(p)) => (tbk_poly(g, psi, t, p)?, EXACT_TOL),
        (Pair::Tbk, TestFunction::Gaussian { center, width }) => (tbk_gaussian(g, psi, t, center, *width)?, QUADRATURE_TOL),
        (Pair::Mbeta, TestFunction::Mode { lambda, beta }) => (mbeta_mode(g, t, lambda, beta)?, QUADRATURE_TOL),
        (p, tf) => return arg(format!("pair {p:?} does not support test function {}", tf.id())),
    };
    Ok(IntertwinerReport::new(pair.names(), test.id(), t, res, tol))
}

fn zero_psi(psi: Option<&LevyExponent>, m: usize) -> LevyExponent {
    psi.cloned().unwrap_or_else(|| LevyExponent::zero(m))
}

fn pi_poly(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, p: &RatPoly) -> Result<f64> {
    check_poly(g, p)?;
    let n = g.n();
    if p.terms().any(|(e, _)| e[n..].iter().any(|x| *x > 0)) {
        return arg("Π acts on functions of h only");
    }
    let lhs = ou_eigenbasis(g, psi, poly_cap(p))?.apply(t, p)?;
    let flat = RatPoly::from_terms(n, 0, p.terms().map(|(e, c)| (e[..n].to_vec(), c.clone())));
    let euc = euclidean_ou_eigenbasis(n, poly_cap(p))?.apply(t, &flat)?;
    let lifted = FloatPoly::from_terms(
        n,
        g.m(),
        euc.terms().map(|(e, c)| {
            let mut full = e.clone();
            full.extend(std::iter::repeat_n(0, g.m()));
            (full, *c)
        }),
    );
    Ok(lhs.max_abs_diff(&lifted))
}

fn lambda_poly(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, p: &RatPoly) -> Result<f64> {
    check_poly(g, p)?;
    let (n, m) = (g.n(), g.m());
    let restrict = |q: &RatPoly| -> RatPoly {
        RatPoly::from_terms(0, m, q.terms().filter(|(e, _)| e[..n].iter().all(|x| *x == 0)).map(|(e, c)| (e[n..].to_vec(), c.clone())))
    };
    let cap = poly_cap(p);
    let lam_p = restrict(&q_half(g, p)?);
    let lhs = vertical_ou_eigenbasis(psi, m, cap)?.apply(t, &lam_p)?;
    let pt = ou_eigenbasis(g, psi, cap)?.apply(t, p)?;
    let rhs = restrict(&q_half(g, &float_to_rat(&pt))?).to_float();
    Ok(lhs.max_abs_diff(&rhs))
}

fn gamma_poly(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, p: &RatPoly) -> Result<f64> {
    check_poly(g, p)?;
    let cap = poly_cap(p);
    let lhs = ou_eigenbasis(g, None, cap)?.apply(t, &gamma_apply(g, psi, p)?)?;
    let pt = ou_eigenbasis(g, psi, cap)?.apply(t, p)?;
    let rhs = gamma_apply(g, psi, &float_to_rat(&pt))?.to_float();
    Ok(lhs.max_abs_diff(&rhs))
}

fn lp_poly(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, p: &RatPoly) -> Result<f64> {
    check_poly(g, p)?;
    let pt = ou_eigenbasis(g, psi, poly_cap(p))?.apply(t, p)?;
    let lhs = q_half(g, &gamma_apply(g, psi, &float_to_rat(&pt))?)?.to_float();
    let rhs = dilate_poly(&q_half(g, &gamma_apply(g, psi, p)?)?.to_float(), (-t).exp());
    Ok(lhs.max_abs_diff(&rhs))
}

/// ψ split as ψ_σ = (σ, 0, 0) and ψ̃ = (0, b, κ).
fn split_psi(psi: &LevyExponent) -> Result<(LevyExponent, LevyExponent)> {
    let m = psi.m();
    let sigma = LevyExponent::new(psi.sigma().clone(), vec![0.0; m], JumpSpec::None)?;
    let tilde = LevyExponent::new(DMatrix::zeros(m, m), psi.b().to_vec(), psi.jumps().clone())?;
    Ok((sigma, tilde))
}

fn tbk_poly(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, p: &RatPoly) -> Result<f64> {
    check_poly(g, p)?;
    let (n, m) = (g.n(), g.m());
    if p.terms().any(|(e, _)| e[..n].iter().any(|x| *x > 0)) {
        return arg("T_{b,κ} acts on functions of v only");
    }
    let psi = zero_psi(psi, m);
    let (sig, tilde) = split_psi(&psi)?;
    let q = RatPoly::from_terms(0, m, p.terms().map(|(e, c)| (e[n..].to_vec(), c.clone())));
    let cap = poly_cap(&q);
    let tsym: Vec<(Exponents, Rational)> = tilde
        .symbol_coefficients((cap / 2) as usize)?
        .into_iter()
        .map(|(gm, c)| {
            let o: u32 = gm.iter().sum();
            (gm, c / Rational::from_integer((2 * o).into()))
        })
        .collect();
    let t_op = |x: &RatPoly| exp_nilpotent(x, |y| apply_vertical_symbol(y, &tsym));
    let lhs = vertical_ou_eigenbasis(Some(&sig), m, cap)?.apply(t, &t_op(&q))?;
    let pt = vertical_ou_eigenbasis(Some(&psi), m, cap)?.apply(t, &q)?;
    let rhs = t_op(&float_to_rat(&pt)).to_float();
    Ok(lhs.max_abs_diff(&rhs))
}

/// Fourier transform ∫ b(u) e^{iλu} du of b(u) = exp(−(u−c)²/(2w²)).
fn gauss_ft(lambda: f64, c: f64, w: f64) -> Complex64 {
    Complex64::from_polar(w * (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * w * w * lambda * lambda).exp(), lambda * c)
}

fn fourier_opts() -> GkOptions {
    GkOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 20_000 }
}

fn tbk_gaussian(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, center: &[f64], w: f64) -> Result<f64> {
    if g.m() != 1 || center.len() != 1 || !(w > 0.0) {
        return arg("the T_{b,κ} quadrature path needs m = 1, a scalar center and positive width");
    }
    let psi = zero_psi(psi, 1);
    let (sig, tilde) = split_psi(&psi)?;
    let c = center[0];
    let decay = (-2.0 * t).exp();
    let nodes: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
    let lmax = (2.0 * 36.0f64).sqrt() / w;
    let mut err = None;
    let mut run = |side: u8| -> Result<Vec<Complex64>> {
        let r = gk_adaptive_vec(
            |l, out: &mut [Complex64]| {
                let mult = (|| -> Result<Complex64> {
                    Ok(if side == 0 {
                        (sig.ou_exponent(t, &[-l])? + tilde.psi_minus_infinity(&[-l])?).exp()
                    } else {
                        (tilde.psi_minus_infinity(&[-decay * l])? + psi.ou_exponent(t, &[-l])?).exp()
                    })
                })()
                .unwrap_or_else(|e| {
                    err = Some(e);
                    Complex64::new(0.0, 0.0)
                });
                let base = gauss_ft(l, c, w) * mult / (2.0 * std::f64::consts::PI);
                for (o, v) in out.iter_mut().zip(&nodes) {
                    *o = base * Complex64::from_polar(1.0, -l * decay * v);
                }
            },
            -lmax,
            lmax,
            nodes.len(),
            fourier_opts(),
        )?;
        Ok(r.values)
    };
    let lhs = run(0)?;
    let rhs = run(1)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// Gaussian Mehler integral E f(e^{−t}h + √(1−e^{−2t}) Z) for f = exp(−|h−c|²/(2w²)).
fn mehler_gaussian(h: &[f64], t: f64, c: &[f64], w: f64) -> f64 {
    let s2 = -(-2.0 * t).exp_m1();
    let a = (-t).exp();
    h.iter()
        .zip(c)
        .map(|(x, ci)| (w / (w * w + s2).sqrt()) * (-(a * x - ci).powi(2) / (2.0 * (w * w + s2))).exp())
        .product()
}

fn pi_gaussian(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, center: &[f64], w: f64) -> Result<f64> {
    let n = g.n();
    if center.len() != n || !(w > 0.0) {
        return arg("Π Gaussian test needs a center in ℝ^n and positive width");
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let slice = KernelSlice::ou_transition(g, psi, t)?;
    let mut axes: Vec<Axis> = (0..n).map(|i| Axis::new(format!("h{}", i + 1), -6.0, 6.0, 31)).collect::<Result<_>>()?;
    axes.push(Axis::new("v1", -10.0, 10.0, 401)?);
    let a = (-t).exp();
    let nodes: Vec<Vec<f64>> = (0..10)
        .map(|i| (0..n).map(|j| ((i as f64 * 0.37 + j as f64 * 0.91).sin()) * 1.8).collect())
        .collect();
    let f = |x: &[f64]| -> f64 { x.iter().zip(center).map(|(xi, ci)| (-(xi - ci).powi(2) / (2.0 * w * w)).exp()).product() };
    // horizontal marginal of the transition kernel
    let heavy = psi.is_some_and(|p| p.capabilities().moment_order.is_some());
    let marg: Vec<(Vec<f64>, f64)> = if heavy {
        // v-tails too heavy for a truncated v-quadrature: the marginal is the zero v-frequency slice
        let hw: Vec<Vec<f64>> = axes[..n].iter().map(|ax| crate::quad::trapezoid_weights(ax.count, ax.step())).collect();
        let hcount: usize = axes[..n].iter().map(|ax| ax.count).product();
        (0..hcount)
            .map(|flat| {
                let (mut rem, mut h, mut wt) = (flat, vec![0.0; n], 1.0);
                for i in (0..n).rev() {
                    let k = rem % axes[i].count;
                    rem /= axes[i].count;
                    h[i] = axes[i].node(k);
                    wt *= hw[i][k];
                }
                let mass = wt * slice.slice(&h, &[0.0])?.re;
                Ok((h, mass))
            })
            .collect::<Result<_>>()?
    } else {
        let q = invert_to_grid(&slice, &axes)?;
        let weights = q.weights();
        let nv = axes[n].count;
        (0..q.len() / nv)
            .map(|hf| (q.node(hf * nv).0, (0..nv).map(|j| weights[hf * nv + j] * q.values[hf * nv + j]).sum()))
            .collect()
    };
    let mut worst: f64 = 0.0;
    for h in &nodes {
        let mut s = 0.0;
        for (xh, mass) in &marg {
            let y: Vec<f64> = h.iter().zip(xh).map(|(hi, xi)| a * hi + xi).collect();
            s += mass * f(&y);
        }
        worst = worst.max((s - mehler_gaussian(h, t, center, w)).abs());
    }
    Ok(worst)
}

/// Per-h data of the heat kernel at time τ for m = 1: eigenvalues of A_1ᵀA_1 and eigenvectors.
struct HeatGeometry {
    mu: Vec<f64>,
    vecs: DMatrix<f64>,
    a: DMatrix<f64>,
    tau: f64,
}

impl HeatGeometry {
    fn new(g: &CarnotGroup, tau: f64) -> Self {
        let a = g.structure()[0].clone();
        let e = nalgebra::SymmetricEigen::new(a.transpose() * &a);
        Self { mu: e.eigenvalues.iter().map(|x| x.max(0.0)).collect(), vecs: e.eigenvectors, a, tau }
    }

    fn sg(&self, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let tau = self.tau;
        self.mu
            .iter()
            .map(|m| {
                let r = (m * lambda * lambda).sqrt();
                let a = r * tau;
                if a < 1e-4 {
                    ((1.0 - a * a / 6.0) / tau, (1.0 + a * a / 3.0) / tau)
                } else {
                    let e = (-2.0 * a).exp();
                    (2.0 * r * (-a).exp() / (1.0 - e), r * (1.0 + e) / (1.0 - e))
                }
            })
            .unzip()
    }

    /// Coordinates of A a in the eigenbasis of AᵀA.
    fn project(&self, a_point: &[f64]) -> Vec<f64> {
        let n = a_point.len();
        let ah = &self.a * DVector::from_column_slice(a_point);
        (0..n).map(|i| (0..n).map(|r| self.vecs[(r, i)] * ah[r]).sum()).collect()
    }

    /// E e^{iλ(X_v + ½ω(a, X_h))} for X ~ q_τ, given `proj = project(a)`.
    fn area_charfn(&self, lambda: f64, proj: &[f64]) -> f64 {
        let (s, gg) = self.sg(lambda);
        let mut v = 1.0;
        for i in 0..proj.len() {
            let xi = proj[i] * 0.5 * lambda;
            v *= (s[i] / gg[i]).sqrt() * (-xi * xi / gg[i]).exp();
        }
        v
    }

    /// ∫ exp(−|y + x − c|²/(2w²)) q̂_τ(x, λ) e^{iλ½ω(y, x)} dx in closed form.
    fn gaussian_weighted(&self, lambda: f64, y: &[f64], c: &[f64], w: f64) -> Complex64 {
        let n = y.len();
        let (s, gg) = self.sg(lambda);
        let mut gmat = DMatrix::zeros(n, n);
        for i in 0..n {
            let u = self.vecs.column(i);
            gmat += gg[i] * u * &u.transpose();
        }
        let m = DMatrix::identity(n, n) / (w * w) + gmat * 0.5;
        let ay = &self.a * DVector::from_column_slice(y);
        let d: Vec<f64> = y.iter().zip(c).map(|(a, b)| a - b).collect();
        let jv: Vec<Complex64> = (0..n).map(|i| Complex64::new(-d[i] / (w * w), 0.5 * lambda * ay[i])).collect();
        let minv = m.clone().try_inverse().expect("positive definite");
        let mut quad = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                quad += jv[i] * minv[(i, j)] * jv[j];
            }
        }
        let c0 = -d.iter().map(|x| x * x).sum::<f64>() / (2.0 * w * w);
        let pref = (4.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0)
            * s.iter().map(|x| x.sqrt()).product::<f64>()
            * (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0)
            / m.determinant().sqrt();
        pref * (0.5 * quad + c0).exp()
    }
}

fn lambda_gaussian(g: &CarnotGroup, psi: Option<&LevyExponent>, t: f64, center: &[f64], w: f64) -> Result<f64> {
    let (n, m) = (g.n(), g.m());
    if m != 1 || center.len() != n + 1 || !(w > 0.0) {
        return arg("the Λ quadrature path needs m = 1, a center in ℝ^{n+1} and positive width");
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let psi = zero_psi(psi, 1);
    let (hc, vc) = (&center[..n], center[n]);
    let p_slice = KernelSlice::heat(g, 0.5)?;
    let mut axes: Vec<Axis> = (0..n).map(|i| Axis::new(format!("h{}", i + 1), -6.0, 6.0, 31)).collect::<Result<_>>()?;
    axes.push(Axis::new("v1", -7.0, 7.0, 71)?);
    let p = invert_to_grid(&p_slice, &axes)?;
    let weights = p.weights();
    let vnodes = [-1.5, -0.5, 0.0, 0.7, 1.5];
    let vp = axes[n].nodes();
    let nv = vp.len();
    let decay = (-2.0 * t).exp();
    let lmax = (2.0 * 36.0f64).sqrt() / w;
    let geo = HeatGeometry::new(g, -(-2.0 * t).exp_m1() / 2.0);
    let two_pi = 2.0 * std::f64::consts::PI;

    // b_t(u) = E b(u + Y), Y the OU increment
    let args: Vec<f64> = vnodes.iter().flat_map(|v| vp.iter().map(move |x| decay * v + x)).collect();
    let mut err = None;
    let bt = gk_adaptive_vec(
        |l, out: &mut [Complex64]| {
            let phi = psi.ou_exponent(t, &[-l]).map(|z| z.exp()).unwrap_or_else(|e| {
                err = Some(e);
                Complex64::new(0.0, 0.0)
            });
            let base = gauss_ft(l, vc, w) * phi / two_pi;
            for (o, u) in out.iter_mut().zip(&args) {
                *o = base * Complex64::from_polar(1.0, -l * u);
            }
        },
        -lmax,
        lmax,
        args.len(),
        fourier_opts(),
    )?
    .values;
    if let Some(e) = err {
        return Err(e);
    }
    let hcount = p.len() / nv;
    let hpoints: Vec<Vec<f64>> = (0..hcount).map(|hf| p.node(hf * nv).0).collect();
    let a_h = |h: &[f64]| -> f64 { h.iter().zip(hc).map(|(x, c)| (-(x - c).powi(2) / (2.0 * w * w)).exp()).product() };
    let mut lhs = vec![0.0; vnodes.len()];
    for (hf, h) in hpoints.iter().enumerate() {
        let ah = a_h(h);
        for (vi, _) in vnodes.iter().enumerate() {
            for j in 0..nv {
                let k = hf * nv + j;
                lhs[vi] += weights[k] * ah * bt[vi * nv + j].re * p.values[k];
            }
        }
    }

    // P_t f(h, w') for w' = v + v', by the closed-form horizontal integral and a λ-quadrature
    let wargs: Vec<f64> = vnodes.iter().flat_map(|v| vp.iter().map(move |x| v + x)).collect();
    let rows: Vec<Result<Vec<f64>>> = hpoints
        .par_iter()
        .map(|h| {
            let y: Vec<f64> = h.iter().map(|x| (-t).exp() * x).collect();
            let mut err = None;
            let r = gk_adaptive_vec(
                |l, out: &mut [Complex64]| {
                    let phi = psi.ou_exponent(t, &[-l]).map(|z| z.exp()).unwrap_or_else(|e| {
                        err = Some(e);
                        Complex64::new(0.0, 0.0)
                    });
                    let base = gauss_ft(l, vc, w) * phi * geo.gaussian_weighted(-l, &y, hc, w) / two_pi;
                    for (o, u) in out.iter_mut().zip(&wargs) {
                        *o = base * Complex64::from_polar(1.0, -l * decay * u);
                    }
                },
                -lmax,
                lmax,
                wargs.len(),
                fourier_opts(),
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            Ok(r.values.iter().map(|z| z.re).collect())
        })
        .collect();
    let mut rhs = vec![0.0; vnodes.len()];
    for (hf, row) in rows.into_iter().enumerate() {
        let row = row?;
        for vi in 0..vnodes.len() {
            for j in 0..nv {
                let k = hf * nv + j;
                rhs[vi] += weights[k] * row[vi * nv + j] * p.values[k];
            }
        }
    }
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn mbeta_mode(g: &CarnotGroup, t: f64, lambda: &[f64], beta: &[u32]) -> Result<f64> {
    let fr = frame_at(g, lambda)?;
    fr.require_generic(g.generic_rank())?;
    if beta.len() != fr.d {
        return arg(format!("β must have length d = {}", fr.d));
    }
    let nmax = *beta.iter().max().unwrap_or(&0) as usize + 6;
    let opts = WeylOptions { nodes: None, check_convergence: true, tol: 1e-6 };
    // φ^λ_β and the heat slice both factor over symplectic pairs
    let pf_share = fr.pf.powf(1.0 / fr.d as f64);
    let phi_factors: Vec<_> = (0..fr.d)
        .map(|j| {
            let e = fr.eta[j];
            let b = beta[j];
            move |x: f64, y: f64| {
                let r2 = x * x + y * y;
                Complex64::new(
                    pf_share.sqrt() / (2.0 * std::f64::consts::PI).sqrt()
                        * crate::hermite::laguerre(b, 0.5 * e * r2)
                        * (-0.25 * e * r2).exp(),
                    0.0,
                )
            }
        })
        .collect();
    let heat_factors: Vec<_> = (0..fr.d)
        .map(|j| {
            let e = fr.eta[j];
            move |x: f64, y: f64| {
                let r2 = x * x + y * y;
                let a = e * t;
                let sh = e / (2.0 * a.sinh());
                let coth = 1.0 / a.tanh();
                Complex64::new(sh / (2.0 * std::f64::consts::PI) * (-0.25 * e * coth * r2).exp(), 0.0)
            }
        })
        .collect();
    // the pair factors must reproduce laguerre_phi
    let z0: Vec<f64> = (0..2 * fr.d).map(|i| 0.3 + 0.1 * i as f64).collect();
    let direct = laguerre_phi(&fr, beta, &z0)?;
    let prod: f64 = (0..fr.d).map(|j| phi_factors[j](z0[2 * j], z0[2 * j + 1]).re).product();
    if (direct - prod).abs() > 1e-12 * direct.abs().max(1e-300) {
        return Err(CarnotError::Internal("Laguerre pair factorization mismatch".into()));
    }
    let wphi = weyl_matrix(&fr, &phi_factors, nmax, opts)?;
    let wheat = weyl_matrix(&fr, &heat_factors, nmax, opts)?;
    let lhs = &wphi.entries * &wheat.entries;
    let nu = vec![0.0; fr.k];
    let rhs = &wphi.entries * Complex64::new((-t * harmonic_eigenvalue(&fr, beta, &nu)?).exp(), 0.0);
    Ok((lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub enum CoeigenTest {
    /// f(h, v) = v
    Linear,
    /// f(h, v) = exp(−1/(1 − ((v−center)/radius)²)) inside the support
    Bump { center: f64, radius: f64 },
    /// f(h, v) = sin(freq·v)
    Sine { freq: f64 },
}

impl CoeigenTest {
    fn eval(&self, v: f64) -> f64 {
        match *self {
            CoeigenTest::Linear => v,
            CoeigenTest::Bump { center, radius } => bump((v - center) / radius),
            CoeigenTest::Sine { freq } => (freq * v).sin(),
        }
    }
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Default grid for the co-eigenfunction weak form on a group with m = 1.
pub fn default_coeigen_axes(n: usize) -> Result<Vec<Axis>> {
    let mut axes: Vec<Axis> = (0..n).map(|i| Axis::new(format!("h{}", i + 1), -7.0, 7.0, 41)).collect::<Result<_>>()?;
    axes.push(Axis::new("v1", -8.0, 8.0, 161)?);
    Ok(axes)
}

/// P^ψ_t f(h, w) for f depending on v only, at all grid nodes.
pub fn ou_apply_vertical(
    g: &CarnotGroup,
    psi: Option<&LevyExponent>,
    t: f64,
    f: &CoeigenTest,
    grid: &DensityGrid,
) -> Result<Vec<f64>> {
    if g.m() != 1 {
        return unsupported("vertical test functions are implemented for m = 1");
    }
    if !(t > 0.0) {
        return Ok((0..grid.len()).map(|i| f.eval(grid.node(i).1[0])).collect());
    }
    let n = g.n();
    let nv = grid.axes[n].count;
    let vs = grid.axes[n].nodes();
    let decay = (-2.0 * t).exp();
    let geo = HeatGeometry::new(g, -(-2.0 * t).exp_m1() / 2.0);
    let ou = |l: f64| -> Result<Complex64> {
        Ok(match psi {
            Some(p) => p.ou_exponent(t, &[l])?.exp(),
            None => Complex64::new(1.0, 0.0),
        })
    };
    let mean_y = match psi {
        Some(p) => {
            let e = 1e-4;
            (p.ou_exponent(t, &[e])?.im - p.ou_exponent(t, &[-e])?.im) / (2.0 * e)
        }
        None => 0.0,
    };
    let hcount = grid.len() / nv;
    let vstep = grid.axes[n].step();
    // uniform λ grid for the bump: f̂ and the OU factor computed once and shared by every h
    let (lgrid, dl) = match *f {
        CoeigenTest::Bump { center, radius } => {
            let (gl_x, gl_w) = gauss_legendre(96);
            let fhat = |l: f64| -> Complex64 {
                let mut s = Complex64::new(0.0, 0.0);
                for (x, wt) in gl_x.iter().zip(&gl_w) {
                    s += wt * bump(*x) * Complex64::from_polar(1.0, l * (center + radius * x));
                }
                s * radius
            };
            // |φ_U(λ)| ≤ ∏ sech(√μ_i |λ| τ)^{1/2}
            let rate: f64 = geo.mu.iter().map(|m| 0.5 * m.sqrt() * geo.tau).sum::<f64>().max(1e-3);
            let lmax = (28.0 / rate).min(4000.0);
            // spacing 0.2 aliases at period ~31 in v, far outside the bulk of P_t f
            let dl = 0.2;
            let count = (lmax / dl).ceil() as usize;
            let mut pts = Vec::with_capacity(count + 1);
            // f real: the integrand at −λ is the conjugate of the one at λ
            for k in 0..=count {
                let l = k as f64 * dl;
                let w = if k == 0 { 1.0 } else { 2.0 };
                pts.push((l, w * fhat(l), ou(-l)?));
            }
            (pts, dl)
        }
        _ => (Vec::new(), 0.0),
    };
    let rows: Vec<Result<Vec<f64>>> = (0..hcount)
        .into_par_iter()
        .map(|hf| {
            let h = grid.node(hf * nv).0;
            let a: Vec<f64> = h.iter().map(|x| (-t).exp() * x).collect();
            let a = geo.project(&a);
            match *f {
                CoeigenTest::Linear => Ok(vs.iter().map(|w| decay * w + mean_y).collect()),
                CoeigenTest::Sine { freq } => {
                    let phi = geo.area_charfn(freq, &a) * ou(freq)?;
                    Ok(vs.iter().map(|w| (Complex64::from_polar(1.0, freq * decay * w) * phi).im).collect())
                }
                CoeigenTest::Bump { .. } => {
                    let decay_w = Complex64::from_polar(1.0, -decay * vstep);
                    let mut acc = vec![Complex64::new(0.0, 0.0); nv];
                    for (l, fh, phi_y) in &lgrid {
                        let base = fh * phi_y * geo.area_charfn(-l, &a);
                        let step = decay_w.powf(*l);
                        let mut ph = base * Complex64::from_polar(1.0, -l * decay * vs[0]);
                        for o in acc.iter_mut() {
                            *o += ph;
                            ph *= step;
                        }
                    }
                    Ok(acc.iter().map(|z| z.re * dl / (2.0 * std::f64::consts::PI)).collect())
                }
            }
        })
        .collect();
    let mut out = Vec::with_capacity(grid.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Weak form ∫ (P^ψ_t f) J^ψ_β p_ψ = e^{−2|β|t} ∫ f J^ψ_β p_ψ, with J^ψ_β p_ψ = (−1)^{|β|} ∂^β_v p_ψ.
/// The residual is the relative gap between the two sides.
pub fn coeigen_residual(
    g: &CarnotGroup,
    psi: Option<&LevyExponent>,
    beta: &[u32],
    t: f64,
    test: &CoeigenTest,
    axes: &[Axis],
    tolerance: f64,
) -> Result<IntertwinerReport> {
    if g.m() != 1 || beta.len() != 1 {
        return unsupported("the co-eigenfunction weak form is implemented for m = 1");
    }
    let zero = LevyExponent::zero(1);
    let psi_ref = psi.unwrap_or(&zero);
    let base = KernelSlice::invariant(g, psi_ref)?;
    let order = beta[0];
    let dens = if order == 0 { invert_to_grid(&base, axes)? } else { invert_to_grid(&base.with_derivative(beta)?, axes)? };
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    let weights = dens.weights();
    let ptf = ou_apply_vertical(g, psi, t, test, &dens)?;
    let mut lhs = 0.0;
    let mut rhs0 = 0.0;
    for i in 0..dens.len() {
        let jp = sign * dens.values[i];
        let v = dens.node(i).1[0];
        lhs += weights[i] * ptf[i] * jp;
        rhs0 += weights[i] * test.eval(v) * jp;
    }
    let rhs = (-2.0 * order as f64 * t).exp() * rhs0;
    let residual = if rhs.abs() > 0.0 { ((lhs - rhs) / rhs).abs() } else { lhs.abs() };
    log::info!("co-eigen weak form β={beta:?} t={t}: lhs={lhs:e} rhs={rhs:e}");
    Ok(IntertwinerReport::new(
        format!("P^psi*_t J_beta = e^(-2|beta|t) J_beta (beta={beta:?})"),
        format!("{test:?}"),
        t,
        residual,
        tolerance,
    ))
}

/// Samples of ψ(λ) − 𝔫(β, λ, ν) for real ψ along rays λ = r·u, used to probe the spectrum's supremum.
pub fn spectrum_sup_along_rays(g: &CarnotGroup, psi: Option<&LevyExponent>, radii: &[f64]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let m = g.m();
    for r in radii {
        let lambda: Vec<f64> = (0..m).map(|i| if i == 0 { *r } else { 0.5 * r }).collect();
        let fr = frame_at(g, &lambda)?;
        if !fr.is_generic() {
            continue;
        }
        let beta = vec![0; fr.d];
        let nu = vec![0.0; fr.k];
        let p = psi.map(|p| p.eval(&lambda).re).unwrap_or(0.0);
        out.insert(format!("{r:e}"), p - harmonic_eigenvalue(&fr, &beta, &nu)?);
    }
    Ok(out)
}

/// Largest |coefficient| of p.
pub fn max_coeff(p: &RatPoly) -> Rational {
    p.terms().map(|(_, c)| c.abs()).fold(Rational::zero(), |a, b| if b > a { b } else { a })
}

/// Gauss–Hermite expectation E φ(μ + s Z), Z ~ N(0,1); used for Gaussian vertical increments.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(mu: f64, s: f64, nodes: usize, f: F) -> f64 {
    let gh = GaussHermite::new(nodes);
    let norm = std::f64::consts::PI.sqrt();
    gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * f(mu + s * std::f64::consts::SQRT_2 * x)).sum::<f64>() / norm
}
