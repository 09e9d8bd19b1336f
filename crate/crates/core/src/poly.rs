//! Polynomials on G graded by the dilations: deg h_i = 1, deg v_j = 2.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};

use crate::error::{arg, Result};
use crate::group::CarnotGroup;
use crate::levy::LevyExponent;

/// Exponents over (h_1..h_n, v_1..v_m).
pub type Exponents = Vec<u32>;

pub trait Coeff: Clone + fmt::Debug + PartialEq + Num + FromPrimitive + ToPrimitive + Send + Sync {}
impl<T> Coeff for T where T: Clone + fmt::Debug + PartialEq + Num + FromPrimitive + ToPrimitive + Send + Sync {}

pub type Rational = BigRational;

/// Exact conversion of a finite float.
pub fn rat(x: f64) -> Rational {
    Rational::from_f64(x).expect("finite float")
}

pub fn rat_to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, PartialEq)]
pub struct GradedPolynomial<C: Coeff = Rational> {
    nh: usize,
    nv: usize,
    terms: BTreeMap<Exponents, C>,
}

pub type RatPoly = GradedPolynomial<Rational>;
pub type FloatPoly = GradedPolynomial<f64>;

pub fn graded_degree(e: &[u32], nh: usize) -> u32 {
    e[..nh].iter().sum::<u32>() + 2 * e[nh..].iter().sum::<u32>()
}

/// All multi-indices of total order `order` over `k` variables.
pub fn multi_indices_of_order(k: usize, order: usize) -> Vec<Exponents> {
    fn rec(k: usize, left: u32, cur: &mut Exponents, out: &mut Vec<Exponents>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(k, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        if order == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(k, order as u32, &mut Vec::new(), &mut out);
    out
}

/// Monomials of graded degree exactly `k`, in a fixed deterministic order.
pub fn homogeneous_monomials(nh: usize, nv: usize, k: u32) -> Vec<Exponents> {
    let mut out = Vec::new();
    for vdeg in 0..=k / 2 {
        let hdeg = k - 2 * vdeg;
        for a in multi_indices_of_order(nh, hdeg as usize) {
            for g in multi_indices_of_order(nv, vdeg as usize) {
                let mut e = a.clone();
                e.extend(g);
                out.push(e);
            }
        }
    }
    out
}

/// Basis of 𝓑_cap = 𝒫_0 + … + 𝒫_cap ordered by graded degree.
pub fn monomial_basis(nh: usize, nv: usize, cap: u32) -> Vec<Exponents> {
    (0..=cap).flat_map(|k| homogeneous_monomials(nh, nv, k)).collect()
}

impl<C: Coeff> GradedPolynomial<C> {
    pub fn zero(nh: usize, nv: usize) -> Self {
        Self { nh, nv, terms: BTreeMap::new() }
    }

    pub fn constant(nh: usize, nv: usize, c: C) -> Self {
        Self::monomial(nh, nv, vec![0; nh + nv], c)
    }

    pub fn monomial(nh: usize, nv: usize, e: Exponents, c: C) -> Self {
        assert_eq!(e.len(), nh + nv, "exponent length mismatch");
        let mut p = Self::zero(nh, nv);
        p.add_term(e, c);
        p
    }

    pub fn h(nh: usize, nv: usize, i: usize) -> Self {
        let mut e = vec![0; nh + nv];
        e[i] = 1;
        Self::monomial(nh, nv, e, C::one())
    }

    pub fn v(nh: usize, nv: usize, j: usize) -> Self {
        let mut e = vec![0; nh + nv];
        e[nh + j] = 1;
        Self::monomial(nh, nv, e, C::one())
    }

    pub fn from_terms(nh: usize, nv: usize, terms: impl IntoIterator<Item = (Exponents, C)>) -> Self {
        let mut p = Self::zero(nh, nv);
        for (e, c) in terms {
            assert_eq!(e.len(), nh + nv, "exponent length mismatch");
            p.add_term(e, c);
        }
        p
    }

    pub fn nh(&self) -> usize {
        self.nh
    }
    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> C {
        self.terms.get(e).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, e: Exponents, c: C) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// Maximum graded degree, `None` for the zero polynomial.
    pub fn graded_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| graded_degree(e, self.nh)).max()
    }

    pub fn is_homogeneous(&self, k: u32) -> bool {
        self.terms.keys().all(|e| graded_degree(e, self.nh) == k)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(e.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&(C::zero() - C::one())))
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut r = Self::zero(self.nh, self.nv);
        for (e, c) in &self.terms {
            r.add_term(e.clone(), c.clone() * s.clone());
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.nh, self.nv);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                r.add_term(e, c1.clone() * c2.clone());
            }
        }
        r
    }

    /// ∂/∂x_var with var indexing (h, v) jointly.
    pub fn derivative(&self, var: usize) -> Self {
        let mut r = Self::zero(self.nh, self.nv);
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut f = e.clone();
                f[var] -= 1;
                r.add_term(f, c.clone() * C::from_u32(e[var]).expect("small integer"));
            }
        }
        r
    }

    /// Multiply by x_var.
    pub fn times_var(&self, var: usize) -> Self {
        let mut r = Self::zero(self.nh, self.nv);
        for (e, c) in &self.terms {
            let mut f = e.clone();
            f[var] += 1;
            r.add_term(f, c.clone());
        }
        r
    }

    /// Vertical partial derivative ∂^γ_v.
    pub fn vertical_derivative(&self, g: &[u32]) -> Self {
        let mut r = self.clone();
        for (j, &k) in g.iter().enumerate() {
            for _ in 0..k {
                r = r.derivative(self.nh + j);
            }
        }
        r
    }

    pub fn evaluate(&self, h: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for (e, c) in &self.terms {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (i, &k) in e.iter().enumerate() {
                let x = if i < self.nh { h[i] } else { v[i - self.nh] };
                t *= x.powi(k as i32);
            }
            s += t;
        }
        s
    }

    pub fn to_float(&self) -> FloatPoly {
        GradedPolynomial {
            nh: self.nh,
            nv: self.nv,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c.to_f64().unwrap_or(f64::NAN)))
                .filter(|(_, c)| *c != 0.0)
                .collect(),
        }
    }

    /// Exact rational image (floats are dyadic rationals).
    pub fn to_rational(&self) -> RatPoly {
        GradedPolynomial {
            nh: self.nh,
            nv: self.nv,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), rat(c.to_f64().unwrap_or(f64::NAN)))).collect(),
        }
    }

    /// Coefficient vector in the given monomial basis; errors if a term falls outside it.
    pub fn coefficients_in(&self, basis: &[Exponents]) -> Result<Vec<C>> {
        let mut out = vec![C::zero(); basis.len()];
        let index: BTreeMap<&Exponents, usize> = basis.iter().enumerate().map(|(i, e)| (e, i)).collect();
        for (e, c) in &self.terms {
            match index.get(e) {
                Some(&i) => out[i] = c.clone(),
                None => return arg(format!("monomial {e:?} is outside the basis")),
            }
        }
        Ok(out)
    }

    pub fn from_coefficients(nh: usize, nv: usize, basis: &[Exponents], coeffs: &[C]) -> Self {
        Self::from_terms(nh, nv, basis.iter().cloned().zip(coeffs.iter().cloned()))
    }

    /// Max |coefficient| of the difference, as f64.
    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.sub(o).terms.values().map(|c| c.to_f64().unwrap_or(f64::NAN).abs()).fold(0.0, f64::max)
    }
}

impl<C: Coeff> fmt::Debug for GradedPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<C: Coeff> fmt::Display for GradedPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", c.to_f64().unwrap_or(f64::NAN))?;
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let name = if i < self.nh { format!("h{}", i + 1) } else { format!("v{}", i - self.nh + 1) };
                if k == 1 {
                    write!(f, "·{name}")?;
                } else {
                    write!(f, "·{name}^{k}")?;
                }
            }
        }
        Ok(())
    }
}

fn check_dims<C: Coeff>(g: &CarnotGroup, p: &GradedPolynomial<C>) -> Result<()> {
    if p.nh != g.n() || p.nv != g.m() {
        return arg(format!("polynomial over ({}, {}) variables, group has ({}, {})", p.nh, p.nv, g.n(), g.m()));
    }
    Ok(())
}

/// Z_i p = ∂p/∂h_i + ½ Σ_l (A_l h)_i ∂p/∂v_l (i is zero-based).
pub fn apply_zi<C: Coeff>(g: &CarnotGroup, i: usize, p: &GradedPolynomial<C>) -> Result<GradedPolynomial<C>> {
    check_dims(g, p)?;
    if i >= g.n() {
        return arg(format!("vector field index {} out of range 1..={}", i + 1, g.n()));
    }
    Ok(zi_unchecked(g, i, p))
}

fn zi_unchecked<C: Coeff>(g: &CarnotGroup, i: usize, p: &GradedPolynomial<C>) -> GradedPolynomial<C> {
    let n = g.n();
    let half = C::one() / (C::one() + C::one());
    let mut r = p.derivative(i);
    for (l, al) in g.structure().iter().enumerate() {
        let dv = p.derivative(n + l);
        if dv.is_zero() {
            continue;
        }
        for j in 0..n {
            let a = al[(i, j)];
            if a != 0.0 {
                let c = C::from_f64(a).expect("finite structure constant") * half.clone();
                r = r.add(&dv.times_var(j).scale(&c));
            }
        }
    }
    r
}

/// Δ_H p = Σ_i Z_i² p.
pub fn apply_sub_laplacian<C: Coeff>(g: &CarnotGroup, p: &GradedPolynomial<C>) -> Result<GradedPolynomial<C>> {
    check_dims(g, p)?;
    let mut r = GradedPolynomial::zero(p.nh, p.nv);
    for i in 0..g.n() {
        r = r.add(&zi_unchecked(g, i, &zi_unchecked(g, i, p)));
    }
    Ok(r)
}

/// 𝔻p = −Σ h_i∂_{h_i}p − 2Σ v_j∂_{v_j}p, equal to −k·p on 𝒫_k.
pub fn apply_d<C: Coeff>(p: &GradedPolynomial<C>) -> GradedPolynomial<C> {
    let mut r = GradedPolynomial::zero(p.nh, p.nv);
    for (e, c) in &p.terms {
        let k = graded_degree(e, p.nh);
        r.add_term(e.clone(), C::zero() - c.clone() * C::from_u32(k).expect("small integer"));
    }
    r
}

/// Σ_γ c_γ ∂^γ_v p for a vertical symbol {(γ, c_γ)}.
pub fn apply_vertical_symbol(p: &RatPoly, symbol: &[(Exponents, Rational)]) -> RatPoly {
    let mut r = RatPoly::zero(p.nh, p.nv);
    for (gm, c) in symbol {
        let d = p.vertical_derivative(gm);
        if !d.is_zero() {
            r = r.add(&d.scale(c));
        }
    }
    r
}

/// Σ_{k≥0} op^k p / k!, for an operator that is nilpotent on p's span.
pub fn exp_nilpotent<F>(p: &RatPoly, op: F) -> RatPoly
where
    F: Fn(&RatPoly) -> RatPoly,
{
    let mut total = p.clone();
    let mut term = p.clone();
    let mut k = 1u32;
    loop {
        term = op(&term).scale(&Rational::new(1.into(), k.into()));
        if term.is_zero() {
            break;
        }
        total = total.add(&term);
        k += 1;
        assert!(k < 10_000, "operator is not nilpotent on this polynomial");
    }
    total
}

/// ℒ_ψ p = Δ_H p + 𝔻p + A^ψ_𝒱 p.
pub fn apply_generator(g: &CarnotGroup, symbol: &[(Exponents, Rational)], p: &RatPoly) -> Result<RatPoly> {
    Ok(apply_sub_laplacian(g, p)?.add(&apply_d(p)).add(&apply_vertical_symbol(p, symbol)))
}

/// Vertical symbol of ψ needed on polynomials of graded degree ≤ cap.
pub fn symbol_for(psi: Option<&LevyExponent>, g: &CarnotGroup, cap: u32) -> Result<Vec<(Exponents, Rational)>> {
    match psi {
        None => Ok(vec![]),
        Some(p) => {
            if p.m() != g.m() {
                return arg(format!("exponent has dimension {}, group has m = {}", p.m(), g.m()));
            }
            p.symbol_coefficients((cap / 2) as usize)
        }
    }
}

/// Matrix of a linear operator on 𝓑_cap.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub basis: Vec<Exponents>,
    pub degrees: Vec<u32>,
    pub exact: Vec<Vec<Rational>>,
    pub entries: DMatrix<f64>,
    pub degree_cap: u32,
    pub nh: usize,
    pub nv: usize,
}

impl GeneratorMatrix {
    pub fn from_operator<F>(nh: usize, nv: usize, cap: u32, op: F) -> Result<Self>
    where
        F: Fn(&RatPoly) -> Result<RatPoly>,
    {
        let basis = monomial_basis(nh, nv, cap);
        let dim = basis.len();
        let mut exact = vec![vec![Rational::zero(); dim]; dim];
        for (j, e) in basis.iter().enumerate() {
            let img = op(&RatPoly::monomial(nh, nv, e.clone(), Rational::from_integer(1.into())))?;
            let col = img.coefficients_in(&basis)?;
            for (i, c) in col.into_iter().enumerate() {
                exact[i][j] = c;
            }
        }
        let entries = DMatrix::from_fn(dim, dim, |i, j| rat_to_f64(&exact[i][j]));
        let degrees = basis.iter().map(|e| graded_degree(e, nh)).collect();
        Ok(Self { basis, degrees, exact, entries, degree_cap: cap, nh, nv })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn apply_exact(&self, p: &RatPoly) -> Result<RatPoly> {
        let x = p.coefficients_in(&self.basis)?;
        let y: Vec<Rational> = (0..self.dim())
            .map(|i| {
                let mut s = Rational::zero();
                for (j, xj) in x.iter().enumerate() {
                    if !xj.is_zero() && !self.exact[i][j].is_zero() {
                        s += &self.exact[i][j] * xj;
                    }
                }
                s
            })
            .collect();
        Ok(RatPoly::from_coefficients(self.nh, self.nv, &self.basis, &y))
    }
}

/// Matrix of ℒ_ψ = Δ_H + 𝔻 + A^ψ_𝒱 on 𝓑_cap.
pub fn generator_matrix(g: &CarnotGroup, psi: Option<&LevyExponent>, cap: u32) -> Result<GeneratorMatrix> {
    let symbol = symbol_for(psi, g, cap)?;
    GeneratorMatrix::from_operator(g.n(), g.m(), cap, |p| apply_generator(g, &symbol, p))
}
