//! Step-2 Carnot groups in exponential coordinates g = (h, v) ∈ ℝⁿ × ℝᵐ.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg, CarnotError, Result};

const SKEW_TOL: f64 = 1e-12;

/// JSON form of a group: `{"n": 2, "m": 1, "A": [[[0,1],[-1,0]]], "label": "H1"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupSpec {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarnotGroup {
    n: usize,
    m: usize,
    a: Vec<DMatrix<f64>>,
    label: String,
    generic_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl GroupElement {
    pub fn new(h: Vec<f64>, v: Vec<f64>) -> Self {
        Self { h, v }
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self { h: vec![0.0; n], v: vec![0.0; m] }
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Coordinates concatenated as (h, v).
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.h.clone();
        c.extend_from_slice(&self.v);
        c
    }
}

/// |(h,v)|_G = sqrt(|h|² + Σ|v_j|).
pub fn homogeneous_norm(g: &GroupElement) -> f64 {
    let h2: f64 = g.h.iter().map(|x| x * x).sum();
    let v1: f64 = g.v.iter().map(|x| x.abs()).sum();
    (h2 + v1).sqrt()
}

impl CarnotGroup {
    /// Validates and symmetrizes the structure matrices.
    pub fn new(n: usize, m: usize, a: Vec<DMatrix<f64>>, label: impl Into<String>) -> Result<Self> {
        if n == 0 || m == 0 {
            return arg("n and m must be positive");
        }
        if n + m < 3 {
            return arg(format!("n + m = {} must be at least 3", n + m));
        }
        if a.len() != m {
            return arg(format!("expected {m} structure matrices, got {}", a.len()));
        }
        let mut skew = Vec::with_capacity(m);
        for (l, al) in a.into_iter().enumerate() {
            if al.nrows() != n || al.ncols() != n {
                return arg(format!("A_{} has shape {}x{}, expected {n}x{n}", l + 1, al.nrows(), al.ncols()));
            }
            if al.iter().any(|x| !x.is_finite()) {
                return arg(format!("A_{} has non-finite entries", l + 1));
            }
            let sym = (&al + al.transpose()) * 0.5;
            let dev = sym.amax();
            if dev > SKEW_TOL {
                return arg(format!("A_{} is not skew-symmetric (max |A+Aᵀ|/2 = {dev:e})", l + 1));
            }
            skew.push((&al - al.transpose()) * 0.5);
        }
        let mut g = Self { n, m, a: skew, label: label.into(), generic_rank: 0 };
        g.generic_rank = g.estimate_generic_rank();
        if g.generic_rank < 2 {
            return arg("structure matrices vanish: the group is abelian");
        }
        Ok(g)
    }

    pub fn from_spec(spec: &GroupSpec) -> Result<Self> {
        let mut mats = Vec::with_capacity(spec.a.len());
        for (l, rows) in spec.a.iter().enumerate() {
            if rows.len() != spec.n || rows.iter().any(|r| r.len() != spec.n) {
                return arg(format!("A_{} must be {}x{}", l + 1, spec.n, spec.n));
            }
            mats.push(DMatrix::from_fn(spec.n, spec.n, |i, j| rows[i][j]));
        }
        Self::new(spec.n, spec.m, mats, spec.label.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GroupSpec =
            serde_json::from_str(text).map_err(|e| CarnotError::Argument(format!("group spec: {e}")))?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> GroupSpec {
        GroupSpec {
            n: self.n,
            m: self.m,
            a: self
                .a
                .iter()
                .map(|al| (0..self.n).map(|i| (0..self.n).map(|j| al[(i, j)]).collect()).collect())
                .collect(),
            label: self.label.clone(),
        }
    }

    /// Heisenberg group H^d with A_1 = ⊕ [[0,1],[-1,0]] in coordinates (x_1,y_1,…,x_d,y_d).
    pub fn heisenberg(d: usize) -> Result<Self> {
        Self::nonisotropic_heisenberg(&vec![1.0; d])
    }

    /// Heisenberg type group with symplectic weights a_j > 0.
    pub fn nonisotropic_heisenberg(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
            return arg("weights must be positive");
        }
        let d = weights.len();
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        for (j, w) in weights.iter().enumerate() {
            a[(2 * j, 2 * j + 1)] = *w;
            a[(2 * j + 1, 2 * j)] = -*w;
        }
        let label = if weights.iter().all(|w| *w == 1.0) {
            format!("H{d}")
        } else {
            format!("H{d}{weights:?}")
        };
        Self::new(2 * d, 1, vec![a], label)
    }

    /// H-type group: requires A_l A_k + A_k A_l = -2 δ_lk I.
    pub fn h_type(a: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = a.len();
        let n = a.first().map(|x| x.nrows()).unwrap_or(0);
        for l in 0..m {
            for k in 0..m {
                if a[l].nrows() != n || a[l].ncols() != n {
                    return arg("H-type matrices must share a square shape");
                }
                let ac = &a[l] * &a[k] + &a[k] * &a[l];
                let target = if l == k { DMatrix::identity(n, n) * -2.0 } else { DMatrix::zeros(n, n) };
                if (ac - target).amax() > 1e-10 {
                    return arg(format!("A_{} and A_{} violate the H-type relation", l + 1, k + 1));
                }
            }
        }
        Self::new(n, m, a, format!("Htype(n={n},m={m})"))
    }

    /// Quaternionic H-type group with n = 4, m = 3.
    pub fn quaternionic() -> Result<Self> {
        let i = [[0., 1., 0., 0.], [-1., 0., 0., 0.], [0., 0., 0., -1.], [0., 0., 1., 0.]];
        let j = [[0., 0., 1., 0.], [0., 0., 0., 1.], [-1., 0., 0., 0.], [0., -1., 0., 0.]];
        let k = [[0., 0., 0., 1.], [0., 0., -1., 0.], [0., 1., 0., 0.], [-1., 0., 0., 0.]];
        let to = |x: [[f64; 4]; 4]| DMatrix::from_fn(4, 4, |r, c| x[r][c]);
        Self::h_type(vec![to(i), to(j), to(k)])
    }

    /// Free step-2 group on three generators: n = 3, m = 3, A_(ij) = E_ij − E_ji.
    pub fn free_step2() -> Result<Self> {
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let a = pairs
            .iter()
            .map(|&(i, j)| {
                let mut e = DMatrix::zeros(3, 3);
                e[(i, j)] = 1.0;
                e[(j, i)] = -1.0;
                e
            })
            .collect();
        Self::new(3, 3, a, "free(3,2)")
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn structure(&self) -> &[DMatrix<f64>] {
        &self.a
    }
    /// Rank 2d of Ω(λ) at generic λ.
    pub fn generic_rank(&self) -> usize {
        self.generic_rank
    }
    pub fn d(&self) -> usize {
        self.generic_rank / 2
    }
    pub fn k(&self) -> usize {
        self.n - self.generic_rank
    }
    /// Homogeneous dimension n + 2m.
    pub fn homogeneous_dim(&self) -> usize {
        self.n + 2 * self.m
    }

    /// Ω(λ) = Σ λ_l A_l.
    pub fn omega_matrix(&self, lambda: &[f64]) -> DMatrix<f64> {
        let mut o = DMatrix::zeros(self.n, self.n);
        for (l, al) in self.a.iter().enumerate() {
            o += al * lambda[l];
        }
        o
    }

    /// ω(h, h') ∈ ℝᵐ with ω_l = ⟨A_l h, h'⟩.
    pub fn omega(&self, h1: &[f64], h2: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .map(|al| {
                let mut s = 0.0;
                for i in 0..self.n {
                    let mut row = 0.0;
                    for j in 0..self.n {
                        row += al[(i, j)] * h1[j];
                    }
                    s += row * h2[i];
                }
                s
            })
            .collect()
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if g.h.len() != self.n || g.v.len() != self.m {
            return arg(format!(
                "element has dimensions ({}, {}), group expects ({}, {})",
                g.h.len(),
                g.v.len(),
                self.n,
                self.m
            ));
        }
        Ok(())
    }

    /// g1 ⋆ g2 = (h1 + h2, v1 + v2 + ½ω(h1, h2)).
    pub fn mul(&self, g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
        self.check(g1)?;
        self.check(g2)?;
        Ok(self.mul_unchecked(g1, g2))
    }

    pub(crate) fn mul_unchecked(&self, g1: &GroupElement, g2: &GroupElement) -> GroupElement {
        let w = self.omega(&g1.h, &g2.h);
        GroupElement {
            h: g1.h.iter().zip(&g2.h).map(|(a, b)| a + b).collect(),
            v: (0..self.m).map(|l| g1.v[l] + g2.v[l] + 0.5 * w[l]).collect(),
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        Ok(GroupElement { h: g.h.iter().map(|x| -x).collect(), v: g.v.iter().map(|x| -x).collect() })
    }

    /// δ_c(h, v) = (c h, c² v).
    pub fn dilate(&self, c: f64, g: &GroupElement) -> Result<GroupElement> {
        if !(c > 0.0) || !c.is_finite() {
            return arg(format!("dilation factor must be positive, got {c}"));
        }
        self.check(g)?;
        Ok(dilate_unchecked(c, g))
    }

    fn estimate_generic_rank(&self) -> usize {
        // Deterministic quasi-random directions; the rank is lower semicontinuous so the
        // maximum over a handful of directions is the generic value.
        let mut best = 0;
        for s in 0..12 {
            let lambda: Vec<f64> = (0..self.m)
                .map(|l| {
                    let x = ((s * 7 + l * 13 + 1) as f64 * 0.618_033_988_749_895).fract();
                    2.0 * x - 0.9
                })
                .collect();
            best = best.max(skew_rank(&self.omega_matrix(&lambda)));
        }
        best
    }

    /// Random elements with entries in [-scale, scale], reproducible from a seed.
    pub fn random_element<R: rand::Rng>(&self, rng: &mut R, scale: f64) -> GroupElement {
        GroupElement {
            h: (0..self.n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect(),
            v: (0..self.m).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect(),
        }
    }
}

pub(crate) fn dilate_unchecked(c: f64, g: &GroupElement) -> GroupElement {
    GroupElement { h: g.h.iter().map(|x| c * x).collect(), v: g.v.iter().map(|x| c * c * x).collect() }
}

/// Numerical rank of a skew matrix with threshold 1e-10·‖Ω‖.
pub(crate) fn skew_rank(o: &DMatrix<f64>) -> usize {
    let norm = o.norm();
    if norm == 0.0 {
        return 0;
    }
    let s = (o.transpose() * o).symmetric_eigenvalues();
    let thr = (1e-10 * norm).powi(2);
    let r = s.iter().filter(|&&x| x > thr).count();
    // eigenvalues of a skew matrix come in pairs
    r - r % 2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> CarnotGroup {
        CarnotGroup::heisenberg(1).unwrap()
    }

    #[test]
    fn heisenberg_product() {
        let g = h1();
        // ⟨A_1 (1,0), (0,1)⟩ = ⟨(0,−1), (0,1)⟩ = −1
        let p = g.mul(&GroupElement::new(vec![1., 0.], vec![0.]), &GroupElement::new(vec![0., 1.], vec![0.])).unwrap();
        assert_eq!(p, GroupElement::new(vec![1., 1.], vec![-0.5]));
        let q = g.mul(&GroupElement::new(vec![0., 1.], vec![0.]), &GroupElement::new(vec![1., 0.], vec![0.])).unwrap();
        assert_eq!(q, GroupElement::new(vec![1., 1.], vec![0.5]));
    }

    #[test]
    fn identity_and_inverse() {
        let g = h1();
        let x = GroupElement::new(vec![0.3, -1.2], vec![2.5]);
        assert_eq!(g.mul(&x, &GroupElement::identity(2, 1)).unwrap(), x);
        let inv = g.inverse(&x).unwrap();
        assert_eq!(g.mul(&x, &inv).unwrap(), GroupElement::identity(2, 1));
    }

    #[test]
    fn dilation_examples() {
        let g = h1();
        let x = GroupElement::new(vec![1., 1.], vec![1.]);
        assert_eq!(g.dilate(1.0, &x).unwrap(), x);
        assert_eq!(g.dilate(2.0, &x).unwrap(), GroupElement::new(vec![2., 2.], vec![4.]));
        assert!(g.dilate(0.0, &x).is_err());
        assert!(g.dilate(-1.0, &x).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(homogeneous_norm(&GroupElement::identity(2, 1)), 0.0);
        assert_eq!(homogeneous_norm(&GroupElement::new(vec![3., 4.], vec![0.])), 5.0);
        assert_eq!(homogeneous_norm(&GroupElement::new(vec![0., 0.], vec![-4.])), 2.0);
    }

    #[test]
    fn rejects_bad_structure() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let err = CarnotGroup::new(2, 1, vec![bad], "bad").unwrap_err();
        assert!(err.to_string().contains("A_1"));
        let zero = DMatrix::zeros(2, 2);
        assert!(CarnotGroup::new(2, 1, vec![zero], "abelian").is_err());
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(CarnotGroup::new(1, 1, vec![j.clone()], "small").is_err());
        let g = CarnotGroup::heisenberg(1).unwrap();
        assert!(g.mul(&GroupElement::new(vec![1.0], vec![0.0]), &GroupElement::identity(2, 1)).is_err());
    }

    #[test]
    fn near_skew_is_symmetrized() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0 + 1e-13, -1.0, 0.0]);
        let g = CarnotGroup::new(2, 1, vec![a], "h").unwrap();
        let s = &g.structure()[0];
        assert_eq!(s[(0, 1)], -s[(1, 0)]);
    }

    #[test]
    fn named_constructors() {
        let q = CarnotGroup::quaternionic().unwrap();
        assert_eq!((q.n(), q.m(), q.d(), q.k()), (4, 3, 2, 0));
        let f = CarnotGroup::free_step2().unwrap();
        assert_eq!((f.n(), f.m(), f.d(), f.k()), (3, 3, 1, 1));
        let h = CarnotGroup::nonisotropic_heisenberg(&[1.0, 2.0]).unwrap();
        assert_eq!((h.d(), h.k()), (2, 0));
    }

    #[test]
    fn json_round_trip() {
        let g = CarnotGroup::heisenberg(2).unwrap();
        let text = serde_json::to_string(&g.to_spec()).unwrap();
        assert!(text.contains("\"A\""));
        let back = CarnotGroup::from_json(&text).unwrap();
        assert_eq!(back, g);
    }
}
