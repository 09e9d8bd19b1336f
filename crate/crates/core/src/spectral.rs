//! Per-λ symplectic data of Ω(λ) = Σ λ_l A_l and spectrum descriptions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{arg, CarnotError, Result};
use crate::group::CarnotGroup;
use crate::levy::LevyExponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stratum {
    Generic,
    /// Rank of Ω(λ) below the generic rank.
    Degenerate { rank: usize },
}

#[derive(Debug, Clone)]
pub struct SpectralFrame {
    pub lambda: Vec<f64>,
    /// η_1 ≥ … ≥ η_d > 0
    pub eta: Vec<f64>,
    pub pf: f64,
    pub d: usize,
    pub k: usize,
    /// Columns X_1, Y_1, …, X_d, Y_d, R_1, …, R_k.
    pub frame: DMatrix<f64>,
    pub stratum: Stratum,
}

impl SpectralFrame {
    pub fn is_generic(&self) -> bool {
        self.stratum == Stratum::Generic
    }

    /// Errors unless the frame lies in the generic stratum.
    pub fn require_generic(&self, generic_rank: usize) -> Result<&Self> {
        match self.stratum {
            Stratum::Generic => Ok(self),
            Stratum::Degenerate { rank } => {
                Err(CarnotError::Degenerate { lambda: self.lambda.clone(), rank, generic: generic_rank })
            }
        }
    }

    /// Frame coordinates (z_1, …, z_d, r) of h, with z_j = (⟨X_j,h⟩, ⟨Y_j,h⟩).
    pub fn coordinates(&self, h: &[f64]) -> Vec<f64> {
        (self.frame.transpose() * DVector::from_column_slice(h)).iter().copied().collect()
    }

    /// frameᵀ Ω frame, which is ⊕_j [[0, η_j], [−η_j, 0]] ⊕ 0_k.
    pub fn normal_form(&self, g: &CarnotGroup) -> DMatrix<f64> {
        self.frame.transpose() * g.omega_matrix(&self.lambda) * &self.frame
    }
}

/// Symplectic normal form of Ω(λ) from the eigen-decomposition of ΩᵀΩ = −Ω².
pub fn frame_at(g: &CarnotGroup, lambda: &[f64]) -> Result<SpectralFrame> {
    if lambda.len() != g.m() {
        return arg(format!("lambda has length {}, group has m = {}", lambda.len(), g.m()));
    }
    if lambda.iter().all(|x| *x == 0.0) {
        return arg("frame_at needs lambda ≠ 0");
    }
    let n = g.n();
    let omega = g.omega_matrix(lambda);
    let onorm = omega.norm();
    let s = omega.transpose() * &omega;
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let thr = (1e-10 * onorm).powi(2);
    let nonzero = order.iter().filter(|&&i| eig.eigenvalues[i] > thr).count();
    let rank = nonzero - nonzero % 2;
    let d = rank / 2;
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(d);
    // walk clusters of equal eigenvalues so repeated η get an orthonormal symplectic basis
    let mut idx = 0;
    while eta.len() < d && idx < rank {
        let mu = eig.eigenvalues[order[idx]];
        let mut cluster = vec![];
        while idx < n && (eig.eigenvalues[order[idx]] - mu).abs() <= 1e-9 * mu.max(1e-300) + thr {
            cluster.push(order[idx]);
            idx += 1;
        }
        let mut cands: Vec<DVector<f64>> = cluster.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        for c in cands.iter_mut() {
            // deterministic sign: first component above noise positive
            if let Some(x) = c.iter().find(|x| x.abs() > 1e-8) {
                if *x < 0.0 {
                    *c = -c.clone();
                }
            }
        }
        cands.sort_by(|a, b| {
            for (x, y) in a.iter().zip(b.iter()) {
                if (x - y).abs() > 1e-12 {
                    return y.total_cmp(x);
                }
            }
            std::cmp::Ordering::Equal
        });
        let e = mu.sqrt();
        for c in cands {
            if eta.len() == d || cols.len() >= 2 * d {
                break;
            }
            let mut x = c;
            for q in &cols {
                x -= q * q.dot(&x);
            }
            let nx = x.norm();
            if nx < 0.5 {
                continue;
            }
            x /= nx;
            let mut y = -(&omega * &x) / e;
            for q in &cols {
                y -= q * q.dot(&y);
            }
            let ny = y.norm();
            if ny < 0.5 {
                continue;
            }
            y /= ny;
            cols.push(x);
            cols.push(y);
            eta.push(e);
        }
    }
    if eta.len() != d {
        return Err(CarnotError::Internal(format!("failed to assemble a symplectic frame at {lambda:?}")));
    }
    // radical: remaining eigenvectors, orthonormalized against the symplectic part
    for &i in order.iter().skip(rank) {
        let mut r = eig.eigenvectors.column(i).into_owned();
        for q in &cols {
            r -= q * q.dot(&r);
        }
        let nr = r.norm();
        if nr > 0.5 {
            cols.push(r / nr);
        }
        if cols.len() == n {
            break;
        }
    }
    let frame = DMatrix::from_columns(&cols);
    let pf = eta.iter().product();
    let stratum = if rank < g.generic_rank() { Stratum::Degenerate { rank } } else { Stratum::Generic };
    Ok(SpectralFrame { lambda: lambda.to_vec(), eta, pf, d, k: n - rank, frame, stratum })
}

/// 𝔫(β, λ, ν) = Σ_j (2β_j + 1) η_j + |ν|².
pub fn harmonic_eigenvalue(frame: &SpectralFrame, beta: &[u32], nu: &[f64]) -> Result<f64> {
    if beta.len() != frame.d {
        return arg(format!("beta has length {}, expected d = {}", beta.len(), frame.d));
    }
    if nu.len() != frame.k {
        return arg(format!("nu has length {}, expected k = {}", nu.len(), frame.k));
    }
    let osc: f64 = beta.iter().zip(&frame.eta).map(|(b, e)| (2 * b + 1) as f64 * e).sum();
    Ok(osc + nu.iter().map(|x| x * x).sum::<f64>())
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SpectrumDescription {
    /// (−∞, sup]
    Interval { sup: f64 },
    /// {ψ(λ) − 𝔫(β,λ,ν)}, with Im of the spectrum equal to the range of Im ψ.
    Parametric { group: CarnotGroup, psi: LevyExponent },
}

impl SpectrumDescription {
    /// Sampled spectrum point ψ(λ) − 𝔫(β,λ,ν).
    pub fn point(g: &CarnotGroup, psi: Option<&LevyExponent>, beta: &[u32], lambda: &[f64], nu: &[f64]) -> Result<Complex64> {
        let fr = frame_at(g, lambda)?;
        let n = harmonic_eigenvalue(&fr, beta, nu)?;
        let p = psi.map(|p| p.eval(lambda)).unwrap_or_default();
        Ok(p - n)
    }

    /// Draw `count` spectrum points with λ uniform on a ball of radius `radius`.
    pub fn sample<R: Rng>(
        g: &CarnotGroup,
        psi: Option<&LevyExponent>,
        count: usize,
        radius: f64,
        max_beta: u32,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let lambda: Vec<f64> = (0..g.m()).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            if lambda.iter().all(|x| *x == 0.0) {
                continue;
            }
            let fr = frame_at(g, &lambda)?;
            if !fr.is_generic() {
                continue;
            }
            let beta: Vec<u32> = (0..fr.d).map(|_| rng.random_range(0..=max_beta)).collect();
            let nu: Vec<f64> = (0..fr.k).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            out.push(Self::point(g, psi, &beta, &lambda, &nu)?);
        }
        Ok(out)
    }
}

/// Spectrum of Δ_H + A^ψ_𝒱: an interval (−∞, ψ(0)] for real ψ, otherwise the set S_ψ.
pub fn spectrum_of_generator(g: &CarnotGroup, psi: Option<&LevyExponent>) -> SpectrumDescription {
    match psi {
        Some(p) if !p.flags().is_real_valued => {
            SpectrumDescription::Parametric { group: g.clone(), psi: p.clone() }
        }
        Some(p) => SpectrumDescription::Interval { sup: p.eval(&vec![0.0; p.m()]).re },
        None => SpectrumDescription::Interval { sup: 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_frames() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let f = frame_at(&g, &[3.0]).unwrap();
        assert_eq!((f.d, f.k), (1, 0));
        assert!((f.eta[0] - 3.0).abs() < 1e-14 && (f.pf - 3.0).abs() < 1e-14);
        let f = frame_at(&g, &[-2.0]).unwrap();
        assert!((f.eta[0] - 2.0).abs() < 1e-14);
        let nf = f.normal_form(&g);
        assert!((nf[(0, 1)] - 2.0).abs() < 1e-12 && (nf[(1, 0)] + 2.0).abs() < 1e-12);
        assert!(frame_at(&g, &[0.0]).is_err());
    }

    #[test]
    fn nonisotropic_weights() {
        let g = CarnotGroup::nonisotropic_heisenberg(&[1.0, 2.5]).unwrap();
        let f = frame_at(&g, &[1.0]).unwrap();
        assert!((f.eta[0] - 2.5).abs() < 1e-13 && (f.eta[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn harmonic_examples() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        assert_eq!(harmonic_eigenvalue(&frame_at(&g, &[1.0]).unwrap(), &[0], &[]).unwrap(), 1.0);
        assert!((harmonic_eigenvalue(&frame_at(&g, &[3.0]).unwrap(), &[2], &[]).unwrap() - 15.0).abs() < 1e-12);
        assert!(harmonic_eigenvalue(&frame_at(&g, &[3.0]).unwrap(), &[2, 1], &[]).is_err());
        let small = harmonic_eigenvalue(&frame_at(&g, &[1e-9]).unwrap(), &[0], &[]).unwrap();
        assert!(small < 1e-8);
    }

    #[test]
    fn free_group_has_radical() {
        let g = CarnotGroup::free_step2().unwrap();
        let f = frame_at(&g, &[0.3, -1.0, 0.4]).unwrap();
        assert_eq!((f.d, f.k), (1, 1));
        let nf = f.normal_form(&g);
        assert!(nf.column(2).amax() < 1e-12);
    }

    #[test]
    fn degenerate_direction_flagged() {
        let g = CarnotGroup::free_step2().unwrap();
        // free group has generic rank 2 everywhere; build a group whose rank drops on a line
        let a1 = DMatrix::from_row_slice(4, 4, &[0., 1., 0., 0., -1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.]);
        let a2 = DMatrix::from_row_slice(4, 4, &[0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., -1., 0.]);
        let h = CarnotGroup::new(4, 2, vec![a1, a2], "H1xH1").unwrap();
        assert_eq!(h.generic_rank(), 4);
        let f = frame_at(&h, &[1.0, 0.0]).unwrap();
        assert_eq!(f.stratum, Stratum::Degenerate { rank: 2 });
        assert!(f.require_generic(4).is_err());
        assert!(frame_at(&g, &[1.0, 0.0, 0.0]).unwrap().is_generic());
    }

    #[test]
    fn spectrum_kinds() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        assert!(matches!(spectrum_of_generator(&g, None), SpectrumDescription::Interval { sup } if sup == 0.0));
        let lap = LevyExponent::gaussian(DMatrix::identity(1, 1)).unwrap();
        assert!(matches!(spectrum_of_generator(&g, Some(&lap)), SpectrumDescription::Interval { sup } if sup == 0.0));
        let drift = LevyExponent::new(DMatrix::zeros(1, 1), vec![1.0], crate::levy::JumpSpec::None).unwrap();
        assert!(matches!(spectrum_of_generator(&g, Some(&drift)), SpectrumDescription::Parametric { .. }));
        let mut rng = crate::mc::stream_rng(5, 0);
        let pts = SpectrumDescription::sample(&g, Some(&drift), 100, 5.0, 6, &mut rng).unwrap();
        assert!(pts.iter().all(|z| z.re <= 0.0));
    }
}
