//! Randomized invariants across the library.

use carnot::hermite::hermite_phi;
use carnot::mc::{estimate_charfn, simulate_levy_on_g, PathConfig};
use carnot::poly::{apply_d, apply_sub_laplacian, apply_zi, Rational};
use carnot::semigroup::{apply_to_polynomial, SemigroupKind, SemigroupOperator};
use carnot::{frame_at, homogeneous_norm, CarnotGroup, GroupElement, JumpSpec, LevyExponent, RatPoly};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn groups() -> Vec<CarnotGroup> {
    vec![
        CarnotGroup::heisenberg(1).unwrap(),
        CarnotGroup::heisenberg(2).unwrap(),
        CarnotGroup::quaternionic().unwrap(),
        CarnotGroup::free_step2().unwrap(),
        CarnotGroup::nonisotropic_heisenberg(&[1.0, 2.5]).unwrap(),
    ]
}

fn element(g: &CarnotGroup, coords: &[f64]) -> GroupElement {
    let (n, m) = (g.n(), g.m());
    GroupElement::new(coords[..n].to_vec(), coords[n..n + m].to_vec())
}

fn close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
    a.coords().iter().zip(b.coords()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 12)
}

fn small_poly() -> impl Strategy<Value = RatPoly> {
    prop::collection::vec(((0u32..3, 0u32..3, 0u32..2), -5i64..6, 1i64..4), 1..5).prop_map(|terms| {
        RatPoly::from_terms(
            2,
            1,
            terms.into_iter().map(|((a, b, c), num, den)| (vec![a, b, c], Rational::new(num.into(), den.into()))),
        )
    })
}

fn psis() -> Vec<LevyExponent> {
    vec![
        LevyExponent::gaussian(DMatrix::from_element(1, 1, 1.0)).unwrap(),
        LevyExponent::new(DMatrix::from_element(1, 1, 0.5), vec![0.7], JumpSpec::None).unwrap(),
        LevyExponent::new(
            DMatrix::zeros(1, 1),
            vec![-0.2],
            JumpSpec::CompoundPoisson {
                rate: 3.0,
                distribution: carnot::levy::JumpDistribution::Normal { mean: vec![0.4], std: 1.0 },
            },
        )
        .unwrap(),
        LevyExponent::new(DMatrix::zeros(1, 1), vec![0.0], JumpSpec::Stable { alpha: 1.3, scale: 0.8 }).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_product_is_associative(gi in 0usize..5, a in coords(), b in coords(), c in coords()) {
        let g = &groups()[gi];
        let (x, y, z) = (element(g, &a), element(g, &b), element(g, &c));
        let left = g.mul(&g.mul(&x, &y).unwrap(), &z).unwrap();
        let right = g.mul(&x, &g.mul(&y, &z).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn inverse_gives_identity(gi in 0usize..5, a in coords()) {
        let g = &groups()[gi];
        let x = element(g, &a);
        let e = g.mul(&x, &g.inverse(&x).unwrap()).unwrap();
        prop_assert!(close(&e, &GroupElement::identity(g.n(), g.m()), 1e-12));
    }

    #[test]
    fn dilations_form_a_group_of_automorphisms(gi in 0usize..5, a in coords(), b in coords(), c in 0.1f64..3.0, c2 in 0.1f64..3.0) {
        let g = &groups()[gi];
        let (x, y) = (element(g, &a), element(g, &b));
        let lhs = g.dilate(c, &g.dilate(c2, &x).unwrap()).unwrap();
        prop_assert!(close(&lhs, &g.dilate(c * c2, &x).unwrap(), 1e-12));
        let hom = g.dilate(c, &g.mul(&x, &y).unwrap()).unwrap();
        let prod = g.mul(&g.dilate(c, &x).unwrap(), &g.dilate(c, &y).unwrap()).unwrap();
        prop_assert!(close(&hom, &prod, 1e-12));
        let ratio = homogeneous_norm(&g.dilate(c, &x).unwrap()) / homogeneous_norm(&x).max(1e-300);
        prop_assert!(homogeneous_norm(&x) == 0.0 || (ratio - c).abs() < 1e-12 * c);
    }

    #[test]
    fn horizontal_fields_satisfy_leibniz(p in small_poly(), q in small_poly(), i in 0usize..2) {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let lhs = apply_zi(&g, i, &p.mul(&q)).unwrap();
        let rhs = apply_zi(&g, i, &p).unwrap().mul(&q).add(&p.mul(&apply_zi(&g, i, &q).unwrap()));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn grading_of_sub_laplacian_and_dilation_generator(p in small_poly()) {
        let g = CarnotGroup::heisenberg(1).unwrap();
        for k in 0..=4u32 {
            let hk = RatPoly::from_terms(2, 1, p.terms().filter(|(e, _)| e[0] + e[1] + 2 * e[2] == k).map(|(e, c)| (e.clone(), c.clone())));
            if hk.is_zero() {
                continue;
            }
            prop_assert_eq!(apply_d(&hk), hk.scale(&Rational::from_integer((-(k as i64)).into())));
            let l = apply_sub_laplacian(&g, &hk).unwrap();
            prop_assert!(l.is_zero() || (k >= 2 && l.is_homogeneous(k - 2)));
        }
    }

    #[test]
    fn symplectic_spectrum_is_homogeneous_and_consistent(gi in 0usize..5, l in prop::collection::vec(-2.0f64..2.0, 3), c in 0.2f64..5.0) {
        let g = &groups()[gi];
        let lambda: Vec<f64> = l[..g.m()].to_vec();
        prop_assume!(lambda.iter().map(|x| x * x).sum::<f64>() > 1e-4);
        let fr = frame_at(g, &lambda).unwrap();
        prop_assume!(fr.is_generic());
        let scaled: Vec<f64> = lambda.iter().map(|x| c * x).collect();
        let fr2 = frame_at(g, &scaled).unwrap();
        for (a, b) in fr.eta.iter().zip(&fr2.eta) {
            prop_assert!((b - c * a).abs() < 1e-10 * c * a);
        }
        let n = g.n();
        let orth = fr.frame.transpose() * &fr.frame - DMatrix::identity(n, n);
        prop_assert!(orth.amax() < 1e-12);
        let nf = fr.normal_form(g);
        let block = nf.view((0, 0), (2 * fr.d, 2 * fr.d)).into_owned();
        prop_assert!((fr.pf * fr.pf - block.determinant()).abs() < 1e-10 * fr.pf * fr.pf);
    }

    #[test]
    fn exponents_are_negative_definite_and_hermitian(pi in 0usize..4, l in -6.0f64..6.0) {
        let psi = &psis()[pi];
        let a = psi.eval(&[l]);
        let b = psi.eval(&[-l]);
        prop_assert!(a.re <= 1e-14);
        prop_assert!((a - b.conj()).norm() < 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn time_deformed_exponents_obey_cocycles(pi in 0usize..4, l in -3.0f64..3.0, t in -1.0f64..1.0, s in -1.0f64..1.0) {
        let psi = &psis()[pi];
        let tol = if pi >= 2 { 1e-7 } else { 1e-10 };
        let lhs = psi.psi_t(t + s, &[l]).unwrap();
        let rhs = psi.psi_t(t, &[l]).unwrap() + psi.psi_t(s, &[(2.0 * t).exp() * l]).unwrap();
        prop_assert!((lhs - rhs).norm() < tol * (1.0 + lhs.norm()));
        let inv = psi.psi_minus_infinity(&[(2.0 * t).exp() * l]).unwrap();
        let rhs2 = psi.psi_minus_infinity(&[l]).unwrap() + psi.psi_t(t, &[l]).unwrap();
        prop_assert!((inv - rhs2).norm() < tol * (1.0 + inv.norm()));
    }

    #[test]
    fn hermite_functions_respect_sup_envelope(n in 1usize..200, x in -10.0f64..10.0) {
        prop_assert!(hermite_phi(n, x).unwrap().abs() <= 0.816);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polynomial_semigroups_compose(p in small_poly(), ti in 1u32..8, si in 1u32..8, kind in 0usize..4) {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let psi = psis()[1].clone();
        let kind = [SemigroupKind::Heat, SemigroupKind::LevyHeat, SemigroupKind::Ou, SemigroupKind::LevyOu][kind];
        // dyadic times keep the exact path free of rounding in t
        let (t, s) = (ti as f64 / 8.0, si as f64 / 4.0);
        let op = |time: f64| SemigroupOperator::new(kind, &g, Some(&psi), time).unwrap();
        let once = apply_to_polynomial(&op(t + s), &p).unwrap();
        let inner = apply_to_polynomial(&op(t), &p).unwrap().to_rational();
        let twice = apply_to_polynomial(&op(s), &inner).unwrap();
        let scale = once.terms().map(|(_, c)| c.abs()).fold(1.0, f64::max);
        prop_assert!(once.max_abs_diff(&twice) < 1e-12 * scale);
    }

    #[test]
    fn charfn_estimates_are_bounded(seed in 0u64..1000, l in 0.1f64..4.0) {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let cfg = PathConfig { t: 0.5, steps_per_unit: 64, paths: 200, seed, antithetic: false };
        let s = simulate_levy_on_g(&g, Some(&psis()[2]), &cfg).unwrap();
        let est = estimate_charfn(&s.vertical(), &[vec![l], vec![-l]], false).unwrap();
        for (e, se) in est.estimate.iter().zip(&est.stderr) {
            prop_assert!(e.norm() <= 1.0 + 3.0 * se);
        }
        let again = simulate_levy_on_g(&g, Some(&psis()[2]), &cfg).unwrap();
        prop_assert_eq!(s.vertical(), again.vertical());
    }
}
