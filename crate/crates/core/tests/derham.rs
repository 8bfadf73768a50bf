use std::sync::Arc;

use leafwise::derham::{
    basic_cohomology_dims, certificate_margin, cohomology_dims, differential, diophantine_certificate,
    ordinary_derham_dims, verify_decomposition_identities, Verdict,
};
use leafwise::model::{Component, Form, ModeWindow, Model};
use leafwise::Scalar;

fn s(x: &str) -> Scalar {
    Scalar::parse(x).unwrap()
}

fn t2() -> Arc<Model> {
    Model::torus(vec![s("1"), s("sqrt2")], None).unwrap()
}

fn so3() -> Arc<Model> {
    let one = Scalar::one();
    Model::lie_frame(3, &[(1, 2, 3, one.clone()), (2, 3, 1, one.clone()), (3, 1, 2, one)], &[3]).unwrap()
}

fn heisenberg() -> Arc<Model> {
    Model::lie_frame(3, &[(1, 2, 3, Scalar::one())], &[3]).unwrap()
}

#[test]
fn torus_bigraded_table() {
    let r = cohomology_dims(&t2(), Component::DF, &ModeWindow::modes(3)).unwrap();
    for rr in 0..=1 {
        for ss in 0..=1 {
            assert_eq!(r.dims.get(rr, ss), 1, "H^({rr},{ss})");
        }
    }
    assert!(r.nonresonant_blocks_exact);
    assert!(!r.unbounded);
    assert_eq!(r.status, "smooth");
}

#[test]
fn torus_table_is_window_stable() {
    let a = cohomology_dims(&t2(), Component::DF, &ModeWindow::modes(1)).unwrap();
    let b = cohomology_dims(&t2(), Component::DF, &ModeWindow::modes(3)).unwrap();
    assert_eq!(a.dims, b.dims);
}

#[test]
fn cosphere_circle_table() {
    let x = Model::cosphere_circle(&t2()).unwrap();
    let r = cohomology_dims(&x, Component::DF, &ModeWindow::modes(2)).unwrap();
    let binom = |n: usize, k: usize| -> usize { [[1, 0, 0], [1, 1, 0], [1, 2, 1]][n][k] };
    for k in 0..=2 {
        for h in 0..=1 {
            assert_eq!(r.dims.get(k, h), 2 * binom(2, k) * binom(1, h), "H^({k},{h})");
        }
    }
}

#[test]
fn resonant_torus_has_extra_classes() {
    let m = Model::torus(vec![s("1"), s("sqrt2"), s("sqrt2-1")], None).unwrap();
    let r = cohomology_dims(&m, Component::DF, &ModeWindow::modes(1)).unwrap();
    assert!(r.dims.get(0, 0) > 1);
    assert!(r.unbounded);
    assert_eq!(r.status, "formal (non-Diophantine)");
    assert!(r.resonant_modes.contains(&vec![1, -1, 1]));
}

#[test]
fn differential_examples() {
    let m = t2();
    let e0 = Form::exp(&m, &[0, 0]).unwrap();
    assert!(differential(&m, Component::DF, &e0).unwrap().is_zero());
    let e = Form::exp(&m, &[1, 0]).unwrap();
    let th = Form::generator(&m, "theta").unwrap();
    assert_eq!(differential(&m, Component::DF, &e).unwrap(), e.wedge(&th).unwrap());
    // d e_m = (m.alpha) e_m theta + m_2 e_m eta for alpha = (1, sqrt2).
    let e = Form::exp(&m, &[2, -1]).unwrap();
    let eta = Form::generator(&m, "eta1").unwrap();
    let expect = e.wedge(&th).unwrap().scale(&s("2 - sqrt2")).plus(&e.wedge(&eta).unwrap().scale(&s("-1"))).unwrap();
    assert_eq!(differential(&m, Component::D, &e).unwrap(), expect);
    assert!(differential(&so3(), Component::D, &e).is_err());
}

#[test]
fn identity_suites() {
    let r = verify_decomposition_identities(&t2(), 20, 1);
    assert!(r.all_passed(), "{r:?}");
    assert!(r.boundary_vanishes);
    for m in [so3(), heisenberg()] {
        let r = verify_decomposition_identities(&m, 20, 1);
        assert!(r.all_passed(), "{r:?}");
        assert!(!r.boundary_vanishes);
    }
    let x = Model::conic_dual(&t2()).unwrap();
    assert!(verify_decomposition_identities(&x, 10, 2).all_passed());
}

#[test]
fn broken_jacobi_fails_d_squared() {
    let one = Scalar::one();
    let bad = Model::lie_frame_unchecked(3, &[(1, 2, 3, one.clone()), (1, 3, 1, one)], &[3]).unwrap();
    let r = verify_decomposition_identities(&bad, 5, 1);
    let d2 = r.get("d^2 = 0").unwrap();
    assert!(!d2.passed);
    assert!(d2.counterexample.is_some());
}

#[test]
fn certificate_examples_and_numeric_margin() {
    let alpha = [s("1"), s("sqrt2")];
    let c = diophantine_certificate(&alpha).unwrap();
    assert_eq!(c.exponent(), Some(1));
    assert!(certificate_margin(&alpha, &c, 40).unwrap() >= 1.0);

    let alpha = [s("1"), s("sqrt2"), s("sqrt3")];
    let c = diophantine_certificate(&alpha).unwrap();
    assert_eq!(c.exponent(), Some(3));
    assert!(certificate_margin(&alpha, &c, 12).unwrap() >= 1.0);

    let alpha = [s("1/3"), s("2/5*sqrt6 + 1")];
    let c = diophantine_certificate(&alpha).unwrap();
    assert!(certificate_margin(&alpha, &c, 40).unwrap() >= 1.0);

    let c = diophantine_certificate(&[s("1"), s("sqrt2"), s("sqrt2-1")]).unwrap();
    assert_eq!(c.verdict, Verdict::Resonant { witness: vec![1, -1, 1] });
}

#[test]
fn basic_cohomology() {
    let r = basic_cohomology_dims(&t2(), &ModeWindow::modes(2)).unwrap();
    assert_eq!(r.dims, vec![1, 1]);
    assert!(!r.window_sensitive);

    let rational = Model::torus(vec![s("1"), s("0")], None).unwrap();
    let r = basic_cohomology_dims(&rational, &ModeWindow::modes(2)).unwrap();
    assert_eq!(r.dims[0], 1);
    assert!(r.window_sensitive);

    let r = basic_cohomology_dims(&heisenberg(), &ModeWindow::modes(0)).unwrap();
    assert_eq!(r.dims[0], 1);
}

#[test]
fn ordinary_betti_numbers() {
    assert_eq!(ordinary_derham_dims(&t2()).unwrap(), vec![1, 2, 1]);
    let x = Model::cosphere_circle(&t2()).unwrap();
    assert_eq!(ordinary_derham_dims(&x).unwrap(), vec![2, 6, 6, 2]);
    let t3 = Model::torus(vec![s("1"), s("sqrt2"), s("sqrt3")], None).unwrap();
    assert_eq!(ordinary_derham_dims(&t3).unwrap(), vec![1, 3, 3, 1]);
    assert!(ordinary_derham_dims(&so3()).is_err());
}

#[test]
fn pullback_to_cosphere_commutes_with_leafwise_differential() {
    let base = t2();
    let x = Model::cosphere_circle(&base).unwrap();
    let pull = |f: &Form| -> Form {
        let mut out = Form::zero(&x);
        for (m, c) in f.terms() {
            // theta stays generator 0; eta_i shifts past dphi.
            let mask = (m.mask & 1) | ((m.mask & !1) << 1);
            for sheet in leafwise::model::Sign::BOTH {
                let mm = leafwise::model::Monomial { mode: m.mode.clone(), phi: 0, xi: 0, sheet: Some(sheet), mask };
                out.add_term(mm, c);
            }
        }
        out
    };
    let window = ModeWindow::modes(2);
    for mon in leafwise::derham::window_monomials(&base, &window) {
        let f = Form::monomial(&base, mon, Scalar::one()).unwrap();
        assert_eq!(pull(&f.differential(Component::DF)), pull(&f).differential(Component::DF));
    }
}
