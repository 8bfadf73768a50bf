use std::sync::Arc;

use leafwise::hochschild::{e1_to_e2, e2_dims, hh0_and_top, hh_dims_assuming_collapse, hh_report, hp_dims};
use leafwise::model::{ModeWindow, Model};
use leafwise::Scalar;

fn torus(alpha: &[&str]) -> Arc<Model> {
    Model::torus(alpha.iter().map(|a| Scalar::parse(a).unwrap()).collect(), None).unwrap()
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn hochschild_dims_follow_the_exterior_algebra_pattern() {
    for (alpha, n) in [(vec!["1", "sqrt2"], 2usize), (vec!["1", "sqrt2", "sqrt3"], 3)] {
        let m = torus(&alpha);
        let hh = hh_dims_assuming_collapse(&m, 1).unwrap();
        let expect: Vec<usize> = (0..=n + 1).map(|l| 2 * binom(n + 1, l)).chain([0]).collect();
        assert_eq!(hh, expect);
        let r = hh_report(&m, 1).unwrap();
        assert!(r.consistent());
        assert_eq!(r.traces.hh0, 2);
        assert_eq!(r.traces.hhtop, 1);
        assert_eq!(r.hp, (2 << n, 2 << n));
    }
}

#[test]
fn conic_and_cosphere_inputs_reduce_to_the_torus() {
    let m = torus(&["1", "sqrt2"]);
    let x = Model::conic_dual(&m).unwrap();
    assert_eq!(hp_dims(&x).unwrap(), (8, 8));
    assert_eq!(hh0_and_top(&x, 1).unwrap().hh0, 2);
}

#[test]
fn second_page_from_forms_matches_closed_form() {
    let m = torus(&["1", "sqrt2"]);
    let r = e1_to_e2(&m, &ModeWindow::new(1, -2, 2).unwrap()).unwrap();
    assert!(r.agree, "{:?}", r.cells.iter().filter(|c| c.e2 != c.predicted).collect::<Vec<_>>());
    let cell = r.cells.iter().find(|c| c.k == 1 && c.h == 1).unwrap();
    assert_eq!(cell.e2, 2);
    assert!(r.cells.iter().filter(|c| c.k + c.h > 3).all(|c| c.e2 == 0));
    assert_eq!(e2_dims(&m, 1).unwrap().get(1, 1), 2);
}

#[test]
fn second_page_is_window_stable() {
    let m = torus(&["1", "sqrt2"]);
    let a = e1_to_e2(&m, &ModeWindow::new(1, -1, 1).unwrap()).unwrap();
    let b = e1_to_e2(&m, &ModeWindow::new(2, -1, 1).unwrap()).unwrap();
    let dims = |r: &leafwise::hochschild::E1ToE2Report| r.cells.iter().map(|c| (c.k, c.h, c.e2)).collect::<Vec<_>>();
    assert_eq!(dims(&a), dims(&b));
}
