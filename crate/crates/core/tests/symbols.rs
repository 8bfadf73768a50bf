use std::sync::Arc;

use leafwise::model::{Model, Sign};
use leafwise::symbols::{Derivation, SymbolAlgebra, SymbolsConfig, TruncatedSymbol};
use leafwise::{Error, Scalar};
use proptest::prelude::*;

fn torus2() -> Arc<Model> {
    Model::torus(vec![Scalar::one(), Scalar::sqrt(2).unwrap()], None).unwrap()
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn report_on_the_two_torus() {
    let t = torus2();
    let cfg = SymbolsConfig { trials: 100, ..SymbolsConfig::default() };
    let rep = leafwise::symbols::verify_traces_and_collapse(&t, &cfg).unwrap();
    for c in &rep.checks {
        assert!(c.passed, "{}: {:?}", c.name, c.counterexample);
    }
    assert!(rep.get("trace property tau_pm([a, b]) = 0").unwrap().checked >= 100);
    for row in &rep.independence {
        assert_eq!(row.cocycles, 2 * binom(3, row.l), "l = {}", row.l);
        assert_eq!(row.rank, row.cocycles, "l = {}", row.l);
        assert_eq!(row.predicted, row.cocycles, "l = {}", row.l);
    }
    assert!(rep.traces_match_hh0);
    assert!(rep.collapse_certified);
    assert!(rep.all_passed());
}

#[test]
fn corrupted_product_is_caught() {
    let t = torus2();
    let cfg = SymbolsConfig { trials: 40, corrupt: true, ..SymbolsConfig::default() };
    let rep = leafwise::symbols::verify_traces_and_collapse(&t, &cfg).unwrap();
    let assoc = rep.get("associativity above the watermark").unwrap();
    assert!(!assoc.passed);
    assert!(assoc.counterexample.is_some());
    assert!(!rep.all_passed());
}

#[test]
fn lie_models_are_rejected() {
    let one = Scalar::one();
    let so3 = Model::lie_frame(3, &[(1, 2, 3, one.clone()), (2, 3, 1, one.clone()), (3, 1, 2, one)], &[3]).unwrap();
    assert!(matches!(SymbolAlgebra::new(&so3, 4), Err(Error::UnsupportedModel(_))));
}

fn symbol_strategy() -> impl Strategy<Value = TruncatedSymbol> {
    prop::collection::vec((any::<bool>(), -3i64..=2, -2i64..=2, -2i64..=2, -3i64..=3), 1..4).prop_map(|ts| {
        ts.into_iter().fold(TruncatedSymbol::zero(), |acc, (plus, j, m1, m2, c)| {
            let sheet = if plus { Sign::Plus } else { Sign::Minus };
            acc.add(&TruncatedSymbol::monomial(sheet, j, &[m1, m2], Scalar::from_int(c)))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composition_is_bilinear(a in symbol_strategy(), b in symbol_strategy(), c in symbol_strategy()) {
        let alg = SymbolAlgebra::new(&torus2(), 6).unwrap();
        let lhs = alg.compose(&a.add(&b), &c).unwrap();
        let rhs = alg.compose(&a, &c).unwrap().add(&alg.compose(&b, &c).unwrap());
        prop_assert!(lhs.agrees_with(&rhs));
    }

    #[test]
    fn deeper_expansion_refines(a in symbol_strategy(), b in symbol_strategy()) {
        let t = torus2();
        let shallow = SymbolAlgebra::new(&t, 3).unwrap().compose(&a, &b).unwrap();
        let deep = SymbolAlgebra::new(&t, 9).unwrap().compose(&a, &b).unwrap();
        prop_assert!(shallow.agrees_with(&deep));
        prop_assert!(deep.valid_from() <= shallow.valid_from() || shallow.valid_from().is_none());
    }

    #[test]
    fn mode_zero_symbols_commute(j1 in -3i64..=3, j2 in -3i64..=3, m in -2i64..=2) {
        let alg = SymbolAlgebra::new(&torus2(), 6).unwrap();
        let a = TruncatedSymbol::both_sheets(j1, &[0, 0]);
        let b = TruncatedSymbol::both_sheets(j2, &[m, 0]);
        let c = alg.commutator(&a, &b).unwrap();
        // [xi^j, e_m] = sum_k binom(j, k) (m alpha)^k xi^{j - k} e_m
        let f = alg.frequency(&[m, 0]);
        let expect = if j1 == 0 || m == 0 { Scalar::zero() } else { f.scale(&num_rational::BigRational::from_integer(j1.into())) };
        prop_assert_eq!(c.coeff(Sign::Plus, j1 + j2 - 1, &[m, 0]), expect);
    }

    #[test]
    fn radial_derivation_is_a_derivation(a in symbol_strategy(), b in symbol_strategy()) {
        let alg = SymbolAlgebra::new(&torus2(), 8).unwrap();
        let d = Derivation::Radial;
        let lhs = alg.apply(d, &alg.compose(&a, &b).unwrap()).unwrap();
        let rhs = alg.compose(&alg.apply(d, &a).unwrap(), &b).unwrap()
            .add(&alg.compose(&a, &alg.apply(d, &b).unwrap()).unwrap());
        prop_assert!(lhs.agrees_with(&rhs));
    }
}
