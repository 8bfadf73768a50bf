use std::sync::Arc;

use leafwise::model::{ModeWindow, Model};
use leafwise::specseq::{pages, poisson_filtration, verify_poisson_collapse, BasisElement, FilteredComplex};
use leafwise::Scalar;
use proptest::prelude::*;

fn conic() -> Arc<Model> {
    let t = Model::torus(vec![Scalar::one(), Scalar::sqrt(2).unwrap()], None).unwrap();
    Model::conic_dual(&t).unwrap()
}

#[test]
fn poisson_filtration_collapses_on_one_row() {
    let x = conic();
    let w = ModeWindow::new(1, -2, 2).unwrap();
    for k in 0..=3 {
        let r = verify_poisson_collapse(&x, k, &w).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.e1_rows.len() <= 1);
    }
    let r = verify_poisson_collapse(&x, 1, &w).unwrap();
    assert_eq!(r.e1_rows, vec![0]);
    assert!(r.rows.iter().any(|row| row.direct > 0));
}

#[test]
fn poisson_filtration_round_trips_as_json() {
    let fc = poisson_filtration(&conic(), 1, &ModeWindow::modes(0)).unwrap();
    let text = serde_json::to_string(&fc).unwrap();
    assert_eq!(FilteredComplex::from_json(&text).unwrap(), fc);
}

/// A random filtered complex built from isolated vectors and pairs `x -> y`,
/// followed by filtration-preserving changes of basis. The returned oracle
/// lists `(degree, weight, last page on which it survives)`.
#[derive(Debug, Clone)]
struct Case {
    fc: FilteredComplex,
    oracle: Vec<(i64, i64, Option<usize>)>,
}

fn case() -> impl Strategy<Value = Case> {
    let piece = (0i64..3, 0i64..4, proptest::option::of(0i64..4));
    (proptest::collection::vec(piece, 1..6), proptest::collection::vec((0usize..12, 0usize..12, -2i64..=2), 0..10))
        .prop_map(|(pieces, ops)| {
            let mut basis: Vec<(i64, i64)> = Vec::new();
            let mut pairs = Vec::new();
            let mut oracle = Vec::new();
            for (deg, w, gap) in pieces {
                let i = basis.len();
                basis.push((deg, w));
                match gap {
                    Some(g) => {
                        basis.push((deg + 1, w + g));
                        pairs.push((i + 1, i));
                        oracle.push((deg, w, Some(g as usize)));
                        oracle.push((deg + 1, w + g, Some(g as usize)));
                    }
                    None => oracle.push((deg, w, None)),
                }
            }
            let n = basis.len();
            let mut d = vec![vec![0i64; n]; n];
            for (t, s) in pairs {
                d[t][s] = 1;
            }
            for (i, j, c) in ops {
                let (i, j) = (i % n, j % n);
                if i == j || basis[i].0 != basis[j].0 || basis[j].1 < basis[i].1 || c == 0 {
                    continue;
                }
                for row in d.iter_mut() {
                    row[i] += c * row[j];
                }
                let ri = d[i].clone();
                for (x, y) in d[j].iter_mut().zip(&ri) {
                    *x -= c * y;
                }
            }
            let els = basis
                .iter()
                .enumerate()
                .map(|(k, &(degree, weight))| BasisElement { degree, weight, label: format!("b{k}") })
                .collect();
            let mut entries = Vec::new();
            for (t, row) in d.iter().enumerate() {
                for (s, &v) in row.iter().enumerate() {
                    if v != 0 {
                        entries.push((t, s, Scalar::from_int(v)));
                    }
                }
            }
            Case { fc: FilteredComplex::new(els, entries).unwrap(), oracle }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pages_match_the_pair_oracle(c in case()) {
        let ss = pages(&c.fc).unwrap();
        prop_assert!(ss.pages_consistent);
        prop_assert!(ss.converged);
        for page in &ss.pages {
            for (t, w) in c.oracle.iter().map(|o| (o.0, o.1)) {
                let expect = c.oracle.iter()
                    .filter(|o| o.0 == t && o.1 == w && o.2.is_none_or(|g| page.r <= g))
                    .count();
                prop_assert_eq!(page.get(w, t - w), expect, "page {} at degree {} weight {}", page.r, t, w);
            }
        }
        let singles: usize = c.oracle.iter().filter(|o| o.2.is_none()).count();
        prop_assert_eq!(ss.homology.values().sum::<usize>(), singles);
    }

    #[test]
    fn shifting_weights_preserves_pages(c in case(), shift in -3i64..3) {
        let a = pages(&c.fc).unwrap();
        let b = pages(&c.fc.reindexed(|w| w + shift).unwrap()).unwrap();
        prop_assert_eq!(a.pages.len(), b.pages.len());
        for (pa, pb) in a.pages.iter().zip(&b.pages) {
            let da: Vec<_> = pa.entries.iter().map(|e| (e.p + shift, e.q - shift, e.dim)).collect();
            let db: Vec<_> = pb.entries.iter().map(|e| (e.p, e.q, e.dim)).collect();
            prop_assert_eq!(da, db);
        }
    }

    #[test]
    fn monotone_reindexing_preserves_first_and_last_pages(c in case()) {
        let a = pages(&c.fc).unwrap();
        let b = pages(&c.fc.reindexed(|w| 3 * w + 1).unwrap()).unwrap();
        let dims = |p: &leafwise::specseq::SpectralPage| {
            let mut v: Vec<_> = p.entries.iter().map(|e| (e.p + e.q, e.dim)).collect();
            v.sort();
            v
        };
        prop_assert_eq!(dims(a.page(1).unwrap()), dims(b.page(1).unwrap()));
        prop_assert_eq!(dims(a.limit()), dims(b.limit()));
    }
}
