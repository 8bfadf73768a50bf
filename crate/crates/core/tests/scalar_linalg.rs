use leafwise::linalg::sparse_from_dense;
use leafwise::{quotient_dim, Error, Scalar, SparseMatrix};
use proptest::prelude::*;

/// `a + b sqrt2 + c sqrt3 + d sqrt6 + i e` with small rational coordinates.
fn scalar() -> impl Strategy<Value = Scalar> {
    prop::collection::vec((-4i64..=4, 1i64..=3), 5).prop_map(|cs| {
        let basis =
            [Scalar::one(), Scalar::sqrt(2).unwrap(), Scalar::sqrt(3).unwrap(), Scalar::sqrt(6).unwrap(), Scalar::i()];
        cs.iter().zip(&basis).map(|(&(n, d), b)| &Scalar::from_ratio(n, d) * b).sum()
    })
}

/// Small matrices over Q(sqrt2) with many zeros and a planted dependent row.
fn matrix() -> impl Strategy<Value = SparseMatrix> {
    (1usize..=5, 1usize..=6).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop_oneof![3 => Just(0i64), 2 => -2i64..=2], r * c).prop_map(move |xs| {
            let s2 = Scalar::sqrt(2).unwrap();
            let mut rows: Vec<Vec<Scalar>> = xs
                .chunks(c)
                .enumerate()
                .map(|(i, ch)| {
                    ch.iter()
                        .enumerate()
                        .map(|(j, &x)| if (i + j) % 3 == 0 { &Scalar::from_int(x) * &s2 } else { Scalar::from_int(x) })
                        .collect()
                })
                .collect();
            if r >= 2 {
                let dep: Vec<Scalar> = rows[0].iter().zip(&rows[1]).map(|(a, b)| a + &(&s2 * b)).collect();
                rows.push(dep);
            }
            SparseMatrix::from_dense(&rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_axioms(a in scalar(), b in scalar(), c in scalar()) {
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        if !a.is_zero() {
            prop_assert!((&a * &a.inv().unwrap()).is_one());
        } else {
            prop_assert!(a.inv().is_none());
        }
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn rank_is_independent_of_elimination_order(m in matrix()) {
        let r = m.rank();
        prop_assert_eq!(r, m.transpose().rank());
        let rev: Vec<usize> = (0..m.cols()).rev().collect();
        prop_assert_eq!(r, m.permute_columns(&rev).rank());
    }

    #[test]
    fn kernel_is_a_basis_of_the_null_space(m in matrix()) {
        let (r, ker) = m.rank_kernel();
        prop_assert_eq!(r + ker.len(), m.cols());
        for v in &ker {
            prop_assert!(m.mul_vec(v).is_empty());
        }
        prop_assert_eq!(SparseMatrix::from_columns(m.cols(), &ker).rank(), ker.len());
    }

    #[test]
    fn quotient_of_an_exact_pair(a in matrix()) {
        // rows of d_out span the annihilator of im(a)
        let (_, left) = a.transpose().rank_kernel();
        let d_out = SparseMatrix::from_rows(a.rows(), left);
        let q = quotient_dim(&d_out, &a).unwrap();
        prop_assert_eq!(q, 0);
        let half = SparseMatrix::from_rows(a.rows(), (0..d_out.rows() / 2).map(|i| d_out.row(i).clone()).collect());
        let q = quotient_dim(&half, &a).unwrap();
        prop_assert_eq!(q, a.rows() - half.rank() - a.rank());
    }
}

#[test]
fn quotient_rejects_a_broken_complex() {
    let d_in = SparseMatrix::from_dense(&[vec![Scalar::one()], vec![Scalar::zero()]]).unwrap();
    let d_out = SparseMatrix::from_dense(&[vec![Scalar::one(), Scalar::zero()]]).unwrap();
    assert!(matches!(quotient_dim(&d_out, &d_in), Err(Error::ComplexViolation(_))));
    let wrong = SparseMatrix::zeros(1, 3);
    assert!(matches!(quotient_dim(&wrong, &d_in), Err(Error::Shape(_))));
}

#[test]
fn sqrt2_kernel_example() {
    let s2 = Scalar::sqrt(2).unwrap();
    let m =
        SparseMatrix::from_dense(&[vec![Scalar::one(), s2.clone()], vec![s2.clone(), Scalar::from_int(2)]]).unwrap();
    let (r, ker) = m.rank_kernel();
    assert_eq!(r, 1);
    assert_eq!(ker.len(), 1);
    // the kernel vector is proportional to (-sqrt2, 1)
    let v = &ker[0];
    let want = sparse_from_dense(&[-s2, Scalar::one()]);
    let scale = want[1].1.clone() * v.iter().find(|(i, _)| *i == 1).unwrap().1.inv().unwrap();
    let scaled: Vec<(usize, Scalar)> = v.iter().map(|(i, x)| (*i, x * &scale)).collect();
    assert_eq!(scaled, want);
}
