use nalgebra::DMatrix;
use neumann_rbf::DMat;
use proptest::prelude::*;

fn dmat(rows: usize, cols: usize) -> impl Strategy<Value = DMat> {
    prop::collection::vec(-2.0f64..2.0, rows * cols * 2).prop_map(move |v| {
        DMat::from_fn(rows, cols, 2, |i, j| {
            let k = 2 * (i * cols + j);
            vec![v[k], v[k + 1]]
        })
    })
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..6, 1usize..6, 1usize..6)
}

fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1e-300)
}

proptest! {
    #[test]
    fn h_is_additive(((a, b), v) in dims().prop_flat_map(|(m, n, _)| ((dmat(m, n), dmat(m, n)), dmat(m, 1)))) {
        let lhs = a.add(&b).unwrap().op_h(&v).unwrap();
        let rhs = a.op_h(&v).unwrap() + b.op_h(&v).unwrap();
        prop_assert!(max_rel(&lhs, &rhs) <= 1e-13);
    }

    #[test]
    fn h_commutes_with_products(
        (a, v, q) in dims().prop_flat_map(|(m, n, p)| (
            dmat(m, n),
            dmat(m, 1),
            prop::collection::vec(-2.0f64..2.0, n * p).prop_map(move |x| DMatrix::from_vec(n, p, x)),
        ))
    ) {
        let lhs = a.op_h(&v).unwrap() * &q;
        let rhs = a.matmul(&q).unwrap().op_h(&v).unwrap();
        prop_assert!(max_rel(&lhs, &rhs) <= 1e-13);
    }

    #[test]
    fn partial_matches_finite_difference(
        (a, v, i, eta) in (1usize..5).prop_flat_map(|m| (dmat(m, m), dmat(m, 1), 0..m, 0usize..2))
    ) {
        let h = 1e-4;
        let det = |shift: f64| {
            let mut w = v.clone();
            w.get_mut(i, 0)[eta] += shift;
            a.op_h(&w).unwrap().determinant()
        };
        let fd = (det(h) - det(-h)) / (2.0 * h);
        let exact = a.det_h_partial(&v, i, eta).unwrap();
        prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1e-2), "{exact} vs {fd}");
    }

    #[test]
    fn scaling_by_zero_gives_zero_vectors(a in dmat(3, 4)) {
        prop_assert_eq!(a.scale(0.0).max_norm(), 0.0);
        prop_assert_eq!(a.matmul(&DMatrix::identity(4, 4)).unwrap(), a);
    }
}
