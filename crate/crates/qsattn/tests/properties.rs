//! Property tests for the crate's structural invariants.

#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use qsattn::analysis::{agreement_rate, argmax_row, ks_statistic, wasserstein1};
use qsattn::attention::{shared_score, softmax_rows, tay_score};
use qsattn::matrix::Mat;
use qsattn::quat::Quaternion;
use qsattn::tensor::QTensor;

fn quat_strategy() -> impl Strategy<Value = Quaternion> {
    let c = -10.0..10.0f64;
    (c.clone(), c.clone(), c.clone(), c).prop_map(|(a, b, c, d)| Quaternion::new(a, b, c, d))
}

fn qtensor_strategy(t: usize, d: usize) -> impl Strategy<Value = QTensor> {
    proptest::collection::vec(-5.0..5.0f64, 4 * t * d).prop_map(move |flat| {
        QTensor::from_flat(vec![t, d], &flat).unwrap()
    })
}

proptest! {
    #[test]
    fn hamilton_product_is_associative(p in quat_strategy(), q in quat_strategy(), r in quat_strategy()) {
        let left = (p * q) * r;
        let right = p * (q * r);
        let scale = 1.0 + left.norm_sq().sqrt();
        prop_assert!((left - right).norm_sq().sqrt() / scale < 1e-10);
    }

    #[test]
    fn norm_is_multiplicative(p in quat_strategy(), q in quat_strategy()) {
        let lhs = (p * q).norm_sq();
        let rhs = p.norm_sq() * q.norm_sq();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn scalar_product_is_conjugated_real_part(x in quat_strategy(), y in quat_strategy()) {
        prop_assert!((x.dot(y) - (x * y.conj()).q0).abs() < 1e-10);
    }

    #[test]
    fn conjugation_is_an_involution(q in quat_strategy()) {
        prop_assert_eq!(q.conj().conj(), q);
    }

    #[test]
    fn softmax_rows_are_stochastic(values in proptest::collection::vec(-30.0..30.0f64, 16)) {
        let m = Mat::from_vec(4, 4, values).unwrap();
        let s = softmax_rows(&m);
        for r in 0..4 {
            let sum: f64 = s.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.row(r).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn shared_score_is_component0_of_conjugated_product(
        q in qtensor_strategy(3, 2),
        k in qtensor_strategy(3, 2),
    ) {
        // Re(Q ⊗ K†) computed through the quaternion matmul equals the
        // four-plane-product shared score.
        let s = shared_score(&q, &k, 1.0).unwrap();
        let product = q.matmul(&k.conj_transpose().unwrap()).unwrap();
        prop_assert!(s.max_abs_diff(&product.plane_as_mat(0).unwrap()) < 1e-10);
    }

    #[test]
    fn componentwise_score_matches_quaternion_matmul(
        q in qtensor_strategy(3, 2),
        k in qtensor_strategy(3, 2),
    ) {
        let s = tay_score(&q, &k, 1.0).unwrap();
        let product = q.matmul(&k.transpose().unwrap()).unwrap();
        for alpha in 0..4 {
            prop_assert!(s[alpha].max_abs_diff(&product.plane_as_mat(alpha).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn vec_inner_equals_vectorized_dot(flat_q in proptest::collection::vec(-5.0..5.0f64, 24),
                                       flat_k in proptest::collection::vec(-5.0..5.0f64, 24)) {
        let q = QTensor::from_flat(vec![6], &flat_q).unwrap();
        let k = QTensor::from_flat(vec![6], &flat_k).unwrap();
        let direct = q.vec_inner(&k).unwrap();
        let dot: f64 = q
            .vectorize()
            .unwrap()
            .iter()
            .zip(k.vectorize().unwrap())
            .map(|(a, b)| a * b)
            .sum();
        prop_assert!((direct - dot).abs() < 1e-10);
    }

    #[test]
    fn qtb_roundtrip_is_lossless(flat in proptest::collection::vec(-1e9..1e9f64, 24)) {
        let t = QTensor::from_flat(vec![2, 3], &flat).unwrap();
        let mut bytes = Vec::new();
        qsattn::qtb::write_to(&mut bytes, &t).unwrap();
        let back = qsattn::qtb::read_from(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(t, back);
    }

    #[test]
    fn agreement_is_symmetric_for_unique_argmaxes(values_a in proptest::collection::vec(0.0..1.0f64, 25),
                                                  values_b in proptest::collection::vec(0.0..1.0f64, 25)) {
        let a = Mat::from_vec(5, 5, values_a).unwrap();
        let b = Mat::from_vec(5, 5, values_b).unwrap();
        let unique = |m: &Mat| {
            (0..5).all(|r| {
                let best = argmax_row(m.row(r));
                m.row(r).iter().enumerate().all(|(i, &v)| i == best || v < m.row(r)[best])
            })
        };
        prop_assume!(unique(&a) && unique(&b));
        prop_assert_eq!(agreement_rate(&a, &b).unwrap(), agreement_rate(&b, &a).unwrap());
    }

    #[test]
    fn distribution_metrics_bounds(a in proptest::collection::vec(-100.0..100.0f64, 1..40),
                                   b in proptest::collection::vec(-100.0..100.0f64, 1..40)) {
        let ks = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ks));
        let w = wasserstein1(&a, &b).unwrap();
        prop_assert!(w >= 0.0);
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);

        // equal-size samples: both metrics vanish only on identical sorted
        // vectors
        if a.len() == b.len() {
            let mut sa = a.clone();
            let mut sb = b.clone();
            sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
            sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
            if sa != sb {
                prop_assert!(ks > 0.0);
                prop_assert!(w > 0.0);
            }
        }
    }

    #[test]
    fn scaling_scores_preserves_argmax(values in proptest::collection::vec(-10.0..10.0f64, 16),
                                       c in 0.1..20.0f64) {
        let s = Mat::from_vec(4, 4, values).unwrap();
        let a = softmax_rows(&s);
        let a_scaled = softmax_rows(&s.scaled(c));
        for r in 0..4 {
            prop_assert_eq!(argmax_row(a.row(r)), argmax_row(a_scaled.row(r)));
        }
    }
}
