use std::collections::HashSet;

use proptest::prelude::*;

use scm_debias::compound::{concat_compound, random_pairing, sum_compound};
use scm_debias::embedding::{cosine, nearest, norm};

fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, len)
}

fn nonzero_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    vec_strategy(len).prop_filter("non-zero norm", |v| norm(v) > 1e-6)
}

proptest! {
    #[test]
    fn cosine_symmetric_and_self_unit(a in nonzero_vec(8), b in nonzero_vec(8)) {
        let ab = cosine(&a, &b).unwrap();
        let ba = cosine(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((cosine(&a, &a).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn cosine_positive_scale_invariant(a in nonzero_vec(8), b in nonzero_vec(8), s in 0.001f64..1000.0) {
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        let lhs = cosine(&scaled, &b).unwrap();
        let rhs = cosine(&a, &b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn nearest_full_pool_is_sorted_permutation(pool in prop::collection::vec(nonzero_vec(4), 2..30), q in nonzero_vec(4)) {
        let labelled: Vec<(String, Vec<f64>)> = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("t{i:03}"), v.clone()))
            .collect();
        let hits = nearest(
            labelled.iter().map(|(l, v)| (l.as_str(), v.as_slice())),
            &q,
            labelled.len(),
            &HashSet::new(),
        )
        .unwrap();
        prop_assert_eq!(hits.len(), labelled.len());
        // non-increasing similarity
        for w in hits.windows(2) {
            prop_assert!(w[0].1 >= w[1].1 - 1e-15);
        }
        // a permutation of the pool
        let mut got: Vec<&str> = hits.iter().map(|(t, _)| t.as_str()).collect();
        got.sort_unstable();
        let mut expect: Vec<&str> = labelled.iter().map(|(t, _)| t.as_str()).collect();
        expect.sort_unstable();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn sum_commutative_associative(a in vec_strategy(6), b in vec_strategy(6), c in vec_strategy(6)) {
        let ab = sum_compound(&a, &b).unwrap();
        let ba = sum_compound(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let left = sum_compound(&sum_compound(&a, &b).unwrap(), &c).unwrap();
        let right = sum_compound(&a, &sum_compound(&b, &c).unwrap()).unwrap();
        for (x, y) in left.iter().zip(&right) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn concat_length_additive(a in vec_strategy(3), b in vec_strategy(5)) {
        prop_assert_eq!(concat_compound(&a, &b).len(), a.len() + b.len());
    }

    #[test]
    fn pairing_reproducible_and_self_free(n in 2usize..50, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let p1 = random_pairing(&items, seed).unwrap();
        let p2 = random_pairing(&items, seed).unwrap();
        prop_assert_eq!(&p1, &p2);
        let mut seen = HashSet::new();
        for &(a, b) in &p1.pairs {
            prop_assert_ne!(a, b);
            prop_assert!(seen.insert(a));
            prop_assert!(seen.insert(b));
        }
        prop_assert_eq!(p1.pairs.len() * 2 + p1.dropped.iter().count(), n);
    }
}
