//! Structural invariants of the weight lattice over a broad parameter grid:
//! enumeration order and count, spectral coordinate separation, positivity
//! and integrality of dimensions, the dimension bound, and Casimir growth.

use grassmann_core::weights::{
    casimir, dimension, dimension_bound, enumerate_weights, make_weight,
};
use grassmann_core::make_space;
use num_bigint::BigInt;
use num_traits::Zero;

fn binomial(n: i64, k: i64) -> usize {
    let mut acc = 1i64;
    for u in 0..k {
        acc = acc * (n - u) / (u + 1);
    }
    acc as usize
}

#[test]
fn lattice_invariants_hold_on_grid() {
    let spaces = [
        (1i64, 1i64),
        (2, 1),
        (3, 1),
        (4, 1),
        (5, 1),
        (2, 2),
        (3, 2),
        (4, 2),
        (3, 3),
    ];
    for (p, q) in spaces {
        let space = make_space(p, q).unwrap();
        let m1_max = if q >= 3 { 4 } else { 6 };
        for l in -3i64..=3 {
            let all = enumerate_weights(&space, l, m1_max).unwrap();
            assert_eq!(all.len(), binomial(m1_max + q, q));
            // Decreasing lexicographic order, starting from the full corner.
            assert!(all.first().unwrap().m.iter().all(|&v| v == m1_max));
            assert!(all.last().unwrap().m.iter().all(|&v| v == 0));
            for pair in all.windows(2) {
                assert!(pair[0].m > pair[1].m, "enumeration must strictly decrease");
            }
            for w in &all {
                // Spectral coordinates separate: n strictly decreasing, c distinct.
                for pair in w.spectral_n.windows(2) {
                    assert!(pair[0] > pair[1]);
                }
                for i in 0..w.spectral_c.len() {
                    for j in 0..i {
                        assert_ne!(w.spectral_c[i], w.spectral_c[j]);
                    }
                }
                let d = dimension(&space, w);
                assert!(d > BigInt::zero());
                assert!(
                    d <= dimension_bound(&space, w),
                    "bound violated at p={p} q={q} l={l} m={:?}: {d} > {}",
                    w.m,
                    dimension_bound(&space, w)
                );
                let kappa = casimir(&space, w);
                if w.lambda.iter().all(|&v| v == 0) {
                    assert_eq!(kappa, 0);
                } else {
                    assert!(kappa > 0);
                }
            }
        }
    }
}

#[test]
fn rank_one_dimensions_are_linear_in_the_weight() {
    let space = make_space(1, 1).unwrap();
    for l in -5i64..=5 {
        for m in 0..=20 {
            let w = make_weight(&space, l, vec![m]).unwrap();
            assert_eq!(dimension(&space, &w), BigInt::from(2 * m + l.abs() + 1));
            assert_eq!(
                dimension_bound(&space, &w),
                BigInt::from(2 * m + l.abs() + 1),
                "rank-one bound is attained exactly"
            );
        }
    }
}
