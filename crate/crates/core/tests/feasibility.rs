mod common;

use proptest::prelude::*;
use spherical_calabi::feasibility::subset_margin;
use spherical_calabi::oracle::{fixtures, make_synthetic};
use spherical_calabi::{check_bruteforce, check_mincut, Prescription};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn methods_agree(seed in 0u64..100_000, lo in 0.0f64..0.9, width in 0.0f64..0.6) {
        let c = common::random_complex(seed, 10);
        let lhat = common::random_prescription(&c, seed ^ 1, (lo, lo + width));
        let a = check_bruteforce(&c, &lhat).unwrap();
        let b = check_mincut(&c, &lhat).unwrap();
        prop_assert_eq!(a.feasible, b.feasible);
        prop_assert!((a.worst_margin - b.worst_margin).abs() <= 1e-9);
        let direct = subset_margin(&c, &lhat, &b.worst_subset).unwrap();
        prop_assert!((direct - b.worst_margin).abs() <= 1e-12);
    }

    #[test]
    fn raising_a_target_never_helps(seed in 0u64..100_000, bump in 0.0f64..2.0) {
        let c = common::random_complex(seed, 9);
        let lhat = common::random_prescription(&c, seed ^ 2, (0.2, 1.1));
        let mut raised = lhat.values().to_vec();
        let v = (seed as usize) % c.n_vertices();
        raised[v] += bump;
        let raised = Prescription::new(raised).unwrap();
        let before = check_mincut(&c, &lhat).unwrap();
        let after = check_mincut(&c, &raised).unwrap();
        prop_assert!(after.worst_margin >= before.worst_margin - 1e-12);
        prop_assert!(after.worst_margin <= before.worst_margin + bump + 1e-12);
        if !before.feasible {
            prop_assert!(!after.feasible);
        }
    }

    #[test]
    fn every_subset_respects_the_maximum(seed in 0u64..100_000, mask in 1u32..256) {
        let c = common::random_complex(seed, 8);
        let lhat = common::random_prescription(&c, seed ^ 3, (0.3, 1.3));
        let w: Vec<usize> = (0..c.n_vertices()).filter(|v| mask & (1 << v) != 0).collect();
        prop_assume!(!w.is_empty());
        let best = check_bruteforce(&c, &lhat).unwrap();
        prop_assert!(subset_margin(&c, &lhat, &w).unwrap() <= best.worst_margin + 1e-12);
    }
}

#[test]
fn planted_prescriptions_are_feasible() {
    for seed in 0..40 {
        let c = common::random_complex(seed, 14);
        let inst = make_synthetic(&c, seed, (-1.5, 1.5)).unwrap();
        let v = check_mincut(&c, &inst.lhat).unwrap();
        assert!(v.feasible, "seed {seed}: margin {}", v.worst_margin);
    }
}

#[test]
fn large_complexes_need_min_cut() {
    let c = fixtures::random_sphere::<f64>(30, 4, (0.3, 1.5));
    let lhat = common::random_prescription(&c, 4, (0.5, 0.9));
    assert!(check_bruteforce(&c, &lhat).is_err());
    let v = check_mincut(&c, &lhat).unwrap();
    assert!(v.feasible);
    assert!(v.worst_margin < 0.0);
}
