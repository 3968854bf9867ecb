//! Property tests for the geometric primitives.

use bilevel_diag::linalg::dist;
use bilevel_diag::problem::{FollowerSet, LeaderSet, LinearInequality};
use proptest::prelude::*;

fn finite_coord() -> impl Strategy<Value = f64> {
    (-50.0f64..50.0).prop_filter("finite", |v| v.is_finite())
}

proptest! {
    #[test]
    fn simplex_projection_idempotent_and_feasible(
        z in prop::collection::vec(finite_coord(), 2..6),
        total in 0.5f64..4.0,
    ) {
        let set = FollowerSet::UnitSimplexSum { dim: z.len(), total };
        let p = set.project(&z);
        prop_assert!(set.contains(&p, 1e-12));
        let pp = set.project(&p);
        prop_assert!(dist(&p, &pp) < 1e-12);
    }

    #[test]
    fn simplex_projection_is_closest(
        z in prop::collection::vec(finite_coord(), 3usize..4),
        seed in 0u64..2000,
    ) {
        let total = 1.0;
        let set = FollowerSet::UnitSimplexSum { dim: 3, total };
        let p = set.project(&z);
        // random feasible competitors never beat the projection
        use rand::Rng;
        let mut rng = bilevel_diag::rng::stream(seed, "prop-simplex", 0);
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s * total).collect();
            prop_assert!(dist(&p, &z) <= dist(&w, &z) + 1e-9);
        }
    }

    #[test]
    fn box_projection_is_closest(
        z in prop::collection::vec(finite_coord(), 2usize..5),
        seed in 0u64..2000,
    ) {
        let lo: Vec<f64> = z.iter().map(|_| -1.0).collect();
        let hi: Vec<f64> = z.iter().map(|_| 2.0).collect();
        let set = FollowerSet::Box { lo: lo.clone(), hi: hi.clone() };
        let p = set.project(&z);
        prop_assert!(set.contains(&p, 1e-12));
        let mut rng = bilevel_diag::rng::stream(seed, "prop-box", 0);
        for _ in 0..200 {
            let w = bilevel_diag::rng::uniform_in_box(&mut rng, &lo, &hi);
            prop_assert!(dist(&p, &z) <= dist(&w, &z) + 1e-9);
        }
    }

    #[test]
    fn polyhedral_projection_idempotent_and_closest(
        zx in finite_coord(),
        zy in finite_coord(),
        seed in 0u64..500,
    ) {
        let set = LeaderSet::new(
            vec![0.0, 0.0],
            vec![2.0, 2.0],
            vec![
                LinearInequality { a: vec![1.0, 1.0], b: 2.5 },
                LinearInequality { a: vec![-1.0, 2.0], b: 3.0 },
            ],
        )
        .unwrap();
        let z = vec![zx, zy];
        let p = set.project(&z);
        prop_assert!(set.contains(&p, 1e-7), "projection infeasible: {:?}", p);
        let pp = set.project(&p);
        prop_assert!(dist(&p, &pp) < 1e-6);
        use rand::Rng;
        let mut rng = bilevel_diag::rng::stream(seed, "prop-poly", 0);
        for _ in 0..300 {
            let w = vec![rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0];
            if set.contains(&w, 0.0) {
                prop_assert!(dist(&p, &z) <= dist(&w, &z) + 1e-6);
            }
        }
    }

    #[test]
    fn fb_function_signs(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let v = bilevel_diag::diagnostics::phi_fb(a, b);
        let on_manifold = a >= 0.0 && b >= 0.0 && (a * b).abs() < 1e-12;
        if on_manifold {
            prop_assert!(v.abs() < 1e-9);
        }
        if a < -1e-9 || b < -1e-9 {
            prop_assert!(v.abs() > 0.0);
        }
    }
}
