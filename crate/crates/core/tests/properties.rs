use boundtri::analysis::lower_bound_reference;
use boundtri::consistency::{in_image_region, in_world_region};
use boundtri::geometry::Camera;
use boundtri::numerics::{solve_lp, DenseMatrix, LpStatus, FEASIBILITY_TOLERANCE};
use boundtri::sim::{
    run_decay_experiment, sample_instance, sample_rotation, trial_rng, ExperimentConfig, Setup,
};
use boundtri::triangulators::triangulate_l2_refine;
use boundtri::{in_consistent_region, triangulate, Algorithm, NoiseModel, NormKind, WorldPoint};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm_kind() -> impl Strategy<Value = NormKind> {
    prop_oneof![Just(NormKind::L1), Just(NormKind::L2), Just(NormKind::Linf)]
}

fn instance(
    seed: u64,
    q: NormKind,
    delta: f64,
    m: usize,
    circular: bool,
) -> (boundtri::Instance, WorldPoint) {
    let cfg = ExperimentConfig {
        setup: if circular {
            Setup::CircularArray
        } else {
            Setup::RandomSphere
        },
        noise: NoiseModel::new(q, delta).unwrap(),
        ..ExperimentConfig::default()
    };
    sample_instance(&mut ChaCha8Rng::seed_from_u64(seed), &cfg, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_ignores_positive_scale(seed in any::<u64>(), lambda in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = sample_rotation(&mut rng);
        let c = Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0));
        let f = rng.random_range(0.1..10.0);
        let cam = Camera::new(f, [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], r, c).unwrap();
        let depth = rng.random_range(0.5..50.0);
        let dir = r.transpose() * Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 1.0);
        let x = WorldPoint::from(c + dir * depth);
        prop_assert!(cam.cheirality(&x));
        let p = cam.project(&x).unwrap();
        let h = (cam.matrix() * lambda) * x.to_homogeneous();
        let scaled = h.xy() / h.z;
        prop_assert!((p.coords - scaled).norm() <= 1e-12 * (1.0 + p.coords.norm()));
    }

    #[test]
    fn true_point_is_consistent(seed in any::<u64>(), q in norm_kind(), delta in 0.0f64..0.1, m in 2usize..12, circ in any::<bool>()) {
        let (inst, x) = instance(seed, q, delta, m, circ);
        prop_assert!(in_consistent_region(&x, &inst));
    }

    #[test]
    fn membership_is_per_camera_conjunction(seed in any::<u64>(), q in norm_kind(), m in 2usize..8) {
        let (inst, x) = instance(seed, q, 0.01, m, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..20 {
            let p = WorldPoint::from(x.coords + Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05)));
            let per_camera = inst.observations().iter().all(|o| in_world_region(&p, o, inst.noise()));
            let per_image = inst.observations().iter().all(|o| {
                o.camera.cheirality(&p) && in_image_region(&o.point, &o.camera.project(&p).unwrap(), inst.noise())
            });
            prop_assert_eq!(in_consistent_region(&p, &inst), per_camera);
            prop_assert_eq!(per_camera, per_image);
        }
    }

    #[test]
    fn consistent_region_is_convex(seed in any::<u64>(), q in norm_kind(), m in 2usize..6) {
        let (inst, x) = instance(seed, q, 0.02, m, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
        let inside: Vec<WorldPoint> = (0..400)
            .map(|_| WorldPoint::from(x.coords + Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1))))
            .filter(|p| in_consistent_region(p, &inst))
            .collect();
        for pair in inside.windows(2) {
            let mid = WorldPoint::from((pair[0].coords + pair[1].coords) / 2.0);
            prop_assert!(in_consistent_region(&mid, &inst));
        }
    }

    #[test]
    fn lp_optima_are_feasible_and_repeatable(seed in any::<u64>(), n in 1usize..5, extra in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Vec<f64>> = (0..extra).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut b: Vec<f64> = rows.iter().map(|_| rng.random_range(-0.5..2.0)).collect();
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; n];
                r[i] = s;
                rows.push(r);
                b.push(5.0);
            }
        }
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseMatrix::from_rows(&rows).unwrap();
        let first = solve_lp(&c, &a, &b).unwrap();
        prop_assert_eq!(&first, &solve_lp(&c, &a, &b).unwrap());
        prop_assert_ne!(first.status, LpStatus::Unbounded);
        if let Some(x) = &first.x {
            for (ax, bi) in a.mul_vec(x).iter().zip(&b) {
                prop_assert!(*ax <= bi + FEASIBILITY_TOLERANCE);
            }
        }
    }

    #[test]
    fn refinement_never_increases_cost(seed in any::<u64>(), m in 2usize..10, q in norm_kind()) {
        let (inst, _) = instance(seed, q, 0.02, m, false);
        let init = triangulate(&inst, Algorithm::Linear).unwrap().point;
        if let Ok(r) = triangulate_l2_refine(&inst, &init) {
            prop_assert!(inst.sum_squared_residual(&r.point) <= inst.sum_squared_residual(&init) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lower_bound_decreases(m in 2usize..500, n in 1usize..500) {
        let here = lower_bound_reference(m, n, 4.0).unwrap();
        prop_assert!(lower_bound_reference(m + 1, n, 4.0).unwrap() < here);
        prop_assert!(lower_bound_reference(m, n + 1, 4.0).unwrap() < here);
    }
}

#[test]
fn consistent_lp_error_halves_with_doubled_cameras() {
    let cfg = ExperimentConfig {
        camera_count_schedule: vec![4, 8, 16, 32, 64],
        ..ExperimentConfig::default()
    };
    let curve = run_decay_experiment(&cfg, Algorithm::ConsistentLp).unwrap();
    for w in curve.records.windows(2) {
        assert!(w[1].mean_sq_err < w[0].mean_sq_err, "{:?}", w);
    }
    assert!(curve
        .records
        .iter()
        .all(|r| r.trials == cfg.trials_per_m && r.excluded == 0));
}

#[test]
fn decay_curve_independent_of_worker_count() {
    let cfg = ExperimentConfig {
        camera_count_schedule: vec![4, 16],
        trials_per_m: 40,
        ..ExperimentConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_decay_experiment(&cfg, Algorithm::MinimaxLinf).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn trial_streams_are_distinct() {
    let a: u64 = trial_rng(1, 4, 0).random();
    let b: u64 = trial_rng(1, 4, 1).random();
    let c: u64 = trial_rng(1, 5, 0).random();
    let d: u64 = trial_rng(2, 4, 0).random();
    assert!(a != b && a != c && a != d && b != c);
}
