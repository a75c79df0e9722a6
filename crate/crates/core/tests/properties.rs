use arw_core::arw::{
    check_abelian, stabilize, Configuration, Instruction, InstructionTape, SiteState,
    StabilizeOptions, Target, TopplingPolicy,
};
use arw_core::bup::{level_threshold, step_discrete, BupState};
use arw_core::model::{denormalize_S, gumbel_cdf, kl_bernoulli, normalize_S};
use arw_core::oracle::{exact_final_pmf, exact_stopping_law};
use arw_core::replicate::{rng_from_seed, run_replicates};
use arw_core::stats::ks_two_sample;
use arw_core::Params;
use proptest::prelude::*;

fn site_state() -> impl Strategy<Value = SiteState> {
    prop_oneof![
        Just(SiteState::Empty),
        Just(SiteState::Sleeping),
        (1u32..4).prop_map(SiteState::Active),
    ]
}

fn instruction(n: u32) -> impl Strategy<Value = Instruction> {
    prop_oneof![
        Just(Instruction::Sleep),
        Just(Instruction::Jump(Target::Sink)),
        (0..n).prop_map(|j| Instruction::Jump(Target::Site(j))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stabilization_conserves_and_settles(
        sites in prop::collection::vec(site_state(), 1..10),
        p in 0.05f64..0.95,
        q in 0.05f64..1.0,
        seed in any::<u64>(),
    ) {
        let n = sites.len();
        let params = Params::new(n, p, q, seed).unwrap();
        let mut cfg = Configuration::from_sites(sites, 0).unwrap();
        let total = cfg.total();
        let mut tape = InstructionTape::new(n, seed);
        let out = stabilize(&mut cfg, &params, &mut tape, &StabilizeOptions::default()).unwrap();
        prop_assert!(cfg.is_stable());
        prop_assert_eq!(cfg.particles_on_sites() + cfg.sink_count(), total);
        prop_assert_eq!(out.sleep_count as usize, cfg.sleeping_count());
    }

    #[test]
    fn toppling_order_is_irrelevant(
        sites in prop::collection::vec(site_state(), 1..9),
        q in 0.1f64..1.0,
        seed in any::<u64>(),
    ) {
        let n = sites.len();
        let params = Params::new(n, 0.5, q, seed).unwrap();
        let initial = Configuration::from_sites(sites, 0).unwrap();
        let tape = InstructionTape::new(n, seed);
        let policies = [
            TopplingPolicy::LowestIndexFirst,
            TopplingPolicy::Fifo,
            TopplingPolicy::Lifo,
            TopplingPolicy::Random(seed.rotate_left(7)),
        ];
        prop_assert!(check_abelian(&initial, &params, &tape, &policies).unwrap());
    }

    #[test]
    fn tape_bytes_round_trip(
        runs in (1u32..6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(instruction(n), 0..20), n as usize)),
        seed in any::<u64>(),
    ) {
        let tape = InstructionTape::from_runs(seed, runs).unwrap();
        let back = InstructionTape::from_bytes(&tape.to_bytes()).unwrap();
        prop_assert_eq!(back.seed(), seed);
        for site in 0..tape.n() {
            prop_assert_eq!(back.run(site), tape.run(site));
        }
    }

    #[test]
    fn exact_solvers_agree_and_sum_to_one(n in 1usize..10, p in 0.05f64..1.0, q in 0.01f64..1.0) {
        let a = exact_final_pmf(n, p, q).unwrap();
        let b = exact_stopping_law(n, p, q).unwrap();
        let total: f64 = a.mass().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for k in 0..=n {
            prop_assert!((a.prob(k) - b.prob(k)).abs() < 1e-11);
        }
    }

    #[test]
    fn chain_steps_stay_under_boundary(n in 1usize..40, p in 0.01f64..1.0, q in 0.0f64..1.0, seed in any::<u64>()) {
        let params = Params::new(n, p, q, seed).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut s = BupState { y: 0, z: 0, t: 0 };
        for _ in 0..200 {
            if s.is_absorbed(n as u64) {
                break;
            }
            let next = step_discrete(s, &params, &mut rng).unwrap();
            prop_assert!(next.y.abs_diff(s.y) + (next.z - s.z) <= 1);
            prop_assert!(next.y + next.z <= n as u64);
            s = next;
        }
    }

    #[test]
    fn normalization_round_trips(g in -5.0f64..10.0, n in 100usize..100_000, a in 0.6f64..1.5, p in 0.1f64..0.9) {
        let q = (n as f64).powf(-a);
        let c = Params::new(n, p, q, 0).unwrap().constants();
        let s = denormalize_S(g, &c).unwrap();
        prop_assert!((normalize_S(s, &c).unwrap() - g).abs() < 1e-8);
        prop_assert!((gumbel_cdf(normalize_S(s, &c).unwrap()) - gumbel_cdf(g)).abs() < 1e-9);
    }

    #[test]
    fn kl_is_nonnegative(a in 0.001f64..0.999, p in 0.001f64..0.999) {
        let d = kl_bernoulli(a, p).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d > 0.0 || a == p);
    }

    #[test]
    fn threshold_is_monotone_in_level(n in 1usize..1_000_000, p in 0.01f64..0.99, x in -3.0f64..6.0, dx in 0.0f64..1.0) {
        prop_assert!(level_threshold(n, p, x) <= level_threshold(n, p, x + dx));
    }

    #[test]
    fn two_sample_ks_is_symmetric(a in prop::collection::vec(-10.0f64..10.0, 1..50), b in prop::collection::vec(-10.0f64..10.0, 1..50)) {
        prop_assert_eq!(ks_two_sample(&a, &b).unwrap(), ks_two_sample(&b, &a).unwrap());
    }

    #[test]
    fn worker_count_never_changes_results(master in any::<u64>(), reps in 0usize..200, workers in 1usize..9) {
        let f = |i: usize, seed: u64, rng: &mut arw_core::replicate::SimRng| {
            use rand::Rng;
            (i, seed, rng.random::<u64>())
        };
        prop_assert_eq!(run_replicates(master, reps, workers, f), run_replicates(master, reps, 1, f));
    }
}
