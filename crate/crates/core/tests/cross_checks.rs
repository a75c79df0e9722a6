//! Monte Carlo engines against exact finite-n answers.

use arw_core::arw::{
    check_abelian, drive_dissipate, stabilize, stabilize_via_purgatory, Configuration,
    FreshInstructions, InstructionTape, StabilizeOptions, TopplingPolicy,
};
use arw_core::bup::{
    run_continuous, run_fixed_energy, run_to_hitting, step_discrete, BupState, ContinuousMode,
    Start,
};
use arw_core::oracle::{binomial_pmf, exact_final_pmf, exact_fixed_energy_mean, exact_stopping_law};
use arw_core::replicate::{default_workers, rng_from_seed, run_replicates};
use arw_core::stats::{chi_square_gof, dkw_two_sample_threshold, ks_two_sample, MeanEstimate};
use arw_core::Params;
use rand::Rng;

fn histogram(values: &[u64], len: usize) -> Vec<u64> {
    let mut counts = vec![0u64; len];
    for &v in values {
        counts[v as usize] += 1;
    }
    counts
}

fn assert_fits(values: &[u64], probs: &[f64], what: &str) {
    let chi = chi_square_gof(&histogram(values, probs.len()), probs, 5.0).unwrap();
    assert!(chi.pass(), "{what}: {chi:?}");
}

#[test]
fn all_three_engines_match_exact_law() {
    for (n, p, q) in [(3, 0.5, 1.0 / 3.0), (5, 0.3, 0.2), (6, 0.7, 0.05)] {
        let params = Params::new(n, p, q, 0).unwrap();
        let exact = exact_final_pmf(n, p, q).unwrap();
        let samples = run_replicates(n as u64, 40_000, default_workers(), |_, _, rng| {
            let mut cfg = Configuration::all_active(n);
            let direct = stabilize(&mut cfg, &params, &mut FreshInstructions::new(rng), &StabilizeOptions::default())
                .unwrap()
                .sleep_count;
            let purgatory = stabilize_via_purgatory(&params, rng, false).unwrap().outcome.sleep_count;
            let chain = run_to_hitting(&params, rng).unwrap().y;
            [direct, purgatory, chain]
        });
        for (k, engine) in ["direct", "purgatory", "chain"].iter().enumerate() {
            let xs: Vec<u64> = samples.iter().map(|s| s[k]).collect();
            assert_fits(&xs, exact.mass(), &format!("{engine} n={n} p={p} q={q}"));
        }
    }
}

#[test]
fn forward_law_matches_chain_at_moderate_n() {
    let (n, p, q) = (60, 0.5, 1.0 / 61.0);
    let params = Params::new(n, p, q, 0).unwrap();
    let exact = exact_stopping_law(n, p, q).unwrap();
    let xs = run_replicates(3, 50_000, default_workers(), |_, _, rng| run_to_hitting(&params, rng).unwrap().y);
    assert_fits(&xs, exact.mass(), "forward law");
}

#[test]
fn sink_always_gives_binomial() {
    let n = 20;
    let params = Params::new(n, 0.4, 1.0, 0).unwrap();
    let probs: Vec<f64> = (0..=n as u64).map(|k| binomial_pmf(n as u64, 0.4, k)).collect();
    let xs = run_replicates(4, 100_000, default_workers(), |_, _, rng| {
        let mut cfg = Configuration::all_active(n);
        stabilize(&mut cfg, &params, &mut FreshInstructions::new(rng), &StabilizeOptions::default())
            .unwrap()
            .sleep_count
    });
    assert_fits(&xs, &probs, "q = 1");
}

#[test]
fn fixed_energy_mean_matches_oracle() {
    for (n, m) in [(1, 1), (2, 1), (10, 5), (10, 3)] {
        let exact = exact_fixed_energy_mean(n, 0.5, m).unwrap();
        let steps: Vec<f64> = run_replicates(n as u64 * 31 + m as u64, 100_000, default_workers(), |_, _, rng| {
            run_fixed_energy(n, 0.5, m, u64::MAX, rng).unwrap().steps as f64
        });
        let est = MeanEstimate::from_samples(&steps);
        assert!(est.z_score(exact).abs() < 3.0 || est.se == 0.0 && est.mean == exact,
            "n={n} m={m}: {est:?} vs {exact}");
    }
}

#[test]
fn driven_chain_settles_to_stabilized_law() {
    let (n, p, q) = (4, 0.5, 0.3);
    let params = Params::new(n, p, q, 0).unwrap();
    let exact = exact_final_pmf(n, p, q).unwrap();
    let xs = run_replicates(5, 20_000, default_workers(), |_, seed, rng| {
        let mut cfg = Configuration::empty(n);
        let mut source = rng_from_seed(seed ^ 0xA5A5);
        let outs = drive_dissipate(
            &mut cfg,
            &params,
            60,
            &mut FreshInstructions::new(&mut source),
            rng,
            &StabilizeOptions::default(),
        )
        .unwrap();
        outs.last().unwrap().sleep_count
    });
    assert_fits(&xs, exact.mass(), "driven-dissipative");
}

#[test]
fn purgatory_and_direct_jump_counts_agree() {
    let params = Params::new(6, 0.5, 0.2, 0).unwrap();
    let draw = |master: u64, direct: bool| -> Vec<f64> {
        run_replicates(master, 20_000, default_workers(), |_, _, rng| {
            if direct {
                let mut cfg = Configuration::all_active(6);
                stabilize(&mut cfg, &params, &mut FreshInstructions::new(rng), &StabilizeOptions::default())
                    .unwrap()
                    .jump_count as f64
            } else {
                stabilize_via_purgatory(&params, rng, false).unwrap().outcome.jump_count as f64
            }
        })
    };
    let (a, b) = (draw(6, true), draw(7, false));
    let d = ks_two_sample(&a, &b).unwrap();
    assert!(d < dkw_two_sample_threshold(a.len(), b.len()), "KS {d}");
}

#[test]
fn abelian_over_many_seeds() {
    let params = Params::new(8, 0.5, 0.25, 0).unwrap();
    let policies = [
        TopplingPolicy::LowestIndexFirst,
        TopplingPolicy::Fifo,
        TopplingPolicy::Lifo,
        TopplingPolicy::Random(1),
        TopplingPolicy::Random(2),
    ];
    for seed in 0..100 {
        let tape = InstructionTape::new(8, seed);
        assert!(check_abelian(&Configuration::all_active(8), &params, &tape, &policies).unwrap(), "seed {seed}");
    }
}

#[test]
fn stationary_start_stays_binomial() {
    let (n, p) = (50, 0.5);
    let params = Params::new(n, p, 0.0, 0).unwrap();
    let probs: Vec<f64> = (0..=n as u64).map(|k| binomial_pmf(n as u64, p, k)).collect();
    let xs = run_replicates(8, 100_000, default_workers(), |_, _, rng| {
        run_continuous(&params, ContinuousMode::CountOnly, 10.0, 1.0, Start::Stationary, rng)
            .unwrap()
            .final_y
    });
    assert_fits(&xs, &probs, "Y(T)");
}

#[test]
fn engines_agree_from_fixed_start() {
    let params = Params::new(100, 0.3, 0.0, 0).unwrap();
    let draw = |mode, master| -> Vec<f64> {
        run_replicates(master, 10_000, default_workers(), |_, _, rng| {
            run_continuous(&params, mode, 0.7, 1.0, Start::AtValue(80), rng).unwrap().final_y as f64
        })
    };
    let a = draw(ContinuousMode::CountOnly, 9);
    let b = draw(ContinuousMode::FullState, 10);
    let d = ks_two_sample(&a, &b).unwrap();
    assert!(d < dkw_two_sample_threshold(a.len(), b.len()), "KS {d}");
}

#[test]
fn drift_regression_recovers_slope() {
    // E[ΔY | Y = y] = (1 − q)(p − y/n)
    let (n, p, q) = (200, 0.5, 0.2);
    let params = Params::new(n, p, q, 0).unwrap();
    let mut rng = rng_from_seed(11);
    let reps = 400_000;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..reps {
        let y = rng.random_range(0..n as u64 / 2);
        let next = step_discrete(BupState { y, z: 0, t: 0 }, &params, &mut rng).unwrap();
        let (x, d) = (y as f64, next.y as f64 - y as f64);
        sx += x;
        sy += d;
        sxx += x * x;
        sxy += x * d;
        syy += d * d;
    }
    let r = reps as f64;
    let vx = sxx - sx * sx / r;
    let slope = (sxy - sx * sy / r) / vx;
    let intercept = (sy - slope * sx) / r;
    let resid = (syy - sy * sy / r - slope * (sxy - sx * sy / r)) / (r - 2.0);
    let se = (resid / vx).sqrt();
    let expected = -(1.0 - q) / n as f64;
    assert!((slope - expected).abs() < 3.0 * se, "slope {slope} vs {expected} (se {se})");
    assert!((intercept - (1.0 - q) * p).abs() < 0.01, "intercept {intercept}");
}

#[test]
fn hitting_is_first_exceedance() {
    let params = Params::new(30, 0.5, 0.05, 0).unwrap();
    let mut rng = rng_from_seed(12);
    for _ in 0..2_000 {
        let mut s = BupState { y: rng.random_range(0..30), z: 0, t: 0 };
        while !s.is_absorbed(30) {
            s = step_discrete(s, &params, &mut rng).unwrap();
            assert!(s.y + s.z <= 30);
        }
        assert_eq!(s.y + s.z, 30);
    }
}
