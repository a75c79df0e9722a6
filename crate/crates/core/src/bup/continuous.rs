//! Continuous-time process.
//!
//! Every coordinate is resampled at the times of its own rate-1 Poisson
//! clock, and the sink ticks at rate `q′ = nq/(1−q)`. Events therefore occur
//! at total rate `n + q′`, and each one is a sink tick with probability `q`:
//! the embedded chain is the discrete process.
//!
//! Two engines:
//!
//! * count-only: draws the event count `N ~ Poisson((n + q′) T)` and runs `N`
//!   embedded steps. The `N + 1` holding intervals are then exchangeable with
//!   lengths `T · Dirichlet(1, …, 1)`, so if `k` of the visited states lie above
//!   the level the occupation time is `T · Beta(k, N + 1 − k)`. This is exact
//!   in law and skips drawing one exponential per event.
//! * full-state: keeps every coordinate, draws every exponential holding time,
//!   and reports the regeneration time (every coordinate resampled).
//!
//! Levels are compared through the integer threshold `⌈pn + x a_n⌉`.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Poisson};
use serde::Serialize;

use super::{sample_binomial, FullState, Kernel};
use crate::error::{Error, Result};
use crate::model::Params;
use crate::replicate::run_replicates;
use crate::stats::MeanEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContinuousMode {
    CountOnly,
    FullState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Start {
    /// `Y(0) ~ Binomial(n, p)`.
    Stationary,
    AtValue(u64),
}

/// Path summary over the window `[0, T]`, in the normalized units
/// `s = (Y − pn)/a_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStats {
    /// `max s(r)` over the window.
    pub running_max: f64,
    pub max_count: u64,
    /// Time spent with `s ≥ x`.
    pub occupation: f64,
    /// Entries into `{s ≥ x}` after time 0.
    pub exceed_count: u64,
    pub window: (f64, f64),
    pub start_y: u64,
    pub final_y: u64,
    pub events: u64,
    pub sink_ticks: u64,
    /// First time every coordinate was resampled (full-state only).
    pub regeneration_time: Option<f64>,
}

/// `v.ceil()`, except that values within 1e-9 (relative) of an integer
/// count as that integer.
fn ceil_tol(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

/// Smallest count `k` with `(k − pn)/a_n ≥ x`.
pub fn level_threshold(n: usize, p: f64, x: f64) -> i64 {
    let a_n = (p * (1.0 - p) * n as f64).sqrt();
    ceil_tol(p * n as f64 + x * a_n) as i64
}

/// Smallest `x′ ≥ x` at which `pn + x′ a_n` is an integer.
pub fn x_prime(x: f64, n: usize, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    let nf = n as f64;
    let a_n = (p * (1.0 - p) * nf).sqrt();
    let top = (1.0 - p) * nf / a_n;
    if !x.is_finite() || x > top + 1e-12 {
        return Err(Error::domain(format!(
            "level {x} exceeds the largest supported value {top}"
        )));
    }
    let k = ceil_tol(p * nf + x * a_n).max(0.0);
    Ok((k - p * nf) / a_n)
}

pub fn run_continuous<R: Rng + ?Sized>(
    params: &Params,
    mode: ContinuousMode,
    horizon: f64,
    x: f64,
    start: Start,
    rng: &mut R,
) -> Result<PathStats> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let c = params.constants();
    let q_prime = c
        .q_prime
        .ok_or_else(|| Error::domain("continuous time needs q < 1"))?;
    let n = params.n as u64;
    let pn = params.p * n as f64;
    let rate = n as f64 + q_prime;
    let thr = level_threshold(params.n, params.p, x);
    let above = |y: u64| y as i64 >= thr;
    let y0 = match start {
        Start::AtValue(v) if v > n => {
            return Err(Error::domain(format!("start value {v} exceeds n = {n}")))
        }
        Start::AtValue(v) => Some(v),
        Start::Stationary => None,
    };

    let mut stats = match mode {
        ContinuousMode::CountOnly => {
            let mut y = y0.unwrap_or_else(|| sample_binomial(rng, n, params.p));
            let events = Poisson::new(rate * horizon)
                .map_err(|e| Error::domain(format!("event count: {e}")))?
                .sample(rng) as u64;
            let kernel = Kernel::new(params.n, params.p, params.q);
            let start_y = y;
            let mut max_count = y;
            let mut was_above = above(y);
            let mut k = was_above as u64;
            let mut exceed = 0;
            let mut sink = 0;
            for _ in 0..events {
                if kernel.apply(&mut y, rng.random()) {
                    sink += 1;
                }
                max_count = max_count.max(y);
                let now = above(y);
                k += now as u64;
                exceed += (now && !was_above) as u64;
                was_above = now;
            }
            let intervals = events + 1;
            let occupation = if k == 0 {
                0.0
            } else if k == intervals {
                horizon
            } else {
                let share = Beta::new(k as f64, (intervals - k) as f64)
                    .expect("positive shape parameters")
                    .sample(rng);
                horizon * share
            };
            PathStats {
                running_max: 0.0,
                max_count,
                occupation,
                exceed_count: exceed,
                window: (0.0, horizon),
                start_y,
                final_y: y,
                events,
                sink_ticks: sink,
                regeneration_time: None,
            }
        }
        ContinuousMode::FullState => {
            let mut st = match y0 {
                Some(v) => FullState::at_value(params.n, v as usize, params.p, params.q),
                None => FullState::stationary(params.n, params.p, params.q, rng),
            };
            let start_y = st.state.y;
            let mut max_count = start_y;
            let mut was_above = above(start_y);
            let mut occupation = 0.0;
            let mut exceed = 0;
            let mut sink = 0;
            let mut regen = None;
            let mut t = 0.0;
            loop {
                let dt: f64 = Exp1.sample(rng);
                let dt = dt / rate;
                if t + dt >= horizon {
                    if was_above {
                        occupation += horizon - t;
                    }
                    break;
                }
                if was_above {
                    occupation += dt;
                }
                t += dt;
                if st.step(rng) {
                    sink += 1;
                }
                let y = st.state.y;
                max_count = max_count.max(y);
                let now = above(y);
                exceed += (now && !was_above) as u64;
                was_above = now;
                if regen.is_none() && st.regenerated() {
                    regen = Some(t);
                }
            }
            PathStats {
                running_max: 0.0,
                max_count,
                occupation,
                exceed_count: exceed,
                window: (0.0, horizon),
                start_y,
                final_y: st.state.y,
                events: st.state.t,
                sink_ticks: sink,
                regeneration_time: regen,
            }
        }
    };
    stats.running_max = (stats.max_count as f64 - pn) / c.a_n;
    debug_assert!(stats.occupation <= horizon);
    debug_assert!(stats.occupation == 0.0 || stats.max_count as i64 >= thr);
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub x_prime: f64,
    pub start: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub exact_mean: f64,
    pub exact_var: f64,
}

/// `E S(t)` from `S(0) = pn + x′ a_n` with `q = 0`: `pn + e^{−t} x′ a_n`.
pub fn exact_conditional_mean(n: usize, p: f64, x_prime: f64, t: f64) -> f64 {
    let a_n = (p * (1.0 - p) * n as f64).sqrt();
    p * n as f64 + (-t).exp() * x_prime * a_n
}

/// `Var S(t)` from the same start:
/// `(1 − e^{−t}) [pn(1−p)(e^{−t} + 1) + x′ a_n e^{−t} (1 − 2p)]`.
pub fn exact_conditional_variance(n: usize, p: f64, x_prime: f64, t: f64) -> f64 {
    let a_n = (p * (1.0 - p) * n as f64).sqrt();
    let e = (-t).exp();
    (1.0 - e) * (p * n as f64 * (1.0 - p) * (e + 1.0) + x_prime * a_n * e * (1.0 - 2.0 * p))
}

/// Mean and variance of `S(t)` started from `pn + x′ a_n`, with `q = 0`,
/// over `reps` replicates seeded from `seed`.
pub fn conditional_moments(
    n: usize,
    p: f64,
    x: f64,
    t: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<ConditionalMoments> {
    if reps < 4 {
        return Err(Error::domain("need at least 4 replicates"));
    }
    let xp = x_prime(x, n, p)?;
    let params = Params::new(n, p, 0.0, seed)?;
    let start = (p * n as f64 + xp * params.constants().a_n).round() as u64;
    let runs = run_replicates(seed, reps, workers, |_, _, rng| {
        run_continuous(&params, ContinuousMode::CountOnly, t, x, Start::AtValue(start), rng)
            .map(|s| s.final_y as f64)
    });
    let ys: Vec<f64> = runs.into_iter().collect::<Result<_>>()?;
    let r = ys.len() as f64;
    let m = MeanEstimate::from_samples(&ys);
    let m2 = ys.iter().map(|v| (v - m.mean).powi(2)).sum::<f64>() / r;
    let m4 = ys.iter().map(|v| (v - m.mean).powi(4)).sum::<f64>() / r;
    let var = m2 * r / (r - 1.0);
    // large-sample standard error of the sample variance
    let var_se = ((m4 - m2 * m2 * (r - 3.0) / (r - 1.0)) / r).max(0.0).sqrt();
    Ok(ConditionalMoments {
        x_prime: xp,
        start,
        mean: m.mean,
        mean_se: m.se,
        var,
        var_se,
        exact_mean: exact_conditional_mean(n, p, xp, t),
        exact_var: exact_conditional_variance(n, p, xp, t),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterOccupation {
    pub x_prime: f64,
    pub estimate: MeanEstimate,
    /// Set when `x` lies outside the range where `x² E L ≈ 1` is expected.
    pub warning: Option<String>,
}

/// Mean time above `x` during `[0, log n]`, started from `x′`, with `q = 0`.
pub fn cluster_occupation(
    n: usize,
    p: f64,
    x: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<ClusterOccupation> {
    if reps < 2 {
        return Err(Error::domain("need at least 2 replicates"));
    }
    let xp = x_prime(x, n, p)?;
    let params = Params::new(n, p, 0.0, seed)?;
    let start = (p * n as f64 + xp * params.constants().a_n).round() as u64;
    let horizon = (n as f64).ln();
    let runs = run_replicates(seed, reps, workers, |_, _, rng| {
        run_continuous(&params, ContinuousMode::CountOnly, horizon, x, Start::AtValue(start), rng)
            .map(|s| s.occupation)
    });
    let ls: Vec<f64> = runs.into_iter().collect::<Result<_>>()?;
    let nf = n as f64;
    let warning = if x < nf.ln().sqrt() {
        Some(format!("x = {x} is below √(log n) = {:.3}", nf.ln().sqrt()))
    } else if x > nf.powf(1.0 / 6.0) {
        Some(format!("x = {x} is above n^(1/6) = {:.3}", nf.powf(1.0 / 6.0)))
    } else {
        None
    };
    Ok(ClusterOccupation {
        x_prime: xp,
        estimate: MeanEstimate::from_samples(&ls),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicate::rng_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn x_prime_examples() {
        assert_relative_eq!(x_prime(1.0, 100, 0.5).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(x_prime(1.1, 100, 0.5).unwrap(), 1.2, max_relative = 1e-12);
        assert_relative_eq!(x_prime(4.0, 10_000, 0.5).unwrap(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(x_prime(10.0, 100, 0.5).unwrap(), 10.0, max_relative = 1e-12);
        assert!(x_prime(10.01, 100, 0.5).is_err());
    }

    #[test]
    fn thresholds_at_lattice_points() {
        assert_eq!(level_threshold(10_000, 0.5, 4.0), 5200);
        assert_eq!(level_threshold(10_000, 0.5, 2.0), 5100);
        assert_eq!(level_threshold(10_000, 0.5, 2.001), 5101);
        assert_eq!(level_threshold(100, 0.5, 1.1), 56);
    }

    /// Per-coordinate computation: ones stay one with probability
    /// `e + (1−e)p`, zeros become one with probability `(1−e)p`.
    fn variance_by_coordinates(n: usize, p: f64, v: f64, t: f64) -> f64 {
        let e = (-t).exp();
        let a = e + (1.0 - e) * p;
        let b = (1.0 - e) * p;
        v * a * (1.0 - a) + (n as f64 - v) * b * (1.0 - b)
    }

    #[test]
    fn variance_formula_matches_coordinate_sum() {
        for &(n, p, x, t) in &[(10_000, 0.5, 4.0, 1.0), (500, 0.3, 2.0, 0.4), (64, 0.8, 1.0, 3.0)] {
            let xp = x_prime(x, n, p).unwrap();
            let v = p * n as f64 + xp * (p * (1.0 - p) * n as f64).sqrt();
            assert_relative_eq!(
                exact_conditional_variance(n, p, xp, t),
                variance_by_coordinates(n, p, v, t),
                max_relative = 1e-10
            );
        }
        assert_relative_eq!(exact_conditional_mean(10_000, 0.5, 4.0, 1.0), 5_073.575_888_234_289, max_relative = 1e-14);
        assert_relative_eq!(exact_conditional_variance(10_000, 0.5, 4.0, 1.0), 2_161.661_791_908_468_3, max_relative = 1e-12);
    }

    #[test]
    fn count_only_bookkeeping() {
        let params = Params::new(100, 0.5, 0.0, 0).unwrap();
        let mut rng = rng_from_seed(7);
        for _ in 0..200 {
            let s = run_continuous(&params, ContinuousMode::CountOnly, 2.0, 1.0, Start::Stationary, &mut rng).unwrap();
            assert!(s.occupation >= 0.0 && s.occupation <= 2.0);
            if s.occupation > 0.0 {
                assert!(s.running_max >= 1.0 - 1e-12);
            }
            assert_eq!(s.sink_ticks, 0);
        }
        // starting at the top with the level at the top: always above at t = 0
        let top = run_continuous(&params, ContinuousMode::CountOnly, 1.0, 10.0, Start::AtValue(100), &mut rng).unwrap();
        assert!(top.occupation > 0.0);
    }

    #[test]
    fn full_state_bookkeeping() {
        let params = Params::new(50, 0.4, 0.1, 0).unwrap();
        let mut rng = rng_from_seed(8);
        let s = run_continuous(&params, ContinuousMode::FullState, 20.0, 0.5, Start::Stationary, &mut rng).unwrap();
        assert!(s.regeneration_time.is_some());
        assert!(s.occupation <= 20.0);
        assert!(s.sink_ticks > 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let params = Params::new(10, 0.5, 0.0, 0).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(run_continuous(&params, ContinuousMode::CountOnly, 0.0, 1.0, Start::Stationary, &mut rng).is_err());
        assert!(run_continuous(&params, ContinuousMode::CountOnly, 1.0, 1.0, Start::AtValue(11), &mut rng).is_err());
        let q1 = Params::new(10, 0.5, 1.0, 0).unwrap();
        assert!(run_continuous(&q1, ContinuousMode::CountOnly, 1.0, 1.0, Start::Stationary, &mut rng).is_err());
    }

    #[test]
    fn top_level_occupation_is_positive() {
        // x at the largest supported value, p = 1/2
        let n = 100;
        let top = x_prime(10.0, n, 0.5).unwrap();
        let c = cluster_occupation(n, 0.5, top, 200, 1, 1).unwrap();
        assert!(c.estimate.mean > 0.0);
        let params = Params::new(n, 0.5, 0.0, 0).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let s = run_continuous(&params, ContinuousMode::CountOnly, (n as f64).ln(), top, Start::AtValue(100), &mut rng).unwrap();
            assert!(s.occupation > 0.0);
        }
    }
}
