//! Maxima of `Y` between successive boundary levels.
//!
//! For a level `b`, `t(b)` is the first step with `B(t) ≤ b`. Given levels
//! `z_0 > z_1 > … > z_{L−1}`, entry 0 of the result is the maximum of `Y` over
//! `[0, t(z_0))` and entry `k ≥ 1` the maximum over `[t(z_{k−1}), t(z_k))`.
//! Empty windows give `None`, which compares below every level.

use rand::Rng;
use serde::Serialize;

use super::{sample_binomial, Kernel};
use crate::error::{Error, Result};
use crate::model::Params;

/// When to stop the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopRule {
    /// Stop at `𝔧`; windows still open are cut there and flagged.
    AtHitting,
    /// Keep running past `𝔧` until the last level is crossed.
    AtLastLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMaxima {
    pub maxima: Vec<Option<u64>>,
    /// Windows that `𝔧` cut short or that were never reached.
    pub truncated: Vec<bool>,
    /// `𝔧`, if the run got that far.
    pub hit_step: Option<u64>,
    pub hit_y: Option<u64>,
    pub steps: u64,
}

pub fn maxima_between_levels<R: Rng + ?Sized>(
    params: &Params,
    levels: &[f64],
    stop: StopRule,
    rng: &mut R,
) -> Result<LevelMaxima> {
    params.require_dissipative()?;
    let n = params.n as u64;
    let nf = n as f64;
    if levels.is_empty() {
        return Err(Error::domain("at least one level is required"));
    }
    if levels.iter().any(|&z| !(z > 0.0 && z <= nf)) {
        return Err(Error::domain(format!("levels must lie in (0, {n}]")));
    }
    if levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("levels must be strictly decreasing"));
    }

    let kernel = Kernel::new(params.n, params.p, params.q);
    let count = levels.len();
    let mut maxima: Vec<Option<u64>> = vec![None; count];
    let mut truncated = vec![false; count];
    let mut hit_step = None;
    let mut hit_y = None;

    let mut y = sample_binomial(rng, n, params.p);
    let mut z = 0u64;
    let mut t = 0u64;
    // index of the window containing the current step
    let mut k = 0usize;
    loop {
        let b = (n - z) as f64;
        while k < count && b <= levels[k] {
            k += 1;
        }
        if k == count {
            break;
        }
        maxima[k] = Some(maxima[k].map_or(y, |m| m.max(y)));
        if hit_step.is_none() && y + z >= n {
            hit_step = Some(t);
            hit_y = Some(y);
            if stop == StopRule::AtHitting {
                truncated[k..].iter_mut().for_each(|f| *f = true);
                break;
            }
        }
        if kernel.apply(&mut y, rng.random()) {
            z += 1;
        }
        t += 1;
    }

    Ok(LevelMaxima {
        maxima,
        truncated,
        hit_step,
        hit_y,
        steps: t,
    })
}

/// The four thresholds `k_1 > k_2 > k_3 > k_4` around `pn + α_n` used to
/// pin down the hitting value when `q = 1/(n+1)`.
pub fn window_thresholds(params: &Params, eps: f64) -> [f64; 4] {
    let c = params.constants();
    let centre = params.p * params.n as f64;
    let a = c.alpha_n;
    [
        centre + 2.0 * a,
        centre + (1.0 + eps) * a,
        centre + (1.0 - eps / 2.0) * a,
        centre + (1.0 - eps) * a,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicate::rng_from_seed;

    #[test]
    fn single_top_level_is_an_empty_window() {
        let params = Params::new(50, 0.5, 0.1, 0).unwrap();
        let m = maxima_between_levels(&params, &[50.0], StopRule::AtLastLevel, &mut rng_from_seed(1)).unwrap();
        assert_eq!(m.maxima, vec![None]);
        assert_eq!(m.steps, 0);
    }

    #[test]
    fn level_below_absorption_is_truncated() {
        let params = Params::new(50, 0.5, 0.1, 0).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let m = maxima_between_levels(&params, &[50.0, 1.0], StopRule::AtHitting, &mut rng).unwrap();
            assert!(m.truncated[1]);
            assert!(m.hit_step.is_some());
            assert_eq!(m.steps, m.hit_step.unwrap());
            assert!(m.maxima[1].unwrap() >= m.hit_y.unwrap());
        }
    }

    #[test]
    fn run_through_reaches_last_level() {
        let params = Params::new(40, 0.5, 0.2, 0).unwrap();
        let mut rng = rng_from_seed(3);
        let m = maxima_between_levels(&params, &[40.0, 30.0, 5.0], StopRule::AtLastLevel, &mut rng).unwrap();
        assert!(m.hit_step.is_some());
        assert!(m.truncated.iter().all(|f| !f));
        assert!(m.maxima[1].is_some() && m.maxima[2].is_some());
    }

    #[test]
    fn rejects_bad_levels() {
        let params = Params::new(40, 0.5, 0.2, 0).unwrap();
        let mut rng = rng_from_seed(3);
        for levels in [&[][..], &[30.0, 35.0], &[41.0], &[0.0]] {
            assert!(maxima_between_levels(&params, levels, StopRule::AtHitting, &mut rng).is_err());
        }
    }

    #[test]
    fn thresholds_decrease() {
        let params = Params::new(10_000, 0.5, 1.0 / 10_001.0, 0).unwrap();
        let k = window_thresholds(&params, 0.5);
        assert!(k.windows(2).all(|w| w[0] > w[1]));
        assert!((k[3] - 5000.0 - 0.5 * 151.742_712_938_514_64).abs() < 1e-9);
    }
}
