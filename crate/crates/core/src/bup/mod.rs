//! The binomial update process.
//!
//! `Y` counts the ones in an `n`-bit vector started from i.i.d. Ber(p) bits.
//! Each step is lazy with probability `q` (the sink counter `Z` grows by one);
//! otherwise a uniform coordinate is resampled as Ber(p). The boundary is
//! `B = n − Z`, and the hitting time `𝔧` is the first step with `Y = B`. The
//! law of `Y(𝔧)` is the stationary sleeping count of the driven-dissipative
//! chain.
//!
//! Given the count, the chosen coordinate is a one with probability `y/n`,
//! so the count-only engines never store the bits.

mod continuous;
mod fixed_energy;
mod full_state;
mod levels;

pub use continuous::{
    cluster_occupation, conditional_moments, ClusterOccupation, exact_conditional_mean, exact_conditional_variance,
    level_threshold, run_continuous, x_prime, ConditionalMoments, ContinuousMode,
    PathStats, Start,
};
pub use fixed_energy::{
    run_fixed_energy, sample_initial_fixed_energy, FixedEnergyRun, InitialFixedEnergy,
};
pub use full_state::FullState;
pub use levels::{maxima_between_levels, window_thresholds, LevelMaxima, StopRule};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BupState {
    pub y: u64,
    pub z: u64,
    pub t: u64,
}

impl BupState {
    pub fn is_absorbed(&self, n: u64) -> bool {
        self.y + self.z >= n
    }
}

/// One-uniform transition table for a fixed `(n, p, q)`.
///
/// With `u` uniform on [0, 1): lazy if `u < q`, down if
/// `u < q + (1−q)(1−p) y/n`, up if below that plus `(1−q) p (n−y)/n`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    n: u64,
    q: f64,
    down: f64,
    up: f64,
}

impl Kernel {
    pub(crate) fn new(n: usize, p: f64, q: f64) -> Self {
        let nf = n as f64;
        Kernel {
            n: n as u64,
            q,
            down: (1.0 - q) * (1.0 - p) / nf,
            up: (1.0 - q) * p / nf,
        }
    }

    /// Applies one step; returns true when it was lazy.
    #[inline(always)]
    pub(crate) fn apply(&self, y: &mut u64, u: f64) -> bool {
        if u < self.q {
            return true;
        }
        let d = self.q + self.down * *y as f64;
        if u < d {
            *y -= 1;
        } else if u < d + self.up * (self.n - *y) as f64 {
            *y += 1;
        }
        false
    }
}

/// Draws `Y(0) ~ Binomial(n, p)`.
pub(crate) fn sample_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p checked by Params").sample(rng)
}

/// One discrete step. Fails on an absorbed state.
pub fn step_discrete<R: Rng + ?Sized>(state: BupState, params: &Params, rng: &mut R) -> Result<BupState> {
    let n = params.n as u64;
    if state.y > n || state.z > n {
        return Err(Error::domain(format!("state {state:?} outside [0, {n}]")));
    }
    if state.is_absorbed(n) {
        return Err(Error::Logic(format!(
            "step from absorbed state y={}, z={} with n={n}",
            state.y, state.z
        )));
    }
    let mut y = state.y;
    let lazy = Kernel::new(params.n, params.p, params.q).apply(&mut y, rng.random());
    Ok(BupState {
        y,
        z: state.z + lazy as u64,
        t: state.t + 1,
    })
}

/// `(Y(𝔧), 𝔧, Z(𝔧))` for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hitting {
    pub y: u64,
    pub steps: u64,
    pub z: u64,
}

/// Runs the count chain from `Y(0) ~ Binomial(n, p)`, `Z(0) = 0` until
/// `Y = n − Z`.
pub fn run_to_hitting<R: Rng + ?Sized>(params: &Params, rng: &mut R) -> Result<Hitting> {
    params.require_dissipative()?;
    let n = params.n as u64;
    let kernel = Kernel::new(params.n, params.p, params.q);
    let mut y = sample_binomial(rng, n, params.p);
    let mut z = 0u64;
    let mut t = 0u64;
    // Y − B rises by at most one per step, so the first exceedance is a hit.
    while y + z < n {
        if kernel.apply(&mut y, rng.random()) {
            z += 1;
        }
        t += 1;
    }
    assert_eq!(y + z, n, "boundary overshoot at step {t}");
    Ok(Hitting { y, steps: t, z })
}
