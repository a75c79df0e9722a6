//! Fixed-energy runs (`q = 0`): `m` particles on `n` sites, no sink.
//!
//! Each occupied site is first toppled until its particles are asleep or in
//! purgatory: all but one of its particles leave, and the last one sleeps with
//! probability `p`. The count chain then runs with `q = 0` until every particle
//! sleeps, i.e. `Y = m`; that step count is `𝔍`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use super::Kernel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InitialFixedEnergy {
    /// Sleeping particles after the initial toppling.
    pub y0: u64,
    /// Particles sent to purgatory, `m − y0`.
    pub initial_jumps: u64,
    /// Sites that received at least one particle.
    pub occupied: u64,
}

pub fn sample_initial_fixed_energy<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    m: usize,
    rng: &mut R,
) -> Result<InitialFixedEnergy> {
    check_args(n, p, m)?;
    let mut hit = vec![false; n];
    let mut occupied = 0u64;
    for _ in 0..m {
        let i = rng.random_range(0..n);
        if !hit[i] {
            hit[i] = true;
            occupied += 1;
        }
    }
    // the last particle at each occupied site sleeps independently
    let y0 = if p >= 1.0 {
        occupied
    } else {
        Binomial::new(occupied, p).expect("p in (0, 1)").sample(rng)
    };
    Ok(InitialFixedEnergy {
        y0,
        initial_jumps: m as u64 - y0,
        occupied,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FixedEnergyRun {
    pub initial: InitialFixedEnergy,
    /// `𝔍`, or the cap when it was reached first.
    pub steps: u64,
    pub cap_hit: bool,
    /// Updates of one fixed site during the run, Binomial(steps, 1/n).
    pub site_updates: u64,
}

pub fn run_fixed_energy<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    m: usize,
    step_cap: u64,
    rng: &mut R,
) -> Result<FixedEnergyRun> {
    let initial = sample_initial_fixed_energy(n, p, m, rng)?;
    let kernel = Kernel::new(n, p, 0.0);
    let target = m as u64;
    let mut y = initial.y0;
    let mut t = 0u64;
    while y != target && t < step_cap {
        kernel.apply(&mut y, rng.random());
        t += 1;
    }
    let cap_hit = y != target;
    // the coordinate picked at each step is uniform and independent of the
    // count path
    let site_updates = Binomial::new(t, 1.0 / n as f64)
        .expect("1/n in (0, 1]")
        .sample(rng);
    Ok(FixedEnergyRun {
        initial,
        steps: t,
        cap_hit,
        site_updates,
    })
}

fn check_args(n: usize, p: f64, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::domain("need n ≥ 1 and m ≥ 1"));
    }
    if m > n {
        return Err(Error::domain(format!("m = {m} exceeds n = {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}
