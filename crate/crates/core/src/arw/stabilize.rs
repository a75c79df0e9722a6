use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;

use super::tape::{FreshInstructions, Instruction, InstructionSource, InstructionTape, Target};
use super::{Configuration, SiteState, StabilizationOutcome};
use crate::error::{Error, Result};
use crate::model::Params;
use crate::replicate::{rng_from_seed, SimRng};

/// Instruction executions allowed per stabilization before giving up.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// Order in which active sites are toppled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopplingPolicy {
    LowestIndexFirst,
    Fifo,
    Lifo,
    /// Uniformly random active site, from an RNG seeded with the value.
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct StabilizeOptions {
    pub policy: TopplingPolicy,
    pub step_cap: u64,
    pub track_per_site: bool,
}

impl Default for StabilizeOptions {
    fn default() -> Self {
        StabilizeOptions {
            policy: TopplingPolicy::Fifo,
            step_cap: DEFAULT_STEP_CAP,
            track_per_site: false,
        }
    }
}

/// Active-site scheduler. A site is queued at most once.
enum Queue {
    Fifo(VecDeque<u32>),
    Lifo(Vec<u32>),
    Lowest(BinaryHeap<Reverse<u32>>),
    Random(Vec<u32>, SimRng),
}

impl Queue {
    fn new(policy: TopplingPolicy) -> Self {
        match policy {
            TopplingPolicy::Fifo => Queue::Fifo(VecDeque::new()),
            TopplingPolicy::Lifo => Queue::Lifo(Vec::new()),
            TopplingPolicy::LowestIndexFirst => Queue::Lowest(BinaryHeap::new()),
            TopplingPolicy::Random(seed) => Queue::Random(Vec::new(), rng_from_seed(seed)),
        }
    }

    #[inline]
    fn push(&mut self, site: u32) {
        match self {
            Queue::Fifo(q) => q.push_back(site),
            Queue::Lifo(v) | Queue::Random(v, _) => v.push(site),
            Queue::Lowest(h) => h.push(Reverse(site)),
        }
    }

    #[inline]
    fn pop(&mut self) -> Option<u32> {
        match self {
            Queue::Fifo(q) => q.pop_front(),
            Queue::Lifo(v) => v.pop(),
            Queue::Lowest(h) => h.pop().map(|r| r.0),
            Queue::Random(v, rng) => {
                if v.is_empty() {
                    None
                } else {
                    let i = rng.random_range(0..v.len());
                    Some(v.swap_remove(i))
                }
            }
        }
    }
}

/// Topples active sites of `config` until none remain, reading instructions
/// from `source`.
///
/// A single active particle consumes one instruction: it sleeps, or jumps.
/// At a site with two or more particles a sleep is a no-op, and a jump moves
/// one particle. Fails with [`Error::StepCap`] after `step_cap` instruction
/// executions, which is how `p = 1` with a collision is caught.
pub fn stabilize<S: InstructionSource + ?Sized>(
    config: &mut Configuration,
    params: &Params,
    source: &mut S,
    options: &StabilizeOptions,
) -> Result<StabilizationOutcome> {
    let n = config.n();
    if n != params.n {
        return Err(Error::domain(format!(
            "configuration has {n} sites but params.n = {}",
            params.n
        )));
    }
    if params.q == 0.0 && config.particles_on_sites() > n as u64 {
        return Err(Error::domain(
            "more particles than sites with q = 0 can never stabilize",
        ));
    }

    let mut queue = Queue::new(options.policy);
    let mut queued = vec![false; n];
    for (i, s) in config.sites.iter().enumerate() {
        if s.is_active() {
            queue.push(i as u32);
            queued[i] = true;
        }
    }
    let mut per_site = options.track_per_site.then(|| vec![0u64; n]);
    let mut jumps = 0u64;
    let mut sunk = 0u64;
    let mut executed = 0u64;

    while let Some(site) = queue.pop() {
        let i = site as usize;
        queued[i] = false;
        let k = match config.sites[i] {
            SiteState::Active(k) => k,
            _ => unreachable!("queued site {i} is not active"),
        };
        executed += 1;
        if executed > options.step_cap {
            return Err(Error::StepCap {
                cap: options.step_cap,
            });
        }
        let inst = if k == 1 {
            source.next(i, params)
        } else {
            source.next_crowded(i, params)
        };
        match inst {
            Instruction::Sleep => {
                if k == 1 {
                    config.sites[i] = SiteState::Sleeping;
                }
            }
            Instruction::Jump(target) => {
                jumps += 1;
                if let Some(ps) = per_site.as_mut() {
                    ps[i] += 1;
                }
                config.sites[i] = if k == 1 {
                    SiteState::Empty
                } else {
                    SiteState::Active(k - 1)
                };
                match target {
                    Target::Sink => {
                        config.sink_count += 1;
                        sunk += 1;
                    }
                    Target::Site(j) => {
                        let j = j as usize;
                        config.sites[j] = config.sites[j].with_arrival();
                        if !queued[j] {
                            queue.push(j as u32);
                            queued[j] = true;
                        }
                    }
                }
            }
        }
        if config.sites[i].is_active() && !queued[i] {
            queue.push(site);
            queued[i] = true;
        }
        debug_assert!(config.conserved());
    }

    debug_assert!(config.is_stable());
    Ok(StabilizationOutcome {
        sleep_count: config.sleeping_count() as u64,
        jump_count: jumps,
        steps: None,
        sink_arrivals: sunk,
        instructions: executed,
        per_site_jumps: per_site,
    })
}

/// Draws the stationary sleeping count by stabilizing one active particle
/// per site with fresh instructions.
#[allow(non_snake_case)]
pub fn sample_stationary_S<R: Rng + ?Sized>(
    params: &Params,
    rng: &mut R,
) -> Result<StabilizationOutcome> {
    params.require_dissipative()?;
    if params.p >= 1.0 {
        return Err(Error::domain("stationary sampling needs p < 1"));
    }
    let mut config = Configuration::all_active(params.n);
    let out = stabilize(
        &mut config,
        params,
        &mut FreshInstructions::new(rng),
        &StabilizeOptions::default(),
    )?;
    debug_assert_eq!(out.sleep_count + out.sink_arrivals, params.n as u64);
    Ok(out)
}

/// Runs the driven-dissipative chain for `steps` steps: add an active
/// particle at a uniform site, then stabilize. Sites are drawn from `rng`,
/// instructions from `source`.
pub fn drive_dissipate<S, R>(
    config: &mut Configuration,
    params: &Params,
    steps: usize,
    source: &mut S,
    rng: &mut R,
    options: &StabilizeOptions,
) -> Result<Vec<StabilizationOutcome>>
where
    S: InstructionSource + ?Sized,
    R: Rng + ?Sized,
{
    params.require_dissipative()?;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let v = rng.random_range(0..params.n);
        config.add_particle(v);
        out.push(stabilize(config, params, source, options)?);
    }
    Ok(out)
}

/// Stabilizes `initial` against a rewound copy of `tape` under each policy
/// and reports whether every final configuration and jump count agree.
pub fn check_abelian(
    initial: &Configuration,
    params: &Params,
    tape: &InstructionTape,
    policies: &[TopplingPolicy],
) -> Result<bool> {
    let replays: Vec<_> = policies.iter().map(|&p| (tape.rewound(), p)).collect();
    replays_agree(initial, params, replays)
}

/// Like [`check_abelian`] but with an explicit tape per replay, so that a
/// tampered tape can be compared against the original.
pub fn replays_agree(
    initial: &Configuration,
    params: &Params,
    replays: Vec<(InstructionTape, TopplingPolicy)>,
) -> Result<bool> {
    let mut reference: Option<(Configuration, u64)> = None;
    for (mut tape, policy) in replays {
        let mut config = initial.clone();
        let options = StabilizeOptions {
            policy,
            ..Default::default()
        };
        let out = stabilize(&mut config, params, &mut tape, &options)?;
        match &reference {
            None => reference = Some((config, out.jump_count)),
            Some((c, j)) => {
                if *c != config || *j != out.jump_count {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
