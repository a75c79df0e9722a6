//! Activated random walk on the complete graph with self-loops and a sink.
//!
//! Every vertex of `[n]` is joined to every other, to itself and to the sink.
//! A toppled particle sleeps with probability `p`; otherwise it jumps to the
//! sink with probability `q` or to a uniform site of `[n]`. A sleeping
//! particle is woken by any arrival. Stabilization uses the site-wise
//! construction: each site reads instructions from its own stack, so the
//! final configuration does not depend on the toppling order.

mod purgatory;
mod stabilize;
mod tape;

pub use purgatory::{stabilize_via_purgatory, PurgatoryRun};
pub use stabilize::{
    check_abelian, drive_dissipate, replays_agree, sample_stationary_S, stabilize,
    StabilizeOptions, TopplingPolicy, DEFAULT_STEP_CAP,
};
pub use tape::{
    FreshInstructions, Instruction, InstructionSource, InstructionTape, Target, TAPE_MAGIC,
    TAPE_VERSION,
};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SiteState {
    #[default]
    Empty,
    Sleeping,
    Active(u32),
}

impl SiteState {
    pub fn particles(self) -> u64 {
        match self {
            SiteState::Empty => 0,
            SiteState::Sleeping => 1,
            SiteState::Active(k) => k as u64,
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, SiteState::Active(_))
    }

    /// State after one particle arrives.
    fn with_arrival(self) -> SiteState {
        match self {
            SiteState::Empty => SiteState::Active(1),
            SiteState::Sleeping => SiteState::Active(2),
            SiteState::Active(k) => SiteState::Active(k + 1),
        }
    }
}

/// Site occupancies plus the particles absorbed by the sink.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    sites: Vec<SiteState>,
    sink_count: u64,
    total: u64,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration {
            sites: vec![SiteState::Empty; n],
            sink_count: 0,
            total: 0,
        }
    }

    /// One active particle on every site.
    pub fn all_active(n: usize) -> Self {
        Configuration {
            sites: vec![SiteState::Active(1); n],
            sink_count: 0,
            total: n as u64,
        }
    }

    pub fn from_sites(sites: Vec<SiteState>, sink_count: u64) -> Result<Self> {
        if sites.contains(&SiteState::Active(0)) {
            return Err(Error::domain("an active site must hold at least one particle"));
        }
        let on_sites: u64 = sites.iter().map(|s| s.particles()).sum();
        Ok(Configuration {
            sites,
            sink_count,
            total: on_sites + sink_count,
        })
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[SiteState] {
        &self.sites
    }

    pub fn sink_count(&self) -> u64 {
        self.sink_count
    }

    /// Every particle ever placed, including those absorbed by the sink.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn particles_on_sites(&self) -> u64 {
        self.sites.iter().map(|s| s.particles()).sum()
    }

    pub fn sleeping_count(&self) -> usize {
        self.sites.iter().filter(|s| **s == SiteState::Sleeping).count()
    }

    pub fn is_stable(&self) -> bool {
        !self.sites.iter().any(|s| s.is_active())
    }

    /// Adds one active particle at `site`.
    pub fn add_particle(&mut self, site: usize) {
        self.sites[site] = self.sites[site].with_arrival();
        self.total += 1;
    }

    fn conserved(&self) -> bool {
        self.particles_on_sites() + self.sink_count == self.total
    }
}

/// Result of one stabilization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilizationOutcome {
    /// Sleeping particles left on `[n]`.
    pub sleep_count: u64,
    /// Executed jump instructions, self-loops included.
    pub jump_count: u64,
    /// Departures from the purgatory vertex; only set by the purgatory
    /// stabilizer.
    pub steps: Option<u64>,
    /// Particles absorbed by the sink during this stabilization.
    pub sink_arrivals: u64,
    /// Instructions consumed, no-op sleeps included.
    pub instructions: u64,
    pub per_site_jumps: Option<Vec<u64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_arrivals() {
        assert_eq!(SiteState::Empty.with_arrival(), SiteState::Active(1));
        assert_eq!(SiteState::Sleeping.with_arrival(), SiteState::Active(2));
        assert_eq!(SiteState::Active(3).with_arrival(), SiteState::Active(4));
    }

    #[test]
    fn configuration_bookkeeping() {
        let mut c = Configuration::empty(3);
        c.add_particle(1);
        c.add_particle(1);
        assert_eq!(c.total(), 2);
        assert_eq!(c.sites()[1], SiteState::Active(2));
        assert!(!c.is_stable());
        assert!(c.conserved());

        let c = Configuration::from_sites(vec![SiteState::Sleeping, SiteState::Empty], 4).unwrap();
        assert_eq!(c.total(), 5);
        assert!(c.is_stable());
        assert!(Configuration::from_sites(vec![SiteState::Active(0)], 0).is_err());
    }
}
