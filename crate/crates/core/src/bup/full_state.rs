//! The process with coordinate identities kept.

use bitvec::prelude::*;
use rand::Rng;

use super::BupState;

/// Coordinate values plus the set of coordinates resampled since the last
/// [`FullState::mark`].
#[derive(Debug, Clone)]
pub struct FullState {
    pub state: BupState,
    values: BitVec,
    updated: BitVec,
    distinct_updated: usize,
    p: f64,
    q: f64,
}

impl FullState {
    /// Coordinates i.i.d. Ber(p).
    pub fn stationary<R: Rng + ?Sized>(n: usize, p: f64, q: f64, rng: &mut R) -> Self {
        let values: BitVec = (0..n).map(|_| rng.random::<f64>() < p).collect();
        Self::from_values(values, p, q)
    }

    /// The first `v` coordinates set to one.
    pub fn at_value(n: usize, v: usize, p: f64, q: f64) -> Self {
        let values: BitVec = (0..n).map(|i| i < v).collect();
        Self::from_values(values, p, q)
    }

    fn from_values(values: BitVec, p: f64, q: f64) -> Self {
        let n = values.len();
        FullState {
            state: BupState {
                y: values.count_ones() as u64,
                z: 0,
                t: 0,
            },
            values,
            updated: bitvec![0; n],
            distinct_updated: 0,
            p,
            q,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &BitSlice {
        &self.values
    }

    pub fn distinct_updated(&self) -> usize {
        self.distinct_updated
    }

    /// Every coordinate has been resampled since the last mark.
    pub fn regenerated(&self) -> bool {
        self.distinct_updated == self.n()
    }

    pub fn mark(&mut self) {
        self.updated.fill(false);
        self.distinct_updated = 0;
    }

    /// One step of the embedded chain; returns true when it was lazy.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        self.state.t += 1;
        if self.q > 0.0 && rng.random::<f64>() < self.q {
            self.state.z += 1;
            return true;
        }
        let i = rng.random_range(0..self.n());
        let new = rng.random::<f64>() < self.p;
        let old = self.values.replace(i, new);
        match (old, new) {
            (true, false) => self.state.y -= 1,
            (false, true) => self.state.y += 1,
            _ => {}
        }
        if !self.updated.replace(i, true) {
            self.distinct_updated += 1;
        }
        debug_assert_eq!(self.values.count_ones() as u64, self.state.y);
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicate::rng_from_seed;

    #[test]
    fn popcount_tracks_y() {
        let mut rng = rng_from_seed(5);
        let mut s = FullState::stationary(64, 0.3, 0.1, &mut rng);
        let mut last = 0;
        for _ in 0..5000 {
            s.step(&mut rng);
            assert_eq!(s.values().count_ones() as u64, s.state.y);
            assert!(s.distinct_updated() >= last);
            last = s.distinct_updated();
        }
        assert!(s.regenerated());
        s.mark();
        assert_eq!(s.distinct_updated(), 0);
    }

    #[test]
    fn at_value_start() {
        let s = FullState::at_value(10, 4, 0.5, 0.0);
        assert_eq!(s.state.y, 4);
        assert_eq!(s.values().count_ones(), 4);
    }
}
