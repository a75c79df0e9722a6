//! Stabilization with every jump routed through an auxiliary purgatory
//! vertex `v`.
//!
//! Step 0 topples each site once: its particle sleeps or moves to `v`. At each
//! later step one particle leaves `v`: to the sink with probability `q`,
//! otherwise to a uniform site `i`. If `i` holds a sleeper, `i` is toppled
//! until one of its two particles jumps to `v`; then `i` is toppled once more,
//! so its last particle sleeps or joins `v`. The run stops once `v` is empty.
//!
//! Writing `Y` for the sleeping count and `Z` for sink arrivals, the pair
//! `(Y, Z)` moves exactly like the binomial update process, and `v` is empty
//! exactly when `Y = n − Z`.

use rand::Rng;

use super::StabilizationOutcome;
use crate::error::{Error, Result};
use crate::model::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct PurgatoryRun {
    /// `(Y, Z)` after step 0 and after each later step, when recorded.
    pub trace: Option<Vec<(u32, u32)>>,
    pub outcome: StabilizationOutcome,
}

pub fn stabilize_via_purgatory<R: Rng + ?Sized>(
    params: &Params,
    rng: &mut R,
    record_trace: bool,
) -> Result<PurgatoryRun> {
    params.require_dissipative()?;
    let Params { n, p, q, .. } = *params;
    if p >= 1.0 {
        return Err(Error::domain("purgatory stabilization needs p < 1"));
    }

    let mut sleeping = vec![false; n];
    let mut y = 0u64;
    let mut z = 0u64;
    let mut in_v = 0u64;
    let mut to_v = 0u64;
    let mut instructions = 0u64;

    // Topples a site holding one active particle: it sleeps or joins v.
    let settle = |site: usize, rng: &mut R, sleeping: &mut [bool]| -> bool {
        let sleeps = rng.random::<f64>() < p;
        sleeping[site] = sleeps;
        sleeps
    };

    for site in 0..n {
        instructions += 1;
        if settle(site, rng, &mut sleeping) {
            y += 1;
        } else {
            in_v += 1;
            to_v += 1;
        }
    }
    let mut trace = record_trace.then(|| vec![(y as u32, z as u32)]);

    let mut departures = 0u64;
    while in_v > 0 {
        departures += 1;
        in_v -= 1;
        if q > 0.0 && rng.random::<f64>() < q {
            z += 1;
        } else {
            let i = rng.random_range(0..n);
            if sleeping[i] {
                // two particles at i: sleeps are no-ops until one jumps
                y -= 1;
                loop {
                    instructions += 1;
                    if rng.random::<f64>() >= p {
                        break;
                    }
                }
                in_v += 1;
                to_v += 1;
            }
            instructions += 1;
            if settle(i, rng, &mut sleeping) {
                y += 1;
            } else {
                in_v += 1;
                to_v += 1;
            }
        }
        if let Some(tr) = trace.as_mut() {
            tr.push((y as u32, z as u32));
        }
        debug_assert!(y + z + in_v == n as u64);
    }
    debug_assert_eq!(to_v, departures);
    debug_assert_eq!(y, n as u64 - z);

    Ok(PurgatoryRun {
        trace,
        outcome: StabilizationOutcome {
            sleep_count: y,
            jump_count: to_v,
            steps: Some(departures),
            sink_arrivals: z,
            instructions,
            per_site_jumps: None,
        },
    })
}
