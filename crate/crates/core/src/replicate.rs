//! Deterministic replicate seeding and the replicate runner.
//!
//! Replicate `i` of a run with master seed `m` always draws from
//! `Xoshiro256PlusPlus::seed_from_u64(replicate_seed(m, i))`, whichever worker
//! executes it, so results do not depend on the worker count. Results come
//! back ordered by replicate index.
//!
//! With the `parallel` feature (default) replicates are spread over a rayon
//! pool; without it, or with one worker, they run in index order on the
//! calling thread.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// RNG used by every engine.
pub type SimRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master`:
/// `mix64(master ^ mix64(index + GOLDEN))`.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(GOLDEN)))
}

/// Derives an independent master seed for a named sub-run.
pub fn salted_seed(master: u64, salt: u64) -> u64 {
    mix64(mix64(master).wrapping_add(GOLDEN.wrapping_mul(salt.wrapping_add(1))))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Runs `reps` replicates of `f`, each with its own seeded RNG.
///
/// `f` receives `(index, seed, rng)`. The output is indexed by replicate.
pub fn run_replicates<T, F>(master: u64, reps: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64, &mut SimRng) -> T + Sync + Send,
{
    if workers <= 1 {
        return run_sequential(master, reps, &f);
    }
    run_parallel(master, reps, workers, &f)
}

pub fn run_sequential<T, F>(master: u64, reps: usize, f: &F) -> Vec<T>
where
    F: Fn(usize, u64, &mut SimRng) -> T,
{
    (0..reps)
        .map(|i| {
            let seed = replicate_seed(master, i as u64);
            f(i, seed, &mut rng_from_seed(seed))
        })
        .collect()
}

#[cfg(feature = "parallel")]
pub fn run_parallel<T, F>(master: u64, reps: usize, workers: usize, f: &F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64, &mut SimRng) -> T + Sync + Send,
{
    use rayon::prelude::*;

    let job = || {
        (0..reps)
            .into_par_iter()
            .map(|i| {
                let seed = replicate_seed(master, i as u64);
                f(i, seed, &mut rng_from_seed(seed))
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_parallel<T, F>(master: u64, reps: usize, _workers: usize, f: &F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64, &mut SimRng) -> T + Sync + Send,
{
    run_sequential(master, reps, f)
}

pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Worker count to use when the caller does not specify one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
