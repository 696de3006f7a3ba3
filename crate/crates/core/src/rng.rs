//! Counter-based random streams.
//!
//! Every Monte Carlo trial draws from its own Philox4x32-10 stream, addressed
//! by a 64-bit key and the trial index. A trial's outcome therefore depends
//! only on `(key, trial)`, never on scheduling, and totals are sums of
//! integer counts, so results are identical for any number of threads.
//!
//! Keys are derived from the user seed and a tag naming what is being
//! sampled (a delay point, a mode, a sampler), so distinct uses of one seed
//! read unrelated streams.

use std::sync::OnceLock;

use rand_philox::{splitmix64, u32_to_unit_f64, Philox};
use rayon::prelude::*;

/// Environment variable capping the worker threads of the sampling pool.
pub const THREADS_ENV: &str = "FMHOM_THREADS";

/// Trials per parallel work unit. Fixed so the partition never depends on
/// the thread count.
const CHUNK: u64 = 1 << 15;

/// Tags separating the key spaces of the different samplers.
pub(crate) mod tag {
    pub const INTENSITY: u64 = 1;
    pub const FOCK: u64 = 2;
    pub const DIP_POINT: u64 = 3;
    pub const HISTOGRAM_MODE: u64 = 4;
    pub const HISTOGRAM_PLACEMENT: u64 = 5;
    pub const HISTOGRAM_ARTIFACT: u64 = 6;
    pub const LINK: u64 = 7;
}

/// Key for `(seed, tag, index)`.
pub fn derive_key(seed: u64, tag: u64, index: u64) -> u64 {
    let inner = splitmix64(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index.rotate_left(29));
    splitmix64(seed ^ inner)
}

/// The stream of trial `trial` under `key`.
pub fn trial_stream(key: u64, trial: u64) -> Philox {
    Philox::from_u64_seed_stream(key, trial)
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn uniform(rng: &mut Philox) -> f64 {
    u32_to_unit_f64(rng.next_u32())
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0); // 0 lets rayon pick
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("sampling thread pool")
    })
}

/// Runs `trials` independent trials and counts, per slot, how many trials
/// set it.
pub(crate) fn count_outcomes<const K: usize, F>(trials: u64, key: u64, trial: F) -> [u64; K]
where
    F: Fn(&mut Philox) -> [bool; K] + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    pool().install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut counts = [0u64; K];
                for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    let mut rng = trial_stream(key, t);
                    for (n, hit) in counts.iter_mut().zip(trial(&mut rng)) {
                        *n += u64::from(hit);
                    }
                }
                counts
            })
            .reduce(
                || [0u64; K],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    })
}
