//! Replication driver: data-parallel over Monte Carlo replications with a
//! deterministic reduction.
//!
//! Replications are grouped into fixed-size chunks. Each chunk is folded
//! sequentially in index order and the per-chunk accumulators are merged in
//! chunk order, so the floating-point result is independent of the number of
//! worker threads. With the `parallel` feature (default) chunks run on the
//! rayon pool; without it everything runs on the calling thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk size used by all replication loops. Fixed (never derived from the
/// thread count) so results do not depend on the execution environment.
pub const CHUNK: u64 = 256;

/// Caps the worker-thread count. Results are identical for any setting; this
/// only controls resource usage. No-op without the `parallel` feature or
/// after the pool has started.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Fold `0..reps` into an accumulator, chunked and deterministic.
pub fn accumulate<A, I, S, M>(reps: u64, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = reps.div_ceil(CHUNK).max(1);
    #[cfg(feature = "parallel")]
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| fold_chunk(c, reps, &init, &step))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = (0..chunks).map(|c| fold_chunk(c, reps, &init, &step)).collect();

    let mut out = init();
    for p in parts {
        merge(&mut out, p);
    }
    out
}

/// Sequential twin of [`accumulate`], available regardless of features.
/// Produces bit-identical output; used as a benchmark baseline.
pub fn accumulate_serial<A, I, S, M>(reps: u64, init: I, step: S, merge: M) -> A
where
    I: Fn() -> A,
    S: Fn(&mut A, u64),
    M: Fn(&mut A, A),
{
    let chunks = reps.div_ceil(CHUNK).max(1);
    let mut out = init();
    for c in 0..chunks {
        let mut a = init();
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(reps);
        for r in lo..hi {
            step(&mut a, r);
        }
        merge(&mut out, a);
    }
    out
}

fn fold_chunk<A, I, S>(c: u64, reps: u64, init: &I, step: &S) -> A
where
    I: Fn() -> A,
    S: Fn(&mut A, u64),
{
    let mut a = init();
    let lo = c * CHUNK;
    let hi = ((c + 1) * CHUNK).min(reps);
    for r in lo..hi {
        step(&mut a, r);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_serial_bitwise() {
        let step = |acc: &mut f64, r: u64| {
            *acc += ((r as f64) * 1e-3).sin();
        };
        let merge = |acc: &mut f64, part: f64| *acc += part;
        let a = accumulate(10_000, || 0.0, step, merge);
        let b = accumulate_serial(10_000, || 0.0, step, merge);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
