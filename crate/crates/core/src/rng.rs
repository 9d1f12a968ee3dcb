//! Reproducible random streams.
//!
//! Every Monte Carlo routine splits its work into fixed-size chunks. Chunk `i`
//! of a computation seeded with `seed` draws from the ChaCha8 stream
//! `(seed, i)`: the 64-bit seed keys the generator and the chunk index selects
//! one of its 2^64 independent streams. Results therefore depend only on the
//! seed and the chunk size, never on how many threads executed the chunks.
//! Distinct computations sharing a master seed use [`derive_seed`] to obtain
//! unrelated keys.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type McRng = ChaCha8Rng;

/// Number of draws handled by one RNG stream.
pub const CHUNK: usize = 512;

/// Generator for stream `stream` under key `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer applied to `seed ^ tag`; used to key sub-computations.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ranges `[start, end)` of the chunks covering `0..len`.
pub(crate) fn chunks(len: usize) -> impl Iterator<Item = (u64, std::ops::Range<usize>)> {
    (0..len.div_ceil(CHUNK)).map(move |i| (i as u64, i * CHUNK..((i + 1) * CHUNK).min(len)))
}

/// Maps `f` over the chunk ranges of `0..len` (in parallel when enabled) and
/// returns the per-chunk results in chunk order.
pub(crate) fn map_chunks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, std::ops::Range<usize>) -> T + Sync + Send,
{
    let ranges: Vec<_> = chunks(len).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ranges.into_par_iter().map(|(i, r)| f(i, r)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.into_iter().map(|(i, r)| f(i, r)).collect()
    }
}

/// Pairwise (cascade) summation; the result is independent of thread count
/// because the operand order is fixed.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
