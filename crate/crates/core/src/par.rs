//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction here splits its index range into fixed-size chunks and
//! combines the per-chunk results in index order, so the floating-point
//! result does not depend on the thread count or on whether the `parallel`
//! feature is enabled.

use std::ops::Range;

/// Chunk length used by the deterministic reductions.
pub const CHUNK: usize = 256;

fn chunks(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk)).map(|c| c * chunk..((c + 1) * chunk).min(n)).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over the chunks of `0..n` (chunk length `chunk`), preserving order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunks(n, chunk);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ranges.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.into_iter().map(f).collect()
    }
}

/// Sum of `f(i)` over `0..n`, reduced chunk by chunk in a fixed order.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if n <= CHUNK {
        return (0..n).map(&f).sum();
    }
    map_chunks(n, CHUNK, |r| r.map(&f).sum::<f64>()).into_iter().sum()
}
