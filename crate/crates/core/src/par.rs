//! Data-parallel primitives with a sequential fallback.
//!
//! With the `parallel` feature the helpers dispatch to rayon; without it they
//! run the same closures in order. Reductions always sum fixed-size blocks
//! and then combine the block sums left to right, so results are
//! bit-identical regardless of the feature or the thread count.

/// Block length used by every reduction.
pub const REDUCE_BLOCK: usize = 4096;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Sizes the global worker pool; a no-op in sequential builds. Must be
/// called before the first parallel operation.
pub fn set_threads(n: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}

/// Applies `f(index, item)` to every element.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    items
        .par_iter_mut()
        .with_min_len(1024)
        .enumerate()
        .for_each(|(i, x)| f(i, x));
    #[cfg(not(feature = "parallel"))]
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Applies `f(chunk_index, chunk)` to consecutive chunks of `chunk` elements.
pub fn for_each_chunk_mut<T, F>(items: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    items.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    items.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Maps each element of `items` through `f`, preserving order.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Deterministic sum of `term(i)` for `i in 0..len`.
pub fn sum(len: usize, term: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let blocks = len.div_ceil(REDUCE_BLOCK);
    let block_sum = |b: usize| {
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(len);
        (lo..hi).map(&term).sum::<f64>()
    };
    #[cfg(feature = "parallel")]
    let partial: Vec<f64> = (0..blocks).into_par_iter().map(block_sum).collect();
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<f64> = (0..blocks).map(block_sum).collect();
    partial.iter().sum()
}

/// Deterministic component-wise sum of `n`-vectors `term(i, &mut acc)`.
///
/// `term` adds its contribution for sample `i` into `acc`.
pub fn sum_vec(len: usize, n: usize, term: impl Fn(usize, &mut [f64]) + Sync + Send) -> Vec<f64> {
    sum_vec_blocks(len, n, |range, acc| {
        for i in range {
            term(i, acc);
        }
    })
}

/// Like [`sum_vec`], but `term` handles a whole block of indices at once so
/// it can reuse scratch space.
pub fn sum_vec_blocks(
    len: usize,
    n: usize,
    term: impl Fn(std::ops::Range<usize>, &mut [f64]) + Sync + Send,
) -> Vec<f64> {
    let blocks = len.div_ceil(REDUCE_BLOCK);
    let block_sum = |b: usize| {
        let mut acc = vec![0.0; n];
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(len);
        term(lo..hi, &mut acc);
        acc
    };
    #[cfg(feature = "parallel")]
    let partial: Vec<Vec<f64>> = (0..blocks).into_par_iter().map(block_sum).collect();
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<Vec<f64>> = (0..blocks).map(block_sum).collect();
    let mut total = vec![0.0; n];
    for p in &partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Deterministic maximum of `term(i)`; returns `f64::NEG_INFINITY` when empty.
pub fn max(len: usize, term: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    #[cfg(feature = "parallel")]
    {
        (0..len)
            .into_par_iter()
            .with_min_len(REDUCE_BLOCK)
            .map(term)
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(term).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_blockwise_reference() {
        let len = 3 * REDUCE_BLOCK + 17;
        let term = |i: usize| ((i as f64) * 0.37).sin();
        let mut reference = 0.0;
        for b in 0..len.div_ceil(REDUCE_BLOCK) {
            let lo = b * REDUCE_BLOCK;
            let hi = (lo + REDUCE_BLOCK).min(len);
            reference += (lo..hi).map(term).sum::<f64>();
        }
        assert_eq!(sum(len, term).to_bits(), reference.to_bits());
    }

    #[test]
    fn sum_vec_and_max() {
        let v = sum_vec(10, 2, |i, acc| {
            acc[0] += i as f64;
            acc[1] += 1.0;
        });
        assert_eq!(v, vec![45.0, 10.0]);
        assert_eq!(max(5, |i| -(i as f64)), 0.0);
        assert_eq!(max(0, |_| 1.0), f64::NEG_INFINITY);
    }
}
