//! Deterministic data-parallel helpers.
//!
//! Batch stages (grid generation, batch loss/gradient, sweeps) run through
//! these functions. With the `parallel` feature the ordered map fans out via
//! rayon; without it the same code runs sequentially. Reductions always use
//! the same fixed chunk tree, so results are bitwise identical in both modes
//! and across thread counts.

/// Chunk width of the fixed reduction tree.
pub const CHUNK: usize = 256;

/// Ordered map over `items`; parallel when the `parallel` feature is on.
///
/// Output order matches input order regardless of scheduling.
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_ordered_seq(items, f)
    }
}

/// Always-sequential twin of [`map_ordered`]; same output, used by the
/// benchmark suite as the comparison baseline.
pub fn map_ordered_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Chunked map-reduce with a fixed summation tree.
///
/// `fold` accumulates items of one chunk in slice order into a fresh
/// accumulator; chunk results are then combined in chunk order. The tree is
/// identical in parallel and sequential builds.
pub fn fold_chunks<T, A, M, F, C>(items: &[T], make: M, fold: F, combine: C) -> A
where
    T: Sync,
    A: Send,
    M: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &T) + Sync + Send,
    C: Fn(&mut A, A),
{
    let chunks: Vec<&[T]> = items.chunks(CHUNK).collect();
    let partials: Vec<A> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            chunks
                .par_iter()
                .map(|chunk| {
                    let mut acc = make();
                    for item in *chunk {
                        fold(&mut acc, item);
                    }
                    acc
                })
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            chunks
                .iter()
                .map(|chunk| {
                    let mut acc = make();
                    for item in *chunk {
                        fold(&mut acc, item);
                    }
                    acc
                })
                .collect()
        }
    };
    let mut total = make();
    for part in partials {
        combine(&mut total, part);
    }
    total
}

/// Sequential twin of [`fold_chunks`] with the identical reduction tree.
pub fn fold_chunks_seq<T, A, F, C>(items: &[T], make: impl Fn() -> A, fold: F, combine: C) -> A
where
    F: Fn(&mut A, &T),
    C: Fn(&mut A, A),
{
    let mut total = make();
    for chunk in items.chunks(CHUNK) {
        let mut acc = make();
        for item in chunk {
            fold(&mut acc, item);
        }
        combine(&mut total, acc);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_ordered_preserves_order() {
        let xs: Vec<u64> = (0..10_000).collect();
        let ys = map_ordered(&xs, |x| x * 2);
        let zs = map_ordered_seq(&xs, |x| x * 2);
        assert_eq!(ys, zs);
        assert_eq!(ys[777], 1554);
    }

    #[test]
    fn fold_chunks_matches_sequential_bitwise() {
        // Values spanning many magnitudes so that summation order matters.
        let xs: Vec<f64> = (0..5000)
            .map(|i| ((i as f64) * 0.73).sin() * 10f64.powi((i % 13) as i32 - 6))
            .collect();
        let sum = |acc: &mut f64, x: &f64| *acc += *x;
        let comb = |acc: &mut f64, part: f64| *acc += part;
        let a = fold_chunks(&xs, || 0.0, sum, comb);
        let b = fold_chunks_seq(&xs, || 0.0, sum, comb);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
