//! Thin switch between rayon and sequential execution.
//!
//! Sweep points and grid lanes are independent work items, so the parallel
//! and sequential paths produce bit-identical results: no reduction ever
//! crosses a thread boundary, and output order is the input order.

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_slice<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Apply `f` to each lane of `data`, split into disjoint chunks of
/// `lane_len`. Lanes are contiguous and non-overlapping, so the parallel
/// path is deterministic.
#[cfg(feature = "parallel")]
pub fn for_each_lane<T: Send, F>(data: &mut [T], lane_len: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(lane_len)
        .enumerate()
        .for_each(|(idx, lane)| f(idx, lane));
}

/// Apply `f` to each lane of `data`, split into disjoint chunks of
/// `lane_len`. Lanes are contiguous and non-overlapping.
#[cfg(not(feature = "parallel"))]
pub fn for_each_lane<T, F>(data: &mut [T], lane_len: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    data.chunks_mut(lane_len)
        .enumerate()
        .for_each(|(idx, lane)| f(idx, lane));
}
