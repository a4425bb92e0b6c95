//! Data-parallelism cap. `PHICGC_THREADS` limits the number of worker threads
//! used by chunked kernels (default: all available cores).

use std::sync::OnceLock;

static CAP: OnceLock<usize> = OnceLock::new();

pub fn thread_cap() -> usize {
    *CAP.get_or_init(|| {
        match std::env::var("PHICGC_THREADS") {
            Ok(s) => match s.trim().parse::<usize>() {
                Ok(n) if n >= 1 => n,
                _ => 1,
            },
            Err(_) => std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        }
    })
}

/// Run `f(chunk_index, start, end)` over `n` items split into contiguous chunks,
/// one per worker. Serial when the cap is 1 or the work is small.
pub fn for_each_chunk<F>(n: usize, min_parallel: usize, f: F)
where
    F: Fn(usize, usize, usize) + Sync,
{
    let workers = thread_cap().min(n.max(1));
    if workers <= 1 || n < min_parallel {
        f(0, 0, n);
        return;
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|scope| {
        for w in 0..workers {
            let start = w * chunk;
            let end = ((w + 1) * chunk).min(n);
            if start >= end {
                break;
            }
            let f = &f;
            scope.spawn(move || f(w, start, end));
        }
    });
}

/// Fill `dst` in parallel: each worker gets a disjoint contiguous sub-slice
/// and its global start offset. Serial when the cap is 1 or `dst` is small.
pub fn parallel_write<F>(dst: &mut [f64], min_parallel: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let n = dst.len();
    let workers = thread_cap().min(n.max(1));
    if workers <= 1 || n < min_parallel {
        f(0, dst);
        return;
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|scope| {
        let mut rest = dst;
        let mut start = 0usize;
        while !rest.is_empty() {
            let len = chunk.min(rest.len());
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            rest = tail;
            let f = &f;
            scope.spawn(move || f(start, head));
            start += len;
        }
    });
}
