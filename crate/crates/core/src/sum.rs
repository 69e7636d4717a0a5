//! Compensated accumulation and the deterministic row-parallel drivers used by
//! every double sum in the crate.
//!
//! Rows are split into fixed-size chunks; each chunk is reduced sequentially
//! with a Neumaier accumulator and chunk totals are combined in index order.
//! The result is therefore bit-identical whether the chunks run on one thread
//! or many, and identical to the build without the `parallel` feature.

use std::cell::Cell;
use std::ops::AddAssign;

/// Rows per chunk in the parallel drivers.
pub const CHUNK: usize = 64;

/// Kahan–Babuška–Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a slice.
pub fn compensated(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<NeumaierSum>().value()
}

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with the row drivers forced onto the calling thread.
///
/// Used by the benches to compare against the parallel path inside one build.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

#[cfg(feature = "parallel")]
fn run_parallel() -> bool {
    !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// Deterministic chunked sum of `row(i)` over `0..n`. `row` returns its own
/// compensated partial so long inner loops keep their precision.
pub fn sum_rows<F>(n: usize, row: F) -> f64
where
    F: Fn(usize, &mut NeumaierSum) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let chunk_total = |c: usize| {
        let mut acc = NeumaierSum::new();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            row(i, &mut acc);
        }
        acc
    };
    let partials: Vec<NeumaierSum> = map_indices(chunks, chunk_total);
    let mut total = NeumaierSum::new();
    for p in &partials {
        total.merge(p);
    }
    total.value()
}

/// `(0..n).map(f).collect()`, in parallel when enabled. Order is preserved.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if run_parallel() && n > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(&f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Fills `out[i] = f(i)`, in parallel chunks when enabled.
pub fn fill_rows<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if run_parallel() && out.len() > CHUNK {
            use rayon::prelude::*;
            out.par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    for (k, o) in chunk.iter_mut().enumerate() {
                        *o = f(c * CHUNK + k);
                    }
                });
            return;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated(&xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn chunked_sum_is_order_stable() {
        let n = 1000;
        let f = |i: usize, acc: &mut NeumaierSum| acc.add(1.0 / (1.0 + i as f64));
        let a = sum_rows(n, f);
        let b = sequential(|| sum_rows(n, f));
        assert_eq!(a.to_bits(), b.to_bits());
        let reference: f64 = (0..n).map(|i| 1.0 / (1.0 + i as f64)).sum();
        assert!((a - reference).abs() < 1e-12);
    }

    #[test]
    fn fill_rows_matches_map() {
        let mut out = vec![0.0; 300];
        fill_rows(&mut out, |i| (i * i) as f64);
        let m = map_indices(300, |i| (i * i) as f64);
        assert_eq!(out, m);
    }
}
