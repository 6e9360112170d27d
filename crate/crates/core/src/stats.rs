//! Streaming moments and the partition-independent ensemble reducer.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Realizations accumulated serially before a chunk joins the merge tree.
/// Part of the determinism contract: changing it changes output bits.
pub const CHUNK: usize = 64;

/// Per-bin running mean and sum of squared deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Welford {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta * inv;
            *s += delta * (v - *m);
        }
    }

    /// Chan et al. pairwise combination; `self` is treated as the earlier
    /// block so the operation is deterministic for a fixed argument order.
    pub fn merge(mut self, other: &Welford) -> Self {
        assert_eq!(self.len(), other.len());
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other.clone();
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        self
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance per bin (zero when `count < 2`).
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.len()];
        }
        let denom = (self.count - 1) as f64;
        self.m2.iter().map(|s| (s / denom).max(0.0)).collect()
    }

    pub fn std_error(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.variance()
            .into_iter()
            .map(|v| (v / n).sqrt())
            .collect()
    }
}

/// Merges blocks arriving in index order along a binary-counter tree, so
/// the combination order depends only on the number of blocks.
#[derive(Debug, Default)]
pub struct MergeTree {
    stack: Vec<(u32, Welford)>,
}

impl MergeTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, block: Welford) {
        let mut level = 0;
        let mut acc = block;
        while let Some((top, _)) = self.stack.last() {
            if *top != level {
                break;
            }
            let (_, older) = self.stack.pop().expect("non-empty");
            acc = older.merge(&acc);
            level += 1;
        }
        self.stack.push((level, acc));
    }

    pub fn finish(mut self) -> Option<Welford> {
        let (_, mut acc) = self.stack.pop()?;
        while let Some((_, older)) = self.stack.pop() {
            acc = older.merge(&acc);
        }
        Some(acc)
    }
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Degenerate(format!("cannot start worker pool: {e}")))
}

/// Averages `n` realizations of a `len`-bin observable.
///
/// `sample(state, index, out)` must fill `out` from realization `index`
/// alone; `init` builds per-chunk working state. The result is
/// bit-identical for any `threads`.
pub(crate) fn reduce_ensemble<S, I, F>(
    n: usize,
    len: usize,
    threads: usize,
    init: I,
    sample: F,
) -> Result<Welford>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Sync,
{
    if n == 0 {
        return Ok(Welford::new(len));
    }
    let pool = thread_pool(threads)?;
    let chunks = n.div_ceil(CHUNK);
    let batch = (threads.max(1) * 4).max(1);
    let mut tree = MergeTree::new();
    let run_chunk = |c: usize| {
        let mut state = init();
        let mut acc = Welford::new(len);
        let mut buf = vec![0.0; len];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            sample(&mut state, i, &mut buf);
            acc.push(&buf);
        }
        acc
    };
    for start in (0..chunks).step_by(batch) {
        let end = (start + batch).min(chunks);
        let blocks: Vec<Welford> = if threads <= 1 {
            (start..end).map(run_chunk).collect()
        } else {
            pool.install(|| (start..end).into_par_iter().map(run_chunk).collect())
        };
        blocks.into_iter().for_each(|b| tree.push(b));
    }
    Ok(tree.finish().expect("at least one chunk"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                [(x * 0.731).sin() * 3.0 + 1.0, (x * x * 0.013).cos()]
            })
            .collect()
    }

    #[test]
    fn welford_matches_two_pass() {
        let data = series(1000);
        let mut w = Welford::new(2);
        data.iter().for_each(|x| w.push(x));
        for b in 0..2 {
            let mean = data.iter().map(|x| x[b]).sum::<f64>() / 1000.0;
            let var = data.iter().map(|x| (x[b] - mean).powi(2)).sum::<f64>() / 999.0;
            assert!((w.mean()[b] - mean).abs() < 1e-12);
            assert!((w.variance()[b] - var).abs() < 1e-10);
        }
    }

    #[test]
    fn reducer_is_thread_independent() {
        let data = series(1000);
        let run = |threads| {
            reduce_ensemble(
                1000,
                2,
                threads,
                || (),
                |_, i, out| out.copy_from_slice(&data[i]),
            )
            .unwrap()
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
        assert_eq!(one.count(), 1000);
    }

    #[test]
    fn two_samples_give_plain_average() {
        let w = reduce_ensemble(2, 1, 1, || (), |_, i, out| out[0] = [1.5, 4.0][i]).unwrap();
        assert_eq!(w.mean()[0], 2.75);
        assert!((w.variance()[0] - 3.125).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn merge_agrees_with_sequential(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut all = Welford::new(1);
            let mut a = Welford::new(1);
            let mut b = Welford::new(1);
            for (i, x) in xs.iter().enumerate() {
                all.push(&[*x]);
                if i < split { a.push(&[*x]) } else { b.push(&[*x]) }
            }
            let merged = a.merge(&b);
            prop_assert_eq!(merged.count(), all.count());
            prop_assert!((merged.mean()[0] - all.mean()[0]).abs() <= 1e-9 * (1.0 + all.mean()[0].abs()));
            let (v1, v2) = (merged.variance()[0], all.variance()[0]);
            prop_assert!((v1 - v2).abs() <= 1e-8 * (1.0 + v2));
        }
    }
}
