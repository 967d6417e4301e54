//! Deterministic sharded Monte Carlo plumbing.
//!
//! Work is cut into a fixed number of shards, each with its own ChaCha stream,
//! and shard results are merged in shard order. The outcome therefore does not
//! depend on how many worker threads execute the shards.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// RNG for one shard. `domain` separates unrelated estimators sharing a seed.
pub fn shard_rng(seed: u64, domain: u64, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(shard as u64);
    rng
}

/// Splits `0..total` into `shards` contiguous ranges.
pub fn shard_ranges(total: u64, shards: usize) -> Vec<Range<u64>> {
    let shards = shards.max(1) as u64;
    (0..shards)
        .map(|s| (total * s / shards)..(total * (s + 1) / shards))
        .collect()
}

/// Running mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count: n,
            mean: self.mean + d * other.count as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::INFINITY
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Runs `work(shard, range, rng)` on every shard in parallel and returns the
/// results in shard order.
pub fn run_shards<R, F>(total: u64, shards: usize, seed: u64, domain: u64, work: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, Range<u64>, &mut ChaCha8Rng) -> R + Sync,
{
    shard_ranges(total, shards)
        .into_par_iter()
        .enumerate()
        .map(|(s, range)| {
            let mut rng = shard_rng(seed, domain, s);
            work(s, range, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ranges_cover_everything() {
        let r = shard_ranges(1001, 7);
        assert_eq!(r.first().unwrap().start, 0);
        assert_eq!(r.last().unwrap().end, 1001);
        assert!(r.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-14);
        assert!((m.variance() - all.variance()).abs() < 1e-13);
    }

    #[test]
    fn independent_of_thread_count() {
        let work = |_s: usize, r: Range<u64>, rng: &mut ChaCha8Rng| {
            let mut m = Moments::default();
            for _ in r {
                m.push(rng.gen::<f64>());
            }
            m
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_shards(10_000, 16, 7, 1, work));
        let b = three.install(|| run_shards(10_000, 16, 7, 1, work));
        assert_eq!(a, b);
    }
}
