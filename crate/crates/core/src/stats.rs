//! Streaming moments and fixed-bin histograms with exact parallel merge.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default number of interior histogram bins.
pub const DEFAULT_BINS: usize = 200;

/// Uniform bins on `[lo, hi)` plus one underflow and one overflow bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    lo: T,
    hi: T,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
}

impl<T: Real> Histogram<T> {
    pub fn new(lo: T, hi: T, bins: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("histogram range", format!("need lo < hi, got [{lo}, {hi})")));
        }
        if bins == 0 {
            return Err(Error::invalid("bins", "need at least one bin"));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn symmetric(half_width: T, bins: usize) -> Result<Self> {
        Self::new(-half_width, half_width, bins)
    }

    pub fn push(&mut self, x: T) {
        if x < self.lo {
            self.underflow += 1;
        } else if x >= self.hi {
            self.overflow += 1;
        } else {
            let k = ((x - self.lo) / self.bin_width()).to_usize().unwrap_or(0);
            // rounding can land exactly on the upper edge
            let k = k.min(self.counts.len() - 1);
            self.counts[k] += 1;
        }
    }

    pub fn bin_width(&self) -> T {
        (self.hi - self.lo) / T::from_count(self.counts.len())
    }

    pub fn edges(&self) -> Vec<T> {
        let w = self.bin_width();
        (0..=self.counts.len()).map(|i| self.lo + w * T::from_count(i)).collect()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn range(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi || self.counts.len() != other.counts.len() {
            return Err(Error::invalid("histogram", "cannot merge histograms with different bins"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }
}

/// Count, mean and variance by Welford's update, plus a histogram of every
/// pushed value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    count: u64,
    mean: T,
    m2: T,
    histogram: Histogram<T>,
}

impl<T: Real> RunningStats<T> {
    pub fn new(histogram: Histogram<T>) -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
            histogram,
        }
    }

    /// Stats with [`DEFAULT_BINS`] bins over `±half_width`.
    pub fn with_range(half_width: T) -> Result<Self> {
        Ok(Self::new(Histogram::symmetric(half_width, DEFAULT_BINS)?))
    }

    pub fn push(&mut self, x: T) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / T::from_u64(self.count).unwrap();
        self.m2 = self.m2 + delta * (x - self.mean);
        self.histogram.push(x);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<T> {
        (self.count >= 2).then(|| (self.m2 / T::from_u64(self.count - 1).unwrap()).max(T::zero()))
    }

    pub fn std(&self) -> Option<T> {
        self.variance().map(|v| v.sqrt())
    }

    pub fn histogram(&self) -> &Histogram<T> {
        &self.histogram
    }

    /// Fold `other` in as if its samples had been pushed after ours
    /// (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.histogram.merge(&other.histogram)?;
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean = other.mean;
            self.m2 = other.m2;
            return Ok(());
        }
        let na = T::from_u64(self.count).unwrap();
        let nb = T::from_u64(other.count).unwrap();
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean = self.mean + delta * nb / n;
        self.m2 = self.m2 + other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
        Ok(())
    }
}

/// Standard error of the sample standard deviation of a correlated series,
/// by the method of batch means on the batch variances.
pub fn batch_std_error<T: Real>(samples: &[T], batches: usize) -> Result<T> {
    if batches < 2 || samples.len() < 2 * batches {
        return Err(Error::InsufficientSamples {
            needed: 2 * batches.max(2),
            got: samples.len(),
        });
    }
    let size = samples.len() / batches;
    let var_of = |xs: &[T]| {
        let n = T::from_count(xs.len());
        let m = xs.iter().copied().sum::<T>() / n;
        xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / (n - T::one())
    };
    let vars: Vec<T> = samples.chunks_exact(size).take(batches).map(var_of).collect();
    let b = T::from_count(vars.len());
    let mean_var = vars.iter().copied().sum::<T>() / b;
    let spread = vars.iter().map(|&v| (v - mean_var) * (v - mean_var)).sum::<T>() / (b - T::one());
    let se_var = (spread / b).sqrt();
    Ok(se_var / (T::lit(2.0) * mean_var.sqrt()))
}
