//! Streaming sufficient statistics with compensated summation.
//!
//! Each block of draws is reduced to `(count, mean, m2)`; blocks are merged
//! with the pairwise update of Chan et al. The running total behind the mean
//! is carried in Neumaier-compensated form so that 10⁷-term sums of nearly
//! cancelling values keep their low-order digits.

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Count, compensated sum and centred second moment of a sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleStats {
    count: u64,
    sum: CompensatedSum,
    m2: f64,
}

impl SampleStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Exact two-pass reduction of a buffered block.
    pub fn from_block(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let sum: CompensatedSum = values.iter().copied().collect();
        let mean = sum.value() / values.len() as f64;
        let m2 = values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<CompensatedSum>()
            .value();
        Self {
            count: values.len() as u64,
            sum,
            m2,
        }
    }

    pub fn merge(&mut self, other: &SampleStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean() - self.mean();
        self.m2 += other.m2 + delta * delta * na * nb / (na + nb);
        self.sum.add(other.sum.sum);
        self.sum.add(other.sum.carry);
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum.value() / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean, `sd / sqrt(n)`.
    pub fn stderr(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}
