//! Batched-means error bars and small fitting helpers.

/// Number of contiguous batches used for standard errors.
pub const BATCHES: usize = 32;

/// Accumulates a known-length sequence of per-step terms into `BATCHES`
/// contiguous batches. Term `i` of `n` lands in batch `i * B / n`.
#[derive(Debug, Clone)]
pub struct BatchedMean {
    n: usize,
    batches: usize,
    sums: Vec<f64>,
    counts: Vec<usize>,
    seen: usize,
}

impl BatchedMean {
    pub fn new(n: usize) -> Self {
        let batches = BATCHES.min(n.max(1));
        Self {
            n: n.max(1),
            batches,
            sums: vec![0.0; batches],
            counts: vec![0; batches],
            seen: 0,
        }
    }

    pub fn push(&mut self, value: f64) {
        let b = ((self.seen as u128 * self.batches as u128) / self.n as u128) as usize;
        let b = b.min(self.batches - 1);
        self.sums[b] += value;
        self.counts[b] += 1;
        self.seen += 1;
    }

    pub fn total(&self) -> f64 {
        self.sums.iter().sum()
    }

    pub fn count(&self) -> usize {
        self.seen
    }

    /// Sample standard deviation of the batch means divided by sqrt(batches).
    /// Zero when fewer than two batches are populated.
    pub fn std_error(&self) -> f64 {
        let means: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let k = means.len();
        if k < 2 {
            return 0.0;
        }
        let mean = means.iter().sum::<f64>() / k as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
///
/// Returns `None` when fewer than two points are usable (non-positive values
/// are skipped).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    linear_slope(&pts)
}

pub(crate) fn linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Mean and standard error (sd / sqrt(n)) of a slice, treating it as i.i.d.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
