//! Small statistics helpers shared by the runners.

use serde::{Deserialize, Serialize};

/// Mean and standard error over retained shots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// `None` when no shot was retained.
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub shots_total: usize,
    pub shots_retained: usize,
}

impl Estimate {
    /// Reduces per-shot values in order; `None` marks a discarded shot.
    pub fn from_shots<I: IntoIterator<Item = Option<f64>>>(values: I) -> Self {
        let mut total = 0usize;
        let mut kept = Vec::new();
        for v in values {
            total += 1;
            if let Some(x) = v {
                kept.push(x);
            }
        }
        let (mean, stderr) = mean_stderr(&kept);
        Estimate { mean, stderr, shots_total: total, shots_retained: kept.len() }
    }

    pub fn retained_fraction(&self) -> f64 {
        if self.shots_total == 0 {
            0.0
        } else {
            self.shots_retained as f64 / self.shots_total as f64
        }
    }
}

/// Sample mean and `std/√n` (unbiased variance; stderr 0 for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let (_, se) = mean_stderr(xs);
    se.map_or(0.0, |se| se * (xs.len() as f64).sqrt())
}

/// Ordinary least squares `y = a + b·x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Peak-to-peak range of a curve.
pub fn visibility(ys: &[f64]) -> f64 {
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Fits `y = offset + amp·cos(x·freq + phase)` for a known `freq` by linear least squares.
/// Returns `(offset, amp, phase)` with `amp ≥ 0`.
pub fn fit_cosine(x: &[f64], y: &[f64], freq: f64) -> (f64, f64, f64) {
    use nalgebra::{DMatrix, DVector};
    let a = DMatrix::from_fn(x.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => (x[r] * freq).cos(),
        _ => (x[r] * freq).sin(),
    });
    let b = DVector::from_column_slice(y);
    let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap_or_else(|| DVector::zeros(3));
    let (c, s) = (sol[1], sol[2]);
    (sol[0], c.hypot(s), (-s).atan2(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_counts_discards() {
        let e = Estimate::from_shots([Some(1.0), None, Some(0.0), Some(1.0)]);
        assert_eq!((e.shots_total, e.shots_retained), (4, 3));
        assert!((e.mean.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let none = Estimate::from_shots([None, None]);
        assert_eq!(none.mean, None);
    }

    #[test]
    fn constant_samples_have_zero_stderr() {
        let e = Estimate::from_shots((0..10).map(|_| Some(0.25)));
        assert_eq!(e.stderr, Some(0.0));
    }

    #[test]
    fn cosine_fit_recovers_parameters() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|t| 0.3 + 0.5 * (2.0 * t + 0.4).cos()).collect();
        let (o, a, p) = fit_cosine(&x, &y, 2.0);
        assert!((o - 0.3).abs() < 1e-10 && (a - 0.5).abs() < 1e-10 && (p - 0.4).abs() < 1e-10);
    }
}
