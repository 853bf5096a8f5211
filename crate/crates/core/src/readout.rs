//! Analog sensor pipeline: synthetic voltage batches with burst-dependent drift,
//! bimodal histogram fits, the intersection threshold and classification.
//!
//! The drift generator is a synthetic stand-in for microwave heating. Only the
//! correction (refitting every batch) is meant to be realistic.

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use crate::error::{invalid, Result};
use crate::rng::{stream, tag};

/// Which side of the threshold reads as an even (bit 1) outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    EvenHigh,
    EvenLow,
}

/// Offset added to every voltage after `t` ns of cumulative microwave bursts:
/// `linear·t + transient·(1 − exp(−t/τ))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drift {
    pub linear_mv_per_ns: f64,
    pub transient_mv: f64,
    pub transient_tau_ns: f64,
}

impl Drift {
    pub fn offset(&self, burst_ns: f64) -> f64 {
        let transient = if self.transient_tau_ns > 0.0 {
            self.transient_mv * (1.0 - (-burst_ns / self.transient_tau_ns).exp())
        } else {
            0.0
        };
        self.linear_mv_per_ns * burst_ns + transient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub v_odd: f64,
    pub v_even: f64,
    pub sigma_odd: f64,
    pub sigma_even: f64,
    pub drift: Drift,
    /// Chance that a whole batch is displaced by `jump_mv`.
    pub jump_probability: f64,
    pub jump_mv: f64,
    pub seed: u64,
}

impl Default for SensorModel {
    /// Centers 5σ apart with a linear drift reaching 2σ after a 170 ns burst.
    fn default() -> Self {
        SensorModel {
            v_odd: 0.0,
            v_even: 10.0,
            sigma_odd: 2.0,
            sigma_even: 2.0,
            drift: Drift { linear_mv_per_ns: 4.0 / 170.0, ..Default::default() },
            jump_probability: 0.0,
            jump_mv: 25.0,
            seed: 0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if self.v_odd == self.v_even {
            return Err(invalid("sensor centers must differ"));
        }
        if !(self.sigma_odd > 0.0 && self.sigma_even > 0.0) {
            return Err(invalid("sensor widths must be positive"));
        }
        if !(0.0..=1.0).contains(&self.jump_probability) {
            return Err(invalid("jump probability must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn polarity(&self) -> Polarity {
        if self.v_even > self.v_odd {
            Polarity::EvenHigh
        } else {
            Polarity::EvenLow
        }
    }

    /// Center and width for a bit (1 = even).
    pub fn component(&self, bit: u8) -> (f64, f64) {
        if bit == 1 {
            (self.v_even, self.sigma_even)
        } else {
            (self.v_odd, self.sigma_odd)
        }
    }

    pub fn without_drift(&self) -> Self {
        SensorModel { drift: Drift::default(), ..*self }
    }

    /// Probability that a shot of the given bit lands on the wrong side of `threshold`.
    pub fn misassignment(&self, bit: u8, threshold: f64) -> f64 {
        let (mu, sigma) = self.component(bit);
        let cdf = NormalDist::new(mu, sigma).map(|d| d.cdf(threshold)).unwrap_or(0.5);
        let even_side_upper = self.polarity() == Polarity::EvenHigh;
        match (bit == 1, even_side_upper) {
            (true, true) | (false, false) => cdf,
            _ => 1.0 - cdf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthBatch {
    pub batch_id: u64,
    pub voltages: Vec<f64>,
    pub jumped: bool,
}

/// Draws one voltage per bit. The noise stream depends only on the seed and
/// `batch_id`, so two calls differing only in drift see identical noise.
pub fn synth_batch(true_bits: &[u8], model: &SensorModel, burst_ns: f64, batch_id: u64) -> Result<SynthBatch> {
    model.validate()?;
    let mut rng = stream(&[model.seed, tag::SENSOR, batch_id]);
    let jumped = model.jump_probability > 0.0 && rng.random::<f64>() < model.jump_probability;
    let offset = model.drift.offset(burst_ns) + if jumped { model.jump_mv } else { 0.0 };
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let voltages = true_bits
        .iter()
        .map(|&b| {
            let (mu, sigma) = model.component(b);
            mu + offset + sigma * unit.sample(&mut rng)
        })
        .collect();
    Ok(SynthBatch { batch_id, voltages, jumped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Gaussian {
    pub fn eval(&self, v: f64) -> f64 {
        self.amplitude * (-(v - self.center).powi(2) / (2.0 * self.width * self.width)).exp()
    }
}

/// Minimum sample count for a fit to be trusted.
pub const MIN_SAMPLES: usize = 200;
/// Minimum `|Δcenter|/(σ_low+σ_high)` for a fit to count as bimodal.
pub const MIN_SEPARATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Component with the lower center.
    pub low: Gaussian,
    pub high: Gaussian,
    pub threshold: f64,
    /// The threshold fell back to the midpoint.
    pub threshold_fallback: bool,
    pub converged: bool,
    /// Enough samples were supplied.
    pub reliable: bool,
    pub separation_quality: f64,
    pub bins: usize,
}

impl FitResult {
    fn failed(bins: usize, reliable: bool) -> Self {
        let g = Gaussian { amplitude: 0.0, center: 0.0, width: 0.0 };
        FitResult {
            low: g,
            high: g,
            threshold: f64::NAN,
            threshold_fallback: false,
            converged: false,
            reliable,
            separation_quality: 0.0,
            bins,
        }
    }
}

/// Freedman-Diaconis bin count, clamped to `[20, 200]`.
pub fn default_bins(voltages: &[f64]) -> usize {
    let mut v = voltages.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n < 4 {
        return 20;
    }
    let q = |p: f64| v[((n - 1) as f64 * p).round() as usize];
    let iqr = q(0.75) - q(0.25);
    let range = v[n - 1] - v[0];
    if iqr <= 0.0 || range <= 0.0 {
        return 20;
    }
    let h = 2.0 * iqr / (n as f64).cbrt();
    ((range / h).ceil() as usize).clamp(20, 200)
}

struct Histogram {
    centers: Vec<f64>,
    counts: Vec<f64>,
    width: f64,
}

fn histogram(voltages: &[f64], bins: usize) -> Option<Histogram> {
    let lo = voltages.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = voltages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &v in voltages {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1.0;
    }
    let centers = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    Some(Histogram { centers, counts, width })
}

/// Two highest peaks of the smoothed histogram separated by a clear dip.
fn initial_peaks(h: &Histogram) -> Option<(usize, usize)> {
    let n = h.counts.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let a = i.saturating_sub(1);
            let b = (i + 1).min(n - 1);
            h.counts[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect();
    let i1 = (0..n).max_by(|&a, &b| smooth[a].total_cmp(&smooth[b]))?;
    let mut best: Option<usize> = None;
    for j in 0..n {
        if j.abs_diff(i1) < 3 || smooth[j] <= 0.0 {
            continue;
        }
        let (a, b) = if j < i1 { (j, i1) } else { (i1, j) };
        let dip = smooth[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
        if dip < 0.6 * smooth[j].min(smooth[i1]) && best.is_none_or(|k| smooth[j] > smooth[k]) {
            best = Some(j);
        }
    }
    best.map(|j| if j < i1 { (j, i1) } else { (i1, j) })
}

fn model_and_jacobian(p: &[f64; 6], x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let mut f = DVector::zeros(x.len());
    let mut jac = DMatrix::zeros(x.len(), 6);
    for (i, &v) in x.iter().enumerate() {
        for c in 0..2 {
            let (a, mu, ls) = (p[3 * c], p[3 * c + 1], p[3 * c + 2]);
            let s = ls.exp();
            let z = (v - mu) / s;
            let e = (-0.5 * z * z).exp();
            f[i] += a * e;
            jac[(i, 3 * c)] = e;
            jac[(i, 3 * c + 1)] = a * e * z / s;
            jac[(i, 3 * c + 2)] = a * e * z * z;
        }
    }
    (f, jac)
}

/// Levenberg-Marquardt on `[A1, μ1, ln σ1, A2, μ2, ln σ2]`.
fn levenberg_marquardt(mut p: [f64; 6], x: &[f64], y: &[f64]) -> Option<[f64; 6]> {
    let y = DVector::from_column_slice(y);
    let cost = |p: &[f64; 6]| (&y - model_and_jacobian(p, x).0).norm_squared();
    let mut lambda = 1e-3;
    let mut current = cost(&p);
    for _ in 0..500 {
        let (f, jac) = model_and_jacobian(&p, x);
        let r = &y - f;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..6 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for k in 0..6 {
                trial[k] += step[k];
            }
            let c = cost(&trial);
            if c.is_finite() && c < current {
                let gain = (current - c) / current.max(1e-300);
                p = trial;
                current = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if gain < 1e-12 {
                    return Some(p);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return Some(p);
        }
    }
    Some(p)
}

/// Least-squares fit of two Gaussians to the binned voltages. `bins = None`
/// uses [`default_bins`]. Single-mode or degenerate data yields `converged = false`.
pub fn fit_bimodal(voltages: &[f64], bins: Option<usize>) -> FitResult {
    let bins = bins.unwrap_or_else(|| default_bins(voltages)).max(4);
    let reliable = voltages.len() >= MIN_SAMPLES;
    if !reliable {
        return FitResult::failed(bins, false);
    }
    let Some(h) = histogram(voltages, bins) else {
        return FitResult::failed(bins, reliable);
    };
    let Some((i1, i2)) = initial_peaks(&h) else {
        debug!("histogram has a single mode");
        return FitResult::failed(bins, reliable);
    };
    let sep = h.centers[i2] - h.centers[i1];
    let s0 = (sep / 4.0).max(h.width).ln();
    let p0 = [h.counts[i1].max(1.0), h.centers[i1], s0, h.counts[i2].max(1.0), h.centers[i2], s0];
    let Some(p) = levenberg_marquardt(p0, &h.centers, &h.counts) else {
        return FitResult::failed(bins, reliable);
    };
    let mut g = [
        Gaussian { amplitude: p[0], center: p[1], width: p[2].exp() },
        Gaussian { amplitude: p[3], center: p[4], width: p[5].exp() },
    ];
    g.sort_by(|a, b| a.center.total_cmp(&b.center));
    let [low, high] = g;
    let lo = h.centers[0] - h.width;
    let hi = h.centers[bins - 1] + h.width;
    let mass = |g: &Gaussian| g.amplitude * g.width;
    let total = mass(&low) + mass(&high);
    let quality = (high.center - low.center) / (low.width + high.width);
    let ok = p.iter().all(|x| x.is_finite())
        && low.amplitude > 0.0
        && high.amplitude > 0.0
        && mass(&low) > 0.01 * total
        && mass(&high) > 0.01 * total
        && low.center >= lo
        && high.center <= hi
        && quality >= MIN_SEPARATION;
    let mut fit = FitResult {
        low,
        high,
        threshold: f64::NAN,
        threshold_fallback: false,
        converged: ok,
        reliable,
        separation_quality: quality,
        bins,
    };
    if ok {
        let (t, fallback) = dynamic_threshold(&fit);
        fit.threshold = t;
        fit.threshold_fallback = fallback;
    }
    fit
}

/// Intersection of the two weighted Gaussians between their centers. Returns
/// the threshold and whether it fell back to the midpoint.
pub fn dynamic_threshold(fit: &FitResult) -> (f64, bool) {
    let (g1, g2) = (fit.low, fit.high);
    let mid = 0.5 * (g1.center + g2.center);
    if g1.amplitude <= 0.0 || g2.amplitude <= 0.0 {
        return (mid, true);
    }
    let (v1, v2) = (g1.width * g1.width, g2.width * g2.width);
    let a = 0.5 / v2 - 0.5 / v1;
    let b = g1.center / v1 - g2.center / v2;
    let c = (g1.amplitude / g2.amplitude).ln() - g1.center * g1.center / (2.0 * v1) + g2.center * g2.center / (2.0 * v2);
    let inside = |v: f64| v > g1.center && v < g2.center;
    let scale = b.abs().max(1e-300);
    let roots: Vec<f64> = if a.abs() < 1e-12 * scale {
        if b == 0.0 {
            vec![]
        } else {
            vec![-c / b]
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            vec![]
        } else {
            // Numerically stable pair of roots.
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            vec![q / a, c / q]
        }
    };
    roots
        .into_iter()
        .filter(|v| v.is_finite() && inside(*v))
        .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
        .map_or((mid, true), |v| (v, false))
}

/// Bit 1 for even. Values exactly at the threshold count as even.
pub fn classify(voltages: &[f64], threshold: f64, polarity: Polarity) -> Vec<u8> {
    voltages
        .iter()
        .map(|&v| {
            let even = match polarity {
                Polarity::EvenHigh => v >= threshold,
                Polarity::EvenLow => v <= threshold,
            };
            u8::from(even)
        })
        .collect()
}

/// Fits and classifies a batch; `None` for batches that must be discarded.
pub fn classify_batch(voltages: &[f64], polarity: Polarity, bins: Option<usize>) -> Option<(FitResult, Vec<u8>)> {
    let fit = fit_bimodal(voltages, bins);
    fit.converged.then(|| {
        let bits = classify(voltages, fit.threshold, polarity);
        (fit, bits)
    })
}

/// Synthetic Rabi sweep used to compare a stale threshold with per-batch refits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RethresholdConfig {
    pub model: SensorModel,
    pub thetas: Vec<f64>,
    pub shots_per_batch: usize,
    pub t_pi_ns: f64,
    /// Even-outcome probability at θ = π and θ = 0; keeps both modes populated.
    pub p_even_min: f64,
    pub p_even_max: f64,
}

impl Default for RethresholdConfig {
    fn default() -> Self {
        let steps = 33;
        RethresholdConfig {
            model: SensorModel::default(),
            thetas: (0..steps).map(|i| 2.0 * std::f64::consts::PI * i as f64 / (steps - 1) as f64).collect(),
            shots_per_batch: 5000,
            t_pi_ns: 170.0,
            p_even_min: 0.1,
            p_even_max: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RethresholdRow {
    pub theta: f64,
    pub burst_ns: f64,
    pub drift_mv: f64,
    pub true_fraction: f64,
    pub fixed: f64,
    /// `None` when the batch was discarded.
    pub dynamic: Option<f64>,
    pub drift_free: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RethresholdReport {
    pub rows: Vec<RethresholdRow>,
    pub fixed_threshold: f64,
    pub visibility_true: f64,
    pub visibility_fixed: f64,
    pub visibility_dynamic: f64,
    pub visibility_drift_free: f64,
    pub discard_rate: f64,
}

fn even_fraction(bits: &[u8]) -> f64 {
    bits.iter().map(|&b| f64::from(b)).sum::<f64>() / bits.len() as f64
}

fn range(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// One θ point of the rethreshold study: true bits plus drifted and drift-free voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyBatch {
    pub theta: f64,
    pub burst_ns: f64,
    pub bits: Vec<u8>,
    pub drifted: SynthBatch,
    pub reference: SynthBatch,
}

/// Generates the batches of a rethreshold study.
pub fn study_batches(cfg: &RethresholdConfig) -> Result<Vec<StudyBatch>> {
    cfg.model.validate()?;
    let clean = cfg.model.without_drift();
    cfg.thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let p = cfg.p_even_min + (cfg.p_even_max - cfg.p_even_min) * (theta / 2.0).cos().powi(2);
            let mut rng = stream(&[cfg.model.seed, tag::SENSOR, u64::MAX, i as u64]);
            let bits: Vec<u8> = (0..cfg.shots_per_batch).map(|_| u8::from(rng.random::<f64>() < p)).collect();
            let burst_ns = theta.abs() / std::f64::consts::PI * cfg.t_pi_ns;
            let drifted = synth_batch(&bits, &cfg.model, burst_ns, i as u64)?;
            let reference = synth_batch(&bits, &clean, burst_ns, i as u64)?;
            Ok(StudyBatch { theta, burst_ns, bits, drifted, reference })
        })
        .collect()
}

/// Runs the sweep. The stale threshold is calibrated on the first batch of the
/// drift-free model and then held fixed.
pub fn rethreshold_study(cfg: &RethresholdConfig) -> Result<RethresholdReport> {
    cfg.model.validate()?;
    if cfg.shots_per_batch == 0 || cfg.thetas.is_empty() {
        return Err(invalid("rethreshold study needs shots and at least one θ"));
    }
    if !(0.0..=1.0).contains(&cfg.p_even_min) || !(0.0..=1.0).contains(&cfg.p_even_max) {
        return Err(invalid("even probabilities must lie in [0, 1]"));
    }
    let polarity = cfg.model.polarity();
    let batches = study_batches(cfg)?;
    let calib = fit_bimodal(&batches[0].reference.voltages, None);
    if !calib.converged {
        return Err(invalid("calibration batch could not be fitted"));
    }
    let fixed_threshold = calib.threshold;
    let mut rows = Vec::with_capacity(batches.len());
    let mut discarded = 0usize;
    for StudyBatch { theta, burst_ns: burst, bits, drifted, reference } in &batches {
        let dynamic = classify_batch(&drifted.voltages, polarity, None).map(|(_, b)| even_fraction(&b));
        if dynamic.is_none() {
            discarded += 1;
        }
        rows.push(RethresholdRow {
            theta: *theta,
            burst_ns: *burst,
            drift_mv: cfg.model.drift.offset(*burst),
            true_fraction: even_fraction(bits),
            fixed: even_fraction(&classify(&drifted.voltages, fixed_threshold, polarity)),
            dynamic,
            drift_free: classify_batch(&reference.voltages, polarity, None).map(|(_, b)| even_fraction(&b)),
        });
    }
    Ok(RethresholdReport {
        visibility_true: range(rows.iter().map(|r| r.true_fraction)),
        visibility_fixed: range(rows.iter().map(|r| r.fixed)),
        visibility_dynamic: range(rows.iter().filter_map(|r| r.dynamic)),
        visibility_drift_free: range(rows.iter().filter_map(|r| r.drift_free)),
        discard_rate: discarded as f64 / rows.len() as f64,
        fixed_threshold,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture(n: usize, p_low: f64, lo: (f64, f64), hi: (f64, f64), seed: u64) -> Vec<f64> {
        let mut rng = stream(&[seed]);
        let unit = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                let (m, s) = if rng.random::<f64>() < p_low { lo } else { hi };
                m + s * unit.sample(&mut rng)
            })
            .collect()
    }

    #[test]
    fn zero_width_no_drift_hits_centers() {
        let m = SensorModel {
            sigma_odd: 1e-300,
            sigma_even: 1e-300,
            drift: Drift::default(),
            ..Default::default()
        };
        let b = synth_batch(&[0, 1, 1, 0], &m, 100.0, 0).unwrap();
        for (v, want) in b.voltages.iter().zip([0.0, 10.0, 10.0, 0.0]) {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_drift_scales_with_burst() {
        let d = SensorModel::default().drift;
        assert!((d.offset(200.0) - 2.0 * d.offset(100.0)).abs() < 1e-12);
    }

    #[test]
    fn balanced_mixture_recovered() {
        let v = mixture(5000, 0.5, (0.0, 1.0), (10.0, 1.0), 1);
        let f = fit_bimodal(&v, None);
        assert!(f.converged);
        assert!(f.low.center.abs() < 0.2 && (f.high.center - 10.0).abs() < 0.2);
        assert!(f.threshold > f.low.center && f.threshold < f.high.center);
    }

    #[test]
    fn imbalanced_mixture_recovered() {
        let v = mixture(5000, 0.9, (0.0, 1.0), (6.0, 1.0), 2);
        let f = fit_bimodal(&v, None);
        assert!(f.converged);
        assert!(f.low.center.abs() < 0.3 && (f.high.center - 6.0).abs() < 0.3, "{f:?}");
    }

    #[test]
    fn single_mode_not_converged() {
        let v = mixture(5000, 1.0, (0.0, 1.0), (0.0, 1.0), 3);
        assert!(!fit_bimodal(&v, None).converged);
        assert!(!fit_bimodal(&v[..100], None).reliable);
    }

    #[test]
    fn threshold_cases() {
        let g = |a, c| Gaussian { amplitude: a, center: c, width: 1.0 };
        let mut f = FitResult::failed(20, true);
        f.low = g(1.0, 0.0);
        f.high = g(1.0, 4.0);
        assert_eq!(dynamic_threshold(&f), (2.0, false));
        f.low = g(2.0, 0.0);
        let (t, _) = dynamic_threshold(&f);
        let want = 2.0 + 2f64.ln() / 4.0;
        assert!((t - want).abs() < 1e-12);
        assert!((f.low.eval(t) - f.high.eval(t)).abs() < 1e-12);
    }

    #[test]
    fn fit_is_shift_equivariant() {
        let v = mixture(4000, 0.4, (0.0, 1.0), (7.0, 1.5), 4);
        let shifted: Vec<f64> = v.iter().map(|x| x + 37.5).collect();
        let (a, b) = (fit_bimodal(&v, None), fit_bimodal(&shifted, None));
        assert!((b.low.center - a.low.center - 37.5).abs() < 1e-9);
        assert!((b.threshold - a.threshold - 37.5).abs() < 1e-9);
    }

    #[test]
    fn classification_and_ties() {
        assert_eq!(classify(&[10.0, 5.0, 0.0], 5.0, Polarity::EvenHigh), vec![1, 1, 0]);
        assert_eq!(classify(&[10.0, 5.0, 0.0], 5.0, Polarity::EvenLow), vec![0, 1, 1]);
    }

    #[test]
    fn rethreshold_restores_visibility() {
        let r = rethreshold_study(&RethresholdConfig::default()).unwrap();
        assert!((r.visibility_dynamic - r.visibility_drift_free).abs() <= 0.02 * r.visibility_drift_free);
        assert!(r.visibility_fixed <= 0.8 * r.visibility_drift_free, "{r:?}");
        assert_eq!(r.discard_rate, 0.0);
    }
}
