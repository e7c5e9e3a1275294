//! Band limiting, quantum-noise normalization and threshold event detection.

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::filter::{bandpass_filter, settling_time, Kind, Sos};
use super::heterodyne::{HeterodyneConfig, Interval, NoiseBudget};
use super::lockin::{LockInOutput, LockInSettings};
use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Band {
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Default for Band {
    fn default() -> Self {
        Self { f_lo: 4.0, f_hi: 100.0 }
    }
}

/// Band-passed quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimited {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rate: f64,
    pub start_time: f64,
    /// Samples clear of the lock-in and band-pass edge transients.
    pub valid: Range<usize>,
}

pub fn band_limit(out: &LockInOutput, band: &Band) -> Result<BandLimited> {
    let bp = bandpass_filter(band.f_lo, band.f_hi, out.output_rate)?;
    let x = bp.filtfilt(&out.x)?;
    let y = bp.filtfilt(&out.y)?;
    let trim = out.settling + (settling_time(band.f_lo, 4) * out.output_rate).ceil() as usize;
    let n = x.len();
    if 2 * trim >= n {
        return Err(Error::invalid(
            "trace",
            format!("too short: {n} demodulated samples leave nothing after settling"),
        ));
    }
    Ok(BandLimited {
        x,
        y,
        rate: out.output_rate,
        start_time: out.start_time,
        valid: trim..n - trim,
    })
}

/// Standard deviation of one band-passed quadrature, fixed from a particle-free segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseReference {
    pub sigma: f64,
}

impl NoiseReference {
    /// Pooled RMS of X and Y over the valid samples.
    pub fn from_quadratures(reference: &BandLimited) -> Result<Self> {
        let r = reference.valid.clone();
        if r.is_empty() {
            return Err(Error::EmptySeries);
        }
        let ss: f64 = reference.x[r.clone()]
            .iter()
            .chain(&reference.y[r.clone()])
            .map(|v| v * v)
            .sum();
        let sigma = (ss / (2 * r.len()) as f64).sqrt();
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::ZeroVarianceReference);
        }
        Ok(Self { sigma })
    }
}

/// Quadratures and amplitude in units of the reference σ.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedOutput {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub rate: f64,
    pub start_time: f64,
    pub valid: Range<usize>,
}

impl NormalizedOutput {
    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 / self.rate
    }

    pub fn valid_amplitude(&self) -> &[f64] {
        &self.a[self.valid.clone()]
    }

    pub fn valid_start_time(&self) -> f64 {
        self.time(self.valid.start)
    }

    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::from("t_s,X_sigma,Y_sigma,A_sigma\n");
        for k in self.valid.clone() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(self.time(k)),
                fmt_f64(self.x[k]),
                fmt_f64(self.y[k]),
                fmt_f64(self.a[k])
            ));
        }
        out
    }
}

pub fn normalize(signal: &BandLimited, reference: &NoiseReference) -> NormalizedOutput {
    let inv = 1.0 / reference.sigma;
    let x: Vec<f64> = signal.x.iter().map(|v| v * inv).collect();
    let y: Vec<f64> = signal.y.iter().map(|v| v * inv).collect();
    let a = x.iter().zip(&y).map(|(x, y)| (x * x + y * y).sqrt()).collect();
    NormalizedOutput {
        x,
        y,
        a,
        rate: signal.rate,
        start_time: signal.start_time,
        valid: signal.valid.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSettings {
    /// Threshold in σ units.
    pub threshold: f64,
    /// Excursions closer than this are merged (s).
    pub min_separation: f64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        Self {
            threshold: 5.0,
            min_separation: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEvent {
    pub start: f64,
    pub end: f64,
    /// σ units
    pub peak: f64,
    pub snr: f64,
    pub duration: f64,
}

impl DetectionEvent {
    pub fn interval(&self) -> Interval {
        Interval {
            start: self.start,
            end: self.end,
        }
    }
}

/// Contiguous runs with `a >= k`, merged across gaps shorter than the separation.
pub fn detect_events(
    amplitude: &[f64],
    rate: f64,
    start_time: f64,
    settings: &DetectionSettings,
) -> Result<Vec<DetectionEvent>> {
    if amplitude.is_empty() {
        return Err(Error::EmptySeries);
    }
    ensure_positive("detection.rate", rate)?;
    if !(settings.threshold >= 0.0) {
        return Err(Error::invalid("detection.threshold", "must be non-negative"));
    }
    if !(settings.min_separation >= 0.0) {
        return Err(Error::invalid("detection.min_separation", "must be non-negative"));
    }
    let dt = 1.0 / rate;
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    let mut open: Option<(usize, f64)> = None;
    for (k, &v) in amplitude.iter().enumerate() {
        match (&mut open, v >= settings.threshold) {
            (None, true) => open = Some((k, v)),
            (Some((_, peak)), true) => *peak = peak.max(v),
            (Some((s, peak)), false) => {
                runs.push((*s, k - 1, *peak));
                open = None;
            }
            (None, false) => {}
        }
    }
    if let Some((s, peak)) = open {
        runs.push((s, amplitude.len() - 1, peak));
    }

    let mut merged: Vec<(usize, usize, f64)> = Vec::new();
    for run in runs {
        if let Some(last) = merged.last_mut() {
            let gap = (run.0 - last.1 - 1) as f64 * dt;
            if gap < settings.min_separation {
                last.1 = run.1;
                last.2 = last.2.max(run.2);
                continue;
            }
        }
        merged.push(run);
    }
    Ok(merged
        .into_iter()
        .map(|(s, e, peak)| {
            let start = start_time + s as f64 * dt;
            let end = start_time + (e + 1) as f64 * dt;
            DetectionEvent {
                start,
                end,
                peak,
                snr: peak,
                duration: end - start,
            }
        })
        .collect())
}

pub fn events_csv(events: &[DetectionEvent]) -> String {
    use crate::io::fmt_f64;
    let mut out = String::from("start_s,end_s,peak_sigma,snr\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(e.start),
            fmt_f64(e.end),
            fmt_f64(e.peak),
            fmt_f64(e.snr)
        ));
    }
    out
}

/// Spectral moments `(λ₀, λ₂)` of one band-passed quadrature, `λ₂` in rad²/s².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMoments {
    pub variance: f64,
    pub lambda2: f64,
}

/// Predicted quadrature statistics for noise-only input through the chain.
///
/// The quadrature spectrum is `2·S_white + 2A/f` (one-sided), weighted by the
/// zero-phase lock-in low-pass and band-pass responses.
pub fn predicted_quadrature_moments(
    cfg: &HeterodyneConfig,
    noise: &NoiseBudget,
    mean_signal: f64,
    lockin: &LockInSettings,
    band: &Band,
) -> Result<QuadratureMoments> {
    let out_rate = cfg.sample_rate / lockin.decimation as f64;
    let lp = Sos::butterworth(lockin.order, lockin.cutoff, cfg.sample_rate, Kind::LowPass)?;
    let bp = bandpass_filter(band.f_lo, band.f_hi, out_rate)?;
    let white = noise.white_psd(cfg, mean_signal);
    let spectrum = |f: f64| {
        let base = 2.0 * white + if f > 0.0 { 2.0 * noise.flicker_amplitude / f } else { 0.0 };
        base * lp.zero_phase_gain2(f, cfg.sample_rate) * bp.zero_phase_gain2(f, out_rate)
    };
    let f_max = 0.5 * out_rate;
    let steps = 400_000usize;
    let df = f_max / steps as f64;
    let (mut l0, mut l2) = (0.0, 0.0);
    for k in 0..=steps {
        let f = k as f64 * df;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        let s = spectrum(f) * w;
        l0 += s;
        l2 += s * (2.0 * PI * f).powi(2);
    }
    Ok(QuadratureMoments {
        variance: l0 * df,
        lambda2: l2 / l0,
    })
}

/// Mean rate of upcrossings of level `u` (σ units) by the amplitude of two
/// independent Gaussian quadratures, `√(λ₂/2π)·u·e^(−u²/2)`.
pub fn amplitude_upcrossing_rate(u: f64, lambda2: f64) -> f64 {
    (lambda2 / (2.0 * PI)).sqrt() * u * (-0.5 * u * u).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub true_positives: usize,
    pub false_positives: usize,
    pub missed: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Overlap matching of detected events against ground-truth intervals, each
/// widened by `tolerance` seconds on both sides.
pub fn score_events(detected: &[DetectionEvent], truth: &[Interval], tolerance: f64) -> Score {
    let overlaps = |a: Interval, b: Interval| a.start - tolerance < b.end && b.start - tolerance < a.end;
    let tp = detected
        .iter()
        .filter(|d| truth.iter().any(|t| overlaps(d.interval(), *t)))
        .count();
    let found = truth
        .iter()
        .filter(|t| detected.iter().any(|d| overlaps(d.interval(), **t)))
        .count();
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Score {
        true_positives: tp,
        false_positives: detected.len() - tp,
        missed: truth.len() - found,
        precision: ratio(tp, detected.len()),
        recall: ratio(found, truth.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_threshold_is_one_event() {
        let a = vec![0.3; 1000];
        let ev = detect_events(&a, 1000.0, 2.0, &DetectionSettings { threshold: 0.0, min_separation: 0.0 }).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].start, 2.0);
        assert!((ev[0].end - 3.0).abs() < 1e-12);
    }

    #[test]
    fn merges_close_runs() {
        let mut a = vec![0.0; 100];
        a[10] = 6.0;
        a[12] = 7.0;
        a[60] = 5.5;
        let s = DetectionSettings { threshold: 5.0, min_separation: 0.005 };
        let ev = detect_events(&a, 1000.0, 0.0, &s).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].peak, 7.0);
        assert_eq!(ev[0].snr, ev[0].peak);
        assert!(ev.iter().all(|e| e.end > e.start));
        let apart = detect_events(&a, 1000.0, 0.0, &DetectionSettings { min_separation: 0.0, ..s }).unwrap();
        assert_eq!(apart.len(), 3);
    }

    #[test]
    fn empty_series_and_flat_reference() {
        assert!(matches!(
            detect_events(&[], 1.0, 0.0, &DetectionSettings::default()),
            Err(Error::EmptySeries)
        ));
        let flat = BandLimited {
            x: vec![0.0; 10],
            y: vec![0.0; 10],
            rate: 1.0,
            start_time: 0.0,
            valid: 2..8,
        };
        assert!(matches!(NoiseReference::from_quadratures(&flat), Err(Error::ZeroVarianceReference)));
    }

    #[test]
    fn scoring_counts() {
        let ev = |s: f64, e: f64| DetectionEvent { start: s, end: e, peak: 6.0, snr: 6.0, duration: e - s };
        let det = [ev(1.0, 1.1), ev(5.0, 5.1)];
        let truth = [Interval { start: 1.05, end: 1.3 }, Interval { start: 3.0, end: 3.2 }];
        let s = score_events(&det, &truth, 0.0);
        assert_eq!((s.true_positives, s.false_positives, s.missed), (1, 1, 1));
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 0.5);
    }
}
