//! Photocurrent synthesis for the heterodyne receiver.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::rng::stream_rng;
use crate::ELEMENTARY_CHARGE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeterodyneConfig {
    /// AOM beat frequency (Hz).
    pub beat_frequency: f64,
    /// LO power on each photodiode (W).
    pub lo_power: f64,
    /// A/W
    pub responsivity: f64,
    /// Transimpedance gain (V/A).
    pub gain: f64,
    pub sample_rate: f64,
    /// Read out scattered light guided to both fiber ends.
    pub dual_end: bool,
}

impl Default for HeterodyneConfig {
    fn default() -> Self {
        Self {
            beat_frequency: 25e3,
            lo_power: 1e-3,
            responsivity: 0.5,
            gain: 1e4,
            sample_rate: 100e3,
            dual_end: false,
        }
    }
}

impl HeterodyneConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("heterodyne.beat_frequency", self.beat_frequency)?;
        ensure_positive("heterodyne.lo_power", self.lo_power)?;
        ensure_positive("heterodyne.responsivity", self.responsivity)?;
        ensure_positive("heterodyne.gain", self.gain)?;
        ensure_positive("heterodyne.sample_rate", self.sample_rate)?;
        if !(self.sample_rate > 2.0 * self.beat_frequency) {
            return Err(Error::invalid(
                "heterodyne.sample_rate",
                "must exceed twice the beat frequency",
            ));
        }
        Ok(())
    }

    /// Shot-noise PSD per watt of detected power, `2 e R G²` (V²/Hz/W).
    pub fn shot_noise_coefficient(&self) -> f64 {
        2.0 * ELEMENTARY_CHARGE * self.responsivity * self.gain * self.gain
    }

    /// Beat-note amplitude `2 R G √(P_LO P_sig)` (V).
    pub fn tone_amplitude(&self, signal_power: f64) -> f64 {
        2.0 * self.responsivity * self.gain * (self.lo_power * signal_power.max(0.0)).sqrt()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBudget {
    /// Flat electronic noise (V²/Hz).
    pub electronic_psd: f64,
    /// Shot-noise PSD per detected watt (V²/Hz/W).
    pub shot_coefficient: f64,
    /// Frequency offset from the carrier where the 1/f term meets the white floor (Hz).
    pub flicker_corner: f64,
    /// 1/f PSD coefficient around the carrier, `S(f_b ± δ) = A/|δ|` (V²).
    pub flicker_amplitude: f64,
}

impl NoiseBudget {
    pub fn silent() -> Self {
        Self {
            electronic_psd: 0.0,
            shot_coefficient: 0.0,
            flicker_corner: 4.0,
            flicker_amplitude: 0.0,
        }
    }

    /// Electronic floor of 3e-15 V²/Hz, shot noise from the detector constants
    /// and a 1/f term meeting the LO-only white floor at `flicker_corner`.
    pub fn for_receiver(cfg: &HeterodyneConfig) -> Self {
        let mut budget = Self {
            electronic_psd: 3e-15,
            shot_coefficient: cfg.shot_noise_coefficient(),
            flicker_corner: 4.0,
            flicker_amplitude: 0.0,
        };
        budget.flicker_amplitude = budget.white_psd(cfg, 0.0) * budget.flicker_corner;
        budget
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise.electronic_psd", self.electronic_psd),
            ("noise.shot_coefficient", self.shot_coefficient),
            ("noise.flicker_corner", self.flicker_corner),
            ("noise.flicker_amplitude", self.flicker_amplitude),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// One-sided white PSD with `mean_signal` watts of optical signal (V²/Hz).
    pub fn white_psd(&self, cfg: &HeterodyneConfig, mean_signal: f64) -> f64 {
        self.shot_coefficient * (2.0 * cfg.lo_power + mean_signal) + self.electronic_psd
    }
}

/// Sampled optical signal power reaching the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    /// W
    pub power: Vec<f64>,
    pub dt: f64,
    pub start_time: f64,
}

impl Envelope {
    pub fn zeros(n: usize, dt: f64) -> Self {
        Self {
            power: vec![0.0; n],
            dt,
            start_time: 0.0,
        }
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn duration(&self) -> f64 {
        self.power.len() as f64 * self.dt
    }

    /// Linear interpolation onto a grid `factor` times finer.
    pub fn upsample(&self, factor: usize) -> Self {
        if factor <= 1 || self.power.is_empty() {
            return self.clone();
        }
        let n = self.power.len();
        let mut power = Vec::with_capacity(n * factor);
        for k in 0..n {
            let a = self.power[k];
            let b = self.power[(k + 1).min(n - 1)];
            for s in 0..factor {
                let t = s as f64 / factor as f64;
                power.push(a + t * (b - a));
            }
        }
        Self {
            power,
            dt: self.dt / factor as f64,
            start_time: self.start_time,
        }
    }

    /// Upsamples to `sample_rate` when it is an integer multiple of the current rate.
    pub fn resample_to(&self, sample_rate: f64) -> Result<Self> {
        let ratio = sample_rate * self.dt;
        let factor = ratio.round();
        if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
            return Err(Error::SampleRateMismatch {
                envelope_hz: self.sample_rate(),
                trace_hz: sample_rate,
            });
        }
        Ok(self.upsample(factor as usize))
    }

    pub fn mean(&self) -> f64 {
        if self.power.is_empty() {
            0.0
        } else {
            self.power.iter().sum::<f64>() / self.power.len() as f64
        }
    }
}

/// Ground-truth interval attached to a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    /// V
    pub samples: Vec<f64>,
    pub dt: f64,
    pub start_time: f64,
    pub truth: Option<Vec<Interval>>,
}

impl TimeTrace {
    pub fn new(samples: Vec<f64>, dt: f64, start_time: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("trace", "needs at least two samples"));
        }
        ensure_positive("trace.dt", dt)?;
        Ok(Self {
            samples,
            dt,
            start_time,
            truth: None,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }
}

/// Beat note plus white and 1/f noise.
///
/// The tone carries `2 R G √(P_LO P_sig(t))` at the beat frequency (twice the
/// signal power with `dual_end`); the white floor follows
/// [`NoiseBudget::white_psd`] at the mean signal power. The 1/f term is added
/// as in-phase and quadrature sidebands around the carrier.
pub fn synthesize_photocurrent(
    envelope: &Envelope,
    cfg: &HeterodyneConfig,
    noise: &NoiseBudget,
    seed: u64,
) -> Result<TimeTrace> {
    cfg.validate()?;
    noise.validate()?;
    let rel = (envelope.sample_rate() - cfg.sample_rate).abs() / cfg.sample_rate;
    if !(rel <= 1e-9) {
        return Err(Error::SampleRateMismatch {
            envelope_hz: envelope.sample_rate(),
            trace_hz: cfg.sample_rate,
        });
    }
    let n = envelope.power.len();
    if n < 2 {
        return Err(Error::invalid("envelope", "needs at least two samples"));
    }
    if let Some(bad) = envelope.power.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::invalid("envelope", format!("power must be non-negative, got {bad}")));
    }
    let ends = if cfg.dual_end { 2.0 } else { 1.0 };
    let mean_signal = ends * envelope.mean();
    let white = noise.white_psd(cfg, mean_signal);
    let sigma = (white * 0.5 * cfg.sample_rate).sqrt();

    let omega = 2.0 * PI * cfg.beat_frequency;
    let mut rng = stream_rng(seed, 0);
    let mut samples = Vec::with_capacity(n);
    for (k, &p) in envelope.power.iter().enumerate() {
        let t = k as f64 * cfg.dt();
        let tone = cfg.tone_amplitude(ends * p) * (omega * t).cos();
        let w: f64 = if sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        samples.push(tone + sigma * w);
    }
    if noise.flicker_amplitude > 0.0 {
        let (u, v) = flicker_quadratures(n, cfg.sample_rate, noise.flicker_amplitude, seed);
        for (k, s) in samples.iter_mut().enumerate() {
            let phase = omega * k as f64 * cfg.dt();
            *s += u[k] * phase.cos() + v[k] * phase.sin();
        }
    }
    TimeTrace::new(samples, cfg.dt(), envelope.start_time)
}

/// Two independent baseband processes with one-sided PSD `2A/f`, generated
/// from one complex spectrum with random phases.
fn flicker_quadratures(n: usize, sample_rate: f64, amplitude: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, 1);
    let df = sample_rate / n as f64;
    let mut spec: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            if k == 0 {
                return Complex::new(0.0, 0.0);
            }
            let kk = if k <= n / 2 { k } else { n - k };
            let f = kk as f64 * df;
            let psd = 2.0 * amplitude / f;
            let scale = (psd * sample_rate * n as f64 / 2.0).sqrt();
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex::new(scale * a, scale * b)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let inv = 1.0 / n as f64;
    spec.iter().map(|c| (c.re * inv, c.im * inv)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shot_coefficient_value() {
        let c = HeterodyneConfig::default().shot_noise_coefficient();
        assert!((c - 1.602176634e-11).abs() < 1e-20, "{c:e}");
    }

    #[test]
    fn rejects_low_sample_rate() {
        let cfg = HeterodyneConfig {
            sample_rate: 40e3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn silent_zero_envelope_is_zero() {
        let cfg = HeterodyneConfig::default();
        let t = synthesize_photocurrent(&Envelope::zeros(1000, cfg.dt()), &cfg, &NoiseBudget::silent(), 3)
            .unwrap();
        assert!(t.samples.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rate_mismatch_is_an_error() {
        let cfg = HeterodyneConfig::default();
        let env = Envelope::zeros(100, 1e-4);
        assert!(matches!(
            synthesize_photocurrent(&env, &cfg, &NoiseBudget::silent(), 0),
            Err(Error::SampleRateMismatch { .. })
        ));
        let up = env.resample_to(cfg.sample_rate).unwrap();
        assert_eq!(up.power.len(), 1000);
        assert!(env.resample_to(15e3).is_err());
    }

    #[test]
    fn negative_envelope_rejected() {
        let cfg = HeterodyneConfig::default();
        let mut env = Envelope::zeros(10, cfg.dt());
        env.power[3] = -1e-12;
        assert!(synthesize_photocurrent(&env, &cfg, &NoiseBudget::silent(), 0).is_err());
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = HeterodyneConfig::default();
        let noise = NoiseBudget::for_receiver(&cfg);
        let env = Envelope::zeros(4096, cfg.dt());
        let a = synthesize_photocurrent(&env, &cfg, &noise, 11).unwrap();
        let b = synthesize_photocurrent(&env, &cfg, &noise, 11).unwrap();
        let c = synthesize_photocurrent(&env, &cfg, &noise, 12).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_ne!(a.samples, c.samples);
    }
}
