//! Dual-phase lock-in demodulation.

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::filter::{settling_time, Kind, Sos};
use super::heterodyne::TimeTrace;
use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockInSettings {
    /// Low-pass cutoff before decimation (Hz).
    pub cutoff: f64,
    pub decimation: usize,
    pub order: usize,
}

impl Default for LockInSettings {
    fn default() -> Self {
        Self {
            cutoff: 1000.0,
            decimation: 50,
            order: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockInOutput {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `√(X² + Y²)`
    pub a: Vec<f64>,
    pub output_rate: f64,
    pub reference_frequency: f64,
    pub start_time: f64,
    /// Output samples at each end inside five filter time constants.
    pub settling: usize,
}

impl LockInOutput {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 / self.output_rate
    }

    /// Samples outside the settling margins.
    pub fn valid(&self) -> Range<usize> {
        let n = self.a.len();
        let s = self.settling.min(n / 2);
        s..n - s
    }

    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::with_capacity(self.len() * 64);
        out.push_str("t_s,X_V,Y_V,A_V\n");
        for k in 0..self.len() {
            out.push_str(&fmt_f64(self.time(k)));
            for v in [self.x[k], self.y[k], self.a[k]] {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
        out
    }
}

/// `X = 2·LP(s·cos ωt)`, `Y = 2·LP(s·sin ωt)` with a zero-phase Butterworth
/// low-pass, then decimation.
pub fn lockin_demodulate(
    trace: &TimeTrace,
    reference_frequency: f64,
    settings: &LockInSettings,
) -> Result<LockInOutput> {
    lockin_demodulate_phase(trace, reference_frequency, 0.0, settings)
}

/// Same as [`lockin_demodulate`] with the reference advanced by `phase` radians.
pub fn lockin_demodulate_phase(
    trace: &TimeTrace,
    reference_frequency: f64,
    phase: f64,
    settings: &LockInSettings,
) -> Result<LockInOutput> {
    let fs = trace.sample_rate();
    ensure_positive("lockin.reference_frequency", reference_frequency)?;
    ensure_positive("lockin.cutoff", settings.cutoff)?;
    if reference_frequency >= 0.5 * fs {
        return Err(Error::invalid("lockin.reference_frequency", "must lie below Nyquist"));
    }
    if settings.cutoff >= reference_frequency {
        return Err(Error::invalid(
            "lockin.cutoff",
            format!(
                "{} Hz must lie below the reference frequency {} Hz",
                settings.cutoff, reference_frequency
            ),
        ));
    }
    if settings.decimation == 0 {
        return Err(Error::invalid("lockin.decimation", "must be at least 1"));
    }
    let lp = Sos::butterworth(settings.order, settings.cutoff, fs, Kind::LowPass)?;
    let omega = 2.0 * PI * reference_frequency * trace.dt;
    let n = trace.len();
    let mut i_mix = Vec::with_capacity(n);
    let mut q_mix = Vec::with_capacity(n);
    for (k, &s) in trace.samples.iter().enumerate() {
        let (sin, cos) = (omega * k as f64 + phase).sin_cos();
        i_mix.push(2.0 * s * cos);
        q_mix.push(2.0 * s * sin);
    }
    let xf = lp.filtfilt(&i_mix)?;
    drop(i_mix);
    let yf = lp.filtfilt(&q_mix)?;
    drop(q_mix);
    let step = settings.decimation;
    let x: Vec<f64> = xf.iter().step_by(step).copied().collect();
    let y: Vec<f64> = yf.iter().step_by(step).copied().collect();
    let a = x.iter().zip(&y).map(|(x, y)| (x * x + y * y).sqrt()).collect();
    let output_rate = fs / step as f64;
    let settling = (settling_time(settings.cutoff, settings.order) * output_rate).ceil() as usize;
    Ok(LockInOutput {
        x,
        y,
        a,
        output_rate,
        reference_frequency,
        start_time: trace.start_time,
        settling,
    })
}
