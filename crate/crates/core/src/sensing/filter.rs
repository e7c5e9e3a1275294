//! Butterworth filters as cascaded biquads, with zero-phase forward-backward
//! application.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Biquad coefficients, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex gain at normalized angular frequency `w` (rad/sample), as magnitude².
    fn gain2(&self, w: f64) -> f64 {
        let (c1, s1) = (w.cos(), w.sin());
        let (c2, s2) = ((2.0 * w).cos(), (2.0 * w).sin());
        let nr = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let ni = -(self.b[1] * s1 + self.b[2] * s2);
        let dr = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let di = -(self.a[0] * s1 + self.a[1] * s2);
        (nr * nr + ni * ni) / (dr * dr + di * di)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form state for a constant input of 1.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    LowPass,
    HighPass,
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    /// Slowest pole time constant, in samples.
    pub time_constant: f64,
}

impl Sos {
    /// Digital Butterworth of even `order` via the prewarped bilinear transform.
    pub fn butterworth(order: usize, cutoff: f64, sample_rate: f64, kind: Kind) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::invalid("filter.order", "must be a positive even number"));
        }
        if !(cutoff > 0.0 && cutoff < 0.5 * sample_rate) {
            return Err(Error::invalid(
                "filter.cutoff",
                format!("{cutoff} Hz must lie in (0, {}) Hz", 0.5 * sample_rate),
            ));
        }
        let k = (PI * cutoff / sample_rate).tan();
        let k2 = k * k;
        let sections = (0..order / 2)
            .map(|i| {
                let q = 1.0 / (2.0 * ((2 * i + 1) as f64 * PI / (2 * order) as f64).sin());
                let norm = 1.0 / (1.0 + k / q + k2);
                let a = [2.0 * (k2 - 1.0) * norm, (1.0 - k / q + k2) * norm];
                let b = match kind {
                    Kind::LowPass => [k2 * norm, 2.0 * k2 * norm, k2 * norm],
                    Kind::HighPass => [norm, -2.0 * norm, norm],
                };
                Biquad { b, a }
            })
            .collect();
        Ok(Self {
            sections,
            time_constant: time_constant(cutoff, order) * sample_rate,
        })
    }

    pub fn then(mut self, other: Sos) -> Self {
        self.sections.extend(other.sections);
        self.time_constant = self.time_constant.max(other.time_constant);
        self
    }

    /// Single-pass `|H(f)|²`.
    pub fn gain2(&self, frequency: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * frequency / sample_rate;
        self.sections.iter().map(|s| s.gain2(w)).product()
    }

    /// Forward-backward `|H(f)|²`, i.e. `|H(f)|⁴` of one pass.
    pub fn zero_phase_gain2(&self, frequency: f64, sample_rate: f64) -> f64 {
        self.gain2(frequency, sample_rate).powi(2)
    }

    /// Causal filtering with each section started in steady state for `x0`.
    fn run(&self, x: &mut [f64], x0: f64) {
        let mut level = x0;
        for s in &self.sections {
            let zi = s.step_state();
            let (mut z1, mut z2) = (zi[0] * level, zi[1] * level);
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            for v in x.iter_mut() {
                let xi = *v;
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                *v = y;
            }
            level *= s.dc_gain();
        }
    }

    /// Edge padding used by [`Sos::filtfilt`]: five time constants.
    pub fn pad_length(&self) -> usize {
        (3 * (2 * self.sections.len() + 1)).max((5.0 * self.time_constant).ceil() as usize)
    }

    /// Zero-phase filtering with odd reflection at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let min = 3 * (2 * self.sections.len() + 1);
        if x.len() <= min {
            return Err(Error::invalid(
                "series",
                format!("needs more than {min} samples for zero-phase filtering"),
            ));
        }
        let pad = self.pad_length().min(x.len() - 1);
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));

        let first = ext[0];
        self.run(&mut ext, first);
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, first);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Decay time of the slowest pole of a Butterworth filter, `1/(ω_c sin(π/2n))`.
pub fn time_constant(cutoff: f64, order: usize) -> f64 {
    1.0 / (2.0 * PI * cutoff * (PI / (2 * order) as f64).sin())
}

/// Five time constants.
pub fn settling_time(cutoff: f64, order: usize) -> f64 {
    5.0 * time_constant(cutoff, order)
}

/// 4th-order zero-phase band-pass between `f_lo` and `f_hi`.
pub fn bandpass_filter(f_lo: f64, f_hi: f64, sample_rate: f64) -> Result<Sos> {
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < 0.5 * sample_rate) {
        return Err(Error::invalid(
            "bandpass",
            format!(
                "need 0 < f_lo < f_hi < {} Hz, got [{f_lo}, {f_hi}]",
                0.5 * sample_rate
            ),
        ));
    }
    let hp = Sos::butterworth(4, f_lo, sample_rate, Kind::HighPass)?;
    let lp = Sos::butterworth(4, f_hi, sample_rate, Kind::LowPass)?;
    Ok(hp.then(lp))
}

/// Zero-phase 4th-order band-pass, 4–100 Hz by default.
pub fn bandpass(series: &[f64], sample_rate: f64, f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
    bandpass_filter(f_lo, f_hi, sample_rate)?.filtfilt(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_half_power_at_cutoff() {
        let f = Sos::butterworth(4, 1000.0, 100e3, Kind::LowPass).unwrap();
        assert!((f.gain2(1000.0, 100e3) - 0.5).abs() < 1e-12);
        assert!((f.gain2(0.0, 100e3) - 1.0).abs() < 1e-12);
        let h = Sos::butterworth(4, 4.0, 2000.0, Kind::HighPass).unwrap();
        assert!((h.gain2(4.0, 2000.0) - 0.5).abs() < 1e-12);
        assert!(h.gain2(0.0, 2000.0) < 1e-30);
    }

    #[test]
    fn odd_order_rejected() {
        assert!(Sos::butterworth(3, 10.0, 100.0, Kind::LowPass).is_err());
        assert!(Sos::butterworth(4, 60.0, 100.0, Kind::LowPass).is_err());
    }

    #[test]
    fn lowpass_passes_constant() {
        let f = Sos::butterworth(4, 50.0, 1000.0, Kind::LowPass).unwrap();
        let y = f.filtfilt(&vec![2.5; 500]).unwrap();
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-9));
    }

    #[test]
    fn bandpass_response_limits() {
        let fs = 2000.0;
        let bp = bandpass_filter(4.0, 100.0, fs).unwrap();
        let db = |f: f64| 10.0 * bp.zero_phase_gain2(f, fs).log10();
        assert!(db(2.0) <= -40.0, "{}", db(2.0));
        for f in [8.0, 12.0, 20.0, 35.0, 50.0] {
            assert!(db(f).abs() <= 0.5, "{f}: {}", db(f));
        }
        assert!(bandpass_filter(100.0, 4.0, fs).is_err());
        assert!(bandpass_filter(4.0, 1000.0, fs).is_err());
    }

    #[test]
    fn bandpass_removes_dc() {
        let y = bandpass(&vec![1.0; 20_000], 2000.0, 4.0, 100.0).unwrap();
        assert!(y.iter().all(|v| v.abs() <= 0.01), "{:?}", y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
}
