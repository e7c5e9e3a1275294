//! Welch power spectral density.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Hz
    pub frequency: Vec<f64>,
    /// One-sided density (V²/Hz).
    pub density: Vec<f64>,
}

impl Spectrum {
    pub fn resolution(&self) -> f64 {
        if self.frequency.len() > 1 {
            self.frequency[1] - self.frequency[0]
        } else {
            0.0
        }
    }

    /// `∫ S df` over all bins.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution()
    }

    /// Mean density over bins with `f_lo <= f <= f_hi`.
    pub fn band_mean(&self, f_lo: f64, f_hi: f64) -> Result<f64> {
        let vals: Vec<f64> = self
            .frequency
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .map(|(_, s)| *s)
            .collect();
        if vals.is_empty() {
            return Err(Error::invalid("band", format!("no bins in [{f_lo}, {f_hi}] Hz")));
        }
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::from("frequency_Hz,psd_V2_per_Hz\n");
        for (f, s) in self.frequency.iter().zip(&self.density) {
            out.push_str(&format!("{},{}\n", fmt_f64(*f), fmt_f64(*s)));
        }
        out
    }
}

/// Averaged Hann-windowed periodogram, per-segment mean removed.
pub fn psd(series: &[f64], sample_rate: f64, segment: usize, overlap: usize) -> Result<Spectrum> {
    if segment < 2 {
        return Err(Error::invalid("psd.segment", "must be at least 2"));
    }
    if overlap >= segment {
        return Err(Error::invalid("psd.overlap", "must be smaller than the segment length"));
    }
    if series.len() < segment {
        return Err(Error::invalid(
            "series",
            format!("{} samples is shorter than one {segment}-sample segment", series.len()),
        ));
    }
    let window: Vec<f64> = (0..segment)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / segment as f64).cos())
        .collect();
    let wsum2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let step = segment - overlap;
    let mut count = 0usize;
    let mut start = 0usize;
    while start + segment <= series.len() {
        let seg = &series[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        for ((b, s), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((s - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf[..bins]) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (sample_rate * wsum2 * count as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let edge = k == 0 || (segment.is_multiple_of(2) && k == segment / 2);
            a * scale * if edge { 1.0 } else { 2.0 }
        })
        .collect();
    let frequency = (0..bins).map(|k| k as f64 * sample_rate / segment as f64).collect();
    Ok(Spectrum { frequency, density })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_has_single_peak() {
        let fs = 1000.0;
        let s: Vec<f64> = (0..8192).map(|k| (2.0 * PI * 125.0 * k as f64 / fs).sin()).collect();
        let sp = psd(&s, fs, 256, 128).unwrap();
        let (kmax, _) = sp
            .density
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (k, v)| if *v > b.1 { (k, *v) } else { b });
        assert_eq!(sp.frequency[kmax], 125.0);
        // Hann main lobe spans the peak and its neighbours.
        let off: f64 = sp
            .density
            .iter()
            .enumerate()
            .filter(|(k, _)| k.abs_diff(kmax) > 1)
            .map(|(_, v)| *v)
            .sum();
        assert!(off < 1e-6 * sp.density[kmax]);
    }

    #[test]
    fn parseval_for_tone() {
        let fs = 1000.0;
        let s: Vec<f64> = (0..8192).map(|k| 2.0 * (2.0 * PI * 125.0 * k as f64 / fs).sin()).collect();
        let sp = psd(&s, fs, 256, 128).unwrap();
        assert!((sp.total_power() / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn short_series_rejected() {
        assert!(psd(&[0.0; 10], 1.0, 16, 8).is_err());
        assert!(psd(&[0.0; 100], 1.0, 16, 16).is_err());
    }
}
