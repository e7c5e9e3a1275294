//! Heterodyne measurement chain: photocurrent synthesis, lock-in
//! demodulation, band-pass, spectra, noise fits and event detection.

pub mod detect;
pub mod filter;
pub mod fit;
pub mod heterodyne;
pub mod lockin;
pub mod psd;
pub mod trace_io;

pub use detect::{
    amplitude_upcrossing_rate, band_limit, detect_events, events_csv, normalize,
    predicted_quadrature_moments, score_events, Band, BandLimited, DetectionEvent,
    DetectionSettings, NoiseReference, NormalizedOutput, QuadratureMoments, Score,
};
pub use filter::bandpass;
pub use fit::{noise_linearity_fit, LinearFit};
pub use heterodyne::{synthesize_photocurrent, Envelope, HeterodyneConfig, Interval, NoiseBudget, TimeTrace};
pub use lockin::{lockin_demodulate, lockin_demodulate_phase, LockInOutput, LockInSettings};
pub use psd::{psd, Spectrum};
pub use trace_io::{trace_from_csv, trace_to_csv};

use crate::error::Result;

/// Demodulates and band-passes a trace.
pub fn demodulate_band(
    trace: &TimeTrace,
    cfg: &HeterodyneConfig,
    lockin: &LockInSettings,
    band: &Band,
) -> Result<BandLimited> {
    let out = lockin_demodulate(trace, cfg.beat_frequency, lockin)?;
    band_limit(&out, band)
}

/// Quantum-noise σ from a particle-free trace synthesized with `seed`.
pub fn reference_from_noise(
    n_samples: usize,
    cfg: &HeterodyneConfig,
    noise: &NoiseBudget,
    lockin: &LockInSettings,
    band: &Band,
    seed: u64,
) -> Result<NoiseReference> {
    let env = Envelope::zeros(n_samples, cfg.dt());
    let trace = synthesize_photocurrent(&env, cfg, noise, seed)?;
    NoiseReference::from_quadratures(&demodulate_band(&trace, cfg, lockin, band)?)
}
