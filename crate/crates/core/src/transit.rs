//! Brownian transits of suspended particles through the evanescent
//! interaction region, producing signal-power envelopes with ground truth.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::rng::stream_rng;
use crate::scattering::{
    collected_power, dipole_cross_section, scattered_power, weighted_evanescent_weight, Medium,
    Particle, ProbeBeam, ScalingOptions,
};
use crate::sensing::{Envelope, Interval};
use crate::BOLTZMANN;

/// Fraction of the contact maximum above which the envelope counts as an event.
pub const EVENT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Suspension {
    pub particle: Particle,
    /// Particles per m³.
    pub concentration: f64,
    pub medium: Medium,
}

/// Converts particles per mL to per m³, optionally diluted by a droplet of
/// `sample_ul` added to `volume_ul`.
pub fn concentration_per_m3(per_ml: f64, dilution: Option<(f64, f64)>) -> f64 {
    let factor = match dilution {
        Some((sample, volume)) => sample / (sample + volume),
        None => 1.0,
    };
    per_ml * 1e6 * factor
}

/// Stokes–Einstein `k_B T / (6π η a)`.
pub fn diffusion_coefficient(particle: &Particle, medium: &Medium) -> Result<f64> {
    particle.validate()?;
    medium.validate()?;
    Ok(BOLTZMANN * medium.temperature / (6.0 * PI * medium.viscosity * particle.radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Reflective,
}

/// Box above the fiber surface, centred on the probe spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionRegion {
    /// Along the fiber axis (m).
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl InteractionRegion {
    /// 10 μm × 6 μm × 4γ.
    pub fn for_decay_length(gamma: f64) -> Self {
        Self {
            length: 10e-6,
            width: 6e-6,
            height: 4.0 * gamma,
        }
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitConfig {
    pub duration: f64,
    pub timestep: f64,
    pub region: InteractionRegion,
    pub seed: u64,
    pub boundary: Boundary,
}

impl TransitConfig {
    pub fn validate(&self, gamma: f64) -> Result<()> {
        ensure_positive("transit.duration", self.duration)?;
        ensure_positive("transit.timestep", self.timestep)?;
        ensure_positive("transit.region.length", self.region.length)?;
        ensure_positive("transit.region.width", self.region.width)?;
        ensure_positive("transit.region.height", self.region.height)?;
        if self.region.height < 4.0 * gamma * (1.0 - 1e-12) {
            return Err(Error::invalid(
                "transit.region.height",
                format!("{:e} m is below four decay lengths ({:e} m)", self.region.height, 4.0 * gamma),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.timestep).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitResult {
    pub envelope: Envelope,
    pub events: Vec<Interval>,
    pub particles: usize,
    /// `η P_scatt W²`, the envelope of one particle touching the surface at the beam centre (W).
    pub contact_power: f64,
}

/// Single-particle contact power `η · P_scatt · W(a, γ)²`.
pub fn contact_power(
    particle: &Particle,
    medium: &Medium,
    beam: &ProbeBeam,
    gamma: f64,
    efficiency: f64,
    options: &ScalingOptions,
) -> Result<f64> {
    let sigma = dipole_cross_section(particle, medium, beam.wavelength, options.wavevector)?;
    let p = collected_power(scattered_power(beam, sigma)?, efficiency)?;
    let w = weighted_evanescent_weight(particle.radius, gamma, options.weighting)?;
    Ok(p * w * w)
}

pub fn simulate_transits(
    suspension: &Suspension,
    gamma: f64,
    beam: &ProbeBeam,
    efficiency: f64,
    cfg: &TransitConfig,
) -> Result<TransitResult> {
    simulate_transits_with(suspension, gamma, beam, efficiency, cfg, &ScalingOptions::default())
}

/// Poisson particle count, uniform initial positions, then Brownian motion.
pub fn simulate_transits_with(
    suspension: &Suspension,
    gamma: f64,
    beam: &ProbeBeam,
    efficiency: f64,
    cfg: &TransitConfig,
    options: &ScalingOptions,
) -> Result<TransitResult> {
    if !(suspension.concentration >= 0.0 && suspension.concentration.is_finite()) {
        return Err(Error::invalid("suspension.concentration", "must be non-negative"));
    }
    cfg.validate(gamma)?;
    let d = diffusion_coefficient(&suspension.particle, &suspension.medium)?;
    let contact = contact_power(&suspension.particle, &suspension.medium, beam, gamma, efficiency, options)?;
    let mut rng = stream_rng(cfg.seed, 0);
    let mean = suspension.concentration * cfg.region.volume();
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::invalid("suspension.concentration", e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let r = cfg.region;
    let positions: Vec<[f64; 3]> = (0..count)
        .map(|_| {
            [
                (rng.random::<f64>() - 0.5) * r.length,
                (rng.random::<f64>() - 0.5) * r.width,
                rng.random::<f64>() * r.height,
            ]
        })
        .collect();
    simulate_particles(&positions, d, contact, gamma, beam.waist, cfg)
}

/// Brownian motion from given start positions `[x, y, d]`; `d` is the gap to
/// the fiber surface.
pub fn simulate_particles(
    start: &[[f64; 3]],
    diffusion: f64,
    contact_power: f64,
    gamma: f64,
    waist: f64,
    cfg: &TransitConfig,
) -> Result<TransitResult> {
    cfg.validate(gamma)?;
    ensure_positive("beam.waist", waist)?;
    if !(diffusion >= 0.0 && diffusion.is_finite()) {
        return Err(Error::invalid("diffusion", "must be non-negative"));
    }
    let step = (2.0 * diffusion * cfg.timestep).sqrt();
    if step > gamma {
        return Err(Error::TimestepTooLarge {
            step_m: step,
            gamma_m: gamma,
        });
    }
    let r = cfg.region;
    let half = [0.5 * r.length, 0.5 * r.width];
    for p in start {
        let inside = p[0].abs() <= half[0] && p[1].abs() <= half[1] && p[2] >= 0.0 && p[2] <= r.height;
        if !inside {
            return Err(Error::invalid("transit.start", "particle starts outside the region"));
        }
    }
    let mut pos = start.to_vec();
    let mut rng = stream_rng(cfg.seed, 1);
    let n = cfg.steps();
    let inv_w2 = 2.0 / (waist * waist);
    let inv_g = 2.0 / gamma;
    let mut power = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 && step > 0.0 {
            for p in pos.iter_mut() {
                for (axis, lim) in [(0usize, (-half[0], half[0])), (1, (-half[1], half[1])), (2, (0.0, r.height))] {
                    let dz: f64 = rng.sample(StandardNormal);
                    p[axis] = reflect(p[axis] + step * dz, lim.0, lim.1);
                }
            }
        }
        let total: f64 = pos
            .iter()
            .map(|p| (-(p[2] * inv_g) - (p[0] * p[0] + p[1] * p[1]) * inv_w2).exp())
            .sum();
        power.push(contact_power * total);
    }
    let envelope = Envelope {
        power,
        dt: cfg.timestep,
        start_time: 0.0,
    };
    let events = threshold_intervals(&envelope, EVENT_FRACTION * contact_power);
    Ok(TransitResult {
        envelope,
        events,
        particles: pos.len(),
        contact_power,
    })
}

fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    // Fold into [lo, lo + 2·span) then mirror the upper half.
    v = (v - lo).rem_euclid(2.0 * span);
    if v > span {
        v = 2.0 * span - v;
    }
    lo + v
}

/// Runs of samples strictly above `level`.
pub fn threshold_intervals(envelope: &Envelope, level: f64) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let t = |k: usize| envelope.start_time + k as f64 * envelope.dt;
    for (k, &p) in envelope.power.iter().enumerate() {
        match (open, p > level) {
            (None, true) => open = Some(k),
            (Some(s), false) => {
                out.push(Interval { start: t(s), end: t(k) });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push(Interval {
            start: t(s),
            end: t(envelope.power.len()),
        });
    }
    out
}

pub fn envelope_csv(envelope: &Envelope) -> String {
    use crate::io::fmt_f64;
    let mut out = String::with_capacity(envelope.power.len() * 32);
    out.push_str("t_s,P_sig_W\n");
    for (k, p) in envelope.power.iter().enumerate() {
        out.push_str(&fmt_f64(envelope.start_time + k as f64 * envelope.dt));
        out.push(',');
        out.push_str(&fmt_f64(*p));
        out.push('\n');
    }
    out
}

/// Ground truth in the detection record layout; peak and SNR are unknown here.
pub fn truth_csv(events: &[Interval]) -> String {
    use crate::io::fmt_f64;
    let mut out = String::from("start_s,end_s,peak_sigma,snr\n");
    for e in events {
        out.push_str(&format!("{},{},nan,nan\n", fmt_f64(e.start), fmt_f64(e.end)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> TransitConfig {
        TransitConfig {
            duration: 0.05,
            timestep: 1e-4,
            region: InteractionRegion::for_decay_length(93e-9),
            seed,
            boundary: Boundary::Reflective,
        }
    }

    #[test]
    fn stokes_einstein_50nm() {
        let d = diffusion_coefficient(&Particle::silica(50e-9), &Medium::water()).unwrap();
        // 1.380649e-23·298 / (6π·8.9e-4·5e-8) = 4.905e-12
        assert!((d / 4.905e-12 - 1.0).abs() < 1e-3, "{d:e}");
        let d2 = diffusion_coefficient(&Particle::silica(100e-9), &Medium::water()).unwrap();
        assert!((d2 - 0.5 * d).abs() < 1e-24);
    }

    #[test]
    fn reflect_stays_inside() {
        assert!((reflect(-0.2, 0.0, 1.0) - 0.2).abs() < 1e-15);
        assert!((reflect(1.3, 0.0, 1.0) - 0.7).abs() < 1e-15);
        assert!((reflect(2.6, 0.0, 1.0) - 0.6).abs() < 1e-12);
        assert_eq!(reflect(0.4, 0.0, 1.0), 0.4);
    }

    #[test]
    fn empty_suspension() {
        let s = Suspension {
            particle: Particle::silica(50e-9),
            concentration: 0.0,
            medium: Medium::water(),
        };
        let r = simulate_transits(&s, 93e-9, &ProbeBeam::default(), 0.072, &cfg(1)).unwrap();
        assert_eq!(r.particles, 0);
        assert!(r.envelope.power.iter().all(|p| *p == 0.0));
        assert!(r.events.is_empty());
    }

    #[test]
    fn pinned_particle_is_constant() {
        let c = 2.5e-13;
        let r = simulate_particles(&[[0.0, 0.0, 0.0]], 0.0, c, 93e-9, 3e-6, &cfg(2)).unwrap();
        assert!(r.envelope.power.iter().all(|p| *p == c));
        assert_eq!(r.events.len(), 1);
    }

    #[test]
    fn coarse_timestep_rejected() {
        let mut c = cfg(0);
        c.timestep = 1.0;
        assert!(matches!(
            simulate_particles(&[[0.0, 0.0, 0.0]], 5e-12, 1.0, 93e-9, 3e-6, &c),
            Err(Error::TimestepTooLarge { .. })
        ));
    }

    #[test]
    fn short_region_rejected() {
        let mut c = cfg(0);
        c.region.height = 100e-9;
        assert!(c.validate(93e-9).is_err());
    }

    #[test]
    fn droplet_dilution_helper() {
        let c = concentration_per_m3(3.7e9, Some((40.0, 600.0)));
        assert!((c - 3.7e15 / 16.0).abs() < 1.0);
    }
}
