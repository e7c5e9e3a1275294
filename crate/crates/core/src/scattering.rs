//! Dipole scattering by a nanoparticle in the evanescent field, the sphere-cap
//! weight for particles comparable to the decay length, and the mapping from
//! scattered to collected power.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_index, ensure_positive, Error, Result};

pub const SILICA_PARTICLE_INDEX: f64 = 1.45;
pub const POLYSTYRENE_INDEX: f64 = 1.59;
pub const WATER_INDEX: f64 = 1.333;

/// Collection efficiency of one fiber end for a 100 nm particle.
pub const DEFAULT_COLLECTION_EFFICIENCY: f64 = 0.072;
/// Range of one-end collection efficiencies over 10-200 nm radii.
pub const COLLECTION_EFFICIENCY_BAND: (f64, f64) = (0.017, 0.081);
/// Probe waist consistent with 2 mW at ~7e7 W/m².
pub const DEFAULT_WAIST: f64 = 3.0e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub radius: f64,
    pub index: f64,
    pub material: String,
}

impl Particle {
    pub fn new(radius: f64, index: f64, material: impl Into<String>) -> Self {
        Self {
            radius,
            index,
            material: material.into(),
        }
    }

    pub fn silica(radius: f64) -> Self {
        Self::new(radius, SILICA_PARTICLE_INDEX, "silica")
    }

    pub fn polystyrene(radius: f64) -> Self {
        Self::new(radius, POLYSTYRENE_INDEX, "polystyrene")
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("particle.radius", self.radius)?;
        ensure_index("particle.index", self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Medium {
    pub index: f64,
    /// K
    pub temperature: f64,
    /// Pa·s
    pub viscosity: f64,
}

impl Medium {
    pub fn water() -> Self {
        Self {
            index: WATER_INDEX,
            temperature: 298.0,
            viscosity: 8.9e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_index("medium.index", self.index)?;
        ensure_positive("medium.temperature", self.temperature)?;
        ensure_positive("medium.viscosity", self.viscosity)
    }
}

impl Default for Medium {
    fn default() -> Self {
        Self::water()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeBeam {
    /// W
    pub power: f64,
    /// m
    pub waist: f64,
    /// Vacuum wavelength (m).
    pub wavelength: f64,
}

impl Default for ProbeBeam {
    fn default() -> Self {
        Self {
            power: 2.0e-3,
            waist: DEFAULT_WAIST,
            wavelength: 780e-9,
        }
    }
}

impl ProbeBeam {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("beam.power", self.power)?;
        ensure_positive("beam.waist", self.waist)?;
        ensure_positive("beam.wavelength", self.wavelength)
    }
}

/// Which wavenumber enters the dipole cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Wavevector {
    /// `k = 2π n_m / λ`
    #[default]
    Medium,
    /// `k = 2π / λ`
    Vacuum,
}

impl Wavevector {
    pub fn from_in_medium(in_medium: bool) -> Self {
        if in_medium {
            Wavevector::Medium
        } else {
            Wavevector::Vacuum
        }
    }

    pub fn wavenumber(self, wavelength: f64, medium_index: f64) -> f64 {
        match self {
            Wavevector::Medium => 2.0 * PI * medium_index / wavelength,
            Wavevector::Vacuum => 2.0 * PI / wavelength,
        }
    }
}

/// Dipole scattering cross-section `σ = 8π k⁴ a⁶ / 3 · ((m²−1)/(m²+2))²`.
pub fn dipole_cross_section(
    particle: &Particle,
    medium: &Medium,
    wavelength: f64,
    wavevector: Wavevector,
) -> Result<f64> {
    particle.validate()?;
    medium.validate()?;
    ensure_positive("wavelength", wavelength)?;
    let k = wavevector.wavenumber(wavelength, medium.index);
    let m2 = (particle.index / medium.index).powi(2);
    let polarizability = (m2 - 1.0) / (m2 + 2.0);
    Ok(8.0 * PI / 3.0 * k.powi(4) * particle.radius.powi(6) * polarizability * polarizability)
}

/// Power scattered out of a focused Gaussian probe, `σ P_in / (4π w²)`.
pub fn scattered_power(beam: &ProbeBeam, cross_section: f64) -> Result<f64> {
    beam.validate()?;
    if !(cross_section >= 0.0 && cross_section.is_finite()) {
        return Err(Error::invalid("cross_section", "must be non-negative"));
    }
    Ok(cross_section / (4.0 * PI * beam.waist * beam.waist) * beam.power)
}

/// How the evanescent field is averaged over the particle volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldWeighting {
    /// Volume average of `e^(−z/γ)`.
    #[default]
    Amplitude,
    /// Volume average of `e^(−2z/γ)`.
    Intensity,
}

impl FieldWeighting {
    fn effective_length(self, gamma: f64) -> f64 {
        match self {
            FieldWeighting::Amplitude => gamma,
            FieldWeighting::Intensity => 0.5 * gamma,
        }
    }
}

/// Mean of `e^(−z/γ)` over a sphere of radius `a` resting on the surface `z = 0`.
///
/// Closed form `3/(2x³)·(x − 1 + (x + 1)e^(−2x))` with `x = a/γ`; a series is
/// used for small `x` where the closed form cancels.
pub fn evanescent_weight(radius: f64, gamma: f64) -> Result<f64> {
    ensure_positive("radius", radius)?;
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    if gamma.is_infinite() {
        return Ok(1.0);
    }
    let x = radius / gamma;
    Ok(if x < 0.05 { weight_series(x) } else { weight_closed_form(x) })
}

fn weight_closed_form(x: f64) -> f64 {
    1.5 / (x * x * x) * (x - 1.0 + (x + 1.0) * (-2.0 * x).exp())
}

// e^(−x) · 3 i₁(x)/x, with 3 i₁(x)/x = Σ 3x^{2k} / ((2k+3)(2k+1)!)
fn weight_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        let kk = k as f64;
        term *= x2 / ((2.0 * kk) * (2.0 * kk + 1.0));
        sum += term * 3.0 / (2.0 * kk + 3.0);
    }
    (-x).exp() * sum
}

/// Same average as [`evanescent_weight`] by adaptive Simpson quadrature over
/// disk slices `π(2az − z²)`.
pub fn evanescent_weight_quadrature(radius: f64, gamma: f64) -> Result<f64> {
    ensure_positive("radius", radius)?;
    ensure_positive("gamma", gamma)?;
    let f = |z: f64| PI * (2.0 * radius * z - z * z) * (-z / gamma).exp();
    let volume = 4.0 / 3.0 * PI * radius.powi(3);
    let integral = adaptive_simpson(&f, 0.0, 2.0 * radius, 1e-13 * volume, 40);
    Ok(integral / volume)
}

pub fn weighted_evanescent_weight(radius: f64, gamma: f64, weighting: FieldWeighting) -> Result<f64> {
    evanescent_weight(radius, weighting.effective_length(gamma))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)
}

/// Power reaching one fiber end, `η · P_scatt`.
pub fn collected_power(scattered: f64, efficiency: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::invalid(
            "collection_efficiency",
            format!("must lie in [0, 1], got {efficiency}"),
        ));
    }
    if !(scattered >= 0.0 && scattered.is_finite()) {
        return Err(Error::invalid("scattered_power", "must be non-negative"));
    }
    Ok(efficiency * scattered)
}

/// Power detected with one or both ends of the fiber read out.
pub fn detected_power(scattered: f64, efficiency: f64, dual_end: bool) -> Result<f64> {
    let one_end = collected_power(scattered, efficiency)?;
    Ok(if dual_end { 2.0 * one_end } else { one_end })
}

/// One-end collection efficiency, constant or tabulated against radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CollectionEfficiency {
    Constant(f64),
    /// `(radius_m, efficiency)` pairs, interpolated linearly in `ln(radius)`
    /// and held constant outside the table.
    Table(Vec<(f64, f64)>),
}

impl Default for CollectionEfficiency {
    fn default() -> Self {
        CollectionEfficiency::Constant(DEFAULT_COLLECTION_EFFICIENCY)
    }
}

impl CollectionEfficiency {
    pub fn validate(&self) -> Result<()> {
        let check = |eta: f64| {
            if (0.0..=1.0).contains(&eta) {
                Ok(())
            } else {
                Err(Error::invalid("collection_efficiency", format!("{eta} outside [0, 1]")))
            }
        };
        match self {
            CollectionEfficiency::Constant(eta) => check(*eta),
            CollectionEfficiency::Table(rows) => {
                if rows.is_empty() {
                    return Err(Error::invalid("collection_efficiency", "empty table"));
                }
                for w in rows.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::invalid(
                            "collection_efficiency",
                            "table radii must be strictly ascending",
                        ));
                    }
                }
                for &(r, eta) in rows {
                    ensure_positive("collection_efficiency.radius", r)?;
                    check(eta)?;
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, radius: f64) -> f64 {
        match self {
            CollectionEfficiency::Constant(eta) => *eta,
            CollectionEfficiency::Table(rows) => {
                let first = rows[0];
                let last = rows[rows.len() - 1];
                if radius <= first.0 {
                    return first.1;
                }
                if radius >= last.0 {
                    return last.1;
                }
                let k = rows.windows(2).position(|w| radius <= w[1].0).unwrap_or(0);
                let (a, b) = (rows[k], rows[k + 1]);
                let t = (radius.ln() - a.0.ln()) / (b.0.ln() - a.0.ln());
                a.1 + t * (b.1 - a.1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions {
    pub wavevector: Wavevector,
    pub weighting: FieldWeighting,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            wavevector: Wavevector::Medium,
            weighting: FieldWeighting::Amplitude,
        }
    }
}

/// Signal amplitude against particle radius for the plain dipole model and the
/// evanescent-corrected model, both calibrated to agree at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusScalingCurve {
    pub radii: Vec<f64>,
    pub dipole: Vec<f64>,
    pub corrected: Vec<f64>,
    pub scattered_power: Vec<f64>,
    pub signal_power: Vec<f64>,
    /// `A = C √P_sig` for the dipole curve (amplitude per √W).
    pub calibration: f64,
    pub normalization_radius: f64,
}

impl RadiusScalingCurve {
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::from("radius_m,amplitude_dipole,amplitude_corrected,P_scatt_W,P_sig_W\n");
        for k in 0..self.radii.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(self.radii[k]),
                fmt_f64(self.dipole[k]),
                fmt_f64(self.corrected[k]),
                fmt_f64(self.scattered_power[k]),
                fmt_f64(self.signal_power[k])
            ));
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
pub fn radius_scaling_curve(
    radii: &[f64],
    particle_index: f64,
    medium: &Medium,
    beam: &ProbeBeam,
    gamma: f64,
    efficiency: &CollectionEfficiency,
    normalization_radius: f64,
    options: &ScalingOptions,
) -> Result<RadiusScalingCurve> {
    if radii.is_empty() {
        return Err(Error::invalid("radii", "must not be empty"));
    }
    for w in radii.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("radii", "must be strictly ascending"));
        }
    }
    for &r in radii {
        ensure_positive("radii", r)?;
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    efficiency.validate()?;
    let norm_at = radii
        .iter()
        .position(|&r| (r - normalization_radius).abs() <= 1e-9 * normalization_radius.abs())
        .ok_or_else(|| {
            Error::invalid(
                "normalization_radius",
                format!("{normalization_radius:e} m is not one of the sweep radii"),
            )
        })?;

    let mut scattered = Vec::with_capacity(radii.len());
    let mut signal = Vec::with_capacity(radii.len());
    let mut weights = Vec::with_capacity(radii.len());
    for &a in radii {
        let particle = Particle::new(a, particle_index, "");
        let sigma = dipole_cross_section(&particle, medium, beam.wavelength, options.wavevector)?;
        let p_scatt = scattered_power(beam, sigma)?;
        scattered.push(p_scatt);
        signal.push(collected_power(p_scatt, efficiency.at(a))?);
        weights.push(weighted_evanescent_weight(a, gamma, options.weighting)?);
    }
    let raw_dipole: Vec<f64> = signal.iter().map(|p| p.sqrt()).collect();
    let raw_corrected: Vec<f64> = raw_dipole.iter().zip(&weights).map(|(a, w)| a * w).collect();
    if !(raw_dipole[norm_at] > 0.0) {
        return Err(Error::invalid("normalization_radius", "signal vanishes there"));
    }
    let calibration = 1.0 / raw_dipole[norm_at];
    let corrected_scale = 1.0 / raw_corrected[norm_at];
    Ok(RadiusScalingCurve {
        radii: radii.to_vec(),
        dipole: raw_dipole.iter().map(|a| a * calibration).collect(),
        corrected: raw_corrected.iter().map(|a| a * corrected_scale).collect(),
        scattered_power: scattered,
        signal_power: signal,
        calibration,
        normalization_radius: radii[norm_at],
    })
}
