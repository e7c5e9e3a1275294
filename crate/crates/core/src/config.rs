//! Run configuration: strict TOML parsing, default resolution and emission.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{
    decay_length, ExposedCoreShape, FiberGeometry, GridSpec, SolverSettings, RECOMMENDED_MARGIN,
    SILICA_INDEX, WATER_INDEX,
};
use crate::scattering::{
    CollectionEfficiency, FieldWeighting, Medium, Particle, ProbeBeam, ScalingOptions, Wavevector,
    POLYSTYRENE_INDEX, SILICA_PARTICLE_INDEX,
};
use crate::sensing::{Band, DetectionSettings, HeterodyneConfig, LockInSettings, NoiseBudget};
use crate::transit::{concentration_per_m3, Boundary, InteractionRegion, TransitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    #[default]
    ExposedCore,
    StepIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub kind: GeometryKind,
    pub core_diameter: f64,
    pub core_index: f64,
    /// Index filling the two internal holes; the open hole holds the medium.
    pub internal_hole_index: f64,
    pub shape: ExposedCoreShape,
    pub n_modes: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            kind: GeometryKind::ExposedCore,
            core_diameter: 2e-6,
            core_index: SILICA_INDEX,
            internal_hole_index: WATER_INDEX,
            shape: ExposedCoreShape::default(),
            n_modes: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub spacing: f64,
    /// Background on every side of the core (m); ignored when `extent` is set.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 2]>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            spacing: 20e-9,
            margin: RECOMMENDED_MARGIN,
            extent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleSection {
    pub material: String,
    /// Filled from the material name when omitted.
    pub index: Option<f64>,
    pub radius: f64,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self {
            material: "silica".into(),
            index: None,
            radius: 50e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringSection {
    pub wavevector_in_medium: bool,
    pub weighting: FieldWeighting,
    pub collection_efficiency: CollectionEfficiency,
}

impl Default for ScatteringSection {
    fn default() -> Self {
        Self {
            wavevector_in_medium: true,
            weighting: FieldWeighting::Amplitude,
            collection_efficiency: CollectionEfficiency::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub electronic_psd: f64,
    /// `2 e R G²` when omitted.
    pub shot_coefficient: Option<f64>,
    pub flicker_corner: f64,
    /// Set so the 1/f term meets the LO-only white floor at the corner when omitted.
    pub flicker_amplitude: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            electronic_psd: 3e-15,
            shot_coefficient: None,
            flicker_corner: 4.0,
            flicker_amplitude: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitSection {
    pub duration: f64,
    pub timestep: f64,
    pub length: f64,
    pub width: f64,
    /// Four decay lengths when omitted.
    pub height: Option<f64>,
    /// Stock concentration (particles per mL).
    pub concentration_per_ml: f64,
    /// `[sample_uL, volume_uL]` droplet dilution applied to the stock.
    pub dilution: Option<[f64; 2]>,
    pub boundary: Boundary,
}

impl Default for TransitSection {
    fn default() -> Self {
        Self {
            duration: 2.0,
            timestep: 1e-4,
            length: 10e-6,
            width: 6e-6,
            height: None,
            concentration_per_ml: 3.7e9,
            dilution: Some([40.0, 600.0]),
            boundary: Boundary::Reflective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub threshold: f64,
    pub min_separation: f64,
    /// Trace to analyse; a particle-free trace is synthesized when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Particle-free trace fixing σ; synthesized when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    /// Length of synthesized traces (s).
    pub duration: f64,
    /// Length of the synthesized reference (s).
    pub reference_duration: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            threshold: 5.0,
            min_separation: 0.01,
            trace: None,
            reference: None,
            duration: 20.0,
            reference_duration: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Particle radii for `scaling` (m).
    pub radii: Vec<f64>,
    pub normalization_radius: f64,
    /// Core diameters solved by `modes` and `profile`; empty means the geometry's own.
    pub core_diameters: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            radii: (1..=20).map(|k| k as f64 / 1e8).collect(),
            normalization_radius: 50e-9,
            core_diameters: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseFitSection {
    /// LO powers per photodiode (W).
    pub lo_powers: Vec<f64>,
    pub samples: usize,
    pub segment: usize,
    /// Band averaged for each PSD (Hz).
    pub band: [f64; 2],
}

impl Default for NoiseFitSection {
    fn default() -> Self {
        Self {
            lo_powers: vec![0.1e-3, 0.325e-3, 0.55e-3, 0.775e-3, 1.0e-3],
            samples: 1 << 22,
            segment: 4096,
            band: [1e3, 11e3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub geometry: GeometrySection,
    pub grid: GridSection,
    pub solver: SolverSettings,
    pub particle: ParticleSection,
    pub medium: Medium,
    pub beam: ProbeBeam,
    pub scattering: ScatteringSection,
    pub heterodyne: HeterodyneConfig,
    pub noise: NoiseSection,
    pub lockin: LockInSettings,
    pub bandpass: Band,
    pub transit: TransitSection,
    pub detection: DetectionSection,
    pub sweep: SweepSection,
    pub noisefit: NoiseFitSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("out"),
            geometry: GeometrySection::default(),
            grid: GridSection::default(),
            solver: SolverSettings::default(),
            particle: ParticleSection::default(),
            medium: Medium::water(),
            beam: ProbeBeam::default(),
            scattering: ScatteringSection::default(),
            heterodyne: HeterodyneConfig::default(),
            noise: NoiseSection::default(),
            lockin: LockInSettings::default(),
            bandpass: Band::default(),
            transit: TransitSection::default(),
            detection: DetectionSection::default(),
            sweep: SweepSection::default(),
            noisefit: NoiseFitSection::default(),
        }
    }
}

/// Reads, resolves and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = crate::io::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::new(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path: if path == "." { String::new() } else { path },
            message: e.into_inner().message().trim().to_string(),
        }
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

/// Resolved config as TOML; parsing it back gives the same config.
pub fn emit_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config {
        path: String::new(),
        message: e.to_string(),
    })
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            path: name.to_string(),
            message: reason,
        },
        other => other,
    }
}

impl RunConfig {
    /// Fills derived defaults and checks ranges, reporting the key path.
    pub fn resolve(&mut self) -> Result<()> {
        if self.particle.index.is_none() {
            self.particle.index = Some(match self.particle.material.as_str() {
                "silica" => SILICA_PARTICLE_INDEX,
                "polystyrene" => POLYSTYRENE_INDEX,
                other => {
                    return Err(Error::Config {
                        path: "particle.index".into(),
                        message: format!("required for material `{other}`"),
                    })
                }
            });
        }
        if self.noise.shot_coefficient.is_none() {
            self.noise.shot_coefficient = Some(self.heterodyne.shot_noise_coefficient());
        }
        if self.noise.flicker_amplitude.is_none() {
            let mut budget = self.noise_budget_unchecked();
            budget.flicker_amplitude = 0.0;
            self.noise.flicker_amplitude =
                Some(budget.white_psd(&self.heterodyne, 0.0) * self.noise.flicker_corner);
        }
        if self.transit.height.is_none() {
            self.transit.height = Some(4.0 * self.decay_length()?);
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        let check = |r: Result<()>| r.map_err(config_err);
        let pos = |name: &'static str, v: f64| check(crate::error::ensure_positive(name, v));
        pos("geometry.core_diameter", self.geometry.core_diameter)?;
        check(crate::error::ensure_index("geometry.core_index", self.geometry.core_index))?;
        check(crate::error::ensure_index(
            "geometry.internal_hole_index",
            self.geometry.internal_hole_index,
        ))?;
        if self.geometry.n_modes == 0 {
            return Err(config_err(Error::invalid("geometry.n_modes", "must be at least 1")));
        }
        pos("grid.spacing", self.grid.spacing)?;
        if !(self.grid.margin >= 0.0) {
            return Err(config_err(Error::invalid("grid.margin", "must be non-negative")));
        }
        if let Some([w, h]) = self.grid.extent {
            pos("grid.extent", w)?;
            pos("grid.extent", h)?;
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_krylov < 2 || self.solver.check_interval == 0 {
            return Err(config_err(Error::invalid(
                "solver",
                "tolerance > 0, max_krylov >= 2 and check_interval >= 1 required",
            )));
        }
        check(self.particle().validate())?;
        check(self.medium.validate())?;
        check(self.beam.validate())?;
        self.scattering.collection_efficiency.validate().map_err(|e| Error::Config {
            path: "scattering.collection_efficiency".into(),
            message: match e {
                Error::InvalidParameter { reason, .. } => reason,
                other => other.to_string(),
            },
        })?;
        check(self.heterodyne.validate())?;
        check(self.noise_budget_unchecked().validate())?;
        pos("lockin.cutoff", self.lockin.cutoff)?;
        if self.lockin.cutoff >= self.heterodyne.beat_frequency {
            return Err(config_err(Error::invalid(
                "lockin.cutoff",
                "must lie below heterodyne.beat_frequency",
            )));
        }
        if self.lockin.decimation == 0 || self.lockin.order == 0 || !self.lockin.order.is_multiple_of(2) {
            return Err(config_err(Error::invalid(
                "lockin",
                "decimation >= 1 and an even order required",
            )));
        }
        let out_rate = self.heterodyne.sample_rate / self.lockin.decimation as f64;
        if !(self.bandpass.f_lo > 0.0 && self.bandpass.f_lo < self.bandpass.f_hi && self.bandpass.f_hi < 0.5 * out_rate) {
            return Err(config_err(Error::invalid(
                "bandpass",
                format!("need 0 < f_lo < f_hi < {} Hz", 0.5 * out_rate),
            )));
        }
        check(self.transit_config(0).and_then(|c| c.validate(self.decay_length()?)))?;
        if !(self.transit.concentration_per_ml >= 0.0) {
            return Err(config_err(Error::invalid("transit.concentration_per_ml", "must be non-negative")));
        }
        if let Some([a, b]) = self.transit.dilution {
            if !(a > 0.0 && b >= 0.0) {
                return Err(config_err(Error::invalid("transit.dilution", "needs sample > 0, volume >= 0")));
            }
        }
        if !(self.detection.threshold >= 0.0) {
            return Err(config_err(Error::invalid("detection.threshold", "must be non-negative")));
        }
        if !(self.detection.min_separation >= 0.0) {
            return Err(config_err(Error::invalid("detection.min_separation", "must be non-negative")));
        }
        pos("detection.duration", self.detection.duration)?;
        pos("detection.reference_duration", self.detection.reference_duration)?;
        if self.sweep.radii.is_empty() || self.sweep.radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config_err(Error::invalid("sweep.radii", "must be non-empty and strictly ascending")));
        }
        for &r in &self.sweep.radii {
            pos("sweep.radii", r)?;
        }
        for &d in &self.sweep.core_diameters {
            pos("sweep.core_diameters", d)?;
        }
        if self.noisefit.lo_powers.len() < 3 {
            return Err(config_err(Error::invalid("noisefit.lo_powers", "needs at least 3 powers")));
        }
        for &p in &self.noisefit.lo_powers {
            pos("noisefit.lo_powers", p)?;
        }
        if self.noisefit.segment < 16 || self.noisefit.samples < self.noisefit.segment {
            return Err(config_err(Error::invalid(
                "noisefit",
                "segment >= 16 and samples >= segment required",
            )));
        }
        let [lo, hi] = self.noisefit.band;
        if !(lo >= 0.0 && hi > lo && hi <= 0.5 * self.heterodyne.sample_rate) {
            return Err(config_err(Error::invalid("noisefit.band", "need 0 <= lo < hi <= Nyquist")));
        }
        Ok(())
    }

    pub fn decay_length(&self) -> Result<f64> {
        decay_length(self.beam.wavelength, self.medium.index).map_err(config_err)
    }

    pub fn particle(&self) -> Particle {
        Particle::new(
            self.particle.radius,
            self.particle.index.unwrap_or(SILICA_PARTICLE_INDEX),
            self.particle.material.clone(),
        )
    }

    pub fn fiber_geometry(&self, core_diameter: f64) -> FiberGeometry {
        let g = &self.geometry;
        match g.kind {
            GeometryKind::ExposedCore => FiberGeometry::exposed_core(
                core_diameter,
                g.core_index,
                self.medium.index,
                g.internal_hole_index,
                &g.shape,
            ),
            GeometryKind::StepIndex => FiberGeometry::step_index(core_diameter, g.core_index, self.medium.index),
        }
    }

    pub fn grid_spec(&self, geometry: &FiberGeometry) -> GridSpec {
        match self.grid.extent {
            Some(extent) => GridSpec {
                spacing: self.grid.spacing,
                extent,
            },
            None => GridSpec::with_margin(geometry, self.grid.spacing, self.grid.margin),
        }
    }

    pub fn core_diameters(&self) -> Vec<f64> {
        if self.sweep.core_diameters.is_empty() {
            vec![self.geometry.core_diameter]
        } else {
            self.sweep.core_diameters.clone()
        }
    }

    pub fn scaling_options(&self) -> ScalingOptions {
        ScalingOptions {
            wavevector: Wavevector::from_in_medium(self.scattering.wavevector_in_medium),
            weighting: self.scattering.weighting,
        }
    }

    fn noise_budget_unchecked(&self) -> NoiseBudget {
        NoiseBudget {
            electronic_psd: self.noise.electronic_psd,
            shot_coefficient: self
                .noise
                .shot_coefficient
                .unwrap_or_else(|| self.heterodyne.shot_noise_coefficient()),
            flicker_corner: self.noise.flicker_corner,
            flicker_amplitude: self.noise.flicker_amplitude.unwrap_or(0.0),
        }
    }

    pub fn noise_budget(&self) -> NoiseBudget {
        self.noise_budget_unchecked()
    }

    pub fn detection_settings(&self) -> DetectionSettings {
        DetectionSettings {
            threshold: self.detection.threshold,
            min_separation: self.detection.min_separation,
        }
    }

    /// Particles per m³ after the optional droplet dilution.
    pub fn concentration(&self) -> f64 {
        concentration_per_m3(
            self.transit.concentration_per_ml,
            self.transit.dilution.map(|[a, b]| (a, b)),
        )
    }

    pub fn transit_config(&self, seed: u64) -> Result<TransitConfig> {
        let height = match self.transit.height {
            Some(h) => h,
            None => 4.0 * self.decay_length()?,
        };
        Ok(TransitConfig {
            duration: self.transit.duration,
            timestep: self.transit.timestep,
            region: InteractionRegion {
                length: self.transit.length,
                width: self.transit.width,
                height,
            },
            seed,
            boundary: self.transit.boundary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str("[geometry]\ncore_diameter = 1.5e-6\n").unwrap();
        assert_eq!(cfg.geometry.core_diameter, 1.5e-6);
        assert_eq!(cfg.beam, ProbeBeam::default());
        assert_eq!(cfg.particle.index, Some(SILICA_PARTICLE_INDEX));
        assert!(cfg.noise.shot_coefficient.is_some());
        assert!(cfg.noise.flicker_amplitude.unwrap() > 0.0);
        assert!((cfg.transit.height.unwrap() - 4.0 * 93.13e-9).abs() < 1e-10);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config_str("[beam]\nwasit = 3e-6\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("wasit"), "{msg}");
        assert!(msg.contains("beam"), "{msg}");
    }

    #[test]
    fn out_of_range_value_names_key() {
        let err = parse_config_str("[beam]\nwaist = -1.0\n").unwrap_err();
        assert!(matches!(&err, Error::Config { path, .. } if path == "beam.waist"), "{err}");
        let err = parse_config_str("[heterodyne]\nsample_rate = 10e3\n").unwrap_err();
        assert!(err.to_string().contains("heterodyne.sample_rate"), "{err}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = parse_config_str("[transit]\nduration = \"long\"\n").unwrap_err();
        assert!(matches!(&err, Error::Config { path, .. } if path == "transit.duration"), "{err}");
    }

    #[test]
    fn emitted_config_round_trips() {
        let a = parse_config_str(
            "seed = 7\n[scattering]\ncollection_efficiency = [[1e-8, 0.017], [1e-7, 0.072]]\n[particle]\nmaterial = \"polystyrene\"\n",
        )
        .unwrap();
        let b = parse_config_str(&emit_config(&a).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_material_needs_index() {
        assert!(parse_config_str("[particle]\nmaterial = \"gold\"\n").is_err());
        let cfg = parse_config_str("[particle]\nmaterial = \"pmma\"\nindex = 1.49\n").unwrap();
        assert_eq!(cfg.particle().index, 1.49);
    }
}
