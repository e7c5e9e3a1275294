use rayon::prelude::*;

use super::report::ReportBundle;
use super::svg::{Plot, Series, Style};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_to_string};
use crate::modes::{
    build_cross_section, evanescent_profile, mode_field_csv, profile_csv, solve_modes_with, Cut,
    EvanescentProfile, GuidedMode,
};
use crate::rng::derive_seed;
use crate::scattering::{radius_scaling_curve, RadiusScalingCurve};
use crate::sensing::{
    amplitude_upcrossing_rate, band_limit, demodulate_band, detect_events, events_csv,
    lockin_demodulate, noise_linearity_fit, normalize, predicted_quadrature_moments, psd,
    reference_from_noise, synthesize_photocurrent, trace_from_csv, trace_to_csv, Envelope,
    HeterodyneConfig, LinearFit, NoiseReference, NormalizedOutput, TimeTrace,
};
use crate::transit::{envelope_csv, simulate_transits_with, truth_csv, Suspension, TransitResult};

/// Longest series drawn in a plot.
const PLOT_POINTS: usize = 4000;

fn diameter_tag(cfg: &RunConfig, k: usize) -> String {
    if cfg.core_diameters().len() == 1 {
        String::new()
    } else {
        format!("_d{k}")
    }
}

struct SolvedDiameter {
    core_diameter: f64,
    modes: Vec<GuidedMode>,
    cs: crate::modes::CrossSection,
}

fn solve_diameters(cfg: &RunConfig, n_modes: usize) -> Result<Vec<SolvedDiameter>> {
    cfg.core_diameters()
        .par_iter()
        .map(|&d| {
            let geometry = cfg.fiber_geometry(d);
            let cs = build_cross_section(&geometry, &cfg.grid_spec(&geometry), cfg.beam.wavelength)?;
            let modes = solve_modes_with(&cs, n_modes, &cfg.solver)?;
            Ok(SolvedDiameter {
                core_diameter: d,
                modes,
                cs,
            })
        })
        .collect()
}

pub fn modes(cfg: &RunConfig) -> Result<ReportBundle> {
    let mut bundle = ReportBundle::new("modes", cfg)?;
    let solved = solve_diameters(cfg, cfg.geometry.n_modes)?;
    let mut summary = String::from("core_diameter_m,ordinal,n_eff,residual\n");
    for (k, s) in solved.iter().enumerate() {
        for m in &s.modes {
            summary.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(s.core_diameter),
                m.ordinal,
                fmt_f64(m.n_eff),
                fmt_f64(m.residual)
            ));
            bundle.add(
                format!("mode{}_{}.csv", diameter_tag(cfg, k), m.ordinal),
                mode_field_csv(m, &s.cs),
            );
        }
    }
    bundle.add("modes.csv", summary);
    Ok(bundle)
}

pub fn profile(cfg: &RunConfig) -> Result<(ReportBundle, Vec<(f64, EvanescentProfile)>)> {
    let mut bundle = ReportBundle::new("profile", cfg)?;
    let solved = solve_diameters(cfg, 1)?;
    let mut summary = String::from(
        "core_diameter_m,n_eff,decay_length_m,fitted_decay_length_m,surface_fraction,field_at_2gamma\n",
    );
    let mut profiles = Vec::new();
    for (k, s) in solved.iter().enumerate() {
        let p = evanescent_profile(&s.modes[0], &s.cs, &Cut::default())?;
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(s.core_diameter),
            fmt_f64(s.modes[0].n_eff),
            fmt_f64(p.decay_length),
            fmt_f64(p.fitted_decay_length),
            fmt_f64(p.surface_fraction),
            fmt_f64(p.field_at(2.0 * p.decay_length).unwrap_or(f64::NAN))
        ));
        bundle.add(format!("profile{}.csv", diameter_tag(cfg, k)), profile_csv(&p));
        profiles.push((s.core_diameter, p));
    }
    bundle.add("profile_summary.csv", summary);
    Ok((bundle, profiles))
}

pub fn scaling(cfg: &RunConfig) -> Result<(ReportBundle, RadiusScalingCurve)> {
    let mut bundle = ReportBundle::new("scaling", cfg)?;
    let curve = radius_scaling_curve(
        &cfg.sweep.radii,
        cfg.particle().index,
        &cfg.medium,
        &cfg.beam,
        cfg.decay_length()?,
        &cfg.scattering.collection_efficiency,
        cfg.sweep.normalization_radius,
        &cfg.scaling_options(),
    )?;
    bundle.add("scaling.csv", curve.to_csv());
    bundle.add(
        "scaling_summary.toml",
        format!(
            "calibration = {}\nnormalization_radius_m = {}\n",
            fmt_f64(curve.calibration),
            fmt_f64(curve.normalization_radius)
        ),
    );
    Ok((bundle, curve))
}

fn simulate(cfg: &RunConfig, seed: u64) -> Result<TransitResult> {
    let suspension = Suspension {
        particle: cfg.particle(),
        concentration: cfg.concentration(),
        medium: cfg.medium,
    };
    let eta = cfg.scattering.collection_efficiency.at(cfg.particle.radius);
    simulate_transits_with(
        &suspension,
        cfg.decay_length()?,
        &cfg.beam,
        eta,
        &cfg.transit_config(seed)?,
        &cfg.scaling_options(),
    )
}

fn transit_summary(r: &TransitResult) -> String {
    format!(
        "particles = {}\ncontact_power_W = {}\nevents = {}\n",
        r.particles,
        fmt_f64(r.contact_power),
        r.events.len()
    )
}

pub fn transit(cfg: &RunConfig) -> Result<ReportBundle> {
    let mut bundle = ReportBundle::new("transit", cfg)?;
    let r = simulate(cfg, derive_seed(cfg.seed, "transit"))?;
    bundle.add("envelope.csv", envelope_csv(&r.envelope));
    bundle.add("truth_events.csv", truth_csv(&r.events));
    bundle.add("transit_summary.toml", transit_summary(&r));
    Ok(bundle)
}

fn synthesize(cfg: &RunConfig, envelope: &Envelope, seed: u64) -> Result<TimeTrace> {
    let envelope = envelope.resample_to(cfg.heterodyne.sample_rate)?;
    synthesize_photocurrent(&envelope, &cfg.heterodyne, &cfg.noise_budget(), seed)
}

fn reference(cfg: &RunConfig) -> Result<NoiseReference> {
    match &cfg.detection.reference {
        Some(path) => {
            let t = trace_from_csv(&read_to_string(path)?)?;
            NoiseReference::from_quadratures(&demodulate_band(&t, &cfg.heterodyne, &cfg.lockin, &cfg.bandpass)?)
        }
        None => reference_from_noise(
            samples_for(cfg.detection.reference_duration, &cfg.heterodyne),
            &cfg.heterodyne,
            &cfg.noise_budget(),
            &cfg.lockin,
            &cfg.bandpass,
            derive_seed(cfg.seed, "reference"),
        ),
    }
}

fn samples_for(duration: f64, h: &HeterodyneConfig) -> usize {
    (duration * h.sample_rate).round() as usize
}

fn analyse(cfg: &RunConfig, trace: &TimeTrace) -> Result<(crate::sensing::LockInOutput, NormalizedOutput)> {
    let rel = (trace.sample_rate() - cfg.heterodyne.sample_rate).abs() / cfg.heterodyne.sample_rate;
    if rel > 1e-9 {
        return Err(Error::Config {
            path: "heterodyne.sample_rate".into(),
            message: format!(
                "trace is sampled at {} Hz but the config says {} Hz",
                trace.sample_rate(),
                cfg.heterodyne.sample_rate
            ),
        });
    }
    let out = lockin_demodulate(trace, cfg.heterodyne.beat_frequency, &cfg.lockin)?;
    let band = band_limit(&out, &cfg.bandpass)?;
    let norm = normalize(&band, &reference(cfg)?);
    Ok((out, norm))
}

pub fn trace(cfg: &RunConfig) -> Result<(ReportBundle, NormalizedOutput)> {
    let mut bundle = ReportBundle::new("trace", cfg)?;
    let r = simulate(cfg, derive_seed(cfg.seed, "transit"))?;
    let t = synthesize(cfg, &r.envelope, derive_seed(cfg.seed, "trace"))?;
    let (out, norm) = analyse(cfg, &t)?;
    bundle.add("envelope.csv", envelope_csv(&r.envelope));
    bundle.add("truth_events.csv", truth_csv(&r.events));
    bundle.add("trace.csv", trace_to_csv(&t));
    bundle.add("demodulated.csv", out.to_csv());
    bundle.add("transit_summary.toml", transit_summary(&r));
    Ok((bundle, norm))
}

pub fn detect(cfg: &RunConfig) -> Result<(ReportBundle, NormalizedOutput)> {
    let mut bundle = ReportBundle::new("detect", cfg)?;
    let t = match &cfg.detection.trace {
        Some(path) => trace_from_csv(&read_to_string(path)?)?,
        None => synthesize(
            cfg,
            &Envelope::zeros(samples_for(cfg.detection.duration, &cfg.heterodyne), cfg.heterodyne.dt()),
            derive_seed(cfg.seed, "detect"),
        )?,
    };
    let (out, norm) = analyse(cfg, &t)?;
    let settings = cfg.detection_settings();
    let events = detect_events(norm.valid_amplitude(), norm.rate, norm.valid_start_time(), &settings)?;
    let moments = predicted_quadrature_moments(&cfg.heterodyne, &cfg.noise_budget(), 0.0, &cfg.lockin, &cfg.bandpass)?;
    let analysed = norm.valid.len() as f64 / norm.rate;
    let expected = amplitude_upcrossing_rate(settings.threshold, moments.lambda2) * analysed;
    bundle.add("demodulated.csv", out.to_csv());
    bundle.add("normalized.csv", norm.to_csv());
    bundle.add("events.csv", events_csv(&events));
    bundle.add(
        "detect_summary.toml",
        format!(
            "threshold_sigma = {}\nevents = {}\nanalysed_duration_s = {}\nexpected_noise_events = {}\n",
            fmt_f64(settings.threshold),
            events.len(),
            fmt_f64(analysed),
            fmt_f64(expected)
        ),
    );
    Ok((bundle, norm))
}

pub struct NoiseFitResult {
    pub detected_power: Vec<f64>,
    pub mean_psd: Vec<f64>,
    pub fit: LinearFit,
}

pub fn noisefit(cfg: &RunConfig) -> Result<(ReportBundle, NoiseFitResult)> {
    let mut bundle = ReportBundle::new("noisefit", cfg)?;
    let nf = &cfg.noisefit;
    let budget = cfg.noise_budget();
    let spectra: Vec<_> = nf
        .lo_powers
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let h = HeterodyneConfig {
                lo_power: p,
                ..cfg.heterodyne
            };
            let env = Envelope::zeros(nf.samples, h.dt());
            let t = synthesize_photocurrent(&env, &h, &budget, derive_seed(cfg.seed, &format!("noisefit-{k}")))?;
            let sp = psd(&t.samples, h.sample_rate, nf.segment, nf.segment / 2)?;
            let mean = sp.band_mean(nf.band[0], nf.band[1])?;
            Ok((sp, mean))
        })
        .collect::<Result<_>>()?;
    let detected: Vec<f64> = nf.lo_powers.iter().map(|p| 2.0 * p).collect();
    let means: Vec<f64> = spectra.iter().map(|s| s.1).collect();
    let fit = noise_linearity_fit(&detected, &means)?;
    let mut table = String::from("lo_power_W,detected_power_W,mean_psd_V2_per_Hz\n");
    for (k, (sp, mean)) in spectra.iter().enumerate() {
        table.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(nf.lo_powers[k]),
            fmt_f64(detected[k]),
            fmt_f64(*mean)
        ));
        bundle.add(format!("psd_{k}.csv"), sp.to_csv());
    }
    bundle.add("noisefit.csv", table);
    bundle.add(
        "noisefit_summary.toml",
        format!(
            "slope_V2_per_Hz_per_W = {}\nslope_stderr = {}\nintercept_V2_per_Hz = {}\nintercept_stderr = {}\nr_squared = {}\nelectronic_psd_V2_per_Hz = {}\nintercept_relative_error = {}\n",
            fmt_f64(fit.slope),
            fmt_f64(fit.slope_stderr),
            fmt_f64(fit.intercept),
            fmt_f64(fit.intercept_stderr),
            fmt_f64(fit.r_squared),
            fmt_f64(budget.electronic_psd),
            fmt_f64((fit.intercept - budget.electronic_psd) / budget.electronic_psd)
        ),
    );
    Ok((
        bundle,
        NoiseFitResult {
            detected_power: detected,
            mean_psd: means,
            fit,
        },
    ))
}

fn thin(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let step = x.len().div_ceil(PLOT_POINTS).max(1);
    (
        x.iter().step_by(step).copied().collect(),
        y.iter().step_by(step).copied().collect(),
    )
}

fn normalized_plot(norm: &NormalizedOutput, threshold: f64, title: &str) -> String {
    let t: Vec<f64> = norm.valid.clone().map(|k| norm.time(k)).collect();
    let (x, y) = thin(&t, norm.valid_amplitude());
    Plot {
        title,
        x_label: "time (s)",
        y_label: "A / sigma",
        series: vec![Series {
            label: "amplitude",
            x: &x,
            y: &y,
            style: Style::Line,
        }],
        hlines: vec![threshold],
    }
    .render()
}

pub fn figure(cfg: &RunConfig, target: super::Target) -> Result<ReportBundle> {
    use super::Target;
    let (mut bundle, svg) = match target {
        Target::Modes => {
            let b = modes(cfg)?;
            let text = String::from_utf8_lossy(b.get("modes.csv").unwrap_or_default()).into_owned();
            let rows: Vec<(f64, f64)> = text
                .lines()
                .skip(1)
                .filter_map(|l| {
                    let f: Vec<&str> = l.split(',').collect();
                    Some((f.get(1)?.parse().ok()?, f.get(2)?.parse().ok()?))
                })
                .collect();
            let (x, y): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            let svg = Plot {
                title: "Guided mode ladder",
                x_label: "mode ordinal",
                y_label: "n_eff",
                series: vec![Series { label: "n_eff", x: &x, y: &y, style: Style::Points }],
                hlines: vec![cfg.medium.index],
            }
            .render();
            (b, svg)
        }
        Target::Profile => {
            let (b, profiles) = profile(cfg)?;
            let data: Vec<(String, Vec<f64>, Vec<f64>)> = profiles
                .iter()
                .map(|(d, p)| {
                    (
                        format!("{:.2} um core", d * 1e6),
                        p.samples.iter().map(|s| s.distance * 1e9).collect(),
                        p.samples.iter().map(|s| s.field).collect(),
                    )
                })
                .collect();
            let svg = Plot {
                title: "Evanescent profile along the open-hole cut",
                x_label: "distance from surface (nm)",
                y_label: "|E| / max|E|",
                series: data
                    .iter()
                    .map(|(l, x, y)| Series { label: l, x, y, style: Style::Line })
                    .collect(),
                hlines: vec![],
            }
            .render();
            (b, svg)
        }
        Target::Scaling => {
            let (b, c) = scaling(cfg)?;
            let r: Vec<f64> = c.radii.iter().map(|r| r * 1e9).collect();
            let svg = Plot {
                title: "Normalized signal amplitude against particle radius",
                x_label: "radius (nm)",
                y_label: "amplitude (normalized)",
                series: vec![
                    Series { label: "dipole", x: &r, y: &c.dipole, style: Style::Line },
                    Series { label: "evanescent-corrected", x: &r, y: &c.corrected, style: Style::Line },
                ],
                hlines: vec![1.0],
            }
            .render();
            (b, svg)
        }
        Target::Trace => {
            let (b, norm) = trace(cfg)?;
            let svg = normalized_plot(&norm, cfg.detection.threshold, "Band-passed amplitude");
            (b, svg)
        }
        Target::Detect => {
            let (b, norm) = detect(cfg)?;
            let svg = normalized_plot(&norm, cfg.detection.threshold, "Detection trace");
            (b, svg)
        }
        Target::Noisefit => {
            let (b, r) = noisefit(cfg)?;
            let xs: Vec<f64> = r.detected_power.iter().map(|p| p * 1e3).collect();
            let line: Vec<f64> = r.detected_power.iter().map(|p| r.fit.intercept + r.fit.slope * p).collect();
            let svg = Plot {
                title: "Band-averaged noise PSD against detected LO power",
                x_label: "detected power (mW)",
                y_label: "PSD (V^2/Hz)",
                series: vec![
                    Series { label: "measured", x: &xs, y: &r.mean_psd, style: Style::Points },
                    Series { label: "fit", x: &xs, y: &line, style: Style::Line },
                ],
                hlines: vec![cfg.noise_budget().electronic_psd],
            }
            .render();
            (b, svg)
        }
        Target::Transit => {
            let b = transit(cfg)?;
            let r = simulate(cfg, derive_seed(cfg.seed, "transit"))?;
            let t: Vec<f64> = (0..r.envelope.power.len()).map(|k| k as f64 * r.envelope.dt).collect();
            let (x, y) = thin(&t, &r.envelope.power);
            let svg = Plot {
                title: "Signal power envelope",
                x_label: "time (s)",
                y_label: "P_sig (W)",
                series: vec![Series { label: "envelope", x: &x, y: &y, style: Style::Line }],
                hlines: vec![0.1 * r.contact_power],
            }
            .render();
            (b, svg)
        }
    };
    bundle.command = format!("figure {}", bundle.command);
    bundle.add(format!("{}.svg", target.name()), svg);
    Ok(bundle)
}
