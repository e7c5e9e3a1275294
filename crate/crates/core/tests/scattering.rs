mod common;

use std::f64::consts::PI;

use ecfsense::scattering::*;
use proptest::prelude::*;

const LAMBDA: f64 = 780e-9;

fn sigma(a: f64, n_p: f64, lambda: f64) -> f64 {
    dipole_cross_section(&Particle::new(a, n_p, "x"), &Medium::water(), lambda, Wavevector::Medium).unwrap()
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn silica_25nm_matches_direct_evaluation() {
    let k = 2.0 * PI * 1.333 / LAMBDA;
    let m2: f64 = (1.45f64 / 1.333).powi(2);
    let oracle = 8.0 * PI / 3.0 * k.powi(4) * 25e-9f64.powi(6) * ((m2 - 1.0) / (m2 + 2.0)).powi(2);
    let got = sigma(25e-9, 1.45, LAMBDA);
    assert!((got / oracle - 1.0).abs() < 1e-12);
    assert!((got / 9.0101e-20 - 1.0).abs() < 1e-3, "{got}");
}

#[test]
fn dipole_agrees_with_mie_series_for_small_spheres() {
    for &(a, n_p) in &[(10e-9, 1.45), (25e-9, 1.45), (20e-9, 1.59)] {
        let mie = common::mie_cross_section(a, n_p, 1.333, LAMBDA);
        let dip = sigma(a, n_p, LAMBDA);
        assert!((dip / mie - 1.0).abs() < 0.05, "a={a}: dipole {dip} mie {mie}");
    }
}

#[test]
fn cross_section_slopes() {
    let radii: Vec<f64> = (0..=10).map(|k| 1e-9 * 10f64.powf(k as f64 / 10.0)).collect();
    let s: Vec<f64> = radii.iter().map(|&a| sigma(a, 1.45, LAMBDA)).collect();
    assert!((slope(&radii, &s) - 6.0).abs() < 1e-6);
    let lambdas: Vec<f64> = (0..=10).map(|k| 400e-9 * 10f64.powf(k as f64 / 10.0)).collect();
    let s: Vec<f64> = lambdas.iter().map(|&l| sigma(25e-9, 1.45, l)).collect();
    assert!((slope(&lambdas, &s) + 4.0).abs() < 1e-6);
}

#[test]
fn vacuum_wavevector_divides_by_medium_index_to_the_fourth() {
    let p = Particle::silica(25e-9);
    let med = Medium::water();
    let inside = dipole_cross_section(&p, &med, LAMBDA, Wavevector::Medium).unwrap();
    let vacuum = dipole_cross_section(&p, &med, LAMBDA, Wavevector::Vacuum).unwrap();
    assert!((inside / vacuum - 1.333f64.powi(4)).abs() < 1e-9);
}

#[test]
fn probe_intensity_matches_waist() {
    let beam = ProbeBeam::default();
    let intensity = beam.power / (PI * beam.waist * beam.waist);
    assert!((intensity / 7e7 - 1.0).abs() < 0.02, "{intensity}");
}

#[test]
fn collected_power_anchor() {
    let p = collected_power(7.4e-6, 0.072).unwrap();
    assert!((p / 5.3e-7 - 1.0).abs() < 0.02, "{p}");
}

#[test]
fn sphere_weight_at_one_decay_length() {
    let w = evanescent_weight(93e-9, 93e-9).unwrap();
    assert!((w - common::sphere_weight_oracle(93e-9, 93e-9)).abs() < 1e-9);
    assert!((w - 0.406).abs() < 5e-4, "{w}");
}

#[test]
fn small_sphere_weight_tracks_mean_depth() {
    let g = 93e-9;
    // The volume-weighted mean depth of a tangent sphere is its radius.
    let w = evanescent_weight(g / 50.0, g).unwrap();
    assert!((w - common::sphere_weight_oracle(g / 50.0, g)).abs() < 1e-9);
    assert!((w - (-1.0f64 / 50.0).exp()).abs() < 1e-4);
    assert!((1.0 - evanescent_weight(g / 100.0, g).unwrap()) < 0.01);
}

#[test]
fn corrected_curve_falls_below_dipole_beyond_normalization() {
    let radii: Vec<f64> = (1..=20).map(|k| k as f64 * 10e-9).collect();
    let c = radius_scaling_curve(
        &radii,
        SILICA_PARTICLE_INDEX,
        &Medium::water(),
        &ProbeBeam::default(),
        93e-9,
        &CollectionEfficiency::Constant(0.072),
        50e-9,
        &ScalingOptions::default(),
    )
    .unwrap();
    let ratio: Vec<f64> = c.corrected.iter().zip(&c.dipole).map(|(a, b)| a / b).collect();
    assert!(ratio.windows(2).all(|w| w[1] < w[0]));
    assert!((ratio[4] - 1.0).abs() < 1e-12);
    let gap: Vec<f64> = c.dipole.iter().zip(&c.corrected).map(|(d, k)| d - k).collect();
    for k in 5..radii.len() {
        assert!(c.corrected[k] < c.dipole[k]);
    }
    assert!(gap[7..=9].windows(2).all(|w| w[1] > w[0]));
    assert!((c.dipole[4] / c.dipole[1] - 2.5f64.powi(3)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn mie_cross_check(ka in 0.01f64..0.3, m in 1.01f64..1.2) {
        let a = ka * LAMBDA / (2.0 * PI * 1.333);
        let mie = common::mie_cross_section(a, m * 1.333, 1.333, LAMBDA);
        let dip = sigma(a, m * 1.333, LAMBDA);
        prop_assert!((dip / mie - 1.0).abs() < 0.05);
    }

    #[test]
    fn collected_never_exceeds_scattered(p in 0.0f64..1e-3, eta in 0.0f64..=1.0, dual in any::<bool>()) {
        prop_assert!(collected_power(p, eta).unwrap() <= p);
        prop_assert!(detected_power(p, eta, dual).unwrap() <= 2.0 * eta * p + 1e-30);
    }

    #[test]
    fn weight_closed_form_matches_quadrature(a in 1e-9f64..500e-9, g in 20e-9f64..500e-9) {
        let c = evanescent_weight(a, g).unwrap();
        let q = evanescent_weight_quadrature(a, g).unwrap();
        prop_assert!((c - q).abs() <= 1e-9 * c.max(1e-300));
        prop_assert!((c - common::sphere_weight_oracle(a, g)).abs() < 1e-7);
    }

    #[test]
    fn weight_decreasing_in_radius(a in 1e-9f64..500e-9, f in 1.001f64..2.0, g in 20e-9f64..500e-9) {
        let w1 = evanescent_weight(a, g).unwrap();
        let w2 = evanescent_weight(a * f, g).unwrap();
        prop_assert!(w2 < w1 && w1 <= 1.0 && w2 > 0.0);
    }

    #[test]
    fn waist_inverse_square(w in 0.5e-6f64..20e-6, s in 1e-22f64..1e-15) {
        let b1 = ProbeBeam { waist: w, ..ProbeBeam::default() };
        let b2 = ProbeBeam { waist: 0.5 * w, ..ProbeBeam::default() };
        let r = scattered_power(&b2, s).unwrap() / scattered_power(&b1, s).unwrap();
        prop_assert!((r - 4.0).abs() < 1e-12);
    }
}
