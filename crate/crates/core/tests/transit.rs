use ecfsense::scattering::{Medium, Particle, ProbeBeam};
use ecfsense::transit::*;
use proptest::prelude::*;

const GAMMA: f64 = 93.1e-9;

fn config(duration: f64, seed: u64) -> TransitConfig {
    TransitConfig {
        duration,
        timestep: 1e-4,
        region: InteractionRegion::for_decay_length(GAMMA),
        seed,
        boundary: Boundary::Reflective,
    }
}

fn suspension(concentration: f64) -> Suspension {
    Suspension {
        particle: Particle::silica(50e-9),
        concentration,
        medium: Medium::water(),
    }
}

#[test]
fn stokes_einstein_scaling() {
    let med = Medium::water();
    let d = diffusion_coefficient(&Particle::silica(50e-9), &med).unwrap();
    let hand = 1.380649e-23 * 298.0 / (6.0 * std::f64::consts::PI * 8.9e-4 * 50e-9);
    assert!((d / hand - 1.0).abs() < 1e-12);
    assert!((d / 4.9e-12 - 1.0).abs() < 0.01, "{d}");
    let d2 = diffusion_coefficient(&Particle::silica(100e-9), &med).unwrap();
    assert!((d2 - 0.5 * d).abs() < 1e-24);
    let cold = Medium { temperature: 1e-9, ..med };
    assert!(diffusion_coefficient(&Particle::silica(50e-9), &cold).unwrap() < 1e-20);
}

#[test]
fn event_count_scales_with_concentration() {
    // Dilute enough that events from different particles rarely overlap.
    const RUNS: u64 = 4000;
    let volume = InteractionRegion::for_decay_length(GAMMA).volume();
    let mean_events = |per_region: f64| {
        let s = suspension(per_region / volume);
        let total: usize = (0..RUNS)
            .map(|seed| {
                simulate_transits(&s, GAMMA, &ProbeBeam::default(), 0.072, &config(1.0, seed))
                    .unwrap()
                    .events
                    .len()
            })
            .sum();
        total as f64 / RUNS as f64
    };
    let one = mean_events(0.25);
    let two = mean_events(0.5);
    assert!(one > 0.0);
    assert!((two / one - 2.0).abs() < 0.2, "{one} -> {two}");
}

#[test]
fn runs_are_seed_deterministic() {
    let s = suspension(2.0 / InteractionRegion::for_decay_length(GAMMA).volume());
    let run = |seed| simulate_transits(&s, GAMMA, &ProbeBeam::default(), 0.072, &config(0.5, seed)).unwrap();
    let a = run(4);
    let b = run(4);
    assert_eq!(a.envelope.power, b.envelope.power);
    assert_eq!(a.events, b.events);
    assert_eq!(envelope_csv(&a.envelope), envelope_csv(&b.envelope));
    let c = run(5);
    assert_ne!(a.envelope.power, c.envelope.power);
}

#[test]
fn csv_columns() {
    let r = simulate_transits(&suspension(0.0), GAMMA, &ProbeBeam::default(), 0.072, &config(0.01, 0)).unwrap();
    assert!(envelope_csv(&r.envelope).starts_with("t_s,P_sig_W\n"));
    assert!(truth_csv(&r.events).starts_with("start_s,end_s,peak_sigma,snr\n"));
    assert!(r.envelope.power.iter().all(|&p| p == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn single_particle_envelope_bounded(
        x in -4e-6f64..4e-6, y in -2e-6f64..2e-6, d in 0.0f64..300e-9, seed in 0u64..1000,
    ) {
        let cfg = config(0.3, seed);
        let contact = 1e-12;
        let r = simulate_particles(&[[x, y, d]], 4.9e-12, contact, GAMMA, 3e-6, &cfg).unwrap();
        prop_assert_eq!(r.particles, 1);
        prop_assert!(r.envelope.power.iter().all(|&p| (0.0..=contact).contains(&p)));
        for e in &r.events {
            prop_assert!(e.end > e.start);
        }
    }

    #[test]
    fn particle_count_conserved(n in 0usize..20, seed in 0u64..1000) {
        let region = InteractionRegion::for_decay_length(GAMMA);
        let start: Vec<[f64; 3]> = (0..n).map(|k| [0.0, 0.0, region.height * k as f64 / 20.0]).collect();
        let r = simulate_particles(&start, 1e-11, 1e-12, GAMMA, 3e-6, &config(0.05, seed)).unwrap();
        prop_assert_eq!(r.particles, n);
        prop_assert!(r.envelope.power.iter().all(|&p| p <= n as f64 * 1e-12 * (1.0 + 1e-12)));
    }

    #[test]
    fn closer_approach_gives_larger_peak(d1 in 0.0f64..150e-9, f in 1.01f64..2.0) {
        let d2 = (d1 * f).max(d1 + 1e-9);
        let peak = |d: f64| {
            let r = simulate_particles(&[[0.0, 0.0, d]], 0.0, 1e-12, GAMMA, 3e-6, &config(0.01, 0)).unwrap();
            r.envelope.power.iter().cloned().fold(0.0, f64::max)
        };
        prop_assert!(peak(d1) > peak(d2));
    }
}
