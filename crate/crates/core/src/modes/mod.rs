//! Guided modes of the fiber cross-section.

mod banded;
pub mod geometry;
pub mod profile;
pub mod solver;

use std::fmt::Write as _;

pub use geometry::{
    build_cross_section, CrossSection, ExposedCoreShape, FiberGeometry, GridSpec, Hole,
    AIR_INDEX, RECOMMENDED_MARGIN, SILICA_INDEX, WATER_INDEX,
};
pub use profile::{decay_length, evanescent_profile, mode_power, Cut, EvanescentProfile, ProfileSample, Region};
pub use solver::{solve_modes, solve_modes_with, GuidedMode, SolverSettings};

use crate::error::Result;
use crate::io::fmt_f64;

/// Largest `|Δn_eff|` between the given window and one with doubled extents.
pub fn window_doubling_shift(
    geometry: &FiberGeometry,
    grid: &GridSpec,
    wavelength: f64,
    n_modes: usize,
    settings: &SolverSettings,
) -> Result<f64> {
    let base = solve_modes_with(&build_cross_section(geometry, grid, wavelength)?, n_modes, settings)?;
    let doubled = GridSpec {
        spacing: grid.spacing,
        extent: [2.0 * grid.extent[0], 2.0 * grid.extent[1]],
    };
    let wide = solve_modes_with(&build_cross_section(geometry, &doubled, wavelength)?, n_modes, settings)?;
    Ok(base
        .iter()
        .zip(&wide)
        .map(|(a, b)| (a.n_eff - b.n_eff).abs())
        .fold(0.0, f64::max))
}

/// Field grid as CSV: `x_m,y_m,amplitude`, one row per cell.
pub fn mode_field_csv(mode: &GuidedMode, cs: &CrossSection) -> String {
    let (nx, ny) = cs.shape();
    let mut out = String::with_capacity(nx * ny * 40);
    out.push_str("x_m,y_m,amplitude\n");
    for j in 0..ny {
        for i in 0..nx {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(cs.x(i)),
                fmt_f64(cs.y(j)),
                fmt_f64(mode.at(i, j))
            );
        }
    }
    out
}

/// Profile as CSV: `distance_m,normalized_field`, distance signed from the surface.
pub fn profile_csv(profile: &EvanescentProfile) -> String {
    let mut out = String::from("distance_m,normalized_field\n");
    for s in &profile.samples {
        let _ = writeln!(out, "{},{}", fmt_f64(s.distance), fmt_f64(s.field));
    }
    out
}
