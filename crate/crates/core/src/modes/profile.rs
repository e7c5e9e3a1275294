use std::f64::consts::PI;

use super::geometry::CrossSection;
use super::solver::GuidedMode;
use crate::error::{ensure_index, ensure_positive, Error, Result};

/// Evanescent decay length `λ / (2π n_m)`.
pub fn decay_length(wavelength: f64, medium_index: f64) -> Result<f64> {
    ensure_positive("wavelength", wavelength)?;
    ensure_index("medium_index", medium_index)?;
    Ok(wavelength / (2.0 * PI * medium_index))
}

/// Straight line through the mode used to read off the evanescent tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    /// Start point (m); `None` starts at the field maximum.
    pub start: Option<[f64; 2]>,
    /// Direction, normalized internally.
    pub direction: [f64; 2],
    /// Length sampled beyond the surface; at least four decay lengths.
    pub beyond_surface: Option<f64>,
}

impl Default for Cut {
    /// Vertical cut from the field maximum toward the open hole.
    fn default() -> Self {
        Self {
            start: None,
            direction: [0.0, 1.0],
            beyond_surface: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    /// Signed distance from the surface (m), negative inside the core.
    pub distance: f64,
    /// `|ψ| / max|ψ|`
    pub field: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvanescentProfile {
    /// `λ / (2π n_m)`
    pub decay_length: f64,
    /// Exponential fit of the sampled tail over the first four decay lengths.
    pub fitted_decay_length: f64,
    /// Field at the core/medium boundary divided by the global maximum.
    pub surface_fraction: f64,
    /// Distance from the cut start to the surface (m).
    pub surface_offset: f64,
    pub samples: Vec<ProfileSample>,
}

impl EvanescentProfile {
    /// Samples at or beyond the surface, starting with the surface itself.
    pub fn tail(&self) -> &[ProfileSample] {
        let first = self
            .samples
            .iter()
            .position(|s| s.distance >= 0.0)
            .unwrap_or(self.samples.len());
        &self.samples[first..]
    }

    /// Linear interpolation of the normalized field at a signed distance.
    pub fn field_at(&self, distance: f64) -> Option<f64> {
        let s = &self.samples;
        let k = s.windows(2).position(|w| w[0].distance <= distance && distance <= w[1].distance)?;
        let (a, b) = (s[k], s[k + 1]);
        let t = if b.distance > a.distance {
            (distance - a.distance) / (b.distance - a.distance)
        } else {
            0.0
        };
        Some(a.field + t * (b.field - a.field))
    }
}

/// Samples `|ψ|` along a cut, locates the first change of material after the
/// start and reports the field there relative to the global maximum.
pub fn evanescent_profile(
    mode: &GuidedMode,
    cs: &CrossSection,
    cut: &Cut,
) -> Result<EvanescentProfile> {
    let (nx, ny) = cs.shape();
    if (mode.nx, mode.ny) != (nx, ny) {
        return Err(Error::invalid("mode", "grid does not match the cross-section"));
    }
    let gamma = decay_length(cs.wavelength(), cs.geometry().background_index)?;
    let len = cut.direction[0].hypot(cut.direction[1]);
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::invalid("cut.direction", "must be a nonzero vector"));
    }
    let dir = [cut.direction[0] / len, cut.direction[1] / len];
    let start = cut.start.unwrap_or_else(|| {
        let (i, j) = mode.peak_cell();
        [cs.x(i), cs.y(j)]
    });
    let beyond = cut.beyond_surface.unwrap_or(0.0).max(4.0 * gamma);
    let h = cs.spacing();
    let peak = mode.peak_amplitude();

    let point = |s: f64| [start[0] + s * dir[0], start[1] + s * dir[1]];
    let start_cell = cs
        .locate(start[0], start[1])
        .ok_or(Error::CutOutsideWindow { distance_m: 0.0 })?;
    let start_index = cs.index(start_cell.0, start_cell.1);

    let mut raw: Vec<(f64, f64)> = Vec::new();
    let mut surface: Option<f64> = None;
    let mut k = 0usize;
    loop {
        let s = k as f64 * h;
        let [x, y] = point(s);
        let value = bilinear(mode, cs, x, y).ok_or(Error::CutOutsideWindow { distance_m: s })?;
        let cell = cs.locate(x, y).ok_or(Error::CutOutsideWindow { distance_m: s })?;
        if surface.is_none() && cs.index(cell.0, cell.1) != start_index {
            surface = Some(s - 0.5 * h);
        }
        raw.push((s, value.abs() / peak));
        if let Some(s0) = surface {
            if s >= s0 + beyond {
                break;
            }
        }
        k += 1;
    }
    let s0 = surface.expect("loop exits only after the surface is found");

    let mut samples: Vec<ProfileSample> = Vec::with_capacity(raw.len() + 1);
    let mut surface_fraction = f64::NAN;
    for w in raw.windows(2) {
        let (a, b) = (w[0], w[1]);
        samples.push(ProfileSample {
            distance: a.0 - s0,
            field: a.1,
        });
        if a.0 < s0 && s0 <= b.0 {
            let t = (s0 - a.0) / (b.0 - a.0);
            surface_fraction = a.1 + t * (b.1 - a.1);
            samples.push(ProfileSample {
                distance: 0.0,
                field: surface_fraction,
            });
        }
    }
    let last = raw[raw.len() - 1];
    samples.push(ProfileSample {
        distance: last.0 - s0,
        field: last.1,
    });

    let fitted = fit_decay(&samples, 4.0 * gamma);
    Ok(EvanescentProfile {
        decay_length: gamma,
        fitted_decay_length: fitted,
        surface_fraction,
        surface_offset: s0,
        samples,
    })
}

fn fit_decay(samples: &[ProfileSample], reach: f64) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.distance >= 0.0 && s.distance <= reach + 1e-15 && s.field > 0.0)
        .map(|s| (s.distance, s.field.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxx / sxy
}

fn bilinear(mode: &GuidedMode, cs: &CrossSection, x: f64, y: f64) -> Option<f64> {
    let (nx, ny) = cs.shape();
    let h = cs.spacing();
    let fi = x / h + 0.5 * (nx as f64 - 1.0);
    let fj = y / h + 0.5 * (ny as f64 - 1.0);
    let eps = 1e-9;
    if fi < -eps || fj < -eps || fi > (nx - 1) as f64 + eps || fj > (ny - 1) as f64 + eps {
        return None;
    }
    let fi = fi.clamp(0.0, (nx - 1) as f64);
    let fj = fj.clamp(0.0, (ny - 1) as f64);
    let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
    let (i1, j1) = ((i0 + 1).min(nx - 1), (j0 + 1).min(ny - 1));
    let (tx, ty) = (fi - i0 as f64, fj - j0 as f64);
    let v00 = mode.at(i0, j0);
    let v10 = mode.at(i1, j0);
    let v01 = mode.at(i0, j1);
    let v11 = mode.at(i1, j1);
    Some((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
}

/// Transverse region for power integrals.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Full,
    /// Cells whose centers satisfy `x_min <= x < x_max`, `y_min <= y < y_max`.
    Rect {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    /// Explicit per-cell mask in row-major order.
    Mask(Vec<bool>),
}

/// Discrete power `Σ |ψ|² h²` over a region of the grid.
pub fn mode_power(field: &[f64], cs: &CrossSection, region: &Region) -> Result<f64> {
    let (nx, ny) = cs.shape();
    if field.len() != nx * ny {
        return Err(Error::invalid("field", "length does not match the grid"));
    }
    let area = cs.cell_area();
    let mut power = 0.0;
    let mut cells = 0usize;
    match region {
        Region::Full => {
            power = field.iter().map(|v| v * v).sum();
            cells = field.len();
        }
        Region::Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        } => {
            let [w, hgt] = cs.extent();
            let tol = 1e-9 * w.max(hgt);
            if *x_min < -0.5 * w - tol
                || *x_max > 0.5 * w + tol
                || *y_min < -0.5 * hgt - tol
                || *y_max > 0.5 * hgt + tol
            {
                return Err(Error::invalid("region", "rectangle extends outside the window"));
            }
            for j in 0..ny {
                let y = cs.y(j);
                if y < *y_min || y >= *y_max {
                    continue;
                }
                for i in 0..nx {
                    let x = cs.x(i);
                    if x >= *x_min && x < *x_max {
                        let v = field[j * nx + i];
                        power += v * v;
                        cells += 1;
                    }
                }
            }
        }
        Region::Mask(mask) => {
            if mask.len() != field.len() {
                return Err(Error::invalid("region", "mask length does not match the grid"));
            }
            for (v, _) in field.iter().zip(mask).filter(|(_, m)| **m) {
                power += v * v;
                cells += 1;
            }
        }
    }
    if cells == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(power * area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_length_in_water() {
        let g = decay_length(780e-9, 1.333).unwrap();
        assert!((g - 93.13e-9).abs() < 0.05e-9, "{g}");
    }

    #[test]
    fn decay_length_in_vacuum() {
        // 780e-9 / (2π) = 124.14 nm
        let g = decay_length(780e-9, 1.0).unwrap();
        assert!((g - 124.14e-9).abs() < 0.01e-9, "{g}");
    }

    #[test]
    fn decay_length_is_linear_in_wavelength() {
        let a = decay_length(633e-9, 1.4).unwrap();
        let b = decay_length(2.0 * 633e-9, 1.4).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn decay_length_rejects_bad_input() {
        assert!(decay_length(0.0, 1.333).is_err());
        assert!(decay_length(-1e-6, 1.333).is_err());
        assert!(decay_length(780e-9, 0.9).is_err());
    }
}
