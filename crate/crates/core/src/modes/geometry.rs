use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_index, ensure_positive, Error, Result};

/// Fused silica at 780 nm.
pub const SILICA_INDEX: f64 = 1.454;
/// Water at 780 nm.
pub const WATER_INDEX: f64 = 1.333;
pub const AIR_INDEX: f64 = 1.0;

/// Minimum number of grid cells across the core diameter.
pub const MIN_CELLS_ACROSS_CORE: f64 = 20.0;

/// Recommended background margin around the core on every side (m).
pub const RECOMMENDED_MARGIN: f64 = 2.0e-6;

/// A circular region whose index overrides the core and background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    /// Center relative to the core center (m).
    pub center: [f64; 2],
    pub radius: f64,
    pub index: f64,
}

impl Hole {
    fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Geometry descriptor of the simulated fiber cross-section.
///
/// The silica core is a disk centered at the origin. Holes are applied after
/// the core, so a hole overlapping the disk carves it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberGeometry {
    pub core_diameter: f64,
    pub core_index: f64,
    pub background_index: f64,
    #[serde(default)]
    pub holes: Vec<Hole>,
}

/// Shape parameters of the exposed-core preset, in units of the core diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExposedCoreShape {
    pub internal_hole_radius: f64,
    pub internal_hole_overlap: f64,
    pub open_hole_radius: f64,
    pub open_hole_overlap: f64,
}

impl Default for ExposedCoreShape {
    fn default() -> Self {
        Self {
            internal_hole_radius: 2.5,
            internal_hole_overlap: 0.05,
            open_hole_radius: 10.0,
            open_hole_overlap: 0.15,
        }
    }
}

impl FiberGeometry {
    /// Plain circular step-index core in a uniform background.
    pub fn step_index(core_diameter: f64, core_index: f64, background_index: f64) -> Self {
        Self {
            core_diameter,
            core_index,
            background_index,
            holes: Vec::new(),
        }
    }

    /// Exposed-core fiber: the core is bounded by two internal holes (lower left
    /// and lower right) and one open hole facing `+y` that is filled with the
    /// surrounding medium.
    pub fn exposed_core(
        core_diameter: f64,
        core_index: f64,
        medium_index: f64,
        internal_hole_index: f64,
        shape: &ExposedCoreShape,
    ) -> Self {
        let r = 0.5 * core_diameter;
        let ri = shape.internal_hole_radius * core_diameter;
        let ro = shape.open_hole_radius * core_diameter;
        let ci = r + ri - shape.internal_hole_overlap * core_diameter;
        let co = r + ro - shape.open_hole_overlap * core_diameter;
        // 210 and 330 degrees, written out so the pair is mirror-exact.
        let (s, c) = (0.5, 0.75f64.sqrt());
        let holes = vec![
            Hole {
                center: [0.0, co],
                radius: ro,
                index: medium_index,
            },
            Hole {
                center: [-c * ci, -s * ci],
                radius: ri,
                index: internal_hole_index,
            },
            Hole {
                center: [c * ci, -s * ci],
                radius: ri,
                index: internal_hole_index,
            },
        ];
        Self {
            core_diameter,
            core_index,
            background_index: medium_index,
            holes,
        }
    }

    pub fn core_radius(&self) -> f64 {
        0.5 * self.core_diameter
    }

    /// Index at a point, following the rasterization rule.
    pub fn index_at(&self, x: f64, y: f64) -> f64 {
        let r = self.core_radius();
        let mut n = if x * x + y * y <= r * r {
            self.core_index
        } else {
            self.background_index
        };
        for hole in &self.holes {
            if hole.contains(x, y) {
                n = hole.index;
            }
        }
        n
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("core_diameter", self.core_diameter)?;
        ensure_index("core_index", self.core_index)?;
        ensure_index("background_index", self.background_index)?;
        for hole in &self.holes {
            ensure_positive("hole.radius", hole.radius)?;
            ensure_index("hole.index", hole.index)?;
            if !(hole.center[0].is_finite() && hole.center[1].is_finite()) {
                return Err(Error::invalid("hole.center", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Rectangular window centered on the core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spacing: f64,
    /// Window width and height (m).
    pub extent: [f64; 2],
}

impl GridSpec {
    /// Window covering the core plus `margin` on every side.
    pub fn with_margin(geometry: &FiberGeometry, spacing: f64, margin: f64) -> Self {
        let side = geometry.core_diameter + 2.0 * margin;
        Self {
            spacing,
            extent: [side, side],
        }
    }

    pub fn cells(&self) -> (usize, usize) {
        let nx = (self.extent[0] / self.spacing).round().max(1.0) as usize;
        let ny = (self.extent[1] / self.spacing).round().max(1.0) as usize;
        (nx, ny)
    }
}

/// Rasterized refractive-index map of the cross-section at one wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    geometry: FiberGeometry,
    wavelength: f64,
    spacing: f64,
    nx: usize,
    ny: usize,
    /// Row-major, `x` fastest: `index[j * nx + i]`.
    index: Vec<f64>,
}

/// Rasterizes the geometry on a cell-centered grid. A cell takes the index of
/// whatever region contains its center.
pub fn build_cross_section(
    geometry: &FiberGeometry,
    grid: &GridSpec,
    wavelength: f64,
) -> Result<CrossSection> {
    geometry.validate()?;
    ensure_positive("grid.spacing", grid.spacing)?;
    ensure_positive("grid.extent[0]", grid.extent[0])?;
    ensure_positive("grid.extent[1]", grid.extent[1])?;
    ensure_positive("wavelength", wavelength)?;
    let cells_across = geometry.core_diameter / grid.spacing;
    if cells_across < MIN_CELLS_ACROSS_CORE - 1e-9 {
        return Err(Error::invalid(
            "grid.spacing",
            format!(
                "{cells_across:.1} cells across the core, need at least {MIN_CELLS_ACROSS_CORE}"
            ),
        ));
    }
    let (nx, ny) = grid.cells();
    let half_w = 0.5 * nx as f64 * grid.spacing;
    let half_h = 0.5 * ny as f64 * grid.spacing;
    let r = geometry.core_radius();
    if half_w < r || half_h < r {
        return Err(Error::invalid(
            "grid.extent",
            format!(
                "window {:.3e} x {:.3e} m truncates the core of diameter {:.3e} m",
                2.0 * half_w,
                2.0 * half_h,
                geometry.core_diameter
            ),
        ));
    }
    let mut index = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = cell_center(j, ny, grid.spacing);
        for i in 0..nx {
            let x = cell_center(i, nx, grid.spacing);
            index.push(geometry.index_at(x, y));
        }
    }
    Ok(CrossSection {
        geometry: geometry.clone(),
        wavelength,
        spacing: grid.spacing,
        nx,
        ny,
        index,
    })
}

#[inline]
pub(crate) fn cell_center(i: usize, n: usize, h: f64) -> f64 {
    (i as f64 - 0.5 * (n as f64 - 1.0)) * h
}

impl CrossSection {
    pub fn geometry(&self) -> &FiberGeometry {
        &self.geometry
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    pub fn index_map(&self) -> &[f64] {
        &self.index
    }
    pub fn index(&self, i: usize, j: usize) -> f64 {
        self.index[j * self.nx + i]
    }
    pub fn x(&self, i: usize) -> f64 {
        cell_center(i, self.nx, self.spacing)
    }
    pub fn y(&self, j: usize) -> f64 {
        cell_center(j, self.ny, self.spacing)
    }
    pub fn extent(&self) -> [f64; 2] {
        [self.nx as f64 * self.spacing, self.ny as f64 * self.spacing]
    }
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }
    pub fn max_index(&self) -> f64 {
        self.index.iter().copied().fold(f64::MIN, f64::max)
    }
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Smallest distance between the core edge and the window border.
    pub fn background_margin(&self) -> f64 {
        let [w, h] = self.extent();
        0.5 * w.min(h) - self.geometry.core_radius()
    }

    pub fn meets_recommended_margin(&self) -> bool {
        self.background_margin() >= RECOMMENDED_MARGIN - 1e-12
    }

    /// Nearest cell to a point, or `None` outside the window.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = x / self.spacing + 0.5 * (self.nx as f64 - 1.0);
        let fj = y / self.spacing + 0.5 * (self.ny as f64 - 1.0);
        let (i, j) = (fi.round(), fj.round());
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }

    /// Stable digest of the rasterized problem, used to seed the eigensolver.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.nx as u64).to_le_bytes());
        hasher.update((self.ny as u64).to_le_bytes());
        hasher.update(self.spacing.to_bits().to_le_bytes());
        hasher.update(self.wavelength.to_bits().to_le_bytes());
        for n in &self.index {
            hasher.update(n.to_bits().to_le_bytes());
        }
        hasher.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_micron() -> FiberGeometry {
        FiberGeometry::step_index(2.0e-6, SILICA_INDEX, WATER_INDEX)
    }

    #[test]
    fn two_material_map() {
        let grid = GridSpec {
            spacing: 20e-9,
            extent: [4e-6, 4e-6],
        };
        let cs = build_cross_section(&two_micron(), &grid, 780e-9).unwrap();
        let mut distinct: Vec<u64> = cs.index_map().iter().map(|n| n.to_bits()).collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 2);
        assert_eq!(cs.shape(), (200, 200));
    }

    #[test]
    fn rasterization_is_bit_identical() {
        let grid = GridSpec {
            spacing: 20e-9,
            extent: [4e-6, 4e-6],
        };
        let g = FiberGeometry::exposed_core(
            2e-6,
            SILICA_INDEX,
            WATER_INDEX,
            AIR_INDEX,
            &ExposedCoreShape::default(),
        );
        let a = build_cross_section(&g, &grid, 780e-9).unwrap();
        let b = build_cross_section(&g, &grid, 780e-9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn core_area_matches_disk() {
        let grid = GridSpec {
            spacing: 20e-9,
            extent: [4e-6, 4e-6],
        };
        let cs = build_cross_section(&two_micron(), &grid, 780e-9).unwrap();
        let core = cs.index_map().iter().filter(|&&n| n == SILICA_INDEX).count() as f64;
        let expected = std::f64::consts::PI * 50.0 * 50.0;
        assert!((core / expected - 1.0).abs() < 0.02, "{core} vs {expected}");
    }

    #[test]
    fn rejects_truncating_window() {
        let grid = GridSpec {
            spacing: 20e-9,
            extent: [1.5e-6, 4e-6],
        };
        let err = build_cross_section(&two_micron(), &grid, 780e-9).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "grid.extent", .. }));
    }

    #[test]
    fn rejects_bad_spacing() {
        for spacing in [0.0, -1e-9, f64::NAN] {
            let grid = GridSpec {
                spacing,
                extent: [4e-6, 4e-6],
            };
            assert!(build_cross_section(&two_micron(), &grid, 780e-9).is_err());
        }
        let coarse = GridSpec {
            spacing: 200e-9,
            extent: [4e-6, 4e-6],
        };
        assert!(build_cross_section(&two_micron(), &coarse, 780e-9).is_err());
    }

    #[test]
    fn exposed_core_is_mirror_symmetric() {
        let g = FiberGeometry::exposed_core(
            2e-6,
            SILICA_INDEX,
            WATER_INDEX,
            AIR_INDEX,
            &ExposedCoreShape::default(),
        );
        let grid = GridSpec::with_margin(&g, 40e-9, RECOMMENDED_MARGIN);
        let cs = build_cross_section(&g, &grid, 780e-9).unwrap();
        let (nx, ny) = cs.shape();
        for j in 0..ny {
            for i in 0..nx {
                assert_eq!(cs.index(i, j), cs.index(nx - 1 - i, j));
            }
        }
        assert!(cs.meets_recommended_margin());
        // The open hole flattens the top of the core.
        let top = (0..ny).rev().find(|&j| cs.index(nx / 2, j) == SILICA_INDEX).unwrap();
        assert!(cs.y(top) < 0.9 * g.core_radius());
    }
}
