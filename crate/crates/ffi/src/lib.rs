//! C ABI over the `ecfsense` core.
//!
//! Every fallible function returns an [`EcfStatus`]; on failure the message is
//! available from [`ecf_last_error`] on the same thread. Handles are opaque and
//! must be released with their matching `*_free` function.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! documents: output pointers writable, input buffers readable for the stated
//! length, strings NUL-terminated, handles obtained from this library and not
//! yet freed.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use clap::Parser;
use ecfsense::cli::{execute, Cli};
use ecfsense::config::parse_config_str;
use ecfsense::modes::{
    build_cross_section, evanescent_profile, solve_modes, CrossSection, Cut, ExposedCoreShape, FiberGeometry,
    GridSpec, GuidedMode,
};
use ecfsense::scattering::{Medium, Particle, Wavevector};
use ecfsense::sensing::{detect_events, DetectionSettings};
use ecfsense::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NoGuidedMode = 3,
    NotConverged = 4,
    Numerical = 5,
    OutOfRange = 6,
    Config = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&Error> for EcfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => EcfStatus::InvalidParameter,
            Error::NoGuidedMode => EcfStatus::NoGuidedMode,
            Error::NotConverged { .. } => EcfStatus::NotConverged,
            Error::NotPositiveDefinite { .. } | Error::DegenerateFit(_) | Error::ZeroVarianceReference => {
                EcfStatus::Numerical
            }
            Error::CutOutsideWindow { .. }
            | Error::EmptyRegion
            | Error::SampleRateMismatch { .. }
            | Error::EmptySeries
            | Error::TimestepTooLarge { .. } => EcfStatus::OutOfRange,
            Error::Config { .. } | Error::Format { .. } => EcfStatus::Config,
            Error::Io { .. } => EcfStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (EcfStatus, String)>) -> EcfStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EcfStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EcfStatus::Panic
        }
    }
}

fn core(e: Error) -> (EcfStatus, String) {
    (EcfStatus::from(&e), e.to_string())
}

fn null(name: &str) -> (EcfStatus, String) {
    (EcfStatus::NullPointer, format!("`{name}` is null"))
}

fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (EcfStatus, String)> {
    // SAFETY: caller passes a valid, writable pointer or null.
    unsafe { p.as_mut() }.ok_or_else(|| null(name))
}

fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, (EcfStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (EcfStatus::InvalidParameter, format!("`{name}` is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ecf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Evanescent decay length `λ / (2π n_m)` in meters.
#[no_mangle]
pub unsafe extern "C" fn ecf_decay_length(wavelength: f64, medium_index: f64, out_gamma: *mut f64) -> EcfStatus {
    guard(|| {
        let o = out(out_gamma, "out_gamma")?;
        *o = ecfsense::modes::decay_length(wavelength, medium_index).map_err(core)?;
        Ok(())
    })
}

/// Dipole scattering cross-section (m²) with the wavenumber taken in the medium.
#[no_mangle]
pub unsafe extern "C" fn ecf_dipole_cross_section(
    radius: f64,
    particle_index: f64,
    medium_index: f64,
    wavelength: f64,
    out_sigma: *mut f64,
) -> EcfStatus {
    guard(|| {
        let o = out(out_sigma, "out_sigma")?;
        let medium = Medium { index: medium_index, ..Medium::water() };
        *o = ecfsense::scattering::dipole_cross_section(
            &Particle::new(radius, particle_index, "ffi"),
            &medium,
            wavelength,
            Wavevector::Medium,
        )
        .map_err(core)?;
        Ok(())
    })
}

/// Volume-averaged evanescent intensity weight of a sphere touching the surface.
#[no_mangle]
pub unsafe extern "C" fn ecf_evanescent_weight(radius: f64, gamma: f64, out_weight: *mut f64) -> EcfStatus {
    guard(|| {
        let o = out(out_weight, "out_weight")?;
        *o = ecfsense::scattering::evanescent_weight(radius, gamma).map_err(core)?;
        Ok(())
    })
}

/// Power collected into the guided mode from one fiber end.
#[no_mangle]
pub unsafe extern "C" fn ecf_collected_power(scattered: f64, efficiency: f64, out_power: *mut f64) -> EcfStatus {
    guard(|| {
        let o = out(out_power, "out_power")?;
        *o = ecfsense::scattering::collected_power(scattered, efficiency).map_err(core)?;
        Ok(())
    })
}

/// Rasterized fiber cross-section.
pub struct EcfCrossSection {
    inner: CrossSection,
}

/// Guided modes solved on one cross-section, sorted by descending `n_eff`.
pub struct EcfModeSet {
    modes: Vec<GuidedMode>,
}

fn make_cross_section(
    geometry: FiberGeometry,
    spacing: f64,
    margin: f64,
    wavelength: f64,
    out_handle: *mut *mut EcfCrossSection,
) -> EcfStatus {
    guard(|| {
        let o = out(out_handle, "out_handle")?;
        *o = ptr::null_mut();
        let grid = GridSpec::with_margin(&geometry, spacing, margin);
        let inner = build_cross_section(&geometry, &grid, wavelength).map_err(core)?;
        *o = Box::into_raw(Box::new(EcfCrossSection { inner }));
        Ok(())
    })
}

/// Step-index core in a uniform background, `margin` meters of background on
/// every side.
#[no_mangle]
pub unsafe extern "C" fn ecf_cross_section_step_index(
    core_diameter: f64,
    core_index: f64,
    background_index: f64,
    spacing: f64,
    margin: f64,
    wavelength: f64,
    out_handle: *mut *mut EcfCrossSection,
) -> EcfStatus {
    let g = FiberGeometry::step_index(core_diameter, core_index, background_index);
    make_cross_section(g, spacing, margin, wavelength, out_handle)
}

/// Exposed-core preset with the default hole shape.
#[no_mangle]
pub unsafe extern "C" fn ecf_cross_section_exposed_core(
    core_diameter: f64,
    core_index: f64,
    medium_index: f64,
    internal_hole_index: f64,
    spacing: f64,
    margin: f64,
    wavelength: f64,
    out_handle: *mut *mut EcfCrossSection,
) -> EcfStatus {
    let g = FiberGeometry::exposed_core(
        core_diameter,
        core_index,
        medium_index,
        internal_hole_index,
        &ExposedCoreShape::default(),
    );
    make_cross_section(g, spacing, margin, wavelength, out_handle)
}

/// Grid dimensions of a cross-section.
#[no_mangle]
pub unsafe extern "C" fn ecf_cross_section_shape(
    handle: *const EcfCrossSection,
    out_nx: *mut usize,
    out_ny: *mut usize,
) -> EcfStatus {
    guard(|| {
        // SAFETY: handle comes from a constructor above or is null.
        let cs = unsafe { handle.as_ref() }.ok_or_else(|| null("handle"))?;
        let (nx, ny) = cs.inner.shape();
        *out(out_nx, "out_nx")? = nx;
        *out(out_ny, "out_ny")? = ny;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ecf_cross_section_free(handle: *mut EcfCrossSection) {
    if !handle.is_null() {
        // SAFETY: handle was produced by Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Solves for the `n_modes` highest-index guided modes.
#[no_mangle]
pub unsafe extern "C" fn ecf_solve_modes(
    cross_section: *const EcfCrossSection,
    n_modes: usize,
    out_handle: *mut *mut EcfModeSet,
) -> EcfStatus {
    guard(|| {
        let o = out(out_handle, "out_handle")?;
        *o = ptr::null_mut();
        // SAFETY: see ecf_cross_section_shape.
        let cs = unsafe { cross_section.as_ref() }.ok_or_else(|| null("cross_section"))?;
        let modes = solve_modes(&cs.inner, n_modes).map_err(core)?;
        *o = Box::into_raw(Box::new(EcfModeSet { modes }));
        Ok(())
    })
}

fn mode_at<'a>(set: *const EcfModeSet, k: usize) -> Result<&'a GuidedMode, (EcfStatus, String)> {
    // SAFETY: set comes from ecf_solve_modes or is null.
    let set = unsafe { set.as_ref() }.ok_or_else(|| null("modes"))?;
    set.modes.get(k).ok_or_else(|| {
        (EcfStatus::OutOfRange, format!("mode {k} requested, {} solved", set.modes.len()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ecf_mode_count(set: *const EcfModeSet) -> usize {
    // SAFETY: see mode_at.
    unsafe { set.as_ref() }.map_or(0, |s| s.modes.len())
}

#[no_mangle]
pub unsafe extern "C" fn ecf_mode_n_eff(set: *const EcfModeSet, k: usize, out_n_eff: *mut f64) -> EcfStatus {
    guard(|| {
        let m = mode_at(set, k)?;
        *out(out_n_eff, "out_n_eff")? = m.n_eff;
        Ok(())
    })
}

/// Copies the row-major field of mode `k` into `buffer`. `len` must be at least
/// `nx * ny`.
#[no_mangle]
pub unsafe extern "C" fn ecf_mode_field(set: *const EcfModeSet, k: usize, buffer: *mut f64, len: usize) -> EcfStatus {
    guard(|| {
        let m = mode_at(set, k)?;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        if len < m.field.len() {
            return Err((EcfStatus::BufferTooSmall, format!("need {} values, got {len}", m.field.len())));
        }
        // SAFETY: buffer holds at least `len` writable doubles.
        unsafe { ptr::copy_nonoverlapping(m.field.as_ptr(), buffer, m.field.len()) };
        Ok(())
    })
}

/// Field at the core surface relative to its maximum, along the default
/// vertical cut toward the open hole.
#[no_mangle]
pub unsafe extern "C" fn ecf_mode_surface_fraction(
    set: *const EcfModeSet,
    k: usize,
    cross_section: *const EcfCrossSection,
    out_fraction: *mut f64,
) -> EcfStatus {
    guard(|| {
        let m = mode_at(set, k)?;
        // SAFETY: see ecf_cross_section_shape.
        let cs = unsafe { cross_section.as_ref() }.ok_or_else(|| null("cross_section"))?;
        let p = evanescent_profile(m, &cs.inner, &Cut::default()).map_err(core)?;
        *out(out_fraction, "out_fraction")? = p.surface_fraction;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ecf_mode_set_free(set: *mut EcfModeSet) {
    if !set.is_null() {
        // SAFETY: set was produced by Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(set) });
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EcfEvent {
    pub start: f64,
    pub end: f64,
    pub peak: f64,
    pub snr: f64,
}

/// Threshold detector over a normalized amplitude series. Writes up to
/// `capacity` events and the total found to `out_count`; returns
/// `BufferTooSmall` when the total exceeds the capacity.
#[no_mangle]
pub unsafe extern "C" fn ecf_detect_events(
    amplitude: *const f64,
    len: usize,
    rate: f64,
    start_time: f64,
    threshold: f64,
    min_separation: f64,
    events: *mut EcfEvent,
    capacity: usize,
    out_count: *mut usize,
) -> EcfStatus {
    guard(|| {
        if amplitude.is_null() {
            return Err(null("amplitude"));
        }
        let count = out(out_count, "out_count")?;
        // SAFETY: amplitude holds `len` readable doubles.
        let a = unsafe { std::slice::from_raw_parts(amplitude, len) };
        let settings = DetectionSettings { threshold, min_separation };
        let found = detect_events(a, rate, start_time, &settings).map_err(core)?;
        *count = found.len();
        if capacity > 0 && events.is_null() {
            return Err(null("events"));
        }
        for (k, e) in found.iter().take(capacity).enumerate() {
            // SAFETY: events holds `capacity` writable records.
            unsafe {
                *events.add(k) = EcfEvent {
                    start: e.start,
                    end: e.end,
                    peak: e.peak,
                    snr: e.snr,
                }
            };
        }
        if found.len() > capacity {
            return Err((
                EcfStatus::BufferTooSmall,
                format!("{} events found, capacity {capacity}", found.len()),
            ));
        }
        Ok(())
    })
}

/// Runs a CLI command (for example `"scaling"` or `"figure trace"`) on a TOML
/// config given as text and writes its artifacts to `out_dir`.
#[no_mangle]
pub unsafe extern "C" fn ecf_run_command(
    command: *const c_char,
    config_toml: *const c_char,
    out_dir: *const c_char,
) -> EcfStatus {
    guard(|| {
        let command = text(command, "command")?;
        let config = text(config_toml, "config_toml")?;
        let dir = text(out_dir, "out_dir")?;
        let cli = Cli::try_parse_from(std::iter::once("ecfsense").chain(command.split_whitespace()))
            .map_err(|e| (EcfStatus::InvalidParameter, e.to_string().trim().to_owned()))?;
        let cfg = parse_config_str(config).map_err(core)?;
        let bundle = execute(cli.command, &cfg).map_err(core)?;
        bundle.write(Path::new(dir)).map_err(core)?;
        Ok(())
    })
}
