//! C ABI over the capfat library.
//!
//! Grids and masks are opaque heap handles released with the matching
//! `*_free` function. Every fallible call returns a [`CapfatStatus`]; on
//! failure the message is kept per thread and read with
//! [`capfat_last_error`]. Points are passed as three doubles (the third is
//! ignored in the plane).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use capfat::capacity::{radial_condenser_oracle, solve_capacity, CapacityProblem};
use capfat::config::SpaceConfig;
use capfat::cover::epsilon_threshold;
use capfat::fatness::fatness_ratio;
use capfat::hardy::{estimate_hardy_level, HardyOptions};
use capfat::perfectness::{perfectness_constant, sharp_threshold, PerfectnessOptions};
use capfat::{ball_mask, Error, MetricGrid, Point, Region, SetMask};
use serde::Deserialize;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapfatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Fixture = 4,
    NotConverged = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque discretized domain.
pub struct CapfatGrid(MetricGrid);

/// Opaque cell set bound to one grid.
pub struct CapfatMask(SetMask);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CapfatStatus {
    match err {
        Error::Config(_) => CapfatStatus::Config,
        Error::Io(_) => CapfatStatus::Io,
        Error::InvalidParameter(_) | Error::GridMismatch { .. } => CapfatStatus::InvalidArgument,
        _ => CapfatStatus::Fixture,
    }
}

/// Run `f`, converting errors and panics into a status and the thread's
/// last error message.
fn guard(f: impl FnOnce() -> Result<(), (CapfatStatus, String)>) -> CapfatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CapfatStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside capfat".into());
            CapfatStatus::Panic
        }
    }
}

fn lib<T>(r: capfat::Result<T>) -> Result<T, (CapfatStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (CapfatStatus, String) {
    (CapfatStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (CapfatStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn point(p: *const f64) -> Result<Point, (CapfatStatus, String)> {
    if p.is_null() {
        return Err(null("point"));
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok([s[0], s[1], s[2]])
}

unsafe fn write<T>(out: *mut T, v: T, name: &str) -> Result<(), (CapfatStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn capfat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn capfat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridText {
    space: SpaceConfig,
    domain: Region,
}

/// Build a grid from TOML holding `[space]` and `[domain]` tables, in the
/// experiment config format, at the given spacing.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_grid_from_toml(
    toml_text: *const c_char,
    spacing: f64,
    out: *mut *mut CapfatGrid,
) -> CapfatStatus {
    guard(|| {
        if toml_text.is_null() {
            return Err(null("toml_text"));
        }
        let text = CStr::from_ptr(toml_text).to_str().map_err(|e| (CapfatStatus::Config, e.to_string()))?;
        let parsed: GridText = toml::from_str(text).map_err(|e| (CapfatStatus::Config, e.to_string()))?;
        let grid = lib(MetricGrid::build(&parsed.domain, parsed.space.params(spacing)))?;
        write(out, Box::into_raw(Box::new(CapfatGrid(grid))), "out")
    })
}

/// # Safety
/// `grid` must come from [`capfat_grid_from_toml`] and not be used after.
#[no_mangle]
pub unsafe extern "C" fn capfat_grid_free(grid: *mut CapfatGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Dimension, cells per axis (unused axes are 1) and total cell count.
///
/// # Safety
/// `grid` must be a live handle; `shape` must hold three `size_t`.
#[no_mangle]
pub unsafe extern "C" fn capfat_grid_shape(
    grid: *const CapfatGrid,
    dim: *mut usize,
    shape: *mut usize,
    len: *mut usize,
) -> CapfatStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let s = g.lattice().shape();
        write(dim, g.dim(), "dim")?;
        if shape.is_null() {
            return Err(null("shape"));
        }
        std::slice::from_raw_parts_mut(shape, 3).copy_from_slice(&s);
        write(len, g.lattice().len(), "len")
    })
}

/// Copy the complement-distance field (x-fastest) into `out[0..len]`.
///
/// # Safety
/// `grid` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn capfat_grid_distance(grid: *const CapfatGrid, out: *mut f64, len: usize) -> CapfatStatus {
    guard(|| {
        let d = deref(grid, "grid")?.0.dist_field();
        if len != d.len() {
            return Err((CapfatStatus::InvalidArgument, format!("buffer holds {len} cells, grid has {}", d.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(d);
        Ok(())
    })
}

/// The domain cells of `grid`.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_mask_domain(grid: *const CapfatGrid, out: *mut *mut CapfatMask) -> CapfatStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        write(out, Box::into_raw(Box::new(CapfatMask(g.domain().clone()))), "out")
    })
}

/// The complement cells of `grid`.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_mask_complement(grid: *const CapfatGrid, out: *mut *mut CapfatMask) -> CapfatStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        write(out, Box::into_raw(Box::new(CapfatMask(g.complement()))), "out")
    })
}

/// Cells with centers in the open ball `B(center, r)`.
///
/// # Safety
/// `grid` must be a live handle, `center` must hold three doubles and
/// `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_mask_ball(
    grid: *const CapfatGrid,
    center: *const f64,
    r: f64,
    out: *mut *mut CapfatMask,
) -> CapfatStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let m = lib(ball_mask(g.lattice(), &point(center)?, r))?;
        write(out, Box::into_raw(Box::new(CapfatMask(m))), "out")
    })
}

/// Number of cells in `mask`, or 0 for null.
///
/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn capfat_mask_len(mask: *const CapfatMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.len())
}

/// # Safety
/// `mask` must come from a `capfat_mask_*` constructor and not be used
/// after.
#[no_mangle]
pub unsafe extern "C" fn capfat_mask_free(mask: *mut CapfatMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// `cap_p(plate, environment)`; a null environment means the domain.
/// Writes the value even when the solver stops unconverged and then
/// returns [`CapfatStatus::NotConverged`].
///
/// # Safety
/// Handles must be live and belong to `grid`; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_solve_capacity(
    grid: *const CapfatGrid,
    plate: *const CapfatMask,
    environment: *const CapfatMask,
    p: f64,
    value: *mut f64,
) -> CapfatStatus {
    let mut converged = true;
    let status = guard(|| {
        let g = &deref(grid, "grid")?.0;
        let plate = &deref(plate, "plate")?.0;
        let env = match environment.as_ref() {
            Some(m) => &m.0,
            None => g.domain(),
        };
        let res = lib(solve_capacity(&CapacityProblem::new(g.lattice(), plate, env, p)))?;
        converged = res.converged;
        write(value, res.value, "value")
    });
    if status == CapfatStatus::Ok && !converged {
        set_error("capacity solver did not converge".into());
        return CapfatStatus::NotConverged;
    }
    status
}

/// `cap_p(B(x, r) ∩ E, B(x, 2r)) / cap_p(B(x, r), B(x, 2r))`.
///
/// # Safety
/// Handles must be live, `x` must hold three doubles and `ratio` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_fatness_ratio(
    grid: *const CapfatGrid,
    e: *const CapfatMask,
    x: *const f64,
    r: f64,
    p: f64,
    ratio: *mut f64,
) -> CapfatStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let e = &deref(e, "e")?.0;
        let row = lib(fatness_ratio(g, e, &point(x)?, r, p))?;
        write(ratio, row.ratio, "ratio")
    })
}

/// Uniform perfectness constant of `n` points stored as consecutive
/// `dim`-tuples; `resolution` is the smallest scale examined (0 for exact
/// point sets, the spacing for cell centers).
///
/// # Safety
/// `coords` must hold `n * dim` doubles and `c_up` be writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_perfectness_constant(
    coords: *const f64,
    n: usize,
    dim: usize,
    resolution: f64,
    c_up: *mut f64,
) -> CapfatStatus {
    guard(|| {
        if coords.is_null() {
            return Err(null("coords"));
        }
        if dim != 2 && dim != 3 {
            return Err((CapfatStatus::InvalidArgument, format!("dimension must be 2 or 3, got {dim}")));
        }
        let flat = std::slice::from_raw_parts(coords, n * dim);
        let pts: Vec<Point> = flat
            .chunks(dim)
            .map(|c| [c[0], c[1], if dim == 3 { c[2] } else { 0.0 }])
            .collect();
        let opts = PerfectnessOptions { resolution, dedup_tol: resolution * 1e-6 };
        let rep = lib(perfectness_constant(&pts, &opts))?;
        write(c_up, rep.c_up, "c_up")
    })
}

/// `log 2 / log(c + 2)`.
#[no_mangle]
pub extern "C" fn capfat_epsilon_threshold(c: f64) -> f64 {
    epsilon_threshold(c)
}

/// `2^{1/(Q-p)} - 2`, failing outside `max(Q - log2/log3, 1) < p < Q`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_sharp_threshold(p: f64, dim: usize, out: *mut f64) -> CapfatStatus {
    guard(|| write(out, lib(sharp_threshold(p, dim))?, "out"))
}

/// Capacity of the spherical condenser `(B(r), B(R))` in `R^dim`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_radial_condenser(r: f64, big_r: f64, p: f64, dim: usize, out: *mut f64) -> CapfatStatus {
    guard(|| write(out, lib(radial_condenser_oracle(r, big_r, p, dim))?, "out"))
}

/// Estimate of the best Hardy constant on `grid` (a lower bound for the
/// continuum constant). Returns [`CapfatStatus::NotConverged`] with the
/// estimate written when the descent ran out of iterations.
///
/// # Safety
/// `grid` must be a live handle and `c_h` writable.
#[no_mangle]
pub unsafe extern "C" fn capfat_hardy_estimate(
    grid: *const CapfatGrid,
    p: f64,
    restarts: usize,
    seed: u64,
    c_h: *mut f64,
) -> CapfatStatus {
    let mut converged = true;
    let status = guard(|| {
        let g = &deref(grid, "grid")?.0;
        let opts = HardyOptions { restarts, seed, ..HardyOptions::default() };
        let level = lib(estimate_hardy_level(g, p, &opts))?;
        converged = level.converged;
        write(c_h, level.c_h_est, "c_h")
    });
    if status == CapfatStatus::Ok && !converged {
        set_error("Hardy descent did not converge".into());
        return CapfatStatus::NotConverged;
    }
    status
}
