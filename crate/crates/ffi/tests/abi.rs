use std::ffi::{CStr, CString};
use std::ptr;

use capfat_ffi::*;

const DISK: &str = r#"
[space]
bbox = { lo = [-2.25, -2.25], hi = [2.25, 2.25] }

[domain]
kind = "disk"
center = [0.0, 0.0]
radius = 2.0
"#;

fn grid(text: &str, h: f64) -> *mut CapfatGrid {
    let src = CString::new(text).unwrap();
    let mut g = ptr::null_mut();
    let st = unsafe { capfat_grid_from_toml(src.as_ptr(), h, &mut g) };
    assert_eq!(st, CapfatStatus::Ok);
    assert!(!g.is_null());
    g
}

fn last_error() -> String {
    let p = capfat_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(capfat_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn grid_shape_and_distance_copy() {
    let g = grid(DISK, 0.125);
    let (mut dim, mut shape, mut len) = (0usize, [0usize; 3], 0usize);
    unsafe {
        assert_eq!(capfat_grid_shape(g, &mut dim, shape.as_mut_ptr(), &mut len), CapfatStatus::Ok);
        assert_eq!(dim, 2);
        assert_eq!(shape, [36, 36, 1]);
        assert_eq!(len, 36 * 36);
        let mut d = vec![0.0; len];
        assert_eq!(capfat_grid_distance(g, d.as_mut_ptr(), len), CapfatStatus::Ok);
        assert!(d.iter().any(|&x| x > 1.5));
        assert_eq!(capfat_grid_distance(g, d.as_mut_ptr(), len - 1), CapfatStatus::InvalidArgument);
        assert!(last_error().contains("buffer"));
        capfat_grid_free(g);
    }
}

#[test]
fn condenser_capacity_matches_the_radial_value() {
    let g = grid(DISK, 1.0 / 32.0);
    unsafe {
        let mut plate = ptr::null_mut();
        assert_eq!(capfat_mask_ball(g, [0.0, 0.0, 0.0].as_ptr(), 1.0, &mut plate), CapfatStatus::Ok);
        assert!(capfat_mask_len(plate) > 0);
        let mut cap = 0.0;
        assert_eq!(capfat_solve_capacity(g, plate, ptr::null(), 2.0, &mut cap), CapfatStatus::Ok);
        let mut exact = 0.0;
        assert_eq!(capfat_radial_condenser(1.0, 2.0, 2.0, 2, &mut exact), CapfatStatus::Ok);
        assert!((cap - exact).abs() / exact < 0.05, "{cap} vs {exact}");
        capfat_mask_free(plate);
        capfat_grid_free(g);
    }
}

#[test]
fn masks_from_other_grids_are_rejected() {
    let a = grid(DISK, 0.125);
    let b = grid(DISK, 0.25);
    unsafe {
        let mut plate = ptr::null_mut();
        capfat_mask_ball(b, [0.0, 0.0, 0.0].as_ptr(), 1.0, &mut plate);
        let mut cap = 0.0;
        assert_eq!(capfat_solve_capacity(a, plate, ptr::null(), 2.0, &mut cap), CapfatStatus::InvalidArgument);
        capfat_mask_free(plate);
        capfat_grid_free(a);
        capfat_grid_free(b);
    }
}

#[test]
fn fatness_of_the_complement_near_the_boundary() {
    let g = grid(&DISK.replace("2.25", "3.0"), 1.0 / 16.0);
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(capfat_mask_complement(g, &mut e), CapfatStatus::Ok);
        let mut ratio = 0.0;
        let st = capfat_fatness_ratio(g, e, [2.0, 0.0, 0.0].as_ptr(), 0.25, 2.0, &mut ratio);
        assert_eq!(st, CapfatStatus::Ok, "{}", last_error());
        assert!(ratio > 0.2 && ratio <= 1.0 + 1e-9, "{ratio}");
        capfat_mask_free(e);
        capfat_grid_free(g);
    }
}

#[test]
fn perfectness_and_thresholds() {
    let pts = [0.0, 0.0, 1.0, 0.0, 3.0, 0.0];
    let mut c = 0.0;
    unsafe {
        assert_eq!(capfat_perfectness_constant(pts.as_ptr(), 3, 2, 0.0, &mut c), CapfatStatus::Ok);
        assert!((c - 3.0).abs() < 1e-12, "{c}");
        assert_eq!(capfat_perfectness_constant(pts.as_ptr(), 1, 2, 0.0, &mut c), CapfatStatus::Fixture);
        assert_eq!(capfat_perfectness_constant(pts.as_ptr(), 3, 4, 0.0, &mut c), CapfatStatus::InvalidArgument);

        let mut t = 0.0;
        assert_eq!(capfat_sharp_threshold(1.5, 2, &mut t), CapfatStatus::Ok);
        assert!((t - 2.0).abs() < 1e-12);
        assert_eq!(capfat_sharp_threshold(1.0, 2, &mut t), CapfatStatus::Fixture);
        assert!(last_error().contains("window"));
    }
    assert!((capfat_epsilon_threshold(2.0) - 0.5).abs() < 1e-12);
}

#[test]
fn bad_input_sets_status_and_message() {
    unsafe {
        let mut g = ptr::null_mut();
        let bad = CString::new("[space]\nbbox = 3\n").unwrap();
        assert_eq!(capfat_grid_from_toml(bad.as_ptr(), 0.1, &mut g), CapfatStatus::Config);
        assert!(g.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(capfat_grid_from_toml(ptr::null(), 0.1, &mut g), CapfatStatus::NullPointer);
        assert_eq!(capfat_mask_len(ptr::null()), 0);
        capfat_grid_free(ptr::null_mut());
        capfat_mask_free(ptr::null_mut());
    }
}

#[test]
fn hardy_estimate_on_a_coarse_disk() {
    let g = grid(DISK, 0.25);
    let mut c = 0.0;
    let st = unsafe { capfat_hardy_estimate(g, 2.0, 2, 7, &mut c) };
    assert!(st == CapfatStatus::Ok || st == CapfatStatus::NotConverged);
    assert!(c.is_finite() && c > 0.0);
    unsafe { capfat_grid_free(g) };
}
