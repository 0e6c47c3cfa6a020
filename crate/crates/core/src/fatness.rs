//! Capacity-density ratios `cap_p(B ∩ E, 2B) / cap_p(B, 2B)` over centers
//! and scales.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{log_cutoff_upper_bound, radial_condenser_oracle, sphere_area, solve_capacity, CapacityProblem};
use crate::error::{Error, Result};
use crate::grid::{coords, distance, Lattice, MetricGrid, Point, SetMask};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FatnessRow {
    #[serde(with = "coords")]
    pub center: Point,
    pub radius: f64,
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `B(x, r) ∩ E` holds no cell at this scale.
    pub thin: bool,
    pub converged: bool,
}

/// Memo of `cap_p(B(x, r), B(x, 2r))` on windows, keyed by the radius,
/// spacing, exponent and the position of `x` inside its cell.
#[derive(Default)]
pub struct DenominatorCache {
    map: Mutex<HashMap<[u64; 7], (f64, bool)>>,
}

impl DenominatorCache {
    fn key(lattice: &Lattice, x: &Point, r: f64, p: f64) -> [u64; 7] {
        let h = lattice.spacing();
        let o = lattice.origin();
        let mut k = [r.to_bits(), h.to_bits(), p.to_bits(), lattice.dim() as u64, 0, 0, 0];
        for a in 0..lattice.dim() {
            let t = (x[a] - o[a]) / h;
            k[4 + a] = ((t - t.floor()) * 1e9).round() as u64;
        }
        k
    }
}

struct Window {
    lattice: Lattice,
    map: Vec<usize>,
    ball: SetMask,
    env: SetMask,
}

fn window(lattice: &Lattice, x: &Point, r: f64) -> Result<Window> {
    let pad = 2.0 * lattice.spacing();
    let (win, map) = lattice.window(x, 2.0 * r + pad)?;
    let ball = SetMask::from_predicate(&win, |i| distance(&win.center(i), x) < r);
    let env = SetMask::from_predicate(&win, |i| distance(&win.center(i), x) < 2.0 * r);
    Ok(Window { lattice: win, map, ball, env })
}

pub fn fatness_ratio(grid: &MetricGrid, e: &SetMask, x: &Point, r: f64, p: f64) -> Result<FatnessRow> {
    fatness_ratio_cached(grid, e, x, r, p, &DenominatorCache::default())
}

pub fn fatness_ratio_cached(
    grid: &MetricGrid,
    e: &SetMask,
    x: &Point,
    r: f64,
    p: f64,
    cache: &DenominatorCache,
) -> Result<FatnessRow> {
    let lat = grid.lattice();
    e.check_lattice(lat)?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let w = window(lat, x, r)?;
    let plate = e.restrict(&w.lattice, &w.map).intersection(&w.ball);
    let key = DenominatorCache::key(lat, x, r, p);
    let cached = cache.map.lock().unwrap().get(&key).copied();
    let (denominator, den_ok) = match cached {
        Some(v) => v,
        None => {
            let res = solve_capacity(&CapacityProblem::new(&w.lattice, &w.ball, &w.env, p))?;
            let v = (res.value, res.converged);
            cache.map.lock().unwrap().insert(key, v);
            v
        }
    };
    if plate.is_empty() {
        return Ok(FatnessRow { center: *x, radius: r, ratio: 0.0, numerator: 0.0, denominator, thin: true, converged: den_ok });
    }
    let (numerator, num_ok) = if plate.len() == w.ball.len() {
        (denominator, true)
    } else {
        let res = solve_capacity(&CapacityProblem::new(&w.lattice, &plate, &w.env, p))?;
        (res.value, res.converged)
    };
    Ok(FatnessRow {
        center: *x,
        radius: r,
        ratio: numerator / denominator,
        numerator,
        denominator,
        thin: false,
        converged: den_ok && num_ok,
    })
}

/// Up to `count` cells of `candidates`, spread out by farthest-point
/// sampling starting from the cell nearest the candidates' centroid.
pub fn farthest_point_centers(lattice: &Lattice, candidates: &[usize], count: usize) -> Vec<usize> {
    if candidates.is_empty() || count == 0 {
        return Vec::new();
    }
    let pts: Vec<Point> = candidates.iter().map(|&c| lattice.center(c)).collect();
    let mut centroid = [0.0; 3];
    for p in &pts {
        for k in 0..3 {
            centroid[k] += p[k] / pts.len() as f64;
        }
    }
    let first = argmin(pts.iter().map(|p| distance(p, &centroid)));
    let mut chosen = vec![first];
    let mut gap: Vec<f64> = pts.iter().map(|p| distance(p, &pts[first])).collect();
    while chosen.len() < count.min(pts.len()) {
        let next = argmin(gap.iter().map(|g| -g));
        if gap[next] == 0.0 {
            break;
        }
        chosen.push(next);
        for (g, p) in gap.iter_mut().zip(&pts) {
            *g = g.min(distance(p, &pts[next]));
        }
    }
    chosen.into_iter().map(|k| candidates[k]).collect()
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Clone, Debug, Serialize)]
pub struct FatnessScan {
    pub p: f64,
    pub spacing: f64,
    pub radii: Vec<f64>,
    pub rows: Vec<FatnessRow>,
    /// Smallest ratio over all rows.
    pub c0_est: f64,
    /// `(r, min ratio at r)`.
    pub min_by_radius: Vec<(f64, f64)>,
    /// Rows skipped because `B(x, 2r)` left the bounding box.
    pub skipped: usize,
    pub converged: bool,
}

/// Ratios at `count` centers drawn from `candidates` (cells of `e`) and at
/// every radius in `radii`. Rows whose window leaves the lattice are
/// skipped; centers are drawn among candidates whose window fits at the
/// largest radius.
pub fn fatness_scan(
    grid: &MetricGrid,
    e: &SetMask,
    candidates: &SetMask,
    p: f64,
    count: usize,
    radii: &[f64],
) -> Result<FatnessScan> {
    let lat = grid.lattice();
    e.check_lattice(lat)?;
    candidates.check_lattice(lat)?;
    if e.is_empty() {
        return Err(Error::EmptyMask);
    }
    if count == 0 || radii.is_empty() {
        return Err(Error::InvalidParameter("fatness scan needs at least one center and one radius".into()));
    }
    let pool: Vec<usize> = candidates.cells().iter().copied().filter(|&c| e.contains(c)).collect();
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    let rmin = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let fits = |c: usize, r: f64| lat.window(&lat.center(c), 2.0 * r + 2.0 * lat.spacing()).is_ok();
    let mut usable: Vec<usize> = pool.iter().copied().filter(|&c| fits(c, rmax)).collect();
    if usable.is_empty() {
        usable = pool.iter().copied().filter(|&c| fits(c, rmin)).collect();
    }
    if usable.is_empty() {
        return Err(Error::WindowOutOfBounds);
    }
    let centers = farthest_point_centers(lat, &usable, count);
    let jobs: Vec<(usize, f64)> = centers.iter().flat_map(|&c| radii.iter().map(move |&r| (c, r))).collect();
    let cache = DenominatorCache::default();
    let results: Vec<Result<Option<FatnessRow>>> = jobs
        .par_iter()
        .map(|&(c, r)| match fatness_ratio_cached(grid, e, &lat.center(c), r, p, &cache) {
            Ok(row) => Ok(Some(row)),
            Err(Error::WindowOutOfBounds) => Ok(None),
            Err(err) => Err(err),
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    let c0_est = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let min_by_radius = radii
        .iter()
        .map(|&r| {
            let m = rows.iter().filter(|row| row.radius == r).map(|row| row.ratio).fold(f64::INFINITY, f64::min);
            (r, m)
        })
        .collect();
    let converged = rows.iter().all(|r| r.converged);
    Ok(FatnessScan { p, spacing: lat.spacing(), radii: radii.to_vec(), rows, c0_est, min_by_radius, skipped, converged })
}

/// Ratio trend across a refinement ladder.
#[derive(Clone, Debug, Serialize)]
pub struct FatnessTrend {
    pub spacings: Vec<f64>,
    pub c0: Vec<f64>,
    /// `c0` fell by at least the decline factor at every refinement.
    pub declining: bool,
    pub floor: f64,
    pub fat: bool,
}

/// Declines of less than this fraction per refinement count as noise.
pub const TREND_DECLINE: f64 = 0.05;
/// Smallest finest-level `c0` accepted as fat.
pub const FAT_FLOOR: f64 = 0.2;

/// "Fat at tested scales" when the finest `c0` clears [`FAT_FLOOR`] and
/// the ratios do not decline steadily under refinement.
pub fn fatness_trend(scans: &[FatnessScan]) -> FatnessTrend {
    let spacings: Vec<f64> = scans.iter().map(|s| s.spacing).collect();
    let c0: Vec<f64> = scans.iter().map(|s| s.c0_est).collect();
    let declining = c0.len() >= 2 && c0.windows(2).all(|w| w[1] <= (1.0 - TREND_DECLINE) * w[0]);
    let last = c0.last().copied().unwrap_or(0.0);
    FatnessTrend { spacings, c0, declining, floor: FAT_FLOOR, fat: !declining && last >= FAT_FLOOR }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FatnessPerfectnessBound {
    /// Upper constant in `cap_p(B(r/m), B(2r)) <= C_up r^{Q-p} / log(m)^p`.
    pub c_upper: f64,
    /// Lower constant in `cap_p(B(r), B(2r)) >= C_low r^{Q-p}`.
    pub c_lower: f64,
    /// Largest annulus ratio `m` with `B(x, r) \ B(x, r/m)` free of the set.
    pub m_max: f64,
}

/// Annulus-gap bound for a uniformly `p`-fat set with constant `c0`: an
/// empty annulus `B(x, r) \ B(x, r/m)` forces
/// `c0 C_low <= C_up / log(m)^p`, so `m <= exp((C_up / (c0 C_low))^{1/p})`.
pub fn fatness_to_perfectness_bound(c0: f64, p: f64, dim: usize) -> Result<FatnessPerfectnessBound> {
    let q = dim as f64;
    if !(p < q) {
        return Err(Error::RequiresSubcriticalExponent { p, dim });
    }
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(Error::InvalidParameter(format!("fatness constant must lie in (0, 1], got {c0}")));
    }
    // the log cutoff between r/m and r has energy at most ω r^{Q-p} / ((Q-p) log(m)^p)
    let c_upper = sphere_area(dim) / (q - p);
    let c_lower = radial_condenser_oracle(1.0, 2.0, p, dim)?;
    let m_max = ((c_upper / (c0 * c_lower)).powf(1.0 / p)).exp();
    Ok(FatnessPerfectnessBound { c_upper, c_lower, m_max })
}

/// The log-cutoff energy `log_cutoff_upper_bound(r, r/m)` never exceeds
/// `C_up r^{Q-p} / log(m)^p`; exposed for consistency checks.
pub fn cutoff_energy(r: f64, m: f64, p: f64, dim: usize) -> Result<f64> {
    log_cutoff_upper_bound(r, r / m, p, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Region;
    use crate::grid::{point2, SpaceParams};

    #[test]
    fn full_plate_has_ratio_one() {
        let grid = MetricGrid::build(&Region::disk(point2(0.0, 0.0), 1.0), SpaceParams::planar(1.0 / 32.0, 2.0)).unwrap();
        let e = grid.complement();
        let x = grid.lattice().center(grid.lattice().cell_of(&point2(1.6, 0.0)).unwrap());
        let row = fatness_ratio(&grid, &e, &x, 0.1, 2.0).unwrap();
        assert!((row.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thin_scale_is_flagged() {
        let grid = MetricGrid::build(&Region::disk(point2(0.0, 0.0), 1.0), SpaceParams::planar(1.0 / 16.0, 2.0)).unwrap();
        let e = SetMask::from_cells(grid.lattice(), [grid.lattice().cell_of(&point2(1.5, 1.5)).unwrap()]);
        let row = fatness_ratio(&grid, &e, &point2(0.0, 0.0), 0.25, 2.0).unwrap();
        assert!(row.thin && row.ratio == 0.0);
    }

    #[test]
    fn bound_grows_as_c0_shrinks() {
        let a = fatness_to_perfectness_bound(0.5, 1.5, 2).unwrap();
        let b = fatness_to_perfectness_bound(0.1, 1.5, 2).unwrap();
        assert!(a.m_max.is_finite() && b.m_max > a.m_max);
        assert!(matches!(fatness_to_perfectness_bound(0.5, 2.0, 2), Err(Error::RequiresSubcriticalExponent { .. })));
    }

    #[test]
    fn cutoff_energy_respects_upper_constant() {
        for m in [2.0, 10.0, 100.0] {
            let b = fatness_to_perfectness_bound(0.5, 1.5, 2).unwrap();
            let e = cutoff_energy(0.7, m, 1.5, 2).unwrap();
            assert!(e <= b.c_upper * 0.7f64.powf(0.5) / m.ln().powf(1.5) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn farthest_points_spread_out() {
        let lat = Lattice::from_params(&SpaceParams::planar(0.25, 1.0));
        let all: Vec<usize> = (0..lat.len()).collect();
        let c = farthest_point_centers(&lat, &all, 5);
        assert_eq!(c.len(), 5);
        let pts: Vec<_> = c.iter().map(|&i| lat.center(i)).collect();
        // after the central start, the four picks are the corners
        for p in &pts[1..] {
            assert!((p[0].abs() - 0.875).abs() < 1e-12 && (p[1].abs() - 0.875).abs() < 1e-12);
        }
    }
}
