//! Uniform perfectness constants of finite sets and the perfectness
//! thresholds implied by other conditions.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{coords, distance, Lattice, Point, SetMask};

#[derive(Clone, Copy, Debug)]
pub struct PerfectnessOptions {
    /// Smallest scale examined. When positive it acts as the distance of
    /// a virtual nearest neighbour, so an isolated cell reports the gap
    /// from the grid scale to its true nearest neighbour.
    pub resolution: f64,
    /// Distances closer than this are treated as equal.
    pub dedup_tol: f64,
}

impl PerfectnessOptions {
    pub const EXACT: PerfectnessOptions = PerfectnessOptions { resolution: 0.0, dedup_tol: 0.0 };

    /// Cell-center sets: resolution one cell, deduplication at `h 1e-6`.
    pub fn for_grid(spacing: f64) -> Self {
        PerfectnessOptions { resolution: spacing, dedup_tol: spacing * 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfectnessReport {
    pub c_up: f64,
    #[serde(with = "coords")]
    pub witness_center: Point,
    /// The annulus `B(c, c_UP r) \ B(c, r)` holds no point while some point
    /// sits at distance exactly `c_UP r`.
    pub witness_r: f64,
    pub witness_index: usize,
    /// Largest consecutive distance ratio seen from each point.
    #[serde(skip)]
    pub per_center: Vec<f64>,
}

impl PerfectnessReport {
    pub fn write_csv(&self, points: &[Point], dim: usize, out: &mut impl Write) -> std::io::Result<()> {
        let axes = ["cx", "cy", "cz"];
        writeln!(out, "{},max_gap_ratio", axes[..dim].join(","))?;
        for (p, g) in points.iter().zip(&self.per_center) {
            let c: Vec<String> = p[..dim].iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{}", c.join(","), g)?;
        }
        Ok(())
    }
}

/// Sorted distinct distances from `points[i]` to the other points, with
/// the resolution prepended and anything below it dropped.
pub fn distance_ladder(points: &[Point], i: usize, opts: &PerfectnessOptions) -> Vec<f64> {
    let x = points[i];
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, p)| distance(&x, p))
        .filter(|&v| v > 0.0 && v >= opts.resolution)
        .collect();
    d.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(d.len() + 1);
    if opts.resolution > 0.0 {
        out.push(opts.resolution);
    }
    for v in d {
        match out.last() {
            Some(&last) if v - last <= opts.dedup_tol => {}
            _ => out.push(v),
        }
    }
    out
}

/// Smallest `c` such that, at every point `x` and every scale `r` from the
/// nearest-neighbour distance (or the resolution) upward, some point lies
/// in `B(x, c r) \ B(x, r)` whenever a point lies outside `B(x, c r)`.
/// That is the largest ratio of consecutive distinct distances.
pub fn perfectness_constant(points: &[Point], opts: &PerfectnessOptions) -> Result<PerfectnessReport> {
    if points.len() < 2 {
        return Err(Error::Singleton);
    }
    let per: Vec<(f64, f64)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let d = distance_ladder(points, i, opts);
            let mut best = (1.0, 0.0);
            for w in d.windows(2) {
                let ratio = w[1] / w[0];
                if ratio > best.0 {
                    best = (ratio, w[0]);
                }
            }
            best
        })
        .collect();
    let mut k = 0;
    for (i, v) in per.iter().enumerate() {
        if v.0 > per[k].0 {
            k = i;
        }
    }
    Ok(PerfectnessReport {
        c_up: per[k].0,
        witness_center: points[k],
        witness_r: per[k].1,
        witness_index: k,
        per_center: per.iter().map(|v| v.0).collect(),
    })
}

/// Perfectness of the cell centers of `mask` at grid resolution.
pub fn perfectness_of_mask(lattice: &Lattice, mask: &SetMask) -> Result<PerfectnessReport> {
    mask.check_lattice(lattice)?;
    perfectness_constant(&mask.centers(lattice), &PerfectnessOptions::for_grid(lattice.spacing()))
}

/// Growth of `c_UP` per refinement at or above this marks an isolated
/// piece whose gap is only bounded by the grid scale.
pub const UNBOUNDED_GROWTH: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfectnessVerdict {
    Bounded,
    Unbounded,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfectnessTrend {
    pub spacings: Vec<f64>,
    pub c_up: Vec<f64>,
    pub growth: Vec<f64>,
    pub verdict: PerfectnessVerdict,
}

/// `Unbounded` when `c_UP` grows by at least [`UNBOUNDED_GROWTH`] at every
/// refinement, `Bounded` when it never does, `Inconclusive` otherwise or
/// with fewer than two levels.
pub fn perfectness_trend(spacings: &[f64], c_up: &[f64]) -> PerfectnessTrend {
    let growth: Vec<f64> = c_up.windows(2).map(|w| w[1] / w[0]).collect();
    let verdict = if growth.is_empty() {
        PerfectnessVerdict::Inconclusive
    } else if growth.iter().all(|&g| g >= UNBOUNDED_GROWTH) {
        PerfectnessVerdict::Unbounded
    } else if growth.iter().all(|&g| g < UNBOUNDED_GROWTH) {
        PerfectnessVerdict::Bounded
    } else {
        PerfectnessVerdict::Inconclusive
    };
    PerfectnessTrend { spacings: spacings.to_vec(), c_up: c_up.to_vec(), growth, verdict }
}

fn check_sharp_window(p: f64, dim: usize) -> Result<()> {
    let q = dim as f64;
    let lower = (q - std::f64::consts::LN_2 / 3f64.ln()).max(1.0);
    if !(lower < p && p < q) {
        return Err(Error::OutsideSharpWindow { p, lower, upper: q });
    }
    Ok(())
}

/// `2^{1/(Q-p)} - 2` without range checks.
pub fn sharp_threshold_formula(p: f64, dim: usize) -> f64 {
    2f64.powf(1.0 / (dim as f64 - p)) - 2.0
}

/// Perfectness constant below which a uniformly perfect complement is
/// known to carry positive `p`-capacity, for `max(Q - log2/log3, 1) < p < Q`.
pub fn sharp_threshold(p: f64, dim: usize) -> Result<f64> {
    check_sharp_window(p, dim)?;
    Ok(sharp_threshold_formula(p, dim))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HardyPerfectnessBound {
    /// `1 / (4^Q c_A log 2)`.
    pub c: f64,
    /// `log 4 + 2^{Q+1} c_H c_A / c`.
    pub log_bound: f64,
    /// `4 exp(2^{Q+1} c_H c_A / c)`; infinite when it overflows.
    pub bound: f64,
}

/// The perfectness constant forced on the complement by a Hardy constant.
pub fn hardy_perfectness_constant(c_h: f64, c_a: f64, dim: usize) -> Result<HardyPerfectnessBound> {
    if !(c_h > 0.0) || !(c_a > 0.0) {
        return Err(Error::InvalidParameter(format!("need c_H > 0 and c_A > 0, got {c_h}, {c_a}")));
    }
    let q = dim as i32;
    let c = 1.0 / (4f64.powi(q) * c_a * std::f64::consts::LN_2);
    let exponent = 2f64.powi(q + 1) * c_h * c_a / c;
    Ok(HardyPerfectnessBound { c, log_bound: 4f64.ln() + exponent, bound: 4.0 * exponent.exp() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::point2;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn singletons_are_rejected() {
        assert!(matches!(perfectness_constant(&[point2(0.0, 0.0)], &PerfectnessOptions::EXACT), Err(Error::Singleton)));
    }

    #[test]
    fn three_collinear_points() {
        let pts = [point2(0.0, 0.0), point2(1.0, 0.0), point2(4.0, 0.0)];
        let r = perfectness_constant(&pts, &PerfectnessOptions::EXACT).unwrap();
        // from 0: 1, 4; from 1: 1, 3; from 4: 3, 4
        assert!((r.c_up - 4.0).abs() < 1e-15);
        assert_eq!(r.witness_index, 0);
        assert_eq!(r.witness_r, 1.0);
    }

    #[test]
    fn resolution_exposes_isolated_points() {
        let pts = [point2(0.0, 0.0), point2(1.0, 0.0), point2(2.0, 0.0)];
        let exact = perfectness_constant(&pts, &PerfectnessOptions::EXACT).unwrap();
        let grid = perfectness_constant(&pts, &PerfectnessOptions::for_grid(0.01)).unwrap();
        assert_eq!(exact.c_up, 2.0);
        assert!((grid.c_up - 100.0).abs() < 1e-9);
    }

    #[test]
    fn sharp_threshold_window() {
        assert_eq!(sharp_threshold(1.5, 2).unwrap(), 2.0);
        assert!(sharp_threshold(2.0, 2).is_err());
        assert!(sharp_threshold(1.3, 2).is_err());
        let edge = 2.0 - LN_2 / 3f64.ln();
        assert!(sharp_threshold(edge, 2).is_err());
        assert!((sharp_threshold_formula(edge, 2) - 1.0).abs() < 1e-12);
        assert!(sharp_threshold(1.999, 2).unwrap() > 1e100);
    }

    #[test]
    fn hardy_bound_shape() {
        let b = hardy_perfectness_constant(1.0, PI, 2).unwrap();
        assert!((b.c - 1.0 / (16.0 * PI * LN_2)).abs() < 1e-15);
        let expect = 4f64.ln() + 128.0 * PI * PI * LN_2;
        assert!((b.log_bound - expect).abs() < 1e-9 * expect);
        let small = hardy_perfectness_constant(0.01, PI, 2).unwrap();
        assert!(small.bound.is_finite() && small.bound > 4.0);
    }
}
