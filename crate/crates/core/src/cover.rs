//! Ball covers: Hausdorff content bounds and the merge procedure that turns
//! an arbitrary cover of a uniformly perfect set into one whose ball at a
//! given point is large.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{distance, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Ball { center, radius }
    }

    /// Open-ball membership.
    pub fn contains(&self, p: &Point) -> bool {
        distance(&self.center, p) < self.radius
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BallCover {
    pub balls: Vec<Ball>,
}

impl BallCover {
    pub fn new(balls: Vec<Ball>) -> Self {
        BallCover { balls }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn sum_pow(&self, eps: f64) -> f64 {
        self.balls.iter().map(|b| b.radius.powf(eps)).sum()
    }

    pub fn covers(&self, points: &[Point]) -> bool {
        points.iter().all(|p| self.balls.iter().any(|b| b.contains(p)))
    }

    /// CSV rows `cx,cy[,cz],r`.
    pub fn write_csv(&self, dim: usize, out: &mut impl Write) -> std::io::Result<()> {
        let axes = ["cx", "cy", "cz"];
        writeln!(out, "{},r", axes[..dim].join(","))?;
        for b in &self.balls {
            let coords: Vec<String> = b.center[..dim].iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{}", coords.join(","), b.radius)?;
        }
        Ok(())
    }
}

/// `log 2 / log(C + 2)`: the largest exponent for which two balls can
/// always be merged at merge constant `C` without raising `Σ r^ε`.
pub fn epsilon_threshold(c: f64) -> f64 {
    std::f64::consts::LN_2 / (c + 2.0).ln()
}

/// `a^ε + b^ε >= (a + b + C min(a, b))^ε`.
pub fn merge_inequality_holds(a: f64, b: f64, c: f64, eps: f64) -> bool {
    a.powf(eps) + b.powf(eps) >= (a + b + c * a.min(b)).powf(eps)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MergeParams {
    pub alpha: f64,
    pub c_up: f64,
    pub eps: f64,
}

impl MergeParams {
    pub fn new(alpha: f64, c_up: f64, eps: f64) -> Result<Self> {
        let params = MergeParams { alpha, c_up, eps };
        params.validate()?;
        Ok(params)
    }

    /// The merge constant `α c_UP`.
    pub fn merge_constant(&self) -> f64 {
        self.alpha * self.c_up
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if !(self.c_up >= 1.0) {
            return Err(Error::InvalidParameter(format!("c_UP must be at least 1, got {}", self.c_up)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("exponent must be positive, got {}", self.eps)));
        }
        let threshold = epsilon_threshold(self.merge_constant());
        if self.eps >= threshold {
            return Err(Error::ExponentAboveThreshold { exponent: self.eps, threshold });
        }
        Ok(())
    }

    /// Whether ball `i` may be absorbed with ball `j`: `r_i <= α r_j` and
    /// `B(x_i, c_UP r_i)` meets `B(x_j, r_j)`.
    pub fn mergeable(&self, bi: &Ball, bj: &Ball) -> bool {
        bi.radius <= self.alpha * bj.radius && distance(&bi.center, &bj.center) < self.c_up * bi.radius + bj.radius
    }

    /// The replacement for a mergeable pair: radius `r_i + r_j + α c_UP min`
    /// at the center of the larger ball (the first one on ties).
    pub fn merged(&self, bi: &Ball, bj: &Ball) -> Ball {
        let small = bi.radius.min(bj.radius);
        let radius = bi.radius + bj.radius + self.merge_constant() * small;
        let center = if bj.radius > bi.radius { bj.center } else { bi.center };
        Ball { center, radius }
    }
}

/// One merge: balls `i < j` (indices before the step) became `ball`,
/// stored at `i`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MergeStep {
    pub step: usize,
    pub i: usize,
    pub j: usize,
    pub new_r: f64,
    pub sum_eps: f64,
}

/// First mergeable pair in order of increasing `i + j`, then smaller `i`.
fn find_pair(balls: &[Ball], params: &MergeParams) -> Option<(usize, usize)> {
    let n = balls.len();
    for s in 1..(2 * n).saturating_sub(2) + 1 {
        let lo = s.saturating_sub(n - 1);
        for i in lo..=(s - 1) / 2 {
            let j = s - i;
            if j >= n || j == i {
                continue;
            }
            if params.mergeable(&balls[i], &balls[j]) || params.mergeable(&balls[j], &balls[i]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Merge mergeable pairs until none is left. `observe` sees every step and
/// the cover right after it.
pub fn merge_cover(
    cover: &BallCover,
    params: &MergeParams,
    mut observe: impl FnMut(&MergeStep, &BallCover),
) -> Result<(BallCover, Vec<MergeStep>)> {
    params.validate()?;
    let mut current = cover.clone();
    let mut steps = Vec::new();
    while let Some((i, j)) = find_pair(&current.balls, params) {
        let ball = params.merged(&current.balls[i], &current.balls[j]);
        current.balls[i] = ball;
        current.balls.remove(j);
        let step = MergeStep { step: steps.len() + 1, i, j, new_r: ball.radius, sum_eps: current.sum_pow(params.eps) };
        observe(&step, &current);
        steps.push(step);
    }
    Ok((current, steps))
}

pub fn write_merge_trace(steps: &[MergeStep], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "step,i,j,new_r,sum_eps")?;
    for s in steps {
        writeln!(out, "{},{},{},{},{}", s.step, s.i, s.j, s.new_r, s.sum_eps)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SurvivalReport {
    /// Radius of the smallest ball of the cover containing `x0`.
    pub radius: f64,
    /// `(α - 1) r0 / (α (c_UP + 1))`.
    pub bound: f64,
    pub pass: bool,
    /// Balls with shrinking radii, each meeting the `c_UP`-dilate of the
    /// previous one, until a dilate leaves `B(x0, r0)`.
    pub chain: Vec<Ball>,
    /// Whether the chain reached the boundary of `B(x0, r0)`.
    pub chain_complete: bool,
}

pub fn survival_bound(r0: f64, alpha: f64, c_up: f64) -> f64 {
    (alpha - 1.0) * r0 / (alpha * (c_up + 1.0))
}

pub fn surviving_radius_bound(cover: &BallCover, x0: &Point, r0: f64, params: &MergeParams) -> Result<SurvivalReport> {
    let start = cover
        .balls
        .iter()
        .enumerate()
        .filter(|(_, b)| b.contains(x0))
        .min_by(|a, b| a.1.radius.total_cmp(&b.1.radius))
        .map(|(k, _)| k)
        .ok_or(Error::CoverMissesCenter)?;
    let bound = survival_bound(r0, params.alpha, params.c_up);
    let radius = cover.balls[start].radius;
    let mut chain = vec![cover.balls[start]];
    let mut complete = false;
    let mut cur = cover.balls[start];
    loop {
        if distance(&cur.center, x0) + params.c_up * cur.radius > r0 {
            complete = true;
            break;
        }
        let next = cover
            .balls
            .iter()
            .filter(|b| {
                b.radius < cur.radius / params.alpha
                    && distance(&cur.center, &b.center) < params.c_up * cur.radius + b.radius
            })
            .max_by(|a, b| a.radius.total_cmp(&b.radius));
        match next {
            Some(b) => {
                chain.push(*b);
                cur = *b;
            }
            None => break,
        }
    }
    Ok(SurvivalReport { radius, bound, pass: radius >= bound, chain, chain_complete: complete })
}

/// Smallest of the greedy cover values `n_k r_k^s` with `r_k = base 2^k`
/// (centers at the set points in order, `k` up to a single ball) and the
/// single ball about the point nearest the centroid.
pub fn content_upper(points: &[Point], s: f64, base: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("content exponent must be positive, got {s}")));
    }
    if !(base > 0.0) {
        return Err(Error::InvalidParameter(format!("base radius must be positive, got {base}")));
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    let mut r = base;
    loop {
        let n = greedy_cover(points, r).len();
        best = best.min(n as f64 * r.powf(s));
        if n == 1 {
            break;
        }
        r *= 2.0;
    }
    // one ball about the point nearest the centroid
    let n = points.len() as f64;
    let mut centroid = [0.0; 3];
    for p in points {
        for k in 0..3 {
            centroid[k] += p[k] / n;
        }
    }
    let hub = points.iter().min_by(|a, b| distance(a, &centroid).total_cmp(&distance(b, &centroid))).unwrap();
    let reach = points.iter().map(|p| distance(hub, p)).fold(0.0, f64::max);
    if reach > 0.0 {
        best = best.min((reach * (1.0 + 1e-12)).powf(s));
    }
    Ok(best)
}

/// Balls of radius `r` centered at points not yet covered, in order.
pub fn greedy_cover(points: &[Point], r: f64) -> Vec<Ball> {
    // bucket ball centers by cells of side r; a point can only lie in balls
    // from its own bucket or the adjacent ones
    let key = |p: &Point| p.map(|v| (v / r).floor() as i64);
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut balls: Vec<Ball> = Vec::new();
    for p in points {
        let k = key(p);
        let mut covered = false;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if ids.iter().any(|&b| balls[b].contains(p)) {
                            covered = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !covered {
            buckets.entry(k).or_default().push(balls.len());
            balls.push(Ball::new(*p, r));
        }
    }
    balls
}

/// `(r0 / (2 c_UP + 2))^ε`: the lower bound on `Σ r^ε` over covers of a
/// `c_UP`-uniformly perfect set near a point, at `α = 2`.
pub fn content_lower_via_perfectness(r0: f64, c_up: f64, eps: f64) -> Result<f64> {
    MergeParams::new(2.0, c_up, eps)?;
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r0}")));
    }
    Ok((r0 / (2.0 * c_up + 2.0)).powf(eps))
}
