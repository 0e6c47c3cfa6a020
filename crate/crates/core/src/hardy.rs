//! Hardy quotients, estimation of the best Hardy constant, the annular
//! test function that rules out large empty annuli, and the capacity
//! characterization of Hardy's inequality through dyadic level sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{solve_capacity, CapacityProblem};
use crate::energy::{norm, pcg, EnergyOperator};
use crate::error::{Error, Result};
use crate::grid::{coords, distance, MetricGrid, Point, SetMask};

/// Energy and weighted norm of grid functions supported in `Ω`.
pub struct HardyForm<'a> {
    grid: &'a MetricGrid,
    op: EnergyOperator,
    p: f64,
    /// `h^Q dist^{-p}` per free slot.
    weight: Vec<f64>,
}

impl<'a> HardyForm<'a> {
    pub fn new(grid: &'a MetricGrid, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("Hardy exponent must exceed 1, got {p}")));
        }
        let lat = grid.lattice();
        let dist = grid.dist_field();
        let h = lat.spacing();
        // cells nearer than h/2 to the complement would make the weight
        // singular; on a grid only complement cells are that close
        let free: Vec<bool> = (0..lat.len()).map(|i| grid.domain().contains(i) && dist[i] >= 0.5 * h).collect();
        let op = EnergyOperator::new(lat, &free, &[]);
        let measure = lat.cell_measure();
        let weight = op.cells().iter().map(|&c| measure * dist[c].powf(-p)).collect();
        Ok(HardyForm { grid, op, p, weight })
    }

    pub fn operator(&self) -> &EnergyOperator {
        &self.op
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.op.energy(u, self.p)
    }

    /// `Σ h^Q |u|^p dist^{-p}`.
    pub fn weighted_norm(&self, u: &[f64]) -> f64 {
        self.weight.iter().zip(u).map(|(w, v)| w * v.abs().powf(self.p)).sum()
    }

    /// Slot vector of a lattice field; fails when the field is nonzero
    /// outside the free cells.
    pub fn gather(&self, field: &[f64]) -> Result<Vec<f64>> {
        let u = self.op.gather(field);
        let back = self.op.scatter(&u, field.len());
        if field.iter().zip(&back).any(|(a, b)| a != b) {
            return Err(Error::NotVanishingOutside);
        }
        Ok(u)
    }

    pub fn grid(&self) -> &MetricGrid {
        self.grid
    }
}

/// `∫ g_u^p / ∫ (|u| / dist)^p` for a lattice field `u` vanishing off `Ω`.
/// Any Hardy constant is at least the reciprocal.
pub fn hardy_quotient(grid: &MetricGrid, u: &[f64], p: f64) -> Result<f64> {
    let form = HardyForm::new(grid, p)?;
    let v = form.gather(u)?;
    let den = form.weighted_norm(&v);
    if den == 0.0 {
        return Err(Error::TrivialFunction);
    }
    Ok(form.energy(&v) / den)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HardyOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Iterations given to every restart before the best one is refined.
    pub probe_iters: usize,
    pub max_iters: usize,
    /// Relative quotient decrease that ends the refinement.
    pub tol: f64,
}

impl Default for HardyOptions {
    fn default() -> Self {
        HardyOptions { restarts: 10, seed: 0, probe_iters: 15, max_iters: 400, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HardyLevel {
    pub spacing: f64,
    pub p: f64,
    /// Reciprocal of the smallest quotient found.
    pub c_h_est: f64,
    pub min_quotient: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    /// Lattice-indexed minimizer normalized to unit weighted norm.
    #[serde(skip)]
    pub minimizer: Vec<f64>,
}

struct Descent {
    u: Vec<f64>,
    quotient: f64,
    iterations: usize,
    converged: bool,
}

/// Preconditioned descent on the quotient over nonnegative functions with
/// unit weighted norm. The direction solves the lagged-diffusivity system
/// `p h^{Q-p} A_w d = -(∇E - λ ∇N)` inexactly; at step 1 and `p = 2` this
/// is inverse iteration. Steps are halved under the Armijo rule, clipped
/// at zero (replacing `u` by `|u|` never raises the quotient), and the
/// result is renormalized.
fn descend(form: &HardyForm, mut u: Vec<f64>, iters: usize, tol: f64) -> Descent {
    let op = &form.op;
    let p = form.p;
    let nf = op.n_free();
    let ns = op.n_slots();
    let normalize = |u: &mut [f64]| {
        let n = form.weighted_norm(u).powf(1.0 / p);
        if n > 0.0 {
            u.iter_mut().for_each(|v| *v /= n);
        }
    };
    normalize(&mut u);
    let mut lambda = form.energy(&u);
    let mut grad = vec![0.0; ns];
    let mut trial = vec![0.0; ns];
    let mut converged = false;
    let mut k = 0;
    let scale = p * op.scale(p);
    while k < iters {
        op.gradient(&u, p, &mut grad);
        let r: Vec<f64> = (0..nf).map(|i| grad[i] - lambda * p * form.weight[i] * u[i].powf(p - 1.0)).collect();
        let rnorm = norm(&r);
        if !(rnorm > 0.0) {
            converged = true;
            break;
        }
        let delta2 = 1e-8 * op.max_sq(&u);
        let w = op.weights(&u, p, delta2);
        let rhs: Vec<f64> = r.iter().map(|v| -v / scale).collect();
        let mut d = vec![0.0; ns];
        pcg(op, &w, &mut d, Some(&rhs), norm(&rhs), 1e-2, 100, |_, _, _| {});
        let mut slope: f64 = (0..nf).map(|i| r[i] * d[i]).sum();
        if !(slope < 0.0) {
            let diag = op.diagonal(&w);
            for i in 0..nf {
                d[i] = -r[i] / (scale * diag[i].max(f64::MIN_POSITIVE));
            }
            slope = (0..nf).map(|i| r[i] * d[i]).sum();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            for i in 0..nf {
                trial[i] = (u[i] + t * d[i]).max(0.0);
            }
            trial[nf..].iter_mut().for_each(|v| *v = 0.0);
            let n = form.weighted_norm(&trial);
            if n > 0.0 {
                let q = form.energy(&trial) / n;
                if q <= lambda + 1e-4 * t * slope {
                    accepted = Some(q);
                    break;
                }
            }
            t *= 0.5;
        }
        k += 1;
        let Some(q) = accepted else {
            converged = true;
            break;
        };
        std::mem::swap(&mut u, &mut trial);
        normalize(&mut u);
        let drop = (lambda - q) / lambda;
        lambda = form.energy(&u);
        if drop <= tol {
            converged = true;
            break;
        }
    }
    Descent { u, quotient: lambda, iterations: k, converged }
}

/// Estimate the best constant `c_H` of `∫ (|u| / dist)^p <= c_H ∫ g_u^p`
/// over grid functions vanishing off `Ω`, as the reciprocal of the smallest
/// quotient found: random restarts get a short budget each, then the best
/// is refined until the quotient stalls.
pub fn estimate_hardy_level(grid: &MetricGrid, p: f64, opts: &HardyOptions) -> Result<HardyLevel> {
    let form = HardyForm::new(grid, p)?;
    let nf = form.op.n_free();
    if nf == 0 {
        return Err(Error::DegenerateDomain);
    }
    let restarts = opts.restarts.max(1);
    let probes: Vec<Descent> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
            let mut u: Vec<f64> = (0..nf).map(|_| rng.gen_range(0.0..1.0)).collect();
            u.push(0.0);
            descend(&form, u, opts.probe_iters, opts.tol)
        })
        .collect();
    let mut best = 0;
    for (i, d) in probes.iter().enumerate() {
        if d.quotient < probes[best].quotient {
            best = i;
        }
    }
    let probe_iters: usize = probes.iter().map(|d| d.iterations).sum();
    let start = probes.into_iter().nth(best).unwrap();
    let fin = if start.converged {
        start
    } else {
        let more = descend(&form, start.u, opts.max_iters, opts.tol);
        Descent { iterations: start.iterations + more.iterations, ..more }
    };
    Ok(HardyLevel {
        spacing: grid.spacing(),
        p,
        c_h_est: 1.0 / fin.quotient,
        min_quotient: fin.quotient,
        iterations: probe_iters + fin.iterations,
        converged: fin.converged,
        best_restart: best,
        minimizer: form.op.scatter(&fin.u, grid.lattice().len()),
    })
}

/// A pyramid `height (1 - |x - center|_∞ / half_width)_+`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tent {
    #[serde(with = "coords")]
    pub center: Point,
    pub half_width: f64,
    pub height: f64,
}

/// Sum of tents restricted to `Ω` (zero on complement cells).
pub fn tent_sum(grid: &MetricGrid, tents: &[Tent]) -> Vec<f64> {
    let lat = grid.lattice();
    (0..lat.len())
        .map(|i| {
            if !grid.domain().contains(i) {
                return 0.0;
            }
            let c = lat.center(i);
            tents
                .iter()
                .map(|t| {
                    let d = (0..lat.dim()).map(|k| (c[k] - t.center[k]).abs()).fold(0.0, f64::max);
                    t.height * (1.0 - d / t.half_width).max(0.0)
                })
                .sum()
        })
        .collect()
}

/// `count` tents with centers at random domain cells, half-widths in
/// `[0.1, 0.6]` of the smallest box side and heights in `[0.25, 8]`.
pub fn random_tents(grid: &MetricGrid, rng: &mut impl Rng, count: usize) -> Vec<Tent> {
    let cells = grid.domain().cells();
    let side = grid.params().bbox.min_side(grid.dim());
    (0..count)
        .map(|_| Tent {
            center: grid.lattice().center(cells[rng.gen_range(0..cells.len())]),
            half_width: side * rng.gen_range(0.1..0.6),
            height: rng.gen_range(0.25..8.0),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HardyVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct HardyTrend {
    pub spacings: Vec<f64>,
    pub c_h_est: Vec<f64>,
    /// `c_H(h_{k+1}) / c_H(h_k)`.
    pub growth: Vec<f64>,
    /// Largest ratio of consecutive increments `c_H(h_{k+1}) - c_H(h_k)`.
    pub contraction: Option<f64>,
    /// Geometric extrapolation of the last increment when it contracts.
    pub extrapolated: Option<f64>,
    pub verdict: HardyVerdict,
    pub note: &'static str,
}

/// Growth per refinement at or above this is divergence.
pub const DIVERGENCE_GROWTH: f64 = 2.0;

pub const TREND_NOTE: &str =
    "grid functions are a subset of admissible functions, so each c_H estimate is a lower bound; only the refinement trend is meaningful";

/// Verdict from estimates on at least three refinements: `Fails` when
/// every refinement grows `c_H` by at least [`DIVERGENCE_GROWTH`]; `Holds`
/// when none does and the increments shrink at every refinement, so the
/// estimates stay below a convergent geometric series; `Inconclusive`
/// otherwise (logarithmic growth lands here).
pub fn hardy_trend(levels: &[HardyLevel]) -> HardyTrend {
    let spacings: Vec<f64> = levels.iter().map(|l| l.spacing).collect();
    let c: Vec<f64> = levels.iter().map(|l| l.c_h_est).collect();
    let growth: Vec<f64> = c.windows(2).map(|w| w[1] / w[0]).collect();
    let inc: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
    let contraction = (inc.len() >= 2)
        .then(|| inc.windows(2).map(|w| match (w[0] > 0.0, w[1] > 0.0) {
            (_, false) => 0.0,
            (false, true) => f64::INFINITY,
            (true, true) => w[1] / w[0],
        }).fold(f64::MIN, f64::max));
    let extrapolated = match contraction {
        Some(q) if (0.0..1.0).contains(&q) => Some(c[c.len() - 1] + inc[inc.len() - 1].max(0.0) * q / (1.0 - q)),
        _ => None,
    };
    let verdict = if levels.len() < 3 || c.iter().any(|v| !v.is_finite()) {
        HardyVerdict::Inconclusive
    } else if growth.iter().all(|&g| g >= DIVERGENCE_GROWTH) {
        HardyVerdict::Fails
    } else if growth.iter().all(|&g| g < DIVERGENCE_GROWTH) && contraction.is_some_and(|q| q < 1.0) {
        HardyVerdict::Holds
    } else {
        HardyVerdict::Inconclusive
    };
    HardyTrend { spacings, c_h_est: c, growth, contraction, extrapolated, verdict, note: TREND_NOTE }
}

/// The three-piece radial profile: 0 inside `B(x0, r0)`, rising linearly
/// to 1 at `2 r0`, equal to 1 up to `m r0 / 2`, falling linearly to 0 at
/// `m r0`.
#[derive(Clone, Debug)]
pub struct AnnularTestFunction {
    pub x0: Point,
    pub r0: f64,
    pub m: f64,
    /// Lattice-indexed values.
    pub values: Vec<f64>,
}

pub fn annular_profile(d: f64, r0: f64, m: f64) -> f64 {
    if d <= 2.0 * r0 {
        (d / r0 - 1.0).max(0.0)
    } else if d < m * r0 / 2.0 {
        1.0
    } else {
        (2.0 - 2.0 * d / (m * r0)).max(0.0)
    }
}

pub fn annular_test_function(grid: &MetricGrid, x0: &Point, r0: f64, m: f64) -> Result<AnnularTestFunction> {
    if !(m > 4.0) {
        return Err(Error::AnnulusRatioTooSmall(m));
    }
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r0}")));
    }
    let lat = grid.lattice();
    let bb = lat.bbox();
    for k in 0..lat.dim() {
        if x0[k] - m * r0 < bb.lo[k] || x0[k] + m * r0 > bb.hi[k] {
            return Err(Error::InvalidParameter("B(x0, m r0) must lie inside the bounding box".into()));
        }
    }
    let values = (0..lat.len()).map(|i| annular_profile(distance(&lat.center(i), x0), r0, m)).collect();
    Ok(AnnularTestFunction { x0: *x0, r0, m, values })
}

#[derive(Clone, Debug, Serialize)]
pub struct AnnulusReport {
    #[serde(with = "coords")]
    pub x0: Point,
    pub r0: f64,
    pub m: f64,
    pub energy: f64,
    /// `c_A 2^{Q+1}`.
    pub energy_bound: f64,
    pub energy_ok: bool,
    pub weighted_norm: f64,
    /// `log(m/4) / (4^Q c_A log 2)`.
    pub weighted_bound: f64,
    pub weighted_ok: bool,
    /// `4 exp(2^{Q+1} c_H c_A / c)` for the supplied `c_H`, as a logarithm.
    pub log_m_bound: Option<f64>,
}

/// Evaluate both integrals of the annular test function at `p = Q` and
/// compare them with `c_A 2^{Q+1}` (10% slack) and
/// `log(m/4) / (4^Q c_A log 2)` (10% slack).
pub fn verify_annulus_bounds(grid: &MetricGrid, x0: &Point, r0: f64, m: f64, c_h: Option<f64>) -> Result<AnnulusReport> {
    let f = annular_test_function(grid, x0, r0, m)?;
    let lat = grid.lattice();
    for i in 0..lat.len() {
        let d = distance(&lat.center(i), x0);
        if d >= r0 && d < m * r0 && !grid.domain().contains(i) {
            return Err(Error::AnnulusNotInDomain);
        }
    }
    let q = grid.dim() as f64;
    let c_a = grid.params().regularity;
    let form = HardyForm::new(grid, q)?;
    let u = form.gather(&f.values)?;
    let energy = form.energy(&u);
    let weighted_norm = form.weighted_norm(&u);
    let energy_bound = c_a * 2f64.powf(q + 1.0);
    let weighted_bound = (m / 4.0).ln() / (4f64.powf(q) * c_a * std::f64::consts::LN_2);
    let log_m_bound = match c_h {
        Some(c) => Some(crate::perfectness::hardy_perfectness_constant(c, c_a, grid.dim())?.log_bound),
        None => None,
    };
    Ok(AnnulusReport {
        x0: *x0,
        r0,
        m,
        energy,
        energy_bound,
        energy_ok: energy <= energy_bound * 1.1,
        weighted_norm,
        weighted_bound,
        weighted_ok: weighted_norm >= weighted_bound * 0.9,
        log_m_bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MazyaReport {
    /// `∫_K dist^{-p}`.
    pub numerator: f64,
    pub capacity: f64,
    pub quotient: f64,
    pub converged: bool,
}

/// `∫_K dist^{-p} / cap_p(K, Ω)` for `K` at distance at least `2h` from
/// the complement.
pub fn mazya_check(grid: &MetricGrid, k: &SetMask, p: f64) -> Result<MazyaReport> {
    let lat = grid.lattice();
    k.check_lattice(lat)?;
    if k.is_empty() {
        return Err(Error::EmptyMask);
    }
    let dist = grid.dist_field();
    let h = lat.spacing();
    if k.cells().iter().any(|&c| !(dist[c] >= 2.0 * h * (1.0 - 1e-12))) {
        return Err(Error::NotCompactlyContained);
    }
    let numerator: f64 = k.cells().iter().map(|&c| dist[c].powf(-p)).sum::<f64>() * lat.cell_measure();
    let cap = solve_capacity(&CapacityProblem::new(lat, k, grid.domain(), p))?;
    Ok(MazyaReport { numerator, capacity: cap.value, quotient: numerator / cap.value, converged: cap.converged })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LevelTerm {
    pub k: i32,
    /// `cap_p(closure E_{k+1}, E_k)`.
    pub capacity: f64,
    /// `∫_{E_k \ E_{k+1}} dist^{-p}`.
    pub shell_weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetReport {
    pub p: f64,
    pub terms: Vec<LevelTerm>,
    /// `Σ 2^{(k+1)p} cap_p(closure E_{k+1}, E_k)`.
    pub capacity_sum: f64,
    /// `2^p ∫ g_u^p`.
    pub energy_side: f64,
    pub a_ok: bool,
    /// `∫ (|u| / dist)^p`.
    pub hardy_side: f64,
    /// `Σ 2^{(k+1)p} ∫_{E_k \ E_{k+1}} dist^{-p}`.
    pub shell_sum: f64,
    pub b_ok: bool,
}

pub const LEVEL_RANGE: i32 = 60;
const LEVEL_SLACK: f64 = 1.15;

/// Check the two inequalities behind the capacity characterization on the
/// dyadic level sets `E_k = {|u| > 2^k}` of a lattice field `u` that
/// vanishes off `Ω`:
/// (a) `Σ_k 2^{(k+1)p} cap_p(closure E_{k+1}, E_k) <= 2^p ∫ g_u^p`,
/// (b) `∫ (|u| / dist)^p <= Σ_k 2^{(k+1)p} ∫_{E_k \ E_{k+1}} dist^{-p}`,
/// each with 15% slack. The closure of `E_{k+1}` on the grid is
/// `{|u| >= 2^{k+1}}`. Levels run over `[-60, 60]`.
pub fn levelset_decomposition_check(grid: &MetricGrid, u: &[f64], p: f64) -> Result<LevelSetReport> {
    let lat = grid.lattice();
    let form = HardyForm::new(grid, p)?;
    let v = form.gather(u)?;
    let max = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if max == 0.0 {
        return Err(Error::TrivialFunction);
    }
    let min = u.iter().filter(|v| **v != 0.0).fold(f64::INFINITY, |a, b| a.min(b.abs()));
    let top = max.log2().ceil() as i32;
    let bottom = min.log2().floor() as i32;
    if top > LEVEL_RANGE + 1 {
        return Err(Error::LevelOverflow(top));
    }
    if bottom < -LEVEL_RANGE {
        return Err(Error::LevelOverflow(bottom));
    }
    let dist = grid.dist_field();
    let measure = lat.cell_measure();
    let above = |t: f64, strict: bool| SetMask::from_predicate(lat, |i| if strict { u[i].abs() > t } else { u[i].abs() >= t });
    let mut terms = Vec::new();
    let mut last: Option<(Vec<usize>, Vec<usize>, f64)> = None;
    for k in -LEVEL_RANGE..=LEVEL_RANGE {
        let lo = 2f64.powi(k);
        let env = above(lo, true);
        if env.is_empty() {
            break;
        }
        let plate = above(2.0 * lo, false);
        let capacity = match &last {
            Some((pc, ec, c)) if pc.as_slice() == plate.cells() && ec.as_slice() == env.cells() => *c,
            _ => {
                let c = solve_capacity(&CapacityProblem::new(lat, &plate, &env, p))?.value;
                last = Some((plate.cells().to_vec(), env.cells().to_vec(), c));
                c
            }
        };
        let shell_weight: f64 = env
            .cells()
            .iter()
            .filter(|&&c| u[c].abs() <= 2.0 * lo)
            .map(|&c| dist[c].powf(-p))
            .sum::<f64>()
            * measure;
        terms.push(LevelTerm { k, capacity, shell_weight });
    }
    let pw = |k: i32| 2f64.powf((k as f64 + 1.0) * p);
    let capacity_sum: f64 = terms.iter().map(|t| pw(t.k) * t.capacity).sum();
    let shell_sum: f64 = terms.iter().map(|t| pw(t.k) * t.shell_weight).sum();
    let energy_side = 2f64.powf(p) * form.energy(&v);
    let hardy_side = form.weighted_norm(&v);
    Ok(LevelSetReport {
        p,
        terms,
        capacity_sum,
        energy_side,
        a_ok: capacity_sum <= energy_side * LEVEL_SLACK,
        hardy_side,
        shell_sum,
        b_ok: hardy_side <= shell_sum * LEVEL_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Region;
    use crate::grid::{point2, SpaceParams};

    fn square(h: f64) -> MetricGrid {
        MetricGrid::build(&Region::rect(point2(-1.0, -1.0), point2(1.0, 1.0)), SpaceParams::planar(h, 1.25)).unwrap()
    }

    fn tent(grid: &MetricGrid) -> Vec<f64> {
        let lat = grid.lattice();
        (0..lat.len())
            .map(|i| {
                let c = lat.center(i);
                if grid.domain().contains(i) {
                    (1.0 - c[0].abs().max(c[1].abs())).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn quotient_is_scale_invariant() {
        let g = square(1.0 / 16.0);
        let u = tent(&g);
        let a = hardy_quotient(&g, &u, 2.0).unwrap();
        let u2: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let b = hardy_quotient(&g, &u2, 2.0).unwrap();
        assert!(a > 0.0 && a.is_finite());
        assert!((a - b).abs() <= 1e-12 * a);
        assert!(matches!(hardy_quotient(&g, &vec![0.0; u.len()], 2.0), Err(Error::TrivialFunction)));
    }

    #[test]
    fn function_outside_domain_is_rejected() {
        let g = square(1.0 / 8.0);
        let mut u = tent(&g);
        u[0] = 1.0;
        assert!(matches!(hardy_quotient(&g, &u, 2.0), Err(Error::NotVanishingOutside)));
    }

    #[test]
    fn profile_values() {
        assert_eq!(annular_profile(0.0, 1.0, 16.0), 0.0);
        assert_eq!(annular_profile(1.5, 1.0, 16.0), 0.5);
        assert_eq!(annular_profile(2.0, 1.0, 16.0), 1.0);
        assert_eq!(annular_profile(16.0, 1.0, 16.0), 0.0);
        let g = square(0.25);
        assert!(matches!(annular_test_function(&g, &point2(0.0, 0.0), 0.1, 4.0), Err(Error::AnnulusRatioTooSmall(_))));
    }

    #[test]
    fn minimizer_beats_the_tent() {
        let g = square(1.0 / 16.0);
        let level = estimate_hardy_level(&g, 2.0, &HardyOptions::default()).unwrap();
        let tent_q = hardy_quotient(&g, &tent(&g), 2.0).unwrap();
        assert!(level.min_quotient <= tent_q);
        assert!(level.converged);
        let q = hardy_quotient(&g, &level.minimizer, 2.0).unwrap();
        assert!((q - level.min_quotient).abs() < 1e-9 * q);
    }
}
