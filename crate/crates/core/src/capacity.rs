//! Variational p-capacity of grid condensers and radial reference values.

use serde::Serialize;

use crate::energy::{jacobi_sweeps, norm, pcg, EnergyOperator};
use crate::error::{Error, Result};
use crate::cover::content_upper;
use crate::grid::{ball_mask, Lattice, Point, SetMask};

pub const DEFAULT_TOL: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const WARM_SWEEPS: usize = 10;
const JACOBI_DAMPING: f64 = 2.0 / 3.0;

/// Condenser `(plate, environment)` with exponent `p`: minimize the
/// energy of `u` with `u = 1` on the plate and `u = 0` off the environment.
#[derive(Clone, Copy, Debug)]
pub struct CapacityProblem<'a> {
    pub lattice: &'a Lattice,
    pub plate: &'a SetMask,
    pub environment: &'a SetMask,
    pub p: f64,
    /// Relative residual for `p = 2`, relative energy decrement otherwise.
    pub tol: f64,
    /// Defaults to `50 sqrt(free cells)` capped at `1e5`.
    pub max_iters: Option<usize>,
}

impl<'a> CapacityProblem<'a> {
    pub fn new(lattice: &'a Lattice, plate: &'a SetMask, environment: &'a SetMask, p: f64) -> Self {
        CapacityProblem { lattice, plate, environment, p, tol: DEFAULT_TOL, max_iters: None }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct CapacityResult {
    pub value: f64,
    /// Lattice-indexed potential with values in `[0, 1]`.
    pub potential: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative energy drop of the last iteration.
    pub final_decrement: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Serialize)]
pub struct CapacitySummary {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_decrement: f64,
}

impl CapacityResult {
    pub fn summary(&self) -> CapacitySummary {
        CapacitySummary {
            value: self.value,
            iterations: self.iterations,
            converged: self.converged,
            final_decrement: self.final_decrement,
        }
    }
}

fn default_max_iters(free: usize) -> usize {
    ((50.0 * (free as f64).sqrt()) as usize).clamp(1, 100_000)
}

pub fn solve_capacity(prob: &CapacityProblem) -> Result<CapacityResult> {
    let lat = prob.lattice;
    prob.plate.check_lattice(lat)?;
    prob.environment.check_lattice(lat)?;
    if !(prob.p > 1.0) || !prob.p.is_finite() {
        return Err(Error::InvalidParameter(format!("capacity exponent must exceed 1, got {}", prob.p)));
    }
    if !prob.plate.is_subset(prob.environment) {
        return Err(Error::PlateEscapesEnvironment);
    }
    if prob.plate.is_empty() {
        return Ok(CapacityResult {
            value: 0.0,
            potential: vec![0.0; lat.len()],
            iterations: 0,
            converged: true,
            final_decrement: 0.0,
            trace: vec![TraceRow { iter: 0, energy: 0.0, step: 0.0 }],
        });
    }
    let free: Vec<bool> = (0..lat.len()).map(|i| prob.environment.contains(i) && !prob.plate.contains(i)).collect();
    let op = EnergyOperator::new(lat, &free, prob.plate.cells());
    let mut u = vec![1.0; op.n_slots()];
    u[..op.n_free()].iter_mut().for_each(|v| *v = 0.0);
    *u.last_mut().unwrap() = 0.0;
    let max_iters = prob.max_iters.unwrap_or_else(|| default_max_iters(op.n_free()));

    let mut out = if prob.p == 2.0 {
        solve_linear(&op, &mut u, prob.tol, max_iters, true)
    } else {
        solve_linear(&op, &mut u, 1e-6, max_iters, false);
        solve_nonlinear(&op, &mut u, prob.p, prob.tol, max_iters)
    };
    // the minimizer already lies in [0, 1]; clamping removes solver noise
    // and cannot raise the energy
    u.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out.value = op.energy(&u, prob.p);
    out.potential = op.scatter(&u, lat.len());
    Ok(out)
}

fn solve_linear(op: &EnergyOperator, u: &mut [f64], tol: f64, max_iters: usize, traced: bool) -> CapacityResult {
    let w = vec![1.0; op.n_entries()];
    let mut trace = Vec::new();
    let mut record = |iter: usize, x: &[f64], step: f64| {
        if traced {
            trace.push(TraceRow { iter, energy: op.energy(x, 2.0), step });
        }
    };
    record(0, u, 0.0);
    let mut ax = vec![0.0; op.n_slots()];
    op.apply(&w, u, &mut ax);
    let reference = norm(&ax[..op.n_free()]);
    jacobi_sweeps(op, &w, u, WARM_SWEEPS, JACOBI_DAMPING, |k, x| record(k, x, JACOBI_DAMPING));
    let cg = pcg(op, &w, u, None, reference, tol, max_iters, |k, x, step| record(WARM_SWEEPS + k, x, step));
    let final_decrement = match trace.as_slice() {
        [.., a, b] if a.energy > 0.0 => (a.energy - b.energy) / a.energy,
        _ => 0.0,
    };
    CapacityResult {
        value: 0.0,
        potential: Vec::new(),
        iterations: WARM_SWEEPS + cg.iterations,
        converged: cg.relative_residual <= tol,
        final_decrement,
        trace,
    }
}

/// Descent on the p-energy. Each direction comes from one inexact solve of
/// the lagged-diffusivity system `A_w v = 0` started at the current iterate,
/// which makes `v - u` a preconditioned descent direction; the step is
/// chosen by halving from 1 under the Armijo rule, and each trial point is
/// clamped to `[0, 1]`.
fn solve_nonlinear(op: &EnergyOperator, u: &mut [f64], p: f64, tol: f64, max_iters: usize) -> CapacityResult {
    let nf = op.n_free();
    let ns = op.n_slots();
    let mut energy = op.energy(u, p);
    let mut trace = vec![TraceRow { iter: 0, energy, step: 0.0 }];
    let mut grad = vec![0.0; ns];
    let mut trial = vec![0.0; ns];
    let mut converged = false;
    let mut final_decrement = 0.0;
    let mut iters = 0;
    while iters < max_iters {
        if energy == 0.0 || nf == 0 {
            converged = true;
            break;
        }
        let delta2 = 1e-8 * op.max_sq(u);
        let w = op.weights(u, p, delta2);
        let mut v = u.to_vec();
        let mut aw = vec![0.0; ns];
        op.apply(&w, u, &mut aw);
        let reference = norm(&aw[..nf]);
        pcg(op, &w, &mut v, None, reference, 0.05, 200, |_, _, _| {});
        let mut dir: Vec<f64> = (0..nf).map(|k| v[k] - u[k]).collect();
        op.gradient(u, p, &mut grad);
        let mut slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            let diag = op.diagonal(&w);
            let c = p * op.scale(p);
            dir = (0..nf).map(|k| -grad[k] / (c * diag[k].max(f64::MIN_POSITIVE))).collect();
            slope = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            if !(slope < 0.0) {
                converged = true;
                break;
            }
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            trial.copy_from_slice(u);
            for k in 0..nf {
                trial[k] = (u[k] + t * dir[k]).clamp(0.0, 1.0);
            }
            let e = op.energy(&trial, p);
            if e <= energy + ARMIJO * t * slope {
                accepted = Some(e);
                break;
            }
            t *= 0.5;
        }
        iters += 1;
        let Some(e) = accepted else {
            // no decrease representable in floating point
            trace.push(TraceRow { iter: iters, energy, step: 0.0 });
            final_decrement = 0.0;
            converged = true;
            break;
        };
        u.copy_from_slice(&trial);
        final_decrement = (energy - e) / energy;
        energy = e;
        trace.push(TraceRow { iter: iters, energy, step: t });
        if final_decrement <= tol {
            converged = true;
            break;
        }
    }
    CapacityResult { value: energy, potential: Vec::new(), iterations: iters, converged, final_decrement, trace }
}

/// Surface measure of the unit sphere in `R^Q`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            let n = dim as f64;
            2.0 * std::f64::consts::PI.powf(n / 2.0) / gamma_half_integer(n / 2.0)
        }
    }
}

fn gamma_half_integer(x: f64) -> f64 {
    // Γ(x) for x a positive multiple of 1/2
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut y = 0.5;
        while y < x - 1e-12 {
            g *= y;
            y += 1.0;
        }
        g
    }
}

/// `∫_r^R ρ^{(1-Q)/(p-1)} dρ`, written as `r^{a+1} ∫_0^{log(R/r)} e^{(a+1)t} dt`
/// so that rescaling `(r, R)` changes only the prefactor.
fn radial_integral(r: f64, big: f64, exponent: f64) -> f64 {
    let k = exponent + 1.0;
    let len = (big / r).ln();
    let inner = if k.abs() < 1e-14 { len } else { (k * len).exp_m1() / k };
    r.powf(k) * inner
}

/// Capacity of the spherical condenser `(B(r), B(R))` in `R^Q`:
/// `ω_{Q-1} (∫_r^R ρ^{(1-Q)/(p-1)} dρ)^{1-p}`, the energy of the radial
/// minimizer `|u'(ρ)| ∝ ρ^{(1-Q)/(p-1)}`.
pub fn radial_condenser_oracle(r: f64, big: f64, p: f64, dim: usize) -> Result<f64> {
    if !(r > 0.0 && r < big) {
        return Err(Error::InvalidParameter(format!("radial condenser needs 0 < r < R, got r = {r}, R = {big}")));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("capacity exponent must exceed 1, got {p}")));
    }
    let q = dim as f64;
    let omega = sphere_area(dim);
    if p == q {
        return Ok(omega * (big / r).ln().powf(1.0 - q));
    }
    let integral = radial_integral(r, big, (1.0 - q) / (p - 1.0));
    Ok(omega * integral.powf(1.0 - p))
}

/// `∫ g^p dμ` for `g = χ_{B(r) \ B(ρ)} / (log(r/ρ) |x|)`, the upper
/// gradient of the logarithmic cutoff between radii `ρ` and `r`.
pub fn log_cutoff_upper_bound(r: f64, rho: f64, p: f64, dim: usize) -> Result<f64> {
    if !(rho > 0.0 && rho < r) {
        return Err(Error::InvalidParameter(format!("log cutoff needs 0 < rho < r, got rho = {rho}, r = {r}")));
    }
    let q = dim as f64;
    let l = (r / rho).ln();
    let radial = radial_integral(rho, r, q - 1.0 - p);
    Ok(sphere_area(dim) * radial / l.powf(p))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContentCapacityReport {
    pub s: f64,
    /// Upper estimate of the `s`-content of `E`.
    pub content: f64,
    /// `content / r^s`.
    pub lambda: f64,
    /// `cap_p(E, B(x, 2r))`.
    pub cap_set: f64,
    /// `cap_p(B(x, r), B(x, 2r))`.
    pub cap_ball: f64,
    /// `cap_set / (λ cap_ball)`.
    pub ratio: f64,
    pub converged: bool,
}

/// Compare the capacity of `E ⊆ B(x, r)` in `B(x, 2r)` with that of the
/// ball itself, normalized by the content density `λ` of `E` at scale `r`.
/// Sets of `s`-content comparable to `r^s` with `s > Q - p` have ratios
/// bounded below.
pub fn content_capacity_check(
    lattice: &Lattice,
    e: &SetMask,
    x: &Point,
    r: f64,
    s: f64,
    p: f64,
) -> Result<ContentCapacityReport> {
    let threshold = lattice.dim() as f64 - p;
    if !(s > threshold) {
        return Err(Error::BelowCodimension { s, threshold });
    }
    e.check_lattice(lattice)?;
    if e.is_empty() {
        return Err(Error::EmptyMask);
    }
    let content = content_upper(&e.centers(lattice), s, lattice.spacing())?;
    let lambda = content / r.powf(s);
    let env = ball_mask(lattice, x, 2.0 * r)?;
    let ball = ball_mask(lattice, x, r)?;
    let a = solve_capacity(&CapacityProblem::new(lattice, e, &env, p))?;
    let b = solve_capacity(&CapacityProblem::new(lattice, &ball, &env, p))?;
    Ok(ContentCapacityReport {
        s,
        content,
        lambda,
        cap_set: a.value,
        cap_ball: b.value,
        ratio: a.value / (lambda * b.value),
        converged: a.converged && b.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{point2, SpaceParams};
    use std::f64::consts::{E, LN_2, PI};

    /// Composite Gauss–Legendre (5 nodes) of the radial integral.
    fn quadrature(r: f64, big: f64, a: f64) -> f64 {
        let x = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
        let w = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
        let panels = 400;
        let len = (big / r).ln() / panels as f64;
        let mut sum = 0.0;
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * len;
            for i in 0..5 {
                let t = mid + 0.5 * len * x[i];
                let rho = r * t.exp();
                sum += 0.5 * len * w[i] * rho.powf(a) * rho;
            }
        }
        sum
    }

    #[test]
    fn oracle_closed_form_at_critical_exponent() {
        let v = radial_condenser_oracle(1.0, 2.0, 2.0, 2).unwrap();
        assert!((v - 2.0 * PI / LN_2).abs() < 1e-12);
        let v3 = radial_condenser_oracle(1.0, 2.0, 3.0, 3).unwrap();
        assert!((v3 - 4.0 * PI / LN_2.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_quadrature() {
        for (p, dim) in [(1.5, 2), (3.0, 2), (1.5, 3), (2.0, 3), (2.5, 3)] {
            let q = dim as f64;
            let a = (1.0 - q) / (p - 1.0);
            let expect = sphere_area(dim) * quadrature(0.7, 2.3, a).powf(1.0 - p);
            let got = radial_condenser_oracle(0.7, 2.3, p, dim).unwrap();
            assert!((got - expect).abs() < 1e-10 * expect, "p {p} Q {dim}: {got} vs {expect}");
        }
    }

    #[test]
    fn oracle_scaling_is_exact() {
        for (p, dim) in [(1.5, 2), (3.0, 2), (2.0, 3)] {
            let base = radial_condenser_oracle(1.0, 2.0, p, dim).unwrap();
            for lambda in [0.125, 3.0, 10.0] {
                let scaled = radial_condenser_oracle(lambda, 2.0 * lambda, p, dim).unwrap();
                let expect = base * lambda.powf(dim as f64 - p);
                assert!((scaled - expect).abs() <= 4.0 * f64::EPSILON * expect);
            }
        }
        assert!(radial_condenser_oracle(2.0, 2.0, 2.0, 2).is_err());
    }

    #[test]
    fn log_cutoff_values() {
        let v = log_cutoff_upper_bound(1.0, 1.0 / E, 2.0, 2).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12);
        // for p = Q the bound is ω / log(m)^{Q-1}
        for m in [4.0, 16.0, 256.0] {
            let v = log_cutoff_upper_bound(1.0, 1.0 / m, 2.0, 2).unwrap();
            assert!((v - 2.0 * PI / m.ln()).abs() < 1e-12);
        }
        assert!(log_cutoff_upper_bound(1.0, 1.0, 2.0, 2).is_err());
    }

    #[test]
    fn empty_plate_and_escaping_plate() {
        let lat = Lattice::from_params(&SpaceParams::planar(0.125, 1.0));
        let env = ball_mask(&lat, &point2(0.0, 0.0), 0.5).unwrap();
        let empty = SetMask::empty(&lat);
        let r = solve_capacity(&CapacityProblem::new(&lat, &empty, &env, 2.0)).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
        let big = ball_mask(&lat, &point2(0.0, 0.0), 0.8).unwrap();
        assert!(matches!(solve_capacity(&CapacityProblem::new(&lat, &big, &env, 2.0)), Err(Error::PlateEscapesEnvironment)));
    }

    #[test]
    fn forced_configuration_without_free_cells() {
        let lat = Lattice::from_params(&SpaceParams::planar(0.125, 1.0));
        let env = ball_mask(&lat, &point2(0.0, 0.0), 0.5).unwrap();
        let r = solve_capacity(&CapacityProblem::new(&lat, &env, &env, 2.0)).unwrap();
        assert!(r.converged);
        // every boundary face of the plate contributes one unit
        let faces: usize = env
            .cells()
            .iter()
            .map(|&c| {
                (0..2)
                    .map(|a| {
                        [lat.forward(c, a), lat.backward(c, a)].iter().filter(|n| n.map_or(true, |j| !env.contains(j))).count()
                    })
                    .sum::<usize>()
            })
            .sum();
        assert!((r.value - faces as f64).abs() < 1e-12);
    }

    #[test]
    fn coarse_condenser_is_close_and_monotone() {
        let lat = Lattice::from_params(&SpaceParams::planar(1.0 / 32.0, 2.0));
        let plate = ball_mask(&lat, &point2(0.0, 0.0), 1.0).unwrap();
        let env = ball_mask(&lat, &point2(0.0, 0.0), 2.0).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let r = solve_capacity(&CapacityProblem::new(&lat, &plate, &env, p)).unwrap();
            let oracle = radial_condenser_oracle(1.0, 2.0, p, 2).unwrap();
            assert!((r.value / oracle - 1.0).abs() < 0.1, "p {p}: {} vs {oracle}", r.value);
            for pair in r.trace.windows(2) {
                assert!(pair[1].energy <= pair[0].energy * (1.0 + 1e-12), "p {p}: energy rose");
            }
            assert!(r.potential.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn full_ball_has_content_ratio_near_one() {
        let lat = Lattice::from_params(&SpaceParams::planar(1.0 / 32.0, 1.25));
        let x = point2(0.0, 0.0);
        let e = ball_mask(&lat, &x, 0.5).unwrap();
        let rep = content_capacity_check(&lat, &e, &x, 0.5, 2.0, 2.0).unwrap();
        assert!((rep.ratio - 1.0).abs() < 0.1, "{rep:?}");
        assert!(matches!(content_capacity_check(&lat, &e, &x, 0.5, 0.0, 2.0), Err(Error::BelowCodimension { .. })));
    }
}
