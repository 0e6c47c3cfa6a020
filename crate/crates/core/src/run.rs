//! Command dispatch: evaluate an experiment configuration over its
//! refinement ladder and write reports.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacity::{content_capacity_check, solve_capacity, CapacityProblem, ContentCapacityReport, TraceRow};
use crate::config::{Command, ExperimentConfig, PointSource};
use crate::cover::{
    content_lower_via_perfectness, content_upper, epsilon_threshold, merge_cover, merge_inequality_holds,
    surviving_radius_bound, write_merge_trace, Ball, BallCover, MergeParams, MergeStep,
};
use crate::domain::cantor_endpoints;
use crate::error::{Error, Result};
use crate::fatness::{
    fatness_scan, fatness_to_perfectness_bound, fatness_trend, FatnessPerfectnessBound, FatnessRow, FatnessScan,
    FatnessTrend,
};
use crate::grid::{coords, distance, MetricGrid, Point, SetMask};
use crate::hardy::{
    estimate_hardy_level, hardy_trend, levelset_decomposition_check, mazya_check, random_tents, tent_sum,
    verify_annulus_bounds, AnnulusReport, HardyLevel, HardyOptions, HardyTrend, HardyVerdict, TREND_NOTE,
};
use crate::perfectness::{
    hardy_perfectness_constant, perfectness_constant, perfectness_trend, sharp_threshold, HardyPerfectnessBound,
    PerfectnessOptions, PerfectnessTrend, PerfectnessVerdict,
};
use crate::report::{write_csv, write_f64_le, write_json, write_series, Provenance};

/// Files written and whether every solve converged.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub converged: bool,
}

pub fn grids(cfg: &ExperimentConfig) -> Result<Vec<MetricGrid>> {
    cfg.ladder.iter().map(|&h| MetricGrid::build(&cfg.domain, cfg.space.params(h))).collect()
}

/// Points of `source` on `grid` and the perfectness options suited to them:
/// grid resolution for cell sets, none for exact point lists.
pub fn source_points(grid: &MetricGrid, source: &PointSource) -> Result<(Vec<Point>, PerfectnessOptions)> {
    let lat = grid.lattice();
    let cells = |m: SetMask| (m.centers(lat), PerfectnessOptions::for_grid(lat.spacing()));
    Ok(match source {
        PointSource::Boundary => cells(grid.boundary_trace()),
        PointSource::Complement => cells(grid.complement()),
        PointSource::Domain => cells(grid.domain().clone()),
        PointSource::CantorEndpoints { ratio, depth, a, b } => {
            if !(*ratio > 0.0 && *ratio < 0.5) {
                return Err(Error::InvalidParameter(format!("Cantor ratio must lie in (0, 1/2), got {ratio}")));
            }
            let len = distance(a, b);
            let pts = cantor_endpoints(*ratio, *depth, len)
                .into_iter()
                .map(|t| {
                    let s = t / len;
                    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
                })
                .collect();
            (pts, PerfectnessOptions::EXACT)
        }
        PointSource::List { points } => (points.clone(), PerfectnessOptions::EXACT),
    })
}

fn source_mask(grid: &MetricGrid, source: &PointSource) -> Result<SetMask> {
    match source {
        PointSource::Boundary => Ok(grid.boundary_trace()),
        PointSource::Complement => Ok(grid.complement()),
        PointSource::Domain => Ok(grid.domain().clone()),
        _ => Err(Error::Config("fatness centers must come from grid cells".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Negative,
    Inconclusive,
}

impl From<HardyVerdict> for Verdict {
    fn from(v: HardyVerdict) -> Self {
        match v {
            HardyVerdict::Holds => Verdict::Positive,
            HardyVerdict::Fails => Verdict::Negative,
            HardyVerdict::Inconclusive => Verdict::Inconclusive,
        }
    }
}

impl From<PerfectnessVerdict> for Verdict {
    fn from(v: PerfectnessVerdict) -> Self {
        match v {
            PerfectnessVerdict::Bounded => Verdict::Positive,
            PerfectnessVerdict::Unbounded => Verdict::Negative,
            PerfectnessVerdict::Inconclusive => Verdict::Inconclusive,
        }
    }
}

impl From<&FatnessTrend> for Verdict {
    fn from(t: &FatnessTrend) -> Self {
        if t.fat {
            Verdict::Positive
        } else if t.declining {
            Verdict::Negative
        } else {
            Verdict::Inconclusive
        }
    }
}

fn combine(vs: &[Verdict]) -> Verdict {
    if vs.iter().all(|v| *v == Verdict::Positive) {
        Verdict::Positive
    } else if vs.iter().all(|v| *v == Verdict::Negative) {
        Verdict::Negative
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityLevel {
    pub spacing: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_decrement: f64,
    pub content: Option<ContentCapacityReport>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    #[serde(skip)]
    pub potential: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityRun {
    pub provenance: Provenance,
    pub p: f64,
    pub levels: Vec<CapacityLevel>,
    /// The value dropped at every refinement.
    pub strictly_decreasing: bool,
}

pub fn capacity_run(cfg: &ExperimentConfig) -> Result<CapacityRun> {
    let plate_region = cfg.capacity.plate.as_ref().ok_or_else(|| Error::Config("capacity needs [capacity.plate]".into()))?;
    let p = cfg.p();
    let mut levels = Vec::new();
    for grid in grids(cfg)? {
        let lat = grid.lattice();
        let plate = plate_region.rasterize(lat)?;
        let env = match &cfg.capacity.environment {
            Some(r) => r.rasterize(lat)?,
            None => grid.domain().clone(),
        };
        let mut prob = CapacityProblem::new(lat, &plate, &env, p);
        if let Some(tol) = cfg.capacity.tol {
            prob.tol = tol;
        }
        let res = solve_capacity(&prob)?;
        let content = match &cfg.capacity.content {
            Some(c) => Some(content_capacity_check(lat, &plate, &c.center, c.radius, c.s, p)?),
            None => None,
        };
        levels.push(CapacityLevel {
            spacing: lat.spacing(),
            value: res.value,
            iterations: res.iterations,
            converged: res.converged,
            final_decrement: res.final_decrement,
            content,
            trace: res.trace,
            potential: res.potential,
        });
    }
    let strictly_decreasing = levels.len() >= 2 && levels.windows(2).all(|w| w[1].value < w[0].value);
    Ok(CapacityRun { provenance: Provenance::new(cfg, cfg.seed), p, levels, strictly_decreasing })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanSummary {
    pub spacing: f64,
    pub c0_est: f64,
    pub min_by_radius: Vec<(f64, f64)>,
    pub skipped: usize,
    pub converged: bool,
}

impl From<&FatnessScan> for ScanSummary {
    fn from(s: &FatnessScan) -> Self {
        ScanSummary {
            spacing: s.spacing,
            c0_est: s.c0_est,
            min_by_radius: s.min_by_radius.clone(),
            skipped: s.skipped,
            converged: s.converged,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FatnessSeries {
    pub p: f64,
    pub scans: Vec<ScanSummary>,
    pub trend: FatnessTrend,
    #[serde(skip)]
    pub rows: Vec<Vec<FatnessRow>>,
}

fn fatness_series(cfg: &ExperimentConfig, grids: &[MetricGrid], p: f64) -> Result<FatnessSeries> {
    let mut scans = Vec::new();
    for grid in grids {
        let e = grid.complement();
        let candidates = source_mask(grid, &cfg.fatness.candidates)?;
        scans.push(fatness_scan(grid, &e, &candidates, p, cfg.fatness.centers, &cfg.fatness.radii)?);
    }
    let trend = fatness_trend(&scans);
    Ok(FatnessSeries {
        p,
        scans: scans.iter().map(ScanSummary::from).collect(),
        trend,
        rows: scans.into_iter().map(|s| s.rows).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FatnessRun {
    pub provenance: Provenance,
    pub series: FatnessSeries,
}

pub fn fatness_run(cfg: &ExperimentConfig) -> Result<FatnessRun> {
    let grids = grids(cfg)?;
    Ok(FatnessRun { provenance: Provenance::new(cfg, cfg.seed), series: fatness_series(cfg, &grids, cfg.p())? })
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfectnessLevel {
    pub spacing: f64,
    pub points: usize,
    pub c_up: f64,
    #[serde(with = "coords")]
    pub witness_center: Point,
    pub witness_r: f64,
    #[serde(skip)]
    pub per_center: Vec<f64>,
    #[serde(skip)]
    pub centers: Vec<Point>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfectnessSeries {
    pub levels: Vec<PerfectnessLevel>,
    pub trend: PerfectnessTrend,
}

fn perfectness_series(grids: &[MetricGrid], source: &PointSource) -> Result<PerfectnessSeries> {
    let mut levels = Vec::new();
    for grid in grids {
        let (pts, opts) = source_points(grid, source)?;
        let rep = perfectness_constant(&pts, &opts)?;
        levels.push(PerfectnessLevel {
            spacing: grid.spacing(),
            points: pts.len(),
            c_up: rep.c_up,
            witness_center: rep.witness_center,
            witness_r: rep.witness_r,
            per_center: rep.per_center,
            centers: pts,
        });
    }
    let spacings: Vec<f64> = levels.iter().map(|l| l.spacing).collect();
    let c: Vec<f64> = levels.iter().map(|l| l.c_up).collect();
    Ok(PerfectnessSeries { trend: perfectness_trend(&spacings, &c), levels })
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfectnessRun {
    pub provenance: Provenance,
    pub series: PerfectnessSeries,
}

pub fn perfectness_run(cfg: &ExperimentConfig) -> Result<PerfectnessRun> {
    let grids = grids(cfg)?;
    Ok(PerfectnessRun {
        provenance: Provenance::new(cfg, cfg.seed),
        series: perfectness_series(&grids, &cfg.perfectness.source)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HardySeries {
    pub p: f64,
    pub levels: Vec<HardyLevel>,
    pub trend: HardyTrend,
}

fn hardy_options(cfg: &ExperimentConfig) -> HardyOptions {
    HardyOptions {
        restarts: cfg.hardy.restarts,
        seed: cfg.seed,
        probe_iters: cfg.hardy.probe_iters,
        max_iters: cfg.hardy.max_iters,
        tol: cfg.hardy.tol,
    }
}

fn hardy_series(cfg: &ExperimentConfig, grids: &[MetricGrid], p: f64) -> Result<HardySeries> {
    let opts = hardy_options(cfg);
    let levels = grids.iter().map(|g| estimate_hardy_level(g, p, &opts)).collect::<Result<Vec<_>>>()?;
    let trend = hardy_trend(&levels);
    Ok(HardySeries { p, levels, trend })
}

#[derive(Clone, Debug, Serialize)]
pub struct HardyRun {
    pub provenance: Provenance,
    pub series: Vec<HardySeries>,
    pub annulus: Vec<AnnulusReport>,
    pub note: &'static str,
}

pub fn hardy_run(cfg: &ExperimentConfig) -> Result<HardyRun> {
    let grids = grids(cfg)?;
    let mut exps = vec![cfg.p()];
    exps.extend(cfg.hardy.extra_exponents.iter().copied());
    let series = if cfg.hardy.estimate {
        exps.iter().map(|&p| hardy_series(cfg, &grids, p)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut annulus = Vec::new();
    if let Some(a) = &cfg.hardy.annulus {
        let finest = grids.last().unwrap();
        let q = finest.dim() as f64;
        let c_h = series.iter().find(|s| s.p == q).map(|s| s.levels.last().unwrap().c_h_est);
        for &m in &a.m {
            annulus.push(verify_annulus_bounds(finest, &a.center, a.r0, m, c_h)?);
        }
    }
    Ok(HardyRun { provenance: Provenance::new(cfg, cfg.seed), series, annulus, note: TREND_NOTE })
}

#[derive(Clone, Debug, Serialize)]
pub struct MazyaRow {
    pub fixture_id: usize,
    pub numerator: f64,
    pub capacity: f64,
    pub quotient: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetRow {
    pub index: usize,
    pub levels: usize,
    pub capacity_sum: f64,
    pub energy_side: f64,
    pub a_ok: bool,
    pub hardy_side: f64,
    pub shell_sum: f64,
    pub b_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MazyaLevel {
    pub spacing: f64,
    pub rows: Vec<MazyaRow>,
    pub levelsets: Vec<LevelSetRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MazyaRun {
    pub provenance: Provenance,
    pub p: f64,
    pub levels: Vec<MazyaLevel>,
    pub levelsets_ok: bool,
}

pub fn mazya_run(cfg: &ExperimentConfig) -> Result<MazyaRun> {
    let p = cfg.p();
    let mut levels = Vec::new();
    for (li, grid) in grids(cfg)?.iter().enumerate() {
        let mut rows = Vec::new();
        for (k, region) in cfg.mazya.sets.iter().enumerate() {
            let mask = region.rasterize(grid.lattice())?;
            let r = mazya_check(grid, &mask, p)?;
            rows.push(MazyaRow {
                fixture_id: k,
                numerator: r.numerator,
                capacity: r.capacity,
                quotient: r.quotient,
                converged: r.converged,
            });
        }
        let mut levelsets = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add((li as u64) << 32));
        let tents = if li == 0 { cfg.mazya.tents } else { 0 };
        for index in 0..tents {
            let count = rng.gen_range(1..=3);
            let tents = random_tents(grid, &mut rng, count);
            let u = tent_sum(grid, &tents);
            let r = levelset_decomposition_check(grid, &u, p)?;
            levelsets.push(LevelSetRow {
                index,
                levels: r.terms.len(),
                capacity_sum: r.capacity_sum,
                energy_side: r.energy_side,
                a_ok: r.a_ok,
                hardy_side: r.hardy_side,
                shell_sum: r.shell_sum,
                b_ok: r.b_ok,
            });
        }
        levels.push(MazyaLevel { spacing: grid.spacing(), rows, levelsets });
    }
    let levelsets_ok = levels.iter().flat_map(|l| &l.levelsets).all(|r| r.a_ok && r.b_ok);
    Ok(MazyaRun { provenance: Provenance::new(cfg, cfg.seed), p, levels, levelsets_ok })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverOutcome {
    pub index: usize,
    pub initial: usize,
    pub merges: usize,
    pub sum_before: f64,
    pub sum_after: f64,
    /// `Σ r^ε` never rose and every merged pair satisfied the merge
    /// inequality.
    pub monotone: bool,
    /// The target stayed covered after every merge.
    pub covered: bool,
    pub r1: f64,
    pub bound: f64,
    pub survival_pass: bool,
    pub content_upper: f64,
    pub content_lower: f64,
    pub content_ok: bool,
}

impl CoverOutcome {
    pub fn pass(&self) -> bool {
        self.merges < self.initial.max(1) && self.monotone && self.covered && self.survival_pass && self.content_ok
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverLevel {
    pub spacing: f64,
    pub points: usize,
    pub target: usize,
    pub c_up: f64,
    pub alpha: f64,
    pub eps: f64,
    #[serde(with = "coords")]
    pub x0: Point,
    pub r0: f64,
    pub outcomes: Vec<CoverOutcome>,
    pub all_pass: bool,
    #[serde(skip)]
    pub example: Option<(BallCover, Vec<MergeStep>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverRun {
    pub provenance: Provenance,
    pub levels: Vec<CoverLevel>,
}

/// Greedy cover of `target` in random order with radii drawn from
/// `[lo, hi]`, every ball centered at a target point.
pub fn random_cover(target: &[Point], rng: &mut impl Rng, lo: f64, hi: f64) -> BallCover {
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.shuffle(rng);
    let mut balls: Vec<Ball> = Vec::new();
    for i in order {
        let p = &target[i];
        if !balls.iter().any(|b| b.contains(p)) {
            let r = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            balls.push(Ball::new(*p, r));
        }
    }
    BallCover::new(balls)
}

/// Merge `cover` and certify every step, then check the surviving radius
/// and the content bound at `x0`.
pub fn certify_cover(
    index: usize,
    cover: &BallCover,
    target: &[Point],
    params: &MergeParams,
    x0: &Point,
    r0: f64,
    content_up: f64,
) -> Result<(CoverOutcome, BallCover, Vec<MergeStep>)> {
    let c = params.merge_constant();
    let mut prev = cover.clone();
    let mut prev_sum = cover.sum_pow(params.eps);
    let mut monotone = true;
    let mut covered = cover.covers(target);
    let (merged, steps) = merge_cover(cover, params, |step, now| {
        let (a, b) = (prev.balls[step.i].radius, prev.balls[step.j].radius);
        monotone &= merge_inequality_holds(a, b, c, params.eps);
        monotone &= step.sum_eps <= prev_sum * (1.0 + 1e-12);
        covered &= now.covers(target);
        prev_sum = step.sum_eps;
        prev = now.clone();
    })?;
    let surv = surviving_radius_bound(&merged, x0, r0, params)?;
    let lower = content_lower_via_perfectness(r0, params.c_up, params.eps).ok();
    let content_lower = lower.unwrap_or(0.0);
    let outcome = CoverOutcome {
        index,
        initial: cover.len(),
        merges: steps.len(),
        sum_before: cover.sum_pow(params.eps),
        sum_after: merged.sum_pow(params.eps),
        monotone,
        covered,
        r1: surv.radius,
        bound: surv.bound,
        survival_pass: surv.pass,
        content_upper: content_up,
        content_lower,
        content_ok: lower.is_none_or(|l| content_up >= l && merged.sum_pow(params.eps) >= l),
    };
    Ok((outcome, merged, steps))
}

pub fn cover_run(cfg: &ExperimentConfig) -> Result<CoverRun> {
    let cc = &cfg.cover;
    let mut levels = Vec::new();
    for (li, grid) in grids(cfg)?.iter().enumerate() {
        let (pts, opts) = source_points(grid, &cc.source)?;
        let c_up = match cc.c_up {
            Some(c) => c,
            None => perfectness_constant(&pts, &opts)?.c_up,
        };
        let eps = cc.eps_fraction * epsilon_threshold(cc.alpha * c_up).min(epsilon_threshold(2.0 * c_up));
        let params = MergeParams::new(cc.alpha, c_up, eps)?;
        let x0 = cc.x0.unwrap_or(pts[0]);
        let reach = pts.iter().map(|p| distance(p, &x0)).fold(0.0, f64::max);
        let r0 = cc.r0.unwrap_or(0.25 * reach);
        let target: Vec<Point> = pts.iter().copied().filter(|p| distance(p, &x0) <= r0).collect();
        let content_up = content_upper(&target, eps, grid.spacing())?;
        let h = grid.spacing();
        let mut outcomes = Vec::new();
        let mut example = None;
        for k in 0..cc.covers {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add((li as u64) << 32).wrapping_add(k as u64));
            let cover = random_cover(&target, &mut rng, cc.radius_cells[0] * h, cc.radius_cells[1] * h);
            let (outcome, merged, steps) = certify_cover(k, &cover, &target, &params, &x0, r0, content_up)?;
            if k == 0 {
                example = Some((merged, steps));
            }
            outcomes.push(outcome);
        }
        let all_pass = outcomes.iter().all(CoverOutcome::pass);
        levels.push(CoverLevel {
            spacing: h,
            points: pts.len(),
            target: target.len(),
            c_up,
            alpha: cc.alpha,
            eps,
            x0,
            r0,
            outcomes,
            all_pass,
            example,
        });
    }
    Ok(CoverRun { provenance: Provenance::new(cfg, cfg.seed), levels })
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdicts {
    /// Hardy's inequality at `p = Q`.
    pub hardy: Verdict,
    pub uniformly_perfect: Verdict,
    /// Uniform fatness at `p = Q`.
    pub fat_at_q: Verdict,
    /// Uniform fatness at every `p = Q - offset`.
    pub fat_below_q: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpCheck {
    pub p: f64,
    pub c_p: f64,
    /// The measured `c_UP` lies below `c_p`.
    pub c_up_below: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FatPerfectCheck {
    pub p: f64,
    pub c0: f64,
    pub bound: Option<FatnessPerfectnessBound>,
    pub c_up_within: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossBounds {
    pub c_up: f64,
    pub c_h: f64,
    pub hardy_perfectness: HardyPerfectnessBound,
    /// `log c_UP <= log` of the bound implied by `c_H`.
    pub c_up_within_hardy_bound: bool,
    pub sharp: Vec<SharpCheck>,
    pub fatness_perfectness: Vec<FatPerfectCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceRun {
    pub provenance: Provenance,
    pub dim: usize,
    pub hardy: Vec<HardySeries>,
    pub perfectness: PerfectnessSeries,
    pub fatness: Vec<FatnessSeries>,
    pub verdicts: Verdicts,
    pub cross_bounds: CrossBounds,
    pub note: &'static str,
}

impl EquivalenceRun {
    pub fn hardy_at(&self, p: f64) -> Option<&HardySeries> {
        self.hardy.iter().find(|s| s.p == p)
    }
}

pub fn equivalence_run(cfg: &ExperimentConfig) -> Result<EquivalenceRun> {
    let grids = grids(cfg)?;
    let dim = cfg.space.dim;
    let q = dim as f64;
    let mut hardy_ps = vec![q];
    hardy_ps.extend(cfg.equivalence.hardy_extra.iter().copied().filter(|&p| p != q));
    let hardy = hardy_ps.iter().map(|&p| hardy_series(cfg, &grids, p)).collect::<Result<Vec<_>>>()?;
    let perfectness = perfectness_series(&grids, &PointSource::Boundary)?;
    let mut fat_ps = vec![q];
    fat_ps.extend(cfg.equivalence.fat_offsets.iter().map(|e| q - e));
    let fatness = fat_ps.iter().map(|&p| fatness_series(cfg, &grids, p)).collect::<Result<Vec<_>>>()?;

    let below: Vec<Verdict> = fatness[1..].iter().map(|f| Verdict::from(&f.trend)).collect();
    let verdicts = Verdicts {
        hardy: hardy[0].trend.verdict.into(),
        uniformly_perfect: perfectness.trend.verdict.into(),
        fat_at_q: Verdict::from(&fatness[0].trend),
        fat_below_q: if below.is_empty() { Verdict::Inconclusive } else { combine(&below) },
    };

    let c_up = perfectness.levels.last().unwrap().c_up;
    let c_h = hardy[0].levels.last().unwrap().c_h_est;
    let regularity = grids[0].params().regularity;
    let hp = hardy_perfectness_constant(c_h, regularity, dim)?;
    let sharp = fat_ps[1..]
        .iter()
        .filter_map(|&p| sharp_threshold(p, dim).ok().map(|c_p| SharpCheck { p, c_p, c_up_below: c_up < c_p }))
        .collect();
    let fatness_perfectness = fatness[1..]
        .iter()
        .map(|f| {
            let c0 = *f.trend.c0.last().unwrap();
            let bound = fatness_to_perfectness_bound(c0, f.p, dim).ok();
            FatPerfectCheck { p: f.p, c0, bound, c_up_within: bound.map(|b| c_up <= b.m_max) }
        })
        .collect();
    let cross_bounds = CrossBounds {
        c_up,
        c_h,
        hardy_perfectness: hp,
        c_up_within_hardy_bound: c_up.ln() <= hp.log_bound,
        sharp,
        fatness_perfectness,
    };
    Ok(EquivalenceRun {
        provenance: Provenance::new(cfg, cfg.seed),
        dim,
        hardy,
        perfectness,
        fatness,
        verdicts,
        cross_bounds,
        note: TREND_NOTE,
    })
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

fn fatness_rows_csv(rows: &[FatnessRow], dim: usize, out: &mut Vec<u8>) -> std::io::Result<()> {
    use std::io::Write;
    let axes = ["cx", "cy", "cz"];
    writeln!(out, "{},r,ratio", axes[..dim].join(","))?;
    for r in rows {
        let c: Vec<String> = r.center[..dim].iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{},{}", c.join(","), r.radius, r.ratio)?;
    }
    Ok(())
}

fn write_fatness(w: &mut Writer, s: &FatnessSeries, dim: usize) -> Result<()> {
    let tag = format!("p{}", s.p);
    for (k, rows) in s.rows.iter().enumerate() {
        let path = w.path(&format!("fatness_{tag}_L{k}.csv"));
        write_csv(&path, |out| fatness_rows_csv(rows, dim, out))?;
    }
    if let Some(last) = s.scans.last() {
        let path = w.path(&format!("fatness_{tag}_min_ratio.dat"));
        write_series(&path, "r", "min_ratio", &last.min_by_radius)?;
    }
    let c0: Vec<(f64, f64)> = s.scans.iter().map(|x| (x.spacing, x.c0_est)).collect();
    let path = w.path(&format!("fatness_{tag}_c0.dat"));
    write_series(&path, "h", "c0_est", &c0)
}

fn write_perfectness(w: &mut Writer, s: &PerfectnessSeries, dim: usize) -> Result<()> {
    let rows: Vec<(f64, f64)> = s.levels.iter().map(|l| (l.spacing, l.c_up)).collect();
    let path = w.path("perfectness_c_up.dat");
    write_series(&path, "h", "c_up", &rows)?;
    if let Some(l) = s.levels.last() {
        let path = w.path("perfectness_centers.csv");
        write_csv(&path, |out| {
            use std::io::Write;
            let axes = ["cx", "cy", "cz"];
            writeln!(out, "{},max_gap_ratio", axes[..dim].join(","))?;
            for (p, g) in l.centers.iter().zip(&l.per_center) {
                let c: Vec<String> = p[..dim].iter().map(|v| v.to_string()).collect();
                writeln!(out, "{},{}", c.join(","), g)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn write_hardy(w: &mut Writer, s: &HardySeries) -> Result<()> {
    let tag = format!("p{}", s.p);
    let rows: Vec<(f64, f64)> = s.levels.iter().map(|l| (l.spacing, l.c_h_est)).collect();
    let path = w.path(&format!("hardy_{tag}.dat"));
    write_series(&path, "h", "c_h_est", &rows)?;
    if let Some(l) = s.levels.last() {
        let path = w.path(&format!("hardy_{tag}_minimizer.f64"));
        write_f64_le(&path, &l.minimizer)?;
    }
    Ok(())
}

/// Run `cfg` and write its reports into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out)?;
    let mut w = Writer { dir: out.to_path_buf(), files: Vec::new() };
    let dim = cfg.space.dim;
    let converged = match cfg.command {
        Command::Capacity => {
            let r = capacity_run(cfg)?;
            for (k, l) in r.levels.iter().enumerate() {
                let path = w.path(&format!("capacity_trace_L{k}.csv"));
                write_csv(&path, |out| {
                    use std::io::Write;
                    writeln!(out, "iter,energy,step")?;
                    for t in &l.trace {
                        writeln!(out, "{},{},{}", t.iter, t.energy, t.step)?;
                    }
                    Ok(())
                })?;
                let path = w.path(&format!("capacity_potential_L{k}.f64"));
                write_f64_le(&path, &l.potential)?;
            }
            let rows: Vec<(f64, f64)> = r.levels.iter().map(|l| (l.spacing, l.value)).collect();
            let path = w.path("capacity.dat");
            write_series(&path, "h", "capacity", &rows)?;
            let path = w.path("capacity.json");
            write_json(&path, &r)?;
            r.levels.iter().all(|l| l.converged)
        }
        Command::Fatness => {
            let r = fatness_run(cfg)?;
            write_fatness(&mut w, &r.series, dim)?;
            let path = w.path("fatness.json");
            write_json(&path, &r)?;
            r.series.scans.iter().all(|s| s.converged)
        }
        Command::Perfectness => {
            let r = perfectness_run(cfg)?;
            write_perfectness(&mut w, &r.series, dim)?;
            let path = w.path("perfectness.json");
            write_json(&path, &r)?;
            true
        }
        Command::Hardy => {
            let r = hardy_run(cfg)?;
            for s in &r.series {
                write_hardy(&mut w, s)?;
            }
            let path = w.path("hardy.json");
            write_json(&path, &r)?;
            r.series.iter().flat_map(|s| &s.levels).all(|l| l.converged)
        }
        Command::Mazya => {
            let r = mazya_run(cfg)?;
            for (k, l) in r.levels.iter().enumerate() {
                let path = w.path(&format!("mazya_L{k}.csv"));
                write_csv(&path, |out| {
                    use std::io::Write;
                    writeln!(out, "fixture_id,numerator,capacity,quotient")?;
                    for row in &l.rows {
                        writeln!(out, "{},{},{},{}", row.fixture_id, row.numerator, row.capacity, row.quotient)?;
                    }
                    Ok(())
                })?;
            }
            let path = w.path("mazya.json");
            write_json(&path, &r)?;
            r.levels.iter().flat_map(|l| &l.rows).all(|row| row.converged)
        }
        Command::Cover => {
            let r = cover_run(cfg)?;
            for (k, l) in r.levels.iter().enumerate() {
                let path = w.path(&format!("cover_L{k}.csv"));
                write_csv(&path, |out| {
                    use std::io::Write;
                    writeln!(out, "cover,initial,merges,sum_before,sum_after,r1,bound,pass")?;
                    for o in &l.outcomes {
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{},{}",
                            o.index,
                            o.initial,
                            o.merges,
                            o.sum_before,
                            o.sum_after,
                            o.r1,
                            o.bound,
                            o.pass()
                        )?;
                    }
                    Ok(())
                })?;
            }
            if let Some((merged, steps)) = r.levels.last().and_then(|l| l.example.as_ref()) {
                let path = w.path("cover_merged.csv");
                write_csv(&path, |out| merged.write_csv(dim, out))?;
                let path = w.path("merge_trace.csv");
                write_csv(&path, |out| write_merge_trace(steps, out))?;
            }
            let path = w.path("cover.json");
            write_json(&path, &r)?;
            true
        }
        Command::Equivalence => {
            let r = equivalence_run(cfg)?;
            for s in &r.hardy {
                write_hardy(&mut w, s)?;
            }
            for s in &r.fatness {
                write_fatness(&mut w, s, dim)?;
            }
            write_perfectness(&mut w, &r.perfectness, dim)?;
            let path = w.path("equivalence.json");
            write_json(&path, &r)?;
            r.hardy.iter().flat_map(|s| &s.levels).all(|l| l.converged)
                && r.fatness.iter().flat_map(|s| &s.scans).all(|s| s.converged)
        }
    };
    Ok(RunOutcome { files: w.files, converged })
}
