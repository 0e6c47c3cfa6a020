//! Shape descriptions and their rasterization onto a lattice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{coords, distance, Lattice, Point, SetMask};

/// A set in the ambient space, built from primitive shapes and boolean
/// operations.
///
/// Solid shapes (disk, box, half-space, annulus) contain a cell when its
/// center satisfies the strict inequalities. Thin shapes (point, segment,
/// Cantor set) contain every cell whose half-open box `[lo, lo + h)` meets
/// them, so they never vanish under refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Open ball; a disk in the plane.
    Disk {
        #[serde(with = "coords")]
        center: Point,
        radius: f64,
    },
    /// Open axis-aligned box.
    #[serde(rename = "box")]
    Rect {
        #[serde(with = "coords")]
        lo: Point,
        #[serde(with = "coords")]
        hi: Point,
    },
    /// `{x : normal . x < offset}`.
    HalfSpace {
        #[serde(with = "coords")]
        normal: Point,
        offset: f64,
    },
    /// Open ball with the single cell containing `puncture` removed.
    PuncturedDisk {
        #[serde(with = "coords")]
        center: Point,
        radius: f64,
        #[serde(with = "coords")]
        puncture: Point,
    },
    /// `{x : inner <= |x - center| < outer}`.
    Annulus {
        #[serde(with = "coords")]
        center: Point,
        inner: f64,
        outer: f64,
    },
    /// Middle-interval Cantor set of the given depth laid along the segment
    /// from `a` to `b`; each step keeps the two end pieces of relative
    /// length `ratio`. With `follow_grid` the depth is the deepest level
    /// whose pieces are at least one cell long, capped at `depth`.
    Cantor {
        ratio: f64,
        depth: u32,
        #[serde(with = "coords")]
        a: Point,
        #[serde(with = "coords")]
        b: Point,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        follow_grid: bool,
    },
    Segment {
        #[serde(with = "coords")]
        a: Point,
        #[serde(with = "coords")]
        b: Point,
    },
    Point {
        #[serde(with = "coords")]
        at: Point,
    },
    Union {
        of: Vec<Region>,
    },
    Intersection {
        of: Vec<Region>,
    },
    Difference {
        base: Box<Region>,
        remove: Vec<Region>,
    },
}

impl Region {
    pub fn disk(center: Point, radius: f64) -> Self {
        Region::Disk { center, radius }
    }

    pub fn rect(lo: Point, hi: Point) -> Self {
        Region::Rect { lo, hi }
    }

    pub fn segment(a: Point, b: Point) -> Self {
        Region::Segment { a, b }
    }

    pub fn point(at: Point) -> Self {
        Region::Point { at }
    }

    pub fn minus(self, remove: Region) -> Self {
        Region::Difference { base: Box::new(self), remove: vec![remove] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Region::Disk { radius, .. } | Region::PuncturedDisk { radius, .. } if !(*radius > 0.0) => {
                bad(format!("disk radius must be positive, got {radius}"))
            }
            Region::Annulus { inner, outer, .. } if !(*inner >= 0.0 && inner < outer) => {
                bad(format!("annulus needs 0 <= inner < outer, got {inner}, {outer}"))
            }
            Region::Cantor { ratio, .. } if !(*ratio > 0.0 && *ratio < 0.5) => {
                bad(format!("cantor ratio must lie in (0, 1/2), got {ratio}"))
            }
            Region::Union { of } | Region::Intersection { of } => of.iter().try_for_each(Region::validate),
            Region::Difference { base, remove } => {
                base.validate()?;
                remove.iter().try_for_each(Region::validate)
            }
            _ => Ok(()),
        }
    }

    /// Cell mask of this region on `lattice`.
    pub fn rasterize(&self, lattice: &Lattice) -> Result<SetMask> {
        self.validate()?;
        let bits = self.bits(lattice)?;
        Ok(SetMask::from_bits(lattice, bits))
    }

    fn bits(&self, lat: &Lattice) -> Result<Vec<bool>> {
        let n = lat.len();
        let dim = lat.dim();
        let by_center = |f: &dyn Fn(&Point) -> bool| -> Vec<bool> { (0..n).map(|i| f(&lat.center(i))).collect() };
        Ok(match self {
            Region::Disk { center, radius } => by_center(&|c| distance(c, center) < *radius),
            Region::Rect { lo, hi } => by_center(&|c| (0..dim).all(|k| lo[k] < c[k] && c[k] < hi[k])),
            Region::HalfSpace { normal, offset } => {
                by_center(&|c| (0..dim).map(|k| normal[k] * c[k]).sum::<f64>() < *offset)
            }
            Region::PuncturedDisk { center, radius, puncture } => {
                let mut bits = by_center(&|c| distance(c, center) < *radius);
                if let Some(i) = lat.cell_of(puncture) {
                    bits[i] = false;
                }
                bits
            }
            Region::Annulus { center, inner, outer } => by_center(&|c| {
                let d = distance(c, center);
                d >= *inner && d < *outer
            }),
            Region::Cantor { ratio, depth, a, b, follow_grid } => {
                let depth = if *follow_grid { resolved_depth(*ratio, distance(a, b), lat.spacing()).min(*depth) } else { *depth };
                let mut bits = vec![false; n];
                for (s, t) in cantor_pieces(*ratio, depth, a, b, lat.spacing())? {
                    mark_segment(lat, &s, &t, &mut bits);
                }
                bits
            }
            Region::Segment { a, b } => {
                let mut bits = vec![false; n];
                mark_segment(lat, a, b, &mut bits);
                bits
            }
            Region::Point { at } => {
                let mut bits = vec![false; n];
                if let Some(i) = lat.cell_of(at) {
                    bits[i] = true;
                }
                bits
            }
            Region::Union { of } => {
                let mut bits = vec![false; n];
                for r in of {
                    for (x, y) in bits.iter_mut().zip(r.bits(lat)?) {
                        *x |= y;
                    }
                }
                bits
            }
            Region::Intersection { of } => {
                let mut bits = vec![true; n];
                for r in of {
                    for (x, y) in bits.iter_mut().zip(r.bits(lat)?) {
                        *x &= y;
                    }
                }
                bits
            }
            Region::Difference { base, remove } => {
                let mut bits = base.bits(lat)?;
                for r in remove {
                    for (x, y) in bits.iter_mut().zip(r.bits(lat)?) {
                        *x &= !y;
                    }
                }
                bits
            }
        })
    }
}

/// Parameter intervals `[s, t] ⊂ [0, 1]` of the depth-`depth` Cantor
/// construction with ratio `ratio`, in left-to-right order.
pub fn cantor_intervals(ratio: f64, depth: u32) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 1.0)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(out.len() * 2);
        for (s, t) in out {
            let len = (t - s) * ratio;
            next.push((s, s + len));
            next.push((t - len, t));
        }
        out = next;
    }
    out
}

fn cantor_pieces(ratio: f64, depth: u32, a: &Point, b: &Point, spacing: f64) -> Result<Vec<(Point, Point)>> {
    let total = distance(a, b);
    let piece = ratio.powi(depth as i32) * total;
    if piece < spacing * (1.0 - 1e-9) {
        return Err(Error::ResolutionExhausted { length: piece, spacing });
    }
    let lerp = |t: f64| -> Point { [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])] };
    Ok(cantor_intervals(ratio, depth).into_iter().map(|(s, t)| (lerp(s), lerp(t))).collect())
}

/// Deepest level whose pieces `ratio^depth length` are at least `spacing`.
pub fn resolved_depth(ratio: f64, length: f64, spacing: f64) -> u32 {
    let mut d = 0;
    while ratio.powi(d as i32 + 1) * length >= spacing * (1.0 - 1e-9) {
        d += 1;
    }
    d
}

/// Cells of the depth-`depth` Cantor set on the segment from `a` to `b`.
pub fn cantor_mask(lattice: &Lattice, ratio: f64, depth: u32, a: &Point, b: &Point) -> Result<SetMask> {
    Region::Cantor { ratio, depth, a: *a, b: *b, follow_grid: false }.rasterize(lattice)
}

/// Endpoints of the depth-`depth` Cantor intervals on `[0, length]`.
pub fn cantor_endpoints(ratio: f64, depth: u32, length: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::new();
    for (s, t) in cantor_intervals(ratio, depth) {
        pts.push(s * length);
        pts.push(t * length);
    }
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    pts
}

fn mark_segment(lat: &Lattice, a: &Point, b: &Point, bits: &mut [bool]) {
    let mut lo = *a;
    let mut hi = *b;
    for k in 0..lat.dim() {
        if lo[k] > hi[k] {
            std::mem::swap(&mut lo[k], &mut hi[k]);
        }
    }
    let range = lat.index_range(&lo, &hi, lat.spacing());
    let h = lat.spacing();
    let origin = lat.origin();
    lat.for_each_in(range, |i| {
        let c = lat.coords(i);
        let mut blo = [0.0; 3];
        let mut bhi = [0.0; 3];
        for k in 0..lat.dim() {
            blo[k] = origin[k] + c[k] as f64 * h;
            bhi[k] = blo[k] + h;
        }
        if segment_meets_half_open_box(a, b, &blo, &bhi, lat.dim()) {
            bits[i] = true;
        }
    });
}

/// Whether the closed segment `[a, b]` meets the half-open box `[lo, hi)`.
fn segment_meets_half_open_box(a: &Point, b: &Point, lo: &Point, hi: &Point, dim: usize) -> bool {
    // feasible parameters form an interval; track openness of each end
    let (mut t0, mut open0) = (0.0f64, false);
    let (mut t1, mut open1) = (1.0f64, false);
    let raise = |t: f64, open: bool, t0: &mut f64, o0: &mut bool| {
        if t > *t0 || (t == *t0 && open) {
            *t0 = t;
            *o0 = open;
        }
    };
    let lower = |t: f64, open: bool, t1: &mut f64, o1: &mut bool| {
        if t < *t1 || (t == *t1 && open) {
            *t1 = t;
            *o1 = open;
        }
    };
    for k in 0..dim {
        let d = b[k] - a[k];
        if d == 0.0 {
            if !(lo[k] <= a[k] && a[k] < hi[k]) {
                return false;
            }
        } else if d > 0.0 {
            raise((lo[k] - a[k]) / d, false, &mut t0, &mut open0);
            lower((hi[k] - a[k]) / d, true, &mut t1, &mut open1);
        } else {
            raise((hi[k] - a[k]) / d, true, &mut t0, &mut open0);
            lower((lo[k] - a[k]) / d, false, &mut t1, &mut open1);
        }
    }
    t0 < t1 || (t0 == t1 && !open0 && !open1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{point2, SpaceParams};

    fn lattice(h: f64, half: f64) -> Lattice {
        Lattice::from_params(&SpaceParams::planar(h, half))
    }

    #[test]
    fn cantor_interval_arithmetic() {
        assert_eq!(cantor_intervals(1.0 / 3.0, 0), vec![(0.0, 1.0)]);
        let iv = cantor_intervals(1.0 / 3.0, 3);
        assert_eq!(iv.len(), 8);
        let total: f64 = iv.iter().map(|(s, t)| t - s).sum();
        assert!((total - 8.0 / 27.0).abs() < 1e-14);
        for (s, t) in &iv {
            assert!((t - s - 1.0 / 27.0).abs() < 1e-14);
        }
    }

    #[test]
    fn quarter_cantor_gap_is_twice_the_piece() {
        let iv = cantor_intervals(0.25, 2);
        assert_eq!(iv.len(), 4);
        // gap between the first two pieces against the length of a piece
        let gap = iv[1].0 - iv[0].1;
        let piece = iv[0].1 - iv[0].0;
        assert!((gap / piece - 2.0).abs() < 1e-12);
        // and the same gap-to-piece ratio one level up
        let up = cantor_intervals(0.25, 1);
        assert!(((up[1].0 - up[0].1) / (up[0].1 - up[0].0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cantor_below_resolution_is_rejected() {
        let lat = lattice(1.0 / 64.0, 1.0);
        let r = cantor_mask(&lat, 1.0 / 3.0, 5, &point2(-0.5, 0.0), &point2(0.5, 0.0));
        assert!(matches!(r, Err(Error::ResolutionExhausted { .. })));
        assert!(cantor_mask(&lat, 1.0 / 3.0, 3, &point2(-0.5, 0.0), &point2(0.5, 0.0)).is_ok());
    }

    #[test]
    fn horizontal_segment_on_a_cell_edge_takes_one_row() {
        let lat = lattice(0.125, 1.0);
        let m = Region::segment(point2(-0.5, 0.0), point2(0.5, 0.0)).rasterize(&lat).unwrap();
        // [-0.5, 0.5] meets 8 half-open columns plus the column starting at 0.5
        assert_eq!(m.len(), 9);
        for c in m.centers(&lat) {
            assert!((c[1] - 0.0625).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_segment_is_connected_thin() {
        let lat = lattice(1.0 / 32.0, 1.0);
        let m = Region::segment(point2(-0.7, -0.3), point2(0.6, 0.4)).rasterize(&lat).unwrap();
        let h = lat.spacing();
        for c in m.centers(&lat) {
            // cell centers stay within half a diagonal of the line
            let (dx, dy) = (1.3, 0.7);
            let n = (dx * dx + dy * dy as f64).sqrt();
            let off = ((c[0] + 0.7) * dy - (c[1] + 0.3) * dx).abs() / n;
            assert!(off <= h * std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
        }
        assert!(m.len() >= 42);
    }

    #[test]
    fn punctured_disk_removes_one_cell() {
        let lat = lattice(1.0 / 16.0, 1.5);
        let d = Region::disk(point2(0.0, 0.0), 1.0).rasterize(&lat).unwrap();
        let pd = Region::PuncturedDisk { center: point2(0.0, 0.0), radius: 1.0, puncture: point2(0.0, 0.0) }
            .rasterize(&lat)
            .unwrap();
        assert_eq!(d.len(), pd.len() + 1);
    }

    #[test]
    fn region_reads_from_toml() {
        let text = r#"
            kind = "difference"
            base = { kind = "box", lo = [-1.0, -1.0], hi = [1.0, 1.0] }
            remove = [{ kind = "segment", a = [-0.5, 0.0], b = [0.5, 0.0] }]
        "#;
        let r: Region = toml::from_str(text).unwrap();
        assert_eq!(r, Region::rect(point2(-1.0, -1.0), point2(1.0, 1.0)).minus(Region::segment(point2(-0.5, 0.0), point2(0.5, 0.0))));
    }
}
