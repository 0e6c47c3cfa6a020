//! Uniform grids over axis-aligned boxes, standing in for an Ahlfors
//! Q-regular space with Lebesgue cell measure.
//!
//! Every cell is represented by its center. Set membership is decided at
//! centers with strict inequalities; lower-dimensional shapes (points,
//! segments, Cantor sets) claim the cells whose half-open box they meet.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::domain::Region;
use crate::edt;
use crate::error::{Error, Result};

/// A point of the ambient space. Planar grids leave the last coordinate at 0.
pub type Point = [f64; 3];

pub fn point2(x: f64, y: f64) -> Point {
    [x, y, 0.0]
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Serde adapter accepting `[x, y]` or `[x, y, z]`.
pub mod coords {
    use super::Point;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
        if p[2] == 0.0 {
            s.collect_seq(&p[..2])
        } else {
            s.collect_seq(&p[..])
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        match v.len() {
            2 => Ok([v[0], v[1], 0.0]),
            3 => Ok([v[0], v[1], v[2]]),
            n => Err(D::Error::custom(format!("expected 2 or 3 coordinates, got {n}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    #[serde(with = "coords")]
    pub lo: Point,
    #[serde(with = "coords")]
    pub hi: Point,
}

impl BBox {
    pub fn new(lo: Point, hi: Point) -> Self {
        BBox { lo, hi }
    }

    /// The square (or cube) `[-half, half]^dim`.
    pub fn centered(dim: usize, half: f64) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..dim {
            lo[k] = -half;
            hi[k] = half;
        }
        BBox { lo, hi }
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn min_side(&self, dim: usize) -> f64 {
        (0..dim).map(|k| self.side(k)).fold(f64::INFINITY, f64::min)
    }
}

/// Model-space parameters: dimension `Q`, regularity constant `c_A`,
/// grid spacing and bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub dim: usize,
    pub regularity: f64,
    pub spacing: f64,
    pub bbox: BBox,
}

impl SpaceParams {
    /// Planar Lebesgue space with `c_A = π` on `[-half, half]^2`.
    pub fn planar(spacing: f64, half: f64) -> Self {
        SpaceParams {
            dim: 2,
            regularity: std::f64::consts::PI,
            spacing,
            bbox: BBox::centered(2, half),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.regularity >= 1.0) {
            return Err(Error::InvalidParameter(format!("regularity constant must be >= 1, got {}", self.regularity)));
        }
        for k in 0..self.dim {
            let side = self.bbox.side(k);
            if !(side > 0.0) {
                return Err(Error::InvalidParameter("bounding box is degenerate".into()));
            }
            let cells = side / self.spacing;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "bounding box side {side} is not a multiple of spacing {}",
                    self.spacing
                )));
            }
        }
        Ok(())
    }
}

static NEXT_LATTICE_ID: AtomicU64 = AtomicU64::new(1);

/// Cell layout of a grid: origin corner, spacing and cell counts per axis.
///
/// Cells are stored x-fastest. Every lattice gets a fresh id which masks
/// carry to detect mixing of grids.
#[derive(Clone, Debug)]
pub struct Lattice {
    id: u64,
    dim: usize,
    spacing: f64,
    origin: Point,
    shape: [usize; 3],
}

impl Lattice {
    pub fn new(dim: usize, spacing: f64, origin: Point, shape: [usize; 3]) -> Self {
        let mut shape = shape;
        for s in shape.iter_mut().skip(dim) {
            *s = 1;
        }
        Lattice {
            id: NEXT_LATTICE_ID.fetch_add(1, Ordering::Relaxed),
            dim,
            spacing,
            origin,
            shape,
        }
    }

    pub fn from_params(params: &SpaceParams) -> Self {
        let mut shape = [1usize; 3];
        for (k, s) in shape.iter_mut().enumerate().take(params.dim) {
            *s = (params.bbox.side(k) / params.spacing).round() as usize;
        }
        Lattice::new(params.dim, params.spacing, params.bbox.lo, shape)
    }

    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn origin(&self) -> Point {
        self.origin
    }
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lebesgue measure of one cell, `h^Q`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn strides(&self) -> [usize; 3] {
        [1, self.shape[0], self.shape[0] * self.shape[1]]
    }

    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.shape[0] * (ijk[1] + self.shape[1] * ijk[2])
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.shape[0];
        let rest = i / self.shape[0];
        [x, rest % self.shape[1], rest / self.shape[1]]
    }

    #[inline]
    pub fn center(&self, i: usize) -> Point {
        let c = self.coords(i);
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = self.origin[k] + (c[k] as f64 + 0.5) * self.spacing;
        }
        p
    }

    pub fn bbox(&self) -> BBox {
        let mut hi = self.origin;
        for k in 0..self.dim {
            hi[k] += self.shape[k] as f64 * self.spacing;
        }
        BBox { lo: self.origin, hi }
    }

    /// Index of the cell whose half-open box `[lo, lo + h)` contains `p`.
    pub fn cell_of(&self, p: &Point) -> Option<usize> {
        let mut ijk = [0usize; 3];
        for k in 0..self.dim {
            let t = ((p[k] - self.origin[k]) / self.spacing).floor();
            if t < 0.0 || t >= self.shape[k] as f64 {
                return None;
            }
            ijk[k] = t as usize;
        }
        Some(self.index(ijk))
    }

    /// Neighbor one step forward along `axis`, if inside the lattice.
    #[inline]
    pub fn forward(&self, i: usize, axis: usize) -> Option<usize> {
        let c = self.coords(i);
        if c[axis] + 1 < self.shape[axis] {
            Some(i + self.strides()[axis])
        } else {
            None
        }
    }

    #[inline]
    pub fn backward(&self, i: usize, axis: usize) -> Option<usize> {
        let c = self.coords(i);
        if c[axis] > 0 {
            Some(i - self.strides()[axis])
        } else {
            None
        }
    }

    /// Inclusive index range per axis of cells whose centers may lie in the
    /// given box (expanded by `pad` lengths).
    pub(crate) fn index_range(&self, lo: &Point, hi: &Point, pad: f64) -> [(usize, usize); 3] {
        let mut out = [(0usize, 0usize); 3];
        for k in 0..self.dim {
            let a = ((lo[k] - pad - self.origin[k]) / self.spacing - 0.5).floor().max(0.0);
            let b = ((hi[k] + pad - self.origin[k]) / self.spacing - 0.5).ceil();
            let b = b.min(self.shape[k] as f64 - 1.0);
            if b < a {
                out[k] = (1, 0);
            } else {
                out[k] = (a as usize, b as usize);
            }
        }
        out
    }

    /// Visit every cell whose index lies within `range`.
    pub(crate) fn for_each_in(&self, range: [(usize, usize); 3], mut f: impl FnMut(usize)) {
        if range.iter().take(self.dim).any(|&(a, b)| a > b) {
            return;
        }
        let (z0, z1) = if self.dim == 3 { range[2] } else { (0, 0) };
        for z in z0..=z1 {
            for y in range[1].0..=range[1].1 {
                for x in range[0].0..=range[0].1 {
                    f(self.index([x, y, z]));
                }
            }
        }
    }

    /// Sub-lattice of cells whose centers lie within sup-distance `half`
    /// of `center`, aligned with this lattice. Returns the window and the
    /// parent index of each window cell.
    pub fn window(&self, center: &Point, half: f64) -> Result<(Lattice, Vec<usize>)> {
        let mut lo = [0usize; 3];
        let mut shape = [1usize; 3];
        for k in 0..self.dim {
            let a = ((center[k] - half - self.origin[k]) / self.spacing - 0.5).floor();
            let b = ((center[k] + half - self.origin[k]) / self.spacing - 0.5).ceil();
            if a < 0.0 || b > self.shape[k] as f64 - 1.0 {
                return Err(Error::WindowOutOfBounds);
            }
            lo[k] = a as usize;
            shape[k] = (b - a) as usize + 1;
        }
        let mut origin = self.origin;
        for k in 0..self.dim {
            origin[k] += lo[k] as f64 * self.spacing;
        }
        let win = Lattice::new(self.dim, self.spacing, origin, shape);
        let mut map = Vec::with_capacity(win.len());
        for i in 0..win.len() {
            let c = win.coords(i);
            map.push(self.index([c[0] + lo[0], c[1] + lo[1], c[2] + lo[2]]));
        }
        Ok((win, map))
    }
}

/// A finite union of grid cells bound to one lattice.
#[derive(Clone, Debug)]
pub struct SetMask {
    lattice_id: u64,
    member: Vec<bool>,
    cells: Vec<usize>,
}

impl SetMask {
    pub fn from_bits(lattice: &Lattice, member: Vec<bool>) -> Self {
        assert_eq!(member.len(), lattice.len(), "mask length must match lattice");
        let cells = member.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        SetMask { lattice_id: lattice.id(), member, cells }
    }

    pub fn from_cells(lattice: &Lattice, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut member = vec![false; lattice.len()];
        for c in cells {
            member[c] = true;
        }
        SetMask::from_bits(lattice, member)
    }

    pub fn from_predicate(lattice: &Lattice, mut f: impl FnMut(usize) -> bool) -> Self {
        let member = (0..lattice.len()).map(&mut f).collect();
        SetMask::from_bits(lattice, member)
    }

    pub fn empty(lattice: &Lattice) -> Self {
        SetMask::from_bits(lattice, vec![false; lattice.len()])
    }

    pub fn lattice_id(&self) -> u64 {
        self.lattice_id
    }

    pub fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if self.lattice_id != lattice.id() {
            return Err(Error::GridMismatch { mask: self.lattice_id, grid: lattice.id() });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn bits(&self) -> &[bool] {
        &self.member
    }

    pub fn is_subset(&self, other: &SetMask) -> bool {
        self.cells.iter().all(|&c| other.member[c])
    }

    fn combine(&self, other: &SetMask, f: impl Fn(bool, bool) -> bool) -> SetMask {
        assert_eq!(self.lattice_id, other.lattice_id, "masks belong to different lattices");
        let member: Vec<bool> = self.member.iter().zip(&other.member).map(|(&a, &b)| f(a, b)).collect();
        let cells = member.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        SetMask { lattice_id: self.lattice_id, member, cells }
    }

    pub fn union(&self, other: &SetMask) -> SetMask {
        self.combine(other, |a, b| a || b)
    }
    pub fn intersection(&self, other: &SetMask) -> SetMask {
        self.combine(other, |a, b| a && b)
    }
    pub fn difference(&self, other: &SetMask) -> SetMask {
        self.combine(other, |a, b| a && !b)
    }
    pub fn complement(&self) -> SetMask {
        let member: Vec<bool> = self.member.iter().map(|&b| !b).collect();
        let cells = member.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        SetMask { lattice_id: self.lattice_id, member, cells }
    }

    /// Cells of the mask with a face neighbor outside it.
    pub fn inner_boundary(&self, lattice: &Lattice) -> SetMask {
        let comp = self.complement();
        self.boundary_against(lattice, &comp)
    }

    /// Cells of the mask with a face neighbor in `other`.
    pub fn boundary_against(&self, lattice: &Lattice, other: &SetMask) -> SetMask {
        let cells: Vec<usize> = self
            .cells
            .iter()
            .copied()
            .filter(|&c| {
                (0..lattice.dim()).any(|a| {
                    lattice.forward(c, a).is_some_and(|n| other.contains(n))
                        || lattice.backward(c, a).is_some_and(|n| other.contains(n))
                })
            })
            .collect();
        SetMask::from_cells(lattice, cells)
    }

    /// Pull a parent-lattice mask back onto a window built by
    /// [`Lattice::window`].
    pub fn restrict(&self, window: &Lattice, map: &[usize]) -> SetMask {
        SetMask::from_predicate(window, |i| self.member[map[i]])
    }

    pub fn centers(&self, lattice: &Lattice) -> Vec<Point> {
        self.cells.iter().map(|&c| lattice.center(c)).collect()
    }

    /// Total measure `|cells| * h^Q`.
    pub fn measure(&self, lattice: &Lattice) -> f64 {
        self.len() as f64 * lattice.cell_measure()
    }
}

/// A discretized domain `Ω` with its complement-distance field.
#[derive(Clone, Debug)]
pub struct MetricGrid {
    params: SpaceParams,
    lattice: Lattice,
    domain: SetMask,
    dist: Vec<f64>,
}

impl MetricGrid {
    /// Rasterize `region` as the domain `Ω` and compute the exact Euclidean
    /// distance from every cell center to the nearest complement center.
    pub fn build(region: &Region, params: SpaceParams) -> Result<Self> {
        params.validate()?;
        let lattice = Lattice::from_params(&params);
        let domain = region.rasterize(&lattice)?;
        MetricGrid::from_mask(params, lattice, domain)
    }

    pub fn from_mask(params: SpaceParams, lattice: Lattice, domain: SetMask) -> Result<Self> {
        domain.check_lattice(&lattice)?;
        if domain.is_empty() {
            return Err(Error::DegenerateDomain);
        }
        if domain.len() == lattice.len() {
            return Err(Error::ComplementRequired);
        }
        let sites: Vec<bool> = domain.bits().iter().map(|&b| !b).collect();
        let dist = edt::euclidean_distance(&lattice, &sites);
        Ok(MetricGrid { params, lattice, domain, dist })
    }

    pub fn params(&self) -> &SpaceParams {
        &self.params
    }
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    pub fn dim(&self) -> usize {
        self.params.dim
    }
    pub fn spacing(&self) -> f64 {
        self.params.spacing
    }
    pub fn domain(&self) -> &SetMask {
        &self.domain
    }
    pub fn complement(&self) -> SetMask {
        self.domain.complement()
    }

    /// Complement cells adjacent to the domain: the grid trace of `∂Ω`.
    pub fn boundary_trace(&self) -> SetMask {
        self.complement().boundary_against(&self.lattice, &self.domain)
    }

    /// Distance from each cell center to the nearest center outside `Ω`.
    pub fn dist_field(&self) -> &[f64] {
        &self.dist
    }

    /// Write `<stem>.hdr` (text), `<stem>.domain.u8` and `<stem>.dist.f64`
    /// (little-endian) into `dir`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let shape = self.lattice.shape();
        let bbox = self.params.bbox;
        let mut hdr = std::fs::File::create(dir.join(format!("{stem}.hdr")))?;
        writeln!(hdr, "dim {}", self.params.dim)?;
        writeln!(hdr, "shape {} {} {}", shape[0], shape[1], shape[2])?;
        writeln!(hdr, "spacing {}", self.params.spacing)?;
        writeln!(hdr, "bbox_lo {} {} {}", bbox.lo[0], bbox.lo[1], bbox.lo[2])?;
        writeln!(hdr, "bbox_hi {} {} {}", bbox.hi[0], bbox.hi[1], bbox.hi[2])?;
        writeln!(hdr, "regularity {}", self.params.regularity)?;
        writeln!(hdr, "order x-fastest")?;
        let bytes: Vec<u8> = self.domain.bits().iter().map(|&b| b as u8).collect();
        std::fs::write(dir.join(format!("{stem}.domain.u8")), bytes)?;
        crate::report::write_f64_le(&dir.join(format!("{stem}.dist.f64")), &self.dist)?;
        Ok(())
    }
}

/// Cells whose centers satisfy `|c - center| < r`.
pub fn ball_mask(lattice: &Lattice, center: &Point, r: f64) -> Result<SetMask> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let mask = shell_mask(lattice, center, 0.0, r);
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(mask)
}

/// The annulus `B(center, outer) \ B(center, inner)` on cell centers.
pub fn annulus_mask(lattice: &Lattice, center: &Point, inner: f64, outer: f64) -> Result<SetMask> {
    if !(inner > 0.0) || !(inner < outer) {
        return Err(Error::InvalidParameter(format!("annulus needs 0 < r < R, got r = {inner}, R = {outer}")));
    }
    let mask = shell_mask(lattice, center, inner, outer);
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(mask)
}

fn shell_mask(lattice: &Lattice, center: &Point, inner: f64, outer: f64) -> SetMask {
    let mut member = vec![false; lattice.len()];
    let mut lo = *center;
    let mut hi = *center;
    for k in 0..lattice.dim() {
        lo[k] -= outer;
        hi[k] += outer;
    }
    let range = lattice.index_range(&lo, &hi, lattice.spacing());
    lattice.for_each_in(range, |i| {
        let d = distance(&lattice.center(i), center);
        if d < outer && d >= inner {
            member[i] = true;
        }
    });
    SetMask::from_bits(lattice, member)
}
