//! Discrete p-Dirichlet energy on a lattice and the weighted graph
//! Laplacians built from it.
//!
//! A grid function `u` has, at every cell `c`, the squared forward
//! difference norm `s_c = Σ_a (u(c + e_a) - u(c))^2`, and its energy is
//! `h^{Q-p} Σ_c s_c^{p/2}`, i.e. `Σ |∇u|^p h^Q` with `|∇u| = sqrt(s_c) / h`.
//! Values outside the lattice are zero. Cells just below the lower faces of
//! the lattice contribute their single forward difference as well, so the
//! lattice frame acts as a symmetric zero boundary.
//!
//! Only cells that can carry a nonzero value get a storage slot: free cells
//! come first, then cells pinned to a nonzero value, then one shared slot
//! that always holds zero.

use crate::grid::Lattice;

#[derive(Clone, Copy, Debug)]
struct Entry {
    me: u32,
    fwd: [u32; 3],
}

#[derive(Clone, Debug)]
pub struct EnergyOperator {
    dim: usize,
    spacing: f64,
    n_free: usize,
    cells: Vec<usize>,
    entries: Vec<Entry>,
}

impl EnergyOperator {
    /// `free[i]` marks unknowns; `pinned` lists cells held at a nonzero
    /// value. Every other cell is held at zero.
    pub fn new(lattice: &Lattice, free: &[bool], pinned: &[usize]) -> Self {
        let n = lattice.len();
        assert_eq!(free.len(), n);
        let mut slot = vec![u32::MAX; n];
        let mut cells = Vec::new();
        for (i, &f) in free.iter().enumerate() {
            if f {
                slot[i] = cells.len() as u32;
                cells.push(i);
            }
        }
        let n_free = cells.len();
        for &i in pinned {
            if slot[i] == u32::MAX {
                slot[i] = cells.len() as u32;
                cells.push(i);
            }
        }
        let zero = cells.len() as u32;
        let dim = lattice.dim();
        let get = |i: Option<usize>| i.map_or(zero, |j| if slot[j] == u32::MAX { zero } else { slot[j] });

        let mut entries = Vec::new();
        let mut seen = vec![false; n];
        let mut add = |c: usize, entries: &mut Vec<Entry>| {
            if seen[c] {
                return;
            }
            seen[c] = true;
            let mut fwd = [zero; 3];
            for (a, f) in fwd.iter_mut().enumerate().take(dim) {
                *f = get(lattice.forward(c, a));
            }
            let me = get(Some(c));
            if me != zero || fwd[..dim].iter().any(|&f| f != zero) {
                entries.push(Entry { me, fwd });
            }
        };
        for &c in &cells {
            add(c, &mut entries);
            for a in 0..dim {
                if let Some(b) = lattice.backward(c, a) {
                    add(b, &mut entries);
                }
            }
        }
        for &c in &cells {
            let co = lattice.coords(c);
            for a in 0..dim {
                if co[a] == 0 {
                    let mut fwd = [zero; 3];
                    fwd[a] = slot[c];
                    entries.push(Entry { me: zero, fwd });
                }
            }
        }
        // memory order keeps the scatter loops cache friendly
        entries.sort_by_key(|e| if e.me != zero { e.me } else { e.fwd.iter().copied().min().unwrap() });
        EnergyOperator { dim, spacing: lattice.spacing(), n_free, cells, entries }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Number of storage slots including the trailing zero slot.
    pub fn n_slots(&self) -> usize {
        self.cells.len() + 1
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `h^{Q-p}`.
    pub fn scale(&self, p: f64) -> f64 {
        self.spacing.powf(self.dim as f64 - p)
    }

    /// Gather a lattice-indexed field into slot order.
    pub fn gather(&self, field: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = self.cells.iter().map(|&c| field[c]).collect();
        u.push(0.0);
        u
    }

    /// Scatter slot values into a zeroed lattice-indexed field.
    pub fn scatter(&self, u: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (k, &c) in self.cells.iter().enumerate() {
            out[c] = u[k];
        }
        out
    }

    pub fn energy(&self, u: &[f64], p: f64) -> f64 {
        let raw = match self.dim {
            2 => self.raw_energy::<2>(u, p),
            _ => self.raw_energy::<3>(u, p),
        };
        raw * self.scale(p)
    }

    fn raw_energy<const D: usize>(&self, u: &[f64], p: f64) -> f64 {
        let mut sum = 0.0;
        if p == 2.0 {
            for e in &self.entries {
                sum += sq::<D>(e, u);
            }
        } else {
            let half = 0.5 * p;
            for e in &self.entries {
                let s = sq::<D>(e, u);
                if s > 0.0 {
                    sum += s.powf(half);
                }
            }
        }
        sum
    }

    /// Per-entry weights `(s + delta2)^{(p-2)/2}`. With `delta2 = 0`,
    /// entries with `s = 0` get weight 0; these are exactly the weights of
    /// the energy gradient.
    pub fn weights(&self, u: &[f64], p: f64, delta2: f64) -> Vec<f64> {
        match self.dim {
            2 => self.weights_k::<2>(u, p, delta2),
            _ => self.weights_k::<3>(u, p, delta2),
        }
    }

    fn weights_k<const D: usize>(&self, u: &[f64], p: f64, delta2: f64) -> Vec<f64> {
        let ex = 0.5 * (p - 2.0);
        self.entries
            .iter()
            .map(|e| {
                let s = sq::<D>(e, u) + delta2;
                if p == 2.0 {
                    1.0
                } else if s > 0.0 {
                    s.powf(ex)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Largest `s` over entries.
    pub fn max_sq(&self, u: &[f64]) -> f64 {
        let f = |e: &Entry| match self.dim {
            2 => sq::<2>(e, u),
            _ => sq::<3>(e, u),
        };
        self.entries.iter().map(f).fold(0.0, f64::max)
    }

    /// `y = A_w x` over all slots, where `A_w = Σ_e w_e Σ_a (δ_f - δ_m)(δ_f - δ_m)^T`.
    /// The zero slot of `y` is scratch.
    pub fn apply(&self, w: &[f64], x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        match self.dim {
            2 => self.apply_k::<2>(w, x, y),
            _ => self.apply_k::<3>(w, x, y),
        }
    }

    fn apply_k<const D: usize>(&self, w: &[f64], x: &[f64], y: &mut [f64]) {
        for (e, &we) in self.entries.iter().zip(w) {
            if we == 0.0 {
                continue;
            }
            let m = e.me as usize;
            let um = x[m];
            let mut acc = 0.0;
            for a in 0..D {
                let f = e.fwd[a] as usize;
                let t = we * (x[f] - um);
                y[f] += t;
                acc += t;
            }
            y[m] -= acc;
        }
    }

    pub fn diagonal(&self, w: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.n_slots()];
        for (e, &we) in self.entries.iter().zip(w) {
            d[e.me as usize] += self.dim as f64 * we;
            for a in 0..self.dim {
                d[e.fwd[a] as usize] += we;
            }
        }
        d
    }

    /// Energy gradient with respect to every slot.
    pub fn gradient(&self, u: &[f64], p: f64, out: &mut [f64]) {
        let w = self.weights(u, p, 0.0);
        self.apply(&w, u, out);
        let c = p * self.scale(p);
        out.iter_mut().for_each(|v| *v *= c);
    }
}

#[inline(always)]
fn sq<const D: usize>(e: &Entry, u: &[f64]) -> f64 {
    let um = u[e.me as usize];
    let mut s = 0.0;
    for a in 0..D {
        let d = u[e.fwd[a] as usize] - um;
        s += d * d;
    }
    s
}

#[derive(Clone, Copy, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final residual norm over the reference norm.
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for `(A_w x)_free = rhs` with
/// the non-free slots of `x` held fixed. `reference` scales the residual
/// for the stopping test. `on_iter(k, x, step)` runs after every update.
#[allow(clippy::too_many_arguments)]
pub fn pcg(
    op: &EnergyOperator,
    w: &[f64],
    x: &mut [f64],
    rhs: Option<&[f64]>,
    reference: f64,
    tol: f64,
    max_iters: usize,
    mut on_iter: impl FnMut(usize, &[f64], f64),
) -> CgOutcome {
    let nf = op.n_free();
    let ns = op.n_slots();
    let diag = op.diagonal(w);
    let inv: Vec<f64> = diag[..nf].iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut ax = vec![0.0; ns];
    op.apply(w, x, &mut ax);
    let mut r: Vec<f64> = (0..nf).map(|k| rhs.map_or(0.0, |b| b[k]) - ax[k]).collect();
    let reference = if reference > 0.0 { reference } else { 1.0 };
    let mut rnorm = norm(&r);
    if nf == 0 || rnorm <= tol * reference {
        return CgOutcome { iterations: 0, relative_residual: rnorm / reference };
    }
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut dir = vec![0.0; ns];
    dir[..nf].copy_from_slice(&z);
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; ns];
    let mut k = 0;
    while k < max_iters {
        op.apply(w, &dir, &mut q);
        let dq = dot(&dir[..nf], &q[..nf]);
        if !(dq > 0.0) {
            break;
        }
        let alpha = rz / dq;
        for i in 0..nf {
            x[i] += alpha * dir[i];
            r[i] -= alpha * q[i];
        }
        k += 1;
        on_iter(k, x, alpha);
        rnorm = norm(&r);
        if rnorm <= tol * reference {
            break;
        }
        for i in 0..nf {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..nf {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    CgOutcome { iterations: k, relative_residual: rnorm / reference }
}

/// Damped Jacobi sweeps on `(A_w x)_free = 0`. With damping at most 1 each
/// sweep lowers the quadratic energy.
pub fn jacobi_sweeps(op: &EnergyOperator, w: &[f64], x: &mut [f64], sweeps: usize, damping: f64, mut on_iter: impl FnMut(usize, &[f64])) {
    let nf = op.n_free();
    let diag = op.diagonal(w);
    let mut ax = vec![0.0; op.n_slots()];
    for k in 0..sweeps {
        op.apply(w, x, &mut ax);
        for i in 0..nf {
            if diag[i] > 0.0 {
                x[i] -= damping * ax[i] / diag[i];
            }
        }
        on_iter(k + 1, x);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceParams;
    use rand::{Rng, SeedableRng};

    fn setup(dim: usize) -> (Lattice, EnergyOperator) {
        let mut params = SpaceParams::planar(0.25, 1.0);
        params.dim = dim;
        params.bbox = crate::grid::BBox::centered(dim, 1.0);
        let lat = Lattice::from_params(&params);
        let free: Vec<bool> = (0..lat.len()).map(|i| i % 3 != 0).collect();
        let pinned: Vec<usize> = (0..lat.len()).filter(|i| i % 6 == 0).collect();
        let op = EnergyOperator::new(&lat, &free, &pinned);
        (lat, op)
    }

    /// Energy straight from the definition on the full lattice.
    fn brute_energy(lat: &Lattice, field: &[f64], p: f64) -> f64 {
        let h = lat.spacing();
        let dim = lat.dim();
        let shape = lat.shape();
        let val = |c: [i64; 3]| -> f64 {
            for k in 0..3 {
                if c[k] < 0 || c[k] >= shape[k] as i64 {
                    return 0.0;
                }
            }
            field[lat.index([c[0] as usize, c[1] as usize, c[2] as usize])]
        };
        let mut sum = 0.0;
        let lo = |k: usize| if k < dim { -1 } else { 0 };
        for z in lo(2)..shape[2] as i64 {
            for y in lo(1)..shape[1] as i64 {
                for x in lo(0)..shape[0] as i64 {
                    let c = [x, y, z];
                    let mut s = 0.0;
                    for a in 0..dim {
                        let mut f = c;
                        f[a] += 1;
                        s += (val(f) - val(c)).powi(2);
                    }
                    sum += s.powf(p / 2.0);
                }
            }
        }
        sum * h.powf(dim as f64 - p)
    }

    #[test]
    fn energy_matches_definition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for dim in [2, 3] {
            let (lat, op) = setup(dim);
            let mut field = vec![0.0; lat.len()];
            for &c in op.cells() {
                field[c] = rng.gen_range(-1.0..1.0);
            }
            let u = op.gather(&field);
            for p in [1.5, 2.0, 3.0] {
                let a = op.energy(&u, p);
                let b = brute_energy(&lat, &field, p);
                assert!((a - b).abs() <= 1e-12 * b.max(1.0), "dim {dim} p {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (_, op) = setup(2);
        let mut u: Vec<f64> = (0..op.n_slots()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        *u.last_mut().unwrap() = 0.0;
        for p in [1.5, 2.0, 3.0] {
            let mut g = vec![0.0; op.n_slots()];
            op.gradient(&u, p, &mut g);
            for k in (0..op.n_free()).step_by(7) {
                let eps = 1e-6;
                let mut a = u.clone();
                a[k] += eps;
                let mut b = u.clone();
                b[k] -= eps;
                let fd = (op.energy(&a, p) - op.energy(&b, p)) / (2.0 * eps);
                assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()), "p {p} slot {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn quadratic_form_is_twice_energy_scale() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (_, op) = setup(3);
        let mut u: Vec<f64> = (0..op.n_slots()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        *u.last_mut().unwrap() = 0.0;
        let w = vec![1.0; op.entries.len()];
        let mut y = vec![0.0; op.n_slots()];
        op.apply(&w, &u, &mut y);
        let quad = dot(&u[..op.n_slots() - 1], &y[..op.n_slots() - 1]);
        assert!((quad * op.scale(2.0) - op.energy(&u, 2.0)).abs() < 1e-10);
        let d = op.diagonal(&w);
        let mut e = vec![0.0; op.n_slots()];
        e[5] = 1.0;
        op.apply(&w, &e, &mut y);
        assert!((y[5] - d[5]).abs() < 1e-12);
    }
}
