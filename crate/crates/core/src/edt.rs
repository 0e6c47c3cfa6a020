//! Exact Euclidean distance transform on a lattice (separable lower
//! envelope of parabolas, one pass per axis).

use crate::grid::Lattice;

/// Distance from each cell center to the nearest center with `sites[i]`
/// set. Cells far from every site get `f64::INFINITY` when there are no
/// sites at all.
pub fn euclidean_distance(lattice: &Lattice, sites: &[bool]) -> Vec<f64> {
    assert_eq!(sites.len(), lattice.len());
    let mut d2: Vec<f64> = sites.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let shape = lattice.shape();
    let strides = lattice.strides();
    let mut line = Vec::new();
    let mut out = Vec::new();
    for axis in 0..lattice.dim() {
        let n = shape[axis];
        let step = strides[axis];
        for start in 0..lattice.len() {
            if lattice.coords(start)[axis] != 0 {
                continue;
            }
            line.clear();
            line.extend((0..n).map(|k| d2[start + k * step]));
            transform_line(&line, &mut out);
            for (k, v) in out.iter().enumerate() {
                d2[start + k * step] = *v;
            }
        }
    }
    let h = lattice.spacing();
    d2.into_iter().map(|v| v.sqrt() * h).collect()
}

/// `out[q] = min_k (q - k)^2 + f[k]` over the finite entries of `f`.
fn transform_line(f: &[f64], out: &mut Vec<f64>) {
    let n = f.len();
    out.clear();
    out.resize(n, f64::INFINITY);
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let fp = f[p] + (p * p) as f64;
                    let s = (fq - fp) / (2.0 * (q as f64 - p as f64));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *o = dq * dq + f[p];
    }
}
