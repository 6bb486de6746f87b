//! Volume-averaged Riesz kernel between lattice cells.
//!
//! For cells of side w whose integer offset is o, the averaged kernel is
//! w^-alpha E|o + U - V|^-alpha with U, V uniform in the unit cube. The
//! difference D = U - V has density prod(1 - |d_i|) on [-1, 1]^nu, so the
//! expectation is a weighted integral over that box. Splitting every axis at 0
//! gives unit sub-boxes; the singular point d = -o is then either a vertex of a
//! sub-box (handled by a Duffy transform) or at distance >= 1 from it.

use std::collections::HashMap;

use crate::error::{domain, Result};
use crate::quad::GaussLegendre;

const NEAR_NODES: usize = 24;
const MID_NODES: usize = 12;
const FAR_NODES: usize = 4;

/// E|o + U - V|^-alpha for integer offsets o, cached by |o| sorted.
#[derive(Debug)]
pub struct CellKernel {
    nu: usize,
    alpha: f64,
    cache: HashMap<Vec<u64>, f64>,
}

impl CellKernel {
    pub fn new(nu: u32, alpha: f64) -> Result<Self> {
        let nu = nu as usize;
        if !(alpha >= 0.0 && alpha < nu as f64) {
            return Err(domain(format!("energy exponent {alpha} outside [0, {nu})")));
        }
        Ok(CellKernel { nu, alpha, cache: HashMap::new() })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Unit-width kernel at an integer offset.
    pub fn unit(&mut self, offset: &[i64]) -> f64 {
        let mut key: Vec<u64> = offset.iter().map(|o| o.unsigned_abs()).collect();
        key.sort_unstable();
        if let Some(&v) = self.cache.get(&key) {
            return v;
        }
        let v = if self.alpha == 0.0 { 1.0 } else { averaged(self.nu, self.alpha, &key) };
        self.cache.insert(key, v);
        v
    }
}

fn averaged(nu: usize, alpha: f64, offset: &[u64]) -> f64 {
    let o: Vec<f64> = offset.iter().map(|&v| v as f64).collect();
    let reach = offset.iter().copied().max().unwrap_or(0);
    let nodes = match reach {
        0 | 1 => NEAR_NODES,
        2 | 3 => MID_NODES,
        _ => FAR_NODES,
    };
    let rule = GaussLegendre::new(nodes);
    let (x, w) = rule.rule();
    let mut total = 0.0;
    // sub-box selected by sign pattern: axis i covers [-1, 0] or [0, 1]
    for signs in 0..(1usize << nu) {
        let lo: Vec<f64> = (0..nu).map(|i| if signs >> i & 1 == 1 { 0.0 } else { -1.0 }).collect();
        let singular = (0..nu).all(|i| -o[i] == lo[i] || -o[i] == lo[i] + 1.0);
        total += if singular {
            duffy_box(nu, alpha, &o, &lo, x, w)
        } else {
            plain_box(nu, alpha, &o, &lo, x, w)
        };
    }
    total
}

fn weight(d: &[f64]) -> f64 {
    d.iter().map(|v| 1.0 - v.abs()).product()
}

fn norm_pow(o: &[f64], d: &[f64], alpha: f64) -> f64 {
    let r2: f64 = o.iter().zip(d).map(|(a, b)| (a + b) * (a + b)).sum();
    r2.powf(-alpha / 2.0)
}

/// Tensor Gauss-Legendre over the unit box at `lo`.
fn plain_box(nu: usize, alpha: f64, o: &[f64], lo: &[f64], x: &[f64], w: &[f64]) -> f64 {
    let k = x.len();
    let mut idx = vec![0usize; nu];
    let mut d = vec![0.0; nu];
    let mut total = 0.0;
    loop {
        let mut wt = 1.0;
        for i in 0..nu {
            d[i] = lo[i] + 0.5 * (x[idx[i]] + 1.0);
            wt *= 0.5 * w[idx[i]];
        }
        total += wt * weight(&d) * norm_pow(o, &d, alpha);
        if !advance(&mut idx, k) {
            return total;
        }
    }
}

/// Unit box with the singularity at one vertex: split into nu pyramids by the
/// dominant axis, y_k = s, y_i = s u_i, then s = w^(1/beta) with beta = nu - alpha
/// so that s^(nu-1-alpha) ds becomes dw / beta.
fn duffy_box(nu: usize, alpha: f64, o: &[f64], lo: &[f64], x: &[f64], w: &[f64]) -> f64 {
    let beta = nu as f64 - alpha;
    // local coordinates y in [0, 1]^nu measured from the singular vertex, inward
    let corner: Vec<f64> = (0..nu).map(|i| -o[i]).collect();
    let inward: Vec<f64> = (0..nu).map(|i| if corner[i] == lo[i] { 1.0 } else { -1.0 }).collect();
    let k = x.len();
    let mut total = 0.0;
    let mut d = vec![0.0; nu];
    for axis in 0..nu {
        let mut idx = vec![0usize; nu];
        loop {
            // idx[axis] drives w, the others drive u
            let mut wt = 1.0;
            let wv = 0.5 * (x[idx[axis]] + 1.0);
            wt *= 0.5 * w[idx[axis]];
            let s = wv.powf(1.0 / beta);
            let mut u2 = 1.0;
            for i in 0..nu {
                let y = if i == axis {
                    s
                } else {
                    let u = 0.5 * (x[idx[i]] + 1.0);
                    wt *= 0.5 * w[idx[i]];
                    u2 += u * u;
                    s * u
                };
                d[i] = corner[i] + inward[i] * y;
            }
            total += wt / beta * u2.powf(-alpha / 2.0) * weight(&d);
            if !advance(&mut idx, k) {
                break;
            }
        }
    }
    total
}

fn advance(idx: &mut [usize], k: usize) -> bool {
    for v in idx.iter_mut() {
        *v += 1;
        if *v < k {
            return true;
        }
        *v = 0;
    }
    false
}
