//! Field replicas: exact point paths, exact small lattices and the
//! approximate hierarchical multi-scale lattice.

mod container;
mod lattice;
mod schedule;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{AvgPoint, Kernel};
use crate::error::{domain, Error, Result};
use crate::rng::{self, domain as stream, KeyedRng};
use crate::specfun::Green;

pub(crate) use container::csv_err;
pub use container::{read_replica, write_replica, write_replica_csv, MAGIC};
pub use lattice::{lattices, Lattice, CELL_BUDGET};
pub use schedule::{ScaleSchedule, ScheduleSpec, PAPER_MAX_DEPTH};

/// Largest joint draw the exact backend accepts.
pub const EXACT_MAX_POINTS: usize = 4096;

/// Largest diagonal jitter, relative to the largest variance.
pub const MAX_JITTER: f64 = 1e-9;

const DISTANCE_GRID: f64 = (1u64 << 36) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    /// Parent value plus an independent increment; drops the O(1) corrections
    /// to cross-cell covariance.
    Hierarchical,
}

impl Backend {
    pub fn label(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Hierarchical => "hierarchical (approximate)",
        }
    }
}

/// Sphere averages at every lattice cell of every schedule level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldReplica {
    pub nu: u32,
    pub schedule: ScaleSchedule,
    pub backend: Backend,
    pub seed: u64,
    /// levels[n][j] is the average over the sphere of radius t_n at cell j.
    pub levels: Vec<Vec<f64>>,
}

impl FieldReplica {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn lattice(&self, n: usize) -> Result<Lattice> {
        Lattice::new(self.nu, self.schedule.t(n))
    }

    pub fn lattices(&self) -> Result<Vec<Lattice>> {
        lattices(self.nu, &self.schedule)
    }

    /// Field values along the ancestry of cell j at level n, from level 0 down.
    pub fn lineage(&self, lattices: &[Lattice], n: usize, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        let mut idx = j;
        for k in (0..=n).rev() {
            out[k] = self.levels[k][idx];
            if k > 0 {
                idx = lattices[k].parent_index(idx, &lattices[k - 1]);
            }
        }
        out
    }
}

/// Seed of the r-th replica in a batch.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    let mut rng = KeyedRng::new(seed).stream(u64::MAX, replica);
    rand::RngCore::next_u64(&mut rng)
}

fn check_decreasing(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(domain("empty time grid"));
    }
    if let Some(&t) = grid.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(domain(format!("time {t} outside (0, 1]")));
    }
    for (k, w) in grid.windows(2).enumerate() {
        if !(w[1] < w[0]) {
            return Err(domain(format!("time grid not decreasing at index {}", k + 1)));
        }
    }
    Ok(())
}

/// Exact sampler for the concentric averages at one point: independent
/// Gaussian increments with variances G(s_k) - G(s_{k-1}).
#[derive(Debug, Clone)]
pub struct PointPathSampler {
    grid: Vec<f64>,
    sd: Vec<f64>,
}

impl PointPathSampler {
    pub fn new(nu: u32, grid: &[f64]) -> Result<Self> {
        check_decreasing(grid)?;
        let green = Green::get(nu)?;
        let g: Vec<f64> = grid.iter().map(|&t| green.value(t)).collect();
        let sd = std::iter::once(g[0].sqrt())
            .chain(g.windows(2).map(|w| (w[1] - w[0]).max(0.0).sqrt()))
            .collect();
        Ok(PointPathSampler { grid: grid.to_vec(), sd })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sample(&self, rng: &KeyedRng, path: u64) -> Vec<f64> {
        let mut s = rng.stream(stream::POINT_PATH, path);
        let z = rng::normals(&mut s, self.sd.len());
        let mut acc = 0.0;
        self.sd.iter().zip(z).map(|(sd, z)| {
            acc += sd * z;
            acc
        }).collect()
    }
}

/// theta-bar at one point on a decreasing grid of radii.
pub fn sample_point_path(nu: u32, grid: &[f64], seed: u64) -> Result<Vec<f64>> {
    Ok(PointPathSampler::new(nu, grid)?.sample(&KeyedRng::new(seed), 0))
}

/// Cholesky factor of the joint covariance of a set of sphere averages.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    points: Vec<AvgPoint>,
    gram: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl ExactSampler {
    pub fn new(nu: u32, points: Vec<AvgPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(domain("no points to sample"));
        }
        if points.len() > EXACT_MAX_POINTS {
            return Err(Error::Budget(format!(
                "{} points exceed the exact backend limit of {EXACT_MAX_POINTS}",
                points.len()
            )));
        }
        let kernel = Kernel::new(nu)?;
        for p in &points {
            if p.nu() != nu {
                return Err(domain(format!("point of dimension {} in a dimension {nu} draw", p.nu())));
            }
            p.validate()?;
        }
        // lattices repeat the same (radius, radius, distance) triple many times;
        // distances are snapped to a 2^-36 grid so equal offsets share one entry
        let n = points.len();
        let key = |i: usize, j: usize| {
            let (a, b) = (points[i].t.to_bits(), points[j].t.to_bits());
            let d = (points[i].distance(&points[j]) * DISTANCE_GRID).round() as u64;
            (a.min(b), a.max(b), d)
        };
        let mut keys: Vec<(u64, u64, u64)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| key(i, j)).collect();
        keys.sort_unstable();
        keys.dedup();
        let values: Vec<f64> = keys
            .par_iter()
            .map(|&(a, b, d)| kernel.cov_radii(f64::from_bits(a), f64::from_bits(b), d as f64 / DISTANCE_GRID).value)
            .collect();
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = values[keys.binary_search(&key(i, j)).expect("key collected above")];
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let (factor, jitter) = factor_with_jitter(&gram)?;
        Ok(ExactSampler { points, gram, factor, jitter })
    }

    pub fn points(&self) -> &[AvgPoint] {
        &self.points
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Relative diagonal jitter that made the factorisation succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample(&self, rng: &KeyedRng, replica: u64) -> Vec<f64> {
        let mut s = rng.stream(stream::EXACT, replica);
        let z = DVector::from_vec(rng::normals(&mut s, self.points.len()));
        (&self.factor * z).iter().copied().collect()
    }
}

/// Lower Cholesky factor, adding diagonal jitter up to MAX_JITTER times the
/// largest variance. Returns the factor and the relative jitter used.
pub fn factor_with_jitter(gram: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = gram.nrows();
    let scale = gram.diagonal().max().abs().max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    loop {
        let mut m = gram.clone();
        for i in 0..n {
            m[(i, i)] += jitter * scale;
        }
        if let Some(ch) = m.cholesky() {
            return Ok((ch.l(), jitter));
        }
        jitter = if jitter == 0.0 { 1e-15 } else { jitter * 10.0 };
        if jitter > MAX_JITTER * (1.0 + 1e-9) {
            let worst = gram.clone().symmetric_eigenvalues().min();
            return Err(Error::Indefinite { worst });
        }
    }
}

/// One joint draw of the given sphere averages.
pub fn sample_lattice_exact(nu: u32, points: Vec<AvgPoint>, seed: u64) -> Result<Vec<f64>> {
    Ok(ExactSampler::new(nu, points)?.sample(&KeyedRng::new(seed), 0))
}

/// Every (level, cell) of a schedule as sphere averages, level by level.
pub fn lattice_points(nu: u32, schedule: &ScaleSchedule) -> Result<Vec<AvgPoint>> {
    let lats = lattices(nu, schedule)?;
    let mut points = Vec::new();
    for lat in &lats {
        for j in 0..lat.len() {
            points.push(AvgPoint { x: lat.center(j), t: lat.half_width() });
            if points.len() > EXACT_MAX_POINTS {
                return Err(Error::Budget(format!(
                    "schedule has more than {EXACT_MAX_POINTS} cells; use the hierarchical backend"
                )));
            }
        }
    }
    Ok(points)
}

/// Exact joint draw of a small multi-level lattice, reusable across replicas.
#[derive(Debug, Clone)]
pub struct ExactLatticeSampler {
    nu: u32,
    schedule: ScaleSchedule,
    sizes: Vec<usize>,
    inner: ExactSampler,
}

impl ExactLatticeSampler {
    pub fn new(nu: u32, schedule: &ScaleSchedule) -> Result<Self> {
        let sizes = lattices(nu, schedule)?.iter().map(|l| l.len()).collect();
        let inner = ExactSampler::new(nu, lattice_points(nu, schedule)?)?;
        Ok(ExactLatticeSampler { nu, schedule: schedule.clone(), sizes, inner })
    }

    pub fn sampler(&self) -> &ExactSampler {
        &self.inner
    }

    pub fn sample(&self, seed: u64) -> FieldReplica {
        let flat = self.inner.sample(&KeyedRng::new(seed), 0);
        let mut levels = Vec::with_capacity(self.sizes.len());
        let mut at = 0;
        for &len in &self.sizes {
            levels.push(flat[at..at + len].to_vec());
            at += len;
        }
        FieldReplica { nu: self.nu, schedule: self.schedule.clone(), backend: Backend::Exact, seed, levels }
    }
}

pub fn sample_replica_exact(nu: u32, schedule: &ScaleSchedule, seed: u64) -> Result<FieldReplica> {
    Ok(ExactLatticeSampler::new(nu, schedule)?.sample(seed))
}

const CHUNK: usize = 4096;

/// Level-n value = parent value + N(0, G(t_n) - G(t_{n-1})); the root is N(0, G(1)).
pub fn sample_lattice_hierarchical(nu: u32, schedule: &ScaleSchedule, seed: u64) -> Result<FieldReplica> {
    let green = Green::get(nu)?;
    let lats = lattices(nu, schedule)?;
    let rng = KeyedRng::new(seed);
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(lats.len());
    for (n, lat) in lats.iter().enumerate() {
        let len = lat.len();
        let mut values = vec![0.0; len];
        let t = schedule.t(n);
        let sd = if n == 0 {
            green.value(t).sqrt()
        } else {
            (green.value(t) - green.value(schedule.t(n - 1))).max(0.0).sqrt()
        };
        let parent = levels.last().map(|p| (p.as_slice(), lats[n - 1]));
        values.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let start = c * CHUNK;
            rng.fill_cell_normals(n as u64, start as u64, chunk);
            for (k, v) in chunk.iter_mut().enumerate() {
                *v *= sd;
                if let Some((pv, pl)) = parent {
                    *v += pv[lat.parent_index(start + k, &pl)];
                }
            }
        });
        levels.push(values);
    }
    Ok(FieldReplica { nu, schedule: schedule.clone(), backend: Backend::Hierarchical, seed, levels })
}
