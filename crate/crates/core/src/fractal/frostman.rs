use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::AvgPoint;
use crate::error::{domain, Error, Result};
use crate::rng::KeyedRng;
use crate::sampler::{ExactSampler, FieldReplica, Lattice, PointPathSampler, ScaleSchedule};
use crate::stats::{frequency, mean, normal_cdf, Estimate};
use crate::steep::{steep_target, Integrator};
use crate::testfn::TestFunction;

use super::energy::CellKernel;

/// Concentric-average paths at the level-n cells, on a radius grid that
/// contains the schedule values t_0, ..., t_n.
#[derive(Debug, Clone)]
pub struct CellPaths {
    pub nu: u32,
    pub grid: Vec<f64>,
    /// marks[k]: position of t_k in `grid`.
    pub marks: Vec<usize>,
    pub lattice: Lattice,
    /// paths[j][i]: average at radius grid[i] around the center of cell j.
    pub paths: Vec<Vec<f64>>,
    /// False when the paths are lineages through parent cells rather than
    /// concentric averages.
    pub concentric: bool,
}

impl CellPaths {
    /// Lineages through the parents of each level-n cell. Parent centers differ
    /// from the child's, so these only approximate concentric paths.
    pub fn from_replica(replica: &FieldReplica, n: usize) -> Result<Self> {
        if n == 0 || n > replica.depth() {
            return Err(domain(format!("level {n} outside 1..={}", replica.depth())));
        }
        let lats = replica.lattices()?;
        let paths = (0..lats[n].len()).map(|j| replica.lineage(&lats, n, j)).collect();
        Ok(CellPaths {
            nu: replica.nu,
            grid: replica.schedule.values()[..=n].to_vec(),
            marks: (0..=n).collect(),
            lattice: lats[n],
            paths,
            concentric: false,
        })
    }

    pub fn level(&self) -> usize {
        self.marks.len() - 1
    }
}

/// Schedule values t_0..t_n with `substeps` geometric radii per interval.
fn refine(schedule: &ScaleSchedule, n: usize, substeps: usize) -> (Vec<f64>, Vec<usize>) {
    let mut grid = vec![schedule.t(0)];
    let mut marks = vec![0];
    for k in 1..=n {
        let (hi, lo) = (schedule.t(k - 1), schedule.t(k));
        for i in 1..substeps {
            grid.push(hi * (lo / hi).powf(i as f64 / substeps as f64));
        }
        grid.push(lo);
        marks.push(grid.len() - 1);
    }
    (grid, marks)
}

/// Exact joint draw of the concentric paths at every level-n cell center.
#[derive(Debug, Clone)]
pub struct ConcentricSampler {
    nu: u32,
    grid: Vec<f64>,
    marks: Vec<usize>,
    lattice: Lattice,
    inner: ExactSampler,
}

impl ConcentricSampler {
    pub fn new(nu: u32, schedule: &ScaleSchedule, n: usize, substeps: usize) -> Result<Self> {
        if n == 0 || n > schedule.depth() {
            return Err(domain(format!("level {n} outside 1..={}", schedule.depth())));
        }
        if substeps == 0 {
            return Err(domain("substeps must be at least 1"));
        }
        let lattice = Lattice::new(nu, schedule.t(n))?;
        let (grid, marks) = refine(schedule, n, substeps);
        let total = lattice.len().saturating_mul(grid.len());
        if total > crate::sampler::EXACT_MAX_POINTS {
            return Err(Error::Budget(format!(
                "{} cells x {} radii exceed the exact backend limit of {}",
                lattice.len(),
                grid.len(),
                crate::sampler::EXACT_MAX_POINTS
            )));
        }
        let mut points = Vec::with_capacity(total);
        for j in 0..lattice.len() {
            let x = lattice.center(j);
            points.extend(grid.iter().map(|&t| AvgPoint { x: x.clone(), t }));
        }
        let inner = ExactSampler::new(nu, points)?;
        Ok(ConcentricSampler { nu, grid, marks, lattice, inner })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    pub fn sample(&self, seed: u64) -> CellPaths {
        let flat = self.inner.sample(&KeyedRng::new(seed), 0);
        let paths = flat.chunks(self.grid.len()).map(|c| c.to_vec()).collect();
        CellPaths {
            nu: self.nu,
            grid: self.grid.clone(),
            marks: self.marks.clone(),
            lattice: self.lattice,
            paths,
            concentric: true,
        }
    }
}

/// Phi_n: at every level k <= n the path stays in the tube
/// |X_s - X_{t_{k-1}} - sqrt(2 nu)(Sigma_s - Sigma_{t_{k-1}})| <= sqrt(Delta Sigma_k)
/// at every grid radius s in [t_k, t_{k-1}].
fn survives(x: &[f64], sigma: &[f64], marks: &[usize], target: f64) -> bool {
    marks.windows(2).all(|m| {
        let (a, b) = (m[0], m[1]);
        let width = (sigma[b] - sigma[a]).max(0.0).sqrt();
        (a..=b).all(|i| (x[i] - x[a] - target * (sigma[i] - sigma[a])).abs() <= width)
    })
}

/// How the survival probability W(Phi_n) in the weights is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiWeight {
    /// p^n exp(-nu Sigma_{t_n}), the geometric mean of the two-sided bound,
    /// with p the Brownian confinement probability.
    Sandwich { p: f64 },
    /// Exact probability when the tube is only checked at schedule radii.
    Endpoint,
    /// A value supplied by the caller, typically a Monte Carlo estimate.
    Value { w: f64 },
}

impl PhiWeight {
    fn resolve(self, nu: u32, sigma: &[f64], marks: &[usize]) -> Result<f64> {
        let n = marks.len() - 1;
        let w = match self {
            PhiWeight::Sandwich { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(domain(format!("confinement probability {p} outside (0, 1)")));
                }
                p.powi(n as i32) * (-(nu as f64) * sigma[marks[n]]).exp()
            }
            PhiWeight::Endpoint => {
                if marks.windows(2).any(|m| m[1] != m[0] + 1) {
                    return Err(domain("endpoint probability needs a grid without sub-steps"));
                }
                let target = steep_target(nu);
                marks
                    .windows(2)
                    .map(|m| {
                        let shift = target * (sigma[m[1]] - sigma[m[0]]).max(0.0).sqrt();
                        normal_cdf(1.0 - shift) - normal_cdf(-1.0 - shift)
                    })
                    .product()
            }
            PhiWeight::Value { w } => w,
        };
        if !(w > 0.0 && w <= 1.0) {
            return Err(domain(format!("survival probability {w} outside (0, 1]")));
        }
        Ok(w)
    }
}

/// Monte Carlo estimate of W(Phi_n) from independent concentric paths.
pub fn phi_probability_mc(
    f: &TestFunction,
    grid: &[f64],
    marks: &[usize],
    paths: u64,
    seed: u64,
) -> Result<Estimate> {
    if paths == 0 {
        return Err(domain("no paths requested"));
    }
    let sampler = PointPathSampler::new(f.nu(), grid)?;
    let integ = Integrator::new(f, grid)?;
    let target = steep_target(f.nu());
    let rng = KeyedRng::new(seed);
    let hits: u64 = (0..paths)
        .into_par_iter()
        .map(|i| {
            let theta = sampler.sample(&rng, i);
            survives(&integ.x_values(&theta), integ.sigma(), marks, target) as u64
        })
        .sum();
    Ok(frequency(hits, paths))
}

/// The discrete measure with mass 1 / (J_n W(Phi_n)) on every surviving cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanMeasure {
    pub level: usize,
    pub t: f64,
    pub cells: usize,
    pub phi_probability: f64,
    /// Indices of the surviving level-n cells.
    pub survivors: Vec<usize>,
    /// Mass of each surviving cell.
    pub cell_weight: f64,
    pub total_mass: f64,
    pub alpha: f64,
    /// Riesz alpha-energy with the cell-averaged kernel.
    pub energy: f64,
    /// No cell survived; the measure is zero.
    pub empty: bool,
}

impl FrostmanMeasure {
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.cells];
        for &j in &self.survivors {
            w[j] = self.cell_weight;
        }
        w
    }
}

pub fn frostman_measure(paths: &CellPaths, f: &TestFunction, alpha: f64, phi: PhiWeight) -> Result<FrostmanMeasure> {
    if f.nu() != paths.nu {
        return Err(Error::Incompatible(format!("test function for nu = {} on a nu = {} field", f.nu(), paths.nu)));
    }
    let integ = Integrator::new(f, &paths.grid)?;
    let w = phi.resolve(paths.nu, integ.sigma(), &paths.marks)?;
    let target = steep_target(paths.nu);
    let survivors: Vec<usize> = paths
        .paths
        .par_iter()
        .enumerate()
        .filter(|(_, theta)| survives(&integ.x_values(theta), integ.sigma(), &paths.marks, target))
        .map(|(j, _)| j)
        .collect();
    let cells = paths.lattice.len();
    let cell_weight = 1.0 / (cells as f64 * w);
    let total_mass = cell_weight * survivors.len() as f64;
    let energy = cell_energy(&paths.lattice, &survivors, cell_weight, alpha)?;
    Ok(FrostmanMeasure {
        level: paths.level(),
        t: paths.lattice.half_width(),
        cells,
        phi_probability: w,
        empty: survivors.is_empty(),
        survivors,
        cell_weight,
        total_mass,
        alpha,
        energy,
    })
}

/// sum over cell pairs of m^2 (2t)^-alpha E|o + U - V|^-alpha for equal masses m.
pub fn cell_energy(lattice: &Lattice, cells: &[usize], mass: f64, alpha: f64) -> Result<f64> {
    let mut kernel = CellKernel::new(lattice.nu(), alpha)?;
    if cells.is_empty() {
        return Ok(0.0);
    }
    let coords: Vec<Vec<i64>> = cells.iter().map(|&j| lattice.coords(j).iter().map(|&c| c as i64).collect()).collect();
    // distinct offsets first, then a cheap parallel sum over pairs
    let nu = lattice.nu() as usize;
    let m = lattice.per_axis() as usize;
    let table_len = m.checked_pow(nu as u32).filter(|&l| l <= 1 << 26).ok_or_else(|| {
        Error::Budget(format!("energy offset table for {m}^{nu} cells is too large"))
    })?;
    let mut table = vec![f64::NAN; table_len];
    let key = |a: &[i64], b: &[i64]| -> usize {
        let mut idx = 0usize;
        for i in (0..nu).rev() {
            idx = idx * m + (a[i] - b[i]).unsigned_abs() as usize;
        }
        idx
    };
    let mut offset = vec![0i64; nu];
    for a in &coords {
        for b in &coords {
            let k = key(a, b);
            if table[k].is_nan() {
                for i in 0..nu {
                    offset[i] = a[i] - b[i];
                }
                table[k] = kernel.unit(&offset);
            }
        }
    }
    let sum: f64 = coords
        .par_iter()
        .map(|a| coords.iter().map(|b| table[key(a, b)]).sum::<f64>())
        .sum();
    Ok(mass * mass * (2.0 * lattice.half_width()).powf(-alpha) * sum)
}

/// Moments of the total mass and energy over replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanSummary {
    pub replicas: usize,
    pub mass: Estimate,
    pub second_moment: Estimate,
    pub energy: Estimate,
    pub empty_fraction: f64,
}

impl FrostmanSummary {
    pub fn new(measures: &[FrostmanMeasure]) -> Result<Self> {
        if measures.len() < 2 {
            return Err(Error::InsufficientData("moments need at least 2 replicas".into()));
        }
        let mass: Vec<f64> = measures.iter().map(|m| m.total_mass).collect();
        let sq: Vec<f64> = mass.iter().map(|m| m * m).collect();
        let energy: Vec<f64> = measures.iter().map(|m| m.energy).collect();
        let empty = measures.iter().filter(|m| m.empty).count();
        Ok(FrostmanSummary {
            replicas: measures.len(),
            mass: mean(&mass),
            second_moment: mean(&sq),
            energy: mean(&energy),
            empty_fraction: empty as f64 / measures.len() as f64,
        })
    }
}
