use crate::error::{domain, Error, Result};

/// Largest number of cells summed over all levels a replica may hold.
pub const CELL_BUDGET: u64 = 100_000_000;

/// Cells of half-width t tiling [-1, 1]^nu, indexed row-major with the
/// first coordinate varying fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    nu: u32,
    t: f64,
    per_axis: u64,
}

impl Lattice {
    /// Requires 1/t to be an integer.
    pub fn new(nu: u32, t: f64) -> Result<Self> {
        let m = (1.0 / t).round();
        if !(m >= 1.0 && (m * t - 1.0).abs() <= 1e-9) {
            return Err(domain(format!("1/t = {} is not an integer cell count", 1.0 / t)));
        }
        if m > 2f64.powi(40) {
            return Err(Error::Budget(format!("{m} cells per axis")));
        }
        Ok(Lattice { nu, t, per_axis: m as u64 })
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn half_width(&self) -> f64 {
        self.t
    }

    pub fn per_axis(&self) -> u64 {
        self.per_axis
    }

    /// J = (1/t)^nu, or None on overflow.
    pub fn checked_len(&self) -> Option<u64> {
        self.per_axis.checked_pow(self.nu)
    }

    pub fn len(&self) -> usize {
        self.checked_len().expect("lattice size overflows") as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self, mut index: usize) -> Vec<u64> {
        let m = self.per_axis as usize;
        (0..self.nu)
            .map(|_| {
                let c = index % m;
                index /= m;
                c as u64
            })
            .collect()
    }

    pub fn index(&self, coords: &[u64]) -> usize {
        coords.iter().rev().fold(0usize, |acc, &c| acc * self.per_axis as usize + c as usize)
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        self.coords(index).iter().map(|&k| -1.0 + (2 * k + 1) as f64 * self.t).collect()
    }

    /// Index of the coarser cell containing this one.
    pub fn parent_index(&self, index: usize, parent: &Lattice) -> usize {
        let ratio = (self.per_axis / parent.per_axis) as usize;
        let m = self.per_axis as usize;
        let pm = parent.per_axis as usize;
        let (mut rest, mut out, mut stride) = (index, 0usize, 1usize);
        for _ in 0..self.nu {
            out += (rest % m) / ratio * stride;
            rest /= m;
            stride *= pm;
        }
        out
    }

    /// Whether every cell of this lattice sits inside exactly one parent cell.
    pub fn refines(&self, parent: &Lattice) -> bool {
        self.nu == parent.nu && self.per_axis % parent.per_axis == 0
    }
}

/// Lattices for every level of a schedule, checked against the cell budget.
pub fn lattices(nu: u32, schedule: &super::ScaleSchedule) -> Result<Vec<Lattice>> {
    let mut total: u64 = 0;
    let mut out = Vec::with_capacity(schedule.depth() + 1);
    for (n, &t) in schedule.values().iter().enumerate() {
        let lattice = Lattice::new(nu, t)?;
        let cells = lattice.checked_len().unwrap_or(u64::MAX);
        total = total.saturating_add(cells);
        if total > CELL_BUDGET {
            return Err(Error::Budget(format!(
                "level {n} brings the lattice to {} cells, beyond {CELL_BUDGET}; use a geometric schedule or a smaller depth",
                if cells == u64::MAX { "more than 2^64".to_string() } else { total.to_string() }
            )));
        }
        if let Some(prev) = out.last() {
            if !lattice.refines(prev) {
                return Err(domain(format!("level {n} cells do not refine level {} cells", n - 1)));
            }
        }
        out.push(lattice);
    }
    Ok(out)
}
