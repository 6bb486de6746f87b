use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{lattices, ScaleSchedule};

use super::Criterion;

/// Flags over the lattice cells of every schedule level.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMask {
    pub criterion: Criterion,
    pub nu: u32,
    pub schedule: ScaleSchedule,
    /// Seed of the replica the mask was detected on.
    pub seed: u64,
    pub levels: Vec<Vec<bool>>,
}

/// Runs of flagged cells at one level, as [start, length] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRuns {
    pub level: usize,
    pub t: f64,
    pub cells: usize,
    pub runs: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct MaskFile {
    criterion: Criterion,
    nu: u32,
    schedule: ScaleSchedule,
    seed: u64,
    levels: Vec<LevelRuns>,
}

impl SetMask {
    pub fn count(&self, level: usize) -> usize {
        self.levels[level].iter().filter(|&&b| b).count()
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..self.levels.len()).map(|n| self.count(n)).collect()
    }

    /// Whether every flagged cell here is also flagged in `other`.
    pub fn is_subset_of(&self, other: &SetMask) -> bool {
        self.levels.len() == other.levels.len()
            && self.levels.iter().zip(&other.levels).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| !x || y)
            })
    }

    pub fn runs(&self) -> Vec<LevelRuns> {
        self.levels
            .iter()
            .enumerate()
            .map(|(n, flags)| {
                let mut runs = Vec::new();
                let mut j = 0;
                while j < flags.len() {
                    if flags[j] {
                        let start = j;
                        while j < flags.len() && flags[j] {
                            j += 1;
                        }
                        runs.push([start, j - start]);
                    } else {
                        j += 1;
                    }
                }
                LevelRuns { level: n, t: self.schedule.t(n), cells: flags.len(), runs }
            })
            .collect()
    }

    pub fn to_rle_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MaskFile {
            criterion: self.criterion.clone(),
            nu: self.nu,
            schedule: self.schedule.clone(),
            seed: self.seed,
            levels: self.runs(),
        })?)
    }

    pub fn from_rle_json(text: &str) -> Result<Self> {
        let file: MaskFile = serde_json::from_str(text)?;
        let lats = lattices(file.nu, &file.schedule)?;
        if file.levels.len() != lats.len() {
            return Err(Error::Format(format!("{} mask levels for {} schedule levels", file.levels.len(), lats.len())));
        }
        let mut levels = Vec::with_capacity(lats.len());
        for (lr, lat) in file.levels.iter().zip(&lats) {
            if lr.cells != lat.len() {
                return Err(Error::Format(format!("level {} has {} cells, lattice has {}", lr.level, lr.cells, lat.len())));
            }
            let mut flags = vec![false; lr.cells];
            for &[start, len] in &lr.runs {
                let end = start.checked_add(len).filter(|&e| e <= lr.cells);
                let end = end.ok_or_else(|| Error::Format(format!("run [{start}, {len}] out of range")))?;
                flags[start..end].iter_mut().for_each(|b| *b = true);
            }
            levels.push(flags);
        }
        Ok(SetMask { criterion: file.criterion, nu: file.nu, schedule: file.schedule, seed: file.seed, levels })
    }

    /// Rows (level, cell, flag) for every cell.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "cell", "flag"]).map_err(|e| Error::Format(e.to_string()))?;
        for (n, flags) in self.levels.iter().enumerate() {
            for (j, &b) in flags.iter().enumerate() {
                w.write_record([n.to_string(), j.to_string(), u8::from(b).to_string()])
                    .map_err(|e| Error::Format(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
