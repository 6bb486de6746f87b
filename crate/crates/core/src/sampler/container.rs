//! Replica files.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! 0      8 bytes   magic "STEEPFLD"
//! 8      u32       format version (1)
//! 12     u32       header length H
//! 16     H bytes   UTF-8 JSON {"nu", "schedule", "backend", "seed"}
//! 16+H   u32       level count L
//! then L times:    u64 cell count J_n, followed by J_n f64 values
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{lattices, Backend, FieldReplica, ScaleSchedule};

pub const MAGIC: &[u8; 8] = b"STEEPFLD";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    nu: u32,
    schedule: ScaleSchedule,
    backend: Backend,
    seed: u64,
}

pub fn write_replica(replica: &FieldReplica, out: &mut impl Write) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        nu: replica.nu,
        schedule: replica.schedule.clone(),
        backend: replica.backend,
        seed: replica.seed,
    })?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    out.write_all(&(replica.levels.len() as u32).to_le_bytes())?;
    for level in &replica.levels {
        out.write_all(&(level.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(level.len() * 8);
        for v in level {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    input.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated replica file: {e}")))?;
    Ok(b)
}

pub fn read_replica(input: &mut impl Read) -> Result<FieldReplica> {
    if &read_array::<8>(input)? != MAGIC {
        return Err(Error::Format("not a replica file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(input)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported replica format version {version}")));
    }
    let len = u32::from_le_bytes(read_array(input)?) as usize;
    let mut header = vec![0u8; len];
    input.read_exact(&mut header).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    let header: Header = serde_json::from_slice(&header)?;
    let lats = lattices(header.nu, &header.schedule)?;
    let count = u32::from_le_bytes(read_array(input)?) as usize;
    if count != lats.len() {
        return Err(Error::Format(format!("{count} levels stored, schedule has {}", lats.len())));
    }
    let mut levels = Vec::with_capacity(count);
    for (n, lat) in lats.iter().enumerate() {
        let cells = u64::from_le_bytes(read_array(input)?) as usize;
        if cells != lat.len() {
            return Err(Error::Format(format!("level {n} stores {cells} cells, lattice has {}", lat.len())));
        }
        let mut raw = vec![0u8; cells * 8];
        input.read_exact(&mut raw).map_err(|e| Error::Format(format!("truncated level {n}: {e}")))?;
        levels.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
    }
    Ok(FieldReplica { nu: header.nu, schedule: header.schedule, backend: header.backend, seed: header.seed, levels })
}

/// Rows (level, cell, t, x_1..x_nu, value).
pub fn write_replica_csv(replica: &FieldReplica, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["level".to_string(), "cell".into(), "t".into()];
    head.extend((1..=replica.nu).map(|i| format!("x{i}")));
    head.push("value".into());
    w.write_record(&head).map_err(csv_err)?;
    for (n, lat) in replica.lattices()?.iter().enumerate() {
        for (j, v) in replica.levels[n].iter().enumerate() {
            let mut row = vec![n.to_string(), j.to_string(), lat.half_width().to_string()];
            row.extend(lat.center(j).iter().map(|c| c.to_string()));
            row.push(v.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
