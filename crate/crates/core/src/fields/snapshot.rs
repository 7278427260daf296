//! Flat binary and CSV export of multiscale fields.
//!
//! Binary layout (little endian): magic `LCFS`, format version (u32),
//! cells per side N (u32), side length L (f64), n_max (u32), seed (u64),
//! then n_max grids of N*N f64 increments in row-major order.

use std::io::{Read, Write};

use super::{LatticeSpec, MultiscaleField};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"LCFS";
pub const VERSION: u32 = 1;

pub fn write_binary<W: Write>(field: &MultiscaleField, mut out: W) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(field.lattice.cells as u32).to_le_bytes())?;
    out.write_all(&field.lattice.side.to_le_bytes())?;
    out.write_all(&(field.n_max() as u32).to_le_bytes())?;
    out.write_all(&field.seed.to_le_bytes())?;
    for inc in &field.increments {
        for v in inc {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Decoded snapshot: header fields and increments.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub cells: usize,
    pub side: f64,
    pub seed: u64,
    pub increments: Vec<Vec<f64>>,
}

fn read_array<const K: usize, R: Read>(input: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Snapshot> {
    if read_array::<4, _>(&mut input)? != MAGIC {
        return Err(Error::Domain("not a field snapshot (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != VERSION {
        return Err(Error::Domain(format!("unsupported snapshot version {version}")));
    }
    let cells = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let side = f64::from_le_bytes(read_array(&mut input)?);
    let n_max = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let mut increments = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let mut grid = Vec::with_capacity(cells * cells);
        for _ in 0..cells * cells {
            grid.push(f64::from_le_bytes(read_array(&mut input)?));
        }
        increments.push(grid);
    }
    Ok(Snapshot { cells, side, seed, increments })
}

/// CSV rows (scale, i, j, x, y, increment, field) for small lattices.
pub fn csv_rows(field: &MultiscaleField) -> Vec<Vec<String>> {
    let lattice: &LatticeSpec = &field.lattice;
    let mut rows = Vec::with_capacity(field.n_max() * lattice.len());
    field.for_each_scale(|n, x| {
        for (c, value) in x.iter().enumerate() {
            let (i, j) = lattice.coords(c);
            let p = lattice.centre(c);
            rows.push(vec![
                n.to_string(),
                i.to_string(),
                j.to_string(),
                format!("{:e}", p[0]),
                format!("{:e}", p[1]),
                format!("{:.17e}", field.increments[n - 1][c]),
                format!("{:.17e}", value),
            ]);
        }
    });
    rows
}

pub const CSV_COLUMNS: [&str; 7] = ["scale", "i", "j", "x", "y", "increment", "field"];
