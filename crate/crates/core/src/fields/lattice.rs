use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square lattice of `cells` x `cells` cells of side `side / cells`, with
/// the lower-left corner at `offset`. Values live at cell centres; cell
/// (i, j) has index i * cells + j and centre offset + ((i + 1/2) h, (j + 1/2) h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub cells: usize,
    pub side: f64,
    #[serde(default)]
    pub offset: [f64; 2],
}

impl LatticeSpec {
    pub fn new(cells: usize, side: f64) -> Self {
        LatticeSpec { cells, side, offset: [0.0, 0.0] }
    }

    pub fn with_offset(mut self, offset: [f64; 2]) -> Self {
        self.offset = offset;
        self
    }

    /// Lattice covering the interior square [margin, 1 - margin]^2.
    pub fn interior(cells: usize, margin: f64) -> Self {
        LatticeSpec { cells, side: 1.0 - 2.0 * margin, offset: [margin, margin] }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.cells < 8 {
            out.push(format!("lattice needs at least 8 cells per side, got {}", self.cells));
        }
        if !(self.side > 0.0 && self.side.is_finite()) {
            out.push(format!("lattice side must be positive, got {}", self.side));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.cells as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn len(&self) -> usize {
        self.cells * self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.cells + j
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.cells, index % self.cells)
    }

    pub fn centre(&self, index: usize) -> [f64; 2] {
        let (i, j) = self.coords(index);
        let h = self.spacing();
        [self.offset[0] + (i as f64 + 0.5) * h, self.offset[1] + (j as f64 + 0.5) * h]
    }

    pub fn centres(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|k| self.centre(k)).collect()
    }

    /// Whether every cell centre lies in [margin, 1 - margin]^2.
    pub fn inside_unit_square(&self, margin: f64) -> bool {
        let h = self.spacing();
        let lo = self.offset[0].min(self.offset[1]) + 0.5 * h;
        let hi = self.offset[0].max(self.offset[1]) + self.side - 0.5 * h;
        lo >= margin - 1e-12 && hi <= 1.0 - margin + 1e-12
    }
}
