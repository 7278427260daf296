//! Multiscale samplers for the cut-off families.
//!
//! A sampler is built once per (spec, lattice, scales) and then draws any
//! number of replicas; each replica's randomness is keyed by
//! (seed, replica, scale, block) so draws are reproducible and
//! order-independent.

mod gram;
mod lattice;
mod sine;
pub mod snapshot;
mod spectral;

use std::sync::Arc;

pub use gram::{
    eigen_range, psd_within, sample_exact, sample_integral_family, ClipReport, ExactSampler, GramSampler,
    MAX_EXACT_POINTS, MAX_GRAM_POINTS, PSD_TOLERANCE,
};
pub use lattice::LatticeSpec;
pub use sine::{sample_gff_sine, SineSampler};
pub use spectral::{sample_spectral, SpectralSampler};

use crate::kernels::Family;

/// Per-cell variance of a field at one scale.
#[derive(Debug, Clone, PartialEq)]
pub enum CellVariance {
    Uniform(f64),
    PerCell(Vec<f64>),
}

impl CellVariance {
    pub fn at(&self, cell: usize) -> f64 {
        match self {
            CellVariance::Uniform(v) => *v,
            CellVariance::PerCell(v) => v[cell],
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            CellVariance::Uniform(v) => *v,
            CellVariance::PerCell(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Exact variance data shared by every replica of one sampler.
#[derive(Debug, Clone)]
pub struct VarianceTable {
    /// Var X_n per scale n = 1..=n_max.
    pub cumulative: Vec<CellVariance>,
    /// Var Y_k computed directly from increment weights.
    pub increments: Vec<CellVariance>,
}

/// Jointly sampled field at nested scales, stored as increments Y_k with
/// X_n = Y_1 + ... + Y_n.
#[derive(Debug, Clone)]
pub struct MultiscaleField {
    pub lattice: LatticeSpec,
    pub family: Family,
    pub scales: Vec<f64>,
    pub increments: Vec<Vec<f64>>,
    pub variance: Arc<VarianceTable>,
    pub seed: u64,
    pub replica: u64,
}

impl MultiscaleField {
    pub fn n_max(&self) -> usize {
        self.scales.len()
    }

    pub fn cells(&self) -> usize {
        self.lattice.len()
    }

    /// X_n as a prefix sum of increments; n = 0 gives the zero field.
    pub fn field(&self, n: usize) -> Vec<f64> {
        assert!(n <= self.n_max(), "scale {n} beyond n_max {}", self.n_max());
        let mut out = vec![0.0; self.cells()];
        for inc in &self.increments[..n] {
            for (o, y) in out.iter_mut().zip(inc) {
                *o += y;
            }
        }
        out
    }

    /// Calls `f(n, X_n)` for n = 1..=n_max with a running prefix sum.
    pub fn for_each_scale<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let mut acc = vec![0.0; self.cells()];
        for (k, inc) in self.increments.iter().enumerate() {
            for (o, y) in acc.iter_mut().zip(inc) {
                *o += y;
            }
            f(k + 1, &acc);
        }
    }

    /// Exact Var X_n at a cell, from generator weights.
    pub fn variance_at(&self, n: usize, cell: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.variance.cumulative[n - 1].at(cell)
        }
    }

    pub fn increment_variance_at(&self, k: usize, cell: usize) -> f64 {
        self.variance.increments[k - 1].at(cell)
    }

    pub fn has_independent_increments(&self) -> bool {
        self.family.has_independent_increments()
    }
}

/// Common interface of the samplers, including exact second moments from
/// the generator weights.
pub trait FieldGenerator: Sync {
    fn lattice(&self) -> &LatticeSpec;
    fn scales(&self) -> &[f64];
    fn family(&self) -> Family;
    fn variance_table(&self) -> &Arc<VarianceTable>;

    fn sample(&self, seed: u64, replica: u64) -> MultiscaleField;

    /// Cov(X_{n1}(cell i), X_{n2}(cell j)) from the weights.
    fn covariance(&self, n1: usize, i: usize, n2: usize, j: usize) -> f64;

    /// Var(X_{n1}(cell i) - X_{n2}(cell i)) summed directly over the weights
    /// of the difference.
    fn difference_variance(&self, n1: usize, n2: usize, i: usize) -> f64;

    fn n_max(&self) -> usize {
        self.scales().len()
    }

    /// Row-major cells x cells matrix of Cov(X_n(i), X_n(j)).
    fn covariance_matrix(&self, n: usize) -> Vec<f64> {
        let cells = self.lattice().len();
        let mut out = vec![0.0; cells * cells];
        for i in 0..cells {
            for j in i..cells {
                let c = self.covariance(n, i, n, j);
                out[i * cells + j] = c;
                out[j * cells + i] = c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests;
