use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{CellVariance, FieldGenerator, LatticeSpec, MultiscaleField, VarianceTable};
use crate::error::{Error, Result};
use crate::kernels::heat::{eigenvalue, gff_modes_required, gff_truncation_bound};
use crate::kernels::Family;
use crate::rng::{fill_normals, StreamKey};

/// Largest admissible truncation error relative to -log of the finest scale.
const TAIL_SHARE: f64 = 0.01;

/// Dirichlet GFF with semigroup cut-off, synthesized in the sine basis.
///
/// The coefficient of mode (j, k) at scale eps is
/// sqrt(2 pi) * int_eps^inf exp(-lambda s / 2) dB_jk(s), so the slice
/// between consecutive scales carries an independent normal with variance
/// (exp(-lambda eps_k) - exp(-lambda eps_{k-1})) / lambda.
pub struct SineSampler {
    lattice: LatticeSpec,
    scales: Vec<f64>,
    modes: usize,
    /// sin(pi j x_i), cells-by-modes.
    sines: DMatrix<f64>,
    /// Per-slice standard deviations, modes-by-modes.
    slice_std: Vec<DMatrix<f64>>,
    table: Arc<VarianceTable>,
}

fn slice_variance(lambda: f64, fine: f64, coarse: f64) -> f64 {
    let c = if coarse.is_finite() { (-lambda * coarse).exp() } else { 0.0 };
    ((-lambda * fine).exp() - c) / lambda
}

impl SineSampler {
    pub fn new(lattice: LatticeSpec, scales: Vec<f64>, modes: usize, margin: f64) -> Result<Self> {
        lattice.validate()?;
        if !(margin > 0.0 && margin < 0.5) {
            return Err(Error::Config(format!("margin must lie in (0, 1/2), got {margin}")));
        }
        if !lattice.inside_unit_square(margin) {
            return Err(Error::Domain(format!("lattice leaves the interior square at margin {margin}")));
        }
        if scales.is_empty() || scales.iter().any(|&e| !(e > 0.0 && e < 1.0)) || scales.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Domain("scales must lie in (0, 1) and strictly decrease".into()));
        }
        let finest = *scales.last().expect("nonempty");
        let allowed = TAIL_SHARE * -finest.ln();
        if gff_truncation_bound(finest, modes) > allowed {
            return Err(Error::Modes { requested: modes, required: gff_modes_required(finest, allowed) });
        }
        let cells = lattice.cells;
        let h = lattice.spacing();
        let sines = DMatrix::from_fn(cells, modes, |i, j| {
            (PI * (j + 1) as f64 * (lattice.offset[0] + (i as f64 + 0.5) * h)).sin()
        });
        if (lattice.offset[0] - lattice.offset[1]).abs() > 1e-15 {
            return Err(Error::Domain("sine sampler needs a lattice with equal offsets".into()));
        }
        let mut slice_std = Vec::with_capacity(scales.len());
        for k in 0..scales.len() {
            let coarse = if k == 0 { f64::INFINITY } else { scales[k - 1] };
            slice_std.push(DMatrix::from_fn(modes, modes, |j, l| {
                slice_variance(eigenvalue(j + 1, l + 1), scales[k], coarse).sqrt()
            }));
        }
        let squares = sines.map(|s| s * s);
        let norm = 8.0 * PI;
        let to_cells = |w: &DMatrix<f64>| -> CellVariance {
            let v = &squares * w * squares.transpose() * norm;
            CellVariance::PerCell(grid_to_vec(&v))
        };
        let mut increments = Vec::with_capacity(scales.len());
        let mut cumulative = Vec::with_capacity(scales.len());
        for k in 0..scales.len() {
            let inc = slice_std[k].map(|s| s * s);
            increments.push(to_cells(&inc));
            let cum = DMatrix::from_fn(modes, modes, |j, l| {
                let lambda = eigenvalue(j + 1, l + 1);
                (-lambda * scales[k]).exp() / lambda
            });
            cumulative.push(to_cells(&cum));
        }
        Ok(SineSampler {
            lattice,
            scales,
            modes,
            sines,
            slice_std,
            table: Arc::new(VarianceTable { cumulative, increments }),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Sum over modes of w(j, k) phi_jk(x_a) phi_jk(x_b), times 2 pi.
    fn mode_sum<W: Fn(f64) -> f64>(&self, a: usize, b: usize, weight: W) -> f64 {
        let (ia, ja) = self.lattice.coords(a);
        let (ib, jb) = self.lattice.coords(b);
        let mut total = 0.0;
        for j in 0..self.modes {
            let sx = self.sines[(ia, j)] * self.sines[(ib, j)];
            let mut row = 0.0;
            for l in 0..self.modes {
                row += weight(eigenvalue(j + 1, l + 1)) * self.sines[(ja, l)] * self.sines[(jb, l)];
            }
            total += sx * row;
        }
        8.0 * PI * total
    }

    fn cumulative_weight(&self, n: usize, lambda: f64) -> f64 {
        if n == 0 {
            0.0
        } else {
            (-lambda * self.scales[n - 1]).exp() / lambda
        }
    }
}

/// Row-major cells from a cells-by-cells matrix indexed (i, j).
fn grid_to_vec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl FieldGenerator for SineSampler {
    fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn family(&self) -> Family {
        Family::GffSemigroup
    }

    fn variance_table(&self) -> &Arc<VarianceTable> {
        &self.table
    }

    fn sample(&self, seed: u64, replica: u64) -> MultiscaleField {
        let m = self.modes;
        let scale = 2.0 * (2.0 * PI).sqrt();
        let mut normals = vec![0.0; m * m];
        let increments = self
            .slice_std
            .iter()
            .enumerate()
            .map(|(k, std)| {
                fill_normals(StreamKey::new(seed, replica, (k + 1) as u32, 0), &mut normals);
                let coeff = DMatrix::from_fn(m, m, |j, l| std[(j, l)] * normals[j * m + l] * scale);
                let grid = &self.sines * coeff * self.sines.transpose();
                grid_to_vec(&grid)
            })
            .collect();
        MultiscaleField {
            lattice: self.lattice,
            family: Family::GffSemigroup,
            scales: self.scales.clone(),
            increments,
            variance: Arc::clone(&self.table),
            seed,
            replica,
        }
    }

    fn covariance(&self, n1: usize, i: usize, n2: usize, j: usize) -> f64 {
        let n = n1.min(n2);
        self.mode_sum(i, j, |l| self.cumulative_weight(n, l))
    }

    fn difference_variance(&self, n1: usize, n2: usize, i: usize) -> f64 {
        let (lo, hi) = (n1.min(n2), n1.max(n2));
        if lo == hi {
            return 0.0;
        }
        let fine = self.scales[hi - 1];
        let coarse = if lo == 0 { f64::INFINITY } else { self.scales[lo - 1] };
        self.mode_sum(i, i, |l| slice_variance(l, fine, coarse))
    }
}

/// Draws one replica of the semigroup cut-off GFF on a lattice inside the
/// unit square (margin taken from the lattice offset).
pub fn sample_gff_sine(lattice: LatticeSpec, scales: Vec<f64>, modes: usize, seed: u64) -> Result<MultiscaleField> {
    let margin = lattice.offset[0].min(lattice.offset[1]);
    Ok(SineSampler::new(lattice, scales, modes, margin)?.sample(seed, 0))
}
