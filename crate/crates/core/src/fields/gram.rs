use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{CellVariance, FieldGenerator, LatticeSpec, MultiscaleField, VarianceTable};
use crate::error::{Error, Result};
use crate::kernels::decomposition::efold_scales;
use crate::kernels::{h_shell, CutoffSpec, Family};
use crate::rng::{fill_normals, StreamKey};

/// Relative eigenvalue tolerance shared by Gram factorization and PSD
/// certification: eigenvalues in [-PSD_TOLERANCE * max, 0) are clipped to
/// zero, anything more negative is a hard error.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Largest point count for a dense Gram factorization.
pub const MAX_GRAM_POINTS: usize = 4096;

/// Largest point count for the exact oracle sampler.
pub const MAX_EXACT_POINTS: usize = 2048;

/// Outcome of factorizing one Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClipReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub clipped: usize,
    /// Largest change of a diagonal entry caused by clipping.
    pub max_diagonal_change: f64,
}

/// Whether an eigenvalue range passes PSD certification at relative
/// tolerance `tol`.
pub fn psd_within(min: f64, max: f64, tol: f64) -> bool {
    max >= 0.0 && min >= -tol * max
}

/// Symmetric square root F with F F^T = clipped Gram.
fn psd_factor(gram: DMatrix<f64>) -> Result<(DMatrix<f64>, ClipReport)> {
    let diag: Vec<f64> = gram.diagonal().iter().copied().collect();
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !psd_within(min, max, PSD_TOLERANCE) {
        return Err(Error::NotPsd { min_eigenvalue: min, max_eigenvalue: max });
    }
    let clipped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    let max_diagonal_change =
        (0..factor.nrows()).map(|i| (factor.row(i).norm_squared() - diag[i]).abs()).fold(0.0, f64::max);
    Ok((factor, ClipReport { min_eigenvalue: min, max_eigenvalue: max, clipped, max_diagonal_change }))
}

/// Minimum and maximum eigenvalue of a symmetric matrix.
pub fn eigen_range(gram: DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    (min, max)
}

fn row_norms(f: &DMatrix<f64>) -> Vec<f64> {
    (0..f.nrows()).map(|i| f.row(i).norm_squared()).collect()
}

/// Integral cut-off sampled scale by scale from dense Gram factorizations of
/// the u-shell kernels p_k on the lattice.
pub struct GramSampler {
    spec: CutoffSpec,
    lattice: LatticeSpec,
    scales: Vec<f64>,
    factors: Vec<DMatrix<f64>>,
    reports: Vec<ClipReport>,
    table: Arc<VarianceTable>,
}

impl GramSampler {
    pub fn new(spec: CutoffSpec, lattice: LatticeSpec, n_max: usize) -> Result<Self> {
        Self::with_scales(spec, lattice, efold_scales(n_max))
    }

    pub fn with_scales(spec: CutoffSpec, lattice: LatticeSpec, scales: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        lattice.validate()?;
        if spec.family != Family::MassiveIntegral {
            return Err(Error::Usage(format!("Gram sampler draws the integral family, not {}", spec.family)));
        }
        if lattice.len() > MAX_GRAM_POINTS {
            return Err(Error::Feasibility(format!(
                "{} lattice points exceed the dense factorization limit of {MAX_GRAM_POINTS}",
                lattice.len()
            )));
        }
        if scales.iter().any(|&e| !(e > 0.0 && e <= 1.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("scales must lie in (0, 1] and strictly decrease".into()));
        }
        let points = lattice.centres();
        let p = points.len();
        let mut factors = Vec::with_capacity(scales.len());
        let mut reports = Vec::with_capacity(scales.len());
        for k in 0..scales.len() {
            let u0 = if k == 0 { 1.0 } else { 1.0 / scales[k - 1] };
            let u1 = 1.0 / scales[k];
            let gram = DMatrix::from_fn(p, p, |i, j| {
                let d = ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
                h_shell(d, u0, u1, spec.mass)
            });
            let (f, report) = psd_factor(gram)?;
            factors.push(f);
            reports.push(report);
        }
        let increments: Vec<Vec<f64>> = factors.iter().map(row_norms).collect();
        let mut cumulative = Vec::with_capacity(scales.len());
        let mut acc = vec![0.0; p];
        for inc in &increments {
            for (a, v) in acc.iter_mut().zip(inc) {
                *a += v;
            }
            cumulative.push(CellVariance::PerCell(acc.clone()));
        }
        Ok(GramSampler {
            spec,
            lattice,
            scales,
            factors,
            reports,
            table: Arc::new(VarianceTable {
                cumulative,
                increments: increments.into_iter().map(CellVariance::PerCell).collect(),
            }),
        })
    }

    pub fn clip_reports(&self) -> &[ClipReport] {
        &self.reports
    }

    pub fn spec(&self) -> &CutoffSpec {
        &self.spec
    }
}

impl FieldGenerator for GramSampler {
    fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn family(&self) -> Family {
        Family::MassiveIntegral
    }

    fn variance_table(&self) -> &Arc<VarianceTable> {
        &self.table
    }

    fn sample(&self, seed: u64, replica: u64) -> MultiscaleField {
        let p = self.lattice.len();
        let mut g = vec![0.0; p];
        let increments = self
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| {
                fill_normals(StreamKey::new(seed, replica, (k + 1) as u32, 0), &mut g);
                let y = f * DVector::from_column_slice(&g);
                y.as_slice().to_vec()
            })
            .collect();
        MultiscaleField {
            lattice: self.lattice,
            family: Family::MassiveIntegral,
            scales: self.scales.clone(),
            increments,
            variance: Arc::clone(&self.table),
            seed,
            replica,
        }
    }

    fn covariance(&self, n1: usize, i: usize, n2: usize, j: usize) -> f64 {
        self.factors[..n1.min(n2)].iter().map(|f| f.row(i).dot(&f.row(j))).sum()
    }

    fn difference_variance(&self, n1: usize, n2: usize, i: usize) -> f64 {
        let (lo, hi) = (n1.min(n2), n1.max(n2));
        self.factors[lo..hi].iter().map(|f| f.row(i).norm_squared()).sum()
    }
}

/// Draws one replica of the integral cut-off; see [`GramSampler`].
pub fn sample_integral_family(
    spec: CutoffSpec,
    lattice: LatticeSpec,
    n_max: usize,
    seed: u64,
) -> Result<MultiscaleField> {
    Ok(GramSampler::new(spec, lattice, n_max)?.sample(seed, 0))
}

/// Exact multivariate normal sampler for an arbitrary covariance function on
/// a small point set; the ground-truth oracle for the other samplers.
pub struct ExactSampler {
    factor: DMatrix<f64>,
    report: ClipReport,
}

impl ExactSampler {
    pub fn new<K: Fn(&[f64; 2], &[f64; 2]) -> f64>(kernel: K, points: &[[f64; 2]]) -> Result<Self> {
        if points.len() > MAX_EXACT_POINTS {
            return Err(Error::Feasibility(format!(
                "{} points exceed the exact sampler limit of {MAX_EXACT_POINTS}",
                points.len()
            )));
        }
        let p = points.len();
        let gram = DMatrix::from_fn(p, p, |i, j| kernel(&points[i], &points[j]));
        let gram = (&gram + gram.transpose()) * 0.5;
        let (factor, report) = psd_factor(gram)?;
        Ok(ExactSampler { factor, report })
    }

    pub fn report(&self) -> ClipReport {
        self.report
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.nrows() == 0
    }

    pub fn sample(&self, seed: u64, replica: u64) -> Vec<f64> {
        let mut g = vec![0.0; self.len()];
        fill_normals(StreamKey::new(seed, replica, 0, 0), &mut g);
        (&self.factor * DVector::from_column_slice(&g)).as_slice().to_vec()
    }
}

/// One exact draw of a centred Gaussian vector with covariance `kernel`.
pub fn sample_exact<K: Fn(&[f64; 2], &[f64; 2]) -> f64>(kernel: K, points: &[[f64; 2]], seed: u64) -> Result<Vec<f64>> {
    Ok(ExactSampler::new(kernel, points)?.sample(seed, 0))
}
