//! Thick-point sets and their covering-count dimension.
//!
//! At scale n the field X_n is read on a net of B_n x B_n points spaced
//! about r_n = eps_n apart (nearest lattice cell), normalized by its exact
//! variance and thresholded. Covering counts |A_n| are then regressed
//! against log B_n.

mod boxcount;
mod fit;

use serde::{Deserialize, Serialize};

pub use boxcount::{box_counts, box_dimension, cantor_dust, full_square, segment};
pub use fit::{
    count_scaling, ensemble_counts, spectrum, spectrum_from_counts, DimensionFit, EnsembleCounts, FitVerdict,
    FitWindow, MonotonicityViolation, ScaleCount, Spectrum, SpectrumPoint,
};

use crate::error::{Error, Result};
use crate::fields::MultiscaleField;

/// Slack delta(n) subtracted from the thickness level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaRule {
    Zero,
    /// C (log n)^(zeta - 1); infinite at n = 1.
    LogPower {
        c: f64,
        zeta: f64,
    },
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::LogPower { c: 1.0, zeta: 0.5 }
    }
}

impl DeltaRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaRule::Zero => Ok(()),
            DeltaRule::LogPower { c, zeta } => {
                if !(c >= 0.0) || !(zeta < 1.0) || !zeta.is_finite() {
                    return Err(Error::Domain(format!(
                        "delta rule needs c >= 0 and zeta < 1 so that delta(n) -> 0 (got c = {c}, zeta = {zeta})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, n: usize) -> f64 {
        match *self {
            DeltaRule::Zero => 0.0,
            DeltaRule::LogPower { c, zeta } => {
                if c == 0.0 {
                    0.0
                } else if n <= 1 {
                    f64::INFINITY
                } else {
                    c * (n as f64).ln().powf(zeta - 1.0)
                }
            }
        }
    }
}

/// Which scale sequence r_n the field was built on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleGrid {
    #[default]
    Efold,
    /// r_n = n^(-k), r_1 = 1.
    Power { k: f64 },
}

impl ScaleGrid {
    pub fn scales(&self, n_max: usize) -> Vec<f64> {
        (1..=n_max)
            .map(|n| match *self {
                ScaleGrid::Efold => (-(n as f64)).exp(),
                ScaleGrid::Power { k } => (n as f64).powf(-k),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScaleGrid::Power { k } if !(k > 0.0) => Err(Error::Domain(format!("power grid needs k > 0, got {k}"))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// X / V >= a - delta(n).
    #[default]
    AtLeast,
    /// |X / V - a| <= delta(n).
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Counting {
    /// Net of about side / r_n points per axis, read at the nearest cell.
    #[default]
    NetPoints,
    /// Every lattice cell at every scale.
    Cells,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThickOptions {
    #[serde(default)]
    pub mode: ThresholdMode,
    #[serde(default = "zero_delta")]
    pub delta: DeltaRule,
    #[serde(default)]
    pub counting: Counting,
}

fn zero_delta() -> DeltaRule {
    DeltaRule::Zero
}

impl Default for ThickOptions {
    fn default() -> Self {
        ThickOptions { mode: ThresholdMode::AtLeast, delta: DeltaRule::Zero, counting: Counting::NetPoints }
    }
}

impl ThickOptions {
    pub fn validate(&self) -> Result<()> {
        self.delta.validate()
    }

    fn hit(&self, ratio: f64, a: f64, delta: f64) -> bool {
        match self.mode {
            ThresholdMode::AtLeast => ratio >= a - delta,
            ThresholdMode::Band => (ratio - a).abs() <= delta,
        }
    }
}

/// Net points per axis at scale eps on a square of the given side, capped
/// at the lattice size.
pub fn net_size(side: f64, eps: f64, cells: usize) -> usize {
    ((side / eps).round() as usize).clamp(1, cells)
}

/// Lattice cells read by a net of `b` points per axis.
fn net_cells(b: usize, cells: usize) -> Vec<usize> {
    (0..b).map(|j| (((j as f64 + 0.5) * cells as f64 / b as f64) as usize).min(cells - 1)).collect()
}

/// Per-scale net sizes used for counting.
pub fn net_sizes(field: &MultiscaleField, counting: Counting) -> Vec<usize> {
    let lat = &field.lattice;
    field
        .scales
        .iter()
        .map(|&eps| match counting {
            Counting::NetPoints => net_size(lat.side, eps, lat.cells),
            Counting::Cells => lat.cells,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThickCellSets {
    pub a: f64,
    pub options: ThickOptions,
    pub scales: Vec<f64>,
    pub side: f64,
    pub cells: usize,
    pub delta: Vec<f64>,
    /// Net points per axis at each scale.
    pub net_sizes: Vec<usize>,
    /// Row-major B_n x B_n indicator grids.
    pub grids: Vec<Vec<bool>>,
    pub counts: Vec<usize>,
    pub replica: u64,
}

fn check_level(a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("thickness level must be finite and nonnegative, got {a}")));
    }
    Ok(())
}

/// Visits the normalized field X_n / Var X_n on each scale's net.
fn for_each_net<F: FnMut(usize, usize, &mut dyn Iterator<Item = f64>)>(
    field: &MultiscaleField,
    counting: Counting,
    mut f: F,
) {
    let cells = field.lattice.cells;
    let sizes = net_sizes(field, counting);
    field.for_each_scale(|n, x| {
        let b = sizes[n - 1];
        let idx = net_cells(b, cells);
        let mut it = idx.iter().flat_map(|&r| idx.iter().map(move |&c| (r, c))).map(|(r, c)| {
            let cell = r * cells + c;
            x[cell] / field.variance_at(n, cell)
        });
        f(n, b, &mut it);
    });
}

pub fn thick_cells(field: &MultiscaleField, a: f64, options: &ThickOptions) -> Result<ThickCellSets> {
    check_level(a)?;
    options.validate()?;
    let n_max = field.n_max();
    let delta: Vec<f64> = (1..=n_max).map(|n| options.delta.at(n)).collect();
    let mut grids = Vec::with_capacity(n_max);
    let mut sizes = Vec::with_capacity(n_max);
    for_each_net(field, options.counting, |n, b, ratios| {
        grids.push(ratios.map(|r| options.hit(r, a, delta[n - 1])).collect::<Vec<bool>>());
        sizes.push(b);
    });
    let counts = grids.iter().map(|g| g.iter().filter(|&&v| v).count()).collect();
    Ok(ThickCellSets {
        a,
        options: *options,
        scales: field.scales.clone(),
        side: field.lattice.side,
        cells: field.lattice.cells,
        delta,
        net_sizes: sizes,
        grids,
        counts,
        replica: field.replica,
    })
}

/// Counts |A_n| for several levels at once: result[level][n - 1].
pub fn count_thick(field: &MultiscaleField, levels: &[f64], options: &ThickOptions) -> Result<Vec<Vec<usize>>> {
    for &a in levels {
        check_level(a)?;
    }
    options.validate()?;
    let mut counts = vec![vec![0usize; field.n_max()]; levels.len()];
    for_each_net(field, options.counting, |n, _, ratios| {
        let delta = options.delta.at(n);
        for r in ratios {
            for (k, &a) in levels.iter().enumerate() {
                if options.hit(r, a, delta) {
                    counts[k][n - 1] += 1;
                }
            }
        }
    });
    Ok(counts)
}

/// Per-scale maximum over the lattice of X_n / Var X_n.
pub fn sup_normalized(field: &MultiscaleField) -> Vec<f64> {
    let mut out = Vec::with_capacity(field.n_max());
    field.for_each_scale(|n, x| {
        let m = x.iter().enumerate().map(|(i, v)| v / field.variance_at(n, i)).fold(f64::NEG_INFINITY, f64::max);
        out.push(m);
    });
    out
}

/// Tail sum over n >= n_from of n^-(a^2/(2 chi) - d (1 + 1/chi)); infinite
/// when the exponent is at most one.
pub fn borel_cantelli_tail(a: f64, dim: f64, chi: f64, n_from: usize) -> f64 {
    let p = a * a / (2.0 * chi) - dim * (1.0 + 1.0 / chi);
    if p <= 1.0 {
        return f64::INFINITY;
    }
    let n0 = n_from.max(1);
    let cut = n0 + 100_000;
    let head: f64 = (n0..cut).map(|n| (n as f64).powf(-p)).sum();
    // Euler-Maclaurin remainder from the cut onward.
    let c = cut as f64;
    head + c.powf(1.0 - p) / (p - 1.0) + 0.5 * c.powf(-p)
}
