use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{count_thick, net_size, sup_normalized, Counting, ThickCellSets, ThickOptions, ThresholdMode};
use crate::error::{Error, Result};
use crate::fields::FieldGenerator;
use crate::stats::{linear_fit, quadratic_fit};

/// Scales entering the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWindow {
    /// Drops the two coarsest scales and the finest, and any scale whose net
    /// has fewer than 4 points per axis or more points than lattice cells.
    #[default]
    Default,
    /// Inclusive scale indices.
    Scales { lo: usize, hi: usize },
}

impl FitWindow {
    fn resolve(&self, scales: &[f64], side: f64, cells: usize, counting: Counting) -> Vec<usize> {
        let n_max = scales.len();
        match *self {
            FitWindow::Scales { lo, hi } => (lo.max(1)..=hi.min(n_max)).collect(),
            FitWindow::Default => (3..n_max)
                .filter(|&n| match counting {
                    Counting::Cells => true,
                    Counting::NetPoints => {
                        let raw = (side / scales[n - 1]).round();
                        raw >= 4.0 && raw <= cells as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleCount {
    pub n: usize,
    pub scale: f64,
    pub net_size: usize,
    /// Regression abscissa: log net size, or log(1/r_n) when counting cells.
    pub x: f64,
    pub mean_count: f64,
    pub used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FitVerdict {
    Fit { slope: f64, intercept: f64, stderr: f64 },
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionFit {
    pub a: f64,
    pub dim: usize,
    pub replicas: usize,
    pub points: Vec<ScaleCount>,
    pub verdict: FitVerdict,
    /// d - a^2/2.
    pub predicted: f64,
}

impl DimensionFit {
    pub fn slope(&self) -> Option<f64> {
        match self.verdict {
            FitVerdict::Fit { slope, .. } => Some(slope),
            FitVerdict::Empty => None,
        }
    }

    pub fn stderr(&self) -> Option<f64> {
        match self.verdict {
            FitVerdict::Fit { stderr, .. } => Some(stderr),
            FitVerdict::Empty => None,
        }
    }
}

/// Thick counts for a replica ensemble, streamed so no field is retained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleCounts {
    pub levels: Vec<f64>,
    pub options: ThickOptions,
    pub scales: Vec<f64>,
    pub side: f64,
    pub cells: usize,
    pub net_sizes: Vec<usize>,
    /// counts[level][replica][n - 1].
    pub counts: Vec<Vec<Vec<usize>>>,
    /// sups[replica][n - 1] of X_n / Var X_n over all cells.
    pub sups: Vec<Vec<f64>>,
}

impl EnsembleCounts {
    pub fn replicas(&self) -> usize {
        self.sups.len()
    }

    /// Replicas with a nonempty set at scale n for the given level index.
    pub fn nonempty_at(&self, level: usize, n: usize) -> usize {
        self.counts[level].iter().filter(|c| c[n - 1] > 0).count()
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (k, &a) in self.levels.iter().enumerate() {
            for (r, per_n) in self.counts[k].iter().enumerate() {
                for (i, &c) in per_n.iter().enumerate() {
                    rows.push(vec![
                        format!("{a}"),
                        (i + 1).to_string(),
                        format!("{:.17e}", self.scales[i]),
                        c.to_string(),
                        r.to_string(),
                    ]);
                }
            }
        }
        rows
    }

    pub const CSV_COLUMNS: [&'static str; 5] = ["a", "n", "r_n", "count", "replica"];
}

pub fn ensemble_counts(
    generator: &dyn FieldGenerator,
    seed: u64,
    replicas: usize,
    levels: &[f64],
    options: &ThickOptions,
) -> Result<EnsembleCounts> {
    options.validate()?;
    let lat = *generator.lattice();
    let per_replica: Vec<(Vec<Vec<usize>>, Vec<f64>)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let field = generator.sample(seed, r);
            let counts = count_thick(&field, levels, options)?;
            Ok((counts, sup_normalized(&field)))
        })
        .collect::<Result<_>>()?;
    let scales = generator.scales().to_vec();
    let net_sizes = scales
        .iter()
        .map(|&e| match options.counting {
            Counting::NetPoints => net_size(lat.side, e, lat.cells),
            Counting::Cells => lat.cells,
        })
        .collect();
    let mut counts = vec![Vec::with_capacity(replicas); levels.len()];
    let mut sups = Vec::with_capacity(replicas);
    for (c, s) in per_replica {
        for (k, per_level) in c.into_iter().enumerate() {
            counts[k].push(per_level);
        }
        sups.push(s);
    }
    Ok(EnsembleCounts {
        levels: levels.to_vec(),
        options: *options,
        scales,
        side: lat.side,
        cells: lat.cells,
        net_sizes,
        counts,
        sups,
    })
}

fn abscissa(counting: Counting, net: usize, scale: f64) -> f64 {
    match counting {
        Counting::NetPoints => (net as f64).ln(),
        Counting::Cells => -scale.ln(),
    }
}

/// Pooled regression of log mean count on log resolution, with a
/// leave-one-replica-out jackknife standard error.
#[allow(clippy::too_many_arguments)]
fn fit_counts(
    a: f64,
    dim: usize,
    counts: &[Vec<usize>],
    scales: &[f64],
    net_sizes: &[usize],
    side: f64,
    cells: usize,
    counting: Counting,
    window: FitWindow,
) -> Result<DimensionFit> {
    let replicas = counts.len();
    if replicas == 0 {
        return Err(Error::InsufficientData("no replicas".into()));
    }
    let ns = window.resolve(scales, side, cells, counting);
    if ns.len() < 4 {
        return Err(Error::InsufficientData(format!("fit window holds {} scales, need 4", ns.len())));
    }
    let mean_at = |n: usize, skip: Option<usize>| {
        let (sum, k) = counts
            .iter()
            .enumerate()
            .filter(|(r, _)| Some(*r) != skip)
            .fold((0usize, 0usize), |(s, k), (_, c)| (s + c[n - 1], k + 1));
        sum as f64 / k as f64
    };
    let points: Vec<ScaleCount> = ns
        .iter()
        .map(|&n| {
            let m = mean_at(n, None);
            ScaleCount {
                n,
                scale: scales[n - 1],
                net_size: net_sizes[n - 1],
                x: abscissa(counting, net_sizes[n - 1], scales[n - 1]),
                mean_count: m,
                used: m > 0.0,
            }
        })
        .collect();
    let predicted = dim as f64 - 0.5 * a * a;
    let used: Vec<usize> = points.iter().filter(|p| p.used).map(|p| p.n).collect();
    if used.is_empty() {
        return Ok(DimensionFit { a, dim, replicas, points, verdict: FitVerdict::Empty, predicted });
    }
    if used.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "level {a}: only {} scales with nonzero counts in the fit window",
            used.len()
        )));
    }
    let xs: Vec<f64> = points.iter().filter(|p| p.used).map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().filter(|p| p.used).map(|p| p.mean_count.ln()).collect();
    let line = linear_fit(&xs, &ys);

    let mut stderr = line.slope_se;
    if replicas > 1 {
        let mut jack = Vec::with_capacity(replicas);
        for skip in 0..replicas {
            let yj: Vec<f64> = used.iter().map(|&n| mean_at(n, Some(skip)).ln()).collect();
            if yj.iter().any(|v| !v.is_finite()) {
                jack.clear();
                break;
            }
            jack.push(linear_fit(&xs, &yj).slope);
        }
        if !jack.is_empty() {
            let m = jack.iter().sum::<f64>() / replicas as f64;
            let r = replicas as f64;
            stderr = ((r - 1.0) / r * jack.iter().map(|s| (s - m).powi(2)).sum::<f64>()).sqrt();
        }
    }
    Ok(DimensionFit {
        a,
        dim,
        replicas,
        points,
        verdict: FitVerdict::Fit { slope: line.slope, intercept: line.intercept, stderr },
        predicted,
    })
}

/// Dimension fit over an ensemble of thick sets at one level.
pub fn count_scaling(sets: &[ThickCellSets], window: FitWindow) -> Result<DimensionFit> {
    let first = sets.first().ok_or_else(|| Error::InsufficientData("no thick sets".into()))?;
    if sets.iter().any(|s| s.a != first.a || s.net_sizes != first.net_sizes) {
        return Err(Error::Usage("thick sets differ in level or nets".into()));
    }
    let counts: Vec<Vec<usize>> = sets.iter().map(|s| s.counts.clone()).collect();
    fit_counts(
        first.a,
        2,
        &counts,
        &first.scales,
        &first.net_sizes,
        first.side,
        first.cells,
        first.options.counting,
        window,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub a: f64,
    pub fit: DimensionFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub a_lo: f64,
    pub a_hi: f64,
    pub increase: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    /// [c0, c1, c2] of d_hat(a) = c0 + c1 a + c2 a^2 over fitted levels.
    pub quadratic: Option<[f64; 3]>,
    pub violations: Vec<MonotonicityViolation>,
    /// Exact count-level monotonicity in a (threshold mode only).
    pub counts_monotone: Option<bool>,
}

impl Spectrum {
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                let (d, se) = match p.fit.verdict {
                    FitVerdict::Fit { slope, stderr, .. } => (format!("{slope:.17e}"), format!("{stderr:.17e}")),
                    FitVerdict::Empty => ("empty".into(), String::new()),
                };
                vec![format!("{}", p.a), d, se, format!("{:.17e}", p.fit.predicted)]
            })
            .collect()
    }

    pub const CSV_COLUMNS: [&'static str; 4] = ["a", "d_hat", "stderr", "predicted"];

    pub fn at(&self, a: f64) -> Option<&DimensionFit> {
        self.points.iter().find(|p| p.a == a).map(|p| &p.fit)
    }
}

pub fn spectrum_from_counts(ens: &EnsembleCounts, dim: usize, window: FitWindow) -> Result<Spectrum> {
    let mut points = Vec::with_capacity(ens.levels.len());
    for (k, &a) in ens.levels.iter().enumerate() {
        let fit = fit_counts(
            a,
            dim,
            &ens.counts[k],
            &ens.scales,
            &ens.net_sizes,
            ens.side,
            ens.cells,
            ens.options.counting,
            window,
        )?;
        points.push(SpectrumPoint { a, fit });
    }
    let fitted: Vec<(f64, f64, f64)> = points
        .iter()
        .filter_map(|p| match p.fit.verdict {
            FitVerdict::Fit { slope, stderr, .. } => Some((p.a, slope, stderr)),
            FitVerdict::Empty => None,
        })
        .collect();
    let quadratic = (fitted.len() >= 3).then(|| {
        let xs: Vec<f64> = fitted.iter().map(|f| f.0).collect();
        let ys: Vec<f64> = fitted.iter().map(|f| f.1).collect();
        quadratic_fit(&xs, &ys)
    });
    let mut order: Vec<&(f64, f64, f64)> = fitted.iter().collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let violations = order
        .windows(2)
        .filter(|w| w[1].1 > w[0].1)
        .map(|w| MonotonicityViolation {
            a_lo: w[0].0,
            a_hi: w[1].0,
            increase: w[1].1 - w[0].1,
            stderr: (w[0].2.powi(2) + w[1].2.powi(2)).sqrt(),
        })
        .collect();
    let counts_monotone = (ens.options.mode == ThresholdMode::AtLeast).then(|| {
        let mut idx: Vec<usize> = (0..ens.levels.len()).collect();
        idx.sort_by(|&i, &j| ens.levels[i].total_cmp(&ens.levels[j]));
        idx.windows(2).all(|w| {
            ens.counts[w[0]].iter().zip(&ens.counts[w[1]]).all(|(lo, hi)| lo.iter().zip(hi).all(|(a, b)| b <= a))
        })
    });
    Ok(Spectrum { points, quadratic, violations, counts_monotone })
}

/// Fits d_hat(a) over a level grid inside [0, sqrt(2 d)).
pub fn spectrum(
    generator: &dyn FieldGenerator,
    seed: u64,
    replicas: usize,
    levels: &[f64],
    options: &ThickOptions,
    window: FitWindow,
) -> Result<Spectrum> {
    let dim = 2;
    let cap = (2.0 * dim as f64).sqrt();
    if let Some(a) = levels.iter().find(|&&a| !(0.0..cap).contains(&a)) {
        return Err(Error::Domain(format!("spectrum levels must lie in [0, {cap}), got {a}")));
    }
    let ens = ensemble_counts(generator, seed, replicas, levels, options)?;
    spectrum_from_counts(&ens, dim, window)
}
