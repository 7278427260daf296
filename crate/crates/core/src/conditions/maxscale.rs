//! Monte Carlo growth of sup Z_eps for a coupled pair of spectral cut-offs.
//!
//! Z_eps is sampled on a square region of side R at spacing about eps. Large
//! regions are covered by independent periodic tiles of at most 256 cells
//! per axis; Z decorrelates on the scale eps, so the tile seams only matter
//! within a few cells of each edge.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::coupling::{pair_label, require_coupling};
use super::{trend_slope, ConditionId, ConditionReport, ProbeRow, Thresholds};
use crate::error::{Error, Result};
use crate::fft::InverseFft2;
use crate::kernels::radial::difference_moments;
use crate::kernels::CutoffSpec;
use crate::rng::{fill_normals, StreamKey};
use crate::stats;

const TILE_CELLS: usize = 256;
const MIN_TORUS_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxScalingOptions {
    /// Side of the square over which the supremum is taken.
    pub region_side: f64,
    pub seed: u64,
}

impl Default for MaxScalingOptions {
    fn default() -> Self {
        MaxScalingOptions { region_side: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSup {
    pub eps: f64,
    pub mean_sup: f64,
    pub stderr: f64,
    /// mean_sup / sqrt(-log eps).
    pub ratio: f64,
    /// Pointwise variance of the sampled lattice field.
    pub lattice_variance: f64,
    /// Continuum Var Z_eps.
    pub exact_variance: f64,
    pub spacing: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxScalingResult {
    pub report: ConditionReport,
    pub scales: Vec<ScaleSup>,
    /// sups[replica][scale index], scales in the order given.
    pub sups: Vec<Vec<f64>>,
    pub ratio_spread: f64,
    pub trend_slope: f64,
    pub monotone_share: f64,
    /// Share of replicas decreasing between consecutive scales (coarse to fine).
    pub step_shares: Vec<f64>,
}

impl MaxScalingResult {
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (r, per) in self.sups.iter().enumerate() {
            for (s, v) in self.scales.iter().zip(per) {
                rows.push(vec![format!("{:e}", s.eps), r.to_string(), format!("{v:.17e}")]);
            }
        }
        rows
    }

    pub const CSV_COLUMNS: [&'static str; 3] = ["eps", "replica", "sup"];
}

/// Tiling of the region at one scale.
#[derive(Debug, Clone, Copy)]
struct Layout {
    /// Independent tori per axis.
    tiles: usize,
    /// Cells per torus side.
    torus: usize,
    /// Cells per axis read from each torus.
    window: usize,
    spacing: f64,
}

fn layout(region: f64, eps: f64) -> Layout {
    let span = region / eps;
    if span >= MIN_TORUS_CELLS as f64 {
        let tiles = (span / TILE_CELLS as f64).ceil() as usize;
        let torus = (span / tiles as f64).round() as usize;
        Layout { tiles, torus, window: torus, spacing: region / (tiles * torus) as f64 }
    } else {
        let window = span.round().max(1.0) as usize;
        Layout { tiles: 1, torus: MIN_TORUS_CELLS, window, spacing: eps }
    }
}

/// Mode amplitudes a_xi on a torus with `cells` points at the given
/// spacing, so that Z = sum a_xi g_xi e^{i xi x} has the lattice covariance.
pub(super) fn amplitudes(a: &CutoffSpec, b: &CutoffSpec, eps: f64, cells: usize, spacing: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / (cells as f64 * spacing);
    let signed = |i: usize| if i <= cells / 2 { i as f64 } else { i as f64 - cells as f64 };
    let m2 = a.mass * a.mass;
    let mut amp = vec![0.0; cells * cells];
    for i in 0..cells {
        for j in 0..cells {
            let (kx, ky) = (signed(i) * dk, signed(j) * dk);
            let t = (kx * kx + ky * ky).sqrt();
            let w = a.spectral_weight(eps, t) - b.spectral_weight(eps, t);
            amp[i * cells + j] = (dk * dk / (2.0 * std::f64::consts::PI) * w * w / (m2 + t * t)).sqrt();
        }
    }
    amp
}

/// Two independent periodic tiles of Z (real and imaginary parts) from the
/// stream `key`, row-major on the torus.
pub(super) fn tile_pair(amp: &[f64], fft: &InverseFft2, key: StreamKey) -> Vec<Complex64> {
    let mut normals = vec![0.0; 2 * amp.len()];
    fill_normals(key, &mut normals);
    let mut buf: Vec<Complex64> =
        amp.iter().enumerate().map(|(k, a)| Complex64::new(a * normals[2 * k], a * normals[2 * k + 1])).collect();
    fft.process(&mut buf);
    buf
}

/// Sup of Z over the region for one replica at one scale.
fn replica_sup(amp: &[f64], lay: &Layout, fft: &InverseFft2, key: (u64, u64, u32)) -> f64 {
    let n = lay.torus;
    let tiles = lay.tiles * lay.tiles;
    let mut sup = f64::NEG_INFINITY;
    for pair in 0..tiles.div_ceil(2) {
        let buf = tile_pair(amp, fft, StreamKey::new(key.0, key.1, key.2, pair as u32));
        let both = 2 * pair + 1 < tiles;
        for r in 0..lay.window {
            for c in 0..lay.window {
                let z = buf[r * n + c];
                sup = sup.max(z.re);
                if both {
                    sup = sup.max(z.im);
                }
            }
        }
    }
    sup
}

/// Monte Carlo audit of E[sup Z_eps] against sqrt(-log eps) and of
/// sup Z_eps / (-log eps) decreasing along the scale list.
pub fn check_max_scaling(
    spec_a: &CutoffSpec,
    spec_b: &CutoffSpec,
    eps_list: &[f64],
    replicas: usize,
    options: &MaxScalingOptions,
    th: &Thresholds,
) -> Result<MaxScalingResult> {
    require_coupling(spec_a, spec_b)?;
    if spec_a.dim != 2 {
        return Err(Error::Domain("max-scaling sampler supports d = 2 only".into()));
    }
    if eps_list.len() < 3 {
        return Err(Error::InsufficientData(format!("max scaling needs at least 3 scales, got {}", eps_list.len())));
    }
    if replicas < 2 {
        return Err(Error::InsufficientData("max scaling needs at least 2 replicas".into()));
    }
    let region = options.region_side;
    if !(region > 0.0) || eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0 && e <= region)) {
        return Err(Error::Domain("scales must lie in (0, min(1, region side)]".into()));
    }

    let mut sups = vec![vec![0.0; eps_list.len()]; replicas];
    let mut scales = Vec::with_capacity(eps_list.len());
    for (s, &eps) in eps_list.iter().enumerate() {
        let lay = layout(region, eps);
        let amp = amplitudes(spec_a, spec_b, eps, lay.torus, lay.spacing);
        let fft = InverseFft2::new(lay.torus);
        let per: Vec<f64> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| replica_sup(&amp, &lay, &fft, (options.seed, r, s as u32 + 1)))
            .collect();
        for (row, v) in sups.iter_mut().zip(&per) {
            row[s] = *v;
        }
        let mean_sup = stats::mean(&per);
        scales.push(ScaleSup {
            eps,
            mean_sup,
            stderr: stats::std_error(&per),
            ratio: mean_sup / (-eps.ln()).sqrt(),
            lattice_variance: amp.iter().map(|a| a * a).sum(),
            exact_variance: difference_moments(0.0, eps, spec_a, spec_b)?.0,
            spacing: lay.spacing,
            points: (lay.tiles * lay.window).pow(2),
        });
    }

    let ratios: Vec<f64> = scales.iter().map(|s| s.ratio).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 0.0 } else { max / min - 1.0 };
    let slope = trend_slope(eps_list, &ratios);
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&i, &j| eps_list[j].total_cmp(&eps_list[i]));
    let monotone = sups
        .iter()
        .filter(|row| {
            let scaled: Vec<f64> = order.iter().map(|&i| row[i] / -eps_list[i].ln()).collect();
            scaled.windows(2).all(|w| w[1] <= w[0])
        })
        .count();
    let share = monotone as f64 / replicas as f64;
    let step_shares: Vec<f64> = order
        .windows(2)
        .map(|w| {
            let down =
                sups.iter().filter(|row| row[w[1]] / -eps_list[w[1]].ln() <= row[w[0]] / -eps_list[w[0]].ln()).count();
            down as f64 / replicas as f64
        })
        .collect();

    let mut report = ConditionReport::new(
        ConditionId::MaxScaling,
        pair_label(spec_a, spec_b),
        format!("{} scales, {replicas} replicas, region side {region}", eps_list.len()),
        1.0,
    );
    report.probe_count = eps_list.len() * replicas;
    report.constants.insert("ratio_spread".into(), spread);
    report.constants.insert("trend_slope".into(), slope);
    report.constants.insert("monotone_share".into(), share);
    report.constants.insert("max_ratio".into(), max);
    let shortfall = (1.0 - share) / (1.0 - th.monotone_share);
    report.worst_ratio = (slope / th.trend_slope).max(spread / th.sup_ratio_spread).max(shortfall).max(0.0);
    for s in &scales {
        report.rows.push(ProbeRow { probe: format!("eps={:e} mean_sup", s.eps), value: s.mean_sup });
        report.rows.push(ProbeRow { probe: format!("eps={:e} ratio", s.eps), value: s.ratio });
        if s.exact_variance > 0.0 {
            let gap = (s.lattice_variance / s.exact_variance - 1.0).abs();
            if gap > 0.05 {
                report.diagnostics.push(format!(
                    "lattice Var Z at eps={:e} differs from the continuum by {:.1}%",
                    s.eps,
                    100.0 * gap
                ));
            }
        }
    }
    report.argmax = scales.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)).map(|s| format!("eps={:e}", s.eps));
    report.diagnostics.push(format!("per-step decreasing shares (coarse to fine): {step_shares:?}"));
    report.decide(true);
    Ok(MaxScalingResult {
        report,
        scales,
        sups,
        ratio_spread: spread,
        trend_slope: slope,
        monotone_share: share,
        step_shares,
    })
}
