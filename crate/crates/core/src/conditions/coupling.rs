//! Comparison of two spectral cut-offs driven by the same mode Gaussians.

use rayon::prelude::*;
use serde::Serialize;

use super::{argmax, relative_change, trend_slope, ConditionId, ConditionReport, ProbeGrid, ProbeRow, Thresholds};
use crate::error::{Error, Result};
use crate::kernels::radial::difference_moments;
use crate::kernels::CutoffSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReports {
    pub variance: ConditionReport,
    pub increment: ConditionReport,
}

pub(super) fn require_coupling(a: &CutoffSpec, b: &CutoffSpec) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if !a.family.is_spectral() || !b.family.is_spectral() || a.dim != b.dim || a.mass != b.mass {
        return Err(Error::NoCoupling(a.label(), b.label()));
    }
    Ok(())
}

pub(super) fn pair_label(a: &CutoffSpec, b: &CutoffSpec) -> String {
    format!("{} vs {}", a.label(), b.label())
}

struct Moments {
    eps: Vec<f64>,
    variances: Vec<f64>,
    increments: Vec<ProbeRow>,
}

fn moments(a: &CutoffSpec, b: &CutoffSpec, grid: &ProbeGrid) -> Result<Moments> {
    let eps = grid.eps();
    let dists = grid.distances();
    let probes: Vec<(f64, f64)> = eps.iter().flat_map(|&e| dists.iter().map(move |&r| (e, r))).collect();
    let values: Vec<(f64, f64)> =
        probes.par_iter().map(|&(e, r)| difference_moments(r, e, a, b)).collect::<Result<_>>()?;
    let variances = values.chunks(dists.len()).map(|c| c[0].0).collect();
    let increments = probes
        .iter()
        .zip(&values)
        .map(|(&(e, r), &(_, incr))| ProbeRow { probe: format!("eps={e:e} r={r:e}"), value: incr.max(0.0) * e / r })
        .collect();
    Ok(Moments { eps, variances, increments })
}

/// Condition (E): bounded variance of Z = X^a - X^b and Lipschitz-type
/// increments at scale eps. Both reports use threshold 1 on normalized
/// worst ratios.
pub fn check_e(spec_a: &CutoffSpec, spec_b: &CutoffSpec, grid: &ProbeGrid, th: &Thresholds) -> Result<CouplingReports> {
    require_coupling(spec_a, spec_b)?;
    let coarse = moments(spec_a, spec_b, grid)?;
    let fine = moments(spec_a, spec_b, &grid.refined())?;
    let subject = pair_label(spec_a, spec_b);

    let sup0 = coarse.variances.iter().copied().fold(0.0, f64::max);
    let sup1 = fine.variances.iter().copied().fold(0.0, f64::max);
    let slope = trend_slope(&fine.eps, &fine.variances);
    let mut var = ConditionReport::new(ConditionId::EVar, subject.clone(), grid.describe(), 1.0);
    var.probe_count = fine.eps.len();
    var.constants.insert("sup_var".into(), sup1);
    var.constants.insert("sup_var_coarse".into(), sup0);
    var.constants.insert("trend_slope".into(), slope);
    var.worst_ratio = (sup1 / th.constant_cap).max(slope / th.trend_slope).max(0.0);
    var.rows = fine
        .eps
        .iter()
        .zip(&fine.variances)
        .map(|(e, v)| ProbeRow { probe: format!("eps={e:e}"), value: *v })
        .collect();
    var.argmax = argmax(&var.rows).map(|v| v.1);
    var.decide(relative_change(sup0, sup1) <= th.refinement);

    let c0 = argmax(&coarse.increments).map(|v| v.0).unwrap_or(0.0);
    let (c1, at) = argmax(&fine.increments).unwrap_or((0.0, String::new()));
    let mut incr = ConditionReport::new(ConditionId::EIncr, subject, grid.describe(), th.constant_cap);
    incr.probe_count = fine.increments.len();
    incr.constants.insert("C_prime".into(), c1);
    incr.constants.insert("C_prime_coarse".into(), c0);
    incr.worst_ratio = c1.max(0.0);
    incr.argmax = Some(at);
    incr.rows = fine.increments;
    incr.decide(relative_change(c0, c1) <= th.refinement);
    Ok(CouplingReports { variance: var, increment: incr })
}
