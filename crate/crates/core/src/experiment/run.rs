use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{thread_count, ExperimentConfig, ExperimentKind, OutputWriter, RunManifest};
use crate::conditions::{
    check_a, check_b, check_c, check_d, check_e, check_max_scaling, random_point_sets, ConditionId, ConditionReport,
    MaxScalingOptions, MaxScalingResult, ScaleSup,
};
use crate::error::{Error, Result};
use crate::fields::snapshot;
use crate::fractal::{ensemble_counts, spectrum_from_counts, EnsembleCounts, Spectrum};
use crate::gmc::{
    gmc_at_scale, martingale_trace, pooled_rooted_mean, rooted_thickness_check, MartingaleTrace, RootedThickness,
};
use crate::kernels::KernelTable;
use crate::stats;

/// Point sets and size used for the positive-definiteness check.
const D_POINT_SETS: usize = 4;
const D_POINTS_PER_SET: usize = 8;
/// Scale count for conditions C and D when the config sets none.
const DEFAULT_CONDITION_SCALES: usize = 10;

/// Validates the config, executes its pipeline and writes every output
/// plus manifest.json into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = thread_count(cfg)? {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?
    };
    let mut out = OutputWriter::create(out_dir, &cfg.hash(), cfg.kind.name())?;
    out.write_bytes("config.json", format!("{}\n", cfg.canonical_json()).as_bytes())?;
    pool.install(|| match cfg.kind {
        ExperimentKind::KernelTable => kernel_table(cfg, &mut out),
        ExperimentKind::Sample => sample(cfg, &mut out),
        ExperimentKind::GmcTrace => gmc_trace(cfg, &mut out),
        ExperimentKind::ThickSpectrum => thick_spectrum(cfg, &mut out),
        ExperimentKind::CheckConditions => check_conditions(cfg, &mut out),
        ExperimentKind::CompareCutoffs => compare_cutoffs(cfg, &mut out),
    })?;
    out.finish()
}

fn kernel_table(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    out.begin_stage("tabulate");
    let table = KernelTable::tabulate(cfg.cutoff, &cfg.scale_list(), &cfg.radius_list())?;
    out.begin_stage("write");
    out.write_csv("kernel_table.csv", &KernelTable::CSV_COLUMNS, &table.csv_rows())
}

fn sample(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    out.begin_stage("prepare");
    let generator = cfg.generator()?;
    out.begin_stage("sample");
    let mut columns = vec!["replica"];
    columns.extend(snapshot::CSV_COLUMNS);
    let mut rows = Vec::new();
    for r in 0..cfg.replicas as u64 {
        let field = generator.sample(cfg.seed, r);
        let mut bin = Vec::new();
        snapshot::write_binary(&field, &mut bin)?;
        out.write_bytes(&format!("fields/replica_{r:05}.lcfs"), &bin)?;
        rows.extend(snapshot::csv_rows(&field).into_iter().map(|row| {
            let mut full = vec![r.to_string()];
            full.extend(row);
            full
        }));
    }
    out.begin_stage("write");
    out.write_csv("fields.csv", &columns, &rows)
}

#[derive(Serialize)]
struct GmcSummary {
    gamma: f64,
    scale: usize,
    replicas: usize,
    domain_area: f64,
    mean_total_mass: f64,
    stderr: f64,
    /// (mean - area) / stderr.
    z_score: f64,
    pooled_rooted_mean: Option<f64>,
    max_conditional_defect: Option<f64>,
    statuses: Vec<String>,
}

fn gmc_trace(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    out.begin_stage("prepare");
    let generator = cfg.generator()?;
    let gammas = cfg.level_list();
    let cells = generator.lattice().len();
    let region = vec![true; cells];
    let n_max = generator.n_max();

    out.begin_stage("sample");
    type Replica = Vec<(MartingaleTrace, Option<RootedThickness>)>;
    let per_replica: Vec<Replica> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let field = generator.sample(cfg.seed, r);
            gammas
                .iter()
                .map(|&g| {
                    let trace = martingale_trace(&field, g, &region)?;
                    let rooted = if n_max > 0 {
                        Some(rooted_thickness_check(&field, g, &gmc_at_scale(&field, n_max, g)?)?)
                    } else {
                        None
                    };
                    Ok((trace, rooted))
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    out.begin_stage("write");
    let mut trace_rows = Vec::new();
    let mut rooted_rows = Vec::new();
    let mut summaries = Vec::new();
    for (k, &g) in gammas.iter().enumerate() {
        let mut finals = Vec::with_capacity(cfg.replicas);
        let mut rooted = Vec::new();
        let mut defect: Option<f64> = None;
        let mut statuses: Vec<String> = Vec::new();
        for (r, rep) in per_replica.iter().enumerate() {
            let (trace, root) = &rep[k];
            for row in trace.csv_rows() {
                let mut full = vec![format!("{g}")];
                full.extend(row);
                trace_rows.push(full);
            }
            finals.push(*trace.masses.last().expect("trace has the base mass"));
            if let Some(d) = trace.max_relative_defect() {
                defect = Some(defect.map_or(d, |m: f64| m.max(d)));
            }
            if !statuses.contains(&trace.status) {
                statuses.push(trace.status.clone());
            }
            if let Some(root) = root {
                rooted_rows.push(vec![
                    format!("{g}"),
                    r.to_string(),
                    root.scale.to_string(),
                    format!("{:.17e}", root.total_weight()),
                    format!("{:.17e}", root.weighted_mean()),
                ]);
                rooted.push(root.clone());
            }
        }
        let mean = stats::mean(&finals);
        let se = if finals.len() > 1 { stats::std_error(&finals) } else { f64::NAN };
        let area = generator.lattice().area();
        summaries.push(GmcSummary {
            gamma: g,
            scale: n_max,
            replicas: cfg.replicas,
            domain_area: area,
            mean_total_mass: mean,
            stderr: se,
            z_score: (mean - area) / se,
            pooled_rooted_mean: (!rooted.is_empty()).then(|| pooled_rooted_mean(&rooted)),
            max_conditional_defect: defect,
            statuses,
        });
    }
    let mut trace_cols = vec!["gamma"];
    trace_cols.extend(MartingaleTrace::CSV_COLUMNS);
    out.write_csv("gmc_trace.csv", &trace_cols, &trace_rows)?;
    out.write_csv("rooted.csv", &["gamma", "replica", "scale", "total_weight", "weighted_mean"], &rooted_rows)?;
    out.write_json("summary.json", &summaries)
}

#[derive(Serialize)]
struct Emptiness {
    a: f64,
    n: usize,
    empty_replicas: usize,
    replicas: usize,
}

#[derive(Serialize)]
struct ThickSummary {
    spectrum: Option<Spectrum>,
    /// Emptiness at the finest scale for every level.
    emptiness: Vec<Emptiness>,
    /// Mean over replicas of max X_n / Var X_n at the finest scale.
    mean_sup_finest: f64,
    net_sizes: Vec<usize>,
}

/// Levels with a possible nonempty limit set, sqrt(2 d) for d = 2.
const SPECTRUM_LEVEL_CAP: f64 = 2.0;

fn spectrum_subset(ens: &EnsembleCounts) -> Option<EnsembleCounts> {
    let keep: Vec<usize> = (0..ens.levels.len()).filter(|&k| ens.levels[k] < SPECTRUM_LEVEL_CAP).collect();
    if keep.is_empty() {
        return None;
    }
    Some(EnsembleCounts {
        levels: keep.iter().map(|&k| ens.levels[k]).collect(),
        counts: keep.iter().map(|&k| ens.counts[k].clone()).collect(),
        ..ens.clone()
    })
}

fn thick_spectrum(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    out.begin_stage("prepare");
    let generator = cfg.generator()?;
    let levels = cfg.level_list();
    out.begin_stage("sample");
    let ens = ensemble_counts(generator.as_ref(), cfg.seed, cfg.replicas, &levels, &cfg.thick)?;
    out.begin_stage("fit");
    let spectrum = spectrum_subset(&ens).map(|sub| spectrum_from_counts(&sub, 2, cfg.fit_window)).transpose()?;
    let n_max = ens.scales.len();

    out.begin_stage("write");
    out.write_csv("counts.csv", &EnsembleCounts::CSV_COLUMNS, &ens.csv_rows())?;
    if let Some(s) = &spectrum {
        out.write_csv("spectrum.csv", &Spectrum::CSV_COLUMNS, &s.csv_rows())?;
    }
    let mut empty_rows = Vec::new();
    let mut emptiness = Vec::new();
    for (k, &a) in levels.iter().enumerate() {
        for n in 1..=n_max {
            let empty = ens.replicas() - ens.nonempty_at(k, n);
            empty_rows.push(vec![format!("{a}"), n.to_string(), empty.to_string(), ens.replicas().to_string()]);
            if n == n_max {
                emptiness.push(Emptiness { a, n, empty_replicas: empty, replicas: ens.replicas() });
            }
        }
    }
    out.write_csv("emptiness.csv", &["a", "n", "empty_replicas", "replicas"], &empty_rows)?;
    let finest: Vec<f64> = ens.sups.iter().filter_map(|s| s.last().copied()).collect();
    out.write_json(
        "summary.json",
        &ThickSummary {
            spectrum,
            emptiness,
            mean_sup_finest: if finest.is_empty() { f64::NAN } else { stats::mean(&finest) },
            net_sizes: ens.net_sizes.clone(),
        },
    )
}

fn write_reports(out: &mut OutputWriter, reports: &[ConditionReport]) -> Result<()> {
    let rows: Vec<Vec<String>> = reports.iter().flat_map(ConditionReport::csv_rows).collect();
    out.write_csv("conditions.csv", &ConditionReport::CSV_COLUMNS, &rows)?;
    out.write_json("conditions.json", &reports)
}

fn max_scaling(cfg: &ExperimentConfig) -> Result<MaxScalingResult> {
    let b = cfg.cutoff_b.as_ref().ok_or_else(|| Error::Config("cutoff_b: required".into()))?;
    let options = MaxScalingOptions { region_side: cfg.region_side, seed: cfg.seed };
    check_max_scaling(&cfg.cutoff, b, &cfg.scale_list(), cfg.replicas, &options, &cfg.thresholds)
}

fn check_conditions(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let ids =
        cfg.conditions.clone().unwrap_or_else(|| vec![ConditionId::A, ConditionId::B, ConditionId::C, ConditionId::D]);
    let spec = &cfg.cutoff;
    let th = &cfg.thresholds;
    let grid = cfg.probe_grid();
    let n_max = cfg.n_max.unwrap_or(DEFAULT_CONDITION_SCALES);
    let mut reports = Vec::new();
    let mut coupling_done = false;
    let mut c_done = false;
    let mut scaling = None;
    for id in ids {
        out.begin_stage(&format!("check {}", condition_name(id)));
        match id {
            ConditionId::A => reports.push(check_a(spec, &grid, th)?),
            ConditionId::B => reports.push(check_b(spec, &cfg.scale_list(), th)?),
            ConditionId::C | ConditionId::CPrime if !c_done => {
                c_done = true;
                reports.push(check_c(spec, n_max, grid.dist_lo, grid.dist_hi, grid.per_decade, &cfg.tail_scales, th)?);
            }
            ConditionId::D => {
                let sets = random_point_sets(spec, D_POINT_SETS, D_POINTS_PER_SET, cfg.seed);
                reports.push(check_d(spec, n_max, &sets, th)?);
            }
            ConditionId::EVar | ConditionId::EIncr if !coupling_done => {
                coupling_done = true;
                let b =
                    cfg.cutoff_b.as_ref().ok_or_else(|| Error::Config("cutoff_b: required for condition E".into()))?;
                let e = check_e(spec, b, &grid, th)?;
                reports.push(e.variance);
                reports.push(e.increment);
            }
            ConditionId::MaxScaling if scaling.is_none() => {
                let res = max_scaling(cfg)?;
                reports.push(res.report.clone());
                scaling = Some(res);
            }
            _ => {}
        }
    }
    out.begin_stage("write");
    if let Some(res) = &scaling {
        write_scaling(out, res)?;
    }
    write_reports(out, &reports)
}

#[derive(Serialize)]
struct ScalingSummary<'a> {
    scales: &'a [ScaleSup],
    ratio_spread: f64,
    trend_slope: f64,
    monotone_share: f64,
    step_shares: &'a [f64],
}

fn write_scaling(out: &mut OutputWriter, res: &MaxScalingResult) -> Result<()> {
    out.write_csv("max_scaling.csv", &MaxScalingResult::CSV_COLUMNS, &res.csv_rows())?;
    out.write_json(
        "max_scaling_summary.json",
        &ScalingSummary {
            scales: &res.scales,
            ratio_spread: res.ratio_spread,
            trend_slope: res.trend_slope,
            monotone_share: res.monotone_share,
            step_shares: &res.step_shares,
        },
    )
}

fn compare_cutoffs(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let b = cfg.cutoff_b.as_ref().ok_or_else(|| Error::Config("cutoff_b: required".into()))?;
    out.begin_stage("check E");
    let e = check_e(&cfg.cutoff, b, &cfg.probe_grid(), &cfg.thresholds)?;
    out.begin_stage("max scaling");
    let res = max_scaling(cfg)?;
    out.begin_stage("write");
    write_scaling(out, &res)?;
    write_reports(out, &[e.variance, e.increment, res.report])
}

fn condition_name(id: ConditionId) -> String {
    serde_json::to_value(id).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}
