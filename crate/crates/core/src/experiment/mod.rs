//! Experiment configs, validation and reproducible runs.
//!
//! A config is one JSON document. Its hash covers every field that affects
//! results (not the output location or thread count), and every output file
//! carries that hash so no table is separated from its provenance.

mod output;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use output::{OutputFile, OutputWriter, RunManifest, StageTiming};
pub use run::run;

use crate::conditions::{ConditionId, ProbeGrid, Thresholds};
use crate::error::{Error, ErrorCategory, Result};
use crate::fields::{FieldGenerator, GramSampler, LatticeSpec, SineSampler, SpectralSampler, MAX_GRAM_POINTS};
use crate::fractal::{FitWindow, ThickOptions};
use crate::kernels::decomposition::efold_scales;
use crate::kernels::{gff_default_modes, CutoffSpec, Family};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output root for relative output directories.
pub const ENV_OUTPUT_ROOT: &str = "LCFIELD_OUTPUT_ROOT";
/// Worker thread count when the config does not set one.
pub const ENV_THREADS: &str = "LCFIELD_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KernelTable,
    Sample,
    GmcTrace,
    ThickSpectrum,
    CheckConditions,
    CompareCutoffs,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KernelTable => "kernel-table",
            ExperimentKind::Sample => "sample",
            ExperimentKind::GmcTrace => "gmc-trace",
            ExperimentKind::ThickSpectrum => "thick-spectrum",
            ExperimentKind::CheckConditions => "check-conditions",
            ExperimentKind::CompareCutoffs => "compare-cutoffs",
        }
    }

    fn needs_lattice(self) -> bool {
        matches!(self, ExperimentKind::Sample | ExperimentKind::GmcTrace | ExperimentKind::ThickSpectrum)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub cutoff: CutoffSpec,
    /// Second family for compare-cutoffs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_b: Option<CutoffSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    /// Number of e-fold scales for samplers and scale decompositions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Explicit scale grid (kernel tables, condition B, max scaling).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    /// Thickness levels a, or chaos parameters gamma for gmc-trace.
    #[serde(default)]
    pub levels: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub thick: ThickOptions,
    #[serde(default)]
    pub fit_window: FitWindow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Vec<ConditionId>>,
    /// Pair-probe grid for conditions A, C and E; defaults depend on the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<ProbeGrid>,
    /// Scale indices N for the tail bound of condition C.
    #[serde(default = "default_tail_scales")]
    pub tail_scales: Vec<usize>,
    /// Region side for the max-scaling supremum.
    #[serde(default = "default_region_side")]
    pub region_side: f64,
    /// Sine modes per axis for the semigroup sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
}

fn default_tail_scales() -> Vec<usize> {
    vec![1, 2, 4, 6]
}

fn default_region_side() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Canonical JSON of the result-affecting fields.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.threads = None;
        serde_json::to_string_pretty(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn scale_list(&self) -> Vec<f64> {
        if let Some(s) = &self.scales {
            return s.clone();
        }
        match self.kind {
            ExperimentKind::KernelTable => (1..=6).map(|k| 10f64.powi(-k)).collect(),
            ExperimentKind::CheckConditions => vec![1e-2, 1e-3, 1e-4, 1e-5],
            ExperimentKind::CompareCutoffs => vec![1e-1, 1e-2, 1e-3, 1e-4],
            _ => efold_scales(self.n_max.unwrap_or(0)),
        }
    }

    pub fn radius_list(&self) -> Vec<f64> {
        self.radii.clone().unwrap_or_else(|| vec![0.0, 1e-3, 1e-2, 1e-1, 0.3])
    }

    pub fn level_list(&self) -> Vec<f64> {
        if self.levels.is_empty() {
            match self.kind {
                ExperimentKind::ThickSpectrum => vec![0.0, 0.5, 1.0, 1.5],
                _ => vec![1.0],
            }
        } else {
            self.levels.clone()
        }
    }

    /// Probe grid in use: the configured one, or a family default that fits
    /// the probe domain and keeps quadrature-backed families affordable.
    pub fn probe_grid(&self) -> ProbeGrid {
        if let Some(p) = self.probes {
            return p;
        }
        match self.cutoff.family {
            Family::Mollified => ProbeGrid { eps_lo: 1e-3, eps_hi: 1e-1, dist_lo: 1e-3, dist_hi: 0.1, per_decade: 8 },
            Family::GffSemigroup => {
                let m = self.cutoff.margin().unwrap_or(0.0);
                ProbeGrid { dist_hi: (0.5 - m).min(0.3), ..ProbeGrid::default() }
            }
            _ => ProbeGrid::default(),
        }
    }

    /// Every violated invariant that can be detected without running.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(format!("schema_version: expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if self.replicas < 1 {
            out.push("replicas: must be at least 1".into());
        }
        if self.threads == Some(0) {
            out.push("threads: must be at least 1".into());
        }
        out.extend(self.cutoff.violations().into_iter().map(|v| format!("cutoff: {v}")));
        if let Some(b) = &self.cutoff_b {
            out.extend(b.violations().into_iter().map(|v| format!("cutoff_b: {v}")));
        }
        if self.kind == ExperimentKind::CompareCutoffs && self.cutoff_b.is_none() {
            out.push("cutoff_b: required for compare-cutoffs".into());
        }
        if self.kind.needs_lattice() {
            match &self.lattice {
                None => out.push(format!("lattice: required for {}", self.kind.name())),
                Some(l) => out.extend(l.violations().into_iter().map(|v| format!("lattice: {v}"))),
            }
            if self.n_max.is_none() && self.scales.is_none() {
                out.push(format!("n_max: required for {}", self.kind.name()));
            }
        }
        if self.n_max == Some(0) {
            out.push("n_max: must be at least 1".into());
        }
        let scales = self.scale_list();
        if scales.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            out.push("scales: must be positive and finite".into());
        }
        if self.kind != ExperimentKind::CheckConditions
            && self.kind != ExperimentKind::CompareCutoffs
            && scales.windows(2).any(|w| w[1] >= w[0])
        {
            out.push("scales: must be strictly decreasing".into());
        }
        if self.level_list().iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            out.push("levels: must be finite and nonnegative".into());
        }
        if let Some(r) = &self.radii {
            if r.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                out.push("radii: must be finite and nonnegative".into());
            }
        }
        if let Err(e) = self.thick.validate() {
            out.push(format!("thick: {e}"));
        }
        let p = &self.probe_grid();
        if !(p.eps_lo > 0.0 && p.eps_hi >= p.eps_lo && p.dist_lo > 0.0 && p.dist_hi >= p.dist_lo && p.per_decade > 0) {
            out.push("probes: need 0 < eps_lo <= eps_hi, 0 < dist_lo <= dist_hi and per_decade >= 1".into());
        }
        if matches!(self.kind, ExperimentKind::CheckConditions) {
            if let Some(m) = self.cutoff.margin() {
                if 0.5 + p.dist_hi > 1.0 - m {
                    out.push(format!("probes: dist_hi must be at most {} inside the margin {m}", 0.5 - m));
                }
            }
            let runs_b = self.conditions.as_ref().map_or(true, |c| c.contains(&ConditionId::B));
            if runs_b && scales.iter().any(|&e| e > 1e-2) {
                out.push("scales: condition B needs scales in (0, 1e-2]".into());
            }
        }
        let needs_pair = self.kind == ExperimentKind::CompareCutoffs
            || self
                .conditions
                .iter()
                .flatten()
                .any(|c| matches!(c, ConditionId::EVar | ConditionId::EIncr | ConditionId::MaxScaling));
        if needs_pair && self.cutoff_b.is_none() && self.kind != ExperimentKind::CompareCutoffs {
            out.push("cutoff_b: required for conditions E and max scaling".into());
        }
        if self.kind == ExperimentKind::CompareCutoffs
            || self.conditions.iter().flatten().any(|c| *c == ConditionId::MaxScaling)
        {
            if scales.len() < 3 {
                out.push("scales: max scaling needs at least 3 scales".into());
            }
            if !(self.region_side > 0.0) {
                out.push("region_side: must be positive".into());
            }
        }
        out
    }

    /// Builds the sampler for lattice experiments. Construction performs the
    /// resolution and mode-count checks.
    pub fn generator(&self) -> Result<Box<dyn FieldGenerator>> {
        let lattice = self.lattice.ok_or_else(|| Error::Config("lattice: required".into()))?;
        let scales = self.scale_list();
        if scales.is_empty() {
            return Err(Error::Config("n_max: required".into()));
        }
        Ok(match self.cutoff.family {
            Family::WhiteNoise | Family::Mollified => {
                Box::new(SpectralSampler::with_scales(self.cutoff, lattice, scales)?)
            }
            Family::MassiveIntegral => Box::new(GramSampler::with_scales(self.cutoff, lattice, scales)?),
            Family::GffSemigroup => {
                let margin = self.cutoff.margin().unwrap_or(0.0);
                let modes = self.modes.unwrap_or_else(|| gff_default_modes(*scales.last().expect("nonempty")));
                Box::new(SineSampler::new(lattice, scales, modes, margin)?)
            }
        })
    }

    /// Checks that need sampler construction, with the category of the
    /// first refusal.
    fn feasibility(&self) -> Option<(ErrorCategory, String)> {
        if !self.kind.needs_lattice() {
            return None;
        }
        match (self.cutoff.family, self.lattice) {
            (Family::MassiveIntegral, Some(l)) if l.len() > MAX_GRAM_POINTS => Some((
                ErrorCategory::Feasibility,
                format!("lattice: {} points exceed the dense factorization limit of {MAX_GRAM_POINTS}", l.len()),
            )),
            // Dense factorization is the run itself; only the size is checked.
            (Family::MassiveIntegral, _) => None,
            _ => self.generator().err().map(|e| (e.category(), format!("feasibility: {e}"))),
        }
    }
}

/// Outcome of validating a config file without running it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub path: String,
    pub config_hash: Option<String>,
    /// "config" or "feasibility" when there are violations.
    pub category: Option<&'static str>,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        match self.category {
            None => 0,
            Some("feasibility") => ErrorCategory::Feasibility.exit_code(),
            Some("numerical") => ErrorCategory::Numerical.exit_code(),
            Some(_) => ErrorCategory::Config.exit_code(),
        }
    }
}

/// Parses and checks a config file. Unreadable files are an error; every
/// other problem is listed as a violation.
pub fn validate(path: &Path) -> Result<ValidationReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(validate_text(&text, &path.display().to_string()))
}

pub fn validate_text(text: &str, path: &str) -> ValidationReport {
    let config = ErrorCategory::Config.as_str();
    match ExperimentConfig::from_json(text) {
        Err(e) => ValidationReport {
            path: path.into(),
            config_hash: None,
            category: Some(config),
            violations: vec![e.to_string()],
        },
        Ok(cfg) => validate_config(&cfg, path),
    }
}

pub fn validate_config(cfg: &ExperimentConfig, path: &str) -> ValidationReport {
    let mut violations = cfg.violations();
    let mut category = (!violations.is_empty()).then_some(ErrorCategory::Config.as_str());
    if violations.is_empty() {
        if let Some((cat, msg)) = cfg.feasibility() {
            violations.push(msg);
            category = Some(cat.as_str());
        }
    }
    ValidationReport { path: path.into(), config_hash: Some(cfg.hash()), category, violations }
}

/// Output directory for a run: explicit, from the config, or derived from
/// the config hash; relative paths resolve against the output root.
pub fn output_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    let dir = explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.kind.name(), &cfg.hash()[..12])));
    if dir.is_absolute() {
        dir
    } else {
        std::env::var_os(ENV_OUTPUT_ROOT).map(PathBuf::from).unwrap_or_default().join(dir)
    }
}

/// Thread count from the config, then the environment.
pub fn thread_count(cfg: &ExperimentConfig) -> Result<Option<usize>> {
    if let Some(t) = cfg.threads {
        return Ok(Some(t));
    }
    match std::env::var(ENV_THREADS) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{ENV_THREADS} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}
