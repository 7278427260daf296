//! `lcfield`: runs experiments from a JSON config, with flags overriding
//! config-file values.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use lcfield::experiment::{self, ExperimentConfig, ExperimentKind};
use lcfield::Error;

#[derive(Parser)]
#[command(name = "lcfield", version, about = "Log-correlated field cut-offs, chaos and thick points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate covariance kernels over scales and distances.
    Kernel(RunArgs),
    /// Draw multiscale fields and write snapshots.
    Sample(RunArgs),
    /// Trace chaos total masses and rooted thickness.
    Gmc(RunArgs),
    /// Count thick points and fit the dimension spectrum.
    Thick(RunArgs),
    /// Audit the sufficient conditions for one cut-off family.
    Check(RunArgs),
    /// Compare two coupled spectral cut-offs.
    Compare(RunArgs),
    /// Check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags below take precedence over its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory; relative paths resolve against LCFIELD_OUTPUT_ROOT.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// white_noise, mollified, massive_integral or gff_semigroup.
    #[arg(long)]
    family: Option<String>,
    /// gaussian, sphere_average or sharp_cutoff.
    #[arg(long)]
    mollifier: Option<String>,
    #[arg(long)]
    mass: Option<f64>,
    /// Unit-square domain with this interior margin.
    #[arg(long, conflicts_with = "torus_side")]
    margin: Option<f64>,
    /// Periodic domain of this side.
    #[arg(long)]
    torus_side: Option<f64>,
    /// Second family for `compare`.
    #[arg(long)]
    family_b: Option<String>,
    #[arg(long)]
    mollifier_b: Option<String>,
    /// Lattice cells per axis.
    #[arg(long)]
    cells: Option<usize>,
    /// Lattice side length.
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Thickness levels, or chaos parameters for `gmc`.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Condition ids for `check`, e.g. A,B,C,D.
    #[arg(long, value_delimiter = ',')]
    conditions: Option<Vec<String>>,
    #[arg(long)]
    region_side: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
}

fn object(v: &mut Value) -> &mut Map<String, Value> {
    if !v.is_object() {
        *v = json!({});
    }
    v.as_object_mut().expect("object")
}

fn set<T: serde::Serialize>(map: &mut Map<String, Value>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        map.insert(key.into(), serde_json::to_value(v).expect("flag value serializes"));
    }
}

/// Applies family flags to a cutoff object, filling a domain when absent.
fn patch_cutoff(
    slot: &mut Value,
    family: &Option<String>,
    mollifier: &Option<String>,
    args: &RunArgs,
    lattice_side: Option<f64>,
) {
    let had = slot.is_object();
    if !had && family.is_none() {
        return;
    }
    let c = object(slot);
    set(c, "family", family);
    set(c, "mollifier", mollifier);
    set(c, "mass", &args.mass);
    if let Some(m) = args.margin {
        c.insert("domain".into(), json!({"kind": "unit_square", "margin": m}));
    } else if let Some(s) = args.torus_side {
        c.insert("domain".into(), json!({"kind": "torus", "side": s}));
    } else if !c.contains_key("domain") {
        let domain = if c.get("family").and_then(Value::as_str) == Some("gff_semigroup") {
            json!({"kind": "unit_square", "margin": 0.1})
        } else {
            json!({"kind": "torus", "side": lattice_side.unwrap_or(1.0)})
        };
        c.insert("domain".into(), domain);
    }
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut value = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => json!({"schema_version": experiment::SCHEMA_VERSION}),
    };
    let kind_name = serde_json::to_value(kind)?;
    let map = object(&mut value);
    match map.get("kind") {
        Some(k) if *k != kind_name => {
            return Err(Error::Usage(format!("config kind {k} does not match subcommand kind {kind_name}")))
        }
        _ => {
            map.insert("kind".into(), kind_name);
        }
    }
    set(map, "seed", &args.seed);
    set(map, "replicas", &args.replicas);
    set(map, "output", &args.output);
    set(map, "threads", &args.threads);
    set(map, "n_max", &args.n_max);
    set(map, "scales", &args.scales);
    set(map, "radii", &args.radii);
    set(map, "levels", &args.levels);
    set(map, "conditions", &args.conditions);
    set(map, "region_side", &args.region_side);
    set(map, "modes", &args.modes);
    if args.cells.is_some() || args.side.is_some() {
        let l = object(map.entry("lattice").or_insert_with(|| json!({"side": 1.0})));
        set(l, "cells", &args.cells);
        set(l, "side", &args.side);
    }
    let lattice_side = map.get("lattice").and_then(|l| l.get("side")).and_then(Value::as_f64);
    patch_cutoff(map.entry("cutoff").or_insert(Value::Null), &args.family, &args.mollifier, args, lattice_side);
    if map.get("cutoff").is_some_and(Value::is_null) {
        map.remove("cutoff");
    }
    if args.family_b.is_some() || args.mollifier_b.is_some() {
        let slot = map.entry("cutoff_b").or_insert(Value::Null);
        patch_cutoff(slot, &args.family_b, &args.mollifier_b, args, lattice_side);
        if slot.is_null() {
            map.remove("cutoff_b");
        }
    }
    // Round-trip through text so schema errors report field names.
    ExperimentConfig::from_json(&serde_json::to_string_pretty(&value)?)
}

fn fail(e: &Error) -> ExitCode {
    let category = e.category();
    eprintln!("{}", json!({"error": category.as_str(), "message": e.to_string()}));
    ExitCode::from(category.exit_code() as u8)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), Error> {
    let cfg = build_config(kind, args)?;
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    let dir = experiment::output_dir(&cfg, None);
    let manifest = experiment::run(&cfg, &dir)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Validate { config } => {
            return match experiment::validate(config) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => fail(&e),
            };
        }
        Command::Kernel(a) => (ExperimentKind::KernelTable, a),
        Command::Sample(a) => (ExperimentKind::Sample, a),
        Command::Gmc(a) => (ExperimentKind::GmcTrace, a),
        Command::Thick(a) => (ExperimentKind::ThickSpectrum, a),
        Command::Check(a) => (ExperimentKind::CheckConditions, a),
        Command::Compare(a) => (ExperimentKind::CompareCutoffs, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
