//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria backed by experiment configs run each config twice; the digest
//! comparison of those double runs is the determinism criterion. Set
//! `ACCEPTANCE_ONLY=1,4` to run a subset while iterating. Runs without the
//! libtest harness so the report is printed under plain `cargo test`.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tempfile::TempDir;

use lcfield::experiment::{self, ExperimentConfig, RunManifest};
use lcfield::fields::{FieldGenerator, GramSampler, LatticeSpec, SineSampler, SpectralSampler};
use lcfield::fractal::{box_dimension, cantor_dust, full_square, segment};
use lcfield::gmc::second_moment_gram;
use lcfield::kernels::decomposition::efold_scales;
use lcfield::kernels::{self, gff_default_modes, CutoffSpec, Mollifier};
use lcfield::stats;

/// One checked part of a criterion. `known_limit` marks parts that cannot
/// be met at desk scale; they are reported but do not fail the test run.
struct Part {
    label: String,
    pass: bool,
    known_limit: bool,
}

struct Criterion {
    id: u32,
    name: &'static str,
    parts: Vec<Part>,
}

impl Criterion {
    fn new(id: u32, name: &'static str) -> Self {
        Criterion { id, name, parts: Vec::new() }
    }

    fn check(&mut self, pass: bool, label: impl Into<String>) {
        self.parts.push(Part { label: label.into(), pass, known_limit: false });
    }

    fn check_known_limit(&mut self, pass: bool, label: impl Into<String>) {
        self.parts.push(Part { label: label.into(), pass, known_limit: true });
    }

    fn passed(&self) -> bool {
        self.parts.iter().all(|p| p.pass)
    }

    fn report(&self) {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        println!("{verdict} [{}] {}", self.id, self.name);
        for p in &self.parts {
            let tag = match (p.pass, p.known_limit) {
                (true, _) => "ok",
                (false, true) => "FAIL (known desk-scale limit)",
                (false, false) => "FAIL",
            };
            println!("    {tag}: {}", p.label);
        }
    }
}

/// Double runs of every config, for the determinism criterion.
#[derive(Default)]
struct Runs {
    dirs: Vec<TempDir>,
    comparisons: Vec<(String, bool)>,
}

impl Runs {
    /// Runs the config twice, returns the first output directory.
    fn run(&mut self, label: &str, config: Value) -> PathBuf {
        let cfg = ExperimentConfig::from_json(&config.to_string()).expect("acceptance config parses");
        let violations = cfg.violations();
        assert!(violations.is_empty(), "{label}: {violations:?}");
        let mut manifests: Vec<RunManifest> = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            manifests.push(experiment::run(&cfg, dir.path()).unwrap_or_else(|e| panic!("{label}: {e}")));
            self.dirs.push(dir);
        }
        self.comparisons.push((label.to_string(), manifests[0].outputs == manifests[1].outputs));
        self.dirs[self.dirs.len() - 2].path().to_path_buf()
    }
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn read_json(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["data"].clone()
}

fn torus(family: &str, side: f64) -> Value {
    json!({"family": family, "domain": {"kind": "torus", "side": side}})
}

fn mollified(mollifier: &str, side: f64) -> Value {
    json!({"family": "mollified", "mollifier": mollifier, "domain": {"kind": "torus", "side": side}})
}

fn gff(margin: f64) -> Value {
    json!({"family": "gff_semigroup", "domain": {"kind": "unit_square", "margin": margin}})
}

fn criterion_1(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::new(1, "kernel exactness");
    let scales: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
    let dir = runs.run(
        "kernel table",
        json!({"schema_version": 1, "kind": "kernel-table", "cutoff": torus("massive_integral", 1.0),
               "scales": scales, "radii": [0.0, 0.01, 0.1], "replicas": 1, "seed": 0}),
    );
    let diag_err = data_rows(&dir.join("kernel_table.csv"))
        .iter()
        .filter(|r| r[4].parse::<f64>().unwrap() == 0.0)
        .map(|r| (r[5].parse::<f64>().unwrap() + r[3].parse::<f64>().unwrap().ln()).abs())
        .fold(0.0, f64::max);
    c.check(diag_err <= 1e-12, format!("max |H_eps(x,x) + log eps| = {diag_err:.2e} (tol 1e-12)"));

    // Closed form m z K1(m z) against direct quadrature of the defining integral.
    let mut km_err: f64 = 0.0;
    for i in 0..=80 {
        let z = 1e-3 * (20.0f64 / 1e-3).powf(i as f64 / 80.0);
        km_err = km_err.max((kernels::k_m(z, 1.0).unwrap() - kernels::k_m_quadrature(z, 1.0).unwrap()).abs());
    }
    c.check(km_err <= 1e-8, format!("max |k_m closed - quadrature| on [1e-3, 20] = {km_err:.2e} (tol 1e-8)"));

    let wn = CutoffSpec::white_noise(2, 1.0);
    let mut var_err: f64 = 0.0;
    for &eps in &scales {
        let oracle = 0.5 * (1.0 + eps.powi(-2)).ln();
        var_err = var_err.max((kernels::var_g(eps, &wn).unwrap() - oracle).abs());
    }
    c.check(var_err <= 1e-10, format!("max |varG_WN - log(1 + eps^-2)/2| = {var_err:.2e} (tol 1e-10)"));
    c
}

fn criterion_2(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::new(2, "condition B at eps = 1e-4 for all families");
    let families = [
        ("white_noise", torus("white_noise", 1.0), false),
        ("mollified gaussian", mollified("gaussian", 1.0), false),
        ("mollified sphere_average", mollified("sphere_average", 1.0), false),
        ("mollified sharp_cutoff", mollified("sharp_cutoff", 1.0), false),
        ("massive_integral", torus("massive_integral", 1.0), false),
        ("gff_semigroup", gff(0.2), true),
    ];
    for (label, cutoff, known_limit) in families {
        let dir = runs.run(
            &format!("condition B {label}"),
            json!({"schema_version": 1, "kind": "check-conditions", "cutoff": cutoff, "conditions": ["B"],
                   "scales": [1e-4], "replicas": 1, "seed": 0}),
        );
        let report = &read_json(&dir.join("conditions.json"))[0];
        let dev = report["constants"]["max_deviation"].as_f64().unwrap();
        let mut pass = dev <= 0.05;
        if label == "massive_integral" {
            pass &= dev == 0.0;
        }
        let text = format!("{label}: |varG/(-log eps) - 1| = {dev:.3e} (tol 0.05)");
        if known_limit {
            c.check_known_limit(pass, text);
        } else {
            c.check(pass, text);
        }
    }
    c
}

fn criterion_3() -> Criterion {
    let mut c = Criterion::new(3, "sign dichotomy of K_eps and H_eps");
    let wn = CutoffSpec::white_noise(2, 1.0);
    let mut min_k = f64::INFINITY;
    let mut at = (0.0, 0.0);
    let mut min_h = f64::INFINITY;
    for &eps in &[1e-1, 1e-2, 1e-3] {
        for i in 0..=60 {
            let r = 1e-3 * (1e4f64).powf(i as f64 / 60.0);
            let k = kernels::kernel_k(r, eps, &wn).unwrap();
            if k < min_k {
                min_k = k;
                at = (r, eps);
            }
            min_h = min_h.min(kernels::kernel_h(&[0.0, 0.0], &[r, 0.0], eps, 1.0).unwrap());
        }
    }
    c.check(min_k < -1e-6, format!("min K_eps = {min_k:.3e} at r = {:.3e}, eps = {:e}", at.0, at.1));
    c.check(min_h >= -1e-12, format!("min H_eps = {min_h:.3e} (>= -1e-12)"));
    c
}

/// Empirical covariance on five lattice cells against the kernel module,
/// in units of the CLT standard error.
fn probe_z_score(generator: &dyn FieldGenerator, kernel: impl Fn([f64; 2], [f64; 2]) -> f64, cells: &[usize]) -> f64 {
    let reps = 10_000u64;
    let n = generator.n_max();
    let lat = *generator.lattice();
    let samples: Vec<Vec<f64>> = (0..reps)
        .map(|r| {
            let f = generator.sample(17, r);
            let x = f.field(n);
            cells.iter().map(|&i| x[i]).collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..cells.len() {
        for b in a..cells.len() {
            let xa: Vec<f64> = samples.iter().map(|s| s[a]).collect();
            let xb: Vec<f64> = samples.iter().map(|s| s[b]).collect();
            let (cov, se) = stats::covariance_with_error(&xa, &xb);
            let exact = kernel(lat.centre(cells[a]), lat.centre(cells[b]));
            worst = worst.max((cov - exact).abs() / se);
        }
    }
    worst
}

/// Largest |Var(X_n1 - X_n2) - (Var X_n1 - Var X_n2)| over scale pairs and cells.
fn nesting_defect(generator: &dyn FieldGenerator) -> f64 {
    let n_max = generator.n_max();
    let mut worst: f64 = 0.0;
    for i in [0, generator.lattice().len() / 2] {
        for n1 in 1..=n_max {
            for n2 in 0..n1 {
                let v1 = generator.covariance(n1, i, n1, i);
                let v2 = if n2 == 0 { 0.0 } else { generator.covariance(n2, i, n2, i) };
                worst = worst.max((generator.difference_variance(n1, n2, i) - (v1 - v2)).abs() / v1);
            }
        }
    }
    worst
}

fn criterion_4(determinism: &mut Vec<(String, bool)>) -> Criterion {
    let mut c = Criterion::new(4, "sampler fidelity");
    let wn_spec = CutoffSpec::white_noise(2, 1.0).on_torus(16.0);
    let wn = SpectralSampler::new(wn_spec, LatticeSpec::new(128, 16.0), 3).unwrap();
    let moll_spec = CutoffSpec::mollified(2, 1.0, Mollifier::Gaussian).on_torus(16.0);
    let moll = SpectralSampler::new(moll_spec, LatticeSpec::new(128, 16.0), 2).unwrap();
    let mi_spec = CutoffSpec::massive_integral(2, 1.0);
    let mi = GramSampler::new(mi_spec, LatticeSpec::new(8, 1.0), 3).unwrap();
    let gff_spec = CutoffSpec::gff_semigroup(0.2);
    let gff_scales = efold_scales(3);
    let gff =
        SineSampler::new(LatticeSpec::interior(8, 0.2), gff_scales.clone(), gff_default_modes(gff_scales[2]), 0.2)
            .unwrap();

    let idx = |l: &LatticeSpec, pts: &[(usize, usize)]| pts.iter().map(|&(i, j)| l.index(i, j)).collect::<Vec<_>>();
    let spectral_cells = idx(wn.lattice(), &[(0, 0), (0, 1), (2, 0), (3, 3), (8, 0)]);
    let small_cells = idx(mi.lattice(), &[(0, 0), (0, 1), (2, 2), (4, 1), (7, 7)]);

    let cases: [(&str, &dyn FieldGenerator, CutoffSpec, &Vec<usize>); 4] = [
        ("white_noise", &wn, wn_spec, &spectral_cells),
        ("mollified gaussian", &moll, moll_spec, &spectral_cells),
        ("massive_integral", &mi, mi_spec, &small_cells),
        ("gff_semigroup", &gff, gff_spec, &small_cells),
    ];
    for (label, generator, spec, cells) in cases {
        let eps = *generator.scales().last().unwrap();
        let z = probe_z_score(generator, |x, y| kernels::covariance(&spec, &x, &y, eps).unwrap(), cells);
        c.check(z <= 5.0, format!("{label}: worst |cov - kernel| = {z:.2} standard errors (tol 5)"));
        let again = generator.sample(17, 3).increments == generator.sample(17, 3).increments;
        determinism.push((format!("sampler redraw {label}"), again));
    }
    for (label, generator) in
        [("white_noise", &wn as &dyn FieldGenerator), ("massive_integral", &mi), ("gff_semigroup", &gff)]
    {
        let d = nesting_defect(generator);
        c.check(d <= 1e-12, format!("{label}: nesting identity relative defect {d:.2e}"));
    }
    c.check(true, "mollified gaussian: nesting identity not applicable, increments are correlated across scales");
    c
}

fn criterion_5(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::new(5, "GMC martingale");
    let lattice = json!({"cells": 32, "side": 1.0});
    let dir = runs.run(
        "gmc white noise 32x32",
        json!({"schema_version": 1, "kind": "gmc-trace", "cutoff": torus("white_noise", 1.0), "lattice": lattice,
               "n_max": 4, "levels": [1.0], "replicas": 10000, "seed": 21}),
    );
    let summary = &read_json(&dir.join("summary.json"))[0];
    let z = summary["z_score"].as_f64().unwrap();
    c.check(z.abs() <= 5.0, format!("white noise a = 1: mean total mass z-score {z:.2} (tol 5)"));
    let defect = summary["max_conditional_defect"].as_f64().unwrap();
    c.check(defect <= 1e-12, format!("white noise: conditional identity defect {defect:.2e}"));

    // Second moment of the terminal total mass against the Gram double sum.
    let finals: Vec<f64> = data_rows(&dir.join("gmc_trace.csv"))
        .iter()
        .filter(|r| r[1] == "4")
        .map(|r| r[2].parse::<f64>().unwrap().powi(2))
        .collect();
    let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    let exact = second_moment_gram(cfg.generator().unwrap().as_ref(), 4, 1.0, &vec![true; 1024]).unwrap();
    let z2 = (stats::mean(&finals) - exact) / stats::std_error(&finals);
    c.check(
        z2.abs() <= 5.0,
        format!("L2 Gram identity: E[Q^2] {:.5} vs {exact:.5}, z = {z2:.2}", stats::mean(&finals)),
    );

    for (label, cutoff, lattice) in [
        ("massive_integral", torus("massive_integral", 1.0), json!({"cells": 8, "side": 1.0})),
        ("gff_semigroup", gff(0.2), json!({"cells": 8, "side": 0.6, "offset": [0.2, 0.2]})),
    ] {
        let dir = runs.run(
            &format!("gmc {label}"),
            json!({"schema_version": 1, "kind": "gmc-trace", "cutoff": cutoff, "lattice": lattice,
                   "n_max": 5, "levels": [1.0], "replicas": 50, "seed": 4}),
        );
        let defect = read_json(&dir.join("summary.json"))[0]["max_conditional_defect"].as_f64().unwrap();
        c.check(defect <= 1e-12, format!("{label}: conditional identity defect {defect:.2e}"));
    }
    c
}

fn criteria_6_7(runs: &mut Runs) -> (Criterion, Criterion) {
    let mut c6 = Criterion::new(6, "thick-point spectrum");
    let mut c7 = Criterion::new(7, "emptiness above the threshold");
    let side = 0.125;
    let dir = runs.run(
        "thick spectrum 1024",
        json!({"schema_version": 1, "kind": "thick-spectrum", "cutoff": torus("white_noise", side),
               "lattice": {"cells": 1024, "side": side}, "n_max": 10,
               "levels": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 3.0], "replicas": 100, "seed": 2024}),
    );
    let summary = read_json(&dir.join("summary.json"));
    let points = summary["spectrum"]["points"].as_array().unwrap();
    let d_hat =
        |a: f64| points.iter().find(|p| p["a"].as_f64() == Some(a)).and_then(|p| p["fit"]["verdict"]["slope"].as_f64());
    let d0 = d_hat(0.0).unwrap_or(f64::NAN);
    let d1 = d_hat(1.0).unwrap_or(f64::NAN);
    c6.check((d0 - 2.0).abs() <= 0.1, format!("d_hat(0) = {d0:.4} (2 +- 0.1)"));
    c6.check((d1 - 1.5).abs() <= 0.3, format!("d_hat(1) = {d1:.4} (1.5 +- 0.3)"));
    let quad = summary["spectrum"]["quadratic"][2].as_f64().unwrap_or(f64::NAN);
    c6.check((-0.75..=-0.25).contains(&quad), format!("quadratic coefficient {quad:.4} in [-0.75, -0.25]"));

    let empty = summary["emptiness"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["a"].as_f64() == Some(3.0))
        .map(|e| (e["empty_replicas"].as_u64().unwrap(), e["replicas"].as_u64().unwrap(), e["n"].as_u64().unwrap()))
        .unwrap();
    c7.check(
        empty.0 >= 95 && empty.2 == 10,
        format!("a = 3: |A_{}| = 0 in {} of {} replicas (need 95)", empty.2, empty.0, empty.1),
    );
    (c6, c7)
}

fn criterion_8(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::new(8, "rooted thickness");
    let side = 1.0 / 32.0;
    let dir = runs.run(
        "rooted thickness",
        json!({"schema_version": 1, "kind": "gmc-trace", "cutoff": torus("white_noise", side),
               "lattice": {"cells": 256, "side": side}, "n_max": 10, "levels": [1.0], "replicas": 200, "seed": 8}),
    );
    let mean = read_json(&dir.join("summary.json"))[0]["pooled_rooted_mean"].as_f64().unwrap();
    c.check(
        (0.7..=1.3).contains(&mean),
        format!("a = 1, n = 10: GMC-weighted mean of X_n/n = {mean:.4} in [0.7, 1.3]"),
    );
    c
}

fn criterion_9(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::new(9, "coupled white noise vs Gaussian mollifier");
    let dir = runs.run(
        "compare cutoffs",
        json!({"schema_version": 1, "kind": "compare-cutoffs", "cutoff": torus("white_noise", 1.0),
               "cutoff_b": mollified("gaussian", 1.0), "scales": [1e-1, 1e-2, 1e-3, 1e-4],
               "region_side": 1.0, "replicas": 200, "seed": 99}),
    );
    let reports = read_json(&dir.join("conditions.json"));
    let var = &reports[0];
    let sup_var = var["constants"]["sup_var"].as_f64().unwrap();
    let slope = var["constants"]["trend_slope"].as_f64().unwrap();
    c.check(sup_var.is_finite() && sup_var < 1e3, format!("sup Var Z_eps over [1e-4, 1e-1] = {sup_var:.5}"));
    c.check(slope.abs() <= 0.02, format!("Var Z_eps trend slope vs -log eps = {slope:.2e} (tol 0.02)"));

    let scaling = read_json(&dir.join("max_scaling_summary.json"));
    let spread = scaling["ratio_spread"].as_f64().unwrap();
    let ratios: Vec<String> =
        scaling["scales"].as_array().unwrap().iter().map(|s| format!("{:.3}", s["ratio"].as_f64().unwrap())).collect();
    c.check(spread < 0.25, format!("E[sup Z]/sqrt(-log eps) = [{}], spread {spread:.3} (< 0.25)", ratios.join(", ")));
    let share = scaling["monotone_share"].as_f64().unwrap();
    c.check_known_limit(
        share >= 0.9,
        format!("sup Z/(-log eps) decreasing in {:.0}% of replicas (need 90%)", 100.0 * share),
    );
    c
}

fn criterion_10() -> Criterion {
    let mut c = Criterion::new(10, "box-counting calibration");
    let cells = 3usize.pow(7);
    let boxes: Vec<usize> = (1..=7).map(|k| 3usize.pow(7 - k)).collect();
    let fixtures = [
        ("square", full_square(cells), 2.0),
        ("segment", segment(cells), 1.0),
        ("Cantor dust", cantor_dust(7), 2.0 * 2f64.ln() / 3f64.ln()),
    ];
    for (label, mask, exact) in fixtures {
        let slope = box_dimension(&mask, cells, &boxes).unwrap().slope;
        c.check((slope - exact).abs() <= 0.05, format!("{label}: {slope:.4} vs {exact:.4}"));
    }
    c
}

fn selected(id: u32) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        Err(_) => true,
    }
}

fn main() {
    let mut runs = Runs::default();
    let mut redraws = Vec::new();
    let mut criteria = Vec::new();
    if selected(1) {
        criteria.push(criterion_1(&mut runs));
    }
    if selected(2) {
        criteria.push(criterion_2(&mut runs));
    }
    if selected(3) {
        criteria.push(criterion_3());
    }
    if selected(4) {
        criteria.push(criterion_4(&mut redraws));
    }
    if selected(5) {
        criteria.push(criterion_5(&mut runs));
    }
    if selected(6) || selected(7) {
        let (c6, c7) = criteria_6_7(&mut runs);
        criteria.push(c6);
        criteria.push(c7);
    }
    if selected(8) {
        criteria.push(criterion_8(&mut runs));
    }
    if selected(9) {
        criteria.push(criterion_9(&mut runs));
    }
    if selected(10) {
        criteria.push(criterion_10());
    }
    if selected(11) {
        let mut c = Criterion::new(11, "determinism of double runs");
        for (label, same) in runs.comparisons.iter().chain(&redraws) {
            c.check(*same, format!("{label}: identical output digests"));
        }
        criteria.push(c);
    }

    for c in &criteria {
        c.report();
    }
    let unexpected: Vec<String> = criteria
        .iter()
        .flat_map(|c| {
            c.parts.iter().filter(|p| !p.pass && !p.known_limit).map(move |p| format!("[{}] {}", c.id, p.label))
        })
        .collect();
    let passed = criteria.iter().filter(|c| c.passed()).count();
    println!("acceptance: {passed} of {} criteria pass, {} unexpected failures", criteria.len(), unexpected.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:#?}");
        std::process::exit(1);
    }
}
