//! Monte Carlo trend checks for chaos totals on a fine white-noise torus.

use lcfield::fields::{FieldGenerator, LatticeSpec, SpectralSampler};
use lcfield::gmc::martingale_trace;
use lcfield::kernels::CutoffSpec;
use lcfield::stats;

const N_MAX: usize = 10;

/// Per-replica totals Q_n for n = 0..=N_MAX at each parameter.
fn traces(params: &[f64], replicas: u64) -> Vec<Vec<Vec<f64>>> {
    let side = 1.0 / 32.0;
    let g = SpectralSampler::new(CutoffSpec::white_noise(2, 1.0).on_torus(side), LatticeSpec::new(256, side), N_MAX)
        .unwrap();
    let region = vec![true; g.lattice().len()];
    let mut out = vec![Vec::new(); params.len()];
    for r in 0..replicas {
        let field = g.sample(31, r);
        for (k, &a) in params.iter().enumerate() {
            out[k].push(martingale_trace(&field, a, &region).unwrap().masses);
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[test]
fn chaos_totals_degenerate_or_stay_bounded() {
    let t = traces(&[1.0, 3.0], 60);

    // a = 3 is beyond the square-integrable phase: the typical total collapses.
    let at = |n: usize| median(t[1].iter().map(|m| m[n]).collect());
    assert!(at(N_MAX) < 0.1 * at(1), "median Q_10 {} vs Q_1 {}", at(N_MAX), at(1));

    // a = 1 is inside it: the spread of the total does not blow up with n.
    let ns: Vec<f64> = (4..=N_MAX).map(|n| n as f64).collect();
    let log_var: Vec<f64> = (4..=N_MAX)
        .map(|n| {
            let q: Vec<f64> = t[0].iter().map(|m| m[n]).collect();
            let mean = stats::mean(&q);
            (q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (q.len() - 1) as f64).ln()
        })
        .collect();
    let slope = stats::linear_fit(&ns, &log_var).slope;
    assert!(slope <= 0.1, "log-variance slope {slope}");
}
