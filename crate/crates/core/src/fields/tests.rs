use super::*;
use crate::error::Error;
use crate::kernels::decomposition::efold_scales;
use crate::kernels::{self, kernel_g_semigroup, CutoffSpec, Mollifier};
use crate::stats;

fn white_noise_sampler(cells: usize, side: f64, n_max: usize) -> SpectralSampler {
    SpectralSampler::new(CutoffSpec::white_noise(2, 1.0).on_torus(side), LatticeSpec::new(cells, side), n_max).unwrap()
}

#[test]
fn empty_scale_list_gives_zero_field() {
    let s = white_noise_sampler(16, 4.0, 0);
    let f = s.sample(1, 0);
    assert_eq!(f.n_max(), 0);
    assert!(f.field(0).iter().all(|&v| v == 0.0));
}

#[test]
fn sampling_is_deterministic() {
    let s = white_noise_sampler(32, 4.0, 3);
    let a = s.sample(42, 5);
    let b = s.sample(42, 5);
    assert_eq!(a.increments, b.increments);
    let c = s.sample(42, 6);
    assert_ne!(a.increments, c.increments);
}

#[test]
fn spectral_fields_are_real_and_match_weight_variance() {
    // The packed imaginary part must be an exact second real field: check
    // the lattice average of Y^2 against the weight variance over many
    // replicas.
    let s = white_noise_sampler(64, 8.0, 3);
    let reps = 200;
    for k in 1..=3 {
        let mut acc = 0.0;
        for r in 0..reps {
            let f = s.sample(3, r);
            acc += f.increments[k - 1].iter().map(|v| v * v).sum::<f64>() / f.cells() as f64;
        }
        let emp = acc / reps as f64;
        let exact = s.variance_table().increments[k - 1].at(0);
        assert!((emp / exact - 1.0).abs() < 0.05, "k {k}: {emp} vs {exact}");
    }
}

#[test]
fn spectral_bias_is_small_on_fine_dual_lattice() {
    let s = white_noise_sampler(128, 16.0, 3);
    for (k, b) in s.discretization_bias().iter().enumerate() {
        assert!(b.abs() < 0.02, "scale {}: bias {b}", k + 1);
    }
}

#[test]
fn nyquist_refusal_suggests_cells() {
    let spec = CutoffSpec::white_noise(2, 1.0).on_torus(8.0);
    match SpectralSampler::new(spec, LatticeSpec::new(16, 8.0), 3) {
        Err(Error::Resolution { suggested_cells, .. }) => {
            assert!(SpectralSampler::new(spec, LatticeSpec::new(suggested_cells, 8.0), 3).is_ok());
        }
        other => panic!("expected refusal, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn mollified_refusal_and_acceptance() {
    let spec = CutoffSpec::mollified(2, 1.0, Mollifier::Gaussian).on_torus(16.0);
    assert!(matches!(SpectralSampler::new(spec, LatticeSpec::new(32, 16.0), 3), Err(Error::Resolution { .. })));
    assert!(SpectralSampler::new(spec, LatticeSpec::new(128, 16.0), 2).is_ok());
}

#[test]
fn nesting_identity_from_weights() {
    let wn = white_noise_sampler(64, 8.0, 3);
    let gram = GramSampler::new(CutoffSpec::massive_integral(2, 1.0), LatticeSpec::new(8, 1.0), 4).unwrap();
    let sine = SineSampler::new(LatticeSpec::interior(8, 0.2), efold_scales(4), 48, 0.2).unwrap();
    let gens: [&dyn FieldGenerator; 3] = [&wn, &gram, &sine];
    for g in gens {
        let n_max = g.n_max();
        for n1 in 1..=n_max {
            for n2 in 0..n1 {
                for cell in [0, 9, 27] {
                    let lhs = g.difference_variance(n1, n2, cell);
                    let v1 = g.covariance(n1, cell, n1, cell);
                    let v2 = if n2 == 0 { 0.0 } else { g.covariance(n2, cell, n2, cell) };
                    assert!((lhs - (v1 - v2)).abs() <= 1e-12 * v1.max(1.0), "{:?} {n1} {n2}", g.family());
                }
            }
        }
    }
}

#[test]
fn mollified_increments_are_not_nested() {
    let spec = CutoffSpec::mollified(2, 1.0, Mollifier::Gaussian).on_torus(16.0);
    let s = SpectralSampler::new(spec, LatticeSpec::new(128, 16.0), 2).unwrap();
    let lhs = s.difference_variance(2, 1, 0);
    let rhs = s.covariance(2, 0, 2, 0) - s.covariance(1, 0, 1, 0);
    assert!((lhs - rhs).abs() > 1e-3);
}

#[test]
fn sine_weights_reproduce_semigroup_kernel() {
    let lattice = LatticeSpec::interior(8, 0.2);
    let scales = efold_scales(3);
    let modes = 40;
    let s = SineSampler::new(lattice, scales.clone(), modes, 0.2).unwrap();
    for (i, j) in [(0, 0), (3, 17), (10, 63)] {
        for n in 1..=3 {
            let a = s.covariance(n, i, n, j);
            let b = kernel_g_semigroup(&lattice.centre(i), &lattice.centre(j), scales[n - 1], modes).unwrap();
            assert!((a - b).abs() < 1e-11 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
    // Per-cell table agrees with the mode sums.
    let v = s.variance_table().cumulative[2].at(20);
    assert!((v - s.covariance(3, 20, 3, 20)).abs() < 1e-11 * v);
}

#[test]
fn sine_sampler_refuses_too_few_modes() {
    let r = SineSampler::new(LatticeSpec::interior(8, 0.2), vec![1e-3], 10, 0.2);
    match r {
        Err(Error::Modes { required, .. }) => {
            assert!(SineSampler::new(LatticeSpec::interior(8, 0.2), vec![1e-3], required, 0.2).is_ok())
        }
        _ => panic!("expected mode refusal"),
    }
    assert!(SineSampler::new(LatticeSpec::new(8, 1.0), vec![0.1], 40, 0.2).is_err());
}

#[test]
fn gram_variance_is_scale_count() {
    let g = GramSampler::new(CutoffSpec::massive_integral(2, 1.0), LatticeSpec::new(8, 1.0), 5).unwrap();
    for r in g.clip_reports() {
        assert!(r.max_diagonal_change < 1e-8);
    }
    for n in 1..=5 {
        for cell in [0, 30, 63] {
            assert!((g.covariance(n, cell, n, cell) - n as f64).abs() < 1e-8);
        }
    }
}

#[test]
fn gram_single_point_is_normal() {
    let g = GramSampler::new(CutoffSpec::massive_integral(2, 1.0), LatticeSpec::new(8, 1.0), 4).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|r| g.sample(11, r).field(4)[27]).collect();
    let (_, p) = stats::ks_normal(&xs, 2.0);
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn increments_are_uncorrelated() {
    let s = white_noise_sampler(32, 4.0, 3);
    let reps = 10_000;
    let mut y1 = Vec::with_capacity(reps);
    let mut y2 = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let f = s.sample(5, r);
        y1.push(f.increments[0][100]);
        y2.push(f.increments[1][100]);
    }
    let (c, _) = stats::covariance_with_error(&y1, &y2);
    let corr = c / (stats::variance(&y1) * stats::variance(&y2)).sqrt();
    assert!(corr.abs() < 4.0 / (reps as f64).sqrt(), "corr {corr}");
}

#[test]
fn exact_sampler_cases() {
    let pts: Vec<[f64; 2]> = (0..5).map(|i| [i as f64 * 0.1, 0.0]).collect();
    let white = ExactSampler::new(|a, b| if a == b { 1.0 } else { 0.0 }, &pts).unwrap();
    let draws: Vec<f64> = (0..4000).flat_map(|r| white.sample(1, r)).collect();
    assert!((stats::variance(&draws) - 1.0).abs() < 5.0 * (2.0 / draws.len() as f64).sqrt());
    let single = ExactSampler::new(|_, _| 2.5, &pts[..1]).unwrap();
    let xs: Vec<f64> = (0..4000).map(|r| single.sample(2, r)[0]).collect();
    assert!(stats::ks_normal(&xs, 2.5f64.sqrt()).1 > 0.01);
    let bad = ExactSampler::new(|a, b| if a == b { 1.0 } else { -0.9 }, &pts);
    assert!(matches!(bad, Err(Error::NotPsd { .. })));
}

#[test]
fn exact_sampler_matches_integral_kernel() {
    let pts: Vec<[f64; 2]> = vec![[0.0, 0.0], [0.05, 0.0], [0.2, 0.1], [0.5, 0.5], [0.51, 0.5]];
    let eps = 0.05;
    let k = |a: &[f64; 2], b: &[f64; 2]| kernels::kernel_h(a, b, eps, 1.0).unwrap();
    let s = ExactSampler::new(k, &pts).unwrap();
    let draws: Vec<Vec<f64>> = (0..10_000).map(|r| s.sample(9, r)).collect();
    for i in 0..5 {
        for j in i..5 {
            let xi: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            let xj: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            let (c, se) = stats::covariance_with_error(&xi, &xj);
            let target = k(&pts[i], &pts[j]);
            assert!((c - target).abs() < 5.0 * se, "({i},{j}): {c} vs {target} (se {se})");
        }
    }
}

#[test]
fn snapshot_round_trip_header() {
    let s = white_noise_sampler(16, 4.0, 1);
    let f = s.sample(77, 0);
    let mut buf = Vec::new();
    snapshot::write_binary(&f, &mut buf).unwrap();
    assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 4 + 8 + 16 * 16 * 8);
    let back = snapshot::read_binary(&buf[..]).unwrap();
    assert_eq!(back.seed, 77);
    assert_eq!(back.increments, f.increments);
    assert!(snapshot::read_binary(&b"XXXX"[..]).is_err());
}

#[test]
fn stationary_covariance_matrix_matches_pairwise() {
    let s = white_noise_sampler(16, 2.0, 2);
    let q = s.covariance_matrix(2);
    for (i, j) in [(0, 0), (3, 200), (255, 17), (100, 101)] {
        assert!((q[i * 256 + j] - s.covariance(2, i, 2, j)).abs() < 1e-12);
    }
}
