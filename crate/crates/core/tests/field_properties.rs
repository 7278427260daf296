use proptest::prelude::*;

use lcfield::fields::{FieldGenerator, GramSampler, LatticeSpec, SineSampler, SpectralSampler};
use lcfield::kernels::decomposition::efold_scales;
use lcfield::kernels::{gff_default_modes, CutoffSpec};
use lcfield::stats;

fn generators() -> Vec<Box<dyn FieldGenerator>> {
    let scales = efold_scales(3);
    vec![
        Box::new(
            SpectralSampler::new(CutoffSpec::white_noise(2, 1.0).on_torus(1.0), LatticeSpec::new(16, 1.0), 2).unwrap(),
        ),
        Box::new(GramSampler::new(CutoffSpec::massive_integral(2, 1.0), LatticeSpec::new(8, 1.0), 3).unwrap()),
        Box::new(
            SineSampler::new(LatticeSpec::interior(8, 0.2), scales.clone(), gff_default_modes(scales[2]), 0.2).unwrap(),
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_gives_identical_fields(seed in any::<u64>(), replica in 0u64..1000) {
        for g in generators() {
            let a = g.sample(seed, replica);
            let b = g.sample(seed, replica);
            prop_assert_eq!(a.field(g.n_max()), b.field(g.n_max()));
            prop_assert_ne!(a.field(g.n_max()), g.sample(seed, replica + 1).field(g.n_max()));
        }
    }
}

#[test]
fn torus_covariance_depends_on_separation_only() {
    let lat = LatticeSpec::new(64, 16.0);
    let g = SpectralSampler::new(CutoffSpec::white_noise(2, 1.0).on_torus(16.0), lat, 2).unwrap();
    let shift = (3, 1);
    let bases = [(0, 0), (10, 5), (20, 40), (63, 63), (31, 62)];
    let pairs: Vec<(usize, usize)> =
        bases.iter().map(|&(i, j)| (lat.index(i, j), lat.index((i + shift.0) % 64, (j + shift.1) % 64))).collect();
    let reps = 4000u64;
    let mut xs = vec![Vec::with_capacity(reps as usize); pairs.len()];
    let mut ys = xs.clone();
    for r in 0..reps {
        let f = g.sample(5, r).field(2);
        for (k, &(a, b)) in pairs.iter().enumerate() {
            xs[k].push(f[a]);
            ys[k].push(f[b]);
        }
    }
    let estimates: Vec<(f64, f64)> = xs.iter().zip(&ys).map(|(x, y)| stats::covariance_with_error(x, y)).collect();
    let centre = estimates.iter().map(|e| e.0).sum::<f64>() / estimates.len() as f64;
    for (cov, se) in estimates {
        assert!((cov - centre).abs() <= 5.0 * se, "{cov} vs pooled {centre} (se {se})");
    }
}
