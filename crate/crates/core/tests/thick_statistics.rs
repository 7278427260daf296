//! Thick-point statistics on a 1024-cell white-noise torus at scales n <= 10.

use lcfield::fields::{LatticeSpec, SpectralSampler};
use lcfield::fractal::{
    borel_cantelli_tail, ensemble_counts, spectrum_from_counts, DeltaRule, FitWindow, ThickOptions,
};
use lcfield::kernels::CutoffSpec;

const SIDE: f64 = 0.125;
const REPLICAS: usize = 100;

fn sampler() -> SpectralSampler {
    SpectralSampler::new(CutoffSpec::white_noise(2, 1.0).on_torus(SIDE), LatticeSpec::new(1024, SIDE), 10).unwrap()
}

#[test]
fn supremum_and_emptiness_beyond_the_threshold() {
    let g = sampler();
    let ens = ensemble_counts(&g, 77, REPLICAS, &[3.0], &ThickOptions::default()).unwrap();

    let below = ens.sups.iter().filter(|s| s[9] <= 2.5).count();
    assert!(below >= 99, "sup X_10 / V_10 <= 2.5 in {below} of {REPLICAS} replicas");

    // chi = 1/2 gives exponent a^2 - 3d = 3 at a = 3.
    let bound = borel_cantelli_tail(3.0, 2.0, 0.5, 10);
    let nonempty = ens.nonempty_at(0, 10) as f64 / REPLICAS as f64;
    assert!(nonempty <= 3.0 * bound, "nonempty share {nonempty} vs tail bound {bound}");
}

#[test]
fn small_delta_rule_does_not_move_the_dimension() {
    let g = sampler();
    let fit_at_one = |delta: DeltaRule| {
        let options = ThickOptions { delta, ..ThickOptions::default() };
        let ens = ensemble_counts(&g, 78, 40, &[1.0], &options).unwrap();
        let s = spectrum_from_counts(&ens, 2, FitWindow::Default).unwrap();
        let fit = s.at(1.0).unwrap();
        (fit.slope().unwrap(), fit.stderr().unwrap())
    };
    let (plain, plain_se) = fit_at_one(DeltaRule::Zero);
    let (shifted, shifted_se) = fit_at_one(DeltaRule::LogPower { c: 0.1, zeta: 0.5 });
    let combined = (plain_se * plain_se + shifted_se * shifted_se).sqrt();
    assert!((plain - shifted).abs() <= combined, "{plain} vs {shifted} (combined se {combined})");
}
