use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use lcfield::kernels::{self, CutoffSpec, Mollifier, ScaleDecomposition};

fn families() -> Vec<CutoffSpec> {
    vec![
        CutoffSpec::white_noise(2, 1.0),
        CutoffSpec::mollified(2, 1.0, Mollifier::Gaussian),
        CutoffSpec::massive_integral(2, 1.0),
        CutoffSpec::gff_semigroup(0.2),
    ]
}

fn interior_point() -> impl Strategy<Value = [f64; 2]> {
    (0.2f64..0.8, 0.2f64..0.8).prop_map(|(a, b)| [a, b])
}

/// J0 by the trapezoid rule on (1/pi) int_0^pi cos(x sin t) dt; the periodic
/// integrand makes the rule spectrally accurate.
fn j0(x: f64) -> f64 {
    let n = 256;
    let h = std::f64::consts::PI / n as f64;
    let s: f64 = (0..n).map(|i| (x * (i as f64 * h).sin()).cos()).sum();
    s / n as f64
}

/// White-noise covariance int_0^{1/eps} J0(r t) t / (t^2 + 1) dt by composite Simpson.
fn white_noise_oracle(r: f64, eps: f64) -> f64 {
    let top = 1.0 / eps;
    let n = 20_000;
    let h = top / n as f64;
    let f = |t: f64| j0(r * t) * t / (t * t + 1.0);
    let mut s = f(0.0) + f(top);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn white_noise_kernel_matches_bessel_oracle(r in 0.01f64..1.0, eps in 0.02f64..0.5) {
        let fast = kernels::kernel_k(r, eps, &CutoffSpec::white_noise(2, 1.0)).unwrap();
        let oracle = white_noise_oracle(r, eps);
        prop_assert!((fast - oracle).abs() <= 1e-7, "{fast} vs {oracle}");
    }

    #[test]
    fn integral_kernel_matches_quadrature(x in interior_point(), y in interior_point(), eps in 1e-4f64..1.0, m in 0.5f64..2.0) {
        let fast = kernels::kernel_h(&x, &y, eps, m).unwrap();
        let oracle = kernels::kernel_h_quadrature(&x, &y, eps, m).unwrap();
        prop_assert!((fast - oracle).abs() <= 1e-7, "{fast} vs {oracle}");
        prop_assert!(fast >= -1e-12);
    }

    #[test]
    fn variance_grows_as_scale_shrinks(log_eps in 0.5f64..8.0, step in 0.05f64..2.0, family in 0usize..4) {
        let spec = families()[family];
        let coarse = kernels::var_g((-log_eps).exp(), &spec).unwrap();
        let fine = kernels::var_g((-(log_eps + step)).exp(), &spec).unwrap();
        prop_assert!(fine > coarse, "{}: {fine} <= {coarse}", spec.label());
    }

    #[test]
    fn decomposition_telescopes(x in interior_point(), y in interior_point(), n in 2usize..6, family in 0usize..4) {
        let spec = families()[family];
        let dec = ScaleDecomposition::new(spec, 6).unwrap();
        let step = dec.cumulative(n, &x, &y).unwrap() - dec.cumulative(n - 1, &x, &y).unwrap();
        let inc = dec.increment(n, &x, &y).unwrap();
        prop_assert!((step - inc).abs() <= 1e-9, "{}: {step} vs {inc}", spec.label());
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(points in prop::collection::vec(interior_point(), 20), family in 0usize..4, k in 1usize..5) {
        let spec = families()[family];
        let dec = ScaleDecomposition::new(spec, 4).unwrap();
        let gram = |f: &dyn Fn(&[f64], &[f64]) -> f64| {
            DMatrix::from_fn(20, 20, |i, j| f(&points[i], &points[j]))
        };
        let cumulative = gram(&|x, y| dec.cumulative(4, x, y).unwrap());
        let shell = gram(&|x, y| dec.increment(k, x, y).unwrap());
        for m in [cumulative, shell] {
            let eig = SymmetricEigen::new(m).eigenvalues;
            let max = eig.max();
            prop_assert!(eig.min() >= -1e-8 * max, "{}: {} vs {max}", spec.label(), eig.min());
        }
    }
}

#[test]
fn normalized_variance_is_near_one_at_small_scales() {
    // The semigroup family converges only logarithmically and is excluded;
    // its deviation is reported by the condition audit.
    for spec in &families()[..3] {
        for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
            let ratio = kernels::var_g(eps, spec).unwrap() / -f64::ln(eps);
            assert!((0.9..=1.1).contains(&ratio), "{} at {eps}: {ratio}", spec.label());
        }
    }
}
