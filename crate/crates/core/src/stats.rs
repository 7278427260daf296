//! Small statistics toolkit: moments, regression, KS test.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn std_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Sample covariance and the CLT standard error of that estimate.
pub fn covariance_with_error(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let c = prods.iter().sum::<f64>() / (n - 1.0);
    (c, std_error(&prods))
}

/// Least-squares line y = intercept + slope x.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical standard error of the slope from residuals.
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LineFit { slope, intercept, slope_se }
}

/// Least-squares quadratic y = c0 + c1 x + c2 x^2; returns [c0, c1, c2].
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> [f64; 3] {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (&a, &b) in x.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, a, a * a);
        ata += row * row.transpose();
        aty += row * b;
    }
    let c = ata.lu().solve(&aty).unwrap_or_else(|| nalgebra::Vector3::repeat(f64::NAN));
    [c[0], c[1], c[2]]
}

/// Kolmogorov-Smirnov statistic against Normal(0, sd^2) and its asymptotic
/// p-value.
pub fn ks_normal(sample: &[f64], sd: f64) -> (f64, f64) {
    let normal = Normal::new(0.0, sd).expect("positive standard deviation");
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, kolmogorov_p(d * n.sqrt()))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_p(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}
