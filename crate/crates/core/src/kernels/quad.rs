//! Adaptive Gauss-Kronrod (7/15 point) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Absolute/relative tolerance pair and a subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-12, rel: 1e-12, max_intervals: 4000 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lower: f64,
    upper: f64,
    value: f64,
    error: f64,
    /// Rounding floor of the error estimate; subdivision cannot go below it.
    floor: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64) -> Segment {
    let centre = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let fc = f(centre);
    let mut gauss = fc * WG[3];
    let mut kronrod = fc * WGK[7];
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * abs_sum;
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(floor);
    }
    Segment { lower, upper, value, error, floor }
}

/// Globally adaptive integration of `f` over `[lower, upper]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, tol: Tolerance) -> Result<Estimate> {
    if lower == upper {
        return Ok(Estimate { value: 0.0, abs_error: 0.0 });
    }
    let first = kronrod15(&f, lower, upper);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut total_floor = first.floor;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while total_err > tol.abs.max(tol.rel * total.abs()) && total_err > 2.0 * total_floor {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature { lower, upper, estimate: total, abs_error: total_err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lower + worst.upper);
        if mid <= worst.lower || mid >= worst.upper {
            // Interval exhausted at machine precision; accept what we have.
            heap.push(worst);
            break;
        }
        let left = kronrod15(&f, worst.lower, mid);
        let right = kronrod15(&f, mid, worst.upper);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_floor += left.floor + right.floor - worst.floor;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    if !f64::is_finite(value) {
        return Err(Error::Quadrature { lower, upper, estimate: value, abs_error });
    }
    Ok(Estimate { value, abs_error })
}

/// Integrates over consecutive panels given by `breaks` (sorted), each with
/// its own adaptive refinement. Useful for oscillatory integrands where the
/// breaks follow the oscillation period.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<Estimate> {
    let mut value = 0.0;
    let mut abs_error = 0.0;
    let panels = breaks.len().saturating_sub(1).max(1) as f64;
    let per_panel = Tolerance { abs: tol.abs / panels, ..tol };
    for w in breaks.windows(2) {
        let e = integrate(&f, w[0], w[1], per_panel)?;
        value += e.value;
        abs_error += e.abs_error;
    }
    Ok(Estimate { value, abs_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((e.value - exact).abs() < 1e-13);
    }

    #[test]
    fn log_singularity_converges() {
        let e = integrate(|x: f64| x.ln(), 0.0, 1.0, Tolerance::new(1e-11, 1e-11)).unwrap();
        assert!((e.value + 1.0).abs() < 1e-10, "{}", e.value);
    }

    #[test]
    fn oscillatory_panels() {
        let breaks: Vec<f64> = (0..=200).map(|k| k as f64 * std::f64::consts::PI / 10.0).collect();
        let e = integrate_panels(|x: f64| (10.0 * x).cos() * (-x).exp(), &breaks, Tolerance::default()).unwrap();
        let upper = 20.0 * std::f64::consts::PI;
        // int_0^U e^{-x} cos(10 x) dx = (1 - e^{-U}) / 101 since sin(10 U) = 0, cos(10 U) = 1
        let exact = (1.0 - (-upper).exp()) / 101.0;
        assert!((e.value - exact).abs() < 1e-13);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let tol = Tolerance { abs: 1e-15, rel: 0.0, max_intervals: 3 };
        assert!(integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol).is_err());
    }
}
