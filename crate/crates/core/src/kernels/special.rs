//! Special functions: modified Bessel K0/K1, I0/I1, Bessel J0 and the
//! exponential integral E1.

use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Argument below which K0/K1 use the power series instead of Steed's
/// continued fraction.
const SERIES_LIMIT: f64 = 2.0;

/// Modified Bessel function I0 by its power series (all terms positive).
pub fn bessel_i0(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Modified Bessel function I1 by its power series.
pub fn bessel_i1(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 0.5 * z;
    let mut sum = term;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

/// K0 and K1 together. Requires `z > 0`.
pub fn bessel_k01(z: f64) -> (f64, f64) {
    debug_assert!(z > 0.0);
    if z <= SERIES_LIMIT {
        k01_series(z)
    } else {
        k01_continued_fraction(z)
    }
}

pub fn bessel_k0(z: f64) -> f64 {
    bessel_k01(z).0
}

pub fn bessel_k1(z: f64) -> f64 {
    bessel_k01(z).1
}

fn k01_series(z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    let log_half = (0.5 * z).ln();

    // K0 = -(ln(z/2) + gamma) I0 + sum_k q^k/(k!)^2 H_k
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut tail0 = 0.0;
    // K1 tail: sum_k (psi(k+1) + psi(k+2)) q^k / (k! (k+1)!)
    let mut term1 = 1.0;
    let mut tail1 = 2.0 * (-EULER_GAMMA) + 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        tail0 += term * harmonic;
        term1 *= q / (kf * (kf + 1.0));
        let psi_sum = 2.0 * (-EULER_GAMMA + harmonic) + 1.0 / (kf + 1.0);
        tail1 += term1 * psi_sum;
        if term * harmonic < 1e-18 * tail0.abs().max(1e-300) && term1 < 1e-18 {
            break;
        }
    }
    let k0 = -(log_half + EULER_GAMMA) * bessel_i0(z) + tail0;
    let k1 = 1.0 / z + log_half * bessel_i1(z) - 0.25 * z * tail1;
    (k0, k1)
}

/// Steed's continued fraction (Temme's CF2) for order zero and its recurrence
/// partner. Converges quickly for z >= 2.
fn k01_continued_fraction(z: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let k0 = (PI / (2.0 * z)).sqrt() * (-z).exp() / s;
    let k1 = k0 * (z + 0.5 - a1 * h) / z;
    (k0, k1)
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 8.0 {
        let q = -0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= q / (kf * kf);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else if x < 25.0 {
        // Periodic trapezoid rule on (1/2pi) int cos(x sin t) dt; the error
        // is of the size of J_n(x), negligible once n exceeds x by ~30.
        let n = (x.ceil() as usize) + 40;
        let step = 2.0 * PI / n as f64;
        let mut sum = 0.0;
        for j in 0..n {
            sum += (x * (step * j as f64).sin()).cos();
        }
        sum / n as f64
    } else {
        j0_hankel(x)
    }
}

fn j0_hankel(x: f64) -> f64 {
    // P and Q of the Hankel expansion, summed until terms stop shrinking.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    let mut k = 1usize;
    loop {
        let odd = (2 * k - 1) as f64;
        term *= -(odd * odd) / (k as f64 * 8.0 * x);
        let mag = term.abs();
        if mag >= last || mag < 1e-17 {
            break;
        }
        last = mag;
        // a_k / x^k alternates between Q (odd k) and P (even k) with sign
        // pattern (-1)^{floor(k/2)} absorbed below.
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        k += 1;
        if k > 200 {
            break;
        }
    }
    let chi = x - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Exponential integral E1(x) for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let add = term / kf;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let fi = i as f64;
            let an = -fi * fi;
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}
