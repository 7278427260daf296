//! Dirichlet heat kernel of Brownian motion (generator Delta/2) killed on
//! leaving the unit square, and the semigroup cut-off of the planar GFF.

use std::f64::consts::{PI, SQRT_2};

use super::special::exp_integral_e1;
use crate::error::{Error, Result};

/// Per-mode decay rate lambda_{jk} = pi^2 (j^2 + k^2) / 2.
pub fn eigenvalue(j: usize, k: usize) -> f64 {
    0.5 * PI * PI * ((j * j + k * k) as f64)
}

fn sine_row(x: f64, modes: usize) -> Vec<f64> {
    (1..=modes).map(|j| (PI * j as f64 * x).sin()).collect()
}

fn check_point(p: &[f64]) -> Result<()> {
    if p.len() != 2 {
        return Err(Error::Domain(format!("expected a planar point, got {} coordinates", p.len())));
    }
    Ok(())
}

/// Bound on sum_{j > M} exp(-c j^2).
fn gaussian_tail(c: f64, modes: usize) -> f64 {
    let m1 = (modes + 1) as f64;
    (-c * m1 * m1).exp() / (1.0 - (-2.0 * c * m1).exp())
}

/// Smallest mode count M for which the truncation error of the heat kernel
/// at time t is below `tol`.
pub fn heat_modes_required(t: f64, tol: f64) -> usize {
    let c = 0.5 * PI * PI * t;
    // sum_{j >= 1} exp(-c j^2) <= exp(-c) / (1 - exp(-3c))
    let full = (-c).exp() / (1.0 - (-3.0 * c).exp());
    let mut m = 1usize;
    while 8.0 * full * gaussian_tail(c, m) >= tol {
        m += 1;
    }
    m
}

/// p_D(t, x, y) truncated to j, k <= `modes`.
pub fn heat_kernel_d(t: f64, x: &[f64], y: &[f64], modes: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel time must be positive, got {t}")));
    }
    check_point(x)?;
    check_point(y)?;
    if modes == 0 {
        return Err(Error::Domain("mode count must be at least 1".into()));
    }
    let c = 0.5 * PI * PI * t;
    let axis = |a: f64, b: f64| -> f64 {
        (1..=modes)
            .map(|j| {
                let jf = j as f64;
                (-c * jf * jf).exp() * (PI * jf * a).sin() * (PI * jf * b).sin()
            })
            .sum()
    };
    Ok(4.0 * axis(x[0], y[0]) * axis(x[1], y[1]))
}

/// Upper bound on the mode-truncation error of the semigroup kernel.
pub fn gff_truncation_bound(eps: f64, modes: usize) -> f64 {
    let rho = modes as f64 - SQRT_2;
    if rho <= 0.0 {
        return f64::INFINITY;
    }
    4.0 * exp_integral_e1(0.5 * PI * PI * eps * rho * rho)
}

/// Smallest mode count with truncation bound below `tol`.
pub fn gff_modes_required(eps: f64, tol: f64) -> usize {
    let mut lo = 2usize;
    let mut hi = 4usize;
    while gff_truncation_bound(eps, hi) >= tol {
        hi *= 2;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if gff_truncation_bound(eps, mid) < tol {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Default mode count used when callers do not fix one.
pub fn gff_default_modes(eps: f64) -> usize {
    gff_modes_required(eps, 1e-10)
}

pub fn in_interior(p: &[f64], margin: f64) -> bool {
    p.iter().all(|&c| c >= margin && c <= 1.0 - margin)
}

/// Weighted mode sum 2 pi sum_{j,k<=M} w(lambda) phi_jk(x) phi_jk(y).
fn mode_sum<W: Fn(f64) -> f64>(x: &[f64], y: &[f64], modes: usize, weight: W) -> f64 {
    let sx0 = sine_row(x[0], modes);
    let sx1 = sine_row(x[1], modes);
    let sy0 = sine_row(y[0], modes);
    let sy1 = sine_row(y[1], modes);
    let mut total = 0.0;
    for j in 1..=modes {
        let a = sx0[j - 1] * sy0[j - 1];
        let mut row = 0.0;
        for k in 1..=modes {
            row += weight(eigenvalue(j, k)) * sx1[k - 1] * sy1[k - 1];
        }
        total += a * row;
    }
    2.0 * PI * 4.0 * total
}

/// G_{eps,D}(x, y) = 2 pi int_eps^inf p_D(s, x, y) ds, termwise.
pub fn kernel_g_semigroup(x: &[f64], y: &[f64], eps: f64, modes: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {eps}")));
    }
    check_point(x)?;
    check_point(y)?;
    Ok(mode_sum(x, y, modes, |l| (-l * eps).exp() / l))
}

/// Time-slice increment 2 pi int_{eps_fine}^{eps_coarse} p_D ds; pass
/// `f64::INFINITY` as the coarse end for the first slice.
pub fn gff_time_slice(x: &[f64], y: &[f64], eps_fine: f64, eps_coarse: f64, modes: usize) -> Result<f64> {
    if !(eps_fine > 0.0 && eps_coarse >= eps_fine) {
        return Err(Error::Domain(format!("time slice needs 0 < {eps_fine} <= {eps_coarse}")));
    }
    check_point(x)?;
    check_point(y)?;
    Ok(mode_sum(x, y, modes, |l| {
        let coarse = if eps_coarse.is_finite() { (-l * eps_coarse).exp() } else { 0.0 };
        ((-l * eps_fine).exp() - coarse) / l
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::quad::{integrate, Tolerance};

    #[test]
    fn diagonal_bounds_hold() {
        for &t in &[1e-3, 1e-2, 0.1, 0.5] {
            let m = heat_modes_required(t, 1e-10);
            for &x in &[[0.5, 0.5], [0.2, 0.3], [0.1, 0.9], [0.05, 0.5]] {
                let p = heat_kernel_d(t, &x, &x, m).unwrap();
                let free = 1.0 / (2.0 * PI * t);
                let dist = x.iter().map(|&c| c.min(1.0 - c)).fold(f64::INFINITY, f64::min);
                assert!(p <= free + 1e-9, "t {t} x {x:?}: {p} > {free}");
                assert!(p >= free - 1.0 / (PI * std::f64::consts::E * dist * dist) - 1e-9);
            }
        }
    }

    #[test]
    fn sub_markov_mass() {
        let t = 0.02;
        let m = heat_modes_required(t, 1e-12);
        let x = [0.3, 0.6];
        // Integrate over y by a tensor midpoint rule (smooth integrand).
        let n = 200;
        let h = 1.0 / n as f64;
        let mut mass = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                mass += heat_kernel_d(t, &x, &y, m).unwrap() * h * h;
            }
        }
        assert!(mass <= 1.0 && mass > 0.9, "{mass}");
    }

    #[test]
    fn semigroup_kernel_matches_time_integral() {
        let x = [0.4, 0.45];
        let y = [0.55, 0.35];
        let eps = 0.01;
        let modes = gff_default_modes(eps);
        let direct = kernel_g_semigroup(&x, &y, eps, modes).unwrap();
        // Independent route: integrate the heat kernel over time in log s.
        let f = |u: f64| {
            let s = u.exp();
            let m = heat_modes_required(s, 1e-13);
            heat_kernel_d(s, &x, &y, m).unwrap() * s
        };
        let q = integrate(f, eps.ln(), 4.0, Tolerance::new(1e-11, 1e-11)).unwrap().value;
        assert!((2.0 * PI * q - direct).abs() < 1e-7, "{} vs {direct}", 2.0 * PI * q);
    }

    #[test]
    fn truncation_bound_controls_tail() {
        let eps = 1e-3;
        let m = gff_modes_required(eps, 1e-6);
        let x = [0.5, 0.5];
        let a = kernel_g_semigroup(&x, &x, eps, m).unwrap();
        let b = kernel_g_semigroup(&x, &x, eps, 2 * m).unwrap();
        assert!((b - a).abs() <= gff_truncation_bound(eps, m));
    }

    #[test]
    fn slices_telescope() {
        let x = [0.3, 0.5];
        let y = [0.35, 0.52];
        let m = 120;
        let eps = [(-1.0f64).exp(), (-2.0f64).exp(), (-3.0f64).exp()];
        let mut acc = gff_time_slice(&x, &y, eps[0], f64::INFINITY, m).unwrap();
        for w in eps.windows(2) {
            acc += gff_time_slice(&x, &y, w[1], w[0], m).unwrap();
        }
        let direct = kernel_g_semigroup(&x, &y, eps[2], m).unwrap();
        assert!((acc - direct).abs() < 1e-12);
    }
}
