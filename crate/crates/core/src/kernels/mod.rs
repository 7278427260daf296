//! Covariance kernels, special functions and variance laws of the cut-off
//! families. Everything here is a pure function of its inputs.

pub mod cutoff;
pub mod decomposition;
pub mod heat;
pub mod quad;
pub mod radial;
pub mod special;
pub mod table;

pub use cutoff::{CutoffSpec, Domain, Family, Mollifier};
pub use decomposition::ScaleDecomposition;
pub use heat::{gff_default_modes, heat_kernel_d, kernel_g_semigroup};
pub use radial::{kernel_k, sphere_area};
pub use table::{KernelRow, KernelTable};

use crate::error::{Error, Result};
use quad::Tolerance;

/// Centre of the unit square; reference point for position-dependent
/// variances.
pub const SQUARE_CENTRE: [f64; 2] = [0.5, 0.5];

/// Modified Bessel function of the second kind, order 0 or 1.
pub fn bessel_k(order: u32, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("Bessel K needs z > 0, got {z}")));
    }
    let (k0, k1) = special::bessel_k01(z);
    match order {
        0 => Ok(k0),
        1 => Ok(k1),
        _ => Err(Error::Domain(format!("Bessel K order {order} not supported"))),
    }
}

fn check_mass(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("mass must be positive, got {m}")))
    }
}

/// Scale profile k_m(z) = 1/2 int_0^inf exp(-m^2 z^2 / (2v) - v/2) dv, via
/// its closed form m z K1(m z).
pub fn k_m(z: f64, m: f64) -> Result<f64> {
    check_mass(m)?;
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("k_m needs z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let s = m * z;
    if s > 700.0 {
        return Ok(0.0);
    }
    Ok(s * special::bessel_k1(s))
}

/// k_m by adaptive quadrature of the defining integral after v = e^s.
pub fn k_m_quadrature(z: f64, m: f64) -> Result<f64> {
    check_mass(m)?;
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("k_m needs z >= 0, got {z}")));
    }
    let a = 0.5 * m * m * z * z;
    let f = |s: f64| {
        let v = s.exp();
        let expo = if a > 0.0 { -a / v } else { 0.0 } - 0.5 * v + s;
        expo.exp()
    };
    // Peak of the integrand sits near v = sqrt(2a) (or v = 2 when a = 0).
    let lo = if a > 0.0 { (a / 800.0).ln().min(-60.0) } else { -60.0 };
    let hi = (1600.0f64).ln();
    let mut breaks = vec![lo];
    let mut s = -40.0;
    while s < hi {
        if s > lo {
            breaks.push(s);
        }
        s += 2.0;
    }
    breaks.push(hi);
    Ok(0.5 * quad::integrate_panels(f, &breaks, Tolerance::new(1e-15, 1e-13))?.value)
}

fn distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain("points of different dimension".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn check_unit_scale(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("scale must lie in (0, 1] (empty integration range otherwise), got {eps}")))
    }
}

/// Integral cut-off H_eps(x, y) = int_1^{1/eps} k_m(u |x - y|) du / u.
///
/// Uses H = K0(m r) - K0(m r / eps), which follows from the closed form of
/// k_m; `kernel_h_quadrature` keeps the direct route.
pub fn kernel_h(x: &[f64], y: &[f64], eps: f64, m: f64) -> Result<f64> {
    check_unit_scale(eps)?;
    check_mass(m)?;
    let r = distance(x, y)?;
    Ok(h_shell(r, 1.0, 1.0 / eps, m))
}

/// Shell integral int_{u0}^{u1} k_m(u r) du / u for r >= 0.
pub fn h_shell(r: f64, u0: f64, u1: f64, m: f64) -> f64 {
    if r == 0.0 {
        return (u1 / u0).ln();
    }
    let a = m * r * u0;
    let b = m * r * u1;
    let k = |s: f64| if s > 700.0 { 0.0 } else { special::bessel_k0(s) };
    k(a) - k(b)
}

/// H_eps by adaptive quadrature in log u of the closed-form profile.
pub fn kernel_h_quadrature(x: &[f64], y: &[f64], eps: f64, m: f64) -> Result<f64> {
    check_unit_scale(eps)?;
    check_mass(m)?;
    let r = distance(x, y)?;
    let top = (1.0 / eps).ln();
    let f = |s: f64| k_m(s.exp() * r, m).unwrap_or(0.0);
    let n = (top.ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=n).map(|i| top * i as f64 / n as f64).collect();
    Ok(quad::integrate_panels(f, &breaks, Tolerance::new(1e-13, 1e-13))?.value)
}

/// Diagonal variance G(eps) of the family. For the GFF semigroup cut-off
/// the variance depends on position; this evaluates it at the square centre.
pub fn var_g(eps: f64, spec: &CutoffSpec) -> Result<f64> {
    match spec.family {
        Family::WhiteNoise | Family::Mollified => radial::spectral_variance(eps, spec),
        Family::MassiveIntegral => {
            check_unit_scale(eps)?;
            Ok(-eps.ln())
        }
        Family::GffSemigroup => var_g_at(eps, spec, &SQUARE_CENTRE),
    }
}

/// Diagonal variance at a given point (only the GFF depends on it).
pub fn var_g_at(eps: f64, spec: &CutoffSpec, x: &[f64]) -> Result<f64> {
    match spec.family {
        Family::GffSemigroup => kernel_g_semigroup(x, x, eps, gff_default_modes(eps)),
        _ => var_g(eps, spec),
    }
}

/// Covariance of the family's field at a single scale.
pub fn covariance(spec: &CutoffSpec, x: &[f64], y: &[f64], eps: f64) -> Result<f64> {
    cross_covariance(spec, x, y, eps, eps)
}

/// E[X_eps(x) X_eta(y)] under the family's joint law across scales: nested
/// truncations for white noise, integral and semigroup families (the cross
/// covariance is the covariance at the coarser scale), shared mode Gaussians
/// for mollified fields.
pub fn cross_covariance(spec: &CutoffSpec, x: &[f64], y: &[f64], eps: f64, eta: f64) -> Result<f64> {
    let coarse = eps.max(eta);
    match spec.family {
        Family::WhiteNoise => kernel_k(distance(x, y)?, coarse, spec),
        Family::Mollified => radial::cross_covariance_spectral(distance(x, y)?, eps, eta, spec, spec),
        Family::MassiveIntegral => kernel_h(x, y, coarse, spec.mass),
        Family::GffSemigroup => {
            let fine = eps.min(eta);
            kernel_g_semigroup(x, y, coarse, gff_default_modes(fine))
        }
    }
}
