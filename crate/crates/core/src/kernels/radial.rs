//! Radial reductions of the spectral (white-noise and mollified) kernels.
//!
//! Covariances are normalized by the unit-sphere surface area, so that for
//! d = 2 the kernel is `int_0^T J0(r t) w(eps t)^2 t / (m^2 + t^2) dt`.

use std::f64::consts::PI;

use super::cutoff::{CutoffSpec, Family, Mollifier};
use super::quad::{integrate_panels, Tolerance};
use super::special::{bessel_i0, bessel_j0, bessel_k0, exp_integral_e1};
use crate::error::{Error, Result};

/// Frequency cap (in units of 1/eps) for mollifiers whose transform decays
/// only algebraically. For the sphere average in d = 2 the dropped diagonal
/// tail is about 1/(pi * cap), i.e. 1.6e-4; off-diagonal tails oscillate and
/// are much smaller. Closed forms cover the diagonal.
const ALGEBRAIC_CAP: f64 = 2000.0;

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim)
}

/// Gamma(d/2) for a positive integer d.
fn gamma_half_integer(dim: usize) -> f64 {
    if dim % 2 == 0 {
        (1..dim / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < dim as f64 / 2.0 - 1e-9 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Spherical average of cos(xi . x) over |xi| = t, as a function of r t.
fn angular_factor(dim: usize, rt: f64) -> f64 {
    match dim {
        2 => bessel_j0(rt),
        _ => {
            if rt == 0.0 {
                1.0
            } else {
                rt.sin() / rt
            }
        }
    }
}

/// Radial spectral density t^{d-1} <t>_m^{-d}.
fn radial_density(dim: usize, mass: f64, t: f64) -> f64 {
    let q = mass * mass + t * t;
    match dim {
        2 => t / q,
        3 => t * t / (q * q.sqrt()),
        _ => t.powi(dim as i32 - 1) / q.powf(dim as f64 / 2.0),
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::Usage(format!("spectral kernels are implemented for d = 2, 3 (got d = {dim})")))
    }
}

/// Integral of `angular(r t) * amplitude(t) * density(t)` over `[lo, hi]`,
/// with panel breaks at doublings of t, at every half-period of the
/// oscillation, and at the extra `kinks`.
pub fn radial_integral<A: Fn(f64) -> f64>(
    dim: usize,
    mass: f64,
    r: f64,
    lo: f64,
    hi: f64,
    kinks: &[f64],
    amplitude: A,
) -> Result<f64> {
    check_dim(dim)?;
    if hi <= lo {
        return Ok(0.0);
    }
    let mut breaks = vec![lo, hi];
    let mut t = (0.5 * mass.min(1.0)).max(lo);
    while t < hi {
        if t > lo {
            breaks.push(t);
        }
        t *= 2.0;
    }
    if r > 0.0 {
        let period = PI / r;
        let mut k = (lo / period).ceil();
        let count = ((hi - lo) / period) as usize;
        if count > 5_000_000 {
            return Err(Error::Feasibility(format!(
                "radial quadrature would need {count} oscillation panels (r = {r}, range {hi})"
            )));
        }
        while k * period < hi {
            breaks.push(k * period);
            k += 1.0;
        }
    }
    breaks.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let f = |t: f64| angular_factor(dim, r * t) * amplitude(t) * radial_density(dim, mass, t);
    Ok(integrate_panels(f, &breaks, Tolerance::new(1e-12, 1e-12))?.value)
}

/// Upper end of the frequency range that carries the weight of `spec` at
/// scale `eps`.
fn frequency_cap(spec: &CutoffSpec, eps: f64) -> f64 {
    match (spec.family, spec.mollifier) {
        (Family::Mollified, Some(m)) => m.support_radius().unwrap_or(ALGEBRAIC_CAP) / eps,
        _ => 1.0 / eps,
    }
}

fn require_spectral(spec: &CutoffSpec) -> Result<()> {
    if spec.family.is_spectral() {
        Ok(())
    } else {
        Err(Error::Usage(format!("spectral kernel requested for family {}", spec.family)))
    }
}

fn check_scale(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("scale must be positive, got {eps}")))
    }
}

/// Radial covariance K_eps(r) of the white-noise or mollified cut-off.
pub fn kernel_k(r: f64, eps: f64, spec: &CutoffSpec) -> Result<f64> {
    require_spectral(spec)?;
    check_scale(eps)?;
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("distance must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return spectral_variance(eps, spec);
    }
    cross_covariance_spectral(r, eps, eps, spec, spec)
}

/// E[X^a_eps(x) X^b_eta(y)] with |x - y| = r for two spectral cut-offs
/// driven by the same mode Gaussians.
pub fn cross_covariance_spectral(r: f64, eps: f64, eta: f64, spec_a: &CutoffSpec, spec_b: &CutoffSpec) -> Result<f64> {
    require_spectral(spec_a)?;
    require_spectral(spec_b)?;
    check_scale(eps)?;
    check_scale(eta)?;
    check_dim(spec_a.dim)?;
    same_base(spec_a, spec_b)?;
    let hi = frequency_cap(spec_a, eps).min(frequency_cap(spec_b, eta));
    let kinks = [1.0 / eps, 1.0 / eta];
    radial_integral(spec_a.dim, spec_a.mass, r, 0.0, hi, &kinks, |t| {
        spec_a.spectral_weight(eps, t) * spec_b.spectral_weight(eta, t)
    })
}

/// Second moments of the difference field Z_eps = X^a_eps - X^b_eps under
/// the shared-mode coupling: returns (Var Z, E[(Z(x) - Z(y))^2]) at distance r.
pub fn difference_moments(r: f64, eps: f64, spec_a: &CutoffSpec, spec_b: &CutoffSpec) -> Result<(f64, f64)> {
    require_spectral(spec_a)?;
    require_spectral(spec_b)?;
    check_scale(eps)?;
    check_dim(spec_a.dim)?;
    same_base(spec_a, spec_b)?;
    let hi = frequency_cap(spec_a, eps).max(frequency_cap(spec_b, eps));
    let kinks = [1.0 / eps];
    let amp = |t: f64| {
        let d = spec_a.spectral_weight(eps, t) - spec_b.spectral_weight(eps, t);
        d * d
    };
    let var = radial_integral(spec_a.dim, spec_a.mass, 0.0, 0.0, hi, &kinks, amp)?;
    let cov = if r == 0.0 { var } else { radial_integral(spec_a.dim, spec_a.mass, r, 0.0, hi, &kinks, amp)? };
    Ok((var, 2.0 * (var - cov)))
}

fn same_base(a: &CutoffSpec, b: &CutoffSpec) -> Result<()> {
    if a.dim != b.dim || a.mass != b.mass {
        return Err(Error::NoCoupling(a.label(), b.label()));
    }
    Ok(())
}

/// Diagonal variance of a spectral cut-off; closed forms where known.
pub fn spectral_variance(eps: f64, spec: &CutoffSpec) -> Result<f64> {
    require_spectral(spec)?;
    check_scale(eps)?;
    check_dim(spec.dim)?;
    let m = spec.mass;
    let mollifier = match spec.family {
        Family::WhiteNoise => Mollifier::SharpCutoff,
        _ => spec.mollifier.unwrap_or(Mollifier::SharpCutoff),
    };
    let em = eps * m;
    match (spec.dim, mollifier) {
        (2, Mollifier::SharpCutoff) => Ok(0.5 * (1.0 / (em * em)).ln_1p()),
        (3, Mollifier::SharpCutoff) => {
            let t = 1.0 / eps;
            Ok((t / m).asinh() - t / (m * m + t * t).sqrt())
        }
        (2, Mollifier::Gaussian) => Ok(0.5 * (em * em).exp() * exp_integral_e1(em * em)),
        (2, Mollifier::SphereAverage) => Ok(bessel_i0(em) * bessel_k0(em)),
        _ => spectral_variance_quadrature(eps, spec),
    }
}

/// Diagonal variance by direct radial quadrature (no closed forms).
pub fn spectral_variance_quadrature(eps: f64, spec: &CutoffSpec) -> Result<f64> {
    require_spectral(spec)?;
    let hi = frequency_cap(spec, eps);
    radial_integral(spec.dim, spec.mass, 0.0, 0.0, hi, &[1.0 / eps], |t| {
        let w = spec.spectral_weight(eps, t);
        w * w
    })
}
