use serde::{Deserialize, Serialize};

use super::special::bessel_j0;
use crate::error::{Error, Result};

/// Cut-off family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Spectral truncation to the ball of radius 1/eps.
    WhiteNoise,
    /// Spectral weight by a mollifier transform, no truncation.
    Mollified,
    /// Scale-integral cut-off of the massive covariance.
    MassiveIntegral,
    /// Heat-semigroup (time) cut-off of the Dirichlet GFF on the unit square.
    GffSemigroup,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::WhiteNoise => "white_noise",
            Family::Mollified => "mollified",
            Family::MassiveIntegral => "massive_integral",
            Family::GffSemigroup => "gff_semigroup",
        }
    }

    pub fn is_spectral(self) -> bool {
        matches!(self, Family::WhiteNoise | Family::Mollified)
    }

    /// Whether consecutive scales differ by independent increments.
    pub fn has_independent_increments(self) -> bool {
        !matches!(self, Family::Mollified)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mollifier, identified by its radial Fourier transform normalized to 1 at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mollifier {
    /// Standard Gaussian density; transform exp(-s^2/2).
    Gaussian,
    /// Uniform measure on the unit sphere (circle average in d = 2).
    SphereAverage,
    /// Transform equal to the indicator of the unit ball. Reproduces the
    /// white-noise truncation exactly.
    SharpCutoff,
}

impl Mollifier {
    /// Radial Fourier transform at frequency modulus `s`.
    pub fn fourier(self, s: f64, dim: usize) -> f64 {
        match self {
            Mollifier::Gaussian => (-0.5 * s * s).exp(),
            Mollifier::SphereAverage => {
                if dim == 2 {
                    bessel_j0(s)
                } else if s == 0.0 {
                    1.0
                } else {
                    s.sin() / s
                }
            }
            Mollifier::SharpCutoff => {
                if s <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Frequency modulus beyond which the squared transform is below 1e-18,
    /// or `None` when the transform decays only algebraically.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            Mollifier::Gaussian => Some((2.0 * 18.0 * std::f64::consts::LN_10).sqrt()),
            Mollifier::SphereAverage => None,
            Mollifier::SharpCutoff => Some(1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mollifier::Gaussian => "gaussian",
            Mollifier::SphereAverage => "sphere_average",
            Mollifier::SharpCutoff => "sharp_cutoff",
        }
    }
}

/// Where the field lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Periodic box of the given side length.
    Torus { side: f64 },
    /// Unit square; condition checks use the interior square at distance
    /// `margin` from the boundary.
    UnitSquare { margin: f64 },
}

/// Cut-off family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub family: Family,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollifier: Option<Mollifier>,
    pub domain: Domain,
}

fn default_dim() -> usize {
    2
}

fn default_mass() -> f64 {
    1.0
}

impl CutoffSpec {
    pub fn white_noise(dim: usize, mass: f64) -> Self {
        CutoffSpec { family: Family::WhiteNoise, dim, mass, mollifier: None, domain: Domain::Torus { side: 1.0 } }
    }

    pub fn mollified(dim: usize, mass: f64, mollifier: Mollifier) -> Self {
        CutoffSpec {
            family: Family::Mollified,
            dim,
            mass,
            mollifier: Some(mollifier),
            domain: Domain::Torus { side: 1.0 },
        }
    }

    pub fn massive_integral(dim: usize, mass: f64) -> Self {
        CutoffSpec { family: Family::MassiveIntegral, dim, mass, mollifier: None, domain: Domain::Torus { side: 1.0 } }
    }

    pub fn gff_semigroup(margin: f64) -> Self {
        CutoffSpec {
            family: Family::GffSemigroup,
            dim: 2,
            mass: 0.0,
            mollifier: None,
            domain: Domain::UnitSquare { margin },
        }
    }

    pub fn on_torus(mut self, side: f64) -> Self {
        self.domain = Domain::Torus { side };
        self
    }

    /// Every violated invariant, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim < 2 {
            out.push(format!("dim must be >= 2, got {}", self.dim));
        }
        match self.family {
            Family::GffSemigroup => {
                if self.dim != 2 {
                    out.push("gff_semigroup requires dim = 2".into());
                }
                match self.domain {
                    Domain::UnitSquare { margin } => {
                        if !(margin > 0.0 && margin < 0.5) {
                            out.push(format!("margin must lie in (0, 1/2), got {margin}"));
                        }
                    }
                    Domain::Torus { .. } => out.push("gff_semigroup requires the unit_square domain".into()),
                }
            }
            _ => {
                if !(self.mass > 0.0 && self.mass.is_finite()) {
                    out.push(format!("mass must be positive, got {}", self.mass));
                }
                if let Domain::Torus { side } = self.domain {
                    if !(side > 0.0 && side.is_finite()) {
                        out.push(format!("torus side must be positive, got {side}"));
                    }
                }
            }
        }
        match (self.family, self.mollifier) {
            (Family::Mollified, None) => out.push("mollified family requires a mollifier".into()),
            (Family::Mollified, Some(_)) => {}
            (_, Some(_)) => out.push(format!("mollifier given for family {}", self.family)),
            (_, None) => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    /// Spectral weight w(eps * t) at frequency modulus `t` and scale `eps`.
    pub fn spectral_weight(&self, eps: f64, t: f64) -> f64 {
        match self.family {
            Family::WhiteNoise => {
                if t * eps <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Mollified => self.mollifier.map(|m| m.fourier(eps * t, self.dim)).unwrap_or(1.0),
            _ => 1.0,
        }
    }

    pub fn margin(&self) -> Option<f64> {
        match self.domain {
            Domain::UnitSquare { margin } => Some(margin),
            Domain::Torus { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self.mollifier {
            Some(m) => format!("{}:{}", self.family, m.name()),
            None => self.family.name().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms_are_normalized_and_bounded() {
        for m in [Mollifier::Gaussian, Mollifier::SphereAverage, Mollifier::SharpCutoff] {
            for d in [2, 3] {
                assert_eq!(m.fourier(0.0, d), 1.0);
                for i in 0..200 {
                    let s = i as f64 * 0.37;
                    assert!(m.fourier(s, d).abs() <= 1.0 + 1e-15);
                }
            }
        }
    }

    #[test]
    fn violations_are_listed() {
        let mut spec = CutoffSpec::white_noise(1, -1.0);
        spec.mollifier = Some(Mollifier::Gaussian);
        assert_eq!(spec.violations().len(), 3);
        assert!(CutoffSpec::gff_semigroup(0.7).validate().is_err());
        assert!(CutoffSpec::gff_semigroup(0.2).validate().is_ok());
        let mut bad = CutoffSpec::mollified(2, 1.0, Mollifier::Gaussian);
        bad.mollifier = None;
        assert!(bad.validate().is_err());
    }
}
