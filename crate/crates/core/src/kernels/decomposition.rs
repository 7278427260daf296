//! Canonical scale decompositions q_n = p_1 + ... + p_n.
//!
//! For scales eps_1 > eps_2 > ... the increments are
//! * spectral families: frequency shells 1/eps_{k-1} < |xi| <= 1/eps_k,
//!   the first shell being the ball |xi| <= 1/eps_1;
//! * integral family: u-shells 1/eps_{k-1} < u <= 1/eps_k with 1/eps_0 = 1;
//! * semigroup family: time slices [eps_k, eps_{k-1}) with eps_0 = infinity.

use super::cutoff::{CutoffSpec, Family};
use super::heat::{gff_default_modes, gff_time_slice, kernel_g_semigroup};
use super::radial::radial_integral;
use super::{h_shell, var_g_at};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ScaleDecomposition {
    spec: CutoffSpec,
    scales: Vec<f64>,
    gff_modes: usize,
}

/// e-fold scale grid eps_k = e^{-k}, k = 1..=n_max.
pub fn efold_scales(n_max: usize) -> Vec<f64> {
    (1..=n_max).map(|k| (-(k as f64)).exp()).collect()
}

impl ScaleDecomposition {
    pub fn new(spec: CutoffSpec, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Domain("n_max must be at least 1".into()));
        }
        Self::with_scales(spec, efold_scales(n_max))
    }

    pub fn with_scales(spec: CutoffSpec, scales: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if scales.is_empty() {
            return Err(Error::Domain("empty scale list".into()));
        }
        if scales.iter().any(|&e| !(e > 0.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("scales must be positive and strictly decreasing".into()));
        }
        if spec.family == Family::MassiveIntegral && scales[0] > 1.0 {
            return Err(Error::Domain("integral cut-off scales must not exceed 1".into()));
        }
        let gff_modes = gff_default_modes(*scales.last().expect("nonempty"));
        Ok(ScaleDecomposition { spec, scales, gff_modes })
    }

    pub fn spec(&self) -> &CutoffSpec {
        &self.spec
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn n_max(&self) -> usize {
        self.scales.len()
    }

    fn scale(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.scales.len() {
            return Err(Error::Domain(format!("scale index {k} outside 1..={}", self.scales.len())));
        }
        Ok(self.scales[k - 1])
    }

    /// Coarse end of shell k: eps_{k-1}, with the family's convention for k = 1.
    fn coarse_end(&self, k: usize) -> f64 {
        if k >= 2 {
            self.scales[k - 2]
        } else if self.spec.family == Family::MassiveIntegral {
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// Increment kernel p_k(x, y), k in 1..=n_max.
    pub fn increment(&self, k: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        let fine = self.scale(k)?;
        let coarse = self.coarse_end(k);
        match self.spec.family {
            Family::WhiteNoise => {
                let r = dist(x, y);
                let lo = if coarse.is_finite() { 1.0 / coarse } else { 0.0 };
                radial_integral(self.spec.dim, self.spec.mass, r, lo, 1.0 / fine, &[], |_| 1.0)
            }
            Family::Mollified => {
                let q = self.cumulative(k, x, y)?;
                let prev = if k >= 2 { self.cumulative(k - 1, x, y)? } else { 0.0 };
                Ok(q - prev)
            }
            Family::MassiveIntegral => Ok(h_shell(dist(x, y), 1.0 / coarse, 1.0 / fine, self.spec.mass)),
            Family::GffSemigroup => gff_time_slice(x, y, fine, coarse, self.gff_modes),
        }
    }

    /// Cumulative kernel q_n(x, y), evaluated directly (not as a sum of
    /// increments).
    pub fn cumulative(&self, n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        let eps = self.scale(n)?;
        match self.spec.family {
            Family::GffSemigroup => kernel_g_semigroup(x, y, eps, self.gff_modes),
            _ => super::covariance(&self.spec, x, y, eps),
        }
    }

    /// Diagonal of q_n, i.e. the variance law at scale eps_n.
    pub fn variance(&self, n: usize, x: &[f64]) -> Result<f64> {
        let eps = self.scale(n)?;
        match self.spec.family {
            Family::GffSemigroup => kernel_g_semigroup(x, x, eps, self.gff_modes),
            _ => var_g_at(eps, &self.spec, x),
        }
    }

    pub fn gff_modes(&self) -> usize {
        self.gff_modes
    }
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}
