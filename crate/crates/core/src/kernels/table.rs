use serde::Serialize;

use super::cutoff::{CutoffSpec, Family};
use super::SQUARE_CENTRE;
use crate::error::{Error, Result};

/// One tabulated kernel value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelRow {
    pub eps: f64,
    pub r: f64,
    pub value: f64,
}

/// Kernel values of one family over a scale grid and a list of distances.
///
/// Points are placed at `base` and `base + r e_1`, where `base` is the
/// origin for translation-invariant families and the square centre for the
/// semigroup cut-off.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTable {
    pub spec: CutoffSpec,
    pub rows: Vec<KernelRow>,
}

impl KernelTable {
    pub fn tabulate(spec: CutoffSpec, scales: &[f64], radii: &[f64]) -> Result<Self> {
        spec.validate()?;
        if scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("scale grid must be strictly decreasing".into()));
        }
        let base = match spec.family {
            Family::GffSemigroup => SQUARE_CENTRE,
            _ => [0.0, 0.0],
        };
        let mut rows = Vec::with_capacity(scales.len() * radii.len());
        for &eps in scales {
            for &r in radii {
                let y = [base[0] + r, base[1]];
                let value = super::covariance(&spec, &base, &y, eps)?;
                rows.push(KernelRow { eps, r, value });
            }
        }
        Ok(KernelTable { spec, rows })
    }

    /// Value of the diagonal entry (r = 0) at each scale, if tabulated.
    pub fn diagonal(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.r == 0.0).map(|r| (r.eps, r.value)).collect()
    }

    /// Long-format CSV body with columns family, m, d, eps, r, value.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|row| {
                vec![
                    self.spec.label(),
                    format!("{}", self.spec.mass),
                    format!("{}", self.spec.dim),
                    format!("{:e}", row.eps),
                    format!("{:e}", row.r),
                    format!("{:.17e}", row.value),
                ]
            })
            .collect()
    }

    pub const CSV_COLUMNS: [&'static str; 6] = ["family", "m", "d", "eps", "r", "value"];
}
