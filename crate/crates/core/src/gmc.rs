//! Multiplicative chaos measures built from multiscale fields.
//!
//! The base measure is Lebesgue measure on the lattice domain, so at a = 0
//! each cell carries its area. Normalization uses the sampler's exact
//! per-cell variance, which makes every cell weight mean-one by
//! construction.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::InverseFft2;
use crate::fields::{FieldGenerator, LatticeSpec, MultiscaleField};

/// Cell counts at or below this use the direct pair sum for energies.
const DIRECT_ENERGY_CELLS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct GmcMeasure {
    pub lattice: LatticeSpec,
    pub scale: usize,
    pub a: f64,
    pub masses: Vec<f64>,
}

fn check_parameter(a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("chaos parameter must be finite and nonnegative, got {a}")));
    }
    Ok(())
}

fn check_region(field: &MultiscaleField, region: &[bool]) -> Result<()> {
    if region.len() != field.cells() {
        return Err(Error::Usage(format!("region mask has {} cells, lattice has {}", region.len(), field.cells())));
    }
    if !region.iter().any(|&r| r) {
        return Err(Error::Usage("region is empty".into()));
    }
    Ok(())
}

/// Cell masses exp(a X_n - a^2/2 Var X_n) * cell area.
pub fn gmc_at_scale(field: &MultiscaleField, n: usize, a: f64) -> Result<GmcMeasure> {
    check_parameter(a)?;
    if n > field.n_max() {
        return Err(Error::Domain(format!("scale {n} beyond n_max {}", field.n_max())));
    }
    let area = field.lattice.cell_area();
    let x = field.field(n);
    let masses =
        x.iter().enumerate().map(|(i, &v)| (a * v - 0.5 * a * a * field.variance_at(n, i)).exp() * area).collect();
    Ok(GmcMeasure { lattice: field.lattice, scale: n, a, masses })
}

impl GmcMeasure {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn restricted_mass(&self, region: &[bool]) -> f64 {
        self.masses.iter().zip(region).filter(|(_, &r)| r).map(|(m, _)| m).sum()
    }

    /// Same measure scaled to the normalized Lebesgue base.
    pub fn normalized(&self) -> GmcMeasure {
        let area = self.lattice.area();
        GmcMeasure { masses: self.masses.iter().map(|m| m / area).collect(), ..self.clone() }
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let c = self.lattice.centre(i);
                vec![i.to_string(), format!("{:.17e}", c[0]), format!("{:.17e}", c[1]), format!("{m:.17e}")]
            })
            .collect()
    }

    pub const CSV_COLUMNS: [&'static str; 4] = ["cell", "x", "y", "mass"];
}

/// Totals (Q_n sigma(A)) for n = 0..=n_max, with index 0 the base mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrace {
    pub replica: u64,
    pub masses: Vec<f64>,
    /// E[Q_{n+1} sigma(A) | scales 1..=n] for n = 0..n_max-1, recomputed
    /// from the increment weights. None when increments are not independent.
    pub conditional: Option<Vec<f64>>,
    pub status: String,
}

impl MartingaleTrace {
    /// Largest relative gap between the conditional expectation and the
    /// current value.
    pub fn max_relative_defect(&self) -> Option<f64> {
        self.conditional
            .as_ref()
            .map(|c| c.iter().zip(&self.masses).map(|(e, q)| ((e - q) / q).abs()).fold(0.0, f64::max))
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.masses
            .iter()
            .enumerate()
            .map(|(n, q)| {
                let cond =
                    self.conditional.as_ref().and_then(|c| c.get(n)).map(|v| format!("{v:.17e}")).unwrap_or_default();
                vec![n.to_string(), format!("{q:.17e}"), cond, self.replica.to_string()]
            })
            .collect()
    }

    pub const CSV_COLUMNS: [&'static str; 4] = ["n", "total_mass", "conditional_next", "replica"];
}

pub fn martingale_trace(field: &MultiscaleField, a: f64, region: &[bool]) -> Result<MartingaleTrace> {
    check_parameter(a)?;
    check_region(field, region)?;
    let area = field.lattice.cell_area();
    let n_max = field.n_max();
    let cells: Vec<usize> = (0..field.cells()).filter(|&i| region[i]).collect();
    let independent = field.has_independent_increments();

    let mut x = vec![0.0; field.cells()];
    let mut masses = Vec::with_capacity(n_max + 1);
    let mut conditional = Vec::with_capacity(n_max);
    for n in 0..=n_max {
        if n > 0 {
            for (o, y) in x.iter_mut().zip(&field.increments[n - 1]) {
                *o += y;
            }
        }
        let mut q = 0.0;
        let mut next = 0.0;
        for &i in &cells {
            let v = field.variance_at(n, i);
            let w = (a * x[i] - 0.5 * a * a * v).exp() * area;
            q += w;
            if independent && n < n_max {
                // E exp(a Y) with Var Y from the increment weights, against
                // the normalization used by the next cumulative variance.
                let var_y = field.increment_variance_at(n + 1, i);
                let dv = field.variance_at(n + 1, i) - v;
                next += w * (0.5 * a * a * (var_y - dv)).exp();
            }
        }
        masses.push(q);
        if independent && n < n_max {
            conditional.push(next);
        }
    }
    let (conditional, status) = if independent {
        (Some(conditional), "ok".to_string())
    } else {
        (None, format!("conditional check skipped: {} increments are not independent", field.family))
    };
    Ok(MartingaleTrace { replica: field.replica, masses, conditional, status })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEnergy {
    /// Full estimate including the diagonal term.
    pub value: f64,
    /// Contribution of same-cell pairs, evaluated at distance h/2.
    pub diagonal: f64,
    /// Set when alpha >= d, where the continuum energy of diffuse measures
    /// diverges under refinement.
    pub divergent_regime: bool,
}

impl AlphaEnergy {
    pub fn diagonal_share(&self) -> f64 {
        if self.value > 0.0 {
            self.diagonal / self.value
        } else {
            0.0
        }
    }
}

fn energy_weight(da: i64, db: i64, h: f64, alpha: f64) -> f64 {
    let r = if da == 0 && db == 0 { 0.5 * h } else { h * ((da * da + db * db) as f64).sqrt() };
    r.powf(-alpha)
}

/// Double sum of |x - y|^-alpha over cell pairs, with the diagonal at half a
/// cell. Distances are Euclidean within the lattice square.
pub fn alpha_energy(measure: &GmcMeasure, alpha: f64) -> Result<AlphaEnergy> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let h = measure.lattice.spacing();
    let diagonal = energy_weight(0, 0, h, alpha) * measure.masses.iter().map(|m| m * m).sum::<f64>();
    let value = if measure.masses.len() <= DIRECT_ENERGY_CELLS {
        direct_energy(measure, h, alpha)
    } else {
        fft_energy(measure, h, alpha)
    };
    Ok(AlphaEnergy { value, diagonal, divergent_regime: alpha >= 2.0 })
}

fn direct_energy(measure: &GmcMeasure, h: f64, alpha: f64) -> f64 {
    let lat = &measure.lattice;
    let mut total = 0.0;
    for (i, &mi) in measure.masses.iter().enumerate() {
        if mi == 0.0 {
            continue;
        }
        let (ai, bi) = lat.coords(i);
        for (j, &mj) in measure.masses.iter().enumerate() {
            let (aj, bj) = lat.coords(j);
            total += mi * mj * energy_weight(ai as i64 - aj as i64, bi as i64 - bj as i64, h, alpha);
        }
    }
    total
}

fn fft_energy(measure: &GmcMeasure, h: f64, alpha: f64) -> f64 {
    // Linear autocorrelation of the masses through a zero-padded transform.
    let n = measure.lattice.cells;
    let p = 2 * n;
    let fft = InverseFft2::new(p);
    let mut buf = vec![Complex64::new(0.0, 0.0); p * p];
    for (i, &m) in measure.masses.iter().enumerate() {
        let (a, b) = measure.lattice.coords(i);
        buf[a * p + b] = Complex64::new(m, 0.0);
    }
    fft.process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    fft.process(&mut buf);
    let norm = (p * p) as f64;
    let mut total = 0.0;
    for a in 0..p {
        let da = if a < n { a as i64 } else { a as i64 - p as i64 };
        if da.unsigned_abs() as usize >= n {
            continue;
        }
        for b in 0..p {
            let db = if b < n { b as i64 } else { b as i64 - p as i64 };
            if db.unsigned_abs() as usize >= n {
                continue;
            }
            total += buf[a * p + b].re / norm * energy_weight(da, db, h, alpha);
        }
    }
    total
}

/// Per-cell X_n(x)/n weighted by the chaos masses at scale n.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedThickness {
    pub scale: usize,
    pub a: f64,
    pub ratios: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RootedThickness {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn weighted_sum(&self) -> f64 {
        self.ratios.iter().zip(&self.weights).map(|(r, w)| r * w).sum()
    }

    pub fn weighted_mean(&self) -> f64 {
        self.weighted_sum() / self.total_weight()
    }

    pub fn weighted_sd(&self) -> f64 {
        let mu = self.weighted_mean();
        let var =
            self.ratios.iter().zip(&self.weights).map(|(r, w)| w * (r - mu).powi(2)).sum::<f64>() / self.total_weight();
        var.sqrt()
    }
}

/// Ratio of summed weighted statistics over replicas; its expectation is
/// the rooted mean exactly, unlike the average of per-replica means.
pub fn pooled_rooted_mean(samples: &[RootedThickness]) -> f64 {
    let num: f64 = samples.iter().map(RootedThickness::weighted_sum).sum();
    let den: f64 = samples.iter().map(RootedThickness::total_weight).sum();
    num / den
}

pub fn rooted_thickness_check(field: &MultiscaleField, a: f64, measure: &GmcMeasure) -> Result<RootedThickness> {
    check_parameter(a)?;
    let n = measure.scale;
    if n == 0 || n > field.n_max() {
        return Err(Error::Usage(format!("measure scale {n} not in 1..={}", field.n_max())));
    }
    if measure.lattice != field.lattice {
        return Err(Error::Usage("measure and field lattices differ".into()));
    }
    let ratios = field.field(n).iter().map(|x| x / n as f64).collect();
    Ok(RootedThickness { scale: n, a, ratios, weights: measure.masses.clone() })
}

/// Exact E[(Q_n sigma(A))^2] = sum_x sum_y exp(a^2 q_n(x, y)) sigma(x) sigma(y).
pub fn second_moment_gram(generator: &dyn FieldGenerator, n: usize, a: f64, region: &[bool]) -> Result<f64> {
    check_parameter(a)?;
    let lat = generator.lattice();
    let cells = lat.len();
    if region.len() != cells || !region.iter().any(|&r| r) {
        return Err(Error::Usage("region must be a nonempty mask over the lattice".into()));
    }
    if n == 0 || n > generator.n_max() {
        return Err(Error::Domain(format!("scale {n} not in 1..={}", generator.n_max())));
    }
    let q = generator.covariance_matrix(n);
    let area = lat.cell_area();
    let mut total = 0.0;
    for i in (0..cells).filter(|&i| region[i]) {
        for j in (0..cells).filter(|&j| region[j]) {
            total += (a * a * q[i * cells + j]).exp();
        }
    }
    Ok(total * area * area)
}

/// Largest |E[cell weight] - 1| over cells, computed from the exact
/// lognormal identity with the weights' own variance.
pub fn lognormal_mean_defect(generator: &dyn FieldGenerator, n: usize, a: f64) -> f64 {
    let table = generator.variance_table();
    (0..generator.lattice().len())
        .map(|i| {
            let v_weights = generator.covariance(n, i, n, i);
            let v_table = table.cumulative[n - 1].at(i);
            ((0.5 * a * a * (v_weights - v_table)).exp() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}
