use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use super::{CellVariance, FieldGenerator, LatticeSpec, MultiscaleField, VarianceTable};
use crate::error::{Error, Result};
use crate::fft::InverseFft2;
use crate::kernels::decomposition::efold_scales;
use crate::kernels::radial::{radial_integral, spectral_variance};
use crate::kernels::{CutoffSpec, Domain, Family};
use crate::rng::StreamKey;

/// Modes per random stream within one shell.
const BLOCK: usize = 4096;

/// Largest share of the finest-scale variance a mollified field may lose
/// above the lattice Nyquist frequency.
const MOLLIFIED_TAIL_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
struct Mode {
    index: usize,
    partner: usize,
    freq: [f64; 2],
    radius: f64,
    /// Squared amplitude of one lattice mode (the partner carries the same).
    amp2: f64,
    group: usize,
}

impl Mode {
    fn self_conjugate(&self) -> bool {
        self.index == self.partner
    }

    /// Number of lattice modes represented (1 or 2).
    fn multiplicity(&self) -> f64 {
        if self.self_conjugate() {
            1.0
        } else {
            2.0
        }
    }
}

/// Spectral synthesis of white-noise and mollified cut-offs on a periodic
/// lattice.
///
/// Mode xi of the dual lattice (2 pi / L) Z^2 carries the squared amplitude
/// (2 pi / L)^2 <xi>_m^{-2} / (2 pi); the zero mode carries the exact
/// integral of the spectral density over the disk of the same area,
/// 1/2 log(1 + (2 pi / L)^2 / (pi m^2)).
pub struct SpectralSampler {
    spec: CutoffSpec,
    lattice: LatticeSpec,
    scales: Vec<f64>,
    modes: Vec<Mode>,
    groups: Vec<Range<usize>>,
    fft: InverseFft2,
    table: Arc<VarianceTable>,
    bias: Vec<f64>,
}

fn signed_frequency(a: usize, n: usize) -> i64 {
    if a <= n / 2 {
        a as i64
    } else {
        a as i64 - n as i64
    }
}

fn suggested_cells(required: f64, side: f64) -> usize {
    let n = (required * side / PI).ceil() as usize;
    (n + n % 2).max(8)
}

impl SpectralSampler {
    pub fn new(spec: CutoffSpec, lattice: LatticeSpec, n_max: usize) -> Result<Self> {
        Self::with_scales(spec, lattice, efold_scales(n_max))
    }

    pub fn with_scales(spec: CutoffSpec, lattice: LatticeSpec, scales: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        lattice.validate()?;
        if !spec.family.is_spectral() {
            return Err(Error::Usage(format!("spectral sampler cannot draw family {}", spec.family)));
        }
        if spec.dim != 2 {
            return Err(Error::Usage("lattice samplers are planar (d = 2)".into()));
        }
        match spec.domain {
            Domain::Torus { side } if (side - lattice.side).abs() <= 1e-12 * side => {}
            Domain::Torus { side } => {
                return Err(Error::Config(format!("torus side {side} does not match lattice side {}", lattice.side)))
            }
            Domain::UnitSquare { .. } => return Err(Error::Config("spectral sampler requires a torus domain".into())),
        }
        if scales.iter().any(|&e| !(e > 0.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("scales must be positive and strictly decreasing".into()));
        }
        let n = lattice.cells;
        let side = lattice.side;
        let nyquist = PI * n as f64 / side;
        let n_max = scales.len();
        let finest = scales.last().copied();
        if let Some(eps) = finest {
            match spec.family {
                Family::WhiteNoise => {
                    if nyquist < 1.0 / eps {
                        return Err(Error::Resolution {
                            nyquist,
                            required: 1.0 / eps,
                            suggested_cells: suggested_cells(1.0 / eps, side),
                        });
                    }
                }
                _ => {
                    let share = mollified_tail_share(&spec, eps, nyquist)?;
                    if share > MOLLIFIED_TAIL_SHARE {
                        let mut cells = n;
                        while mollified_tail_share(&spec, eps, PI * cells as f64 / side)? > MOLLIFIED_TAIL_SHARE {
                            cells *= 2;
                        }
                        return Err(Error::Resolution {
                            nyquist,
                            required: nyquist * cells as f64 / n as f64,
                            suggested_cells: cells,
                        });
                    }
                }
            }
        }

        let dk = 2.0 * PI / side;
        let cell = dk * dk;
        let m2 = spec.mass * spec.mass;
        let mut modes = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let index = a * n + b;
                let (pa, pb) = ((n - a) % n, (n - b) % n);
                let partner = pa * n + pb;
                let signed = (signed_frequency(a, n), signed_frequency(b, n));
                // Keep one canonical member of each conjugate pair, chosen by
                // signed frequency so the choice does not depend on n.
                if signed < (signed_frequency(pa, n), signed_frequency(pb, n)) {
                    continue;
                }
                let freq = [dk * signed.0 as f64, dk * signed.1 as f64];
                let radius = (freq[0] * freq[0] + freq[1] * freq[1]).sqrt();
                let group = scales.iter().position(|&e| radius <= 1.0 / e).map(|p| p + 1).unwrap_or(n_max + 1);
                if spec.family == Family::WhiteNoise && group > n_max {
                    continue;
                }
                let amp2 = if index == 0 {
                    0.5 * (cell / (PI * m2)).ln_1p()
                } else {
                    cell / (2.0 * PI) / (m2 + radius * radius)
                };
                modes.push(Mode { index, partner, freq, radius, amp2, group });
            }
        }
        // Lattice-independent order, so refined lattices reuse the same draws.
        modes.sort_by_key(|m| (m.group, (m.freq[0] / dk).round() as i64, (m.freq[1] / dk).round() as i64));
        let group_count = modes.last().map(|m| m.group).unwrap_or(0).max(n_max);
        let mut groups = Vec::with_capacity(group_count);
        let mut start = 0;
        for g in 1..=group_count {
            let end = start + modes[start..].iter().take_while(|m| m.group == g).count();
            groups.push(start..end);
            start = end;
        }

        let mut sampler = SpectralSampler {
            spec,
            lattice,
            scales,
            modes,
            groups,
            fft: InverseFft2::new(n),
            table: Arc::new(VarianceTable { cumulative: vec![], increments: vec![] }),
            bias: vec![],
        };
        let cumulative: Vec<CellVariance> = (1..=n_max)
            .map(|k| CellVariance::Uniform(sampler.weighted_sum(|m| sampler.weight(k, m).powi(2))))
            .collect();
        let increments: Vec<CellVariance> = (1..=n_max)
            .map(|k| {
                CellVariance::Uniform(
                    sampler.weighted_sum(|m| (sampler.weight(k, m) - sampler.weight(k - 1, m)).powi(2)),
                )
            })
            .collect();
        let mut bias = Vec::with_capacity(n_max);
        for (k, v) in cumulative.iter().enumerate() {
            let target = spectral_variance(sampler.scales[k], &sampler.spec)?;
            bias.push((v.at(0) - target) / target);
        }
        sampler.table = Arc::new(VarianceTable { cumulative, increments });
        sampler.bias = bias;
        Ok(sampler)
    }

    /// Relative discretization bias (V_n - G(eps_n)) / G(eps_n) per scale.
    pub fn discretization_bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn spec(&self) -> &CutoffSpec {
        &self.spec
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Weight of a mode at scale k (k = 0 gives the empty field).
    fn weight(&self, k: usize, m: &Mode) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match self.spec.family {
            Family::WhiteNoise => {
                if m.group <= k {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.spec.spectral_weight(self.scales[k - 1], m.radius),
        }
    }

    /// Sum over all lattice modes of amp^2 * f(mode).
    fn weighted_sum<F: Fn(&Mode) -> f64>(&self, f: F) -> f64 {
        self.modes.iter().map(|m| m.multiplicity() * m.amp2 * f(m)).sum()
    }

    fn draw_modes(&self, seed: u64, replica: u64) -> Vec<Complex64> {
        let mut z = vec![Complex64::new(0.0, 0.0); self.modes.len()];
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for (g, range) in self.groups.iter().enumerate() {
            for (b, start) in range.clone().step_by(BLOCK).enumerate() {
                let end = (start + BLOCK).min(range.end);
                let mut rng = StreamKey::new(seed, replica, (g + 1) as u32, b as u32).rng();
                for (slot, mode) in z[start..end].iter_mut().zip(&self.modes[start..end]) {
                    let re: f64 = rng.sample(StandardNormal);
                    *slot = if mode.self_conjugate() {
                        Complex64::new(re, 0.0)
                    } else {
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re * half, im * half)
                    };
                }
            }
        }
        z
    }

    /// Adds the Hermitian spectrum of `weights` (times `factor`) into `buf`.
    fn scatter<W: Fn(&Mode) -> f64>(&self, buf: &mut [Complex64], z: &[Complex64], factor: Complex64, weights: W) {
        for (mode, zv) in self.modes.iter().zip(z) {
            let w = weights(mode);
            if w == 0.0 {
                continue;
            }
            let c = *zv * (mode.amp2.sqrt() * w);
            buf[mode.index] += factor * c;
            if !mode.self_conjugate() {
                buf[mode.partner] += factor * c.conj();
            }
        }
    }

    /// Real grids for two spectral weightings at once (second one in the
    /// imaginary part).
    fn synthesize_pair<W1, W2>(&self, z: &[Complex64], first: W1, second: Option<W2>) -> (Vec<f64>, Option<Vec<f64>>)
    where
        W1: Fn(&Mode) -> f64,
        W2: Fn(&Mode) -> f64,
    {
        let cells = self.lattice.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); cells];
        self.scatter(&mut buf, z, Complex64::new(1.0, 0.0), first);
        let has_second = second.is_some();
        if let Some(w) = second {
            self.scatter(&mut buf, z, Complex64::new(0.0, 1.0), w);
        }
        self.fft.process(&mut buf);
        let re = buf.iter().map(|c| c.re).collect();
        let im = has_second.then(|| buf.iter().map(|c| c.im).collect());
        (re, im)
    }

    fn increments(&self, z: &[Complex64]) -> Vec<Vec<f64>> {
        let n_max = self.scales.len();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(n_max);
        let mut k = 1;
        while k <= n_max {
            let next = (k < n_max).then_some(k + 1);
            let (a, b) = match self.spec.family {
                Family::WhiteNoise => self.synthesize_pair(
                    z,
                    |m: &Mode| if m.group == k { 1.0 } else { 0.0 },
                    next.map(|k2| move |m: &Mode| if m.group == k2 { 1.0 } else { 0.0 }),
                ),
                _ => self.synthesize_pair(
                    z,
                    |m: &Mode| self.weight(k, m),
                    next.map(|k2| move |m: &Mode| self.weight(k2, m)),
                ),
            };
            out.push(a);
            if let Some(b) = b {
                out.push(b);
            }
            k += 2;
        }
        if self.spec.family != Family::WhiteNoise {
            // Mollified grids are cumulative; turn them into increments.
            for k in (1..out.len()).rev() {
                let (head, tail) = out.split_at_mut(k);
                for (t, h) in tail[0].iter_mut().zip(&head[k - 1]) {
                    *t -= h;
                }
            }
        }
        out
    }

    fn displacement(&self, i: usize, j: usize) -> [f64; 2] {
        let (ai, bi) = self.lattice.coords(i);
        let (aj, bj) = self.lattice.coords(j);
        let h = self.lattice.spacing();
        [(ai as f64 - aj as f64) * h, (bi as f64 - bj as f64) * h]
    }
}

fn mollified_tail_share(spec: &CutoffSpec, eps: f64, nyquist: f64) -> Result<f64> {
    let total = spectral_variance(eps, spec)?;
    let cap = spec.mollifier.and_then(|m| m.support_radius()).map(|r| r / eps).unwrap_or(2000.0 / eps);
    if nyquist >= cap {
        return Ok(0.0);
    }
    let tail = radial_integral(spec.dim, spec.mass, 0.0, nyquist, cap, &[], |t| spec.spectral_weight(eps, t).powi(2))?;
    Ok(tail / total)
}

impl FieldGenerator for SpectralSampler {
    fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn family(&self) -> Family {
        self.spec.family
    }

    fn variance_table(&self) -> &Arc<VarianceTable> {
        &self.table
    }

    fn sample(&self, seed: u64, replica: u64) -> MultiscaleField {
        let z = self.draw_modes(seed, replica);
        MultiscaleField {
            lattice: self.lattice,
            family: self.spec.family,
            scales: self.scales.clone(),
            increments: self.increments(&z),
            variance: Arc::clone(&self.table),
            seed,
            replica,
        }
    }

    fn covariance(&self, n1: usize, i: usize, n2: usize, j: usize) -> f64 {
        let d = self.displacement(i, j);
        self.weighted_sum(|m| self.weight(n1, m) * self.weight(n2, m) * (m.freq[0] * d[0] + m.freq[1] * d[1]).cos())
    }

    fn covariance_matrix(&self, n: usize) -> Vec<f64> {
        // Stationary on the torus: tabulate by periodic displacement.
        let side = self.lattice.cells;
        let h = self.lattice.spacing();
        let mut by_shift = vec![0.0; side * side];
        for (s, slot) in by_shift.iter_mut().enumerate() {
            let (da, db) = (s / side, s % side);
            let d = [da as f64 * h, db as f64 * h];
            *slot = self.weighted_sum(|m| self.weight(n, m).powi(2) * (m.freq[0] * d[0] + m.freq[1] * d[1]).cos());
        }
        let cells = self.lattice.len();
        let mut out = vec![0.0; cells * cells];
        for i in 0..cells {
            let (ai, bi) = self.lattice.coords(i);
            for j in 0..cells {
                let (aj, bj) = self.lattice.coords(j);
                let da = (ai + side - aj) % side;
                let db = (bi + side - bj) % side;
                out[i * cells + j] = by_shift[da * side + db];
            }
        }
        out
    }

    fn difference_variance(&self, n1: usize, n2: usize, _i: usize) -> f64 {
        self.weighted_sum(|m| (self.weight(n1, m) - self.weight(n2, m)).powi(2))
    }
}

/// Draws one replica of a spectral cut-off; see [`SpectralSampler`].
pub fn sample_spectral(spec: CutoffSpec, lattice: LatticeSpec, n_max: usize, seed: u64) -> Result<MultiscaleField> {
    Ok(SpectralSampler::new(spec, lattice, n_max)?.sample(seed, 0))
}
