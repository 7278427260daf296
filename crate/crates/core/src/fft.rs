//! Square 2-D inverse FFT on row-major complex buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Reusable plan for unnormalized inverse transforms of size n x n:
/// out[i, j] = sum_{a,b} in[a, b] exp(2 pi i (a i + b j) / n).
pub struct InverseFft2 {
    n: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl InverseFft2 {
    pub fn new(n: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_inverse(n);
        InverseFft2 { n, plan }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn process(&self, buf: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(buf.len(), n * n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.plan.get_inplace_scratch_len()];
        self.plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, n);
        self.plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, n);
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    const TILE: usize = 32;
    for ib in (0..n).step_by(TILE) {
        for jb in (ib..n).step_by(TILE) {
            for i in ib..(ib + TILE).min(n) {
                let start = if ib == jb { i + 1 } else { jb };
                for j in start..(jb + TILE).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}
