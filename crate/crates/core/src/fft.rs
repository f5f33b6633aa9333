use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Row-major 2-D transform built from 1-D rustfft plans.
///
/// The inverse is normalized by `1/(nx·ny)` so `inverse(forward(a)) == a`.
pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd_x, &self.fwd_y);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv_x, &self.inv_y);
        let s = 1.0 / (self.nx * self.ny) as f64;
        data.par_iter_mut().for_each(|c| *c *= s);
    }

    fn run(&self, data: &mut [Complex64], along_x: &Arc<dyn Fft<f64>>, along_y: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.nx * self.ny);
        data.par_chunks_mut(self.nx)
            .for_each(|row| along_x.process(row));
        let mut t = transpose(data, self.nx, self.ny);
        t.par_chunks_mut(self.ny)
            .for_each(|col| along_y.process(col));
        let back = transpose(&t, self.ny, self.nx);
        data.copy_from_slice(&back);
    }
}

/// Transposes a row-major `rows × cols` array (`cols` fastest).
fn transpose(src: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    const BLOCK: usize = 32;
    let mut dst = vec![Complex64::new(0.0, 0.0); src.len()];
    for jb in (0..rows).step_by(BLOCK) {
        for ib in (0..cols).step_by(BLOCK) {
            for j in jb..(jb + BLOCK).min(rows) {
                for i in ib..(ib + BLOCK).min(cols) {
                    dst[i * rows + j] = src[j * cols + i];
                }
            }
        }
    }
    dst
}

/// Angular frequency (rad/m) of FFT bin `k` for `n` samples at pitch `d`.
#[inline]
pub fn angular_frequency(k: usize, n: usize, d: f64) -> f64 {
    let signed = if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    };
    2.0 * std::f64::consts::PI * signed / (n as f64 * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let (nx, ny) = (12, 10);
        let orig: Vec<Complex64> = (0..nx * ny)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut a = orig.clone();
        let fft = Fft2::new(nx, ny);
        fft.forward(&mut a);
        fft.inverse(&mut a);
        for (x, y) in a.iter().zip(&orig) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let (nx, ny) = (6, 4);
        let a: Vec<Complex64> = (0..nx * ny)
            .map(|k| Complex64::new(k as f64, (k * k % 7) as f64))
            .collect();
        let mut b = a.clone();
        Fft2::new(nx, ny).forward(&mut b);
        let tau = 2.0 * std::f64::consts::PI;
        for v in 0..ny {
            for u in 0..nx {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..ny {
                    for i in 0..nx {
                        let ph = -tau * ((u * i) as f64 / nx as f64 + (v * j) as f64 / ny as f64);
                        s += a[j * nx + i] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((s - b[v * nx + u]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn frequencies_follow_fftfreq_layout() {
        let d = 0.5;
        assert_eq!(angular_frequency(0, 4, d), 0.0);
        let step = 2.0 * std::f64::consts::PI / 2.0;
        assert!((angular_frequency(1, 4, d) - step).abs() < 1e-15);
        assert!((angular_frequency(2, 4, d) + 2.0 * step).abs() < 1e-15);
        assert!((angular_frequency(3, 4, d) + step).abs() < 1e-15);
        assert!((angular_frequency(2, 5, d) - 2.0 * 2.0 * std::f64::consts::PI / 2.5).abs() < 1e-15);
    }
}
