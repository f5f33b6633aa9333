//! Closed-form transverse modes and 1-D profile analytics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField2D, Grid};
use crate::special::airy_ai;

/// Scaling factors and truncation of a finite-energy Airy mode,
/// `E = Ai(x/x0)·Ai(y/y0)·exp(a·(x/x0 + y/y0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryParams {
    pub x0: f64,
    pub y0: f64,
    pub a: f64,
}

impl AiryParams {
    pub fn new(x0: f64, y0: f64, a: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::validation("x0", format!("{x0} must be > 0")));
        }
        if !(y0 > 0.0 && y0.is_finite()) {
            return Err(Error::validation("y0", format!("{y0} must be > 0")));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::validation("a", format!("{a} must lie in (0, 1)")));
        }
        Ok(AiryParams { x0, y0, a })
    }

    pub fn symmetric(x0: f64, a: f64) -> Result<Self> {
        Self::new(x0, x0, a)
    }
}

/// One axis of the finite-energy Airy amplitude, `Ai(s)·exp(a·s)` at `s = x/x0`.
pub fn airy_factor(x: f64, x0: f64, a: f64) -> f64 {
    let s = x / x0;
    airy_ai(s) * (a * s).exp()
}

/// Finite-energy Airy mode on `grid`, peak-normalized and real-valued.
pub fn airy_mode(p: &AiryParams, grid: Grid) -> Result<ComplexField2D> {
    if grid.extent_x() < 10.0 * p.x0 || grid.extent_y() < 10.0 * p.y0 {
        return Err(Error::validation(
            "grid",
            format!(
                "extent {:.3e} x {:.3e} m is smaller than 10 scaling factors",
                grid.extent_x(),
                grid.extent_y()
            ),
        ));
    }
    let fx = peak_normalized((0..grid.nx).map(|i| airy_factor(grid.x(i), p.x0, p.a)).collect());
    let fy = peak_normalized((0..grid.ny).map(|j| airy_factor(grid.y(j), p.y0, p.a)).collect());
    ComplexField2D::separable(grid, &fx, &fy)
}

fn peak_normalized(v: Vec<f64>) -> Vec<Complex64> {
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let s = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    v.into_iter().map(|x| Complex64::new(x * s, 0.0)).collect()
}

/// A Gaussian beam at its waist, optionally displaced and tilted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    /// Amplitude 1/e radius.
    pub w0: f64,
    pub center: (f64, f64),
    /// Propagation angle (rad) in the x-z and y-z planes.
    pub tilt: (f64, f64),
}

impl GaussianBeam {
    pub fn centered(w0: f64) -> Self {
        GaussianBeam {
            w0,
            center: (0.0, 0.0),
            tilt: (0.0, 0.0),
        }
    }

    pub fn sample(&self, grid: Grid) -> Result<ComplexField2D> {
        if !(self.w0 > 2.0 * grid.dx.max(grid.dy)) {
            return Err(Error::validation(
                "w0",
                format!(
                    "waist {:.3e} m is not resolved by pitch {:.3e} m",
                    self.w0,
                    grid.dx.max(grid.dy)
                ),
            ));
        }
        // unit power in the continuum: ∫|A e^{-r²/w0²}|² = A²·π·w0²/2
        let amp = (2.0 / PI).sqrt() / self.w0;
        let k = grid.wavenumber();
        let (cx, cy) = self.center;
        let (tx, ty) = self.tilt;
        let w2 = self.w0 * self.w0;
        let gx: Vec<Complex64> = (0..grid.nx)
            .map(|i| {
                let x = grid.x(i);
                Complex64::from_polar(amp * (-(x - cx).powi(2) / w2).exp(), k * tx * x)
            })
            .collect();
        let gy: Vec<Complex64> = (0..grid.ny)
            .map(|j| {
                let y = grid.y(j);
                Complex64::from_polar((-(y - cy).powi(2) / w2).exp(), k * ty * y)
            })
            .collect();
        ComplexField2D::separable(grid, &gx, &gy)
    }
}

/// `exp(−(x²+y²)/w0²)` scaled to unit total power.
pub fn gaussian_mode(w0: f64, grid: Grid) -> Result<ComplexField2D> {
    GaussianBeam::centered(w0).sample(grid)
}

/// SMF-28 mode-field diameter at 1550 nm.
pub const SMF28_MFD: f64 = 10.4e-6;

/// Fundamental fiber mode approximated as a Gaussian of waist `mfd/2`.
pub fn fiber_mode(mfd: f64, grid: Grid) -> Result<ComplexField2D> {
    gaussian_mode(mfd / 2.0, grid)
}

/// Mode-field diameter of a fiber mode after a collimating lens of focal
/// length `focal`: `2·λ·f/(π·w_fiber)`.
pub fn collimated_mfd(fiber_mfd: f64, focal: f64, wavelength: f64) -> f64 {
    2.0 * wavelength * focal / (PI * fiber_mfd / 2.0)
}

/// Sampled 1-D profile: strictly increasing positions (m), nonnegative values.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    positions: Vec<f64>,
    values: Vec<f64>,
}

impl Profile1D {
    pub fn new(positions: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if positions.len() != values.len() {
            return Err(Error::validation("profile", "positions and values differ in length"));
        }
        if positions.len() < 3 {
            return Err(Error::validation("profile", "needs at least 3 points"));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("profile", "positions must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::validation("profile", "values must be finite and nonnegative"));
        }
        Ok(Profile1D { positions, values })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Profile1D::new(self.positions.clone(), self.values.iter().map(|v| v * c).collect())
    }

    /// Position of the first global maximum.
    pub fn peak_position(&self) -> f64 {
        self.positions[argmax(&self.values)]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("position_m,value\n");
        for (x, v) in self.positions.iter().zip(&self.values) {
            let _ = writeln!(out, "{x:e},{v:e}");
        }
        out
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

/// Full width at half maximum around the global peak, linearly
/// interpolated between samples. Side lobes are ignored.
pub fn fwhm(p: &Profile1D) -> Result<f64> {
    let (x, v) = (&p.positions, &p.values);
    let k = argmax(v);
    let unbounded = || Error::Numerical("unbounded lobe: half maximum is never crossed".into());
    if k == 0 || k == v.len() - 1 || v[k] <= 0.0 {
        return Err(unbounded());
    }
    let half = v[k] / 2.0;
    let mut l = k;
    while v[l] >= half {
        if l == 0 {
            return Err(unbounded());
        }
        l -= 1;
    }
    let mut r = k;
    while v[r] >= half {
        if r == v.len() - 1 {
            return Err(unbounded());
        }
        r += 1;
    }
    let left = x[l] + (half - v[l]) / (v[l + 1] - v[l]) * (x[l + 1] - x[l]);
    let right = x[r - 1] + (v[r - 1] - half) / (v[r - 1] - v[r]) * (x[r] - x[r - 1]);
    Ok(right - left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triangle_fwhm_is_one() {
        let xs: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|x| 1.0 - x.abs()).collect();
        let p = Profile1D::new(xs, vs).unwrap();
        assert!((fwhm(&p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fwhm_within_one_step() {
        let step = 0.01;
        let xs: Vec<f64> = (0..=800).map(|i| -4.0 + step * i as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|x| (-2.0 * x * x).exp()).collect();
        let p = Profile1D::new(xs, vs).unwrap();
        let want = (2.0 * 2f64.ln()).sqrt();
        assert!((fwhm(&p).unwrap() - want).abs() < step);
    }

    #[test]
    fn peak_on_boundary_is_unbounded() {
        let p = Profile1D::new(vec![0.0, 1.0, 2.0, 3.0], vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!(fwhm(&p).is_err());
        let p = Profile1D::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, 1.9, 1.8]).unwrap();
        assert!(fwhm(&p).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(Profile1D::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(Profile1D::new(vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]).is_err());
        assert!(Profile1D::new(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn airy_params_validation() {
        assert!(AiryParams::new(271e-6, 271e-6, 0.05).is_ok());
        assert!(AiryParams::new(271e-6, 271e-6, 1.0).is_err());
        assert!(AiryParams::new(0.0, 271e-6, 0.05).is_err());
    }

    #[test]
    fn airy_mode_rejects_small_grid() {
        let g = Grid::square(64, 15e-6, 1554.7e-9).unwrap();
        let p = AiryParams::symmetric(271e-6, 0.05).unwrap();
        assert!(airy_mode(&p, g).is_err());
    }

    #[test]
    fn airy_mode_is_transpose_symmetric_and_peak_normalized() {
        let g = Grid::square(256, 15e-6, 1554.7e-9).unwrap();
        let p = AiryParams::symmetric(271e-6, 0.05).unwrap();
        let f = airy_mode(&p, g).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(f.at(i, j), f.at(j, i));
                assert_eq!(f.at(i, j).im, 0.0);
            }
        }
        assert!((f.peak_intensity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_rejects_unresolved_waist() {
        let g = Grid::square(64, 10e-6, 1e-6).unwrap();
        assert!(gaussian_mode(20e-6, g).is_err());
        assert!(gaussian_mode(21e-6, g).is_ok());
    }

    #[test]
    fn gaussian_has_unit_power_and_centered() {
        let g = Grid::square(256, 15e-6, 1554.7e-9).unwrap();
        let f = gaussian_mode(0.4e-3, g).unwrap();
        assert!((f.total_power() - 1.0).abs() < 1e-9);
        let (cx, cy) = f.centroid().unwrap();
        assert!(cx.abs() < 1e-12 && cy.abs() < 1e-12);
    }

    #[test]
    fn gaussian_intensity_fwhm() {
        let dx = 15e-6;
        let g = Grid::square(512, dx, 1554.7e-9).unwrap();
        let w0 = 1e-3;
        let f = gaussian_mode(w0, g).unwrap();
        let row: Vec<f64> = (0..g.nx).map(|i| f.at(i, g.ny / 2).norm_sqr()).collect();
        let p = Profile1D::new(g.xs(), row).unwrap();
        let want = w0 * (2.0 * 2f64.ln()).sqrt();
        assert!((fwhm(&p).unwrap() - want).abs() < dx);
    }

    #[test]
    fn collimated_mode_of_smf28_through_11mm_lens() {
        let d = collimated_mfd(SMF28_MFD, 11e-3, 1554.7e-9);
        assert!((d - 2.0938e-3).abs() < 1e-6, "{d}");
    }

    proptest! {
        #[test]
        fn fwhm_is_scale_invariant(c in 1e-6f64..1e6, w in 0.3f64..2.0, shift in -0.5f64..0.5) {
            let xs: Vec<f64> = (0..200).map(|i| -5.0 + 0.05 * i as f64).collect();
            let vs: Vec<f64> = xs.iter().map(|x| (-((x - shift) / w).powi(2)).exp()).collect();
            let p = Profile1D::new(xs, vs).unwrap();
            let a = fwhm(&p).unwrap();
            let b = fwhm(&p.scaled(c).unwrap()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }
}
