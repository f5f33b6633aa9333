//! Free-space propagation and thin optical elements.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{angular_frequency, Fft2};
use crate::field::ComplexField2D;

/// Transfer function used by [`propagate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Propagator {
    /// Exact Helmholtz transfer.
    #[default]
    AngularSpectrum,
    /// Paraxial transfer, `exp(−i z (kx²+ky²)/2k)`.
    Fresnel,
}

impl std::str::FromStr for Propagator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asm" | "angular" | "angular_spectrum" => Ok(Propagator::AngularSpectrum),
            "fresnel" => Ok(Propagator::Fresnel),
            other => Err(Error::validation(
                "propagator",
                format!("unknown propagator {other:?}; expected asm or fresnel"),
            )),
        }
    }
}

/// Angular-spectrum propagation over `z` meters.
pub fn propagate(field: &ComplexField2D, z: f64) -> Result<ComplexField2D> {
    propagate_with(field, z, Propagator::AngularSpectrum)
}

/// Propagates over `z ≥ 0`. The common carrier `exp(ikz)` is dropped, so a
/// plane wave along the axis is left unchanged.
pub fn propagate_with(field: &ComplexField2D, z: f64, method: Propagator) -> Result<ComplexField2D> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::validation("z", format!("propagation distance {z} must be finite and >= 0")));
    }
    let mut out = field.clone();
    if z == 0.0 {
        return Ok(out);
    }
    let g = *field.grid();
    let k = g.wavenumber();
    let k2 = k * k;
    let kx: Vec<f64> = (0..g.nx).map(|i| angular_frequency(i, g.nx, g.dx)).collect();
    let ky: Vec<f64> = (0..g.ny).map(|j| angular_frequency(j, g.ny, g.dy)).collect();
    let fft = Fft2::new(g.nx, g.ny);
    fft.forward(out.data_mut());
    out.data_mut()
        .par_chunks_mut(g.nx)
        .zip(ky.par_iter())
        .for_each(|(row, &ky)| {
            for (c, &kx) in row.iter_mut().zip(&kx) {
                let q = kx * kx + ky * ky;
                *c *= match method {
                    Propagator::Fresnel => Complex64::cis(-z * q / (2.0 * k)),
                    Propagator::AngularSpectrum if q <= k2 => {
                        // kz − k, written to avoid cancellation
                        Complex64::cis(-z * q / (k + (k2 - q).sqrt()))
                    }
                    Propagator::AngularSpectrum => {
                        Complex64::from_polar((-z * (q - k2).sqrt()).exp(), -k * z)
                    }
                };
            }
        });
    fft.inverse(out.data_mut());
    Ok(out)
}

/// Thin lens: multiplies by `exp(−ik(x²+y²)/2f)`.
pub fn apply_lens(field: &ComplexField2D, focal: f64) -> Result<ComplexField2D> {
    if focal == 0.0 || !focal.is_finite() {
        return Err(Error::validation("f", format!("focal length {focal} must be finite and nonzero")));
    }
    let g = *field.grid();
    let c = g.wavenumber() / (2.0 * focal);
    let xs = g.xs();
    let mut out = field.clone();
    out.data_mut()
        .par_chunks_mut(g.nx)
        .enumerate()
        .for_each(|(j, row)| {
            let y = g.y(j);
            for (v, x) in row.iter_mut().zip(&xs) {
                *v *= Complex64::cis(-c * (x * x + y * y));
            }
        });
    Ok(out)
}

/// Linear phase `exp(i(kx·x + ky·y))`.
pub fn apply_tilt(field: &ComplexField2D, kx: f64, ky: f64) -> ComplexField2D {
    let g = *field.grid();
    let mut out = field.clone();
    out.data_mut()
        .par_chunks_mut(g.nx)
        .enumerate()
        .for_each(|(j, row)| {
            let py = ky * g.y(j);
            for (i, v) in row.iter_mut().enumerate() {
                *v *= Complex64::cis(kx * g.x(i) + py);
            }
        });
    out
}

/// Which half-plane a block screen covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSide {
    /// Covers `x ≤ edge`.
    Left,
    /// Covers `x ≥ edge`.
    Right,
}

impl std::str::FromStr for BlockSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(BlockSide::Left),
            "right" => Ok(BlockSide::Right),
            other => Err(Error::validation("side", format!("{other:?} is not left or right"))),
        }
    }
}

impl std::fmt::Display for BlockSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlockSide::Left => "left",
            BlockSide::Right => "right",
        })
    }
}

/// Thin absorbing half-plane screen with its edge at `x = edge`.
pub fn apply_block(field: &ComplexField2D, edge: f64, side: BlockSide) -> ComplexField2D {
    let g = *field.grid();
    let blocked: Vec<bool> = (0..g.nx)
        .map(|i| match side {
            BlockSide::Left => g.x(i) <= edge,
            BlockSide::Right => g.x(i) >= edge,
        })
        .collect();
    let mut out = field.clone();
    for row in out.data_mut().chunks_mut(g.nx) {
        for (v, b) in row.iter_mut().zip(&blocked) {
            if *b {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    out
}

/// Zeroes everything outside the disc of `diameter` centered at `center`.
/// Samples exactly on the rim are kept.
pub fn apply_circular_aperture(field: &ComplexField2D, diameter: f64, center: (f64, f64)) -> Result<ComplexField2D> {
    if !(diameter >= 0.0) {
        return Err(Error::validation("d", format!("aperture diameter {diameter} must be >= 0")));
    }
    let g = *field.grid();
    let r2 = (diameter / 2.0).powi(2);
    let mut out = field.clone();
    out.data_mut()
        .par_chunks_mut(g.nx)
        .enumerate()
        .for_each(|(j, row)| {
            let dy = g.y(j) - center.1;
            for (i, v) in row.iter_mut().enumerate() {
                let dx = g.x(i) - center.0;
                if diameter == 0.0 || dx * dx + dy * dy > r2 {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        });
    Ok(out)
}
