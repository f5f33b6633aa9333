//! Cubic-plus-ramp SLM phase masks.
//!
//! A Gaussian of amplitude waist `w_g` carrying the cubic phase
//! `−(u³+v³)/(3w³)` and placed in the front focal plane of a lens of focal
//! length `f` produces, in the back focal plane, the finite-energy Airy mode
//! with `x0 = λf/(2πw)` and `a = (w/w_g)²`, shifted by `−a²·x0` per axis.
//! The cubic enters with a minus sign because the lens maps the mask through
//! a forward transform; with the plus sign the mode comes out mirrored.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{decode_pgm16, encode_pgm16, ComplexField2D};

/// Continuous mask design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskDesign {
    /// Cubic scale `w` (m); `f64::INFINITY` disables the cubic term.
    pub cubic_scale: f64,
    /// Linear ramp along x (rad/m); positive deflects toward +x.
    pub k_ramp: f64,
    pub focal: f64,
    pub wavelength: f64,
    /// Incident Gaussian amplitude 1/e radius `w_g` (m).
    pub waist: f64,
    /// Mask side length (m).
    pub extent: f64,
    /// Pixel pitch (m).
    pub pixel: f64,
}

impl MaskDesign {
    pub fn new(
        cubic_scale: f64,
        k_ramp: f64,
        focal: f64,
        wavelength: f64,
        waist: f64,
        extent: f64,
        pixel: f64,
    ) -> Result<Self> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::validation(name, format!("{v} must be > 0")))
            }
        };
        positive("w", cubic_scale)?;
        positive("f", focal)?;
        positive("wavelength", wavelength)?;
        positive("w_g", waist)?;
        positive("extent", extent)?;
        positive("pixel", pixel)?;
        if !k_ramp.is_finite() {
            return Err(Error::validation("k_ramp", "must be finite"));
        }
        if extent < 2.0 * pixel {
            return Err(Error::validation("extent", "mask must span at least two pixels"));
        }
        Ok(MaskDesign {
            cubic_scale,
            k_ramp,
            focal,
            wavelength,
            waist,
            extent,
            pixel,
        })
    }

    /// Airy scaling factor this design targets, `λf/(2πw)`.
    pub fn target_x0(&self) -> f64 {
        self.wavelength * self.focal / (TAU * self.cubic_scale)
    }

    /// Truncation factor `(w/w_g)²`.
    pub fn truncation(&self) -> f64 {
        (self.cubic_scale / self.waist).powi(2)
    }

    /// True when the Gaussian is wider than the mask half-width.
    pub fn gaussian_clipped(&self) -> bool {
        self.waist > self.extent / 2.0
    }

    pub fn pixels_per_side(&self) -> usize {
        (self.extent / self.pixel).round().max(1.0) as usize
    }

    pub fn with_ramp(mut self, k_ramp: f64) -> Self {
        self.k_ramp = k_ramp;
        self
    }

    pub fn with_waist(mut self, waist: f64) -> Result<Self> {
        if !(waist > 0.0) {
            return Err(Error::validation("w_g", format!("{waist} must be > 0")));
        }
        self.waist = waist;
        Ok(self)
    }

    /// Continuous (unwrapped) phase at mask coordinates `(u, v)`.
    pub fn phase_at(&self, u: f64, v: f64) -> f64 {
        let w3 = self.cubic_scale.powi(3);
        -(u * u * u + v * v * v) / (3.0 * w3) + self.k_ramp * u
    }

    /// Ramp that sends the first order `pixels` pixels per 2π along x.
    pub fn ramp_for_period(pixel: f64, pixels: f64) -> f64 {
        if pixels == 0.0 {
            0.0
        } else {
            TAU / (pixels * pixel)
        }
    }
}

pub const DEFAULT_RAMP_PIXELS: f64 = 8.0;

/// Designs the mask that produces the Airy mode `(x0, x0, a)` behind a
/// Fourier lens of focal length `f`. The ramp defaults to one period per
/// eight pixels.
pub fn design_for_airy(x0: f64, a: f64, f: f64, wavelength: f64, extent: f64, pixel: f64) -> Result<MaskDesign> {
    for (name, v) in [("x0", x0), ("a", a), ("f", f), ("wavelength", wavelength)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(name, format!("{v} must be > 0")));
        }
    }
    if a >= 1.0 {
        return Err(Error::validation("a", format!("truncation too strong: a = {a} >= 1")));
    }
    let w = wavelength * f / (TAU * x0);
    let waist = w / a.sqrt();
    MaskDesign::new(
        w,
        MaskDesign::ramp_for_period(pixel, DEFAULT_RAMP_PIXELS),
        f,
        wavelength,
        waist,
        extent,
        pixel,
    )
}

/// Pixelized, wrapped phase map. Pixel `(i, j)` is centered at
/// `((i + ½ − npix_x/2)·pitch, (j + ½ − npix_y/2)·pitch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    pub npix_x: usize,
    pub npix_y: usize,
    pub pitch: f64,
    /// Row-major, values in [0, 2π).
    pub phase: Vec<f64>,
    /// Quantization level count, 0 for continuous.
    pub levels: u32,
    pub design: Option<MaskDesign>,
}

impl PhaseMask {
    pub fn uniform(npix_x: usize, npix_y: usize, pitch: f64, phase: f64) -> Result<Self> {
        if npix_x == 0 || npix_y == 0 || !(pitch > 0.0) {
            return Err(Error::validation("mask", "needs at least one pixel and a positive pitch"));
        }
        Ok(PhaseMask {
            npix_x,
            npix_y,
            pitch,
            phase: vec![wrap_phase(phase); npix_x * npix_y],
            levels: 0,
            design: None,
        })
    }

    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5 - self.npix_x as f64 / 2.0) * self.pitch,
            (j as f64 + 0.5 - self.npix_y as f64 / 2.0) * self.pitch,
        )
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.phase[j * self.npix_x + i]
    }

    pub fn extent_x(&self) -> f64 {
        self.npix_x as f64 * self.pitch
    }

    pub fn extent_y(&self) -> f64 {
        self.npix_y as f64 * self.pitch
    }

    /// 16-bit PGM with 0..2π mapped onto 0..65535.
    pub fn to_pgm(&self) -> Vec<u8> {
        encode_pgm16(self.npix_x, self.npix_y, |i, j| {
            (self.at(i, j) / TAU * 65536.0).round().clamp(0.0, 65535.0) as u16
        })
    }

    pub fn from_pgm(bytes: &[u8], pitch: f64, levels: u32) -> Result<Self> {
        let (nx, ny, raw) = decode_pgm16(bytes)?;
        let mut mask = PhaseMask::uniform(nx, ny, pitch, 0.0)?;
        mask.phase = raw.into_iter().map(|v| v as f64 / 65536.0 * TAU).collect();
        mask.levels = levels;
        Ok(mask)
    }

    /// Key=value block recording everything needed to regenerate the mask.
    pub fn sidecar(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "npix_x={}", self.npix_x);
        let _ = writeln!(out, "npix_y={}", self.npix_y);
        let _ = writeln!(out, "pitch_m={:e}", self.pitch);
        let _ = writeln!(out, "levels={}", self.levels);
        let _ = writeln!(out, "pgm_scale=phase/(2pi)*65536");
        if let Some(d) = &self.design {
            let _ = writeln!(out, "cubic_scale_m={:e}", d.cubic_scale);
            let _ = writeln!(out, "k_ramp_rad_per_m={:e}", d.k_ramp);
            let _ = writeln!(out, "focal_m={:e}", d.focal);
            let _ = writeln!(out, "wavelength_m={:e}", d.wavelength);
            let _ = writeln!(out, "gaussian_waist_m={:e}", d.waist);
            let _ = writeln!(out, "extent_m={:e}", d.extent);
            let _ = writeln!(out, "target_x0_m={:e}", d.target_x0());
            let _ = writeln!(out, "target_a={:e}", d.truncation());
        }
        out
    }
}

/// Reads `pitch_m` and `levels` from a sidecar block.
pub fn parse_sidecar(text: &str) -> Result<(f64, u32)> {
    let mut pitch = None;
    let mut levels = 0;
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        match k.trim() {
            "pitch_m" => {
                pitch = Some(v.trim().parse::<f64>().map_err(|_| Error::validation("pitch_m", "malformed"))?)
            }
            "levels" => levels = v.trim().parse().map_err(|_| Error::validation("levels", "malformed"))?,
            _ => {}
        }
    }
    let pitch = pitch.ok_or_else(|| Error::validation("pitch_m", "missing from sidecar"))?;
    Ok((pitch, levels))
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Renders the design onto the SLM pixel grid, wrapped to [0, 2π) and
/// quantized to `levels` steps when `levels > 0`.
pub fn render(design: &MaskDesign, levels: u32) -> Result<PhaseMask> {
    if levels == 1 {
        return Err(Error::validation("levels", "must be 0 (continuous) or >= 2"));
    }
    let n = design.pixels_per_side();
    let mut mask = PhaseMask::uniform(n, n, design.pixel, 0.0)?;
    let step = if levels > 0 { TAU / levels as f64 } else { 0.0 };
    let template = mask.clone();
    mask.phase
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, row)| {
            for (i, out) in row.iter_mut().enumerate() {
                let (u, v) = template.pixel_center(i, j);
                let p = wrap_phase(design.phase_at(u, v));
                *out = if levels > 0 {
                    let q = (p / step).round() as u64 % levels as u64;
                    q as f64 * step
                } else {
                    p
                };
            }
        });
    mask.levels = levels;
    mask.design = Some(*design);
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingReport {
    /// Largest local phase gradient along either pixel axis (rad/m).
    pub nu_max: f64,
    /// Nyquist limit `π/pixel` (rad/m).
    pub limit: f64,
    pub aliased: bool,
}

impl std::fmt::Display for SamplingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max local frequency {:.4e} rad/m vs limit {:.4e} rad/m: {}",
            self.nu_max,
            self.limit,
            if self.aliased { "ALIASED" } else { "not aliased" }
        )
    }
}

/// Checks the largest phase gradient of the design against the pixel
/// Nyquist limit. Along x the gradient is `k_ramp − u²/w³`, along y `−v²/w³`.
pub fn validate_sampling(design: &MaskDesign) -> SamplingReport {
    let half = design.extent / 2.0;
    let cubic = half * half / design.cubic_scale.powi(3);
    let k = design.k_ramp;
    let nu_max = k.abs().max((k - cubic).abs()).max(cubic);
    let limit = PI / design.pixel;
    SamplingReport {
        nu_max,
        limit,
        aliased: nu_max > limit,
    }
}

/// Multiplies the field by `exp(i·phase)` of the nearest mask pixel. Samples
/// outside the mask aperture are blocked.
pub fn apply_to_field(field: &ComplexField2D, mask: &PhaseMask, offset: (f64, f64)) -> Result<ComplexField2D> {
    let g = *field.grid();
    let (ox, oy) = offset;
    let (hx, hy) = (mask.extent_x() / 2.0, mask.extent_y() / 2.0);
    let (hi_x, hi_y) = (g.extent_x() / 2.0, g.extent_y() / 2.0);
    let (lo_x, lo_y) = (-hi_x, -hi_y);
    let tol = 1e-12 * (hi_x - lo_x);
    if ox - hx < lo_x - tol || ox + hx > hi_x + tol || oy - hy < lo_y - tol || oy + hy > hi_y + tol {
        return Err(Error::validation(
            "mask",
            format!(
                "mask {:.3e} x {:.3e} m at offset ({:.3e}, {:.3e}) exceeds the field extent",
                mask.extent_x(),
                mask.extent_y(),
                ox,
                oy
            ),
        ));
    }
    let lookup = |coord: f64, n: usize| -> Option<usize> {
        let idx = (coord / mask.pitch + n as f64 / 2.0).floor();
        (idx >= 0.0 && idx < n as f64).then_some(idx as usize)
    };
    let cols: Vec<Option<usize>> = (0..g.nx).map(|i| lookup(g.x(i) - ox, mask.npix_x)).collect();
    let rows: Vec<Option<usize>> = (0..g.ny).map(|j| lookup(g.y(j) - oy, mask.npix_y)).collect();
    let phasors: Vec<Complex64> = mask.phase.iter().map(|p| Complex64::cis(*p)).collect();
    let mut out = field.clone();
    out.data_mut()
        .par_chunks_mut(g.nx)
        .zip(rows.par_iter())
        .for_each(|(row, mj)| match mj {
            None => row.fill(Complex64::new(0.0, 0.0)),
            Some(mj) => {
                for (c, mi) in row.iter_mut().zip(&cols) {
                    *c = match mi {
                        Some(mi) => *c * phasors[mj * mask.npix_x + mi],
                        None => Complex64::new(0.0, 0.0),
                    };
                }
            }
        });
    Ok(out)
}
