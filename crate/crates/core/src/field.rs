//! Sampled complex fields on a uniform, center-anchored grid.
//!
//! Sample `(i, j)` sits at `((i - nx/2)·dx, (j - ny/2)·dy)` with integer
//! division, and the amplitude array is row-major with `i` (x) fastest.
//! Every module in the crate relies on this convention.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 4] = b"AFLD";
pub const FIELD_VERSION: u32 = 1;
/// magic + version + nx + ny + dx + dy + wavelength
pub const FIELD_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8 + 8;

/// Grid metadata shared by all fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub wavelength: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, wavelength: f64) -> Result<Self> {
        if nx < 2 {
            return Err(Error::validation("nx", format!("{nx} < 2")));
        }
        if ny < 2 {
            return Err(Error::validation("ny", format!("{ny} < 2")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::validation("dx", format!("{dx} is not a positive pitch")));
        }
        if !(dy > 0.0 && dy.is_finite()) {
            return Err(Error::validation("dy", format!("{dy} is not a positive pitch")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::validation(
                "wavelength",
                format!("{wavelength} is not a positive length"),
            ));
        }
        Ok(Grid {
            nx,
            ny,
            dx,
            dy,
            wavelength,
        })
    }

    /// Square grid with equal pitch on both axes.
    pub fn square(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        Grid::new(n, n, pitch, pitch, wavelength)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - (self.nx / 2) as f64) * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - (self.ny / 2) as f64) * self.dy
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    pub fn extent_x(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn extent_y(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Nearest sample index along x, if the coordinate lies on the grid.
    pub fn index_x(&self, x: f64) -> Option<usize> {
        let i = (x / self.dx).round() + (self.nx / 2) as f64;
        (i >= 0.0 && i < self.nx as f64).then_some(i as usize)
    }

    pub fn index_y(&self, y: f64) -> Option<usize> {
        let j = (y / self.dy).round() + (self.ny / 2) as f64;
        (j >= 0.0 && j < self.ny as f64).then_some(j as usize)
    }

    pub fn same_sampling(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Sampled transverse complex amplitude. Intensity is `|amplitude|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    grid: Grid,
    data: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, wavelength: f64) -> Result<Self> {
        Ok(Self::zeros(Grid::new(nx, ny, dx, dy, wavelength)?))
    }

    pub fn zeros(grid: Grid) -> Self {
        ComplexField2D {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_data(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::validation(
                "amplitude",
                format!("length {} != nx·ny = {}", data.len(), grid.len()),
            ));
        }
        Ok(ComplexField2D { grid, data })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                data.push(f(grid.x(i), y));
            }
        }
        ComplexField2D { grid, data }
    }

    /// Outer product `row[i] · col[j]`, used for separable modes.
    pub fn separable(grid: Grid, along_x: &[Complex64], along_y: &[Complex64]) -> Result<Self> {
        if along_x.len() != grid.nx || along_y.len() != grid.ny {
            return Err(Error::validation(
                "amplitude",
                "separable factors do not match grid dimensions",
            ));
        }
        let mut data = Vec::with_capacity(grid.len());
        for cy in along_y {
            data.extend(along_x.iter().map(|cx| cx * cy));
        }
        Ok(ComplexField2D { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn ny(&self) -> usize {
        self.grid.ny
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.grid.nx + i]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[j * self.grid.nx + i]
    }

    /// Σ|a|²·dx·dy, summed in storage order.
    pub fn total_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx * self.grid.dy
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn peak_intensity(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max)
    }

    /// Index `(i, j)` of the brightest sample; first one wins on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (k, c) in self.data.iter().enumerate() {
            let v = c.norm_sqr();
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        (best % self.grid.nx, best / self.grid.nx)
    }

    /// Intensity-weighted centroid in meters. `None` for an all-zero field.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut sum = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for j in 0..self.grid.ny {
            let y = self.grid.y(j);
            for i in 0..self.grid.nx {
                let w = self.at(i, j).norm_sqr();
                sum += w;
                sx += w * self.grid.x(i);
                sy += w * y;
            }
        }
        (sum > 0.0).then(|| (sx / sum, sy / sum))
    }

    /// Intensity integrated along y, one value per column.
    pub fn y_integrated_profile(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.nx];
        for row in self.data.chunks_exact(self.grid.nx) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c.norm_sqr();
            }
        }
        for o in &mut out {
            *o *= self.grid.dy;
        }
        out
    }

    pub fn scale(&mut self, s: Complex64) {
        for c in &mut self.data {
            *c *= s;
        }
    }

    pub fn scaled(mut self, s: Complex64) -> Self {
        self.scale(s);
        self
    }

    /// Rescales so the total power is one. Zero fields are left untouched.
    pub fn normalize_power(&mut self) {
        let p = self.total_power();
        if p > 0.0 {
            self.scale(Complex64::new(1.0 / p.sqrt(), 0.0));
        }
    }

    /// Rescales so the peak intensity is one.
    pub fn normalize_peak(&mut self) {
        let p = self.peak_intensity();
        if p > 0.0 {
            self.scale(Complex64::new(1.0 / p.sqrt(), 0.0));
        }
    }

    /// ⟨self, other⟩ = Σ conj(self)·other·dx·dy.
    pub fn inner(&self, other: &ComplexField2D) -> Result<Complex64> {
        if !self.grid.same_sampling(&other.grid) {
            return Err(Error::validation("grid", "fields are sampled on different grids"));
        }
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.dx * self.grid.dy)
    }

    /// Cyclic shift by whole samples (positive moves content toward +x/+y).
    pub fn roll(&self, di: isize, dj: isize) -> ComplexField2D {
        let (nx, ny) = (self.grid.nx as isize, self.grid.ny as isize);
        let mut out = ComplexField2D::zeros(self.grid);
        for j in 0..ny {
            let tj = (j + dj).rem_euclid(ny) as usize;
            for i in 0..nx {
                let ti = (i + di).rem_euclid(nx) as usize;
                *out.at_mut(ti, tj) = self.at(i as usize, j as usize);
            }
        }
        out
    }

    /// Fraction of the total power carried by the outermost `width` samples
    /// on every side.
    pub fn edge_power_fraction(&self, width: usize) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut edge = 0.0;
        let mut total = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let v = self.at(i, j).norm_sqr();
                total += v;
                if i < width || j < width || i + width >= nx || j + width >= ny {
                    edge += v;
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIELD_HEADER_LEN + self.data.len() * 16);
        out.extend_from_slice(FIELD_MAGIC);
        out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.nx as u32).to_le_bytes());
        out.extend_from_slice(&(self.grid.ny as u32).to_le_bytes());
        out.extend_from_slice(&self.grid.dx.to_le_bytes());
        out.extend_from_slice(&self.grid.dy.to_le_bytes());
        out.extend_from_slice(&self.grid.wavelength.to_le_bytes());
        for c in &self.data {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            let mut found = [0u8; 4];
            found[..bytes.len()].copy_from_slice(bytes);
            return Err(Error::BadMagic { found });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != FIELD_MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        if bytes.len() < FIELD_HEADER_LEN {
            return Err(Error::Truncated {
                expected: FIELD_HEADER_LEN,
                got: bytes.len(),
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != FIELD_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: FIELD_VERSION,
            });
        }
        let grid = Grid::new(
            u32_at(8) as usize,
            u32_at(12) as usize,
            f64_at(16),
            f64_at(24),
            f64_at(32),
        )?;
        let expected = FIELD_HEADER_LEN + grid.len() * 16;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                expected,
                got: bytes.len(),
            });
        }
        let data = bytes[FIELD_HEADER_LEN..expected]
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(ComplexField2D { grid, data })
    }
}

pub fn write_field(field: &ComplexField2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&field.to_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ComplexField2D> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    ComplexField2D::from_bytes(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Peak,
    Absolute,
}

/// Nonnegative intensity samples, as a camera would record them.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl IntensityImage {
    pub fn from_field(field: &ComplexField2D) -> Self {
        IntensityImage {
            nx: field.nx(),
            ny: field.ny(),
            pitch: field.grid().dx,
            values: field.intensity(),
            normalization: Normalization::Absolute,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn normalize_peak(&mut self) {
        let p = self.peak();
        if p > 0.0 {
            for v in &mut self.values {
                *v /= p;
            }
        }
        self.normalization = Normalization::Peak;
    }

    /// Coordinate of pixel column `i`, same centering rule as [`Grid`].
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - (self.nx / 2) as f64) * self.pitch
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    /// Binary 16-bit PGM, peak-normalized, top row = largest y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let peak = self.peak();
        let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
        encode_pgm16(self.nx, self.ny, |i, j| {
            (self.at(i, j) * scale).round().clamp(0.0, 65535.0) as u16
        })
    }
}

pub(crate) fn encode_pgm16(nx: usize, ny: usize, mut value: impl FnMut(usize, usize) -> u16) -> Vec<u8> {
    let mut out = format!("P5\n{nx} {ny}\n65535\n").into_bytes();
    out.reserve(nx * ny * 2);
    for j in (0..ny).rev() {
        for i in 0..nx {
            out.extend_from_slice(&value(i, j).to_be_bytes());
        }
    }
    out
}

/// Parses a binary 16-bit PGM written by [`encode_pgm16`]. Returns
/// `(nx, ny, values)` with row 0 = smallest y.
pub(crate) fn decode_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let bad = |m: &str| Error::validation("pgm", m.to_string());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (nx, ny, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 65535 {
        return Err(bad("only 16-bit PGM is supported"));
    }
    pos += 1;
    let need = nx * ny * 2;
    if bytes.len() < pos + need {
        return Err(Error::Truncated {
            expected: pos + need,
            got: bytes.len(),
        });
    }
    let mut values = vec![0u16; nx * ny];
    for (k, c) in bytes[pos..pos + need].chunks_exact(2).enumerate() {
        let (row, i) = (k / nx, k % nx);
        let j = ny - 1 - row;
        values[j * nx + i] = u16::from_be_bytes([c[0], c[1]]);
    }
    Ok((nx, ny, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_extent() {
        let g = Grid::new(2048, 2048, 15e-6, 15e-6, 1554.7e-9).unwrap();
        assert!((g.extent_x() - 3.072e-2).abs() < 1e-15);
        let f = ComplexField2D::zeros(g);
        assert_eq!(f.data().len(), 2048 * 2048);
    }

    #[test]
    fn minimal_field_is_legal() {
        let f = ComplexField2D::new(2, 2, 1e-6, 1e-6, 1e-6).unwrap();
        assert_eq!(f.total_power(), 0.0);
    }

    #[test]
    fn invalid_dimensions_name_the_field() {
        match ComplexField2D::new(0, 4, 1e-6, 1e-6, 1e-6) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "nx"),
            other => panic!("unexpected {other:?}"),
        }
        match Grid::new(4, 4, 1e-6, -1.0, 1e-6) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "dy"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Grid::new(4, 4, 1e-6, 1e-6, 0.0).is_err());
    }

    #[test]
    fn uniform_power_sums_samples() {
        let g = Grid::new(2, 2, 1.0, 1.0, 1e-6).unwrap();
        let f = ComplexField2D::from_fn(g, |_, _| Complex64::new(1.0, 0.0));
        assert_eq!(f.total_power(), 4.0);
    }

    #[test]
    fn single_center_sample_has_zero_centroid() {
        for (nx, ny) in [(8, 8), (7, 5), (2, 3)] {
            let g = Grid::new(nx, ny, 2e-6, 3e-6, 1e-6).unwrap();
            let mut f = ComplexField2D::zeros(g);
            *f.at_mut(nx / 2, ny / 2) = Complex64::new(0.3, -0.2);
            assert_eq!(f.centroid(), Some((0.0, 0.0)));
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut bytes = ComplexField2D::new(2, 2, 1e-6, 1e-6, 1e-6).unwrap().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(ComplexField2D::from_bytes(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn version_and_truncation_are_distinct_errors() {
        let f = ComplexField2D::new(3, 2, 1e-6, 1e-6, 1e-6).unwrap();
        let mut bytes = f.to_bytes();
        bytes[4] = 2;
        assert!(matches!(
            ComplexField2D::from_bytes(&bytes),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
        let bytes = f.to_bytes();
        assert!(matches!(
            ComplexField2D::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            ComplexField2D::from_bytes(&bytes[..10]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn pgm_roundtrip_keeps_orientation() {
        let bytes = encode_pgm16(3, 2, |i, j| (10 * j + i) as u16);
        let (nx, ny, v) = decode_pgm16(&bytes).unwrap();
        assert_eq!((nx, ny), (3, 2));
        assert_eq!(v, vec![0, 1, 2, 10, 11, 12]);
    }
}
