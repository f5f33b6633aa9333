//! Simulated diagnostics: camera, pinhole scans, main-lobe trajectories,
//! fiber coupling and the block experiment.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bench::{run_bench, BenchConfig, Element};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{ComplexField2D, IntensityImage, Normalization};
use crate::modes::{argmax, GaussianBeam, Profile1D};

/// Box-integrates intensity into square camera pixels of `pitch` and
/// peak-normalizes. Camera pixels tile the grid from its lower-left corner;
/// a partial pixel at the far edge is dropped.
pub fn camera_image(field: &ComplexField2D, pitch: f64) -> Result<IntensityImage> {
    let g = *field.grid();
    let tol = 1e-9;
    if !(pitch >= g.dx * (1.0 - tol) && pitch >= g.dy * (1.0 - tol)) {
        return Err(Error::validation(
            "pitch",
            format!("camera pitch {pitch:.3e} m is finer than the grid pitch {:.3e} m", g.dx.max(g.dy)),
        ));
    }
    let wx = bin_weights(g.nx, pitch / g.dx);
    let wy = bin_weights(g.ny, pitch / g.dy);
    let intensity = field.intensity();
    // bin along x first, then along y
    let partial: Vec<Vec<f64>> = intensity
        .par_chunks(g.nx)
        .map(|row| wx.iter().map(|bin| bin.iter().map(|&(i, w)| w * row[i]).sum()).collect())
        .collect();
    let mx = wx.len();
    let mut values = vec![0.0; mx * wy.len()];
    for (n, bin) in wy.iter().enumerate() {
        for &(j, w) in bin {
            for (m, v) in partial[j].iter().enumerate() {
                values[n * mx + m] += w * v;
            }
        }
    }
    let area = g.dx * g.dy;
    values.iter_mut().for_each(|v| *v *= area);
    let mut img = IntensityImage {
        nx: mx,
        ny: wy.len(),
        pitch,
        values,
        normalization: Normalization::Absolute,
    };
    img.normalize_peak();
    Ok(img)
}

/// Per camera pixel, the grid cells it overlaps and the overlapped fraction
/// of each cell. `ratio` is the camera pitch in grid pitches.
fn bin_weights(n: usize, ratio: f64) -> Vec<Vec<(usize, f64)>> {
    let count = ((n as f64 / ratio) * (1.0 + 1e-12)).floor() as usize;
    (0..count)
        .map(|m| {
            let lo = m as f64 * ratio;
            let hi = ((m + 1) as f64 * ratio).min(n as f64);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n);
            (first..last)
                .filter_map(|i| {
                    let w = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (w > 1e-12).then_some((i, w.min(1.0)))
                })
                .collect()
        })
        .collect()
}

/// Pinhole line scan along x.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub profile: Profile1D,
    pub diameter: f64,
    pub step: f64,
    pub range: f64,
    /// Row the scan follows (m).
    pub axis_y: f64,
    pub label: String,
}

impl ScanResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# plane={}", self.label);
        let _ = writeln!(out, "# pinhole_diameter_m={:e}", self.diameter);
        let _ = writeln!(out, "# step_m={:e}", self.step);
        let _ = writeln!(out, "# range_m={:e}", self.range);
        let _ = writeln!(out, "# axis_y_m={:e}", self.axis_y);
        out.push_str(&self.profile.to_csv());
        out
    }
}

/// Supersampling per grid cell used for the pinhole disc.
const DISC_SUBSAMPLES: usize = 8;

/// Power through a disc of `diameter` centered at `(cx, cy)`. Cells on the
/// rim contribute their covered fraction.
pub fn disc_power(field: &ComplexField2D, diameter: f64, center: (f64, f64)) -> Result<f64> {
    let g = *field.grid();
    let r = diameter / 2.0;
    let (cx, cy) = center;
    let half_x = g.extent_x() / 2.0;
    let half_y = g.extent_y() / 2.0;
    if cx - r < -half_x || cx + r > half_x - g.dx || cy - r < -half_y || cy + r > half_y - g.dy {
        return Err(Error::validation(
            "scan",
            format!("pinhole at ({cx:.4e}, {cy:.4e}) m leaves the grid"),
        ));
    }
    let i0 = ((cx - r) / g.dx + g.nx as f64 / 2.0).floor().max(0.0) as usize;
    let i1 = (((cx + r) / g.dx + g.nx as f64 / 2.0).ceil() as usize + 1).min(g.nx);
    let j0 = ((cy - r) / g.dy + g.ny as f64 / 2.0).floor().max(0.0) as usize;
    let j1 = (((cy + r) / g.dy + g.ny as f64 / 2.0).ceil() as usize + 1).min(g.ny);
    let s = DISC_SUBSAMPLES as f64;
    let r2 = r * r;
    let mut total = 0.0;
    for j in j0..j1 {
        for i in i0..i1 {
            let mut inside = 0usize;
            for sj in 0..DISC_SUBSAMPLES {
                let y = g.y(j) + ((sj as f64 + 0.5) / s - 0.5) * g.dy - cy;
                for si in 0..DISC_SUBSAMPLES {
                    let x = g.x(i) + ((si as f64 + 0.5) / s - 0.5) * g.dx - cx;
                    if x * x + y * y <= r2 {
                        inside += 1;
                    }
                }
            }
            if inside > 0 {
                total += field.at(i, j).norm_sqr() * inside as f64 / (s * s);
            }
        }
    }
    Ok(total * g.dx * g.dy)
}

/// Scans a pinhole of `diameter` along x across `range` centered on
/// `center_x`, at height `axis_y`, in increments of `step`.
pub fn pinhole_scan(
    field: &ComplexField2D,
    diameter: f64,
    step: f64,
    range: f64,
    center_x: f64,
    axis_y: f64,
) -> Result<ScanResult> {
    if !(diameter > 0.0) {
        return Err(Error::validation("diameter", "pinhole diameter must be > 0"));
    }
    if !(step > 0.0) || !(range >= 2.0 * step) {
        return Err(Error::validation("range", format!("range {range} must cover at least two steps of {step}")));
    }
    let count = (range / step).round() as usize + 1;
    let positions: Vec<f64> = (0..count)
        .map(|k| center_x - range / 2.0 + k as f64 * step)
        .collect();
    let values = positions
        .par_iter()
        .map(|&x| disc_power(field, diameter, (x, axis_y)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScanResult {
        profile: Profile1D::new(positions, values)?,
        diameter,
        step,
        range,
        axis_y,
        label: String::new(),
    })
}

/// One plane of a trajectory measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub z: f64,
    pub x_peak: f64,
    /// Another distinct lobe came within the ambiguity window; the plane is
    /// left out of the fit.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFit {
    pub points: Vec<TrajectoryPoint>,
    /// `x = c0 + c1·z + c2·z²`
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub r2: f64,
}

impl TrajectoryFit {
    /// Fitted position at `z`.
    pub fn position(&self, z: f64) -> f64 {
        self.c0 + self.c1 * z + self.c2 * z * z
    }

    /// Quadratic (acceleration) part of the deflection, `c2·z²`.
    pub fn deflection(&self, z: f64) -> f64 {
        self.c2 * z * z
    }

    pub fn excluded(&self) -> usize {
        self.points.iter().filter(|p| p.ambiguous).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fit x = c0 + c1*z + c2*z^2");
        let _ = writeln!(out, "# c0_m={:e}", self.c0);
        let _ = writeln!(out, "# c1={:e}", self.c1);
        let _ = writeln!(out, "# c2_per_m={:e}", self.c2);
        let _ = writeln!(out, "# r2={}", self.r2);
        let _ = writeln!(out, "# excluded_planes={}", self.excluded());
        out.push_str("z_m,x_peak_m,ambiguous\n");
        for p in &self.points {
            let _ = writeln!(out, "{:e},{:e},{}", p.z, p.x_peak, p.ambiguous as u8);
        }
        out
    }
}

/// Default ambiguity window (dB) between the main lobe and the next
/// distinct lobe of the y-integrated profile.
pub const DEFAULT_AMBIGUITY_DB: f64 = 0.5;

/// Sub-pixel peak of a sampled profile by 3-point parabolic interpolation,
/// in fractional sample index.
pub fn parabolic_peak(values: &[f64]) -> Option<f64> {
    if values.len() < 3 {
        return None;
    }
    let k = argmax(values);
    if k == 0 || k + 1 == values.len() {
        return None;
    }
    let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
    let den = a - 2.0 * b + c;
    let delta = if den < 0.0 { 0.5 * (a - c) / den } else { 0.0 };
    Some(k as f64 + delta.clamp(-0.5, 0.5))
}

/// True if another lobe, separated from the global peak by a dip below half
/// of the smaller of the two, reaches within `window_db` of the peak.
pub fn has_rival_lobe(values: &[f64], window_db: f64) -> bool {
    let k = argmax(values);
    let peak = values[k];
    if !(peak > 0.0) {
        return false;
    }
    let threshold = peak * 10f64.powf(-window_db / 10.0);
    let rival = |range: &mut dyn Iterator<Item = usize>| {
        let mut dip = peak;
        for m in range {
            let v = values[m];
            dip = dip.min(v);
            if v >= threshold && dip < 0.5 * v.min(peak) {
                return true;
            }
        }
        false
    };
    rival(&mut (k + 1..values.len())) || rival(&mut (0..k).rev())
}

/// Main-lobe x position for each plane and a least-squares parabola in z.
pub fn peak_trajectory(taps: &[(f64, &ComplexField2D)], window_db: f64) -> Result<TrajectoryFit> {
    if taps.len() < 3 {
        return Err(Error::validation("taps", format!("need at least 3 planes, got {}", taps.len())));
    }
    let mut points = Vec::with_capacity(taps.len());
    for (z, field) in taps {
        let g = field.grid();
        let profile = field.y_integrated_profile();
        let idx = parabolic_peak(&profile)
            .ok_or_else(|| Error::Numerical(format!("peak at z = {z} m sits on the grid boundary")))?;
        let x_peak = g.x(0) + idx * g.dx;
        points.push(TrajectoryPoint {
            z: *z,
            x_peak,
            ambiguous: has_rival_lobe(&profile, window_db),
        });
    }
    let used: Vec<(f64, f64)> = points.iter().filter(|p| !p.ambiguous).map(|p| (p.z, p.x_peak)).collect();
    if used.len() < 3 {
        return Err(Error::Numerical(format!(
            "only {} unambiguous planes remain, need 3 for a quadratic fit",
            used.len()
        )));
    }
    let (c, r2) = quadratic_fit(&used)?;
    Ok(TrajectoryFit {
        points,
        c0: c[0],
        c1: c[1],
        c2: c[2],
        r2,
    })
}

/// Least-squares `y = c0 + c1 x + c2 x²` and its coefficient of determination.
pub fn quadratic_fit(points: &[(f64, f64)]) -> Result<([f64; 3], f64)> {
    // normal equations on centered and scaled abscissae for conditioning
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let scale = points.iter().map(|p| (p.0 - mean).abs()).fold(0.0, f64::max).max(1e-300);
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for &(x, y) in points {
        let t = (x - mean) / scale;
        let basis = [1.0, t, t * t];
        for r in 0..3 {
            rhs[r] += basis[r] * y;
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c];
            }
        }
    }
    let d = solve3(m, rhs).ok_or_else(|| Error::Numerical("quadratic fit is singular".into()))?;
    // back to x = mean + scale·t
    let c2 = d[2] / (scale * scale);
    let c1 = d[1] / scale - 2.0 * c2 * mean;
    let c0 = d[0] - d[1] * mean / scale + c2 * mean * mean;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - ybar).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let t = (x - mean) / scale;
            (y - (d[0] + d[1] * t + d[2] * t * t)).powi(2)
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(([c0, c1, c2], r2))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Normalized mode overlap `|⟨f, mode⟩|² / (‖f‖²‖mode‖²)`.
pub fn coupling_efficiency(field: &ComplexField2D, mode: &ComplexField2D) -> Result<f64> {
    let ip = field.inner(mode)?;
    let nf = field.inner(field)?.re;
    let nm = mode.inner(mode)?.re;
    if !(nf > 0.0 && nm > 0.0) {
        return Err(Error::validation("field", "coupling into or from a zero field is undefined"));
    }
    Ok((ip.norm_sqr() / (nf * nm)).clamp(0.0, 1.0))
}

/// Overlap fidelity maximized over cyclic integer-sample translations of
/// `b`, returned with the shift `(di, dj)` that moves `b` onto `a`.
pub fn best_shift_overlap(a: &ComplexField2D, b: &ComplexField2D) -> Result<(f64, (isize, isize))> {
    let g = *a.grid();
    if !g.same_sampling(b.grid()) {
        return Err(Error::validation("grid", "fields sample different grids"));
    }
    let fft = Fft2::new(g.nx, g.ny);
    let mut fa = a.data().to_vec();
    let mut fb = b.data().to_vec();
    fft.forward(&mut fa);
    fft.forward(&mut fb);
    // corr[s] = Σ conj(a[x]) b[x − s]
    let mut corr: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    fft.inverse(&mut corr);
    let (best, _) = corr
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, c)| if c.norm_sqr() > bv { (i, c.norm_sqr()) } else { (bi, bv) });
    let na: f64 = a.data().iter().map(|c| c.norm_sqr()).sum();
    let nb: f64 = b.data().iter().map(|c| c.norm_sqr()).sum();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::validation("field", "overlap with a zero field is undefined"));
    }
    let fidelity = (corr[best].norm_sqr() / (na * nb)).min(1.0);
    let wrap = |k: usize, n: usize| if k > n / 2 { k as isize - n as isize } else { k as isize };
    // corr peaks at s where b shifted by −s matches a
    let (si, sj) = (best % g.nx, best / g.nx);
    Ok((fidelity, (-wrap(si, g.nx), -wrap(sj, g.ny))))
}

/// What collects the light at the end of a block experiment. The collector
/// is placed using the unblocked run and kept fixed for the blocked one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collector {
    /// Fiber behind a collimator, seen in the beam plane as a Gaussian of
    /// this mode-field diameter, centered on the beam's peak and aligned to
    /// the local propagation direction there.
    Fiber { mfd: f64 },
    /// Power through a disc centered on the beam's peak.
    Pinhole { diameter: f64 },
    /// Total power.
    Total,
}

impl std::fmt::Display for Collector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Collector::Fiber { mfd } => write!(f, "fiber(mfd={mfd:e}m)"),
            Collector::Pinhole { diameter } => write!(f, "pinhole(d={diameter:e}m)"),
            Collector::Total => f.write_str("total"),
        }
    }
}

/// A collector placed against a reference field.
#[derive(Debug, Clone)]
pub enum PlacedCollector {
    Mode(ComplexField2D),
    Disc { diameter: f64, center: (f64, f64) },
    Total,
}

impl PlacedCollector {
    pub fn place(kind: Collector, reference: &ComplexField2D) -> Result<Self> {
        let g = *reference.grid();
        let (pi, pj) = reference.argmax();
        let center = (g.x(pi), g.y(pj));
        Ok(match kind {
            Collector::Fiber { mfd } => {
                let k = g.wavenumber();
                let local = |a: Complex64, b: Complex64, d: f64| (b * a.conj()).arg() / (2.0 * d);
                let kx = if pi > 0 && pi + 1 < g.nx {
                    local(reference.at(pi - 1, pj), reference.at(pi + 1, pj), g.dx)
                } else {
                    0.0
                };
                let ky = if pj > 0 && pj + 1 < g.ny {
                    local(reference.at(pi, pj - 1), reference.at(pi, pj + 1), g.dy)
                } else {
                    0.0
                };
                PlacedCollector::Mode(
                    GaussianBeam {
                        w0: mfd / 2.0,
                        center,
                        tilt: (kx / k, ky / k),
                    }
                    .sample(g)?,
                )
            }
            Collector::Pinhole { diameter } => PlacedCollector::Disc { diameter, center },
            Collector::Total => PlacedCollector::Total,
        })
    }

    /// Collected power, in units of the field's total power for the mode
    /// collector (coupling efficiency times power).
    pub fn collect(&self, field: &ComplexField2D) -> Result<f64> {
        match self {
            PlacedCollector::Mode(mode) => {
                let ip = field.inner(mode)?;
                Ok(ip.norm_sqr() / mode.inner(mode)?.re)
            }
            PlacedCollector::Disc { diameter, center } => disc_power(field, *diameter, *center),
            PlacedCollector::Total => Ok(field.total_power()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropReport {
    pub p_with: f64,
    pub p_without: f64,
    pub drop: f64,
    pub collector: String,
    pub tap: String,
}

impl DropReport {
    pub fn new(p_with: f64, p_without: f64) -> Result<Self> {
        if !(p_without > 0.0) {
            return Err(Error::Numerical("no power collected without the block".into()));
        }
        Ok(DropReport {
            p_with,
            p_without,
            drop: 1.0 - p_with / p_without,
            collector: String::new(),
            tap: String::new(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p_with={:e}", self.p_with);
        let _ = writeln!(out, "p_without={:e}", self.p_without);
        let _ = writeln!(out, "drop={}", self.drop);
        let _ = writeln!(out, "collector={}", self.collector);
        let _ = writeln!(out, "tap={}", self.tap);
        out
    }

    /// Reads the `drop` value back from [`DropReport::to_text`] output.
    pub fn parse_drop(text: &str) -> Result<f64> {
        text.lines()
            .find_map(|l| l.strip_prefix("drop="))
            .ok_or_else(|| Error::validation("drop_report", "no drop= line"))?
            .trim()
            .parse()
            .map_err(|_| Error::validation("drop_report", "malformed drop value"))
    }
}

/// Runs the bench with and without its single block element and compares
/// the power the collector gathers at the last tap.
pub fn block_experiment(cfg: &BenchConfig, collector: Collector) -> Result<DropReport> {
    let blocks = cfg
        .elements
        .iter()
        .filter(|(_, e)| matches!(e, Element::Block { .. }))
        .count();
    if blocks != 1 {
        return Err(Error::validation("bench", format!("block experiment needs exactly one block, found {blocks}")));
    }
    let tap = cfg
        .tap_labels()
        .last()
        .map(|s| s.to_string())
        .ok_or_else(|| Error::validation("bench", "block experiment needs a final tap"))?;
    let last = |c: &BenchConfig| -> Result<ComplexField2D> {
        Ok(run_bench(c)?.pop().expect("bench has a tap").field)
    };
    let open = last(&cfg.without_blocks())?;
    let placed = PlacedCollector::place(collector, &open)?;
    let p_without = placed.collect(&open)?;
    drop(open);
    let blocked = last(cfg)?;
    let p_with = placed.collect(&blocked)?;
    let mut report = DropReport::new(p_with, p_without)?;
    report.collector = collector.to_string();
    report.tap = tap;
    Ok(report)
}

/// Normalized correlation of two profiles after rolling `b` so that its
/// maximum lines up with the maximum of `a`.
pub fn peak_aligned_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as isize;
    let shift = argmax(a) as isize - argmax(b) as isize;
    let mut s = 0.0;
    for (i, &va) in a.iter().enumerate() {
        let src = (i as isize - shift).rem_euclid(n) as usize;
        s += va * b[src];
    }
    let na: f64 = a.iter().map(|v| v * v).sum();
    let nb: f64 = b.iter().map(|v| v * v).sum();
    s / (na * nb).sqrt()
}
