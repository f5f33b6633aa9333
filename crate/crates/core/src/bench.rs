//! Declarative optical bench: a line-oriented document parsed into an
//! ordered element list and folded over a field.
//!
//! ```text
//! grid nx=2048 ny=2048 pitch=15um wavelength=1554.7nm
//! source gaussian w0=2.0417mm
//! slm x0=271um a=0.05 f=0.5m ramp_pixels=0
//! propagate z=0.5m; lens f=0.5m; propagate z=0.5m
//! tap focal
//! ```
//!
//! One element per line or `;`-separated, `#` starts a comment, names are
//! case-insensitive and every length needs a unit suffix.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{ComplexField2D, Grid};
use crate::mask::{self, MaskDesign, PhaseMask, DEFAULT_RAMP_PIXELS};
use crate::modes::{self, AiryParams, GaussianBeam, SMF28_MFD};
use crate::propagation::{self, BlockSide, Propagator};
use crate::units::{format_length, parse_length};

/// Outermost samples watched by the wrap-around sentinel.
pub const GUARD_WIDTH: usize = 8;
/// Default limit on the power fraction inside the guard band.
pub const DEFAULT_GUARD_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    pub wavelength: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 2048,
            ny: 2048,
            pitch: 15e-6,
            wavelength: 1554.7e-9,
        }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.pitch, self.pitch, self.wavelength)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Gaussian { w0: f64, center: (f64, f64), tilt: (f64, f64) },
    Airy { x0: f64, y0: f64, a: f64 },
    Fiber { mfd: f64, center: (f64, f64) },
    Plane { tilt: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    /// Rendered from Airy design parameters at the grid wavelength.
    Design {
        x0: f64,
        a: f64,
        f: f64,
        pixel: f64,
        extent: f64,
        ramp_pixels: f64,
    },
    /// 16-bit PGM; `pixel` falls back to the `.meta` sidecar next to it.
    File { path: PathBuf, pixel: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Source(SourceSpec),
    Slm { mask: MaskSource, levels: u32, offset: (f64, f64) },
    Lens { f: f64 },
    Propagate { z: f64 },
    /// Thin half-plane screen. `width` is the physical thickness along z,
    /// kept for the record and not modeled.
    Block { edge: f64, side: BlockSide, width: f64 },
    Pinhole { d: f64, center: (f64, f64) },
    Iris { d: f64, center: (f64, f64) },
    Tap { label: String },
}

impl Element {
    pub fn name(&self) -> &'static str {
        match self {
            Element::Source(_) => "source",
            Element::Slm { .. } => "slm",
            Element::Lens { .. } => "lens",
            Element::Propagate { .. } => "propagate",
            Element::Block { .. } => "block",
            Element::Pinhole { .. } => "pinhole",
            Element::Iris { .. } => "iris",
            Element::Tap { .. } => "tap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub grid: GridSpec,
    pub propagator: Propagator,
    pub guard_limit: f64,
    /// Elements with the 1-based source line they came from (0 if built in code).
    pub elements: Vec<(usize, Element)>,
}

impl BenchConfig {
    pub fn new(grid: GridSpec, elements: Vec<Element>) -> Result<Self> {
        let cfg = BenchConfig {
            grid,
            propagator: Propagator::AngularSpectrum,
            guard_limit: DEFAULT_GUARD_LIMIT,
            elements: elements.into_iter().map(|e| (0, e)).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let line_err = |line: usize, msg: String| {
            if line > 0 {
                Error::parse(line, msg)
            } else {
                Error::validation("bench", msg)
            }
        };
        let end = self.elements.last().map_or(1, |(l, _)| *l + 1);
        match self.elements.first() {
            Some((_, Element::Source(_))) => {}
            Some((line, e)) => return Err(line_err(*line, format!("first element must be a source, found {}", e.name()))),
            None => return Err(line_err(end.max(1), "bench has no source".into())),
        }
        let mut labels: Vec<&str> = Vec::new();
        for (idx, (line, e)) in self.elements.iter().enumerate() {
            match e {
                Element::Source(_) if idx > 0 => {
                    return Err(line_err(*line, "only one source is allowed".into()));
                }
                Element::Propagate { z } if !(*z >= 0.0) => {
                    return Err(line_err(*line, format!("propagation distance {z} must be >= 0")));
                }
                Element::Tap { label } => {
                    if labels.contains(&label.as_str()) {
                        return Err(line_err(*line, format!("duplicate tap label {label:?}")));
                    }
                    labels.push(label);
                }
                _ => {}
            }
        }
        self.grid.grid().map_err(|e| line_err(0, e.to_string()))?;
        if !(self.guard_limit > 0.0) {
            return Err(line_err(0, "guard limit must be > 0".into()));
        }
        Ok(())
    }

    pub fn tap_labels(&self) -> Vec<&str> {
        self.elements
            .iter()
            .filter_map(|(_, e)| match e {
                Element::Tap { label } => Some(label.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Total propagation distance of the bench.
    pub fn total_z(&self) -> f64 {
        self.elements
            .iter()
            .map(|(_, e)| match e {
                Element::Propagate { z } => *z,
                _ => 0.0,
            })
            .sum()
    }

    /// Same bench with every block element removed.
    pub fn without_blocks(&self) -> BenchConfig {
        let mut out = self.clone();
        out.elements.retain(|(_, e)| !matches!(e, Element::Block { .. }));
        out
    }

    /// Makes relative mask paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for (_, e) in &mut self.elements {
            if let Element::Slm {
                mask: MaskSource::File { path, .. },
                ..
            } = e
            {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    /// Serializes back into the bench format; `parse_bench(cfg.to_doc())`
    /// reproduces `cfg` up to line numbers.
    pub fn to_doc(&self) -> String {
        let l = |v: f64| format_length(v);
        let mut out = String::new();
        let g = &self.grid;
        let _ = writeln!(
            out,
            "grid nx={} ny={} pitch={} wavelength={} propagator={} guard={:?}",
            g.nx,
            g.ny,
            l(g.pitch),
            l(g.wavelength),
            match self.propagator {
                Propagator::AngularSpectrum => "asm",
                Propagator::Fresnel => "fresnel",
            },
            self.guard_limit
        );
        for (_, e) in &self.elements {
            let line = match e {
                Element::Source(SourceSpec::Gaussian { w0, center, tilt }) => format!(
                    "source gaussian w0={} x={} y={} tx={:?} ty={:?}",
                    l(*w0),
                    l(center.0),
                    l(center.1),
                    tilt.0,
                    tilt.1
                ),
                Element::Source(SourceSpec::Airy { x0, y0, a }) => {
                    format!("source airy x0={} y0={} a={a:?}", l(*x0), l(*y0))
                }
                Element::Source(SourceSpec::Fiber { mfd, center }) => {
                    format!("source fiber mfd={} x={} y={}", l(*mfd), l(center.0), l(center.1))
                }
                Element::Source(SourceSpec::Plane { tilt }) => {
                    format!("source plane tx={:?} ty={:?}", tilt.0, tilt.1)
                }
                Element::Slm { mask, levels, offset } => {
                    let m = match mask {
                        MaskSource::Design {
                            x0,
                            a,
                            f,
                            pixel,
                            extent,
                            ramp_pixels,
                        } => format!(
                            "x0={} a={a:?} f={} pixel={} extent={} ramp_pixels={ramp_pixels:?}",
                            l(*x0),
                            l(*f),
                            l(*pixel),
                            l(*extent)
                        ),
                        MaskSource::File { path, pixel } => {
                            let mut s = format!("mask={}", path.display());
                            if let Some(p) = pixel {
                                let _ = write!(s, " pixel={}", l(*p));
                            }
                            s
                        }
                    };
                    format!("slm {m} levels={levels} x={} y={}", l(offset.0), l(offset.1))
                }
                Element::Lens { f } => format!("lens f={}", l(*f)),
                Element::Propagate { z } => format!("propagate z={}", l(*z)),
                Element::Block { edge, side, width } => {
                    format!("block edge={} side={side} width={}", l(*edge), l(*width))
                }
                Element::Pinhole { d, center } => {
                    format!("pinhole d={} x={} y={}", l(*d), l(center.0), l(center.1))
                }
                Element::Iris { d, center } => format!("iris d={} x={} y={}", l(*d), l(center.0), l(center.1)),
                Element::Tap { label } => format!("tap {label}"),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// Key/value arguments of one element, consumed as they are read so that
/// leftovers can be reported.
struct Args {
    line: usize,
    pairs: Vec<(String, String)>,
    bare: Vec<String>,
}

impl Args {
    fn take(&mut self, key: &str) -> Option<String> {
        let pos = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn length(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|v| parse_length(&v).map_err(|m| Error::parse(self.line, format!("{key}: {m}"))))
            .transpose()
    }

    fn length_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.length(key)?.unwrap_or(default))
    }

    fn required_length(&mut self, key: &str) -> Result<f64> {
        self.length(key)?
            .ok_or_else(|| Error::parse(self.line, format!("missing {key}=<length>")))
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.take(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::parse(self.line, format!("{key}: malformed number {v:?}")))
            })
            .transpose()
    }

    fn finish(self) -> Result<()> {
        if let Some((k, _)) = self.pairs.first() {
            return Err(Error::parse(self.line, format!("unknown key {k:?}")));
        }
        if let Some(b) = self.bare.first() {
            return Err(Error::parse(self.line, format!("unexpected token {b:?}")));
        }
        Ok(())
    }
}

fn positive(line: usize, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::parse(line, format!("{key} must be > 0, got {v}")))
    }
}

/// Parses a bench document.
pub fn parse_bench(doc: &str) -> Result<BenchConfig> {
    let mut grid = GridSpec::default();
    let mut propagator = Propagator::AngularSpectrum;
    let mut guard_limit = DEFAULT_GUARD_LIMIT;
    let mut elements = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in doc.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let text = raw.split('#').next().unwrap_or("");
        for stmt in text.split(';') {
            let mut tokens = stmt.split_whitespace();
            let Some(name) = tokens.next() else { continue };
            let name = name.to_ascii_lowercase();
            let mut args = Args {
                line,
                pairs: Vec::new(),
                bare: Vec::new(),
            };
            for t in tokens {
                match t.split_once('=') {
                    Some((k, v)) => args.pairs.push((k.to_ascii_lowercase(), v.to_string())),
                    None => args.bare.push(t.to_string()),
                }
            }
            if name == "grid" {
                if let Some(n) = args.number::<usize>("n")? {
                    grid.nx = n;
                    grid.ny = n;
                }
                if let Some(n) = args.number("nx")? {
                    grid.nx = n;
                }
                if let Some(n) = args.number("ny")? {
                    grid.ny = n;
                }
                grid.pitch = positive(line, "pitch", args.length_or("pitch", grid.pitch)?)?;
                grid.wavelength = positive(line, "wavelength", args.length_or("wavelength", grid.wavelength)?)?;
                if let Some(p) = args.take("propagator") {
                    propagator = p.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
                }
                if let Some(g) = args.number::<f64>("guard")? {
                    guard_limit = positive(line, "guard", g)?;
                }
                args.finish()?;
                if grid.nx < 2 || grid.ny < 2 {
                    return Err(Error::parse(line, "grid needs at least 2x2 samples"));
                }
                continue;
            }
            let element = parse_element(&name, &mut args)?;
            args.finish()?;
            elements.push((line, element));
        }
    }
    let cfg = BenchConfig {
        grid,
        propagator,
        guard_limit,
        elements,
    };
    if cfg.elements.is_empty() {
        return Err(Error::parse(last_line.max(1), "bench has no source"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_center(args: &mut Args) -> Result<(f64, f64)> {
    Ok((args.length_or("x", 0.0)?, args.length_or("y", 0.0)?))
}

fn parse_tilt(args: &mut Args) -> Result<(f64, f64)> {
    Ok((
        args.number::<f64>("tx")?.unwrap_or(0.0),
        args.number::<f64>("ty")?.unwrap_or(0.0),
    ))
}

fn parse_element(name: &str, args: &mut Args) -> Result<Element> {
    let line = args.line;
    Ok(match name {
        "source" => {
            if args.bare.is_empty() {
                return Err(Error::parse(line, "source needs a kind: gaussian, airy, fiber or plane"));
            }
            let kind = args.bare.remove(0).to_ascii_lowercase();
            let spec = match kind.as_str() {
                "gaussian" => SourceSpec::Gaussian {
                    w0: positive(line, "w0", args.required_length("w0")?)?,
                    center: parse_center(args)?,
                    tilt: parse_tilt(args)?,
                },
                "airy" => {
                    let x0 = positive(line, "x0", args.required_length("x0")?)?;
                    let y0 = positive(line, "y0", args.length_or("y0", x0)?)?;
                    let a = args.number::<f64>("a")?.unwrap_or(0.05);
                    if !(a > 0.0 && a < 1.0) {
                        return Err(Error::parse(line, format!("a must lie in (0, 1), got {a}")));
                    }
                    SourceSpec::Airy { x0, y0, a }
                }
                "fiber" => SourceSpec::Fiber {
                    mfd: positive(line, "mfd", args.length_or("mfd", SMF28_MFD)?)?,
                    center: parse_center(args)?,
                },
                "plane" => SourceSpec::Plane { tilt: parse_tilt(args)? },
                other => return Err(Error::parse(line, format!("unknown source kind {other:?}"))),
            };
            Element::Source(spec)
        }
        "slm" => {
            let mask = if let Some(path) = args.take("mask") {
                MaskSource::File {
                    path: PathBuf::from(path),
                    pixel: args.length("pixel")?.map(|p| positive(line, "pixel", p)).transpose()?,
                }
            } else {
                let x0 = positive(line, "x0", args.required_length("x0")?)?;
                let a = args
                    .number::<f64>("a")?
                    .ok_or_else(|| Error::parse(line, "missing a=<truncation>"))?;
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::parse(line, format!("a must lie in (0, 1), got {a}")));
                }
                MaskSource::Design {
                    x0,
                    a,
                    f: positive(line, "f", args.required_length("f")?)?,
                    pixel: positive(line, "pixel", args.length_or("pixel", 10.4e-6)?)?,
                    extent: positive(line, "extent", args.length_or("extent", 1.04e-2)?)?,
                    ramp_pixels: args.number::<f64>("ramp_pixels")?.unwrap_or(DEFAULT_RAMP_PIXELS),
                }
            };
            let levels = args.number::<u32>("levels")?.unwrap_or(0);
            if levels == 1 {
                return Err(Error::parse(line, "levels must be 0 or >= 2"));
            }
            Element::Slm {
                mask,
                levels,
                offset: parse_center(args)?,
            }
        }
        "lens" => {
            let f = args.required_length("f")?;
            if f == 0.0 {
                return Err(Error::parse(line, "lens focal length must be nonzero"));
            }
            Element::Lens { f }
        }
        "propagate" => {
            let z = args.required_length("z")?;
            if z < 0.0 {
                return Err(Error::parse(line, format!("propagation distance {z} m is negative")));
            }
            Element::Propagate { z }
        }
        "block" => Element::Block {
            edge: args.required_length("edge")?,
            side: args
                .take("side")
                .unwrap_or_else(|| "right".into())
                .parse()
                .map_err(|e: Error| Error::parse(line, e.to_string()))?,
            width: args.length_or("width", 1e-2)?,
        },
        "pinhole" | "iris" => {
            let d = args.required_length("d")?;
            if d < 0.0 {
                return Err(Error::parse(line, "aperture diameter must be >= 0"));
            }
            let center = parse_center(args)?;
            if name == "pinhole" {
                Element::Pinhole { d, center }
            } else {
                Element::Iris { d, center }
            }
        }
        "tap" => {
            let label = match args.take("label") {
                Some(l) => l,
                None if !args.bare.is_empty() => args.bare.remove(0),
                None => return Err(Error::parse(line, "tap needs a label")),
            };
            Element::Tap { label }
        }
        other => return Err(Error::parse(line, format!("unknown element {other:?}"))),
    })
}

/// Field snapshot at a tap.
#[derive(Debug, Clone)]
pub struct ElementResult {
    pub label: String,
    pub field: ComplexField2D,
    /// Cumulative propagation distance from the source (m).
    pub z: f64,
    /// Guard-band power fraction after the most recent propagation.
    pub guard_fraction: f64,
}

/// Builds the source field for a spec on a grid.
pub fn source_field(spec: &SourceSpec, grid: Grid) -> Result<ComplexField2D> {
    match spec {
        SourceSpec::Gaussian { w0, center, tilt } => GaussianBeam {
            w0: *w0,
            center: *center,
            tilt: *tilt,
        }
        .sample(grid),
        SourceSpec::Airy { x0, y0, a } => modes::airy_mode(&AiryParams::new(*x0, *y0, *a)?, grid),
        SourceSpec::Fiber { mfd, center } => GaussianBeam {
            w0: mfd / 2.0,
            center: *center,
            tilt: (0.0, 0.0),
        }
        .sample(grid),
        SourceSpec::Plane { tilt } => {
            let k = grid.wavenumber();
            // unit power over the grid
            let amp = 1.0 / (grid.extent_x() * grid.extent_y()).sqrt();
            Ok(ComplexField2D::from_fn(grid, |x, y| {
                num_complex::Complex64::from_polar(amp, k * (tilt.0 * x + tilt.1 * y))
            }))
        }
    }
}

/// Loads or renders the mask an slm element refers to.
pub fn load_mask(mask: &MaskSource, levels: u32, wavelength: f64) -> Result<PhaseMask> {
    match mask {
        MaskSource::Design {
            x0,
            a,
            f,
            pixel,
            extent,
            ramp_pixels,
        } => {
            let design: MaskDesign = mask::design_for_airy(*x0, *a, *f, wavelength, *extent, *pixel)?
                .with_ramp(MaskDesign::ramp_for_period(*pixel, *ramp_pixels));
            mask::render(&design, levels)
        }
        MaskSource::File { path, pixel } => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let pitch = match pixel {
                Some(p) => *p,
                None => {
                    let meta = path.with_extension("meta");
                    let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
                    mask::parse_sidecar(&text)?.0
                }
            };
            PhaseMask::from_pgm(&bytes, pitch, levels)
        }
    }
}

/// Folds the elements over the source field, returning one result per tap.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<ElementResult>> {
    cfg.validate()?;
    let grid = cfg.grid.grid()?;
    let mut field: Option<ComplexField2D> = None;
    let mut z = 0.0;
    let mut guard_fraction = 0.0;
    let mut out = Vec::new();
    for (index, (line, element)) in cfg.elements.iter().enumerate() {
        let wrap = |e: Error| Error::Element {
            index,
            line: *line,
            source: Box::new(e),
        };
        let next = match (element, field.take()) {
            (Element::Source(spec), _) => source_field(spec, grid).map_err(wrap)?,
            (_, None) => unreachable!("validated bench starts with a source"),
            (Element::Slm { mask, levels, offset }, Some(f)) => {
                let m = load_mask(mask, *levels, grid.wavelength).map_err(wrap)?;
                mask::apply_to_field(&f, &m, *offset).map_err(wrap)?
            }
            (Element::Lens { f: focal }, Some(f)) => propagation::apply_lens(&f, *focal).map_err(wrap)?,
            (Element::Propagate { z: dz }, Some(f)) => {
                let p = propagation::propagate_with(&f, *dz, cfg.propagator).map_err(wrap)?;
                z += dz;
                guard_fraction = p.edge_power_fraction(GUARD_WIDTH);
                if guard_fraction > cfg.guard_limit {
                    return Err(wrap(Error::GuardBand {
                        fraction: guard_fraction,
                        limit: cfg.guard_limit,
                    }));
                }
                p
            }
            (Element::Block { edge, side, .. }, Some(f)) => propagation::apply_block(&f, *edge, *side),
            (Element::Pinhole { d, center } | Element::Iris { d, center }, Some(f)) => {
                propagation::apply_circular_aperture(&f, *d, *center).map_err(wrap)?
            }
            (Element::Tap { label }, Some(f)) => {
                out.push(ElementResult {
                    label: label.clone(),
                    field: f.clone(),
                    z,
                    guard_fraction,
                });
                f
            }
        };
        field = Some(next);
    }
    Ok(out)
}

/// Runs the bench and returns the tap with the given label.
pub fn run_to_tap(cfg: &BenchConfig, label: &str) -> Result<ElementResult> {
    if !cfg.tap_labels().contains(&label) {
        return Err(Error::validation("tap", format!("bench has no tap {label:?}")));
    }
    run_bench(cfg)?
        .into_iter()
        .find(|r| r.label == label)
        .ok_or_else(|| Error::validation("tap", format!("bench has no tap {label:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_doc() {
        let cfg = parse_bench("source gaussian w0=1mm; tap out").unwrap();
        assert_eq!(cfg.elements.len(), 2);
        assert_eq!(cfg.tap_labels(), vec!["out"]);
    }

    #[test]
    fn negative_propagation_reports_line() {
        let err = parse_bench("source gaussian w0=1mm\n\npropagate z=-1m\ntap x").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        for doc in [
            "",
            "# only a comment",
            "tap a",
            "lens f=1m; source gaussian w0=1mm",
            "source gaussian w0=1mm; source plane",
            "source gaussian w0=1mm; tap a; tap a",
            "source gaussian w0=1mm; mirror r=1m",
            "source gaussian w0=1",
            "source gaussian w0=1mm; lens f=0m",
            "source gaussian w0=1mm; lens f=1m color=red",
        ] {
            let err = parse_bench(doc).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{doc:?}: {err:?}");
        }
    }

    #[test]
    fn names_are_case_insensitive() {
        let cfg = parse_bench("SOURCE Gaussian W0=1mm\nLens f=0.5m # comment\nTAP out").unwrap();
        assert_eq!(cfg.elements[1].1, Element::Lens { f: 0.5 });
    }

    #[test]
    fn doc_roundtrip() {
        let doc = "grid nx=64 ny=32 pitch=20um wavelength=1554.7nm propagator=fresnel guard=0.01\n\
                   source gaussian w0=0.2mm x=10um tx=0.001\n\
                   slm x0=271um a=0.05 f=0.5m pixel=10.4um extent=0.5mm ramp_pixels=0 levels=8\n\
                   propagate z=0.25m; lens f=0.5m; block edge=-0.1mm side=left\n\
                   pinhole d=0.25mm x=1mm; iris d=5mm\n\
                   slm mask=m.pgm pixel=10um\n\
                   tap out";
        let cfg = parse_bench(doc).unwrap();
        let again = parse_bench(&cfg.to_doc()).unwrap();
        let strip = |c: &BenchConfig| c.elements.iter().map(|(_, e)| e.clone()).collect::<Vec<_>>();
        assert_eq!(strip(&cfg), strip(&again));
        assert_eq!(cfg.grid, again.grid);
        assert_eq!(cfg.propagator, again.propagator);
        assert_eq!(cfg.guard_limit, again.guard_limit);
    }

    #[test]
    fn source_and_tap_returns_source() {
        let cfg = parse_bench("grid n=64 pitch=20um\nsource gaussian w0=0.2mm\ntap s").unwrap();
        let out = run_bench(&cfg).unwrap();
        assert_eq!(out.len(), 1);
        let want = modes::gaussian_mode(0.2e-3, cfg.grid.grid().unwrap()).unwrap();
        assert_eq!(out[0].field, want);
        assert_eq!(out[0].z, 0.0);
    }

    #[test]
    fn cumulative_z_and_tap_order() {
        let cfg = parse_bench(
            "grid n=64 pitch=20um guard=1\nsource gaussian w0=0.2mm\ntap a; propagate z=0.1m\ntap b\npropagate z=0.2m\ntap c",
        )
        .unwrap();
        let out = run_bench(&cfg).unwrap();
        let labels: Vec<_> = out.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["a", "b", "c"]);
        assert_eq!(out.iter().map(|r| r.z).collect::<Vec<_>>(), [0.0, 0.1, 0.1 + 0.2]);
    }

    #[test]
    fn guard_band_sentinel_names_element() {
        // beam spreads far past the small grid
        let cfg = parse_bench("grid n=64 pitch=10um\nsource gaussian w0=50um\npropagate z=1m\ntap t").unwrap();
        match run_bench(&cfg).unwrap_err() {
            Error::Element { index, line, source } => {
                assert_eq!((index, line), (1, 3));
                assert!(matches!(*source, Error::GuardBand { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_mask_file_is_element_error() {
        let cfg = parse_bench("grid n=32 pitch=10um\nsource plane\nslm mask=/nonexistent/m.pgm pixel=10um\ntap t").unwrap();
        assert!(matches!(run_bench(&cfg).unwrap_err(), Error::Element { index: 1, .. }));
    }

    #[test]
    fn without_blocks_drops_only_blocks() {
        let cfg = parse_bench("source plane; block edge=0m; lens f=1m; tap t").unwrap();
        let names: Vec<_> = cfg.without_blocks().elements.iter().map(|(_, e)| e.name()).collect();
        assert_eq!(names, ["source", "lens", "tap"]);
    }
}
