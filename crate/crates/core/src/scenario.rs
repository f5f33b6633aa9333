//! Experiment scenarios: TOML configs that bind a bench file to mask, scan,
//! trajectory, block and counting parameters, and the commands that run
//! them and write artifacts.
//!
//! Lengths in configs are strings with unit suffixes (`"0.25mm"`). Relative
//! paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bench::{self, parse_bench, BenchConfig, Element, SourceSpec};
use crate::counting::{
    self, analytic_car, arm_transmission, car_from_histogram, coincidence_histogram, net_coincidences,
    ChannelParams, CoincidenceHistogram, PairStatistics, RunManifest, SourceParams,
};
use crate::error::{Error, Result};
use crate::field::{write_field, ComplexField2D, IntensityImage};
use crate::mask::{self, MaskDesign, PhaseMask, SamplingReport};
use crate::metrology::{self, Collector, DropReport, ScanResult, TrajectoryFit};
use crate::modes::{collimated_mfd, fwhm, SMF28_MFD};
use crate::propagation::{self, BlockSide};
use crate::units::{format_length, parse_length};

/// Ordered `key=value` record of every parameter behind an artifact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub Vec<(String, String)>);

impl Params {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    pub fn len(&mut self, key: &str, meters: f64) {
        self.push(key, format_length(meters));
    }

    pub fn extend(&mut self, other: &Params) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn to_comments(&self) -> String {
        self.0.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    pub x0: Option<String>,
    pub a: Option<f64>,
    pub f: Option<String>,
    pub wavelength: Option<String>,
    pub pixel: Option<String>,
    pub extent: Option<String>,
    pub levels: Option<u32>,
    pub ramp_pixels: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub tap: Option<String>,
    pub diameter: Option<String>,
    pub step: Option<String>,
    pub range: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub tap: Option<String>,
    pub z: Option<Vec<String>>,
    pub window_db: Option<f64>,
    pub gaussian_w0: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    pub tap: Option<String>,
    pub leg: Option<String>,
    pub block_z: Option<String>,
    pub insertion: Option<String>,
    pub side: Option<String>,
    pub width: Option<String>,
    pub gaussian_w0: Option<String>,
    pub collector: Option<String>,
    pub fiber_mfd: Option<String>,
    pub collimator_f: Option<String>,
    pub pinhole: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingSection {
    pub mu: Option<f64>,
    pub car_target: Option<f64>,
    pub statistics: Option<String>,
    pub rep_rate: Option<f64>,
    pub gate_width: Option<f64>,
    pub seconds: Option<f64>,
    pub det_eff: Option<f64>,
    pub coupling_s: Option<f64>,
    pub coupling_i: Option<f64>,
    pub dark_s: Option<f64>,
    pub dark_i: Option<f64>,
    pub extra_loss_db: Option<f64>,
    pub drop: Option<f64>,
    pub drop_report: Option<String>,
    pub with_block: Option<bool>,
    pub idler_delay_gates: Option<u64>,
    pub span: Option<u64>,
}

/// A scenario document as written on disk.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario: Option<String>,
    pub bench: Option<String>,
    pub output: Option<String>,
    pub seed: Option<u64>,
    pub mask: Option<MaskSection>,
    pub scan: Option<ScanSection>,
    pub trajectory: Option<TrajectorySection>,
    pub block: Option<BlockSection>,
    pub counting: Option<CountingSection>,
}

/// Loaded scenario with the directory relative paths resolve against.
#[derive(Debug, Clone, Default)]
pub struct ScenarioConfig {
    pub file: ScenarioFile,
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::validation("config", e.to_string()))?;
        Ok(ScenarioConfig {
            file,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn name(&self) -> &str {
        self.file.scenario.as_deref().unwrap_or("run")
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    pub fn bench_path(&self) -> Result<PathBuf> {
        self.file
            .bench
            .as_deref()
            .map(|b| self.resolve(b))
            .ok_or_else(|| Error::validation("bench", "scenario names no bench file"))
    }

    /// Parses the referenced bench; mask paths resolve against its folder.
    pub fn load_bench(&self) -> Result<BenchConfig> {
        load_bench_file(&self.bench_path()?)
    }
}

pub fn load_bench_file(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_bench(&text)?;
    if let Some(dir) = path.parent() {
        cfg.resolve_paths(dir);
    }
    Ok(cfg)
}

fn length(field: &'static str, v: &Option<String>, default: f64) -> Result<f64> {
    match v {
        None => Ok(default),
        Some(s) => parse_length(s).map_err(|m| Error::validation(field, m)),
    }
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(field, format!("{v} must be > 0")))
    }
}

// ---------------------------------------------------------------- mask

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    pub x0: f64,
    pub a: f64,
    pub f: f64,
    pub wavelength: f64,
    pub pixel: f64,
    pub extent: f64,
    pub levels: u32,
    pub ramp_pixels: f64,
}

impl MaskParams {
    pub fn from_section(s: &MaskSection) -> Result<Self> {
        Ok(MaskParams {
            x0: length("x0", &s.x0, 271e-6)?,
            a: s.a.unwrap_or(0.05),
            f: length("f", &s.f, 0.5)?,
            wavelength: length("wavelength", &s.wavelength, 1554.7e-9)?,
            pixel: length("pixel", &s.pixel, 10.4e-6)?,
            extent: length("extent", &s.extent, 1.04e-2)?,
            levels: s.levels.unwrap_or(0),
            ramp_pixels: s.ramp_pixels.unwrap_or(mask::DEFAULT_RAMP_PIXELS),
        })
    }

    pub fn design(&self) -> Result<MaskDesign> {
        Ok(
            mask::design_for_airy(self.x0, self.a, self.f, self.wavelength, self.extent, self.pixel)?
                .with_ramp(MaskDesign::ramp_for_period(self.pixel, self.ramp_pixels)),
        )
    }

    pub fn params(&self) -> Params {
        let mut p = Params::default();
        p.len("x0", self.x0);
        p.push("a", self.a);
        p.len("f", self.f);
        p.len("wavelength", self.wavelength);
        p.len("pixel", self.pixel);
        p.len("extent", self.extent);
        p.push("levels", self.levels);
        p.push("ramp_pixels", self.ramp_pixels);
        p
    }
}

pub struct MaskOutcome {
    pub mask: PhaseMask,
    pub design: MaskDesign,
    pub report: SamplingReport,
}

/// Designs, renders and checks a mask. An aliased design is an error unless
/// `force` is set.
pub fn run_mask(p: &MaskParams, force: bool) -> Result<MaskOutcome> {
    let design = p.design()?;
    let report = mask::validate_sampling(&design);
    if report.aliased && !force {
        return Err(Error::validation("pixel", format!("{report}; rerun with --force to write it anyway")));
    }
    let mask = mask::render(&design, p.levels)?;
    Ok(MaskOutcome { mask, design, report })
}

// ---------------------------------------------------------------- scan

#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    pub tap: String,
    pub diameter: f64,
    pub step: f64,
    pub range: f64,
}

impl ScanParams {
    pub fn from_section(s: &ScanSection) -> Result<Self> {
        Ok(ScanParams {
            tap: s.tap.clone().unwrap_or_else(|| "focal".into()),
            diameter: positive("diameter", length("diameter", &s.diameter, 0.25e-3)?)?,
            step: positive("step", length("step", &s.step, 50e-6)?)?,
            range: positive("range", length("range", &s.range, 2e-3)?)?,
        })
    }

    pub fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("scan.tap", &self.tap);
        p.len("scan.diameter", self.diameter);
        p.len("scan.step", self.step);
        p.len("scan.range", self.range);
        p
    }
}

/// Pinhole scan across the main lobe of a field: centered on the intensity
/// maximum, along the row through it.
pub fn scan_main_lobe(field: &ComplexField2D, p: &ScanParams) -> Result<ScanResult> {
    let g = field.grid();
    let (pi, pj) = field.argmax();
    let mut s = metrology::pinhole_scan(field, p.diameter, p.step, p.range, g.x(pi), g.y(pj))?;
    s.label = p.tap.clone();
    Ok(s)
}

pub fn run_scan(bench: &BenchConfig, p: &ScanParams) -> Result<(ScanResult, f64)> {
    let tap = bench::run_to_tap(bench, &p.tap)?;
    let scan = scan_main_lobe(&tap.field, p)?;
    let width = fwhm(&scan.profile)?;
    Ok((scan, width))
}

// ---------------------------------------------------------------- trajectory

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryParams {
    pub tap: String,
    pub z: Vec<f64>,
    pub window_db: f64,
    /// Amplitude waist of the collimated Gaussian reference; `None` skips it.
    pub gaussian_w0: Option<f64>,
}

impl TrajectoryParams {
    pub fn from_section(s: &TrajectorySection) -> Result<Self> {
        let z = match &s.z {
            None => vec![0.0, 0.75, 1.5, 2.25, 3.0],
            Some(list) => list
                .iter()
                .map(|v| parse_length(v).map_err(|m| Error::validation("z", m)))
                .collect::<Result<Vec<_>>>()?,
        };
        if z.len() < 3 {
            return Err(Error::validation("z", "need at least 3 planes"));
        }
        if z.iter().any(|v| *v < 0.0) || z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("z", "planes must be >= 0 and strictly increasing"));
        }
        Ok(TrajectoryParams {
            tap: s.tap.clone().unwrap_or_else(|| "focal".into()),
            z,
            window_db: s.window_db.unwrap_or(metrology::DEFAULT_AMBIGUITY_DB),
            gaussian_w0: match &s.gaussian_w0 {
                Some(v) if v.eq_ignore_ascii_case("none") => None,
                other => Some(positive("gaussian_w0", length("gaussian_w0", other, 1e-3)?)?),
            },
        })
    }

    pub fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("trajectory.tap", &self.tap);
        p.push(
            "trajectory.z",
            self.z.iter().map(|z| format_length(*z)).collect::<Vec<_>>().join(","),
        );
        p.push("trajectory.window_db", self.window_db);
        match self.gaussian_w0 {
            Some(w) => p.len("trajectory.gaussian_w0", w),
            None => p.push("trajectory.gaussian_w0", "none"),
        }
        p
    }
}

/// Propagates `start` through the increasing distances `zs` (measured from
/// `start`), checking the guard band at each plane.
pub fn fields_at(start: &ComplexField2D, zs: &[f64], bench: &BenchConfig) -> Result<Vec<ComplexField2D>> {
    let mut out = Vec::with_capacity(zs.len());
    let mut current = start.clone();
    let mut z_now = 0.0;
    for &z in zs {
        if z > z_now {
            current = propagation::propagate_with(&current, z - z_now, bench.propagator)?;
            z_now = z;
            let frac = current.edge_power_fraction(bench::GUARD_WIDTH);
            if frac > bench.guard_limit {
                return Err(Error::GuardBand {
                    fraction: frac,
                    limit: bench.guard_limit,
                });
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

pub fn trajectory_of(start: &ComplexField2D, p: &TrajectoryParams, bench: &BenchConfig) -> Result<TrajectoryFit> {
    let fields = fields_at(start, &p.z, bench)?;
    let taps: Vec<(f64, &ComplexField2D)> = p.z.iter().copied().zip(fields.iter()).collect();
    metrology::peak_trajectory(&taps, p.window_db)
}

/// Main-lobe positions of the Airy beam at the start plane and at `leg`.
pub fn airy_chord(start: &ComplexField2D, leg: f64, bench: &BenchConfig) -> Result<((f64, f64), (f64, f64))> {
    let end = fields_at(start, &[leg], bench)?.pop().expect("one plane");
    let peak = |f: &ComplexField2D| {
        let (i, j) = f.argmax();
        (f.grid().x(i), f.grid().y(j))
    };
    Ok((peak(start), peak(&end)))
}

/// Collimated Gaussian that starts on the Airy main lobe and aims at where
/// the lobe lands after `leg`, the straight-line path of the reference beam.
pub fn chord_gaussian(w0: f64, chord: ((f64, f64), (f64, f64)), leg: f64) -> SourceSpec {
    let ((x0, y0), (x1, y1)) = chord;
    SourceSpec::Gaussian {
        w0,
        center: (x0, y0),
        tilt: ((x1 - x0) / leg, (y1 - y0) / leg),
    }
}

pub struct TrajectoryOutcome {
    pub airy: TrajectoryFit,
    pub gaussian: Option<TrajectoryFit>,
}

pub fn run_trajectory(bench: &BenchConfig, p: &TrajectoryParams) -> Result<TrajectoryOutcome> {
    let start = bench::run_to_tap(bench, &p.tap)?.field;
    let airy = trajectory_of(&start, p, bench)?;
    let gaussian = match p.gaussian_w0 {
        None => None,
        Some(w0) => {
            let leg = *p.z.last().expect("validated");
            let chord = airy_chord(&start, leg, bench)?;
            let g = bench::source_field(&chord_gaussian(w0, chord, leg), *start.grid())?;
            Some(trajectory_of(&g, p, bench)?)
        }
    };
    Ok(TrajectoryOutcome { airy, gaussian })
}

// ---------------------------------------------------------------- block

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub tap: String,
    pub leg: f64,
    pub block_z: f64,
    pub insertion: f64,
    pub side: BlockSide,
    pub width: f64,
    pub gaussian_w0: f64,
    pub collector: Collector,
}

impl BlockParams {
    pub fn from_section(s: &BlockSection, wavelength: f64) -> Result<Self> {
        let leg = positive("leg", length("leg", &s.leg, 3.0)?)?;
        let block_z = length("block_z", &s.block_z, leg / 2.0)?;
        if !(block_z > 0.0 && block_z < leg) {
            return Err(Error::validation("block_z", "block must sit inside the leg"));
        }
        let collector = match s.collector.as_deref().unwrap_or("fiber").to_ascii_lowercase().as_str() {
            "fiber" => {
                let mfd = length("fiber_mfd", &s.fiber_mfd, SMF28_MFD)?;
                let fc = positive("collimator_f", length("collimator_f", &s.collimator_f, 11e-3)?)?;
                Collector::Fiber {
                    mfd: collimated_mfd(mfd, fc, wavelength),
                }
            }
            "pinhole" => Collector::Pinhole {
                diameter: positive("pinhole", length("pinhole", &s.pinhole, 0.25e-3)?)?,
            },
            "total" => Collector::Total,
            other => return Err(Error::validation("collector", format!("{other:?} is not fiber, pinhole or total"))),
        };
        Ok(BlockParams {
            tap: s.tap.clone().unwrap_or_else(|| "focal".into()),
            leg,
            block_z,
            insertion: length("insertion", &s.insertion, 1.2e-3)?,
            side: s.side.as_deref().unwrap_or("right").parse()?,
            width: length("width", &s.width, 1e-2)?,
            gaussian_w0: positive("gaussian_w0", length("gaussian_w0", &s.gaussian_w0, 1e-3)?)?,
            collector,
        })
    }

    pub fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("block.tap", &self.tap);
        p.len("block.leg", self.leg);
        p.len("block.block_z", self.block_z);
        p.len("block.insertion", self.insertion);
        p.push("block.side", self.side);
        p.len("block.width", self.width);
        p.len("block.gaussian_w0", self.gaussian_w0);
        p.push("block.collector", self.collector);
        p
    }
}

pub struct BlockOutcome {
    pub airy: DropReport,
    pub gaussian: DropReport,
    pub airy_bench: BenchConfig,
    pub gaussian_bench: BenchConfig,
    pub edge: f64,
}

/// Bench elements up to and including the tap `label`.
fn prefix_through_tap(bench: &BenchConfig, label: &str) -> Result<Vec<Element>> {
    let end = bench
        .elements
        .iter()
        .position(|(_, e)| matches!(e, Element::Tap { label: l } if l == label))
        .ok_or_else(|| Error::validation("tap", format!("bench has no tap {label:?}")))?;
    Ok(bench.elements[..=end].iter().map(|(_, e)| e.clone()).collect())
}

fn with_leg(bench: &BenchConfig, mut head: Vec<Element>, p: &BlockParams, edge: f64) -> Result<BenchConfig> {
    head.extend([
        Element::Propagate { z: p.block_z },
        Element::Block {
            edge,
            side: p.side,
            width: p.width,
        },
        Element::Propagate { z: p.leg - p.block_z },
        Element::Tap {
            label: "collector".into(),
        },
    ]);
    let mut cfg = BenchConfig::new(bench.grid, head)?;
    cfg.propagator = bench.propagator;
    cfg.guard_limit = bench.guard_limit;
    Ok(cfg)
}

/// Block experiment on both arms. The Gaussian reference follows the chord
/// between the Airy main-lobe positions at the start tap and at the end of
/// the leg; the block edge is placed `insertion` past the Gaussian axis at
/// the block plane, reaching in from `side`.
pub fn run_block(bench: &BenchConfig, p: &BlockParams) -> Result<BlockOutcome> {
    let start = bench::run_to_tap(bench, &p.tap)?.field;
    let chord = airy_chord(&start, p.leg, bench)?;
    let gauss = chord_gaussian(p.gaussian_w0, chord, p.leg);
    let SourceSpec::Gaussian { center, tilt, .. } = &gauss else { unreachable!() };
    let axis = center.0 + tilt.0 * p.block_z;
    let edge = match p.side {
        BlockSide::Right => axis - p.insertion,
        BlockSide::Left => axis + p.insertion,
    };
    drop(start);
    let airy_bench = with_leg(bench, prefix_through_tap(bench, &p.tap)?, p, edge)?;
    let gaussian_bench = with_leg(bench, vec![Element::Source(gauss)], p, edge)?;
    let mut airy = metrology::block_experiment(&airy_bench, p.collector)?;
    airy.tap = format!("{} + {}", p.tap, format_length(p.leg));
    let mut gaussian = metrology::block_experiment(&gaussian_bench, p.collector)?;
    gaussian.tap = airy.tap.clone();
    Ok(BlockOutcome {
        airy,
        gaussian,
        airy_bench,
        gaussian_bench,
        edge,
    })
}

// ---------------------------------------------------------------- counting

#[derive(Debug, Clone, PartialEq)]
pub struct CountingParams {
    pub mu: f64,
    pub statistics: PairStatistics,
    pub rep_rate: f64,
    pub gate_width: f64,
    pub seconds: f64,
    pub det_eff: f64,
    pub coupling_s: f64,
    pub coupling_i: f64,
    pub dark_s: f64,
    pub dark_i: f64,
    pub extra_loss_db: f64,
    pub drop: Option<f64>,
    pub drop_report: Option<PathBuf>,
    pub with_block: bool,
    pub idler_delay_gates: u64,
    pub span: u64,
}

impl CountingParams {
    pub fn from_section(s: &CountingSection, cfg: &ScenarioConfig) -> Result<Self> {
        let mu = match (s.mu, s.car_target) {
            (Some(mu), _) => mu,
            (None, Some(car)) if car > 1.0 => 1.0 / (car - 1.0),
            (None, Some(car)) => return Err(Error::validation("car_target", format!("{car} must exceed 1"))),
            (None, None) => 1.0 / 69.0,
        };
        Ok(CountingParams {
            mu,
            statistics: s.statistics.as_deref().unwrap_or("poisson").parse()?,
            rep_rate: s.rep_rate.unwrap_or(10e6),
            gate_width: s.gate_width.unwrap_or(1e-9),
            seconds: s.seconds.unwrap_or(3600.0),
            det_eff: s.det_eff.unwrap_or(0.1),
            coupling_s: s.coupling_s.unwrap_or(0.5),
            coupling_i: s.coupling_i.unwrap_or(0.5),
            dark_s: s.dark_s.unwrap_or(100.0),
            dark_i: s.dark_i.unwrap_or(100.0),
            extra_loss_db: s.extra_loss_db.unwrap_or(0.0),
            drop: s.drop,
            drop_report: s.drop_report.as_deref().map(|p| cfg.resolve(p)),
            with_block: s.with_block.unwrap_or(false),
            idler_delay_gates: s.idler_delay_gates.unwrap_or(0),
            span: s.span.unwrap_or(11),
        })
    }

    pub fn source(&self) -> Result<SourceParams> {
        let mut s = SourceParams::for_duration(self.mu, self.rep_rate, self.gate_width, self.seconds)?;
        s.statistics = self.statistics;
        Ok(s)
    }

    /// Channels with the signal arm reduced by `drop`.
    pub fn channel(&self, drop: f64) -> Result<ChannelParams> {
        let eta_s = arm_transmission(drop, self.extra_loss_db, self.coupling_s, self.det_eff)?;
        let eta_i = arm_transmission(0.0, 0.0, self.coupling_i, self.det_eff)?;
        let mut ch = ChannelParams::new(eta_s, eta_i, self.dark_s, self.dark_i)?;
        ch.idler_delay_gates = self.idler_delay_gates;
        Ok(ch)
    }

    pub fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("counting.mu", self.mu);
        p.push("counting.statistics", self.statistics);
        p.push("counting.rep_rate_hz", self.rep_rate);
        p.push("counting.gate_width_s", self.gate_width);
        p.push("counting.seconds", self.seconds);
        p.push("counting.det_eff", self.det_eff);
        p.push("counting.coupling_s", self.coupling_s);
        p.push("counting.coupling_i", self.coupling_i);
        p.push("counting.dark_s_cps", self.dark_s);
        p.push("counting.dark_i_cps", self.dark_i);
        p.push("counting.extra_loss_db", self.extra_loss_db);
        p.push("counting.with_block", self.with_block);
        if let Some(d) = self.drop {
            p.push("counting.drop", d);
        }
        if let Some(r) = &self.drop_report {
            p.push("counting.drop_report", r.display());
        }
        p.push("counting.idler_delay_gates", self.idler_delay_gates);
        p.push("counting.span", self.span);
        p
    }
}

#[derive(Debug, Clone)]
pub struct CountingRun {
    pub histogram: CoincidenceHistogram,
    pub manifest: RunManifest,
    pub net: (f64, f64),
}

/// One Monte Carlo run with histogram and CAR.
pub fn count_once(src: &SourceParams, ch: &ChannelParams, span: u64, seed: u64) -> Result<CountingRun> {
    let (s, i) = counting::simulate_counts(src, ch, seed)?;
    let h = coincidence_histogram(&s, &i, ch.idler_delay_gates, span, 1.0 / src.rep_rate)?;
    let acc = h.accidental_bins();
    let mean_a = acc.iter().sum::<u64>() as f64 / acc.len() as f64;
    let (car, sigma) = car_from_histogram(&h)?;
    let manifest = RunManifest {
        seed,
        source: *src,
        channel: *ch,
        clicks_s: s.count(),
        clicks_i: i.count(),
        center: h.center(),
        mean_accidentals: mean_a,
        car,
        sigma,
        analytic_car: analytic_car(src, ch).ok(),
    };
    let net = net_coincidences(&h);
    Ok(CountingRun {
        histogram: h,
        manifest,
        net,
    })
}

pub struct CoincidenceOutcome {
    pub baseline: CountingRun,
    /// Run with the block's drop applied to the signal arm.
    pub blocked: Option<CountingRun>,
    pub drop: Option<f64>,
}

impl CoincidenceOutcome {
    /// Net coincidence ratio blocked/baseline with its standard error.
    pub fn rate_ratio(&self) -> Option<(f64, f64)> {
        let b = self.blocked.as_ref()?;
        let (n1, s1) = self.baseline.net;
        let (n2, s2) = b.net;
        let r = n2 / n1;
        Some((r, r * ((s1 / n1).powi(2) + (s2 / n2).powi(2)).sqrt()))
    }
}

/// Seed offset between the baseline and the blocked run, so that the two
/// are statistically independent.
pub const BLOCKED_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn run_coincidence(p: &CountingParams, seed: u64, drop: Option<f64>) -> Result<CoincidenceOutcome> {
    let src = p.source()?;
    let baseline = count_once(&src, &p.channel(0.0)?, p.span, seed)?;
    let blocked = match drop {
        Some(d) => Some(count_once(
            &src,
            &p.channel(d)?,
            p.span,
            seed.wrapping_add(BLOCKED_SEED_OFFSET),
        )?),
        None => None,
    };
    Ok(CoincidenceOutcome { baseline, blocked, drop })
}

// ---------------------------------------------------------------- output

/// Output directory of one command invocation.
pub struct RunDir {
    pub path: PathBuf,
    pub files: Vec<String>,
    pub params: Params,
}

impl RunDir {
    /// Creates `<base>/<name>-<timestamp>` (with a numeric suffix if taken).
    pub fn create(base: &Path, name: &str) -> Result<Self> {
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
        std::fs::create_dir_all(base).map_err(|e| Error::io(base, e))?;
        for n in 0..1000 {
            let dir = if n == 0 {
                base.join(format!("{name}-{stamp}"))
            } else {
                base.join(format!("{name}-{stamp}-{n}"))
            };
            match std::fs::create_dir(&dir) {
                Ok(()) => {
                    return Ok(RunDir {
                        path: dir,
                        files: Vec::new(),
                        params: Params::default(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(Error::io(dir, e)),
            }
        }
        Err(Error::validation("output", "could not allocate a run directory"))
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn write_field(&mut self, name: &str, field: &ComplexField2D) -> Result<PathBuf> {
        let path = self.path.join(name);
        write_field(field, &path)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Writes `manifest.txt`: command, time, parameters and file list.
    pub fn finish(mut self, command: &str) -> Result<PathBuf> {
        let mut text = String::new();
        let _ = writeln!(text, "command={command}");
        let _ = writeln!(text, "version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "created={}", chrono::Local::now().to_rfc3339());
        text.push_str(&self.params.to_text());
        let _ = writeln!(text, "files={}", self.files.join(","));
        let files = std::mem::take(&mut self.files);
        self.write("manifest.txt", text)?;
        self.files = files;
        Ok(self.path)
    }
}

/// Output base directory: explicit flag, then `AIRY_OUT`, then the config's
/// `output`, then `airy_runs`.
pub fn output_base(flag: Option<&Path>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    if let Some(f) = flag {
        return f.to_path_buf();
    }
    if let Some(env) = std::env::var_os("AIRY_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    if let Some(c) = cfg {
        if let Some(o) = &c.file.output {
            return c.resolve(o);
        }
    }
    PathBuf::from("airy_runs")
}

/// Quick-look PGM of a field's intensity.
pub fn intensity_pgm(field: &ComplexField2D) -> Vec<u8> {
    let mut img = IntensityImage::from_field(field);
    img.normalize_peak();
    img.to_pgm()
}

/// Reads a drop from a report file written by the block command.
pub fn read_drop_report(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DropReport::parse_drop(&text)
}

/// Key-sorted dump of a scenario's raw sections, for manifests.
pub fn describe_file(cfg: &ScenarioConfig) -> Params {
    let mut m = BTreeMap::new();
    m.insert("scenario", cfg.name().to_string());
    if let Some(b) = &cfg.file.bench {
        m.insert("bench", b.clone());
    }
    if let Some(s) = cfg.file.seed {
        m.insert("seed", s.to_string());
    }
    let mut p = Params::default();
    for (k, v) in m {
        p.push(k, v);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::parse("scenario = \"x\"\ncolour = 1", ".").is_err());
        assert!(ScenarioConfig::parse("[scan]\nwidth = \"1mm\"", ".").is_err());
    }

    #[test]
    fn defaults_resolve() {
        let cfg = ScenarioConfig::parse("", ".").unwrap();
        let s = ScanParams::from_section(&ScanSection::default()).unwrap();
        assert_eq!((s.diameter, s.step, s.range), (0.25e-3, 50e-6, 2e-3));
        let t = TrajectoryParams::from_section(&TrajectorySection::default()).unwrap();
        assert_eq!(t.z, vec![0.0, 0.75, 1.5, 2.25, 3.0]);
        let c = CountingParams::from_section(&CountingSection::default(), &cfg).unwrap();
        assert!((c.mu - 1.0 / 69.0).abs() < 1e-15);
        assert_eq!(c.source().unwrap().n_gates, 36_000_000_000);
        let b = BlockParams::from_section(&BlockSection::default(), 1554.7e-9).unwrap();
        assert_eq!(b.block_z, 1.5);
        match b.collector {
            Collector::Fiber { mfd } => assert!((mfd - 2.0937e-3).abs() < 1e-6, "{mfd}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn car_target_sets_mu() {
        let cfg = ScenarioConfig::parse("[counting]\ncar_target = 11.0", ".").unwrap();
        let c = CountingParams::from_section(cfg.file.counting.as_ref().unwrap(), &cfg).unwrap();
        assert!((c.mu - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_trajectory_planes() {
        let s = TrajectorySection {
            z: Some(vec!["0m".into(), "2m".into(), "1m".into()]),
            ..Default::default()
        };
        assert!(TrajectoryParams::from_section(&s).is_err());
        let s = TrajectorySection {
            z: Some(vec!["0m".into(), "1".into(), "2m".into()]),
            ..Default::default()
        };
        assert!(TrajectoryParams::from_section(&s).is_err());
    }

    #[test]
    fn aliased_mask_needs_force() {
        let p = MaskParams {
            pixel: 20.8e-6,
            ramp_pixels: 0.0,
            ..MaskParams::from_section(&MaskSection::default()).unwrap()
        };
        let err = run_mask(&p, false).err().unwrap();
        assert!(err.is_validation() && err.to_string().contains("ALIASED"));
        assert!(run_mask(&p, true).unwrap().report.aliased);
    }
}
