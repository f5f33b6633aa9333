use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use airy_core::bench;
use airy_core::metrology::Collector;
use airy_core::scenario::{
    self, output_base, BlockParams, CountingParams, MaskParams, Params, RunDir, ScanParams, ScenarioConfig,
    TrajectoryParams,
};
use airy_core::units::format_length;
use airy_core::Error;

#[derive(Parser)]
#[command(name = "airy", version, about = "Airy beam bench simulator and coincidence counter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output base directory (overrides AIRY_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct BenchArg {
    /// Bench description file (overrides the config's `bench`).
    #[arg(long)]
    bench: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Design a cubic-phase SLM mask and check its sampling.
    Mask {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        wavelength: Option<String>,
        #[arg(long)]
        pixel: Option<String>,
        #[arg(long)]
        extent: Option<String>,
        /// Phase levels (0 = continuous).
        #[arg(long)]
        levels: Option<u32>,
        /// Blazed-grating period in pixels (0 = no ramp).
        #[arg(long)]
        ramp_pixels: Option<f64>,
        /// Write the mask even if it aliases.
        #[arg(long)]
        force: bool,
    },
    /// Run a bench and dump every tap.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Bench file (overrides the config).
        file: Option<PathBuf>,
    },
    /// Pinhole line scan across the main lobe at a tap.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bench: BenchArg,
        #[arg(long)]
        tap: Option<String>,
        #[arg(long)]
        diameter: Option<String>,
        #[arg(long)]
        step: Option<String>,
        #[arg(long)]
        range: Option<String>,
    },
    /// Main-lobe trajectory over a list of planes after a tap.
    Trajectory {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bench: BenchArg,
        #[arg(long)]
        tap: Option<String>,
        /// Comma-separated distances after the tap, e.g. 0m,1m,2m.
        #[arg(long, value_delimiter = ',')]
        z: Option<Vec<String>>,
        #[arg(long)]
        window_db: Option<f64>,
        /// Gaussian reference waist, or "none".
        #[arg(long)]
        gaussian_w0: Option<String>,
    },
    /// Fiber-coupled power drop caused by an opaque block, Airy vs Gaussian.
    Block {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bench: BenchArg,
        #[command(flatten)]
        block: BlockFlags,
    },
    /// Monte Carlo coincidence counting and CAR.
    Coincidence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bench: BenchArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        statistics: Option<String>,
        #[arg(long)]
        seconds: Option<f64>,
        #[arg(long)]
        extra_loss_db: Option<f64>,
        #[arg(long)]
        dark_s: Option<f64>,
        #[arg(long)]
        dark_i: Option<f64>,
        /// Signal-arm power drop caused by the block.
        #[arg(long)]
        drop: Option<f64>,
        /// Read the drop from a report written by `block`.
        #[arg(long)]
        drop_report: Option<PathBuf>,
        /// Also run with the block's drop applied.
        #[arg(long)]
        with_block: bool,
    },
}

#[derive(Args, Clone, Default)]
struct BlockFlags {
    #[arg(long)]
    tap: Option<String>,
    #[arg(long)]
    leg: Option<String>,
    #[arg(long)]
    block_z: Option<String>,
    #[arg(long)]
    insertion: Option<String>,
    #[arg(long)]
    side: Option<String>,
    #[arg(long)]
    gaussian_w0: Option<String>,
    /// fiber, pinhole or total.
    #[arg(long)]
    collector: Option<String>,
    #[arg(long)]
    fiber_mfd: Option<String>,
    #[arg(long)]
    pinhole: Option<String>,
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn load_config(common: &Common) -> airy_core::Result<ScenarioConfig> {
    match &common.config {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig {
            base_dir: PathBuf::from("."),
            ..Default::default()
        }),
    }
}

fn bench_for(cfg: &ScenarioConfig, flag: Option<&Path>) -> airy_core::Result<airy_core::bench::BenchConfig> {
    match flag {
        Some(p) => scenario::load_bench_file(p),
        None => cfg.load_bench(),
    }
}

fn run_dir(common: &Common, cfg: &ScenarioConfig, command: &str) -> airy_core::Result<RunDir> {
    let base = output_base(common.out.as_deref(), Some(cfg));
    let mut dir = RunDir::create(&base, &format!("{}-{command}", cfg.name()))?;
    dir.params = scenario::describe_file(cfg);
    Ok(dir)
}

fn with_header(params: &Params, body: &str) -> String {
    format!("{}{}", params.to_comments(), body)
}

fn block_params(cfg: &ScenarioConfig, flags: &BlockFlags, wavelength: f64) -> airy_core::Result<BlockParams> {
    let mut s = cfg.file.block.clone().unwrap_or_default();
    let f = flags.clone();
    set(&mut s.tap, f.tap);
    set(&mut s.leg, f.leg);
    set(&mut s.block_z, f.block_z);
    set(&mut s.insertion, f.insertion);
    set(&mut s.side, f.side);
    set(&mut s.gaussian_w0, f.gaussian_w0);
    set(&mut s.collector, f.collector);
    set(&mut s.fiber_mfd, f.fiber_mfd);
    set(&mut s.pinhole, f.pinhole);
    BlockParams::from_section(&s, wavelength)
}

fn run(cli: Cli) -> airy_core::Result<()> {
    match cli.command {
        Command::Mask {
            common,
            x0,
            a,
            f,
            wavelength,
            pixel,
            extent,
            levels,
            ramp_pixels,
            force,
        } => {
            let cfg = load_config(&common)?;
            let mut s = cfg.file.mask.clone().unwrap_or_default();
            set(&mut s.x0, x0);
            set(&mut s.a, a);
            set(&mut s.f, f);
            set(&mut s.wavelength, wavelength);
            set(&mut s.pixel, pixel);
            set(&mut s.extent, extent);
            set(&mut s.levels, levels);
            set(&mut s.ramp_pixels, ramp_pixels);
            let p = MaskParams::from_section(&s)?;
            let out = scenario::run_mask(&p, force)?;
            println!("{}", out.report);
            let mut dir = run_dir(&common, &cfg, "mask")?;
            dir.params.extend(&p.params());
            dir.write("mask.pgm", out.mask.to_pgm())?;
            dir.write("mask.meta", format!("{}{}", out.mask.sidecar(), p.params().to_text()))?;
            let mut report = p.params().to_comments();
            report.push_str(&format!("{}\n", out.report));
            report.push_str(&format!("truncation={}\n", out.design.truncation()));
            report.push_str(&format!("gaussian_clipped={}\n", out.design.gaussian_clipped()));
            dir.write("sampling.txt", report)?;
            println!("{}", dir.finish("mask")?.display());
        }
        Command::Bench { common, file } => {
            let cfg = load_config(&common)?;
            let bench = bench_for(&cfg, file.as_deref())?;
            let results = bench::run_bench(&bench)?;
            let mut dir = run_dir(&common, &cfg, "bench")?;
            let mut summary = String::from("label,z_m,power,peak_x_m,peak_y_m,guard_fraction\n");
            for r in &results {
                dir.write_field(&format!("{}.afld", r.label), &r.field)?;
                dir.write(&format!("{}.pgm", r.label), scenario::intensity_pgm(&r.field))?;
                let (i, j) = r.field.argmax();
                let g = r.field.grid();
                summary.push_str(&format!(
                    "{},{:?},{:e},{:e},{:e},{:e}\n",
                    r.label,
                    r.z,
                    r.field.total_power(),
                    g.x(i),
                    g.y(j),
                    r.guard_fraction
                ));
                println!("tap {} at z={} power {:.6e}", r.label, format_length(r.z), r.field.total_power());
            }
            dir.write("bench.txt", bench.to_doc())?;
            dir.write("summary.csv", summary)?;
            println!("{}", dir.finish("bench")?.display());
        }
        Command::Scan {
            common,
            bench: b,
            tap,
            diameter,
            step,
            range,
        } => {
            let cfg = load_config(&common)?;
            let bench = bench_for(&cfg, b.bench.as_deref())?;
            let mut s = cfg.file.scan.clone().unwrap_or_default();
            set(&mut s.tap, tap);
            set(&mut s.diameter, diameter);
            set(&mut s.step, step);
            set(&mut s.range, range);
            let p = ScanParams::from_section(&s)?;
            let (scan, width) = scenario::run_scan(&bench, &p)?;
            let mut dir = run_dir(&common, &cfg, "scan")?;
            dir.params.extend(&p.params());
            dir.params.len("scan.fwhm", width);
            dir.write("scan.csv", with_header(&dir.params.clone(), &scan.to_csv()))?;
            println!("{} points, FWHM {}", scan.profile.len(), format_length(width));
            println!("{}", dir.finish("scan")?.display());
        }
        Command::Trajectory {
            common,
            bench: b,
            tap,
            z,
            window_db,
            gaussian_w0,
        } => {
            let cfg = load_config(&common)?;
            let bench = bench_for(&cfg, b.bench.as_deref())?;
            let mut s = cfg.file.trajectory.clone().unwrap_or_default();
            set(&mut s.tap, tap);
            set(&mut s.z, z);
            set(&mut s.window_db, window_db);
            set(&mut s.gaussian_w0, gaussian_w0);
            let p = TrajectoryParams::from_section(&s)?;
            let out = scenario::run_trajectory(&bench, &p)?;
            let mut dir = run_dir(&common, &cfg, "trajectory")?;
            dir.params.extend(&p.params());
            let header = dir.params.clone();
            let zl = *p.z.last().expect("validated");
            dir.write("trajectory_airy.csv", with_header(&header, &out.airy.to_csv()))?;
            println!(
                "airy: c2={:e} deflection({})={} R2={:.6}",
                out.airy.c2,
                format_length(zl),
                format_length(out.airy.deflection(zl)),
                out.airy.r2
            );
            if let Some(g) = &out.gaussian {
                dir.write("trajectory_gaussian.csv", with_header(&header, &g.to_csv()))?;
                println!(
                    "gaussian: c2={:e} deflection({})={}",
                    g.c2,
                    format_length(zl),
                    format_length(g.deflection(zl))
                );
            }
            println!("{}", dir.finish("trajectory")?.display());
        }
        Command::Block {
            common,
            bench: b,
            block,
        } => {
            let cfg = load_config(&common)?;
            let bench = bench_for(&cfg, b.bench.as_deref())?;
            let p = block_params(&cfg, &block, bench.grid.wavelength)?;
            let out = scenario::run_block(&bench, &p)?;
            let mut dir = run_dir(&common, &cfg, "block")?;
            dir.params.extend(&p.params());
            dir.params.len("block.edge", out.edge);
            let header = dir.params.clone();
            dir.write("drop_airy.txt", with_header(&header, &out.airy.to_text()))?;
            dir.write("drop_gaussian.txt", with_header(&header, &out.gaussian.to_text()))?;
            dir.write("airy_arm.bench", out.airy_bench.to_doc())?;
            dir.write("gaussian_arm.bench", out.gaussian_bench.to_doc())?;
            println!("airy drop {:.4}, gaussian drop {:.4}", out.airy.drop, out.gaussian.drop);
            println!("{}", dir.finish("block")?.display());
        }
        Command::Coincidence {
            common,
            bench: b,
            seed,
            mu,
            statistics,
            seconds,
            extra_loss_db,
            dark_s,
            dark_i,
            drop,
            drop_report,
            with_block,
        } => {
            let cfg = load_config(&common)?;
            let seed = seed
                .or(cfg.file.seed)
                .ok_or_else(|| Error::Validation {
                    field: "seed",
                    reason: "counting needs a seed (--seed or `seed` in the config)".into(),
                })?;
            let mut s = cfg.file.counting.clone().unwrap_or_default();
            set(&mut s.mu, mu);
            set(&mut s.statistics, statistics);
            set(&mut s.seconds, seconds);
            set(&mut s.extra_loss_db, extra_loss_db);
            set(&mut s.dark_s, dark_s);
            set(&mut s.dark_i, dark_i);
            set(&mut s.drop, drop);
            if let Some(r) = drop_report {
                s.drop_report = Some(r.to_string_lossy().into_owned());
            }
            if with_block {
                s.with_block = Some(true);
            }
            let p = CountingParams::from_section(&s, &cfg)?;
            let drop = if !p.with_block {
                None
            } else if let Some(d) = p.drop {
                Some(d)
            } else if let Some(r) = &p.drop_report {
                Some(scenario::read_drop_report(r)?)
            } else {
                let bench = bench_for(&cfg, b.bench.as_deref())?;
                let bp = block_params(&cfg, &BlockFlags::default(), bench.grid.wavelength)?;
                if !matches!(bp.collector, Collector::Fiber { .. }) {
                    eprintln!("note: drop measured with a {} collector", bp.collector);
                }
                let d = scenario::run_block(&bench, &bp)?.airy.drop;
                println!("airy drop from block experiment {d:.4}");
                Some(d)
            };
            let out = scenario::run_coincidence(&p, seed, drop)?;
            let mut dir = run_dir(&common, &cfg, "coincidence")?;
            dir.params.push("seed", seed);
            dir.params.extend(&p.params());
            if let Some(d) = drop {
                dir.params.push("drop_applied", d);
            }
            let header = dir.params.clone();
            let mut report = header.to_comments();
            report.push_str("[baseline]\n");
            report.push_str(&out.baseline.manifest.to_text());
            report.push_str(&format!("net_coincidences={}\n", out.baseline.net.0));
            println!(
                "CAR {:.2} +/- {:.2} (analytic {})",
                out.baseline.manifest.car,
                out.baseline.manifest.sigma,
                out.baseline
                    .manifest
                    .analytic_car
                    .map_or("n/a".into(), |c| format!("{c:.2}"))
            );
            dir.write("histogram.csv", with_header(&header, &out.baseline.histogram.to_csv()))?;
            if let Some(bl) = &out.blocked {
                report.push_str("[blocked]\n");
                report.push_str(&bl.manifest.to_text());
                report.push_str(&format!("net_coincidences={}\n", bl.net.0));
                dir.write("histogram_blocked.csv", with_header(&header, &bl.histogram.to_csv()))?;
                println!("blocked CAR {:.2} +/- {:.2}", bl.manifest.car, bl.manifest.sigma);
            }
            if let Some((r, e)) = out.rate_ratio() {
                report.push_str(&format!("rate_ratio={r}\nrate_ratio_sigma={e}\n"));
                println!("coincidence ratio blocked/baseline {r:.4} +/- {e:.4}");
            }
            dir.write("car.txt", report)?;
            println!("{}", dir.finish("coincidence")?.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    let input = |e: &Error| match e {
        Error::BadMagic { .. } | Error::UnsupportedVersion { .. } | Error::Truncated { .. } => true,
        Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
        _ => false,
    };
    let inner = match e {
        Error::Element { source, .. } => source.as_ref(),
        other => other,
    };
    if e.is_validation() || input(inner) {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
