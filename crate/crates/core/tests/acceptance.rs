//! Acceptance suite: one PASS/FAIL line per criterion, evaluated on the
//! shipped bench and scenario files.
//!
//! Criteria are reported, not asserted, so a known shortfall stays visible
//! without hiding the rest. Set `AIRY_ACCEPTANCE_STRICT=1` to turn any FAIL
//! into a nonzero exit.

use std::path::PathBuf;
use std::time::Instant;

use airy_core::counting::{analytic_car, car_from_histogram, coincidence_histogram, simulate_counts};
use airy_core::counting::{ChannelParams, SourceParams};
use airy_core::field::{read_field, write_field};
use airy_core::metrology::best_shift_overlap;
use airy_core::modes::{airy_factor, airy_mode, fwhm, AiryParams, GaussianBeam, Profile1D};
use airy_core::propagation::{apply_lens, propagate};
use airy_core::scenario::{self, BlockParams, CountingParams, ScanParams, ScenarioConfig, TrajectoryParams};
use airy_core::{bench, ComplexField2D, Grid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        self.total += 1;
        if !ok {
            self.failed += 1;
        }
        println!("{} [{id}] {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn scenario_file(name: &str) -> ScenarioConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    ScenarioConfig::load(p).unwrap()
}

fn rel_l2(a: &ComplexField2D, b: &ComplexField2D) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.data().iter().map(|x| x.norm_sqr()).sum();
    (num / den).sqrt()
}

fn second_moment_width(f: &ComplexField2D) -> f64 {
    let g = f.grid();
    let (mut m0, mut m2) = (0.0, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let w = f.at(i, j).norm_sqr();
            m0 += w;
            m2 += w * g.x(i).powi(2);
        }
    }
    2.0 * (m2 / m0).sqrt()
}

fn main() {
    let start = Instant::now();
    let mut r = Report { failed: 0, total: 0 };
    let x0 = 271e-6;
    let a = 0.05;

    // 1. synthesis fidelity and runtime
    let trajectory_cfg = scenario_file("fig4_block_trajectory.toml");
    let bench_cfg = trajectory_cfg.load_bench().unwrap();
    let t = Instant::now();
    let focal = bench::run_to_tap(&bench_cfg, "focal").unwrap().field;
    let bench_secs = t.elapsed().as_secs_f64();
    let ana = airy_mode(&AiryParams::symmetric(x0, a).unwrap(), *focal.grid()).unwrap();
    let (fid, shift) = best_shift_overlap(&ana, &focal).unwrap();
    r.check("1a", fid >= 0.98, format!("focal-plane overlap with analytic mode {fid:.5} (shift {shift:?}), need >= 0.98"));
    r.check("1b", bench_secs <= 30.0, format!("Airy-arm bench to focal tap at 2048^2 in {bench_secs:.2} s, need <= 30 s"));

    // 2. main-lobe widths
    let xs: Vec<f64> = (0..40001).map(|i| -3e-3 + i as f64 * 0.1e-6).collect();
    let vs: Vec<f64> = xs.iter().map(|x| airy_factor(*x, x0, a).powi(2)).collect();
    let w_ana = fwhm(&Profile1D::new(xs, vs).unwrap()).unwrap();
    r.check(
        "2a",
        (w_ana / 434e-6 - 1.0).abs() <= 0.05,
        format!("analytic main-lobe FWHM {:.1} um vs 434 um +/- 5% (a = {a})", w_ana * 1e6),
    );
    let scan_cfg = scenario_file("fig3_scan.toml");
    let sp = ScanParams::from_section(&scan_cfg.file.scan.clone().unwrap_or_default()).unwrap();
    let scan = scenario::scan_main_lobe(&focal, &sp).unwrap();
    let w_scan = fwhm(&scan.profile).unwrap();
    r.check(
        "2b",
        (w_scan / 500e-6 - 1.0).abs() <= 0.10,
        format!(
            "pinhole-scanned FWHM {:.1} um ({} points, 0.25 mm pinhole) vs 500 um +/- 10%",
            w_scan * 1e6,
            scan.profile.len()
        ),
    );

    // 3. ballistic trajectory
    let tp = TrajectoryParams::from_section(&trajectory_cfg.file.trajectory.clone().unwrap_or_default()).unwrap();
    let airy_fit = scenario::trajectory_of(&focal, &tp, &bench_cfg).unwrap();
    let leg = *tp.z.last().unwrap();
    let k = focal.grid().wavenumber();
    let expect = leg * leg / (4.0 * k * k * x0.powi(3));
    let got = airy_fit.deflection(leg);
    r.check(
        "3a",
        (got / expect - 1.0).abs() <= 0.05,
        format!("Airy deflection at {leg} m {:.3} mm vs z^2/(4k^2x0^3) = {:.3} mm +/- 5%", got * 1e3, expect * 1e3),
    );
    r.check("3b", airy_fit.r2 >= 0.999, format!("trajectory fit R^2 {:.6}, need >= 0.999", airy_fit.r2));
    let chord = scenario::airy_chord(&focal, leg, &bench_cfg).unwrap();
    let gsrc = scenario::chord_gaussian(tp.gaussian_w0.unwrap(), chord, leg);
    let gfield = bench::source_field(&gsrc, *focal.grid()).unwrap();
    let gauss_fit = scenario::trajectory_of(&gfield, &tp, &bench_cfg).unwrap();
    let gdev = gauss_fit.c2.abs() * leg * leg;
    r.check("3c", gdev <= 0.1e-3, format!("Gaussian |c2| z^2 {:.2e} mm, need <= 0.1 mm", gdev * 1e3));
    drop((focal, ana, gfield));

    // 4. block experiment and coincidence ratio
    let bp = BlockParams::from_section(
        &trajectory_cfg.file.block.clone().unwrap_or_default(),
        bench_cfg.grid.wavelength,
    )
    .unwrap();
    let block = scenario::run_block(&bench_cfg, &bp).unwrap();
    r.check(
        "4a",
        block.gaussian.drop >= 0.85,
        format!("Gaussian-arm fiber-coupled drop {:.4}, need >= 0.85", block.gaussian.drop),
    );
    r.check(
        "4b",
        (0.2..=0.4).contains(&block.airy.drop),
        format!(
            "Airy-arm fiber-coupled drop {:.4}, need within [0.2, 0.4] (block edge {:.3} mm, {})",
            block.airy.drop,
            block.edge * 1e3,
            block.airy.collector
        ),
    );
    let seed = trajectory_cfg.file.seed.unwrap();
    let cp = CountingParams::from_section(
        &trajectory_cfg.file.counting.clone().unwrap_or_default(),
        &trajectory_cfg,
    )
    .unwrap();
    let coin = scenario::run_coincidence(&cp, seed, Some(block.airy.drop)).unwrap();
    let (ratio, ratio_sigma) = coin.rate_ratio().unwrap();
    let want = 1.0 - block.airy.drop;
    r.check(
        "4c",
        (ratio - want).abs() <= 3.0 * ratio_sigma,
        format!("coincidence ratio blocked/open {ratio:.4} +/- {ratio_sigma:.4} vs 1 - drop = {want:.4} (3 sigma)"),
    );
    r.check(
        "4d",
        (ratio - 0.72).abs() <= 3.0 * ratio_sigma,
        format!("coincidence ratio {ratio:.4} +/- {ratio_sigma:.4} vs measured 0.72 (3 sigma)"),
    );

    // 5. CAR reproduction
    let run_car = |name: &str| {
        let cfg = scenario_file(name);
        let p = CountingParams::from_section(&cfg.file.counting.clone().unwrap_or_default(), &cfg).unwrap();
        scenario::run_coincidence(&p, cfg.file.seed.unwrap(), None).unwrap().baseline.manifest
    };
    let plain = run_car("fig2_unmodulated.toml");
    let lossy = run_car("fig2_airy.toml");
    r.check(
        "5a",
        (plain.car - 70.0).abs() <= plain.sigma,
        format!(
            "CAR without extra loss {:.2} +/- {:.2} vs 70 (analytic {:.2}, {} gates)",
            plain.car,
            plain.sigma,
            plain.analytic_car.unwrap(),
            plain.source.n_gates
        ),
    );
    r.check(
        "5b",
        (lossy.car - 70.0).abs() <= lossy.sigma,
        format!(
            "CAR with extra 22 dB signal loss {:.2} +/- {:.2} vs 70 (analytic {:.2})",
            lossy.car,
            lossy.sigma,
            lossy.analytic_car.unwrap()
        ),
    );
    let comb = (plain.sigma.powi(2) + lossy.sigma.powi(2)).sqrt();
    r.check(
        "5c",
        (plain.car - lossy.car).abs() <= 2.0 * comb,
        format!("CARs differ by {:.2}, combined 2 sigma {:.2}", (plain.car - lossy.car).abs(), 2.0 * comb),
    );
    let blocked = &coin.blocked.as_ref().unwrap().manifest;
    r.check(
        "5d",
        (58.0..=72.0).contains(&blocked.car),
        format!(
            "CAR with block drop {:.4} and darks applied {:.2} +/- {:.2}, need within [58, 72]",
            block.airy.drop, blocked.car, blocked.sigma
        ),
    );

    // 6. numerical backbone
    let g = Grid::square(1024, 15e-6, 1.5547e-6).unwrap();
    let gauss = GaussianBeam::centered(1e-3).sample(g).unwrap();
    let p0 = gauss.total_power();
    let z1 = propagate(&gauss, 1.0).unwrap();
    let lensed = apply_lens(&gauss, 0.5).unwrap();
    let dp = ((z1.total_power() - p0).abs() / p0).max((lensed.total_power() - p0).abs() / p0);
    r.check("6a", dp <= 1e-10, format!("relative power change through propagate and lens {dp:.2e}, need <= 1e-10"));
    let split = propagate(&propagate(&gauss, 0.4).unwrap(), 0.6).unwrap();
    let semi = rel_l2(&z1, &split);
    r.check("6b", semi <= 1e-9, format!("semigroup relative L2 {semi:.2e}, need <= 1e-9"));
    let zr = std::f64::consts::PI * 1e-6 / g.wavelength;
    let w_closed = 1e-3 * (1.0 + (1.0 / zr).powi(2)).sqrt();
    let w_sim = second_moment_width(&z1);
    r.check(
        "6c",
        (w_sim / w_closed - 1.0).abs() <= 0.01,
        format!("Gaussian w(1 m) {:.4} mm vs closed form {:.4} mm (1%)", w_sim * 1e3, w_closed * 1e3),
    );
    drop((gauss, z1, lensed, split));

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut worst: f64 = 0.0;
    for case in 0..10u64 {
        let mu = rng.gen_range(0.01..0.1);
        let ch = ChannelParams::new(
            rng.gen_range(0.02..0.1),
            rng.gen_range(0.02..0.1),
            rng.gen_range(0.0..2e4),
            rng.gen_range(0.0..2e4),
        )
        .unwrap();
        let (ps, pi) = ch.dark_probabilities(1e-9);
        let per_gate = (mu * ch.eta_s + ps) * (mu * ch.eta_i + pi);
        let n = ((300.0 / per_gate) as u64).clamp(1_000_000, 20_000_000_000);
        let src = SourceParams::new(mu, 10e6, 1e-9, n).unwrap();
        let (s, i) = simulate_counts(&src, &ch, 7000 + case).unwrap();
        let h = coincidence_histogram(&s, &i, 0, 11, 1e-7).unwrap();
        let (car, sigma) = car_from_histogram(&h).unwrap();
        worst = worst.max((car - analytic_car(&src, &ch).unwrap()).abs() / sigma);
    }
    r.check("6d", worst <= 3.0, format!("MC vs analytic CAR over 10 cases: worst deviation {worst:.2} sigma, need <= 3"));

    let g = Grid::new(37, 23, 3.3e-6, 7.1e-6, 1.31e-6).unwrap();
    let mut k = 0u64;
    let f = ComplexField2D::from_fn(g, |x, y| {
        k += 1;
        Complex64::new((x * 1e5).sin() * k as f64, (y * 3e4).cos() / k as f64)
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.afld");
    write_field(&f, &path).unwrap();
    let back = read_field(&path).unwrap();
    let exact = back.grid() == f.grid()
        && f.data().iter().zip(back.data()).all(|(a, b)| {
            a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
        });
    r.check("6e", exact, "field file round trip bit-exact".into());

    let secs = start.elapsed().as_secs_f64();
    r.check("6f", secs <= 600.0, format!("acceptance suite ran in {secs:.1} s, need <= 600 s"));

    println!("acceptance: {} of {} criteria passed", r.total - r.failed, r.total);
    if r.failed > 0 && std::env::var_os("AIRY_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
