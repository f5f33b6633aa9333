use airy_core::field::{read_field, write_field};
use airy_core::metrology::{coupling_efficiency, peak_trajectory, pinhole_scan};
use airy_core::modes::{airy_mode, fwhm, AiryParams, GaussianBeam, Profile1D};
use airy_core::propagation::{apply_lens, propagate};
use airy_core::{ComplexField2D, Grid};
use num_complex::Complex64;
use proptest::prelude::*;

fn random_field(nx: usize, ny: usize, seed: &[f64]) -> ComplexField2D {
    let g = Grid::new(nx, ny, 7e-6, 9e-6, 1.55e-6).unwrap();
    let mut k = 0usize;
    ComplexField2D::from_fn(g, |_, _| {
        let re = seed[k % seed.len()] * ((k * 37 % 11) as f64 - 5.0);
        let im = seed[(k + 3) % seed.len()] - 0.5 * (k % 7) as f64;
        k += 1;
        Complex64::new(re, im)
    })
}

fn rel_l2(a: &ComplexField2D, b: &ComplexField2D) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.data().iter().map(|x| x.norm_sqr()).sum();
    (num / den).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn power_ignores_global_phase(
        nx in 2usize..24, ny in 2usize..24,
        seed in prop::collection::vec(-3.0f64..3.0, 5..20),
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let f = random_field(nx, ny, &seed);
        let p = f.total_power();
        let q = f.clone().scaled(Complex64::from_polar(1.0, theta)).total_power();
        prop_assert!((p - q).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn field_files_round_trip_bit_exact(
        nx in 2usize..20, ny in 2usize..20,
        dx in 1e-7f64..1e-3, dy in 1e-7f64..1e-3, wl in 2e-7f64..2e-5,
        seed in prop::collection::vec(-1e6f64..1e6, 3..12),
    ) {
        let g = Grid::new(nx, ny, dx, dy, wl).unwrap();
        let f = ComplexField2D::from_data(g, random_field(nx, ny, &seed).into_data()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.afld");
        write_field(&f, &path).unwrap();
        let back = read_field(&path).unwrap();
        prop_assert_eq!(back.grid().nx, nx);
        prop_assert_eq!(back.grid().ny, ny);
        prop_assert_eq!(back.grid().dx.to_bits(), dx.to_bits());
        prop_assert_eq!(back.grid().dy.to_bits(), dy.to_bits());
        prop_assert_eq!(back.grid().wavelength.to_bits(), wl.to_bits());
        for (a, b) in f.data().iter().zip(back.data()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn coupling_is_symmetric_and_phase_blind(
        seed_a in prop::collection::vec(-2.0f64..2.0, 4..9),
        seed_b in prop::collection::vec(-2.0f64..2.0, 4..9),
        ta in 0.0f64..6.3, tb in 0.0f64..6.3,
    ) {
        let a = random_field(12, 10, &seed_a);
        let b = random_field(12, 10, &seed_b);
        prop_assume!(a.total_power() > 0.0 && b.total_power() > 0.0);
        let ab = coupling_efficiency(&a, &b).unwrap();
        let ba = coupling_efficiency(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        let a2 = a.clone().scaled(Complex64::from_polar(1.0, ta));
        let b2 = b.clone().scaled(Complex64::from_polar(1.0, tb));
        prop_assert!((coupling_efficiency(&a2, &b2).unwrap() - ab).abs() <= 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn fwhm_is_exact_under_binary_rescaling(k in -60i32..60, w in 5.0f64..40.0) {
        // Powers of two scale samples without rounding, so the width is bit-identical.
        let c = 2f64.powi(k);
        let xs: Vec<f64> = (0..201).map(|i| i as f64 - 100.0).collect();
        let vs: Vec<f64> = xs.iter().map(|x| (-(x / w).powi(2)).exp()).collect();
        let p = Profile1D::new(xs, vs).unwrap();
        prop_assert_eq!(fwhm(&p).unwrap(), fwhm(&p.scaled(c).unwrap()).unwrap());
    }

    #[test]
    fn trajectory_ignores_per_plane_rescaling(s in prop::collection::vec(1e-6f64..1e6, 4)) {
        let g = Grid::square(64, 10e-6, 1.55e-6).unwrap();
        let fields: Vec<ComplexField2D> = (0..4)
            .map(|k| {
                GaussianBeam { w0: 60e-6, center: (-80e-6 + 10e-6 * (k * k) as f64, 0.0), tilt: (0.0, 0.0) }
                    .sample(g)
                    .unwrap()
            })
            .collect();
        let zs = [0.0, 1.0, 2.0, 3.0];
        let plain: Vec<(f64, &ComplexField2D)> = zs.iter().copied().zip(fields.iter()).collect();
        let scaled_fields: Vec<ComplexField2D> = fields
            .iter()
            .zip(&s)
            .map(|(f, c)| f.clone().scaled(Complex64::new(*c, 0.0)))
            .collect();
        let scaled: Vec<(f64, &ComplexField2D)> = zs.iter().copied().zip(scaled_fields.iter()).collect();
        let a = peak_trajectory(&plain, 0.5).unwrap();
        let b = peak_trajectory(&scaled, 0.5).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            prop_assert_eq!(p.x_peak, q.x_peak);
        }
        prop_assert!((a.c2 - 10e-6).abs() < 1e-7);
    }

    #[test]
    fn scan_follows_translation(shift in -12i32..12) {
        let g = Grid::square(96, 10e-6, 1.55e-6).unwrap();
        let f = GaussianBeam { w0: 80e-6, center: (0.0, 0.0), tilt: (0.0, 0.0) }.sample(g).unwrap();
        let moved = f.roll(shift as isize, 0);
        let d = shift as f64 * 10e-6;
        let a = pinhole_scan(&f, 40e-6, 10e-6, 0.3e-3, 0.0, 0.0).unwrap();
        let b = pinhole_scan(&moved, 40e-6, 10e-6, 0.3e-3, d, 0.0).unwrap();
        for (u, v) in a.profile.values().iter().zip(b.profile.values()) {
            prop_assert!((u - v).abs() <= 1e-9 * a.profile.values().iter().cloned().fold(0.0, f64::max));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn propagation_conserves_power_and_composes(
        w0 in 0.15e-3f64..0.35e-3,
        cx in -0.3e-3f64..0.3e-3,
        tx in -1e-3f64..1e-3,
        z1 in 0.0f64..1.5, z2 in 0.0f64..1.5,
    ) {
        let g = Grid::square(256, 20e-6, 1.5547e-6).unwrap();
        let f = GaussianBeam { w0, center: (cx, 0.0), tilt: (tx, 0.0) }.sample(g).unwrap();
        let p0 = f.total_power();
        let one = propagate(&f, z1 + z2).unwrap();
        let two = propagate(&propagate(&f, z1).unwrap(), z2).unwrap();
        prop_assert!((one.total_power() - p0).abs() <= 1e-10 * p0);
        prop_assert!(rel_l2(&one, &two) <= 1e-9, "{}", rel_l2(&one, &two));
        let lensed = apply_lens(&f, 0.3 + z1).unwrap();
        prop_assert!((lensed.total_power() - p0).abs() <= 1e-10 * p0);
    }
}

#[test]
fn airy_mode_is_an_outer_product() {
    let g = Grid::new(300, 260, 12e-6, 15e-6, 1.5547e-6).unwrap();
    let f = airy_mode(&AiryParams::new(150e-6, 190e-6, 0.08).unwrap(), g).unwrap();
    let row: Vec<Complex64> = (0..g.nx).map(|i| f.at(i, 0)).collect();
    let col: Vec<Complex64> = (0..g.ny).map(|j| f.at(0, j)).collect();
    let corner = f.at(0, 0);
    assert!(corner.norm() > 0.0);
    let peak = f.peak_intensity().sqrt();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let outer = row[i] * col[j] / corner;
            assert!((f.at(i, j) - outer).norm() <= 1e-12 * peak, "({i},{j})");
        }
    }
}

#[test]
fn airy_peak_approaches_ai_maximum_as_truncation_vanishes() {
    let x0 = 100e-6;
    let g = Grid::square(512, 2e-6, 1.55e-6).unwrap();
    let target = -1.018_792_971_647_471 * x0;
    let mut last = f64::INFINITY;
    for a in [0.4, 0.2, 0.1, 0.05, 0.02, 0.01] {
        let f = airy_mode(&AiryParams::symmetric(x0, a).unwrap(), g).unwrap();
        let (i, _) = f.argmax();
        let err = (g.x(i) - target).abs();
        assert!(err <= last + 1e-15, "a = {a}: {err} after {last}");
        last = err;
    }
    assert!(last <= g.dx, "{last}");
}
