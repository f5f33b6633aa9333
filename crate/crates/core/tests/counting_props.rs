use airy_core::counting::{
    analytic_car, car_from_histogram, coincidence_histogram, simulate_counts, simulate_counts_per_gate,
    ChannelParams, SourceParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn src(mu: f64, n: u64) -> SourceParams {
    SourceParams::new(mu, 10e6, 1e-9, n).unwrap()
}

fn ch(es: f64, ei: f64, ds: f64, di: f64) -> ChannelParams {
    ChannelParams::new(es, ei, ds, di).unwrap()
}

fn mc_car(s: &SourceParams, c: &ChannelParams, seed: u64) -> (f64, f64, u64) {
    let (a, b) = simulate_counts(s, c, seed).unwrap();
    let h = coincidence_histogram(&a, &b, 0, 11, 1e-7).unwrap();
    let (car, sigma) = car_from_histogram(&h).unwrap();
    (car, sigma, h.center())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn identical_seeds_give_identical_streams(
        seed in any::<u64>(), mu in 0.001f64..0.3, es in 0.01f64..1.0, ei in 0.01f64..1.0,
        d in 0.0f64..1e5,
    ) {
        let s = src(mu, 3_000_000);
        let c = ch(es, ei, d, d);
        let (a1, b1) = simulate_counts(&s, &c, seed).unwrap();
        let (a2, b2) = simulate_counts(&s, &c, seed).unwrap();
        prop_assert_eq!(a1, a2);
        prop_assert_eq!(b1, b2);
    }

    #[test]
    fn analytic_car_decreases_with_mu_and_darks(
        mu in 1e-4f64..0.4, dmu in 1e-4f64..0.1, es in 1e-4f64..1.0, ei in 1e-4f64..1.0,
        d in 0.0f64..1e5, dd in 1.0f64..1e5,
    ) {
        let base = analytic_car(&src(mu, 1), &ch(es, ei, d, d)).unwrap();
        prop_assert!(analytic_car(&src((mu + dmu).min(0.5), 1), &ch(es, ei, d, d)).unwrap() < base);
        prop_assert!(analytic_car(&src(mu, 1), &ch(es, ei, d + dd, d)).unwrap() < base);
        prop_assert!(analytic_car(&src(mu, 1), &ch(es, ei, d, d + dd)).unwrap() < base);
    }

    #[test]
    fn analytic_car_without_darks_ignores_loss(
        mu in 1e-4f64..0.5, es in 1e-6f64..1.0, ei in 1e-6f64..1.0, es2 in 1e-6f64..1.0,
    ) {
        let a = analytic_car(&src(mu, 1), &ch(es, ei, 0.0, 0.0)).unwrap();
        let b = analytic_car(&src(mu, 1), &ch(es2, ei, 0.0, 0.0)).unwrap();
        prop_assert!((a - (1.0 + 1.0 / mu)).abs() <= 1e-12 * a);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

/// Ten seeded random cases with µ ≤ 0.1: simulated CAR within 3σ of the
/// closed form.
#[test]
fn monte_carlo_matches_analytic_over_a_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCA5E);
    for case in 0..10 {
        let mu = rng.gen_range(0.01..0.1);
        let es = rng.gen_range(0.02..0.1);
        let ei = rng.gen_range(0.02..0.1);
        let ds = rng.gen_range(0.0..2e4);
        let di = rng.gen_range(0.0..2e4);
        let probe = ch(es, ei, ds, di);
        let (ps, pi) = probe.dark_probabilities(1e-9);
        // enough gates for ~300 accidentals per reference bin
        let per_gate = (mu * es + ps) * (mu * ei + pi);
        let n = ((300.0 / per_gate) as u64).clamp(1_000_000, 20_000_000_000);
        let s = src(mu, n);
        let expect = analytic_car(&s, &probe).unwrap();
        let (car, sigma, _) = mc_car(&s, &probe, 1000 + case);
        assert!(
            (car - expect).abs() <= 3.0 * sigma,
            "case {case}: mu={mu:.4} eta=({es:.3},{ei:.3}) darks=({ds:.0},{di:.0}) n={n}: {car:.3} +/- {sigma:.3} vs {expect:.3}"
        );
    }
}

#[test]
fn zero_dark_car_survives_hundredfold_loss() {
    let s = src(0.05, 4_000_000_000);
    let (a, sa, _) = mc_car(&s, &ch(0.5, 0.5, 0.0, 0.0), 11);
    let s2 = src(0.05, 4_000_000_000);
    let (b, sb, _) = mc_car(&s2, &ch(0.005, 0.5, 0.0, 0.0), 12);
    assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{a} +/- {sa} vs {b} +/- {sb}");
}

#[test]
fn center_bin_scales_linearly_with_signal_efficiency() {
    let s = src(0.01, 1_000_000_000);
    let etas = [0.05, 0.1, 0.2];
    let counts: Vec<f64> = etas
        .iter()
        .enumerate()
        .map(|(k, &e)| mc_car(&s, &ch(e, 0.1, 100.0, 100.0), 50 + k as u64).2 as f64)
        .collect();
    let n = etas.len() as f64;
    let mx = etas.iter().sum::<f64>() / n;
    let my = counts.iter().sum::<f64>() / n;
    let sxy: f64 = etas.iter().zip(&counts).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = etas.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = counts.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 >= 0.999, "R2 = {r2}, counts {counts:?}");
}

/// The skip-sampling simulator and the literal gate-by-gate one draw from
/// the same distribution: singles and coincidences agree within 4σ.
#[test]
fn fast_simulator_matches_per_gate_oracle() {
    let s = src(0.1, 2_000_000);
    let c = ch(0.3, 0.4, 2e5, 5e4);
    let (fa, fb) = simulate_counts(&s, &c, 5).unwrap();
    let (oa, ob) = simulate_counts_per_gate(&s, &c, 6).unwrap();
    let close = |x: u64, y: u64| {
        let (x, y) = (x as f64, y as f64);
        (x - y).abs() <= 4.0 * (x + y).sqrt()
    };
    assert!(close(fa.count(), oa.count()), "{} vs {}", fa.count(), oa.count());
    assert!(close(fb.count(), ob.count()), "{} vs {}", fb.count(), ob.count());
    let hf = coincidence_histogram(&fa, &fb, 0, 11, 1e-7).unwrap();
    let ho = coincidence_histogram(&oa, &ob, 0, 11, 1e-7).unwrap();
    assert!(close(hf.center(), ho.center()), "{} vs {}", hf.center(), ho.center());
    let (af, ao): (u64, u64) = (hf.accidental_bins().iter().sum(), ho.accidental_bins().iter().sum());
    assert!(close(af, ao), "{af} vs {ao}");
}
