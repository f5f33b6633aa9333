//! Gated photon-pair counting: pair source, lossy channels with dark counts,
//! click streams, coincidence histograms and CAR.
//!
//! Gates are independent, so a gate's joint click outcome follows a fixed
//! four-way distribution computed from the pair-number generating function
//! `G(t) = E[tⁿ]`: no signal click has probability `G(1−ηs)(1−ds)`, no click
//! on either side `G((1−ηs)(1−ηi))(1−ds)(1−di)`. The Monte Carlo samples
//! that distribution directly and skips runs of empty gates geometrically,
//! which makes hour-long runs (3.6e10 gates) take a fraction of a second.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Gates per independently seeded sub-stream.
pub const CHUNK_GATES: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairStatistics {
    #[default]
    Poisson,
    /// Single-mode (geometric) pair-number distribution.
    Thermal,
}

impl std::str::FromStr for PairStatistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(PairStatistics::Poisson),
            "thermal" => Ok(PairStatistics::Thermal),
            other => Err(Error::validation("statistics", format!("{other:?} is not poisson or thermal"))),
        }
    }
}

impl std::fmt::Display for PairStatistics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairStatistics::Poisson => "poisson",
            PairStatistics::Thermal => "thermal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    /// Mean pairs per gate.
    pub mu: f64,
    pub rep_rate: f64,
    pub gate_width: f64,
    pub n_gates: u64,
    pub statistics: PairStatistics,
}

impl SourceParams {
    pub fn new(mu: f64, rep_rate: f64, gate_width: f64, n_gates: u64) -> Result<Self> {
        let s = SourceParams {
            mu,
            rep_rate,
            gate_width,
            n_gates,
            statistics: PairStatistics::Poisson,
        };
        s.validate()?;
        Ok(s)
    }

    /// Gate count for `seconds` of integration at `rep_rate`.
    pub fn for_duration(mu: f64, rep_rate: f64, gate_width: f64, seconds: f64) -> Result<Self> {
        if !(seconds > 0.0) {
            return Err(Error::validation("seconds", "integration time must be > 0"));
        }
        Self::new(mu, rep_rate, gate_width, (seconds * rep_rate).round() as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.mu) {
            return Err(Error::validation("mu", format!("{} outside [0, 0.5]", self.mu)));
        }
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return Err(Error::validation("rep_rate", "must be > 0"));
        }
        if !(self.gate_width > 0.0 && self.gate_width.is_finite()) {
            return Err(Error::validation("gate_width", "must be > 0"));
        }
        Ok(())
    }

    /// Pair-number generating function `E[tⁿ]`.
    fn generating(&self, t: f64) -> f64 {
        match self.statistics {
            PairStatistics::Poisson => (self.mu * (t - 1.0)).exp(),
            PairStatistics::Thermal => 1.0 / (1.0 + self.mu * (1.0 - t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub eta_s: f64,
    pub eta_i: f64,
    /// Dark count rates (counts/s).
    pub dark_s: f64,
    pub dark_i: f64,
    /// Gates by which the idler arm's delay line postpones its clicks.
    pub idler_delay_gates: u64,
}

impl ChannelParams {
    pub fn new(eta_s: f64, eta_i: f64, dark_s: f64, dark_i: f64) -> Result<Self> {
        let c = ChannelParams {
            eta_s,
            eta_i,
            dark_s,
            dark_i,
            idler_delay_gates: 0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_s", self.eta_s), ("eta_i", self.eta_i)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(name, format!("{v} outside [0, 1]")));
            }
        }
        for (name, v) in [("dark_s", self.dark_s), ("dark_i", self.dark_i)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("{v} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Per-gate dark click probabilities `(d_s, d_i)`.
    pub fn dark_probabilities(&self, gate_width: f64) -> (f64, f64) {
        ((self.dark_s * gate_width).min(1.0), (self.dark_i * gate_width).min(1.0))
    }
}

/// Closed-form CAR, `1 + µηsηi / ((µηs + ds)(µηi + di))`.
pub fn analytic_car(src: &SourceParams, ch: &ChannelParams) -> Result<f64> {
    src.validate()?;
    ch.validate()?;
    let (ds, di) = ch.dark_probabilities(src.gate_width);
    let den = (src.mu * ch.eta_s + ds) * (src.mu * ch.eta_i + di);
    if !(den > 0.0) {
        return Err(Error::validation(
            "mu",
            "no pairs and no dark counts reach a detector; CAR is undefined",
        ));
    }
    Ok(1.0 + src.mu * ch.eta_s * ch.eta_i / den)
}

/// Exact per-gate joint click probabilities `[p00, p10, p01, p11]`
/// (signal, idler) for a gate and its partner idler gate.
pub fn gate_probabilities(src: &SourceParams, ch: &ChannelParams) -> [f64; 4] {
    let (ds, di) = ch.dark_probabilities(src.gate_width);
    let p_s0 = src.generating(1.0 - ch.eta_s) * (1.0 - ds);
    let p_i0 = src.generating(1.0 - ch.eta_i) * (1.0 - di);
    let p00 = src.generating((1.0 - ch.eta_s) * (1.0 - ch.eta_i)) * (1.0 - ds) * (1.0 - di);
    let p10 = (p_i0 - p00).max(0.0);
    let p01 = (p_s0 - p00).max(0.0);
    let p11 = (1.0 - p00 - p10 - p01).max(0.0);
    [p00, p10, p01, p11]
}

/// Sparse click record of a non-number-resolving gated detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickStream {
    pub n_gates: u64,
    /// Strictly increasing indices of gates that clicked.
    pub clicks: Vec<u64>,
}

impl ClickStream {
    pub fn count(&self) -> u64 {
        self.clicks.len() as u64
    }

    /// Clicks per gate.
    pub fn rate(&self) -> f64 {
        if self.n_gates == 0 {
            0.0
        } else {
            self.count() as f64 / self.n_gates as f64
        }
    }

    /// Expands to one boolean per gate.
    pub fn to_dense(&self) -> Vec<bool> {
        let mut v = vec![false; self.n_gates as usize];
        for &g in &self.clicks {
            v[g as usize] = true;
        }
        v
    }

    pub fn from_dense(bits: &[bool]) -> Self {
        ClickStream {
            n_gates: bits.len() as u64,
            clicks: bits
                .iter()
                .enumerate()
                .filter_map(|(g, &b)| b.then_some(g as u64))
                .collect(),
        }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Monte Carlo of the counting chain. Bit-exact for a fixed seed regardless
/// of thread count: every block of [`CHUNK_GATES`] gates draws from its own
/// ChaCha stream and blocks are concatenated in order.
pub fn simulate_counts(src: &SourceParams, ch: &ChannelParams, seed: u64) -> Result<(ClickStream, ClickStream)> {
    src.validate()?;
    ch.validate()?;
    let [p00, p10, p01, _] = gate_probabilities(src, ch);
    let p_event = 1.0 - p00;
    let n = src.n_gates;
    let delay = ch.idler_delay_gates;
    let chunks = n.div_ceil(CHUNK_GATES);
    let per_chunk: Vec<(Vec<u64>, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_GATES;
            let end = ((c + 1) * CHUNK_GATES).min(n);
            let mut s = Vec::new();
            let mut i = Vec::new();
            if p_event <= 0.0 {
                return (s, i);
            }
            let mut rng = chunk_rng(seed, c);
            let skip = Geometric::new(p_event.min(1.0)).expect("probability in (0, 1]");
            let mut g = start;
            loop {
                g = g.saturating_add(skip.sample(&mut rng));
                if g >= end {
                    break;
                }
                let u: f64 = rng.gen::<f64>() * p_event;
                let (sig, idl) = if u < p10 {
                    (true, false)
                } else if u < p10 + p01 {
                    (false, true)
                } else {
                    (true, true)
                };
                if sig {
                    s.push(g);
                }
                if idl && g + delay < n {
                    i.push(g + delay);
                }
                g += 1;
            }
            (s, i)
        })
        .collect();
    let mut s = Vec::new();
    let mut i = Vec::new();
    for (cs, ci) in per_chunk {
        s.extend(cs);
        i.extend(ci);
    }
    Ok((ClickStream { n_gates: n, clicks: s }, ClickStream { n_gates: n, clicks: i }))
}

/// Literal gate-by-gate simulation: draw the pair number, thin each photon
/// by its channel, add dark clicks. Slow, kept as an independent reference
/// for [`simulate_counts`].
pub fn simulate_counts_per_gate(src: &SourceParams, ch: &ChannelParams, seed: u64) -> Result<(ClickStream, ClickStream)> {
    src.validate()?;
    ch.validate()?;
    let (ds, di) = ch.dark_probabilities(src.gate_width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = (src.mu > 0.0).then(|| Poisson::new(src.mu).expect("mu > 0"));
    let n = src.n_gates;
    let delay = ch.idler_delay_gates;
    let mut s = Vec::new();
    let mut i = Vec::new();
    for g in 0..n {
        let pairs = match (src.statistics, &poisson) {
            (_, None) => 0,
            (PairStatistics::Poisson, Some(p)) => p.sample(&mut rng) as u64,
            (PairStatistics::Thermal, Some(_)) => {
                // P(n) = µⁿ/(1+µ)^{n+1}: failures before success at 1/(1+µ)
                Geometric::new(1.0 / (1.0 + src.mu)).expect("valid").sample(&mut rng)
            }
        };
        let detected = |eta: f64, rng: &mut ChaCha8Rng| {
            pairs > 0 && eta > 0.0 && Binomial::new(pairs, eta).expect("valid").sample(rng) > 0
        };
        let sig = detected(ch.eta_s, &mut rng) | (rng.gen::<f64>() < ds);
        let idl = detected(ch.eta_i, &mut rng) | (rng.gen::<f64>() < di);
        if sig {
            s.push(g);
        }
        if idl && g + delay < n {
            i.push(g + delay);
        }
    }
    Ok((ClickStream { n_gates: n, clicks: s }, ClickStream { n_gates: n, clicks: i }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    /// Bin width (s); one gate period.
    pub bin_width: f64,
    pub span: u64,
    /// Delay (gates) subtracted so that bin 0 holds the physical pairing.
    pub idler_delay: u64,
    /// `counts[m + span]` for offsets `m ∈ [−span, span]`.
    pub counts: Vec<u64>,
    pub n_gates: u64,
}

impl CoincidenceHistogram {
    pub fn at(&self, offset: i64) -> u64 {
        self.counts[(offset + self.span as i64) as usize]
    }

    pub fn center(&self) -> u64 {
        self.at(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Off-center bins used as the accidental reference: `2 ≤ |m| ≤ 11`.
    pub fn accidental_bins(&self) -> Vec<u64> {
        let hi = self.span.min(11) as i64;
        (2..=hi).flat_map(|m| [self.at(-m), self.at(m)]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# bin_width_s={:e}", self.bin_width);
        let _ = writeln!(out, "# n_gates={}", self.n_gates);
        let _ = writeln!(out, "# idler_delay_gates={}", self.idler_delay);
        out.push_str("delay_gates,counts\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{}", k as i64 - self.span as i64, c);
        }
        out
    }
}

/// `counts[m] = Σ_g s[g]·i[g + idler_delay + m]` for `|m| ≤ span`.
pub fn coincidence_histogram(
    s: &ClickStream,
    i: &ClickStream,
    idler_delay: u64,
    span: u64,
    bin_width: f64,
) -> Result<CoincidenceHistogram> {
    if s.n_gates != i.n_gates {
        return Err(Error::validation("streams", "signal and idler streams differ in length"));
    }
    let n = s.n_gates;
    if 2 * span + 1 > n || idler_delay + span >= n {
        return Err(Error::validation(
            "span",
            format!("span {span} with delay {idler_delay} exceeds the {n}-gate stream"),
        ));
    }
    let width = (2 * span + 1) as usize;
    let counts = s
        .clicks
        .par_chunks(1 << 16)
        .map(|block| {
            let mut local = vec![0u64; width];
            for &g in block {
                let center = g as i128 + idler_delay as i128;
                let lo = center - span as i128;
                let hi = center + span as i128;
                let first = i.clicks.partition_point(|&h| (h as i128) < lo);
                for &h in &i.clicks[first..] {
                    if h as i128 > hi {
                        break;
                    }
                    local[(h as i128 - lo) as usize] += 1;
                }
            }
            local
        })
        .reduce(
            || vec![0u64; width],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(CoincidenceHistogram {
        bin_width,
        span,
        idler_delay,
        counts,
        n_gates: n,
    })
}

/// CAR = C/Ā with Poisson error `car·√(1/C + 1/ΣA)`. For `C = 0` the
/// error is that of a single count, `1/Ā`.
pub fn car_from_histogram(h: &CoincidenceHistogram) -> Result<(f64, f64)> {
    let acc = h.accidental_bins();
    if acc.len() < 5 {
        return Err(Error::validation(
            "histogram",
            format!("need at least 5 off-center bins, span {} gives {}", h.span, acc.len()),
        ));
    }
    let sum_a: u64 = acc.iter().sum();
    if sum_a == 0 {
        return Err(Error::Numerical("no accidentals measured".into()));
    }
    let mean_a = sum_a as f64 / acc.len() as f64;
    let c = h.center() as f64;
    if c == 0.0 {
        return Ok((0.0, 1.0 / mean_a));
    }
    let car = c / mean_a;
    Ok((car, car * (1.0 / c + 1.0 / sum_a as f64).sqrt()))
}

/// Center-bin counts with the mean accidental level removed, and its
/// Poisson standard error.
pub fn net_coincidences(h: &CoincidenceHistogram) -> (f64, f64) {
    let acc = h.accidental_bins();
    let sum_a: u64 = acc.iter().sum();
    let mean_a = sum_a as f64 / acc.len().max(1) as f64;
    let c = h.center() as f64;
    let var = c + mean_a / acc.len().max(1) as f64;
    (c - mean_a, var.sqrt())
}

/// Channel transmission `10^(−dB/10)·coupling·det_eff·(1 − drop)`.
pub fn arm_transmission(drop: f64, base_loss_db: f64, coupling: f64, det_eff: f64) -> Result<f64> {
    if !base_loss_db.is_finite() || base_loss_db < 0.0 {
        return Err(Error::validation("base_loss_db", "must be >= 0"));
    }
    for (name, v) in [("coupling", coupling), ("det_eff", det_eff)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::validation(name, format!("{v} outside [0, 1]")));
        }
    }
    if !(drop <= 1.0) {
        return Err(Error::validation("drop", format!("{drop} exceeds 1")));
    }
    let eta = 10f64.powf(-base_loss_db / 10.0) * coupling * det_eff * (1.0 - drop);
    if eta > 1.0 {
        return Err(Error::validation("drop", "transmission would exceed 1"));
    }
    Ok(eta)
}

/// Summary of one counting run as key=value text.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub seed: u64,
    pub source: SourceParams,
    pub channel: ChannelParams,
    pub clicks_s: u64,
    pub clicks_i: u64,
    pub center: u64,
    pub mean_accidentals: f64,
    pub car: f64,
    pub sigma: f64,
    pub analytic_car: Option<f64>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.source;
        let c = &self.channel;
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "mu={:e}", s.mu);
        let _ = writeln!(out, "statistics={}", s.statistics);
        let _ = writeln!(out, "rep_rate_hz={:e}", s.rep_rate);
        let _ = writeln!(out, "gate_width_s={:e}", s.gate_width);
        let _ = writeln!(out, "n_gates={}", s.n_gates);
        let _ = writeln!(out, "eta_s={:e}", c.eta_s);
        let _ = writeln!(out, "eta_i={:e}", c.eta_i);
        let _ = writeln!(out, "dark_s_cps={:e}", c.dark_s);
        let _ = writeln!(out, "dark_i_cps={:e}", c.dark_i);
        let _ = writeln!(out, "idler_delay_gates={}", c.idler_delay_gates);
        let _ = writeln!(out, "clicks_s={}", self.clicks_s);
        let _ = writeln!(out, "clicks_i={}", self.clicks_i);
        let _ = writeln!(out, "center_counts={}", self.center);
        let _ = writeln!(out, "mean_accidentals={}", self.mean_accidentals);
        let _ = writeln!(out, "car={}", self.car);
        let _ = writeln!(out, "car_sigma={}", self.sigma);
        match self.analytic_car {
            Some(a) => {
                let _ = writeln!(out, "analytic_car={a}");
            }
            None => out.push_str("analytic_car=undefined\n"),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(mu: f64, n: u64) -> SourceParams {
        SourceParams::new(mu, 10e6, 1e-9, n).unwrap()
    }

    #[test]
    fn analytic_examples() {
        let ch = ChannelParams::new(0.3, 0.07, 0.0, 0.0).unwrap();
        let car = analytic_car(&src(1.0 / 69.0, 1), &ch).unwrap();
        assert!((car - 70.0).abs() < 1e-12);
        assert!((analytic_car(&src(0.1, 1), &ch).unwrap() - 11.0).abs() < 1e-12);
        let lossy = ChannelParams {
            eta_s: 0.3 * 10f64.powf(-2.2),
            ..ch
        };
        assert!((analytic_car(&src(1.0 / 69.0, 1), &lossy).unwrap() - car).abs() < 1e-9);
        assert!(analytic_car(&src(0.0, 1), &ch).is_err());
    }

    #[test]
    fn gate_probabilities_sum_to_one() {
        let s = src(0.05, 1);
        let ch = ChannelParams::new(0.2, 0.4, 1e3, 2e3).unwrap();
        let p = gate_probabilities(&s, &ch);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // marginal signal click rate 1 − e^{−µηs}(1−ds)
        let want = 1.0 - (-0.05f64 * 0.2).exp() * (1.0 - 1e-6);
        assert!((p[1] + p[3] - want).abs() < 1e-15);
    }

    #[test]
    fn no_light_no_clicks() {
        let (s, i) = simulate_counts(&src(0.0, 1_000_000), &ChannelParams::new(0.5, 0.5, 0.0, 0.0).unwrap(), 3).unwrap();
        assert_eq!((s.count(), i.count()), (0, 0));
    }

    #[test]
    fn histogram_of_identical_streams() {
        let s = ClickStream {
            n_gates: 100,
            clicks: vec![3, 10, 50, 97],
        };
        let h = coincidence_histogram(&s, &s, 0, 5, 1e-7).unwrap();
        assert_eq!(h.center(), 4);
        // nearest distinct clicks are 7 gates apart, beyond the span
        assert_eq!(h.total(), 4);
        assert!(coincidence_histogram(&s, &s, 0, 60, 1e-7).is_err());
    }

    #[test]
    fn delayed_pairing_lands_in_center() {
        let s = ClickStream {
            n_gates: 50,
            clicks: vec![1, 20],
        };
        let i = ClickStream {
            n_gates: 50,
            clicks: vec![8, 27],
        };
        let h = coincidence_histogram(&s, &i, 7, 3, 1e-7).unwrap();
        assert_eq!(h.center(), 2);
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn car_examples() {
        let mut counts = vec![10u64; 23];
        counts[11] = 700;
        let h = CoincidenceHistogram {
            bin_width: 1e-7,
            span: 11,
            idler_delay: 0,
            counts,
            n_gates: 1000,
        };
        let (car, sigma) = car_from_histogram(&h).unwrap();
        assert_eq!(h.accidental_bins().len(), 20);
        assert!((car - 70.0).abs() < 1e-12);
        // sigma uses the summed accidentals of all 20 reference bins
        assert!((sigma - 70.0 * (1.0f64 / 700.0 + 1.0 / 200.0).sqrt()).abs() < 1e-12);

        // ten reference bins of 10 counts each: sigma = 70·√(1/700 + 1/100)
        let mut ten = vec![10u64; 13];
        ten[6] = 700;
        let h10 = CoincidenceHistogram {
            span: 6,
            counts: ten,
            ..h.clone()
        };
        assert_eq!(h10.accidental_bins().len(), 10);
        let (car, sigma) = car_from_histogram(&h10).unwrap();
        assert!((car - 70.0).abs() < 1e-12);
        assert!((sigma - 7.4833).abs() < 1e-4, "{sigma}");
        assert!((sigma - 7.6).abs() < 0.2);

        let mut zero = h.clone();
        zero.counts[11] = 0;
        assert_eq!(car_from_histogram(&zero).unwrap().0, 0.0);
        let mut empty = h.clone();
        empty.counts = vec![0; 23];
        assert!(car_from_histogram(&empty).is_err());
        let narrow = CoincidenceHistogram {
            span: 3,
            counts: vec![1; 7],
            ..h
        };
        assert!(car_from_histogram(&narrow).is_err());
    }

    #[test]
    fn transmission_arithmetic() {
        assert!((arm_transmission(0.0, 22.0, 1.0, 1.0).unwrap() - 6.3096e-3).abs() < 1e-7);
        let base = arm_transmission(0.0, 3.0, 0.5, 0.1).unwrap();
        assert!((arm_transmission(0.3, 3.0, 0.5, 0.1).unwrap() / base - 0.7).abs() < 1e-12);
        assert!(arm_transmission(0.0, 0.0, 1.2, 1.0).is_err());
    }

    #[test]
    fn dense_roundtrip() {
        let s = ClickStream {
            n_gates: 8,
            clicks: vec![0, 5, 7],
        };
        assert_eq!(ClickStream::from_dense(&s.to_dense()), s);
    }
}
