//! Airy function of the first kind, Ai(z) and Ai'(z), for real z.
//!
//! Three regimes:
//! - `|z| <= SERIES_LIMIT`: Maclaurin series.
//! - `|z| >= ASYMPTOTIC_LIMIT`: Poincaré asymptotic expansions, truncated at
//!   the smallest term.
//! - in between: high-order Taylor stepping of `y'' = z·y`, started from the
//!   asymptotic values at `+ASYMPTOTIC_LIMIT` (stepping toward the origin, so
//!   the decaying solution is the dominant one) or from the series values at
//!   `-SERIES_LIMIT` on the oscillatory side.

use std::f64::consts::{FRAC_PI_4, PI};

/// Ai(0)
const AI0: f64 = 0.355_028_053_887_817_239;
/// -Ai'(0)
const AIP0: f64 = 0.258_819_403_792_806_798;

const SERIES_LIMIT: f64 = 2.5;
const ASYMPTOTIC_LIMIT: f64 = 8.0;
const TAYLOR_STEP: f64 = 0.25;

/// Ai(z).
pub fn airy_ai(z: f64) -> f64 {
    airy_ai_pair(z).0
}

/// (Ai(z), Ai'(z)).
pub fn airy_ai_pair(z: f64) -> (f64, f64) {
    if z.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    if z.abs() <= SERIES_LIMIT {
        maclaurin(z)
    } else if z >= ASYMPTOTIC_LIMIT {
        if z > 105.0 {
            // e^{-ζ} underflows
            return (0.0, 0.0);
        }
        asymptotic_positive(z)
    } else if z <= -ASYMPTOTIC_LIMIT {
        asymptotic_negative(-z)
    } else if z > 0.0 {
        let start = asymptotic_positive(ASYMPTOTIC_LIMIT);
        taylor_walk(ASYMPTOTIC_LIMIT, start, z)
    } else {
        let start = maclaurin(-SERIES_LIMIT);
        taylor_walk(-SERIES_LIMIT, start, z)
    }
}

fn maclaurin(z: f64) -> (f64, f64) {
    // f = Σ a_k z^{3k},  g = Σ b_k z^{3k+1},  Ai = c1·f − c2·g
    let z3 = z * z * z;
    let mut f = 1.0;
    let mut g = z;
    let mut fp = 0.0;
    let mut gp = 1.0;
    let mut a = 1.0;
    let mut b = 1.0;
    let mut zpow = 1.0; // z^{3k}
    for k in 1..60 {
        let kf = k as f64;
        a /= (3.0 * kf) * (3.0 * kf - 1.0);
        b /= (3.0 * kf + 1.0) * (3.0 * kf);
        let prev = zpow;
        zpow *= z3;
        let ft = a * zpow;
        let gt = b * zpow * z;
        f += ft;
        g += gt;
        fp += a * 3.0 * kf * prev * z * z;
        gp += b * (3.0 * kf + 1.0) * zpow;
        if ft.abs() < 1e-18 * f.abs() && gt.abs() < 1e-18 * g.abs().max(1e-300) {
            break;
        }
    }
    (AI0 * f - AIP0 * g, AI0 * fp - AIP0 * gp)
}

/// Coefficients u_k and v_k of the asymptotic expansions.
fn uv(k: usize) -> (f64, f64) {
    let mut u = 1.0;
    for j in 1..=k {
        let jf = j as f64;
        u *= (6.0 * jf - 5.0) * (6.0 * jf - 3.0) * (6.0 * jf - 1.0) / ((2.0 * jf - 1.0) * 216.0 * jf);
    }
    let kf = k as f64;
    let v = if k == 0 { 1.0 } else { -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u };
    (u, v)
}

fn asymptotic_positive(z: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let mut su = 0.0;
    let mut sv = 0.0;
    let mut last = f64::INFINITY;
    let mut zk = 1.0;
    for k in 0..80 {
        let (u, v) = uv(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let tu = sign * u / zk;
        if tu.abs() > last {
            break;
        }
        last = tu.abs();
        su += tu;
        sv += sign * v / zk;
        if tu.abs() < 1e-17 * su.abs() {
            break;
        }
        zk *= zeta;
    }
    let e = (-zeta).exp();
    let q = z.powf(0.25);
    let norm = 2.0 * PI.sqrt();
    (e / (norm * q) * su, -q * e / norm * sv)
}

/// Ai(−z), Ai'(−z) for large positive `z`; returns values at the point −z.
fn asymptotic_negative(z: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let (mut ue, mut uo, mut ve, mut vo) = (0.0, 0.0, 0.0, 0.0);
    let mut last = f64::INFINITY;
    let mut zk = 1.0;
    for k in 0..80 {
        let (u, v) = uv(k);
        let t = u / zk;
        if t.abs() > last {
            break;
        }
        last = t.abs();
        // (−1)^{k/2} on even k, (−1)^{(k−1)/2} on odd k
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            ue += sign * t;
            ve += sign * v / zk;
        } else {
            uo += sign * t;
            vo += sign * v / zk;
        }
        if t < 1e-17 {
            break;
        }
        zk *= zeta;
    }
    let (s, c) = (zeta - FRAC_PI_4).sin_cos();
    let q = z.powf(0.25);
    let rp = PI.sqrt();
    let ai = (c * ue + s * uo) / (rp * q);
    let aip = q / rp * (s * ve - c * vo);
    (ai, aip)
}

/// Integrates `y'' = z·y` from `z0` to `target` with Taylor steps.
fn taylor_walk(z0: f64, start: (f64, f64), target: f64) -> (f64, f64) {
    let span = target - z0;
    let steps = (span.abs() / TAYLOR_STEP).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let (mut y, mut yp) = start;
    let mut z = z0;
    for _ in 0..steps {
        (y, yp) = taylor_step(z, y, yp, h);
        z += h;
    }
    (y, yp)
}

fn taylor_step(z0: f64, y0: f64, yp0: f64, h: f64) -> (f64, f64) {
    // a_{n+2} = (z0·a_n + a_{n−1}) / ((n+2)(n+1))
    let mut a_prev = 0.0; // a_{n-1}
    let mut a_n = y0;
    let mut a_n1 = yp0;
    let mut y = y0 + yp0 * h;
    let mut yp = yp0;
    let mut hp = h; // h^{n+1}
    for n in 0..80usize {
        let a_n2 = (z0 * a_n + a_prev) / (((n + 2) * (n + 1)) as f64);
        let term_y = a_n2 * hp * h;
        let term_yp = a_n2 * (n + 2) as f64 * hp;
        y += term_y;
        yp += term_yp;
        hp *= h;
        a_prev = a_n;
        a_n = a_n1;
        a_n1 = a_n2;
        if n > 4 && term_y.abs() <= 1e-18 * y.abs() && term_yp.abs() <= 1e-18 * yp.abs() {
            break;
        }
    }
    (y, yp)
}
