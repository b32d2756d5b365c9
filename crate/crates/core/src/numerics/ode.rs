//! Adaptive Dormand-Prince 5(4) integrator for complex vector fields.

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 1_000_000, initial_step: None }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates y' = f(t, y) from `t0` to `t1` (either direction).
pub fn dopri5<F>(mut f: F, t0: f64, t1: f64, y0: &[C64], opts: OdeOptions) -> Result<(Vec<C64>, OdeStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok((y, stats));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let zero = C64::new(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];

    f(t0, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = opts.initial_step.unwrap_or_else(|| {
        let fnorm = k[0].iter().map(|z| z.norm()).fold(0.0, f64::max);
        if fnorm > 0.0 {
            (0.01 * (opts.rtol.max(1e-14)).powf(0.2) / fnorm * 10.0).min(span)
        } else {
            span
        }
    });
    h = h.min(span).max(span * 1e-12);
    let mut t = t0;

    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Budget(opts.max_steps));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        let hs = h * dir;

        let stage = |tmp: &mut [C64], y: &[C64], k: &[Vec<C64>], coeffs: &[(usize, f64)]| {
            for i in 0..n {
                let mut acc = y[i];
                for &(j, a) in coeffs {
                    acc += k[j][i] * (a * hs);
                }
                tmp[i] = acc;
            }
        };
        stage(&mut tmp, &y, &k, &[(0, A21)]);
        f(t + C2 * hs, &tmp, &mut k[1]);
        stage(&mut tmp, &y, &k, &[(0, A31), (1, A32)]);
        f(t + C3 * hs, &tmp, &mut k[2]);
        stage(&mut tmp, &y, &k, &[(0, A41), (1, A42), (2, A43)]);
        f(t + C4 * hs, &tmp, &mut k[3]);
        stage(&mut tmp, &y, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        f(t + C5 * hs, &tmp, &mut k[4]);
        stage(&mut tmp, &y, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        f(t + hs, &tmp, &mut k[5]);
        stage(&mut ynew, &y, &k, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
        let (head, tail) = k.split_at_mut(6);
        f(t + hs, &ynew, &mut tail[0]);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = (head[0][i] * E1 + head[2][i] * E3 + head[3][i] * E4 + head[4][i] * E5 + head[5][i] * E6 + tail[0][i] * E7) * hs;
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite("ode step"));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            stats.accepted += 1;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h < span * 1e-14 {
            return Err(Error::ToleranceNotMet { tolerance: opts.rtol, estimate: err });
        }
    }
    Ok((y, stats))
}
