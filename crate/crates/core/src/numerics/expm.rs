//! Action of exp(-i t H) for Hermitian H via a Chebyshev expansion.
//!
//! With H' = (H - c)/r mapping the spectrum into [-1, 1],
//! exp(-i t H) = e^{-i t c} sum_k (2 - delta_k0) (-i)^k J_k(t r) T_k(H').

use rayon::prelude::*;

use super::{norm, PAR_THRESHOLD};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ExpmOptions {
    pub tolerance: f64,
    pub max_terms: usize,
}

impl Default for ExpmOptions {
    fn default() -> Self {
        Self { tolerance: 1e-13, max_terms: 200_000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExpmReport {
    pub terms: usize,
    /// Bound on the discarded coefficients times the input norm.
    pub truncation: f64,
}

/// Bessel functions J_0..=J_n at `x >= 0` by Miller's backward recurrence,
/// normalized with J_0 + 2 sum J_{2k} = 1.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = n.max(x.ceil() as usize) + 40 + (10.0 * x.cbrt()) as usize;
    let mut hi = 0.0f64; // J_{k+1}
    let mut cur = 1e-280f64; // J_k
    let mut sum = 0.0f64;
    let mut vals = vec![0.0; start + 1];
    for k in (0..=start).rev() {
        vals[k] = cur;
        if k % 2 == 0 {
            sum += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let lo = 2.0 * k as f64 / x * cur - hi;
        hi = cur;
        cur = lo;
        if cur.abs() > 1e250 {
            for v in vals[k..].iter_mut() {
                *v *= 1e-250;
            }
            hi *= 1e-250;
            cur *= 1e-250;
            sum *= 1e-250;
        }
    }
    for k in 0..=n {
        out[k] = vals[k] / sum;
    }
    out
}

/// Computes exp(-i t H) x, where `apply(v, out)` writes H v into `out`.
pub fn expm_action<F>(apply: F, bounds: SpectralBounds, t: f64, x: &[C64], opts: ExpmOptions) -> Result<(Vec<C64>, ExpmReport)>
where
    F: Fn(&[C64], &mut [C64]),
{
    if !(bounds.lower.is_finite() && bounds.upper.is_finite()) || bounds.upper < bounds.lower {
        return Err(Error::InvalidArgument(format!("bad spectral bounds {bounds:?}")));
    }
    let n = x.len();
    let center = 0.5 * (bounds.upper + bounds.lower);
    // Pad the half-width so T_k(H') stays bounded by 1 even if the bounds are tight.
    let radius = (0.5 * (bounds.upper - bounds.lower)).max(1e-12) * 1.01;
    let arg = (t * radius).abs();
    let xnorm = norm(x);
    let phase = C64::from_polar(1.0, -t * center);
    if xnorm == 0.0 {
        return Ok((vec![C64::new(0.0, 0.0); n], ExpmReport { terms: 0, truncation: 0.0 }));
    }

    let guess = (arg + 30.0 + 12.0 * arg.cbrt()) as usize;
    let kmax = guess.min(opts.max_terms) + 8;
    let jv = bessel_j_sequence(arg, kmax);
    let cutoff = opts.tolerance / (4.0 * xnorm);
    let mut terms = None;
    for k in (arg as usize)..kmax.saturating_sub(6) {
        if jv[k..k + 6].iter().all(|v| v.abs() < cutoff) {
            terms = Some(k);
            break;
        }
    }
    let terms = match terms {
        Some(k) if k <= opts.max_terms => k,
        _ => return Err(Error::Budget(opts.max_terms)),
    };
    let truncation = 2.0 * xnorm * jv[terms..].iter().map(|v| v.abs()).sum::<f64>();
    // For negative t, (-i)^k J_k(t r) = (-i)^k (-1)^k J_k(|t| r) = i^k J_k(|t| r).
    let unit = if t >= 0.0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };

    let inv_r = 1.0 / radius;
    let shifted = |v: &[C64], out: &mut [C64]| {
        apply(v, out);
        map_pairs(out, v, |o, vi| (*o - center * vi) * inv_r);
    };

    let mut acc: Vec<C64> = x.iter().map(|z| z * jv[0]).collect();
    let mut prev = x.to_vec();
    let mut cur = vec![C64::new(0.0, 0.0); n];
    shifted(&prev, &mut cur);
    let mut upow = unit;
    accumulate(&mut acc, &cur, upow * 2.0 * jv[1]);
    let mut next = vec![C64::new(0.0, 0.0); n];
    for k in 2..terms {
        shifted(&cur, &mut next);
        // T_k = 2 H' T_{k-1} - T_{k-2}
        map_pairs(&mut next, &prev, |o, p| 2.0 * *o - p);
        upow *= unit;
        let coeff = upow * 2.0 * jv[k];
        accumulate(&mut acc, &next, coeff);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    for z in acc.iter_mut() {
        *z *= phase;
    }
    if !super::all_finite(&acc) {
        return Err(Error::NonFinite("chebyshev expansion"));
    }
    Ok((acc, ExpmReport { terms, truncation }))
}

fn accumulate(acc: &mut [C64], v: &[C64], c: C64) {
    if acc.len() >= PAR_THRESHOLD {
        acc.par_iter_mut().zip(v.par_iter()).for_each(|(a, b)| *a += c * b);
    } else {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += c * b;
        }
    }
}

fn map_pairs<G>(out: &mut [C64], other: &[C64], g: G)
where
    G: Fn(&C64, C64) -> C64 + Sync,
{
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().zip(other.par_iter()).for_each(|(o, p)| *o = g(o, *p));
    } else {
        for (o, p) in out.iter_mut().zip(other) {
            *o = g(o, *p);
        }
    }
}
