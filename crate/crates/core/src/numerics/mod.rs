//! Numerical kernels shared by the classical and quantum solvers.

pub mod expm;
pub mod ode;
pub mod quad;

use rayon::prelude::*;

use crate::C64;

/// Below this length vector kernels stay serial.
pub(crate) const PAR_THRESHOLD: usize = 1 << 14;

pub fn norm(x: &[C64]) -> f64 {
    norm_sqr(x).sqrt()
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    if x.len() >= PAR_THRESHOLD {
        x.par_chunks(4096).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>()).collect::<Vec<_>>().iter().sum()
    } else {
        x.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Inner product, antilinear in the first slot.
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    assert_eq!(x.len(), y.len());
    if x.len() >= PAR_THRESHOLD {
        x.par_chunks(4096)
            .zip(y.par_chunks(4096))
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p.conj() * q).sum::<C64>())
            .collect::<Vec<_>>()
            .iter()
            .sum()
    } else {
        x.iter().zip(y).map(|(p, q)| p.conj() * q).sum()
    }
}

pub fn distance(x: &[C64], y: &[C64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
}

/// y += a * x
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    assert_eq!(x.len(), y.len());
    if x.len() >= PAR_THRESHOLD {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += a * xi);
    } else {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

pub fn scale(a: C64, x: &mut [C64]) {
    for z in x {
        *z *= a;
    }
}

pub fn all_finite(x: &[C64]) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
