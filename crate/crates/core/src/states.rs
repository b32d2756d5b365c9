//! Initial states: coherent states, symmetric product states and their projections.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::fock::{apply_field, FockBasis, Ladder, QuantumState, Species, SpeciesBasis};
use crate::numerics::expm::ExpmOptions;
use crate::numerics::inner;
use crate::propagate::weyl;
use crate::{Error, Result, C64};

/// P(N > cap) for N Poisson distributed with the given mean.
pub fn poisson_tail(mean: f64, cap: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let n0 = cap as u64 + 1;
    let mut term = (-mean + n0 as f64 * mean.ln() - ln_factorial(n0)).exp();
    let mut sum = 0.0;
    let mut n = n0 as f64;
    // Terms decrease geometrically once n > mean.
    while term > 1e-300 && (term > sum * 1e-17 || n < mean) {
        sum += term;
        n += 1.0;
        term *= mean / n;
    }
    sum
}

/// Smallest cap whose Poisson tail is at most `tolerance`.
pub fn required_cap(mean: f64, tolerance: f64) -> usize {
    let mut cap = 0;
    while poisson_tail(mean, cap) > tolerance {
        cap += 1;
    }
    cap
}

/// d_x = sqrt(x!) / (e^{-x/2} x^{x/2}), evaluated through log-gamma.
pub fn d_factor(x: u64) -> f64 {
    if x == 0 {
        return 1.0;
    }
    let xf = x as f64;
    (0.5 * ln_factorial(x) + 0.5 * xf - 0.5 * xf * xf.ln()).exp()
}

fn sq_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Product amplitude prod_q v_q^{n_q} / sqrt(n_q!) for one species occupation.
fn monomial_amplitude(occ: &[u8], v: &[C64]) -> C64 {
    let mut amp = C64::new(1.0, 0.0);
    let mut log_fact = 0.0;
    for (&n, z) in occ.iter().zip(v) {
        if n > 0 {
            amp *= z.powu(n as u32);
            log_fact += ln_factorial(n as u64);
        }
    }
    amp * (-0.5 * log_fact).exp()
}

fn species_amplitudes(sb: &SpeciesBasis, v: &[C64], weight: impl Fn(usize) -> f64) -> Vec<C64> {
    (0..sb.dim())
        .map(|i| {
            let occ = sb.occupation(i);
            let total: usize = occ.iter().map(|&n| n as usize).sum();
            let w = weight(total);
            if w == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                monomial_amplitude(occ, v) * w
            }
        })
        .collect()
}

fn product_state(basis: &Arc<FockBasis>, psi_amps: &[C64], a_amps: &[C64]) -> QuantumState {
    let amps = (0..basis.dim())
        .map(|i| {
            let (po, ao) = basis.occupations(i);
            psi_amps[basis.species(Species::Particle).rank(po).expect("in basis")] * a_amps[basis.species(Species::Boson).rank(ao).expect("in basis")]
        })
        .collect();
    QuantumState::from_amps(basis, amps).expect("dimension matches")
}

fn check_lengths(basis: &FockBasis, f: &[C64], g: &[C64]) -> Result<()> {
    if f.len() != basis.psi_modes() {
        return Err(Error::SizeMismatch { expected: basis.psi_modes(), got: f.len() });
    }
    if g.len() != basis.boson_modes() {
        return Err(Error::SizeMismatch { expected: basis.boson_modes(), got: g.len() });
    }
    Ok(())
}

/// Coherent state C(f, g) Omega restricted to the basis, without a tail check.
pub fn coherent_unchecked(basis: &Arc<FockBasis>, f: &[C64], g: &[C64]) -> Result<QuantumState> {
    check_lengths(basis, f, g)?;
    let (nf, ng) = (sq_norm(f), sq_norm(g));
    let pa = species_amplitudes(basis.species(Species::Particle), f, |_| (-0.5 * nf).exp());
    let aa = species_amplitudes(basis.species(Species::Boson), g, |_| (-0.5 * ng).exp());
    Ok(product_state(basis, &pa, &aa))
}

/// Coherent state C(f, g) Omega; fails if either Poisson tail beyond the caps exceeds `tail_tolerance`.
pub fn coherent_state(basis: &Arc<FockBasis>, f: &[C64], g: &[C64], tail_tolerance: f64) -> Result<QuantumState> {
    check_lengths(basis, f, g)?;
    let (nf, ng) = (sq_norm(f), sq_norm(g));
    let tail = poisson_tail(nf, basis.psi_cap()) + poisson_tail(ng, basis.boson_cap());
    if tail > tail_tolerance {
        return Err(Error::CapsTooSmall {
            tail,
            threshold: tail_tolerance,
            psi_cap: required_cap(nf, tail_tolerance / 2.0),
            a_cap: required_cap(ng, tail_tolerance / 2.0),
        });
    }
    coherent_unchecked(basis, f, g)
}

/// (psi^*(f))^n / sqrt(n!) Omega for one species, as amplitudes over the species basis.
fn number_amplitudes(sb: &SpeciesBasis, f: &[C64], n: usize) -> Vec<C64> {
    let scale = (0.5 * ln_factorial(n as u64)).exp();
    species_amplitudes(sb, f, |total| if total == n { scale } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpec {
    /// Coherent state C(sqrt(i) u0, sqrt(j) alpha0) Omega.
    Coherent { i: usize, j: usize },
    /// i particles in u0 and the boson coherent state C(sqrt(j) alpha0).
    Particles { i: usize, j: usize },
    /// i particles in u0 and j bosons in alpha0.
    Theta { i: usize, j: usize },
}

/// Builds the state described by `spec` from normalized mode profiles `u0` and `alpha0`.
pub fn build_state(basis: &Arc<FockBasis>, spec: StateSpec, u0: &[C64], alpha0: &[C64], tail_tolerance: f64) -> Result<QuantumState> {
    check_lengths(basis, u0, alpha0)?;
    let need = |p: usize, n: usize| -> Result<()> {
        if p > basis.psi_cap() || n > basis.boson_cap() {
            return Err(Error::CapsTooSmall { tail: 1.0, threshold: tail_tolerance, psi_cap: p, a_cap: n });
        }
        Ok(())
    };
    let psi = basis.species(Species::Particle);
    let bos = basis.species(Species::Boson);
    match spec {
        StateSpec::Coherent { i, j } => {
            let f: Vec<C64> = u0.iter().map(|z| z * (i as f64).sqrt()).collect();
            let g: Vec<C64> = alpha0.iter().map(|z| z * (j as f64).sqrt()).collect();
            coherent_state(basis, &f, &g, tail_tolerance)
        }
        StateSpec::Particles { i, j } => {
            need(i, 0)?;
            let g: Vec<C64> = alpha0.iter().map(|z| z * (j as f64).sqrt()).collect();
            let ng = sq_norm(&g);
            let tail = poisson_tail(ng, basis.boson_cap());
            if tail > tail_tolerance {
                return Err(Error::CapsTooSmall { tail, threshold: tail_tolerance, psi_cap: i, a_cap: required_cap(ng, tail_tolerance) });
            }
            let pa = number_amplitudes(psi, u0, i);
            let aa = species_amplitudes(bos, &g, |_| (-0.5 * ng).exp());
            Ok(product_state(basis, &pa, &aa))
        }
        StateSpec::Theta { i, j } => {
            need(i, j)?;
            Ok(product_state(basis, &number_amplitudes(psi, u0, i), &number_amplitudes(bos, alpha0, j)))
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThetaIdentityReport {
    /// ||Theta - d_x^2 P_{x,x} C(u0/lambda, alpha0/lambda) Omega||
    pub projection_residual: f64,
    /// Same with the boson projection replaced by the phase average over theta.
    pub quadrature_residual: f64,
    /// Poisson tail of the boson coherent state beyond the cap.
    pub tail: f64,
}

/// Checks the two representations of Theta_{x,x} for x = lambda^{-2}, with `n_theta` phase nodes.
pub fn theta_identity(basis: &Arc<FockBasis>, u0: &[C64], alpha0: &[C64], x: usize, n_theta: usize) -> Result<ThetaIdentityReport> {
    let theta = build_state(basis, StateSpec::Theta { i: x, j: x }, u0, alpha0, 1.0)?;
    let d2 = d_factor(x as u64).powi(2);
    let s = (x as f64).sqrt();
    let f: Vec<C64> = u0.iter().map(|z| z * s).collect();
    let g: Vec<C64> = alpha0.iter().map(|z| z * s).collect();

    let coh = coherent_unchecked(basis, &f, &g)?;
    let proj = coh.sector_project(x, x);
    let proj = proj.with_amps(proj.amps.iter().map(|z| z * d2).collect());
    let projection_residual = theta.distance(&proj)?;

    let mut avg = QuantumState::zeros(basis);
    for j in 0..n_theta {
        let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
        let rot = C64::from_polar(1.0, -th);
        let gt: Vec<C64> = g.iter().map(|z| z * rot).collect();
        let c = coherent_unchecked(basis, &f, &gt)?.particle_project(x);
        let w = C64::from_polar(1.0, x as f64 * th) * (d2 / n_theta as f64);
        crate::numerics::axpy(w, &c.amps, &mut avg.amps);
    }
    let quadrature_residual = theta.distance(&avg)?;
    Ok(ThetaIdentityReport { projection_residual, quadrature_residual, tail: poisson_tail(sq_norm(&g), basis.boson_cap()) })
}

/// ||C^*(u, alpha) a(conj gamma) C(u, alpha) Phi - a(conj gamma) Phi - <gamma, alpha> Phi||.
pub fn weyl_shift_residual(state: &QuantumState, u: &[C64], alpha: &[C64], gamma: &[C64], opts: ExpmOptions) -> Result<f64> {
    let conj_gamma: Vec<C64> = gamma.iter().map(|z| z.conj()).collect();
    let (shifted, _) = weyl(state, u, alpha, opts)?;
    let (lowered, _) = apply_field(&shifted, Species::Boson, Ladder::Annihilate, &conj_gamma)?;
    let minus_u: Vec<C64> = u.iter().map(|z| -z).collect();
    let minus_a: Vec<C64> = alpha.iter().map(|z| -z).collect();
    let (back, _) = weyl(&lowered, &minus_u, &minus_a, opts)?;
    let (direct, _) = apply_field(state, Species::Boson, Ladder::Annihilate, &conj_gamma)?;
    let c = inner(gamma, alpha);
    Ok(back.amps.iter().zip(&direct.amps).zip(&state.amps).map(|((b, d), s)| (b - d - c * s).norm_sqr()).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_factor_values() {
        assert!((d_factor(1) - 0.5f64.exp()).abs() < 1e-14);
        // d_2 = sqrt(2) e / 2
        assert!((d_factor(2) - 2f64.sqrt() * 1f64.exp() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn poisson_tail_small_cases() {
        assert!((poisson_tail(1.0, 0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((poisson_tail(2.0, 1) - (1.0 - 3.0 * (-2f64).exp())).abs() < 1e-15);
        assert_eq!(required_cap(0.0, 1e-12), 0);
        assert!(poisson_tail(1.0, required_cap(1.0, 1e-10)) <= 1e-10);
    }

    #[test]
    fn coherent_state_norm_and_tail_error() {
        let basis = Arc::new(FockBasis::new(2, 1, 20, 20).unwrap());
        let s = coherent_state(&basis, &[C64::new(0.5, 0.2), C64::new(0.0, -0.4)], &[C64::new(0.3, 0.3)], 1e-12).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        let small = Arc::new(FockBasis::new(2, 1, 2, 2).unwrap());
        let err = coherent_state(&small, &[C64::new(1.5, 0.0), C64::new(0.0, 0.0)], &[C64::new(0.1, 0.0)], 1e-12);
        assert!(matches!(err, Err(Error::CapsTooSmall { .. })));
    }

    #[test]
    fn theta_one_one_is_product_of_modes() {
        let basis = Arc::new(FockBasis::new(2, 2, 2, 2).unwrap());
        let u0 = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let a0 = [C64::new(0.0, 1.0), C64::new(0.0, 0.0)];
        let th = build_state(&basis, StateSpec::Theta { i: 1, j: 1 }, &u0, &a0, 1e-12).unwrap();
        for (q, &uq) in u0.iter().enumerate() {
            let mut po = [0u8; 2];
            po[q] = 1;
            let idx = basis.index_of(&po, &[1, 0]).unwrap();
            assert!((th.amps[idx] - uq * a0[0]).norm() < 1e-15);
        }
        assert!((th.norm() - 1.0).abs() < 1e-14);
    }
}
