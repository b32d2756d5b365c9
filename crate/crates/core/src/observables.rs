//! Normal-ordered averages, their classical counterparts and rate fits.
//!
//! Test functions live in mode space. With psi[g] = sum conj(g_q) psi_q and psi^*[g] its
//! adjoint, the classical value of lambda psi[g] is <g, u> and that of lambda psi^*[g] is
//! conj(<g, u>); the boson field is analogous.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classical::ThetaFamily;
use crate::fock::{apply_field, apply_ladder, Ladder, QuantumState, Species};
use crate::lattice::ModeGrid;
use crate::numerics::inner;
use crate::{Error, Result, C64};

/// Monomial psi^*[x_1]..psi^*[x_q] a^*[k_1]..a^*[k_h] psi[y_1]..psi[y_r] a[m_1]..a[m_l].
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NormalOrderSpec {
    pub psi_create: Vec<Vec<C64>>,
    pub psi_annihilate: Vec<Vec<C64>>,
    pub boson_create: Vec<Vec<C64>>,
    pub boson_annihilate: Vec<Vec<C64>>,
}

impl NormalOrderSpec {
    pub fn degree(&self) -> usize {
        self.psi_create.len() + self.psi_annihilate.len() + self.boson_create.len() + self.boson_annihilate.len()
    }

    fn check(&self, psi_modes: usize, boson_modes: usize) -> Result<()> {
        for g in self.psi_create.iter().chain(&self.psi_annihilate) {
            if g.len() != psi_modes {
                return Err(Error::SizeMismatch { expected: psi_modes, got: g.len() });
            }
        }
        for g in self.boson_create.iter().chain(&self.boson_annihilate) {
            if g.len() != boson_modes {
                return Err(Error::SizeMismatch { expected: boson_modes, got: g.len() });
            }
        }
        Ok(())
    }
}

fn conj(g: &[C64]) -> Vec<C64> {
    g.iter().map(|z| z.conj()).collect()
}

fn lower(state: &QuantumState, species: Species, coeffs: &[C64]) -> Result<QuantumState> {
    Ok(apply_field(state, species, Ladder::Annihilate, coeffs)?.0)
}

/// lambda^degree <Phi, B Phi> for the normal-ordered monomial B.
pub fn normal_ordered_average(state: &QuantumState, spec: &NormalOrderSpec, lambda: f64) -> Result<C64> {
    spec.check(state.basis().psi_modes(), state.basis().boson_modes())?;
    // The creators act on the bra as the matching annihilators.
    let mut left = state.clone();
    for g in &spec.psi_create {
        left = lower(&left, Species::Particle, &conj(g))?;
    }
    for g in &spec.boson_create {
        left = lower(&left, Species::Boson, &conj(g))?;
    }
    let mut right = state.clone();
    for g in &spec.psi_annihilate {
        right = lower(&right, Species::Particle, &conj(g))?;
    }
    for g in &spec.boson_annihilate {
        right = lower(&right, Species::Boson, &conj(g))?;
    }
    Ok(left.inner(&right)? * lambda.powi(spec.degree() as i32))
}

/// Classical value of the monomial for particle mode amplitudes `u` and coupled boson amplitudes `alpha`.
pub fn classical_product(spec: &NormalOrderSpec, u: &[C64], alpha: &[C64]) -> Result<C64> {
    spec.check(u.len(), alpha.len())?;
    let mut p = C64::new(1.0, 0.0);
    for g in &spec.psi_create {
        p *= inner(g, u).conj();
    }
    for g in &spec.psi_annihilate {
        p *= inner(g, u);
    }
    for g in &spec.boson_create {
        p *= inner(g, alpha).conj();
    }
    for g in &spec.boson_annihilate {
        p *= inner(g, alpha);
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThetaAverage {
    pub value: C64,
    /// |average over all nodes - average over every other node|
    pub refinement_gap: f64,
}

/// Trapezoid average over the theta family of the classical product at time `t`.
pub fn theta_average(spec: &NormalOrderSpec, grid: &ModeGrid, family: &ThetaFamily, t: f64) -> Result<ThetaAverage> {
    let n = family.members.len();
    let vals = family
        .members
        .iter()
        .map(|traj| {
            let s = traj.state_at(grid, t)?;
            classical_product(spec, &s.u_modes(grid)?, &s.coupled_alpha(grid))
        })
        .collect::<Result<Vec<_>>>()?;
    let value: C64 = vals.iter().sum::<C64>() / n as f64;
    let refinement_gap = if n >= 2 && n.is_multiple_of(2) {
        let coarse: C64 = vals.iter().step_by(2).sum::<C64>() / (n / 2) as f64;
        (coarse - value).norm()
    } else {
        f64::INFINITY
    };
    Ok(ThetaAverage { value, refinement_gap })
}

/// lambda <psi_q> and lambda <a_k> for every mode.
pub fn field_averages(state: &QuantumState, lambda: f64) -> Result<(Vec<C64>, Vec<C64>)> {
    let mut out = (Vec::new(), Vec::new());
    for (species, dest) in [(Species::Particle, &mut out.0), (Species::Boson, &mut out.1)] {
        for mode in 0..state.basis().species(species).modes() {
            let (low, _) = apply_ladder(state, species, Ladder::Annihilate, mode)?;
            dest.push(state.inner(&low)? * lambda);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual of the log-log fit.
    pub residual: f64,
}

/// Least-squares fit of log(error) = slope * log(lambda) + intercept.
pub fn rate_fit(lambdas: &[f64], errors: &[f64]) -> Result<RateFit> {
    if lambdas.len() != errors.len() {
        return Err(Error::SizeMismatch { expected: lambdas.len(), got: errors.len() });
    }
    if lambdas.len() < 2 {
        return Err(Error::InvalidArgument("rate fit needs at least two points".into()));
    }
    if lambdas.iter().chain(errors).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("rate fit needs positive finite values".into()));
    }
    let xs: Vec<f64> = lambdas.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct lambdas".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit { slope, intercept, residual })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Outcome of one experiment.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ExperimentResult {
    pub name: String,
    pub lambdas: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
    pub fit_residual: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
    pub runtime_seconds: f64,
}

impl ExperimentResult {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), ..Self::default() }
    }

    /// Records `value <= bound`.
    pub fn check_le(&mut self, name: &str, value: f64, bound: f64) -> bool {
        let passed = value <= bound;
        self.assertions.push(Assertion { name: name.to_string(), value, bound, passed });
        passed
    }

    /// Records `lo <= value <= hi` as two assertions.
    pub fn check_range(&mut self, name: &str, value: f64, lo: f64, hi: f64) -> bool {
        let a = lo <= value;
        let b = value <= hi;
        self.assertions.push(Assertion { name: format!("{name} >= lower"), value, bound: lo, passed: a });
        self.assertions.push(Assertion { name: format!("{name} <= upper"), value, bound: hi, passed: b });
        a && b
    }

    pub fn check(&mut self, name: &str, passed: bool) -> bool {
        self.assertions.push(Assertion { name: name.to_string(), value: passed as u8 as f64, bound: 1.0, passed });
        passed
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn note(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let l = [1.0, 0.5, 0.25];
        let e: Vec<f64> = l.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        let f = rate_fit(&l, &e).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.residual < 1e-12);
        assert!(rate_fit(&[1.0], &[1.0]).is_err());
        assert!(rate_fit(&[1.0, 0.5], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn classical_product_conventions() {
        let spec = NormalOrderSpec { psi_create: vec![vec![C64::new(1.0, 0.0)]], psi_annihilate: vec![vec![C64::new(0.0, 1.0)]], ..Default::default() };
        let u = [C64::new(0.0, 2.0)];
        // <1, conj u> = -2i, <i, u> = conj(i) * 2i = 2
        let p = classical_product(&spec, &u, &[]).unwrap();
        assert!((p - C64::new(0.0, -4.0)).norm() < 1e-15);
    }
}
