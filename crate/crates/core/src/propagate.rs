//! Time evolution: full quantum dynamics, Weyl displacements and the
//! fluctuation dynamics around a classical trajectory.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::classical::{potential, Trajectory};
use crate::fock::{FockBasis, QuantumState};
use crate::hamiltonian::{build_hamiltonian, free_energies, weyl_generator, FluctuationGenerator, OperatorRep, Picture, TermOperator};
use crate::lattice::ModeGrid;
use crate::numerics::expm::{expm_action, ExpmOptions, ExpmReport};
use crate::numerics::ode::{dopri5, OdeOptions, OdeStats};
use crate::numerics::quad::{simpson, Collocation};
use crate::numerics::{self, all_finite};
use crate::{Error, Result, C64};

/// Largest dimension accepted by the dense oracle.
pub const DENSE_LIMIT: usize = 2000;

/// exp(-i t H) x for a hermitian term operator, using Gershgorin bounds.
pub fn evolve(h: &TermOperator, state: &QuantumState, t: f64, opts: ExpmOptions) -> Result<(QuantumState, ExpmReport)> {
    if h.dim() != state.amps.len() {
        return Err(Error::SizeMismatch { expected: h.dim(), got: state.amps.len() });
    }
    let bounds = h.gershgorin();
    let (amps, report) = expm_action(|v, out| h.apply_into(v, out), bounds, t, &state.amps, opts)?;
    Ok((state.with_amps(amps), report))
}

/// exp(-i t H) x by full diagonalization; independent reference for small bases.
pub fn evolve_dense(h: &OperatorRep, state: &QuantumState, t: f64) -> Result<QuantumState> {
    let m = h.to_dense(DENSE_LIMIT)?;
    let eig = m.symmetric_eigen();
    let v = &eig.eigenvectors;
    let x = DVector::from_column_slice(&state.amps);
    let mut coeffs = v.adjoint() * x;
    for (c, &e) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= C64::from_polar(1.0, -e * t);
    }
    let y = v * coeffs;
    Ok(state.with_amps(y.iter().cloned().collect()))
}

/// Dense matrix exp(-i t H).
pub fn dense_propagator(h: &OperatorRep, t: f64) -> Result<DMatrix<C64>> {
    let m = h.to_dense(DENSE_LIMIT)?;
    let eig = m.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t))));
    Ok(v * phases * v.adjoint())
}

/// e^{-i t H0} x with H0 the free Hamiltonian.
pub fn evolve_free(grid: &ModeGrid, state: &QuantumState, t: f64) -> Result<QuantumState> {
    let e = free_energies(state.basis(), grid)?;
    Ok(state.with_amps(state.amps.iter().zip(&e).map(|(z, &en)| z * C64::from_polar(1.0, -en * t)).collect()))
}

/// Full dynamics exp(-i t (H0 + lambda H_I)) applied to a state.
pub fn evolve_full(grid: &ModeGrid, lambda: f64, state: &QuantumState, t: f64, opts: ExpmOptions) -> Result<(QuantumState, ExpmReport)> {
    let h = build_hamiltonian(state.basis(), grid, lambda)?;
    evolve(&h, state, t, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Full diagonalization; reference only (dimension <= 2000).
    DenseEig,
    /// Chebyshev expansion of the exponential action.
    #[default]
    PolyAction,
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PropagatorConfig {
    pub method: Method,
    pub tolerance: f64,
    pub max_terms: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { method: Method::PolyAction, tolerance: 1e-12, max_terms: 200_000 }
    }
}

impl PropagatorConfig {
    pub fn expm(&self) -> ExpmOptions {
        ExpmOptions { tolerance: self.tolerance, max_terms: self.max_terms }
    }
}

/// exp(-i t H) applied with the configured method.
pub fn evolve_with(h: &TermOperator, state: &QuantumState, t: f64, config: &PropagatorConfig) -> Result<QuantumState> {
    if !(config.tolerance > 0.0) {
        return Err(Error::InvalidArgument("propagator tolerance must be positive".into()));
    }
    match config.method {
        Method::DenseEig => evolve_dense(&h.to_csr(), state, t),
        Method::PolyAction => Ok(evolve(h, state, t, config.expm())?.0),
    }
}

/// Weyl operator C(f, g) = exp(psi^*(f) - psi(conj f) + a^*(g) - a(conj g)) applied to a state.
pub fn weyl(state: &QuantumState, f: &[C64], g: &[C64], opts: ExpmOptions) -> Result<(QuantumState, ExpmReport)> {
    let k = weyl_generator(state.basis(), f, g)?;
    evolve(&k, state, 1.0, opts)
}

/// Phase of the fluctuation dynamics, -1/(2 lambda^2) times the integral over [s, t]
/// of h sum_x V_x |u_x|^2 along the trajectory. Simpson's rule is refined until two
/// successive estimates agree within `tolerance`.
pub fn phase_lambda(grid: &ModeGrid, traj: &Trajectory, t: f64, s: f64, lambda: f64, tolerance: f64) -> Result<f64> {
    for x in [t, s] {
        if x < traj.start() - 1e-12 || x > traj.end() + 1e-12 {
            return Err(Error::OutOfRange { t: x, start: traj.start(), end: traj.end() });
        }
    }
    if t == s {
        return Ok(0.0);
    }
    let h = grid.cell_volume();
    let integrand = |tau: f64| -> Result<f64> {
        let st = traj.state_at(grid, tau)?;
        let v = potential(grid, &st.alpha)?;
        Ok(h * st.u.iter().zip(&v).map(|(z, vx)| z.norm_sqr() * vx).sum::<f64>())
    };
    let mut n = 2usize.max(2 * ((t - s).abs() / traj.dt).ceil() as usize);
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let step = (t - s) / n as f64;
        let vals = (0..=n).map(|j| integrand(s + j as f64 * step)).collect::<Result<Vec<_>>>()?;
        let est = simpson(&vals, step);
        if (est - prev).abs() <= tolerance * lambda * lambda {
            return Ok(-0.5 * est / (lambda * lambda));
        }
        prev = est;
        n *= 2;
    }
    Err(Error::ToleranceNotMet { tolerance, estimate: f64::NAN })
}

#[derive(Clone, Copy, Debug)]
pub struct DysonOptions {
    pub tolerance: f64,
    /// Dyson terms kept on each substep.
    pub order: usize,
    pub initial_substeps: usize,
    pub max_doublings: usize,
}

impl Default for DysonOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, order: 4, initial_substeps: 8, max_doublings: 10 }
    }
}

#[derive(Clone, Debug)]
pub struct DysonOutcome {
    pub state: QuantumState,
    pub substeps: usize,
    /// Distance between the last two refinements.
    pub estimate: f64,
}

/// Interaction-picture fluctuation dynamics i d/dt U = V~(t) U along a classical trajectory.
#[derive(Clone, Debug)]
pub struct FluctuationPropagator<'a> {
    generator: &'a FluctuationGenerator,
    grid: &'a ModeGrid,
    trajectory: &'a Trajectory,
    weights: Option<Arc<Vec<f64>>>,
}

impl<'a> FluctuationPropagator<'a> {
    pub fn new(generator: &'a FluctuationGenerator, grid: &'a ModeGrid, trajectory: &'a Trajectory) -> Self {
        Self { generator, grid, trajectory, weights: None }
    }

    /// Conjugates the generator with a diagonal weight (number cutoffs).
    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(Arc::new(weights));
        self
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        self.generator.basis()
    }

    /// V~(t) as an operator.
    pub fn generator_at(&self, t: f64) -> Result<TermOperator> {
        let st = self.trajectory.state_at(self.grid, t)?;
        let u = st.u_modes(self.grid)?;
        let alpha = st.coupled_alpha(self.grid);
        let op = self.generator.operator(&u, &alpha, t, Picture::Interaction)?;
        match &self.weights {
            Some(w) => op.with_weights(w.clone()),
            None => Ok(op),
        }
    }

    fn check(&self, t: f64, s: f64, state: &QuantumState) -> Result<()> {
        if state.amps.len() != self.basis().dim() {
            return Err(Error::SizeMismatch { expected: self.basis().dim(), got: state.amps.len() });
        }
        for x in [t, s] {
            if x < self.trajectory.start() - 1e-12 || x > self.trajectory.end() + 1e-12 {
                return Err(Error::OutOfRange { t: x, start: self.trajectory.start(), end: self.trajectory.end() });
            }
        }
        Ok(())
    }

    fn dyson_pass(&self, t: f64, s: f64, x: &[C64], substeps: usize, order: usize, rule: &Collocation) -> Result<Vec<C64>> {
        let h = (t - s) / substeps as f64;
        let minus_i = C64::new(0.0, -1.0);
        let nodes = rule.nodes.len();
        let mut cur = x.to_vec();
        for n in 0..substeps {
            let a = s + n as f64 * h;
            let ops = rule.nodes.iter().map(|&c| self.generator_at(a + c * h)).collect::<Result<Vec<_>>>()?;
            let mut term: Vec<Vec<C64>> = vec![cur.clone(); nodes];
            let mut total = cur.clone();
            for _ in 0..order {
                let applied: Vec<Vec<C64>> = ops.iter().zip(&term).map(|(op, y)| op.apply(y)).collect();
                let mut next = vec![vec![C64::new(0.0, 0.0); cur.len()]; nodes];
                for (j, nj) in next.iter_mut().enumerate() {
                    for (l, al) in applied.iter().enumerate() {
                        let w = rule.integration[j][l];
                        if w != 0.0 {
                            numerics::axpy(minus_i * (h * w), al, nj);
                        }
                    }
                }
                numerics::axpy(C64::new(1.0, 0.0), &next[nodes - 1], &mut total);
                term = next;
            }
            cur = total;
        }
        if !all_finite(&cur) {
            return Err(Error::NonFinite("dyson series"));
        }
        Ok(cur)
    }

    /// U~(t, s) applied to `state` by a composed, truncated Dyson series with substep doubling.
    pub fn dyson(&self, t: f64, s: f64, state: &QuantumState, opts: DysonOptions) -> Result<DysonOutcome> {
        self.check(t, s, state)?;
        if t == s {
            return Ok(DysonOutcome { state: state.clone(), substeps: 0, estimate: 0.0 });
        }
        let rule = Collocation::lobatto5();
        let p = opts.order.max(1) as f64;
        let mut n = opts.initial_substeps.max(1);
        let mut coarse = self.dyson_pass(t, s, &state.amps, n, opts.order, &rule)?;
        let mut estimate = f64::INFINITY;
        for _ in 0..opts.max_doublings {
            let fine = self.dyson_pass(t, s, &state.amps, 2 * n, opts.order, &rule)?;
            estimate = numerics::distance(&coarse, &fine);
            if estimate <= opts.tolerance {
                return Ok(DysonOutcome { state: state.with_amps(fine), substeps: 2 * n, estimate });
            }
            // The coarse error scales like n^{-p}; jump straight to the predicted count when doubling is not enough.
            let jump = (n as f64 * (estimate / opts.tolerance).powf(1.0 / p) * 1.25).ceil();
            if jump > (4 * n) as f64 && jump < 1e7 {
                n = jump as usize;
                coarse = self.dyson_pass(t, s, &state.amps, n, opts.order, &rule)?;
            } else {
                n *= 2;
                coarse = fine;
            }
        }
        Err(Error::ToleranceNotMet { tolerance: opts.tolerance, estimate })
    }

    /// U~(t, s) applied to `state` with an adaptive Runge-Kutta integrator.
    pub fn ode(&self, t: f64, s: f64, state: &QuantumState, opts: OdeOptions) -> Result<(QuantumState, OdeStats)> {
        self.check(t, s, state)?;
        let minus_i = C64::new(0.0, -1.0);
        let mut failure = None;
        let rhs = |tau: f64, y: &[C64], out: &mut [C64]| match self.generator_at(tau.clamp(s.min(t), s.max(t))) {
            Ok(op) => {
                op.apply_into(y, out);
                for z in out.iter_mut() {
                    *z *= minus_i;
                }
            }
            Err(e) => {
                failure.get_or_insert(e);
                out.fill(C64::new(f64::NAN, 0.0));
            }
        };
        let result = dopri5(rhs, s, t, &state.amps, opts);
        if let Some(e) = failure {
            return Err(e);
        }
        let (y, stats) = result?;
        Ok((state.with_amps(y), stats))
    }
}

/// Diagnostics of one application of the conjugated full dynamics.
#[derive(Clone, Debug)]
pub struct SandwichReport {
    pub phase: f64,
    pub expm_terms: usize,
    /// Largest weight found in the top sectors (N1 = cap or N2 = cap) at any stage.
    pub edge_weight: f64,
}

fn edge_weight(s: &QuantumState) -> f64 {
    let b = s.basis();
    let (pc, nc) = (b.psi_cap() as u8, b.boson_cap() as u8);
    s.mask(|a, n| a == pc || n == nc).norm().powi(2)
}

/// Displacement amplitudes (u/lambda, alpha/lambda) of the trajectory at time t, optionally negated.
fn displacement(grid: &ModeGrid, traj: &Trajectory, t: f64, lambda: f64, sign: f64) -> Result<(Vec<C64>, Vec<C64>)> {
    let st = traj.state_at(grid, t)?;
    let c = sign / lambda;
    Ok((st.u_modes(grid)?.into_iter().map(|z| z * c).collect(), st.coupled_alpha(grid).into_iter().map(|z| z * c).collect()))
}

/// U(t) C(u0/lambda, alpha0/lambda) Phi: the full dynamics of a coherently displaced state.
pub fn displaced_evolution(grid: &ModeGrid, traj: &Trajectory, lambda: f64, t: f64, phi: &QuantumState, opts: ExpmOptions) -> Result<(QuantumState, SandwichReport)> {
    let (f0, g0) = displacement(grid, traj, traj.start(), lambda, 1.0)?;
    let (x, r1) = weyl(phi, &f0, &g0, opts)?;
    let mut edge = edge_weight(&x);
    let (x, r2) = evolve_full(grid, lambda, &x, t - traj.start(), opts)?;
    edge = edge.max(edge_weight(&x));
    Ok((x, SandwichReport { phase: 0.0, expm_terms: r1.terms + r2.terms, edge_weight: edge }))
}

/// W(t, s) Phi = e^{i Lambda(t, s)} C^*(u(t)/lambda, alpha(t)/lambda) U(t - s) C(u(s)/lambda, alpha(s)/lambda) Phi.
pub fn coherent_sandwich(grid: &ModeGrid, traj: &Trajectory, lambda: f64, t: f64, s: f64, phi: &QuantumState, opts: ExpmOptions) -> Result<(QuantumState, SandwichReport)> {
    let (fs, gs) = displacement(grid, traj, s, lambda, 1.0)?;
    let (ft, gt) = displacement(grid, traj, t, lambda, -1.0)?;
    let (x, r1) = weyl(phi, &fs, &gs, opts)?;
    let mut edge = edge_weight(&x);
    let (x, r2) = evolve_full(grid, lambda, &x, t - s, opts)?;
    edge = edge.max(edge_weight(&x));
    let (x, r3) = weyl(&x, &ft, &gt, opts)?;
    edge = edge.max(edge_weight(&x));
    let phase = phase_lambda(grid, traj, t, s, lambda, 1e-12)?;
    let rot = C64::from_polar(1.0, phase);
    let x = x.with_amps(x.amps.iter().map(|z| z * rot).collect());
    Ok((x, SandwichReport { phase, expm_terms: r1.terms + r2.terms + r3.terms, edge_weight: edge }))
}

/// Interaction form W~(t, s) = U0^*(t) W(t, s) U0(s).
pub fn conjugated_dynamics(grid: &ModeGrid, traj: &Trajectory, lambda: f64, t: f64, s: f64, phi: &QuantumState, opts: ExpmOptions) -> Result<(QuantumState, SandwichReport)> {
    let x = evolve_free(grid, phi, s)?;
    let (x, report) = coherent_sandwich(grid, traj, lambda, t, s, &x, opts)?;
    Ok((evolve_free(grid, &x, -t)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_hamiltonian;
    use crate::lattice::GridConfig;

    #[test]
    fn chebyshev_matches_dense() {
        let grid = ModeGrid::new(GridConfig { points: 3, cutoff: 1.0, ..GridConfig::default() }).unwrap();
        let basis = Arc::new(FockBasis::new(3, 3, 2, 2).unwrap());
        let h = build_hamiltonian(&basis, &grid, 0.8).unwrap();
        let amps = (0..basis.dim()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let phi = QuantumState::from_amps(&basis, amps).unwrap().normalized();
        let (a, _) = evolve(&h, &phi, 1.3, ExpmOptions::default()).unwrap();
        let b = evolve_dense(&h.to_csr(), &phi, 1.3).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-11);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weyl_displaces_vacuum() {
        let basis = Arc::new(FockBasis::new(1, 1, 25, 25).unwrap());
        let vac = QuantumState::vacuum(&basis);
        let f = [C64::new(0.6, -0.3)];
        let g = [C64::new(0.0, 0.5)];
        let (x, _) = weyl(&vac, &f, &g, ExpmOptions::default()).unwrap();
        let expect = crate::states::coherent_state(&basis, &f, &g, 1e-12).unwrap();
        assert!(x.distance(&expect).unwrap() < 1e-10);
    }
}
