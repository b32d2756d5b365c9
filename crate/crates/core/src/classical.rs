//! Classical Schrodinger-Klein-Gordon flow on the lattice.
//!
//! The particle field `u` lives on position nodes with norm h * sum |u_x|^2,
//! where h is the cell volume. The boson field `alpha` holds one amplitude per
//! momentum node (FFT order) and must vanish outside the cutoff.
//!
//! Equations of motion:
//!   i du/dt     = -Laplace(u) / (2 M_p) + V[alpha] u
//!   i dalpha/dt = omega alpha + S[u]
//! with V_x = sum_k f0(k) (alpha_k + conj(alpha_{-k})) e^{ikx} and
//! S_k = f0(k) h sum_x |u_x|^2 e^{-ikx}.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::ModeGrid;
use crate::numerics::all_finite;
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalState {
    pub t: f64,
    pub u: Vec<C64>,
    pub alpha: Vec<C64>,
}

impl ClassicalState {
    /// Squared particle norm h * sum |u_x|^2.
    pub fn charge(&self, grid: &ModeGrid) -> f64 {
        grid.cell_volume() * self.u.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Momentum mode amplitudes of `u`, normalized so their l2 norm equals the field norm.
    pub fn u_modes(&self, grid: &ModeGrid) -> Result<Vec<C64>> {
        to_modes(grid, &self.u)
    }

    pub fn boson_norm(&self) -> f64 {
        self.alpha.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Boson amplitudes restricted to the coupled modes.
    pub fn coupled_alpha(&self, grid: &ModeGrid) -> Vec<C64> {
        grid.coupled_modes().iter().map(|&k| self.alpha[k]).collect()
    }
}

pub fn to_modes(grid: &ModeGrid, u: &[C64]) -> Result<Vec<C64>> {
    let s = grid.cell_volume().sqrt();
    Ok(grid.fourier(u)?.into_iter().map(|z| z * s).collect())
}

pub fn from_modes(grid: &ModeGrid, modes: &[C64]) -> Result<Vec<C64>> {
    let s = 1.0 / grid.cell_volume().sqrt();
    Ok(grid.inverse_fourier(modes)?.into_iter().map(|z| z * s).collect())
}

/// Builds a state from mode amplitudes of `u` and coupled-mode amplitudes of `alpha`.
pub fn state_from_modes(grid: &ModeGrid, u_modes: &[C64], coupled_alpha: &[C64]) -> Result<ClassicalState> {
    let coupled = grid.coupled_modes();
    if coupled_alpha.len() != coupled.len() {
        return Err(Error::SizeMismatch { expected: coupled.len(), got: coupled_alpha.len() });
    }
    let mut alpha = vec![C64::new(0.0, 0.0); grid.nodes()];
    for (&k, &a) in coupled.iter().zip(coupled_alpha) {
        alpha[k] = a;
    }
    Ok(ClassicalState { t: 0.0, u: from_modes(grid, u_modes)?, alpha })
}

fn check_support(grid: &ModeGrid, alpha: &[C64]) -> Result<()> {
    let weight: f64 = alpha.iter().zip(grid.cutoff_mask()).filter(|(_, &on)| !on).map(|(z, _)| z.norm_sqr()).sum();
    if weight > 0.0 {
        return Err(Error::SupportViolation { weight });
    }
    Ok(())
}

/// Real field A = F^{-1}[(2 omega)^{-1/2} chi (alpha_k + conj(alpha_{-k}))] (unitary inverse transform).
pub fn vector_potential(grid: &ModeGrid, alpha: &[C64]) -> Result<Vec<f64>> {
    if alpha.len() != grid.nodes() {
        return Err(Error::SizeMismatch { expected: grid.nodes(), got: alpha.len() });
    }
    check_support(grid, alpha)?;
    let spectrum: Vec<C64> = (0..grid.nodes())
        .map(|k| {
            if grid.cutoff_mask()[k] {
                (alpha[k] + alpha[grid.negate(k)].conj()) / (2.0 * grid.omega()[k]).sqrt()
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(grid.inverse_fourier(&spectrum)?.into_iter().map(|z| z.re).collect())
}

/// Potential felt by the particle, V = L^{-d/2} sqrt(m) A.
pub fn potential(grid: &ModeGrid, alpha: &[C64]) -> Result<Vec<f64>> {
    let scale = grid.coupling_constant() * (grid.nodes() as f64).sqrt();
    Ok(vector_potential(grid, alpha)?.into_iter().map(|a| a * scale).collect())
}

/// Source driving the boson field, S_k = f0(k) h sum_x |u_x|^2 e^{-ikx}.
pub fn source(grid: &ModeGrid, u: &[C64]) -> Result<Vec<C64>> {
    let density: Vec<C64> = u.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect();
    let scale = grid.cell_volume() * (grid.nodes() as f64).sqrt();
    let rho = grid.fourier(&density)?;
    Ok(rho.iter().zip(grid.form_factor()).map(|(r, &f)| r * (f * scale)).collect())
}

/// Right-hand side of the equations of motion, returned as (du/dt, dalpha/dt).
pub fn vector_field(grid: &ModeGrid, state: &ClassicalState) -> Result<(Vec<C64>, Vec<C64>)> {
    let v = potential(grid, &state.alpha)?;
    let modes = grid.fourier(&state.u)?;
    let lap: Vec<C64> = modes.iter().zip(grid.kinetic()).map(|(z, &e)| z * e).collect();
    let ku = grid.inverse_fourier(&lap)?;
    let minus_i = C64::new(0.0, -1.0);
    let du = ku.iter().zip(&v).zip(&state.u).map(|((k, &vx), ux)| minus_i * (k + ux * vx)).collect();
    let s = source(grid, &state.u)?;
    let dalpha = state.alpha.iter().zip(grid.omega()).zip(&s).map(|((a, &w), sk)| minus_i * (a * w + sk)).collect();
    Ok((du, dalpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Second-order kinetic/potential splitting.
    #[default]
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Yoshida,
}

#[derive(Clone, Debug)]
pub struct ClassicalSolver {
    grid: ModeGrid,
    splitting: Splitting,
    /// Largest tolerated change of the particle norm before a step is reported unstable.
    pub charge_tolerance: f64,
}

impl ClassicalSolver {
    pub fn new(grid: &ModeGrid, splitting: Splitting) -> Self {
        Self { grid: grid.clone(), splitting, charge_tolerance: 1e-6 }
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn splitting(&self) -> Splitting {
        self.splitting
    }

    fn validate(&self, state: &ClassicalState) -> Result<()> {
        let m = self.grid.nodes();
        for len in [state.u.len(), state.alpha.len()] {
            if len != m {
                return Err(Error::SizeMismatch { expected: m, got: len });
            }
        }
        if !all_finite(&state.u) || !all_finite(&state.alpha) {
            return Err(Error::NonFinite("classical state"));
        }
        check_support(&self.grid, &state.alpha)
    }

    /// One Strang step: half free flow, exact potential flow, half free flow.
    pub fn step_strang(&self, state: &ClassicalState, dt: f64) -> Result<ClassicalState> {
        self.validate(state)?;
        self.strang_unchecked(state, dt)
    }

    fn strang_unchecked(&self, state: &ClassicalState, dt: f64) -> Result<ClassicalState> {
        let g = &self.grid;
        let (mut u, mut alpha) = self.free_half(&state.u, &state.alpha, 0.5 * dt)?;

        // Under the potential flow |u_x|^2 is frozen, so S is constant, alpha moves
        // linearly and u picks up the phase of the time-averaged potential.
        let s = source(g, &u)?;
        let minus_i = C64::new(0.0, -1.0);
        let mid: Vec<C64> = alpha.iter().zip(&s).map(|(a, sk)| a + minus_i * sk * (0.5 * dt)).collect();
        let v = potential(g, &mid)?;
        for (ux, vx) in u.iter_mut().zip(&v) {
            *ux *= C64::from_polar(1.0, -dt * vx);
        }
        for (a, sk) in alpha.iter_mut().zip(&s) {
            *a += minus_i * sk * dt;
        }

        let (u, alpha) = self.free_half(&u, &alpha, 0.5 * dt)?;
        let next = ClassicalState { t: state.t + dt, u, alpha };
        if !all_finite(&next.u) || !all_finite(&next.alpha) {
            return Err(Error::NonFinite("classical step"));
        }
        Ok(next)
    }

    fn free_half(&self, u: &[C64], alpha: &[C64], tau: f64) -> Result<(Vec<C64>, Vec<C64>)> {
        let g = &self.grid;
        let modes: Vec<C64> =
            g.fourier(u)?.iter().zip(g.kinetic()).map(|(z, &e)| z * C64::from_polar(1.0, -e * tau)).collect();
        let u = g.inverse_fourier(&modes)?;
        let alpha = alpha.iter().zip(g.omega()).map(|(a, &w)| a * C64::from_polar(1.0, -w * tau)).collect();
        Ok((u, alpha))
    }

    /// One step of the configured splitting.
    pub fn step(&self, state: &ClassicalState, dt: f64) -> Result<ClassicalState> {
        self.validate(state)?;
        self.step_unchecked(state, dt)
    }

    fn step_unchecked(&self, state: &ClassicalState, dt: f64) -> Result<ClassicalState> {
        match self.splitting {
            Splitting::Strang => self.strang_unchecked(state, dt),
            Splitting::Yoshida => {
                let cbrt2 = 2f64.cbrt();
                let w1 = 1.0 / (2.0 - cbrt2);
                let w0 = -cbrt2 / (2.0 - cbrt2);
                let a = self.strang_unchecked(state, w1 * dt)?;
                let b = self.strang_unchecked(&a, w0 * dt)?;
                let mut c = self.strang_unchecked(&b, w1 * dt)?;
                c.t = state.t + dt;
                Ok(c)
            }
        }
    }

    /// Integrates from `initial` over `horizon` with fixed step `dt`, storing every step.
    pub fn solve(&self, initial: &ClassicalState, horizon: f64, dt: f64) -> Result<Trajectory> {
        self.validate(initial)?;
        if !(horizon >= 0.0 && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("need horizon >= 0 and dt > 0 (got {horizon}, {dt})")));
        }
        let steps_f = horizon / dt;
        let steps = steps_f.round() as usize;
        if (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
            return Err(Error::StepMismatch { dt, horizon });
        }
        let q0 = initial.charge(&self.grid);
        let mut states = Vec::with_capacity(steps + 1);
        states.push(initial.clone());
        let mut max_drift = 0.0f64;
        for n in 0..steps {
            let mut next = self.step_unchecked(&states[n], dt)?;
            next.t = initial.t + (n + 1) as f64 * dt;
            let drift = (next.charge(&self.grid) - q0).abs();
            max_drift = max_drift.max(drift);
            if drift > self.charge_tolerance {
                return Err(Error::Instability { drift, threshold: self.charge_tolerance, t: next.t });
            }
            states.push(next);
        }
        Ok(Trajectory { dt, splitting: self.splitting, states, max_charge_drift: max_drift })
    }

    /// Solves the phase-rotated family alpha0 -> e^{-i theta_j} alpha0, theta_j = 2 pi j / n.
    pub fn solve_theta_family(&self, initial: &ClassicalState, horizon: f64, dt: f64, n_theta: usize) -> Result<ThetaFamily> {
        if n_theta == 0 {
            return Err(Error::InvalidArgument("theta family needs at least one member".into()));
        }
        let thetas: Vec<f64> = (0..n_theta).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64).collect();
        let members = thetas
            .par_iter()
            .map(|&theta| {
                let rot = C64::from_polar(1.0, -theta);
                let start = ClassicalState { t: initial.t, u: initial.u.clone(), alpha: initial.alpha.iter().map(|a| a * rot).collect() };
                self.solve(&start, horizon, dt)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ThetaFamily { thetas, members })
    }
}

/// Stored solution with dense output by re-stepping from the nearest earlier sample.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub splitting: Splitting,
    pub states: Vec<ClassicalState>,
    pub max_charge_drift: f64,
}

impl Trajectory {
    pub fn start(&self) -> f64 {
        self.states[0].t
    }

    pub fn end(&self) -> f64 {
        self.states.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn last(&self) -> &ClassicalState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn state_at(&self, grid: &ModeGrid, t: f64) -> Result<ClassicalState> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-12 * (1.0 + end.abs());
        if t < start - slack || t > end + slack {
            return Err(Error::OutOfRange { t, start, end });
        }
        let pos = (t - start) / self.dt;
        let snapped = if (pos - pos.round()).abs() < 1e-9 { pos.round() } else { pos.floor() };
        let idx = (snapped.max(0.0) as usize).min(self.states.len() - 1);
        let base = &self.states[idx];
        let gap = t - base.t;
        if gap.abs() <= 1e-15 * (1.0 + t.abs()) {
            return Ok(base.clone());
        }
        let solver = ClassicalSolver { grid: grid.clone(), splitting: self.splitting, charge_tolerance: f64::INFINITY };
        let mut s = solver.step_unchecked(base, gap)?;
        s.t = t;
        Ok(s)
    }

    /// Writes `t, Re/Im u_x ..., Re/Im alpha_k ...` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let m = self.states.first().map(|s| s.u.len()).unwrap_or(0);
        let mut header = vec!["t".to_string()];
        for i in 0..m {
            header.push(format!("u{i}_re"));
            header.push(format!("u{i}_im"));
        }
        for i in 0..m {
            header.push(format!("alpha{i}_re"));
            header.push(format!("alpha{i}_im"));
        }
        w.write_record(&header)?;
        for s in &self.states {
            let mut row = vec![format!("{:.16e}", s.t)];
            for z in s.u.iter().chain(&s.alpha) {
                row.push(format!("{:.16e}", z.re));
                row.push(format!("{:.16e}", z.im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ThetaFamily {
    pub thetas: Vec<f64>,
    pub members: Vec<Trajectory>,
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    /// Mode amplitudes of u on the time grid.
    pub u_modes: Vec<Vec<C64>>,
    pub alpha: Vec<Vec<C64>>,
    pub times: Vec<f64>,
    pub iterations: usize,
    /// Ratios of successive iterate changes.
    pub contraction: Vec<f64>,
}

impl PicardSolution {
    pub fn final_state(&self, grid: &ModeGrid) -> Result<ClassicalState> {
        let n = self.times.len() - 1;
        Ok(ClassicalState { t: self.times[n], u: from_modes(grid, &self.u_modes[n])?, alpha: self.alpha[n].clone() })
    }
}

/// Fixed-point iteration of the integral form on `steps` uniform intervals,
/// with trapezoid Duhamel integrals. Starts from the free evolution.
pub fn picard_solve(grid: &ModeGrid, initial: &ClassicalState, horizon: f64, steps: usize, tolerance: f64, max_iterations: usize) -> Result<PicardSolution> {
    if steps == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidArgument("picard needs steps > 0 and a positive horizon".into()));
    }
    ClassicalSolver::new(grid, Splitting::Strang).validate(initial)?;
    let h = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| initial.t + j as f64 * h).collect();
    let u0 = to_modes(grid, &initial.u)?;
    let a0 = initial.alpha.clone();
    let prop_u: Vec<C64> = grid.kinetic().iter().map(|&e| C64::from_polar(1.0, -e * h)).collect();
    let prop_a: Vec<C64> = grid.omega().iter().map(|&w| C64::from_polar(1.0, -w * h)).collect();
    let minus_i = C64::new(0.0, -1.0);

    let mut u_path: Vec<Vec<C64>> = Vec::with_capacity(steps + 1);
    let mut a_path: Vec<Vec<C64>> = Vec::with_capacity(steps + 1);
    u_path.push(u0.clone());
    a_path.push(a0.clone());
    for j in 0..steps {
        u_path.push(u_path[j].iter().zip(&prop_u).map(|(z, p)| z * p).collect());
        a_path.push(a_path[j].iter().zip(&prop_a).map(|(z, p)| z * p).collect());
    }

    let sqrt_h = grid.cell_volume().sqrt();
    let forcing = |u_modes: &[C64], alpha: &[C64]| -> Result<(Vec<C64>, Vec<C64>)> {
        let u = from_modes(grid, u_modes)?;
        let v = potential(grid, alpha)?;
        let vu: Vec<C64> = u.iter().zip(&v).map(|(z, &vx)| z * vx).collect();
        let gu = grid.fourier(&vu)?.into_iter().map(|z| z * sqrt_h).collect();
        Ok((gu, source(grid, &u)?))
    };

    let mut contraction = Vec::new();
    let mut prev_change = f64::NAN;
    for iter in 1..=max_iterations {
        let forces = (0..=steps).map(|j| forcing(&u_path[j], &a_path[j])).collect::<Result<Vec<_>>>()?;
        let mut nu = Vec::with_capacity(steps + 1);
        let mut na = Vec::with_capacity(steps + 1);
        nu.push(u0.clone());
        na.push(a0.clone());
        for j in 0..steps {
            let (gu0, ga0) = &forces[j];
            let (gu1, ga1) = &forces[j + 1];
            let next_u = (0..u0.len())
                .map(|q| prop_u[q] * nu[j][q] + minus_i * (0.5 * h) * (prop_u[q] * gu0[q] + gu1[q]))
                .collect::<Vec<_>>();
            let next_a = (0..a0.len())
                .map(|k| prop_a[k] * na[j][k] + minus_i * (0.5 * h) * (prop_a[k] * ga0[k] + ga1[k]))
                .collect::<Vec<_>>();
            nu.push(next_u);
            na.push(next_a);
        }
        let change = nu
            .iter()
            .zip(&u_path)
            .chain(na.iter().zip(&a_path))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if !change.is_finite() {
            return Err(Error::NonFinite("picard iterate"));
        }
        u_path = nu;
        a_path = na;
        if prev_change.is_finite() && prev_change > 0.0 {
            let factor = change / prev_change;
            contraction.push(factor);
            if factor >= 1.0 && change > tolerance {
                return Err(Error::NonContraction { factor });
            }
        }
        if change <= tolerance {
            return Ok(PicardSolution { u_modes: u_path, alpha: a_path, times, iterations: iter, contraction });
        }
        prev_change = change;
    }
    Err(Error::NoConvergence { iterations: max_iterations, change: prev_change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GridConfig;

    fn setup() -> (ModeGrid, ClassicalState) {
        let g = ModeGrid::new(GridConfig::default()).unwrap();
        let x = g.positions();
        let raw: Vec<C64> = x.iter().map(|p| C64::new(p[0].cos().exp(), 0.3 * (2.0 * p[0]).sin())).collect();
        let n = (g.cell_volume() * raw.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        let u = raw.into_iter().map(|z| z / n).collect();
        let mut alpha = vec![C64::new(0.0, 0.0); g.nodes()];
        alpha[1] = C64::new(0.4, 0.1);
        alpha[4] = C64::new(-0.2, 0.3);
        (g, ClassicalState { t: 0.0, u, alpha })
    }

    #[test]
    fn potential_is_real_field_formula() {
        let (g, s) = setup();
        let v = potential(&g, &s.alpha).unwrap();
        for (x, vx) in g.positions().iter().zip(&v) {
            let direct: C64 = (0..g.nodes())
                .map(|k| {
                    let ph = C64::from_polar(1.0, g.momenta()[k][0] * x[0]);
                    (s.alpha[k] + s.alpha[g.negate(k)].conj()) * ph * g.form_factor()[k]
                })
                .sum();
            assert!((direct.re - vx).abs() < 1e-13 && direct.im.abs() < 1e-13);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let (g, s) = setup();
        let solver = ClassicalSolver::new(&g, Splitting::Strang);
        let next = solver.step_strang(&s, 0.0).unwrap();
        for (a, b) in next.u.iter().zip(&s.u).chain(next.alpha.iter().zip(&s.alpha)) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn decoupled_flow_is_free() {
        let g = ModeGrid::new(GridConfig { cutoff: 0.0, exclude_zero_mode: true, ..GridConfig::default() }).unwrap();
        let (_, s) = setup();
        let s = ClassicalState { alpha: vec![C64::new(0.0, 0.0); g.nodes()], ..s };
        let traj = ClassicalSolver::new(&g, Splitting::Strang).solve(&s, 1.0, 0.1).unwrap();
        let modes0 = s.u_modes(&g).unwrap();
        let modes1 = traj.last().u_modes(&g).unwrap();
        for (q, (a, b)) in modes0.iter().zip(&modes1).enumerate() {
            assert!((a * C64::from_polar(1.0, -g.kinetic()[q]) - b).norm() < 1e-13);
        }
        let p = picard_solve(&g, &s, 0.5, 10, 1e-14, 5).unwrap();
        assert_eq!(p.iterations, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let (g, mut s) = setup();
        let solver = ClassicalSolver::new(&g, Splitting::Strang);
        assert!(matches!(solver.solve(&s, 1.0, 0.3), Err(Error::StepMismatch { .. })));
        s.alpha[2] = C64::new(1.0, 0.0);
        let g1 = ModeGrid::new(GridConfig { cutoff: 1.0, ..GridConfig::default() }).unwrap();
        assert!(matches!(ClassicalSolver::new(&g1, Splitting::Strang).step(&s, 0.1), Err(Error::SupportViolation { .. })));
        s.u[0] = C64::new(f64::NAN, 0.0);
        assert!(matches!(solver.step(&s, 0.1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn dense_output_matches_stored_samples() {
        let (g, s) = setup();
        let traj = ClassicalSolver::new(&g, Splitting::Strang).solve(&s, 0.1, 0.01).unwrap();
        let mid = traj.state_at(&g, 0.05).unwrap();
        assert!(mid.u.iter().zip(&traj.states[5].u).all(|(a, b)| (a - b).norm() < 1e-14));
        assert!(traj.state_at(&g, 0.2).is_err());
    }
}
