use std::path::Path;
use std::sync::Arc;

use nelson_core::classical::Trajectory;
use nelson_core::fock::{apply_field, FockBasis, Ladder, QuantumState, Species};
use nelson_core::hamiltonian::FluctuationGenerator;
use nelson_core::lattice::ModeGrid;
use nelson_core::numerics::expm::ExpmOptions;
use nelson_core::numerics::quad::simpson;
use nelson_core::observables::{rate_fit, ExperimentResult};
use nelson_core::propagate::{conjugated_dynamics, DysonOptions, FluctuationPropagator};
use nelson_core::states::{poisson_tail, required_cap};
use nelson_core::C64;
use rayon::prelude::*;

use super::{random_unit, rng, QuantumSetup};
use crate::output::{csv_path, fmt, Table};
use crate::{HarnessError, RunConfig};

fn sorted(times: &[f64]) -> Vec<f64> {
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn dyson_options(config: &RunConfig) -> DysonOptions {
    DysonOptions { tolerance: config.dyson_tolerance, ..DysonOptions::default() }
}

fn conj(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

/// phi(g) = psi^*(g1) + psi(g2) + a^*(g3) + a(g4), with psi(g) = sum conj(g_q) psi_q.
fn field_operator(state: &QuantumState, g: &[Vec<C64>; 4]) -> Result<(QuantumState, f64), HarnessError> {
    let parts = [
        apply_field(state, Species::Particle, Ladder::Create, &g[0])?,
        apply_field(state, Species::Particle, Ladder::Annihilate, &conj(&g[1]))?,
        apply_field(state, Species::Boson, Ladder::Create, &g[2])?,
        apply_field(state, Species::Boson, Ladder::Annihilate, &conj(&g[3]))?,
    ];
    let mut out = QuantumState::zeros(state.basis());
    let mut lost = 0.0;
    for (p, l) in parts {
        for (o, z) in out.amps.iter_mut().zip(&p.amps) {
            *o += z;
        }
        lost += l;
    }
    Ok((out, lost))
}

pub fn one_particle(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let setup = QuantumSetup::new(config)?;
    let times = sorted(&config.one_particle_times);
    let traj = setup.trajectory(config, *times.last().expect("validated non-empty"))?;
    let cap = config.fluct_cap;
    let basis = Arc::new(FockBasis::new(setup.grid.nodes(), setup.grid.coupled_modes().len(), cap, cap)?);
    let gen = FluctuationGenerator::new(&basis, &setup.grid)?;
    let prop = FluctuationPropagator::new(&gen, &setup.grid, &traj);
    let opts = dyson_options(config);
    let mut rng = rng(config, "one-particle", 0);
    let (np, nb) = (basis.psi_modes(), basis.boson_modes());
    let panel: Vec<[Vec<C64>; 4]> =
        (0..config.panel_size).map(|_| [random_unit(&mut rng, np), random_unit(&mut rng, np), random_unit(&mut rng, nb), random_unit(&mut rng, nb)]).collect();

    let mut res = ExperimentResult::new("one-particle");
    let mut table = Table::new(&["t", "function", "norm", "outside_one_particle", "substeps_back"]);
    let mut state = QuantumState::vacuum(&basis);
    let mut now = 0.0;
    for &t in &times {
        let fwd = prop.dyson(t, now, &state, opts)?;
        state = fwd.state;
        now = t;
        let top = cap as u8;
        res.note(&format!("vacuum edge weight t={t}"), state.mask(|a, n| a == top || n == top).norm().powi(2));
        for (j, g) in panel.iter().enumerate() {
            let (x, _) = field_operator(&state, g)?;
            let back = prop.dyson(0.0, t, &x, opts)?;
            let outside = back.state.mask(|a, n| a + n != 1).norm();
            table.push(vec![fmt(t), j.to_string(), fmt(back.state.norm()), fmt(outside), back.substeps.to_string()]);
            res.check_le(&format!("outside one-particle sector t={t} g{j}"), outside, 1e-6);
        }
    }
    table.write(&csv_path(out, "one-particle"))?;
    Ok(res)
}

/// Integral of ||f0|| ||u(tau)|| over [0, t] from the stored samples.
fn pair_kernel_integral(grid: &ModeGrid, traj: &Trajectory, t: f64) -> Result<f64, HarnessError> {
    let f0 = grid.coupled_modes().iter().map(|&k| grid.form_factor()[k].powi(2)).sum::<f64>().sqrt();
    let n = (t / traj.dt).round() as usize;
    let vals = traj.states[..=n].iter().map(|s| Ok(f0 * crate::config::l2(&s.u_modes(grid)?))).collect::<Result<Vec<f64>, HarnessError>>()?;
    if n >= 2 && n.is_multiple_of(2) {
        Ok(simpson(&vals, traj.dt))
    } else {
        Ok(vals.windows(2).map(|w| 0.5 * (w[0] + w[1]) * traj.dt).sum())
    }
}

pub fn hdelta_bound(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let setup = QuantumSetup::new(config)?;
    let times = sorted(&config.fluct_times);
    let traj = setup.trajectory(config, *times.last().expect("validated non-empty"))?;
    let cap = config.bound_cap;
    let basis = Arc::new(FockBasis::new(setup.grid.nodes(), setup.grid.coupled_modes().len(), cap, cap)?);
    let gen = FluctuationGenerator::new(&basis, &setup.grid)?;
    let prop = FluctuationPropagator::new(&gen, &setup.grid, &traj);
    let mut rng = rng(config, "hdelta-bound", 0);
    let phi = QuantumState::from_amps(&basis, random_unit(&mut rng, basis.dim()))?.mask(|a, n| a + n <= 2).normalized();

    let mut res = ExperimentResult::new("hdelta-bound");
    let mut table = Table::new(&["t", "delta", "ratio", "bound", "kernel_integral"]);
    let mut state = phi.clone();
    let mut now = 0.0;
    for &t in &times {
        state = prop.dyson(t, now, &state, dyson_options(config))?.state;
        now = t;
        let integral = pair_kernel_integral(&setup.grid, &traj, t)?;
        let top = cap as u8;
        res.note(&format!("edge weight t={t}"), state.mask(|a, n| a == top || n == top).norm().powi(2));
        for &delta in &config.deltas {
            let ratio = state.number_norm(delta) / phi.number_norm(delta);
            let c2 = 4.0f64.max(3f64.powf(delta.abs() / 2.0) + 1.0);
            let bound = (delta.abs() / 2.0 * (3f64.ln() + std::f64::consts::SQRT_2 * c2 * integral)).exp();
            table.push(vec![fmt(t), fmt(delta), fmt(ratio), fmt(bound), fmt(integral)]);
            res.check_le(&format!("norm ratio t={t} delta={delta}"), ratio, bound);
        }
    }
    table.write(&csv_path(out, "hdelta-bound"))?;
    Ok(res)
}

pub fn strong_limit(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let setup = QuantumSetup::new(config)?;
    let t = config.sample_time;
    let traj = setup.trajectory(config, t)?;
    let (np, nb) = (setup.grid.nodes(), setup.grid.coupled_modes().len());
    let mut occ_p = vec![0u8; np];
    let mut occ_a = vec![0u8; nb];
    occ_p[0] = 1;
    occ_a[0] = 1;
    let small = Arc::new(FockBasis::new(np, nb, config.limit_cap, config.limit_cap)?);
    let phi = QuantumState::basis_vector(&small, &occ_p, &occ_a)?;
    let gen = FluctuationGenerator::new(&small, &setup.grid)?;
    let limit = FluctuationPropagator::new(&gen, &setup.grid, &traj).dyson(t, 0.0, &phi, dyson_options(config))?;
    let top = config.limit_cap as u8;
    let limit_edge = limit.state.mask(|a, n| a == top || n == top).norm().powi(2);
    let max_alpha = traj.states.iter().map(|s| s.boson_norm()).fold(0.0, f64::max);
    let opts = ExpmOptions { tolerance: config.expm_tolerance, ..Default::default() };

    let points = super::descending(&config.lambdas)
        .par_iter()
        .map(|&lambda| -> Result<_, HarnessError> {
            let (pm, am) = (lambda.powi(-2), (max_alpha / lambda).powi(2));
            let pc = required_cap(pm, config.tail_tolerance) + 2;
            let ac = required_cap(am, config.tail_tolerance) + config.cap_margin;
            let big = Arc::new(FockBasis::new(np, nb, pc, ac)?);
            let (phi_big, _) = phi.embed(&big)?;
            let (limit_big, lost) = limit.state.embed(&big)?;
            let (w, rep) = conjugated_dynamics(&setup.grid, &traj, lambda, t, 0.0, &phi_big, opts)?;
            let tail = poisson_tail(pm, pc).max(poisson_tail(am, ac));
            Ok((lambda, big.dim(), w.distance(&limit_big)?, lost, tail, rep.edge_weight))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut res = ExperimentResult::new("strong-limit");
    let mut table = Table::new(&["lambda", "dimension", "error", "coherent_tail", "edge_weight"]);
    for &(lambda, dim, err, lost, tail, edge) in &points {
        table.push(vec![fmt(lambda), dim.to_string(), fmt(err), fmt(tail), fmt(edge)]);
        res.lambdas.push(lambda);
        res.errors.push(err);
        res.note(&format!("embedding loss lambda={lambda}"), lost);
        res.check_le(&format!("coherent tail lambda={lambda}"), tail, config.tail_tolerance);
    }
    table.write(&csv_path(out, "strong-limit"))?;
    res.note("limit edge weight", limit_edge);
    res.note("limit dyson substeps", limit.substeps as f64);
    let decreasing = res.errors.windows(2).all(|w| w[1] < w[0]);
    res.check("error strictly decreasing in lambda", decreasing);
    let fit = rate_fit(&res.lambdas, &res.errors)?;
    res.slope = Some(fit.slope);
    res.fit_residual = Some(fit.residual);
    Ok(res)
}
