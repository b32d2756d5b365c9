use std::path::Path;
use std::sync::Arc;

use nelson_core::fock::{FockBasis, QuantumState};
use nelson_core::numerics::distance;
use nelson_core::numerics::expm::ExpmOptions;
use nelson_core::observables::{field_averages, rate_fit, ExperimentResult};
use nelson_core::propagate::displaced_evolution;
use nelson_core::states::{poisson_tail, required_cap};
use nelson_core::C64;
use rayon::prelude::*;

use super::{descending, QuantumSetup};
use crate::output::{csv_path, fmt, Table};
use crate::{HarnessError, RunConfig};

/// (Omega + psi_0^* Omega + a_0^* Omega) / sqrt(3): overlaps every parity sector.
fn generic_state(basis: &Arc<FockBasis>) -> Result<QuantumState, HarnessError> {
    let (np, nb) = (basis.psi_modes(), basis.boson_modes());
    let mut p = vec![0u8; np];
    let mut a = vec![0u8; nb];
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    let w = C64::new(1.0 / 3f64.sqrt(), 0.0);
    amps[basis.index_of(&p, &a).expect("vacuum is in every basis")] = w;
    p[0] = 1;
    amps[basis.index_of(&p, &a).expect("caps are positive")] = w;
    p[0] = 0;
    a[0] = 1;
    amps[basis.index_of(&p, &a).expect("caps are positive")] = w;
    Ok(QuantumState::from_amps(basis, amps)?)
}

fn vacuum(basis: &Arc<FockBasis>) -> Result<QuantumState, HarnessError> {
    Ok(QuantumState::vacuum(basis))
}

/// Error of the particle field average against the classical solution over the lambda list.
fn sweep(config: &RunConfig, out: &Path, name: &str, build: fn(&Arc<FockBasis>) -> Result<QuantumState, HarnessError>, range: (f64, f64)) -> Result<ExperimentResult, HarnessError> {
    let setup = QuantumSetup::new(config)?;
    let t = config.sample_time;
    let traj = setup.trajectory(config, t)?;
    let reference = traj.state_at(&setup.grid, t)?;
    let (u_t, alpha_t) = (reference.u_modes(&setup.grid)?, reference.coupled_alpha(&setup.grid));
    let max_alpha = traj.states.iter().map(|s| s.boson_norm()).fold(0.0, f64::max);
    let (np, nb) = (setup.grid.nodes(), setup.grid.coupled_modes().len());
    let opts = ExpmOptions { tolerance: config.expm_tolerance, ..Default::default() };

    let points = descending(&config.lambdas)
        .par_iter()
        .map(|&lambda| -> Result<_, HarnessError> {
            let (pm, am) = (lambda.powi(-2), (max_alpha / lambda).powi(2));
            let pc = required_cap(pm, config.tail_tolerance) + 2;
            let ac = required_cap(am, config.tail_tolerance) + config.cap_margin;
            let basis = Arc::new(FockBasis::new(np, nb, pc, ac)?);
            let phi = build(&basis)?;
            let (x, rep) = displaced_evolution(&setup.grid, &traj, lambda, t, &phi, opts)?;
            let (psi, a) = field_averages(&x, lambda)?;
            let tail = poisson_tail(pm, pc).max(poisson_tail(am, ac));
            Ok((lambda, basis.dim(), distance(&psi, &u_t), distance(&a, &alpha_t), tail, rep.edge_weight, (x.norm() - 1.0).abs()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut res = ExperimentResult::new(name);
    let mut table = Table::new(&["lambda", "dimension", "particle_error", "boson_error", "coherent_tail", "edge_weight"]);
    for &(lambda, dim, err, boson_err, tail, edge, drift) in &points {
        table.push(vec![fmt(lambda), dim.to_string(), fmt(err), fmt(boson_err), fmt(tail), fmt(edge)]);
        res.lambdas.push(lambda);
        res.errors.push(err);
        res.check_le(&format!("coherent tail lambda={lambda}"), tail, config.tail_tolerance);
        res.check_le(&format!("norm drift lambda={lambda}"), drift, 1e-8);
    }
    table.write(&csv_path(out, name))?;
    let fit = rate_fit(&res.lambdas, &res.errors)?;
    res.slope = Some(fit.slope);
    res.fit_residual = Some(fit.residual);
    res.check_range("fitted slope", fit.slope, range.0, range.1);
    Ok(res)
}

pub fn generic(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    sweep(config, out, "rates-generic", generic_state, (0.7, 1.5))
}

pub fn vacuum_rate(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    sweep(config, out, "rates-vacuum", vacuum, (1.5, 2.5))
}
