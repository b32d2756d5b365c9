use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nelson_core::classical::{state_from_modes, ClassicalSolver, Splitting};
use nelson_core::fock::FockBasis;
use nelson_core::numerics::expm::ExpmOptions;
use nelson_core::observables::{classical_product, normal_ordered_average, theta_average, ExperimentResult, NormalOrderSpec};
use nelson_core::propagate::evolve_full;
use nelson_core::states::{build_state, required_cap, theta_identity, StateSpec};

use super::QuantumSetup;
use crate::output::{csv_path, fmt, Table};
use crate::{HarnessError, RunConfig};

pub fn identity(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let start = Instant::now();
    let setup = QuantumSetup::new(config)?;
    let (np, nb) = (setup.grid.nodes(), setup.grid.coupled_modes().len());
    let mut res = ExperimentResult::new("theta-identity");
    let mut table = Table::new(&["level", "boson_cap", "theta_nodes", "projection_residual", "quadrature_residual", "coherent_tail"]);
    for &x in &config.identity_levels {
        let cap = required_cap(x as f64, config.identity_tail);
        // Aliasing in the phase quadrature is absent once the node count exceeds the boson cap.
        let nodes = config.theta_samples.max(cap + 1);
        let basis = Arc::new(FockBasis::new(np, nb, x, cap)?);
        let r = theta_identity(&basis, &setup.u0, &setup.alpha0, x, nodes)?;
        table.push(vec![x.to_string(), cap.to_string(), nodes.to_string(), fmt(r.projection_residual), fmt(r.quadrature_residual), fmt(r.tail)]);
        res.check_le(&format!("projection residual x={x}"), r.projection_residual, 1e-10);
        res.check_le(&format!("quadrature residual x={x}"), r.quadrature_residual, 1e-10);
        res.check_le(&format!("coherent tail x={x}"), r.tail, config.identity_tail);
    }
    table.write(&csv_path(out, "theta-identity"))?;
    res.check_le("runtime seconds", start.elapsed().as_secs_f64(), 60.0);
    Ok(res)
}

/// psi^*[u0] psi[u0] a[alpha0] on Theta states against the theta-averaged classical product.
pub fn residue(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let setup = QuantumSetup::new(config)?;
    let (np, nb) = (setup.grid.nodes(), setup.grid.coupled_modes().len());
    let t = config.sample_time;
    let spec = NormalOrderSpec {
        psi_create: vec![setup.u0.clone()],
        psi_annihilate: vec![setup.u0.clone()],
        boson_annihilate: vec![setup.alpha0.clone()],
        ..Default::default()
    };
    let init = state_from_modes(&setup.grid, &setup.u0, &setup.alpha0)?;
    let solver = ClassicalSolver::new(&setup.grid, Splitting::Yoshida);
    let family = solver.solve_theta_family(&init, t, config.dt, config.theta_samples)?;
    let avg = theta_average(&spec, &setup.grid, &family, t)?;
    let s0 = family.members[0].state_at(&setup.grid, t)?;
    let naive = classical_product(&spec, &s0.u_modes(&setup.grid)?, &s0.coupled_alpha(&setup.grid))?;
    let margin = (avg.value - naive).norm();

    let mut res = ExperimentResult::new("theta-residue");
    let mut table = Table::new(&["level", "lambda", "quantum_re", "quantum_im", "average_re", "average_im", "error", "edge_weight"]);
    let opts = ExpmOptions { tolerance: config.expm_tolerance, ..Default::default() };
    for &i in &config.theta_levels {
        let lambda = 1.0 / (i as f64).sqrt();
        let cap = i + config.theta_boson_margin;
        let basis = Arc::new(FockBasis::new(np, nb, i, cap)?);
        let theta = build_state(&basis, StateSpec::Theta { i, j: i }, &setup.u0, &setup.alpha0, config.tail_tolerance)?;
        let (x, _) = evolve_full(&setup.grid, lambda, &theta, t, opts)?;
        let q = normal_ordered_average(&x, &spec, lambda)?;
        let top = (cap - 1) as u8;
        let edge = x.mask(|_, n| n >= top).norm().powi(2);
        let err = (q - avg.value).norm();
        table.push(vec![i.to_string(), fmt(lambda), fmt(q.re), fmt(q.im), fmt(avg.value.re), fmt(avg.value.im), fmt(err), fmt(edge)]);
        res.lambdas.push(lambda);
        res.errors.push(err);
        res.note(&format!("edge weight i={i}"), edge);
    }
    table.write(&csv_path(out, "theta-residue"))?;
    let decreasing = res.errors.windows(2).all(|w| w[1] < w[0]);
    res.check("error decreases monotonically in i", decreasing);
    res.note("theta average re", avg.value.re);
    res.note("theta average im", avg.value.im);
    res.note("naive product re", naive.re);
    res.note("naive product im", naive.im);
    res.note("residue margin", margin);
    res.note("theta refinement gap", avg.refinement_gap);
    // The margin must stand clear of the quadrature uncertainty.
    res.check("residue margin exceeds quadrature gap", margin > 100.0 * avg.refinement_gap.max(1e-12));
    Ok(res)
}
