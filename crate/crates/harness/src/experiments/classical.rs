use std::path::Path;

use nelson_core::classical::{picard_solve, state_from_modes, ClassicalSolver, ClassicalState, Splitting};
use nelson_core::lattice::ModeGrid;
use nelson_core::numerics::distance;
use nelson_core::observables::ExperimentResult;

use crate::output::{csv_path, fmt, Table};
use crate::{HarnessError, RunConfig};

fn setup(config: &RunConfig) -> Result<(ModeGrid, ClassicalState), HarnessError> {
    let grid = ModeGrid::new(config.classical_grid.clone())?;
    let init = state_from_modes(&grid, &config.classical_initial.u0, &config.classical_initial.alpha0)?;
    Ok((grid, init))
}

/// l2 distance of mode amplitudes, particle and boson parts together.
fn state_distance(grid: &ModeGrid, a: &ClassicalState, b: &ClassicalState) -> Result<f64, HarnessError> {
    let du = distance(&a.u_modes(grid)?, &b.u_modes(grid)?);
    let da = distance(&a.alpha, &b.alpha);
    Ok(du.hypot(da))
}

pub fn charge(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let start = std::time::Instant::now();
    let (grid, init) = setup(config)?;
    let traj = ClassicalSolver::new(&grid, Splitting::Strang).solve(&init, config.horizon, config.dt)?;
    let q0 = init.charge(&grid);
    let mut table = Table::new(&["t", "charge", "relative_drift", "boson_norm"]);
    let mut drift = 0.0f64;
    for s in &traj.states {
        let q = s.charge(&grid);
        let d = (q - q0).abs() / q0;
        drift = drift.max(d);
        table.push(vec![fmt(s.t), fmt(q), fmt(d), fmt(s.boson_norm())]);
    }
    table.write(&csv_path(out, "classical-charge"))?;
    let mut res = ExperimentResult::new("classical-charge");
    res.note("steps", (traj.states.len() - 1) as f64);
    res.check_le("relative charge drift", drift, 1e-8);
    res.check_le("runtime seconds", start.elapsed().as_secs_f64(), 10.0);
    Ok(res)
}

pub fn order(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let start = std::time::Instant::now();
    let (grid, init) = setup(config)?;
    // Fourth-order reference at the finest configured step.
    let reference = ClassicalSolver::new(&grid, Splitting::Yoshida).solve(&init, config.horizon, config.dt)?;
    let strang = ClassicalSolver::new(&grid, Splitting::Strang);
    let mut errors = Vec::new();
    for &dt in &config.order_steps {
        let traj = strang.solve(&init, config.horizon, dt)?;
        errors.push(state_distance(&grid, traj.last(), reference.last())?);
    }
    let mut res = ExperimentResult::new("classical-order");
    let mut table = Table::new(&["dt", "error", "ratio"]);
    for (i, (&dt, &e)) in config.order_steps.iter().zip(&errors).enumerate() {
        let ratio = if i > 0 { errors[i - 1] / e } else { f64::NAN };
        table.push(vec![fmt(dt), fmt(e), if i > 0 { fmt(ratio) } else { String::new() }]);
        if i > 0 {
            let halving = (config.order_steps[i - 1] / dt - 2.0).abs() < 1e-12;
            if halving {
                res.check_range(&format!("error ratio dt={dt}"), ratio, 3.2, 4.8);
            } else {
                res.note(&format!("ratio dt={dt}"), ratio);
            }
        }
    }
    table.write(&csv_path(out, "classical-order"))?;
    res.errors = errors;
    res.check_le("runtime seconds", start.elapsed().as_secs_f64(), 30.0);
    Ok(res)
}

pub fn picard(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let (grid, init) = setup(config)?;
    let steps = (config.picard_horizon / config.dt).round() as usize;
    let pic = picard_solve(&grid, &init, config.picard_horizon, steps, config.picard_tolerance, config.picard_max_iterations)?;
    let traj = ClassicalSolver::new(&grid, Splitting::Strang).solve(&init, config.picard_horizon, config.dt)?;
    let mut table = Table::new(&["t", "u_difference", "alpha_difference"]);
    let mut sup = 0.0f64;
    for (j, &t) in pic.times.iter().enumerate() {
        let s = traj.state_at(&grid, t)?;
        let du = distance(&s.u_modes(&grid)?, &pic.u_modes[j]);
        let da = distance(&s.alpha, &pic.alpha[j]);
        sup = sup.max(du).max(da);
        table.push(vec![fmt(t), fmt(du), fmt(da)]);
    }
    table.write(&csv_path(out, "classical-picard"))?;
    let mut res = ExperimentResult::new("classical-picard");
    res.note("iterations", pic.iterations as f64);
    res.note("max contraction factor", pic.contraction.iter().cloned().fold(0.0, f64::max));
    res.check_le("sup difference", sup, 10.0 * (config.picard_tolerance + config.dt * config.dt));
    Ok(res)
}
