//! Registered experiments. Each one writes `<out>/<name>.csv` and returns its assertions.

mod classical;
mod fluct;
mod quantum;
mod rates;
mod theta;

use std::fs;
use std::path::Path;
use std::time::Instant;

use nelson_core::classical::{state_from_modes, ClassicalSolver, Splitting, Trajectory};
use nelson_core::lattice::ModeGrid;
use nelson_core::observables::ExperimentResult;
use nelson_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::output::csv_path;
use crate::{HarnessError, Outcome, RunConfig};

pub type ExperimentFn = fn(&RunConfig, &Path) -> Result<ExperimentResult, HarnessError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Classical,
    Quantum,
    Fluct,
    Rates,
    Theta,
    /// Only run by the `report` subcommand.
    Meta,
}

pub struct Experiment {
    pub name: &'static str,
    pub group: Group,
    pub run: ExperimentFn,
}

pub const REGISTRY: &[Experiment] = &[
    Experiment { name: "classical-charge", group: Group::Classical, run: classical::charge },
    Experiment { name: "classical-order", group: Group::Classical, run: classical::order },
    Experiment { name: "classical-picard", group: Group::Classical, run: classical::picard },
    Experiment { name: "ccr", group: Group::Quantum, run: quantum::ccr },
    Experiment { name: "structural-zeros", group: Group::Quantum, run: quantum::structural_zeros },
    Experiment { name: "theta-identity", group: Group::Theta, run: theta::identity },
    Experiment { name: "one-particle", group: Group::Fluct, run: fluct::one_particle },
    Experiment { name: "hdelta-bound", group: Group::Fluct, run: fluct::hdelta_bound },
    Experiment { name: "strong-limit", group: Group::Fluct, run: fluct::strong_limit },
    Experiment { name: "rates-generic", group: Group::Rates, run: rates::generic },
    Experiment { name: "rates-vacuum", group: Group::Rates, run: rates::vacuum_rate },
    Experiment { name: "theta-residue", group: Group::Theta, run: theta::residue },
    Experiment { name: "determinism", group: Group::Meta, run: determinism },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name)
}

/// Runs one experiment after validating the configuration.
pub fn run_experiment(name: &str, config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let exp = find(name).ok_or_else(|| HarnessError::UnknownExperiment(name.to_string()))?;
    config.validate()?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut result = (exp.run)(config, out)?;
    result.runtime_seconds = start.elapsed().as_secs_f64();
    for a in &result.assertions {
        let status = if a.passed { "ok" } else { "FAILED" };
        log::info!("{name}: {} value {:e} bound {:e} margin {:e} {status}", a.name, a.value, a.bound, a.bound - a.value);
    }
    Ok(result)
}

/// Runs every named experiment in order. Numerical failures stay attached to their experiment.
pub fn run_many(names: &[&'static str], config: &RunConfig, out: &Path) -> Result<Vec<Outcome>, HarnessError> {
    config.validate()?;
    let mut outcomes = Vec::new();
    for &name in names {
        let result = match run_experiment(name, config, out) {
            Ok(r) => Ok(r),
            Err(e @ (HarnessError::Config(_) | HarnessError::UnknownExperiment(_))) => return Err(e),
            Err(e) => {
                log::error!("{name}: {e}");
                Err(e.to_string())
            }
        };
        outcomes.push(Outcome { name, result });
    }
    Ok(outcomes)
}

pub(crate) fn rng(config: &RunConfig, experiment: &str, point: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.sub_seed(experiment, point))
}

/// Unit vector with entries drawn uniformly from the square [-1, 1]^2.
pub(crate) fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = crate::config::l2(&v);
    v.into_iter().map(|z| z / norm).collect()
}

/// Coupling values from weakest to strongest approach of the limit.
pub(crate) fn descending(lambdas: &[f64]) -> Vec<f64> {
    let mut l = lambdas.to_vec();
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

pub(crate) struct QuantumSetup {
    pub grid: ModeGrid,
    pub u0: Vec<C64>,
    pub alpha0: Vec<C64>,
}

impl QuantumSetup {
    pub fn new(config: &RunConfig) -> Result<Self, HarnessError> {
        Ok(Self { grid: ModeGrid::new(config.quantum_grid.clone())?, u0: config.quantum_initial.u0.clone(), alpha0: config.quantum_initial.alpha0.clone() })
    }

    /// Reference classical trajectory from (u0, alpha0) up to `horizon`.
    pub fn trajectory(&self, config: &RunConfig, horizon: f64) -> Result<Trajectory, HarnessError> {
        let init = state_from_modes(&self.grid, &self.u0, &self.alpha0)?;
        Ok(ClassicalSolver::new(&self.grid, Splitting::Yoshida).solve(&init, horizon, config.dt)?)
    }
}

/// Reruns cheap experiments into two fresh directories and compares the CSV bytes.
fn determinism(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let mut res = ExperimentResult::new("determinism");
    let mut table = crate::output::Table::new(&["experiment", "bytes", "identical"]);
    let base = out.join("determinism");
    for name in ["classical-charge", "classical-picard", "structural-zeros", "theta-residue"] {
        let mut bytes = Vec::new();
        for run in ["a", "b"] {
            let dir = base.join(run);
            run_experiment(name, config, &dir)?;
            bytes.push(fs::read(csv_path(&dir, name))?);
        }
        let same = bytes[0] == bytes[1];
        table.push(vec![name.to_string(), bytes[0].len().to_string(), same.to_string()]);
        res.check(&format!("{name} csv identical"), same);
        res.check(&format!("{name} csv non-empty"), !bytes[0].is_empty());
    }
    table.write(&csv_path(out, "determinism"))?;
    Ok(res)
}
