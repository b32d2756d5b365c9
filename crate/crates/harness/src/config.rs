use std::fs;
use std::path::Path;

use nelson_core::lattice::{GridConfig, ModeGrid};
use nelson_core::C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Initial classical data: particle mode amplitudes and the amplitudes of the coupled boson modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: Vec<C64>,
    pub alpha0: Vec<C64>,
}

impl InitialData {
    fn check(&self, grid: &GridConfig, what: &str) -> Result<(), HarnessError> {
        let g = ModeGrid::new(grid.clone()).map_err(|e| HarnessError::Config(format!("{what} grid: {e}")))?;
        if self.u0.len() != g.nodes() {
            return Err(HarnessError::Config(format!("{what}: u0 has {} entries, grid has {} nodes", self.u0.len(), g.nodes())));
        }
        if self.alpha0.len() != g.coupled_modes().len() {
            return Err(HarnessError::Config(format!(
                "{what}: alpha0 has {} entries, grid has {} coupled modes",
                self.alpha0.len(),
                g.coupled_modes().len()
            )));
        }
        if self.u0.iter().chain(&self.alpha0).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(HarnessError::Config(format!("{what}: non-finite initial data")));
        }
        for (name, v) in [("u0", &self.u0), ("alpha0", &self.alpha0)] {
            if (l2(v) - 1.0).abs() > 1e-12 {
                return Err(HarnessError::Config(format!("{what}: {name} must have unit norm (got {})", l2(v))));
            }
        }
        Ok(())
    }
}

pub(crate) fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn unit(v: Vec<C64>) -> Vec<C64> {
    let n = l2(&v);
    v.into_iter().map(|z| z / n).collect()
}

/// Everything an experiment needs. Missing JSON fields take their default values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub classical_grid: GridConfig,
    pub classical_initial: InitialData,
    /// Small grid used by every Fock-space experiment.
    pub quantum_grid: GridConfig,
    pub quantum_initial: InitialData,
    pub horizon: f64,
    pub dt: f64,
    /// Strang steps compared in the order experiment; each must divide the horizon.
    pub order_steps: Vec<f64>,
    pub picard_horizon: f64,
    pub picard_tolerance: f64,
    pub picard_max_iterations: usize,
    pub lambdas: Vec<f64>,
    /// Observation time of the lambda sweeps.
    pub sample_time: f64,
    pub fluct_times: Vec<f64>,
    pub one_particle_times: Vec<f64>,
    pub deltas: Vec<f64>,
    pub identity_levels: Vec<usize>,
    pub theta_levels: Vec<usize>,
    pub theta_samples: usize,
    pub expm_tolerance: f64,
    pub dyson_tolerance: f64,
    pub tail_tolerance: f64,
    pub identity_tail: f64,
    /// Occupation caps of the bases used for the fluctuation dynamics.
    pub fluct_cap: usize,
    pub bound_cap: usize,
    pub limit_cap: usize,
    /// Extra boson quanta above the coherent-tail estimate.
    pub cap_margin: usize,
    pub theta_boson_margin: usize,
    pub panel_size: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let classical_grid = GridConfig::default();
        let cg = ModeGrid::new(classical_grid.clone()).expect("default grid is valid");
        let h = cg.cell_volume();
        let raw: Vec<C64> = cg.positions().iter().map(|p| C64::new(p[0].cos().exp(), 0.3 * (2.0 * p[0]).sin())).collect();
        let u = unit(raw);
        let u0 = cg.fourier(&u).expect("grid sized").into_iter().map(|z| z * h.sqrt()).collect();
        let alpha0 = unit(
            cg.coupled_modes()
                .iter()
                .enumerate()
                .map(|(j, _)| C64::new(0.4 / (1.0 + j as f64), 0.1 * j as f64 - 0.15))
                .collect(),
        );
        let quantum_grid = GridConfig { points: 3, cutoff: 1.0, exclude_zero_mode: true, ..GridConfig::default() };
        Self {
            classical_grid,
            classical_initial: InitialData { u0: unit(u0), alpha0 },
            quantum_grid,
            quantum_initial: InitialData {
                u0: unit(vec![C64::new(0.7, 0.0), C64::new(0.5, 0.2), C64::new(0.0, -0.3)]),
                alpha0: unit(vec![C64::new(0.5, 0.0), C64::new(0.0, 0.4)]),
            },
            horizon: 1.0,
            dt: 1e-3,
            order_steps: vec![0.02, 0.01, 0.005],
            picard_horizon: 0.2,
            picard_tolerance: 1e-10,
            picard_max_iterations: 200,
            lambdas: vec![1.0, std::f64::consts::FRAC_1_SQRT_2, 0.5],
            sample_time: 0.5,
            fluct_times: vec![0.25, 0.5, 1.0],
            one_particle_times: vec![1.0],
            deltas: vec![1.0, 2.0, 4.0],
            identity_levels: vec![1, 2, 3],
            theta_levels: vec![1, 2, 3, 4],
            theta_samples: 64,
            expm_tolerance: 1e-13,
            dyson_tolerance: 1e-8,
            tail_tolerance: 1e-10,
            identity_tail: 1e-12,
            fluct_cap: 14,
            bound_cap: 10,
            limit_cap: 10,
            cap_margin: 4,
            theta_boson_margin: 16,
            panel_size: 5,
            seed: 20240607,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("{name} must be positive (got {v})")))
    }
}

fn divides(name: &str, step: f64, horizon: f64) -> Result<(), HarnessError> {
    let n = horizon / step;
    if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
        return Err(HarnessError::Config(format!("{name} = {step} does not divide {horizon}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.classical_initial.check(&self.classical_grid, "classical")?;
        self.quantum_initial.check(&self.quantum_grid, "quantum")?;
        for (name, v) in [
            ("horizon", self.horizon),
            ("dt", self.dt),
            ("picard_horizon", self.picard_horizon),
            ("picard_tolerance", self.picard_tolerance),
            ("sample_time", self.sample_time),
            ("expm_tolerance", self.expm_tolerance),
            ("dyson_tolerance", self.dyson_tolerance),
            ("tail_tolerance", self.tail_tolerance),
            ("identity_tail", self.identity_tail),
        ] {
            positive(name, v)?;
        }
        divides("dt", self.dt, self.horizon)?;
        divides("dt", self.dt, self.picard_horizon)?;
        for &s in &self.order_steps {
            positive("order step", s)?;
            divides("order step", s, self.horizon)?;
        }
        if self.order_steps.len() < 2 {
            return Err(HarnessError::Config("order_steps needs at least two entries".into()));
        }
        if self.lambdas.len() < 2 {
            return Err(HarnessError::Config("lambdas needs at least two entries".into()));
        }
        for &l in &self.lambdas {
            positive("lambda", l)?;
        }
        for &t in self.fluct_times.iter().chain(&self.one_particle_times) {
            if !(t > 0.0 && t <= self.horizon) {
                return Err(HarnessError::Config(format!("time {t} outside (0, horizon]")));
            }
        }
        if self.sample_time > self.horizon {
            return Err(HarnessError::Config("sample_time exceeds horizon".into()));
        }
        for &d in &self.deltas {
            if !d.is_finite() {
                return Err(HarnessError::Config("non-finite delta".into()));
            }
        }
        // Theta states fix i = j = lambda^{-2}, so the levels are positive integers.
        if self.identity_levels.iter().chain(&self.theta_levels).any(|&i| i == 0) {
            return Err(HarnessError::Config("theta levels must be positive".into()));
        }
        if self.theta_samples < 2 || !self.theta_samples.is_multiple_of(2) {
            return Err(HarnessError::Config("theta_samples must be even and at least 2".into()));
        }
        if self.panel_size == 0 {
            return Err(HarnessError::Config("panel_size must be positive".into()));
        }
        for (name, cap) in [("fluct_cap", self.fluct_cap), ("bound_cap", self.bound_cap), ("limit_cap", self.limit_cap)] {
            if cap < 3 {
                return Err(HarnessError::Config(format!("{name} must be at least 3")));
            }
        }
        Ok(())
    }

    /// Canonical JSON text: keys sorted at every level, no whitespace.
    pub fn canonical_json(&self) -> String {
        // serde_json::Value keeps object keys in a BTreeMap, so round-tripping sorts them.
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Deterministic sub-seed for one experiment and point.
    pub fn sub_seed(&self, experiment: &str, point: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(experiment.as_bytes());
        h.update(point.to_le_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}
