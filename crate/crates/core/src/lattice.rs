//! Periodic position/momentum lattice with a sharp ultraviolet cutoff.
//!
//! Nodes are stored row-major with axis 0 slowest. Along each axis the node
//! index `j` is the FFT index; its integer momentum label is `j` for
//! `j <= (M-1)/2` and `j - M` otherwise, so `k = 2*pi*label/L`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub dimension: usize,
    pub box_length: f64,
    /// Nodes per axis; must be odd.
    pub points: usize,
    pub boson_mass: f64,
    pub particle_mass: f64,
    /// Momentum cutoff sigma: modes with |k| <= sigma are coupled.
    pub cutoff: f64,
    /// Drop k = 0 from the coupled set. Required when the boson mass is zero.
    pub exclude_zero_mode: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dimension: 1,
            box_length: 2.0 * PI,
            points: 5,
            boson_mass: 1.0,
            particle_mass: 1.0,
            cutoff: 2.0,
            exclude_zero_mode: false,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGrid(msg));
        if !(1..=3).contains(&self.dimension) {
            return bad(format!("dimension must be 1, 2 or 3 (got {})", self.dimension));
        }
        if self.points == 0 || self.points.is_multiple_of(2) {
            return bad(format!("points per axis must be odd (got {})", self.points));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return bad(format!("box length must be positive (got {})", self.box_length));
        }
        if !(self.particle_mass.is_finite() && self.particle_mass > 0.0) {
            return bad(format!("particle mass must be positive (got {})", self.particle_mass));
        }
        if !(self.boson_mass.is_finite() && self.boson_mass >= 0.0) {
            return bad(format!("boson mass must be non-negative (got {})", self.boson_mass));
        }
        if !(self.cutoff.is_finite() && self.cutoff >= 0.0) {
            return bad(format!("cutoff must be non-negative (got {})", self.cutoff));
        }
        if self.boson_mass == 0.0 && !self.exclude_zero_mode {
            return bad("massless bosons require exclude_zero_mode (omega(0) = 0)".into());
        }
        Ok(())
    }
}

/// Precomputed lattice: momenta, dispersion, cutoff mask, coupling profile and FFT plans.
#[derive(Clone)]
pub struct ModeGrid {
    config: GridConfig,
    nodes: usize,
    labels: Vec<[i64; 3]>,
    momenta: Vec<[f64; 3]>,
    omega: Vec<f64>,
    kinetic: Vec<f64>,
    mask: Vec<bool>,
    form_factor: Vec<f64>,
    coupled: Vec<usize>,
    coupled_slot: Vec<Option<usize>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ModeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeGrid")
            .field("config", &self.config)
            .field("nodes", &self.nodes)
            .field("coupled", &self.coupled.len())
            .finish()
    }
}

impl ModeGrid {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let d = config.dimension;
        let mpa = config.points;
        let nodes = mpa.pow(d as u32);
        let half = (mpa as i64 - 1) / 2;
        let dk = 2.0 * PI / config.box_length;

        let mut labels = Vec::with_capacity(nodes);
        for idx in 0..nodes {
            let mut lab = [0i64; 3];
            let mut rem = idx;
            for axis in (0..d).rev() {
                let j = (rem % mpa) as i64;
                rem /= mpa;
                lab[axis] = if j <= half { j } else { j - mpa as i64 };
            }
            labels.push(lab);
        }
        let momenta: Vec<[f64; 3]> = labels
            .iter()
            .map(|l| [dk * l[0] as f64, dk * l[1] as f64, dk * l[2] as f64])
            .collect();
        let k2: Vec<f64> = momenta.iter().map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).collect();
        let mu2 = config.boson_mass * config.boson_mass;
        let omega: Vec<f64> = k2.iter().map(|&q| (q + mu2).sqrt()).collect();
        let kinetic: Vec<f64> = k2.iter().map(|&q| q / (2.0 * config.particle_mass)).collect();

        // A small slack keeps |k| = sigma inside despite rounding in 2*pi*n/L.
        let sigma = config.cutoff * (1.0 + 1e-12);
        let mask: Vec<bool> = labels
            .iter()
            .zip(&k2)
            .map(|(l, &q)| {
                let zero = l.iter().all(|&c| c == 0);
                q.sqrt() <= sigma && !(zero && config.exclude_zero_mode)
            })
            .collect();

        let c_chi = config.box_length.powf(-(d as f64) / 2.0);
        let form_factor: Vec<f64> = mask
            .iter()
            .zip(&omega)
            .map(|(&on, &w)| if on { c_chi / (2.0 * w).sqrt() } else { 0.0 })
            .collect();

        let mut coupled = Vec::new();
        let mut coupled_slot = vec![None; nodes];
        for (i, &on) in mask.iter().enumerate() {
            if on {
                coupled_slot[i] = Some(coupled.len());
                coupled.push(i);
            }
        }

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(mpa);
        let inverse = planner.plan_fft_inverse(mpa);

        Ok(Self {
            config,
            nodes,
            labels,
            momenta,
            omega,
            kinetic,
            mask,
            form_factor,
            coupled,
            coupled_slot,
            forward,
            inverse,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension
    }

    /// Total number of nodes m = M^d.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Volume of one lattice cell, (L/M)^d.
    pub fn cell_volume(&self) -> f64 {
        (self.config.box_length / self.config.points as f64).powi(self.config.dimension as i32)
    }

    /// Normalization constant of the coupling profile, L^{-d/2}.
    pub fn coupling_constant(&self) -> f64 {
        self.config.box_length.powf(-(self.config.dimension as f64) / 2.0)
    }

    pub fn labels(&self) -> &[[i64; 3]] {
        &self.labels
    }

    pub fn momenta(&self) -> &[[f64; 3]] {
        &self.momenta
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        let d = self.config.dimension;
        let mpa = self.config.points;
        let dx = self.config.box_length / mpa as f64;
        (0..self.nodes)
            .map(|idx| {
                let mut x = [0.0; 3];
                let mut rem = idx;
                for axis in (0..d).rev() {
                    x[axis] = dx * (rem % mpa) as f64;
                    rem /= mpa;
                }
                x
            })
            .collect()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Free particle energies k^2 / (2 M_p).
    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn cutoff_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Coupling profile f0(k) = L^{-d/2} (2 omega)^{-1/2} chi(k) on every momentum node.
    pub fn form_factor(&self) -> &[f64] {
        &self.form_factor
    }

    /// Node indices of the coupled boson modes, in node order.
    pub fn coupled_modes(&self) -> &[usize] {
        &self.coupled
    }

    /// Position of a node among the coupled modes.
    pub fn coupled_slot(&self, node: usize) -> Option<usize> {
        self.coupled_slot[node]
    }

    /// Node index of the momentum `label(p) + sign * label(q)`, wrapped periodically.
    pub fn shift(&self, p: usize, q: usize, sign: i64) -> usize {
        let mpa = self.config.points as i64;
        let lp = self.labels[p];
        let lq = self.labels[q];
        let mut idx = 0usize;
        for axis in 0..self.config.dimension {
            let j = (lp[axis] + sign * lq[axis]).rem_euclid(mpa);
            idx = idx * self.config.points + j as usize;
        }
        idx
    }

    /// Node index of `-label(p)`.
    pub fn negate(&self, p: usize) -> usize {
        let mut idx = 0usize;
        let mpa = self.config.points as i64;
        for axis in 0..self.config.dimension {
            let j = (-self.labels[p][axis]).rem_euclid(mpa);
            idx = idx * self.config.points + j as usize;
        }
        idx
    }

    /// Unitary forward transform, F(u)_k = m^{-1/2} sum_x u_x e^{-i k x}.
    pub fn fourier(&self, data: &[C64]) -> Result<Vec<C64>> {
        self.transform(data, true)
    }

    /// Unitary inverse of [`ModeGrid::fourier`].
    pub fn inverse_fourier(&self, data: &[C64]) -> Result<Vec<C64>> {
        self.transform(data, false)
    }

    fn transform(&self, data: &[C64], forward: bool) -> Result<Vec<C64>> {
        if data.len() != self.nodes {
            return Err(Error::SizeMismatch { expected: self.nodes, got: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("fourier input"));
        }
        let plan = if forward { &self.forward } else { &self.inverse };
        let mpa = self.config.points;
        let d = self.config.dimension;
        let mut out = data.to_vec();
        let mut line = vec![C64::new(0.0, 0.0); mpa];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..d {
            let stride = mpa.pow((d - 1 - axis) as u32);
            let block = stride * mpa;
            for base in (0..self.nodes).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = out[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        out[start + j * stride] = *v;
                    }
                }
            }
        }
        let scale = 1.0 / (self.nodes as f64).sqrt();
        for z in &mut out {
            *z *= scale;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(points: usize, dim: usize) -> ModeGrid {
        ModeGrid::new(GridConfig { dimension: dim, points, ..GridConfig::default() }).unwrap()
    }

    #[test]
    fn labels_follow_fft_order() {
        let g = grid(5, 1);
        let labels: Vec<i64> = g.labels().iter().map(|l| l[0]).collect();
        assert_eq!(labels, vec![0, 1, 2, -2, -1]);
        assert!((g.momenta()[3][0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn dispersion_and_mask() {
        let g = grid(5, 1);
        assert!((g.omega()[1] - 2f64.sqrt()).abs() < 1e-15);
        let g0 = ModeGrid::new(GridConfig { cutoff: 0.0, ..GridConfig::default() }).unwrap();
        assert_eq!(g0.coupled_modes(), &[0]);
        let ex = ModeGrid::new(GridConfig { cutoff: 0.0, exclude_zero_mode: true, ..GridConfig::default() }).unwrap();
        assert!(ex.coupled_modes().is_empty());
        assert!(ex.form_factor().iter().all(|&f| f == 0.0));
    }

    #[test]
    fn constant_transforms_to_zero_mode() {
        let g = grid(5, 1);
        let out = g.fourier(&[C64::new(1.0, 0.0); 5]).unwrap();
        assert!((out[0] - C64::new(5f64.sqrt(), 0.0)).norm() < 1e-14);
        assert!(out[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn plane_wave_lands_on_its_label() {
        let g = grid(5, 2);
        let x = g.positions();
        let target = 7; // labels (1, 2)
        let k = g.momenta()[target];
        let wave: Vec<C64> = x.iter().map(|p| C64::from_polar(1.0, k[0] * p[0] + k[1] * p[1])).collect();
        let out = g.fourier(&wave).unwrap();
        for (i, z) in out.iter().enumerate() {
            let want = if i == target { 5.0 } else { 0.0 };
            assert!((z.norm() - want).abs() < 1e-12, "node {i}: {z}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ModeGrid::new(GridConfig { points: 4, ..GridConfig::default() }).is_err());
        assert!(ModeGrid::new(GridConfig { dimension: 4, ..GridConfig::default() }).is_err());
        assert!(ModeGrid::new(GridConfig { boson_mass: 0.0, ..GridConfig::default() }).is_err());
        assert!(ModeGrid::new(GridConfig { boson_mass: 0.0, exclude_zero_mode: true, ..GridConfig::default() }).is_ok());
        let g = grid(5, 1);
        assert!(matches!(g.fourier(&[C64::new(1.0, 0.0); 3]), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn shift_wraps_periodically() {
        let g = grid(5, 1);
        // 2 + 1 wraps to -2, which is node 3.
        assert_eq!(g.shift(2, 1, 1), 3);
        assert_eq!(g.shift(0, 1, -1), 4);
        assert_eq!(g.negate(1), 4);
    }
}
