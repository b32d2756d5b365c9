#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use nelson_core::fock::{apply_ladder, FockBasis, Ladder, QuantumState, Species};
use nelson_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = DMatrix<C64>;

/// Matrix of a single ladder operator, column by column.
pub fn ladder(basis: &Arc<FockBasis>, species: Species, kind: Ladder, mode: usize) -> Dense {
    let n = basis.dim();
    let mut m = Dense::zeros(n, n);
    for j in 0..n {
        let mut e = QuantumState::zeros(basis);
        e.amps[j] = C64::new(1.0, 0.0);
        let (col, _) = apply_ladder(&e, species, kind, mode).unwrap();
        for i in 0..n {
            m[(i, j)] = col.amps[i];
        }
    }
    m
}

pub struct Ladders {
    pub psi: Vec<Dense>,
    pub psi_dag: Vec<Dense>,
    pub a: Vec<Dense>,
    pub a_dag: Vec<Dense>,
}

impl Ladders {
    pub fn new(basis: &Arc<FockBasis>) -> Self {
        let l = |s, k, count| (0..count).map(|m| ladder(basis, s, k, m)).collect::<Vec<_>>();
        Self {
            psi: l(Species::Particle, Ladder::Annihilate, basis.psi_modes()),
            psi_dag: l(Species::Particle, Ladder::Create, basis.psi_modes()),
            a: l(Species::Boson, Ladder::Annihilate, basis.boson_modes()),
            a_dag: l(Species::Boson, Ladder::Create, basis.boson_modes()),
        }
    }
}

pub fn csr_dense(op: &nelson_core::hamiltonian::OperatorRep) -> Dense {
    op.to_dense(4000).unwrap()
}

pub fn max_abs(m: &Dense) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub fn random_state(rng: &mut ChaCha8Rng, basis: &Arc<FockBasis>) -> QuantumState {
    QuantumState::from_amps(basis, random_vec(rng, basis.dim())).unwrap().normalized()
}

pub fn apply(m: &Dense, s: &QuantumState) -> QuantumState {
    let v = m * nalgebra::DVector::from_column_slice(&s.amps);
    s.with_amps(v.iter().cloned().collect())
}
