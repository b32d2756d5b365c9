mod common;

use std::sync::Arc;

use common::{Dense, Ladders};
use nelson_core::fock::FockBasis;
use nelson_core::hamiltonian::{build_hamiltonian, smoothstep, weyl_generator, FluctuationGenerator, Picture};
use nelson_core::lattice::{GridConfig, ModeGrid};
use nelson_core::C64;
use proptest::prelude::*;

fn quantum_grid() -> ModeGrid {
    ModeGrid::new(GridConfig { points: 3, cutoff: 1.0, exclude_zero_mode: true, ..GridConfig::default() }).unwrap()
}

/// Momentum index of label(q) + sign * label(k) for d = 1, FFT ordering.
fn add(grid: &ModeGrid, q: usize, k: usize, sign: i64) -> usize {
    (q as i64 + sign * k as i64).rem_euclid(grid.nodes() as i64) as usize
}

fn dense_hamiltonian(grid: &ModeGrid, basis: &Arc<FockBasis>, lambda: f64) -> Dense {
    let l = Ladders::new(basis);
    let n = basis.dim();
    let mut h = Dense::zeros(n, n);
    for q in 0..grid.nodes() {
        h += &l.psi_dag[q] * &l.psi[q] * C64::new(grid.kinetic()[q], 0.0);
    }
    for (slot, &k) in grid.coupled_modes().iter().enumerate() {
        h += &l.a_dag[slot] * &l.a[slot] * C64::new(grid.omega()[k], 0.0);
        let f = C64::new(lambda * grid.form_factor()[k], 0.0);
        for q in 0..grid.nodes() {
            // psi^*_{q+k} psi_q a_k and its adjoint psi^*_q psi_{q+k} a^*_k
            let hop = &l.psi_dag[add(grid, q, k, 1)] * &l.psi[q];
            h += &hop * &l.a[slot] * f;
            h += hop.adjoint() * &l.a_dag[slot] * f;
        }
    }
    h
}

/// Terms of H_I that are bilinear in the fluctuations after shifting psi -> u + psi, a -> alpha + a.
fn dense_fluctuation(grid: &ModeGrid, basis: &Arc<FockBasis>, u: &[C64], alpha: &[C64]) -> Dense {
    let l = Ladders::new(basis);
    let n = basis.dim();
    let mut v = Dense::zeros(n, n);
    for (slot, &k) in grid.coupled_modes().iter().enumerate() {
        let f = grid.form_factor()[k];
        for q in 0..grid.nodes() {
            let qk = add(grid, q, k, 1);
            let mut t = &l.psi_dag[qk] * &l.psi[q] * alpha[slot];
            t += &l.psi[q] * &l.a[slot] * u[qk].conj();
            t += &l.psi_dag[qk] * &l.a[slot] * u[q];
            v += (&t + t.adjoint()) * C64::new(f, 0.0);
        }
    }
    v
}

#[test]
fn two_mode_matrix_element() {
    let grid = ModeGrid::new(GridConfig { points: 1, ..GridConfig::default() }).unwrap();
    assert_eq!(grid.coupled_modes(), &[0]);
    let basis = Arc::new(FockBasis::new(1, 1, 2, 2).unwrap());
    let lambda = 0.6;
    let h = build_hamiltonian(&basis, &grid, lambda).unwrap().to_csr();
    let i = basis.index_of(&[1], &[1]).unwrap();
    let j = basis.index_of(&[1], &[0]).unwrap();
    let expect = lambda * grid.form_factor()[0];
    assert!((h.get(i, j) - C64::new(expect, 0.0)).norm() < 1e-15);
    assert!((h.get(j, i) - C64::new(expect, 0.0)).norm() < 1e-15);
}

#[test]
fn hamiltonian_matches_ladder_products() {
    for (grid, basis) in [
        (quantum_grid(), FockBasis::new(3, 2, 3, 2).unwrap()),
        (ModeGrid::new(GridConfig::default()).unwrap(), FockBasis::new(5, 5, 2, 1).unwrap()),
    ] {
        let basis = Arc::new(basis);
        assert!(basis.dim() <= 200);
        let op = build_hamiltonian(&basis, &grid, 0.8).unwrap();
        let csr = common::csr_dense(&op.to_csr());
        let dense = dense_hamiltonian(&grid, &basis, 0.8);
        assert!(common::max_abs(&(&csr - &dense)) <= 1e-14);
        let mut rng = common::rng(11);
        let x = common::random_vec(&mut rng, basis.dim());
        let y = op.apply(&x);
        let z = &dense * nalgebra::DVector::from_column_slice(&x);
        assert!(y.iter().zip(z.iter()).all(|(a, b)| (a - b).norm() <= 1e-14));
    }
}

#[test]
fn particle_number_commutes_exactly() {
    let grid = quantum_grid();
    let basis = Arc::new(FockBasis::new(3, 2, 4, 4).unwrap());
    let h = build_hamiltonian(&basis, &grid, 1.0).unwrap().to_csr();
    let n1 = basis.particle_numbers();
    for i in 0..h.dim() {
        for (j, _) in h.row(i) {
            assert_eq!(n1[i], n1[j]);
        }
    }
}

#[test]
fn fluctuation_generator_matches_shifted_expansion() {
    let grid = quantum_grid();
    let basis = Arc::new(FockBasis::new(3, 2, 3, 3).unwrap());
    let gen = FluctuationGenerator::new(&basis, &grid).unwrap();
    let u = [C64::new(0.5, 0.1), C64::new(-0.3, 0.4), C64::new(0.2, -0.6)];
    let alpha = [C64::new(0.7, -0.2), C64::new(0.1, 0.3)];
    let v = dense_fluctuation(&grid, &basis, &u, &alpha);
    let op = common::csr_dense(&gen.operator(&u, &alpha, 0.0, Picture::Schrodinger).unwrap().to_csr());
    assert!(common::max_abs(&(&op - &v)) <= 1e-14);

    // Interaction picture: e^{i H0 t} V e^{-i H0 t}.
    let t = 0.37;
    let e = nelson_core::hamiltonian::free_energies(&basis, &grid).unwrap();
    let mut rotated = v.clone();
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            rotated[(i, j)] *= C64::from_polar(1.0, (e[i] - e[j]) * t);
        }
    }
    let op = common::csr_dense(&gen.operator(&u, &alpha, t, Picture::Interaction).unwrap().to_csr());
    assert!(common::max_abs(&(&op - &rotated)) <= 1e-13);
}

#[test]
fn weyl_generator_is_field_combination() {
    let basis = Arc::new(FockBasis::new(3, 2, 3, 3).unwrap());
    let l = Ladders::new(&basis);
    let f = [C64::new(0.3, 0.2), C64::new(-0.1, 0.0), C64::new(0.0, 0.4)];
    let g = [C64::new(0.25, -0.5), C64::new(0.1, 0.1)];
    let n = basis.dim();
    let mut k = Dense::zeros(n, n);
    let i = C64::new(0.0, 1.0);
    for q in 0..3 {
        k += (&l.psi_dag[q] * f[q] - &l.psi[q] * f[q].conj()) * i;
    }
    for s in 0..2 {
        k += (&l.a_dag[s] * g[s] - &l.a[s] * g[s].conj()) * i;
    }
    let op = common::csr_dense(&weyl_generator(&basis, &f, &g).unwrap().to_csr());
    assert!(common::max_abs(&(&op - &k)) <= 1e-15);
}

#[test]
fn smoothstep_profile() {
    assert_eq!(smoothstep(0.3), 1.0);
    assert_eq!(smoothstep(2.5), 0.0);
    // sigma_1(1.5): half way through the transition.
    assert!((smoothstep(1.5) - 0.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fluctuation_generator_is_hermitian(seed in any::<u64>(), t in 0.0f64..2.0, interaction in any::<bool>()) {
        let grid = quantum_grid();
        let basis = Arc::new(FockBasis::new(3, 2, 3, 2).unwrap());
        let gen = FluctuationGenerator::new(&basis, &grid).unwrap();
        let mut rng = common::rng(seed);
        let u = common::random_vec(&mut rng, 3);
        let alpha = common::random_vec(&mut rng, 2);
        let picture = if interaction { Picture::Interaction } else { Picture::Schrodinger };
        let op = gen.operator(&u, &alpha, t, picture).unwrap().to_csr();
        prop_assert!(op.hermiticity_residual() <= 1e-14);
    }

    #[test]
    fn hamiltonian_is_hermitian(lambda in 0.0f64..3.0, pc in 1usize..4, bc in 1usize..4) {
        let basis = Arc::new(FockBasis::new(3, 2, pc, bc).unwrap());
        let op = build_hamiltonian(&basis, &quantum_grid(), lambda).unwrap().to_csr();
        prop_assert!(op.hermiticity_residual() <= 1e-14);
    }
}
