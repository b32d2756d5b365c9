use std::path::Path;
use std::sync::Arc;

use nelson_core::fock::{apply_ladder, ccr_residual, FockBasis, Ladder, QuantumState, Species};
use nelson_core::hamiltonian::build_hamiltonian;
use nelson_core::numerics::expm::ExpmOptions;
use nelson_core::observables::{normal_ordered_average, ExperimentResult, NormalOrderSpec};
use nelson_core::propagate::evolve_full;
use nelson_core::states::{build_state, StateSpec};
use nelson_core::C64;
use rand_chacha::ChaCha8Rng;

use super::{random_unit, rng, QuantumSetup};
use crate::output::{csv_path, fmt, Table};
use crate::{HarnessError, RunConfig};

const SPECIES: [Species; 2] = [Species::Particle, Species::Boson];

fn random_state(rng: &mut ChaCha8Rng, basis: &Arc<FockBasis>) -> QuantumState {
    QuantumState::from_amps(basis, random_unit(rng, basis.dim())).expect("sized to the basis")
}

type Dense = Vec<Vec<C64>>;

fn dense_ladder(basis: &Arc<FockBasis>, species: Species, ladder: Ladder, mode: usize) -> Result<Dense, HarnessError> {
    let n = basis.dim();
    let mut m = vec![vec![C64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        let mut e = QuantumState::zeros(basis);
        e.amps[j] = C64::new(1.0, 0.0);
        let (col, _) = apply_ladder(&e, species, ladder, mode)?;
        for (i, z) in col.amps.iter().enumerate() {
            m[i][j] = *z;
        }
    }
    Ok(m)
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut c = vec![vec![C64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn add_scaled(acc: &mut Dense, c: f64, m: &Dense) {
    for (ra, rm) in acc.iter_mut().zip(m) {
        for (x, y) in ra.iter_mut().zip(rm) {
            *x += y * c;
        }
    }
}

/// Hamiltonian assembled from products of dense ladder matrices.
fn dense_hamiltonian(setup: &QuantumSetup, basis: &Arc<FockBasis>, lambda: f64) -> Result<Dense, HarnessError> {
    let grid = &setup.grid;
    let n = basis.dim();
    let mut h = vec![vec![C64::new(0.0, 0.0); n]; n];
    let mut psi = Vec::new();
    let mut psi_dag = Vec::new();
    for q in 0..grid.nodes() {
        psi.push(dense_ladder(basis, Species::Particle, Ladder::Annihilate, q)?);
        psi_dag.push(dense_ladder(basis, Species::Particle, Ladder::Create, q)?);
        add_scaled(&mut h, grid.kinetic()[q], &matmul(&psi_dag[q], &psi[q]));
    }
    for (slot, &k) in grid.coupled_modes().iter().enumerate() {
        let a = dense_ladder(basis, Species::Boson, Ladder::Annihilate, slot)?;
        let a_dag = dense_ladder(basis, Species::Boson, Ladder::Create, slot)?;
        add_scaled(&mut h, grid.omega()[k], &matmul(&a_dag, &a));
        let f = lambda * grid.form_factor()[k];
        for q in 0..grid.nodes() {
            let up = grid.shift(q, k, 1);
            let down = grid.shift(q, k, -1);
            add_scaled(&mut h, f, &matmul(&matmul(&psi_dag[up], &psi[q]), &a));
            add_scaled(&mut h, f, &matmul(&matmul(&psi_dag[down], &psi[q]), &a_dag));
        }
    }
    Ok(h)
}

pub fn ccr(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let setup = QuantumSetup::new(config)?;
    let (np, nb) = (setup.grid.nodes(), setup.grid.coupled_modes().len());
    let mut res = ExperimentResult::new("ccr");
    let mut table = Table::new(&["check", "dimension", "residual"]);
    let mut rng = rng(config, "ccr", 0);
    for cap in [4usize, 14] {
        let basis = Arc::new(FockBasis::new(np, nb, cap, cap)?);
        let dim = basis.dim();
        let c = cap as u8;
        // Away from the caps: one more quantum in any mode stays inside the basis.
        let x = random_state(&mut rng, &basis).mask(|a, n| a < c && n < c).normalized();
        let y = random_state(&mut rng, &basis);
        let mut ccr_worst = 0.0f64;
        let mut comm_worst = 0.0f64;
        let mut adj_worst = 0.0f64;
        for species in SPECIES {
            let modes = basis.species(species).modes();
            for i in 0..modes {
                for j in 0..modes {
                    ccr_worst = ccr_worst.max(ccr_residual(&x, species, i, j)?);
                    let (ai, _) = apply_ladder(&x, species, Ladder::Annihilate, i)?;
                    let (aj, _) = apply_ladder(&x, species, Ladder::Annihilate, j)?;
                    let (ji, _) = apply_ladder(&ai, species, Ladder::Annihilate, j)?;
                    let (ij, _) = apply_ladder(&aj, species, Ladder::Annihilate, i)?;
                    comm_worst = comm_worst.max(ji.distance(&ij)?);
                }
                let (ax, _) = apply_ladder(&x, species, Ladder::Annihilate, i)?;
                let (cy, _) = apply_ladder(&y, species, Ladder::Create, i)?;
                adj_worst = adj_worst.max((y.inner(&ax)? - cy.inner(&x)?).norm());
            }
        }
        for (name, v) in [("canonical commutator", ccr_worst), ("annihilator commutator", comm_worst), ("adjointness", adj_worst)] {
            table.push(vec![name.to_string(), dim.to_string(), fmt(v)]);
            res.check_le(&format!("{name} dim={dim}"), v, 1e-12);
        }
    }

    let basis = Arc::new(FockBasis::new(np, nb, 3, 2)?);
    let lambda = 0.7;
    let dense = dense_hamiltonian(&setup, &basis, lambda)?;
    let h = build_hamiltonian(&basis, &setup.grid, lambda)?;
    let csr = h.to_csr();
    let mut entry_worst = 0.0f64;
    let mut apply_worst = 0.0f64;
    for j in 0..basis.dim() {
        let mut e = vec![C64::new(0.0, 0.0); basis.dim()];
        e[j] = C64::new(1.0, 0.0);
        let col = h.apply(&e);
        for i in 0..basis.dim() {
            entry_worst = entry_worst.max((csr.get(i, j) - dense[i][j]).norm());
            apply_worst = apply_worst.max((col[i] - dense[i][j]).norm());
        }
    }
    let dim = basis.dim();
    table.push(vec!["sparse entries vs dense".into(), dim.to_string(), fmt(entry_worst)]);
    table.push(vec!["matrix-free action vs dense".into(), dim.to_string(), fmt(apply_worst)]);
    table.push(vec!["hermiticity".into(), dim.to_string(), fmt(csr.hermiticity_residual())]);
    res.check_le("dimension of dense comparison", dim as f64, 200.0);
    res.check_le("sparse entries vs dense", entry_worst, 1e-14);
    res.check_le("matrix-free action vs dense", apply_worst, 1e-14);
    res.check_le("hermiticity", csr.hermiticity_residual(), 1e-14);
    table.write(&csv_path(out, "ccr"))?;
    Ok(res)
}

pub fn structural_zeros(config: &RunConfig, out: &Path) -> Result<ExperimentResult, HarnessError> {
    let setup = QuantumSetup::new(config)?;
    let (np, nb) = (setup.grid.nodes(), setup.grid.coupled_modes().len());
    let mut res = ExperimentResult::new("structural-zeros");
    let mut table = Table::new(&["check", "value"]);

    let basis = Arc::new(FockBasis::new(np, nb, 4, 4)?);
    let csr = build_hamiltonian(&basis, &setup.grid, std::f64::consts::FRAC_1_SQRT_2)?.to_csr();
    let (n1, n2) = (basis.particle_numbers(), basis.boson_numbers());
    let mut with_n1 = 0.0f64;
    let mut with_n2 = 0.0f64;
    for i in 0..csr.dim() {
        for (j, v) in csr.row(i) {
            // ([H, N]_{ij}) = H_ij (N_j - N_i)
            with_n1 = with_n1.max((v * (n1[j] as f64 - n1[i] as f64)).norm());
            with_n2 = with_n2.max((v * (n2[j] as f64 - n2[i] as f64)).norm());
        }
    }
    table.push(vec!["max |[H, N1]|".into(), fmt(with_n1)]);
    table.push(vec!["max |[H, N2]|".into(), fmt(with_n2)]);
    res.check_le("max |[H, N1]| entry", with_n1, 0.0);
    res.check("[H, N2] is nonzero", with_n2 > 0.0);

    let level = 2usize;
    let lambda = 1.0 / (level as f64).sqrt();
    let basis = Arc::new(FockBasis::new(np, nb, level + 1, level + 14)?);
    let mut g = rng(config, "structural-zeros", 0);
    let mut psi_fn = || random_unit(&mut g, np);
    let (x1, x2, x3) = (psi_fn(), psi_fn(), psi_fn());
    let mut g = rng(config, "structural-zeros", 1);
    let (k1, k2) = (random_unit(&mut g, nb), random_unit(&mut g, nb));
    // (q, r) with q != r, paired with assorted boson content.
    let specs = [
        ("q=1 r=0", NormalOrderSpec { psi_create: vec![x1.clone()], ..Default::default() }),
        ("q=0 r=1 l=1", NormalOrderSpec { psi_annihilate: vec![x2.clone()], boson_annihilate: vec![k1.clone()], ..Default::default() }),
        ("q=2 r=1 l=1", NormalOrderSpec { psi_create: vec![x1.clone(), x2.clone()], psi_annihilate: vec![x3.clone()], boson_annihilate: vec![k1.clone()], ..Default::default() }),
        ("q=1 r=2 h=1", NormalOrderSpec { psi_create: vec![x3.clone()], psi_annihilate: vec![x1.clone(), x2.clone()], boson_create: vec![k2.clone()], ..Default::default() }),
    ];
    let reference = NormalOrderSpec { psi_create: vec![x1.clone()], psi_annihilate: vec![x2.clone()], boson_annihilate: vec![k1.clone()], ..Default::default() };
    let opts = ExpmOptions { tolerance: config.expm_tolerance, ..Default::default() };
    for (family, spec) in [("Psi", StateSpec::Particles { i: level, j: level }), ("Theta", StateSpec::Theta { i: level, j: level })] {
        let state = build_state(&basis, spec, &setup.u0, &setup.alpha0, config.tail_tolerance)?;
        let (evolved, _) = evolve_full(&setup.grid, lambda, &state, config.sample_time, opts)?;
        for (label, s) in &specs {
            let v = normal_ordered_average(&evolved, s, lambda)?.norm();
            table.push(vec![format!("{family} {label}"), fmt(v)]);
            res.check_le(&format!("{family} {label} average"), v, 0.0);
        }
        let v = normal_ordered_average(&evolved, &reference, lambda)?.norm();
        table.push(vec![format!("{family} q=1 r=1 l=1"), fmt(v)]);
        res.note(&format!("{family} q=r reference magnitude"), v);
    }
    table.write(&csv_path(out, "structural-zeros"))?;
    Ok(res)
}
