mod common;

use std::sync::Arc;

use nelson_core::fock::{FockBasis, QuantumState};
use nelson_core::observables::{classical_product, normal_ordered_average, rate_fit, NormalOrderSpec};
use nelson_core::states::{build_state, coherent_state, d_factor, required_cap, theta_identity, StateSpec};
use nelson_core::C64;
use proptest::prelude::*;

fn unit(v: &[C64]) -> Vec<C64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|z| z / n).collect()
}

fn data() -> (Vec<C64>, Vec<C64>) {
    (unit(&[C64::new(0.7, 0.0), C64::new(0.5, 0.2), C64::new(0.0, -0.3)]), unit(&[C64::new(0.5, 0.0), C64::new(0.0, 0.4)]))
}

#[test]
fn d_factor_values() {
    // d_1 = e^{1/2}, d_2 = sqrt(2) e / 2
    assert!((d_factor(1) - 0.5f64.exp()).abs() < 1e-14);
    assert!((d_factor(2) - 2f64.sqrt() * 1f64.exp() / 2.0).abs() < 1e-14);
    // Stirling: d_x ~ (2 pi x)^{1/4}
    let x = 400u64;
    assert!((d_factor(x) / (2.0 * std::f64::consts::PI * x as f64).powf(0.25) - 1.0).abs() < 1e-3);
}

#[test]
fn unit_sector_of_coherent_state_is_product() {
    let (u0, a0) = data();
    let basis = Arc::new(FockBasis::new(3, 2, 1, 14).unwrap());
    let coh = coherent_state(&basis, &u0, &a0, 1e-10);
    // The particle cap of 1 truncates the Poisson tail heavily; the sector amplitudes are exact regardless.
    assert!(coh.is_err());
    let big = Arc::new(FockBasis::new(3, 2, 14, 14).unwrap());
    let coh = coherent_state(&big, &u0, &a0, 1e-10).unwrap();
    let proj = coh.sector_project(1, 1);
    let product = build_state(&big, StateSpec::Theta { i: 1, j: 1 }, &u0, &a0, 1e-10).unwrap();
    let scaled = proj.with_amps(proj.amps.iter().map(|z| z * 1f64.exp()).collect());
    assert!(scaled.distance(&product).unwrap() < 1e-13);
    for (p, &up) in u0.iter().enumerate() {
        for (k, &ak) in a0.iter().enumerate() {
            let mut po = [0u8; 3];
            let mut ao = [0u8; 2];
            po[p] = 1;
            ao[k] = 1;
            let i = big.index_of(&po, &ao).unwrap();
            assert!((product.amps[i] - up * ak).norm() < 1e-14);
        }
    }
}

#[test]
fn coherent_mean_particle_number() {
    let (u0, a0) = data();
    for i in [1usize, 2, 4] {
        let s = (i as f64).sqrt();
        let f: Vec<C64> = u0.iter().map(|z| z * s).collect();
        let g: Vec<C64> = a0.iter().map(|z| z * s).collect();
        let cap = required_cap(i as f64, 1e-12);
        let basis = Arc::new(FockBasis::new(3, 2, cap, cap).unwrap());
        let lam = coherent_state(&basis, &f, &g, 1e-10).unwrap();
        let n1: f64 = lam.amps.iter().zip(basis.particle_numbers()).map(|(z, &n)| z.norm_sqr() * n as f64).sum();
        assert!((n1 - i as f64).abs() < 1e-9, "{n1}");
    }
}

#[test]
fn theta_identity_needs_nodes_beyond_the_boson_cap() {
    let (u0, a0) = data();
    for x in [1usize, 2, 3] {
        let cap = required_cap(x as f64, 1e-12);
        let basis = Arc::new(FockBasis::new(3, 2, x, cap).unwrap());
        let r = theta_identity(&basis, &u0, &a0, x, cap + 1).unwrap();
        assert!(r.projection_residual <= 1e-10 && r.quadrature_residual <= 1e-10 && r.tail <= 1e-12, "{r:?}");
        // With 8x nodes the sector N2 = 9x aliases onto N2 = x.
        if 9 * x <= cap {
            let coarse = theta_identity(&basis, &u0, &a0, x, 8 * x).unwrap();
            assert!(coarse.quadrature_residual > 1e-8, "{coarse:?}");
        }
    }
}

#[test]
fn theta_number_average_at_time_zero() {
    let (u0, a0) = data();
    for i in [1usize, 2, 3] {
        let lambda = 1.0 / (i as f64).sqrt();
        let basis = Arc::new(FockBasis::new(3, 2, i, i + 2).unwrap());
        let theta = build_state(&basis, StateSpec::Theta { i, j: i }, &u0, &a0, 1e-12).unwrap();
        let spec = NormalOrderSpec { psi_create: vec![u0.clone()], psi_annihilate: vec![u0.clone()], ..Default::default() };
        let v = normal_ordered_average(&theta, &spec, lambda).unwrap();
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-13, "{i} {v}");
        assert!((classical_product(&spec, &u0, &a0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn coherent_average_factorizes() {
    let (u0, a0) = data();
    let lambda = 0.5;
    let f: Vec<C64> = u0.iter().map(|z| z / lambda).collect();
    let g: Vec<C64> = a0.iter().map(|z| z / lambda).collect();
    let cap = required_cap(4.0, 1e-14) + 2;
    let basis = Arc::new(FockBasis::new(3, 2, cap, cap).unwrap());
    let lam = coherent_state(&basis, &f, &g, 1e-12).unwrap();
    let mut rng = common::rng(2);
    let spec = NormalOrderSpec {
        psi_create: vec![common::random_vec(&mut rng, 3)],
        psi_annihilate: vec![common::random_vec(&mut rng, 3)],
        boson_annihilate: vec![common::random_vec(&mut rng, 2)],
        boson_create: vec![common::random_vec(&mut rng, 2)],
    };
    let q = normal_ordered_average(&lam, &spec, lambda).unwrap();
    let c = classical_product(&spec, &u0, &a0).unwrap();
    assert!((q - c).norm() < 1e-8 * c.norm().max(1.0), "{q} {c}");
}

#[test]
fn unbalanced_monomials_vanish_on_fixed_particle_number() {
    let (u0, a0) = data();
    let basis = Arc::new(FockBasis::new(3, 2, 2, 12).unwrap());
    let psi = build_state(&basis, StateSpec::Particles { i: 2, j: 2 }, &u0, &a0, 1e-4).unwrap();
    let spec = NormalOrderSpec { psi_create: vec![u0.clone(), u0.clone()], psi_annihilate: vec![u0.clone()], ..Default::default() };
    assert_eq!(normal_ordered_average(&psi, &spec, 1.0).unwrap(), C64::new(0.0, 0.0));
}

#[test]
fn mixed_power_law_slope_lies_between() {
    let l = [1.0, 0.707, 0.5];
    let e: Vec<f64> = l.iter().map(|x| 0.3 * x + 0.5 * x * x).collect();
    let f = rate_fit(&l, &e).unwrap();
    assert!(f.slope > 1.0 && f.slope < 2.0);
}

#[test]
fn vacuum_basics() {
    let basis = Arc::new(FockBasis::new(3, 2, 2, 2).unwrap());
    let v = QuantumState::vacuum(&basis);
    assert_eq!(v.norm(), 1.0);
    assert_eq!(v.number_norm(4.0), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn states_are_normalized(i in 1usize..4, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let u0 = unit(&common::random_vec(&mut rng, 3));
        let a0 = unit(&common::random_vec(&mut rng, 2));
        let cap = required_cap(i as f64, 1e-12);
        let basis = Arc::new(FockBasis::new(3, 2, cap, cap).unwrap());
        for spec in [StateSpec::Coherent { i, j: i }, StateSpec::Particles { i, j: i }, StateSpec::Theta { i, j: i }] {
            let s = build_state(&basis, spec, &u0, &a0, 1e-10).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn swapping_creators_and_annihilators_conjugates(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let basis = Arc::new(FockBasis::new(3, 2, 3, 3).unwrap());
        let x = common::random_state(&mut rng, &basis);
        let (g1, g2, g3) = (common::random_vec(&mut rng, 3), common::random_vec(&mut rng, 3), common::random_vec(&mut rng, 2));
        let spec = NormalOrderSpec { psi_create: vec![g1.clone(), g2.clone()], psi_annihilate: vec![g2.clone()], boson_create: vec![], boson_annihilate: vec![g3.clone()] };
        let swapped = NormalOrderSpec { psi_create: vec![g2.clone()], psi_annihilate: vec![g1, g2], boson_create: vec![g3], boson_annihilate: vec![] };
        let (a, b) = (normal_ordered_average(&x, &spec, 0.7).unwrap(), normal_ordered_average(&x, &swapped, 0.7).unwrap());
        prop_assert!((a - b.conj()).norm() < 1e-12);
    }
}
