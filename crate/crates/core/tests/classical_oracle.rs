use std::f64::consts::PI;

use nelson_core::classical::{picard_solve, potential, state_from_modes, ClassicalSolver, ClassicalState, Splitting};
use nelson_core::lattice::{GridConfig, ModeGrid};
use nelson_core::observables::{theta_average, NormalOrderSpec};
use nelson_core::C64;
use proptest::prelude::*;

/// Grid quantities recomputed from the definitions, for d = 1.
struct Oracle {
    m: usize,
    energy: Vec<f64>,
    omega: Vec<f64>,
    f0: Vec<f64>,
}

impl Oracle {
    fn new(cfg: &GridConfig) -> Self {
        let m = cfg.points;
        let mut energy = Vec::new();
        let mut omega = Vec::new();
        let mut f0 = Vec::new();
        for j in 0..m {
            let label = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            let k = 2.0 * PI * label / cfg.box_length;
            let w = (k * k + cfg.boson_mass * cfg.boson_mass).sqrt();
            energy.push(k * k / (2.0 * cfg.particle_mass));
            omega.push(w);
            let coupled = k.abs() <= cfg.cutoff && !(cfg.exclude_zero_mode && label == 0.0);
            f0.push(if coupled { cfg.box_length.powf(-0.5) / (2.0 * w).sqrt() } else { 0.0 });
        }
        Self { m, energy, omega, f0 }
    }

    fn idx(&self, j: usize, k: usize, sign: i64) -> usize {
        (j as i64 + sign * k as i64).rem_euclid(self.m as i64) as usize
    }

    /// Right-hand side in momentum space; y = (u modes, alpha on every node).
    fn rhs(&self, y: &[C64]) -> Vec<C64> {
        let m = self.m;
        let (u, a) = y.split_at(m);
        let mi = C64::new(0.0, -1.0);
        let w: Vec<C64> = (0..m).map(|k| (a[k] + a[self.idx(0, k, -1)].conj()) * self.f0[k]).collect();
        let mut out = vec![C64::new(0.0, 0.0); 2 * m];
        for p in 0..m {
            let conv: C64 = (0..m).map(|k| w[k] * u[self.idx(p, k, -1)]).sum();
            out[p] = mi * (u[p] * self.energy[p] + conv);
        }
        for k in 0..m {
            let src: C64 = (0..m).map(|q| u[q].conj() * u[self.idx(q, k, 1)]).sum();
            out[m + k] = mi * (a[k] * self.omega[k] + src * self.f0[k]);
        }
        out
    }

    fn rk4(&self, y0: &[C64], horizon: f64, steps: usize) -> Vec<C64> {
        let h = horizon / steps as f64;
        let mut y = y0.to_vec();
        let add = |y: &[C64], k: &[C64], c: f64| -> Vec<C64> { y.iter().zip(k).map(|(a, b)| a + b * c).collect() };
        for _ in 0..steps {
            let k1 = self.rhs(&y);
            let k2 = self.rhs(&add(&y, &k1, h / 2.0));
            let k3 = self.rhs(&add(&y, &k2, h / 2.0));
            let k4 = self.rhs(&add(&y, &k3, h));
            for i in 0..y.len() {
                y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
            }
        }
        y
    }
}

fn pack(grid: &ModeGrid, s: &ClassicalState) -> Vec<C64> {
    let mut y = s.u_modes(grid).unwrap();
    y.extend_from_slice(&s.alpha);
    y
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn initial(grid: &ModeGrid, u: &[C64], alpha: &[C64]) -> ClassicalState {
    let n = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let u: Vec<C64> = u.iter().map(|z| z / n).collect();
    state_from_modes(grid, &u, alpha).unwrap()
}

fn generic(grid: &ModeGrid) -> ClassicalState {
    let u: Vec<C64> = (0..grid.nodes()).map(|j| C64::new(1.0 / (1.0 + j as f64), 0.2 * j as f64 - 0.3)).collect();
    let alpha: Vec<C64> = (0..grid.coupled_modes().len()).map(|j| C64::new(0.3 - 0.1 * j as f64, 0.15 * j as f64)).collect();
    initial(grid, &u, &alpha)
}

#[test]
fn grid_quantities_match_definitions() {
    for cfg in [GridConfig::default(), GridConfig { points: 7, box_length: 5.0, boson_mass: 0.5, cutoff: 2.0, exclude_zero_mode: true, ..GridConfig::default() }] {
        let grid = ModeGrid::new(cfg.clone()).unwrap();
        let o = Oracle::new(&cfg);
        for j in 0..o.m {
            assert!((grid.kinetic()[j] - o.energy[j]).abs() < 1e-14);
            assert!((grid.omega()[j] - o.omega[j]).abs() < 1e-14);
            assert!((grid.form_factor()[j] - o.f0[j]).abs() < 1e-14);
        }
    }
}

#[test]
fn cutoff_selects_low_modes() {
    let grid = ModeGrid::new(GridConfig { cutoff: 1.5, ..GridConfig::default() }).unwrap();
    let labels: Vec<i64> = grid.coupled_modes().iter().map(|&k| grid.labels()[k][0]).collect();
    assert_eq!(labels, vec![0, 1, -1]);
}

#[test]
fn strang_converges_to_oracle_at_second_order() {
    let cfg = GridConfig::default();
    let grid = ModeGrid::new(cfg.clone()).unwrap();
    let o = Oracle::new(&cfg);
    let init = generic(&grid);
    let horizon = 0.5;
    let exact = o.rk4(&pack(&grid, &init), horizon, 20_000);
    let strang = ClassicalSolver::new(&grid, Splitting::Strang);
    let e: Vec<f64> = [0.01, 0.005, 0.0025].iter().map(|&dt| dist(&pack(&grid, strang.solve(&init, horizon, dt).unwrap().last()), &exact)).collect();
    for w in e.windows(2) {
        let r = w[0] / w[1];
        assert!((3.2..=4.8).contains(&r), "ratio {r} from {e:?}");
    }
    let yoshida = ClassicalSolver::new(&grid, Splitting::Yoshida).solve(&init, horizon, 1e-3).unwrap();
    assert!(dist(&pack(&grid, yoshida.last()), &exact) < 1e-10);
}

#[test]
fn constant_particle_profile_matches_oracle() {
    let cfg = GridConfig::default();
    let grid = ModeGrid::new(cfg.clone()).unwrap();
    let o = Oracle::new(&cfg);
    let mut u = vec![C64::new(0.0, 0.0); grid.nodes()];
    u[0] = C64::new(1.0, 0.0);
    let alpha: Vec<C64> = (0..grid.coupled_modes().len()).map(|j| C64::new(0.1 * j as f64, 0.2)).collect();
    let init = initial(&grid, &u, &alpha);
    let exact = o.rk4(&pack(&grid, &init), 0.4, 20_000);
    let strang = ClassicalSolver::new(&grid, Splitting::Strang);
    let coarse = dist(&pack(&grid, strang.solve(&init, 0.4, 0.01).unwrap().last()), &exact);
    let fine = dist(&pack(&grid, strang.solve(&init, 0.4, 0.005).unwrap().last()), &exact);
    assert!(coarse / fine > 3.2 && coarse / fine < 4.8, "{coarse} {fine}");
}

#[test]
fn vanishing_particle_field_leaves_free_bosons() {
    let grid = ModeGrid::new(GridConfig::default()).unwrap();
    let alpha0: Vec<C64> = (0..grid.nodes()).map(|k| C64::new(0.2 * k as f64, -0.1)).collect();
    let init = ClassicalState { t: 0.0, u: vec![C64::new(0.0, 0.0); grid.nodes()], alpha: alpha0.clone() };
    let traj = ClassicalSolver::new(&grid, Splitting::Strang).solve(&init, 0.7, 0.01).unwrap();
    let end = traj.last();
    assert!(end.u.iter().all(|z| z.norm() == 0.0));
    for k in 0..grid.nodes() {
        let expect = alpha0[k] * C64::from_polar(1.0, -grid.omega()[k] * 0.7);
        assert!((end.alpha[k] - expect).norm() < 1e-13);
    }
}

#[test]
fn no_coupled_modes_gives_free_evolution() {
    let grid = ModeGrid::new(GridConfig { cutoff: 0.0, exclude_zero_mode: true, ..GridConfig::default() }).unwrap();
    assert!(grid.coupled_modes().is_empty());
    let u: Vec<C64> = (0..grid.nodes()).map(|j| C64::new(1.0, j as f64)).collect();
    let init = initial(&grid, &u, &[]);
    let traj = ClassicalSolver::new(&grid, Splitting::Yoshida).solve(&init, 1.0, 0.05).unwrap();
    let u0 = init.u_modes(&grid).unwrap();
    let u1 = traj.last().u_modes(&grid).unwrap();
    for q in 0..grid.nodes() {
        assert!((u1[q] - u0[q] * C64::from_polar(1.0, -grid.kinetic()[q])).norm() < 1e-13);
    }
}

#[test]
fn zero_mode_field_gives_constant_potential() {
    let cfg = GridConfig::default();
    let grid = ModeGrid::new(cfg.clone()).unwrap();
    let c = 0.37;
    let mut alpha = vec![C64::new(0.0, 0.0); grid.nodes()];
    alpha[0] = C64::new(c, 0.0);
    let expect = 2.0 * c * 2f64.powf(-0.5) * cfg.box_length.powf(-0.5);
    for v in potential(&grid, &alpha).unwrap() {
        assert!((v - expect).abs() < 1e-14);
    }
}

#[test]
fn picard_contracts_faster_on_shorter_horizons() {
    let grid = ModeGrid::new(GridConfig::default()).unwrap();
    let init = generic(&grid);
    let worst = |horizon: f64| {
        let sol = picard_solve(&grid, &init, horizon, 100, 1e-12, 200).unwrap();
        sol.contraction.iter().cloned().fold(0.0, f64::max)
    };
    let (long, short) = (worst(0.4), worst(0.1));
    assert!(short < long, "{short} {long}");
}

#[test]
fn theta_average_is_converged_in_node_count() {
    let grid = ModeGrid::new(GridConfig { points: 3, cutoff: 1.0, exclude_zero_mode: true, ..GridConfig::default() }).unwrap();
    let init = initial(&grid, &[C64::new(0.7, 0.0), C64::new(0.5, 0.2), C64::new(0.0, -0.3)], &[C64::new(0.8, 0.0), C64::new(0.0, 0.6)]);
    let u0 = init.u_modes(&grid).unwrap();
    let spec = NormalOrderSpec { psi_create: vec![u0.clone()], psi_annihilate: vec![u0], boson_annihilate: vec![init.coupled_alpha(&grid)], ..Default::default() };
    let solver = ClassicalSolver::new(&grid, Splitting::Yoshida);
    let coarse = theta_average(&spec, &grid, &solver.solve_theta_family(&init, 0.3, 1e-3, 16).unwrap(), 0.3).unwrap();
    let fine = theta_average(&spec, &grid, &solver.solve_theta_family(&init, 0.3, 1e-3, 32).unwrap(), 0.3).unwrap();
    assert!((coarse.value - fine.value).norm() < 1e-10);
    assert!(fine.refinement_gap < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn charge_is_conserved(re in proptest::collection::vec(-1.0f64..1.0, 5), im in proptest::collection::vec(-1.0f64..1.0, 5), a in proptest::collection::vec(-0.5f64..0.5, 10)) {
        let grid = ModeGrid::new(GridConfig::default()).unwrap();
        let u: Vec<C64> = re.iter().zip(&im).map(|(&x, &y)| C64::new(x, y)).collect();
        prop_assume!(u.iter().any(|z| z.norm() > 1e-3));
        let alpha: Vec<C64> = a.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        let init = initial(&grid, &u, &alpha);
        let traj = ClassicalSolver::new(&grid, Splitting::Strang).solve(&init, 0.2, 1e-3).unwrap();
        let q0 = init.charge(&grid);
        for s in &traj.states {
            prop_assert!((s.charge(&grid) - q0).abs() / q0 <= 1e-8);
        }
    }
}
