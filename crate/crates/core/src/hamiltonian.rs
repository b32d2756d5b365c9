//! Second-quantized operators on the truncated Fock space.
//!
//! Particle modes are the lattice momenta (node order); boson modes are the
//! coupled momenta in the order of [`ModeGrid::coupled_modes`]. Every operator
//! here is a linear combination of ladder monomials, each compressed to the
//! basis as a table with at most one source column per row.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::fock::{FockBasis, Ladder, Species};
use crate::lattice::ModeGrid;
use crate::numerics::expm::SpectralBounds;
use crate::numerics::PAR_THRESHOLD;
use crate::{Error, Result, C64};

const EMPTY: u32 = u32::MAX;

/// Ordered product of ladder operators; the last factor acts first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<(Species, Ladder, usize)>);

/// Compression of a monomial to the basis: row i picks `weight[i] * x[source[i]]`.
#[derive(Clone, Debug)]
pub struct MonomialTable {
    source: Vec<u32>,
    weight: Vec<f64>,
}

impl MonomialTable {
    pub fn build(basis: &FockBasis, monomial: &Monomial) -> Result<Self> {
        for &(s, _, mode) in &monomial.0 {
            let count = basis.species(s).modes();
            if mode >= count {
                return Err(Error::InvalidMode { mode, count });
            }
        }
        let row = |i: usize| -> (u32, f64) {
            let (po, ao) = basis.occupations(i);
            let mut p = po.to_vec();
            let mut a = ao.to_vec();
            let mut amp = 1.0f64;
            // Walk from the bra towards the ket: the leftmost factor is undone first.
            for &(s, l, mode) in &monomial.0 {
                let occ = match s {
                    Species::Particle => &mut p[mode],
                    Species::Boson => &mut a[mode],
                };
                match l {
                    Ladder::Create => {
                        if *occ == 0 {
                            return (EMPTY, 0.0);
                        }
                        amp *= (*occ as f64).sqrt();
                        *occ -= 1;
                    }
                    Ladder::Annihilate => {
                        *occ += 1;
                        amp *= (*occ as f64).sqrt();
                    }
                }
            }
            match basis.index_of(&p, &a) {
                Some(j) => (j as u32, amp),
                None => (EMPTY, 0.0),
            }
        };
        let pairs: Vec<(u32, f64)> = if basis.dim() >= PAR_THRESHOLD {
            (0..basis.dim()).into_par_iter().map(row).collect()
        } else {
            (0..basis.dim()).map(row).collect()
        };
        let (source, weight) = pairs.into_iter().unzip();
        Ok(Self { source, weight })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn entry(&self, row: usize) -> Option<(usize, f64)> {
        let s = self.source[row];
        (s != EMPTY).then(|| (s as usize, self.weight[row]))
    }
}

/// Matrix-free operator `diag + sum_t c_t T_t`, optionally conjugated by a diagonal weight.
#[derive(Clone, Debug)]
pub struct TermOperator {
    basis: Arc<FockBasis>,
    diagonal: Option<Arc<Vec<f64>>>,
    tables: Vec<Arc<MonomialTable>>,
    coeffs: Vec<C64>,
    weights: Option<Arc<Vec<f64>>>,
}

impl TermOperator {
    pub fn new(basis: &Arc<FockBasis>, diagonal: Option<Arc<Vec<f64>>>, tables: Vec<Arc<MonomialTable>>, coeffs: Vec<C64>) -> Result<Self> {
        if tables.len() != coeffs.len() {
            return Err(Error::SizeMismatch { expected: tables.len(), got: coeffs.len() });
        }
        if let Some(d) = &diagonal {
            if d.len() != basis.dim() {
                return Err(Error::SizeMismatch { expected: basis.dim(), got: d.len() });
            }
        }
        Ok(Self { basis: basis.clone(), diagonal, tables, coeffs, weights: None })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Returns W A W for the diagonal weight W.
    pub fn with_weights(mut self, weights: Arc<Vec<f64>>) -> Result<Self> {
        if weights.len() != self.dim() {
            return Err(Error::SizeMismatch { expected: self.dim(), got: weights.len() });
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn scaled(mut self, c: f64) -> Self {
        if let Some(d) = &self.diagonal {
            self.diagonal = Some(Arc::new(d.iter().map(|v| v * c).collect()));
        }
        for z in &mut self.coeffs {
            *z *= c;
        }
        self
    }

    /// Sum of two operators on the same basis; weights are not supported here.
    pub fn plus(&self, other: &TermOperator) -> Result<Self> {
        if !Arc::ptr_eq(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        if self.weights.is_some() || other.weights.is_some() {
            return Err(Error::InvalidArgument("cannot add weighted operators".into()));
        }
        let diagonal = match (&self.diagonal, &other.diagonal) {
            (Some(a), Some(b)) => Some(Arc::new(a.iter().zip(b.iter()).map(|(x, y)| x + y).collect())),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        let mut tables = self.tables.clone();
        tables.extend(other.tables.iter().cloned());
        let mut coeffs = self.coeffs.clone();
        coeffs.extend(other.coeffs.iter().cloned());
        Ok(Self { basis: self.basis.clone(), diagonal, tables, coeffs, weights: None })
    }

    fn row_value(&self, i: usize, x: &[C64]) -> C64 {
        let mut acc = match &self.diagonal {
            Some(d) => x[i] * d[i],
            None => C64::new(0.0, 0.0),
        };
        for (t, c) in self.tables.iter().zip(&self.coeffs) {
            let s = t.source[i];
            if s != EMPTY {
                acc += c * (t.weight[i] * x[s as usize]);
            }
        }
        acc
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let weighted;
        let xin: &[C64] = match &self.weights {
            Some(w) => {
                weighted = x.iter().zip(w.iter()).map(|(z, wi)| z * wi).collect::<Vec<_>>();
                &weighted
            }
            None => x,
        };
        let fill = |(i, yi): (usize, &mut C64)| {
            let v = self.row_value(i, xin);
            *yi = match &self.weights {
                Some(w) => v * w[i],
                None => v,
            };
        };
        if y.len() >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(fill);
        } else {
            y.iter_mut().enumerate().for_each(fill);
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// Gershgorin enclosure of the spectrum; meaningful for hermitian operators.
    pub fn gershgorin(&self) -> SpectralBounds {
        let row = |i: usize| -> (f64, f64) {
            let wi = self.weights.as_ref().map_or(1.0, |w| w[i]);
            let mut center = 0.0;
            let mut radius = 0.0;
            if let Some(d) = &self.diagonal {
                center += d[i] * wi * wi;
            }
            for (t, c) in self.tables.iter().zip(&self.coeffs) {
                let s = t.source[i];
                if s == EMPTY {
                    continue;
                }
                let ws = self.weights.as_ref().map_or(1.0, |w| w[s as usize]);
                let v = c * (t.weight[i] * wi * ws);
                if s as usize == i {
                    center += v.re;
                } else {
                    radius += v.norm();
                }
            }
            (center - radius, center + radius)
        };
        let fold = |a: (f64, f64), b: (f64, f64)| (a.0.min(b.0), a.1.max(b.1));
        let (lower, upper) = if self.dim() >= PAR_THRESHOLD {
            (0..self.dim()).into_par_iter().map(row).reduce(|| (f64::INFINITY, f64::NEG_INFINITY), fold)
        } else {
            (0..self.dim()).map(row).fold((f64::INFINITY, f64::NEG_INFINITY), fold)
        };
        SpectralBounds { lower, upper }
    }

    /// Assembles the operator as a CSR matrix with merged duplicates.
    pub fn to_csr(&self) -> OperatorRep {
        let n = self.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut entries: Vec<(u32, C64)> = Vec::new();
        for i in 0..n {
            entries.clear();
            let wi = self.weights.as_ref().map_or(1.0, |w| w[i]);
            if let Some(d) = &self.diagonal {
                entries.push((i as u32, C64::new(d[i] * wi * wi, 0.0)));
            }
            for (t, c) in self.tables.iter().zip(&self.coeffs) {
                let s = t.source[i];
                if s != EMPTY {
                    let ws = self.weights.as_ref().map_or(1.0, |w| w[s as usize]);
                    entries.push((s, c * (t.weight[i] * wi * ws)));
                }
            }
            entries.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < entries.len() {
                let col = entries[k].0;
                let mut v = C64::new(0.0, 0.0);
                while k < entries.len() && entries[k].0 == col {
                    v += entries[k].1;
                    k += 1;
                }
                if v != C64::new(0.0, 0.0) {
                    cols.push(col);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        OperatorRep { basis: self.basis.clone(), row_ptr, cols, vals }
    }
}

/// Sparse matrix in compressed row storage.
#[derive(Clone, Debug)]
pub struct OperatorRep {
    basis: Arc<FockBasis>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl OperatorRep {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let fill = |(i, yi): (usize, &mut C64)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        };
        if y.len() >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(fill);
        } else {
            y.iter_mut().enumerate().for_each(fill);
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// max |A_ij - conj(A_ji)| over stored entries of either triangle.
    pub fn hermiticity_residual(&self) -> f64 {
        (0..self.dim())
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// max |A_ij + conj(A_ji)|; zero for anti-hermitian operators.
    pub fn antihermiticity_residual(&self) -> f64 {
        (0..self.dim())
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v + self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self, max_dim: usize) -> Result<DMatrix<C64>> {
        let n = self.dim();
        if n > max_dim {
            return Err(Error::DenseTooLarge { dim: n, max: max_dim });
        }
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for i in 0..n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Writes `i, j, re, im` for every stored entry.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "re", "im"])?;
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                w.write_record([i.to_string(), j.to_string(), format!("{:.16e}", v.re), format!("{:.16e}", v.im)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_layout(basis: &FockBasis, grid: &ModeGrid) -> Result<()> {
    if basis.psi_modes() != grid.nodes() {
        return Err(Error::SizeMismatch { expected: grid.nodes(), got: basis.psi_modes() });
    }
    if basis.boson_modes() != grid.coupled_modes().len() {
        return Err(Error::SizeMismatch { expected: grid.coupled_modes().len(), got: basis.boson_modes() });
    }
    Ok(())
}

/// Diagonal of H0 = sum_q E_q psi_q^* psi_q + sum_k omega_k a_k^* a_k.
pub fn free_energies(basis: &FockBasis, grid: &ModeGrid) -> Result<Vec<f64>> {
    check_layout(basis, grid)?;
    let e = grid.kinetic();
    let w: Vec<f64> = grid.coupled_modes().iter().map(|&k| grid.omega()[k]).collect();
    Ok((0..basis.dim())
        .map(|i| {
            let (po, ao) = basis.occupations(i);
            po.iter().zip(e).map(|(&n, &eq)| n as f64 * eq).sum::<f64>() + ao.iter().zip(&w).map(|(&n, &wk)| n as f64 * wk).sum::<f64>()
        })
        .collect())
}

pub fn build_free(basis: &Arc<FockBasis>, grid: &ModeGrid) -> Result<TermOperator> {
    let d = free_energies(basis, grid)?;
    TermOperator::new(basis, Some(Arc::new(d)), Vec::new(), Vec::new())
}

/// Monomials of the interaction sum_{k, q} f0(k) [a_k psi^*_{q+k} psi_q + a_k^* psi^*_{q-k} psi_q].
pub fn interaction_monomials(grid: &ModeGrid) -> Vec<(f64, Monomial)> {
    let mut out = Vec::new();
    for (slot, &k) in grid.coupled_modes().iter().enumerate() {
        let f = grid.form_factor()[k];
        for q in 0..grid.nodes() {
            out.push((
                f,
                Monomial(vec![(Species::Boson, Ladder::Annihilate, slot), (Species::Particle, Ladder::Create, grid.shift(q, k, 1)), (Species::Particle, Ladder::Annihilate, q)]),
            ));
            out.push((
                f,
                Monomial(vec![(Species::Boson, Ladder::Create, slot), (Species::Particle, Ladder::Create, grid.shift(q, k, -1)), (Species::Particle, Ladder::Annihilate, q)]),
            ));
        }
    }
    out
}

/// H_I without the coupling constant.
pub fn build_interaction(basis: &Arc<FockBasis>, grid: &ModeGrid) -> Result<TermOperator> {
    check_layout(basis, grid)?;
    let monos = interaction_monomials(grid);
    let tables = monos.par_iter().map(|(_, m)| MonomialTable::build(basis, m).map(Arc::new)).collect::<Result<Vec<_>>>()?;
    let coeffs = monos.iter().map(|(f, _)| C64::new(*f, 0.0)).collect();
    TermOperator::new(basis, None, tables, coeffs)
}

/// H = H0 + lambda H_I.
pub fn build_hamiltonian(basis: &Arc<FockBasis>, grid: &ModeGrid, lambda: f64) -> Result<TermOperator> {
    build_free(basis, grid)?.plus(&build_interaction(basis, grid)?.scaled(lambda))
}

/// Weights of the smooth number cutoff sigma(N / nu) on each basis vector, N = N1 + N2.
pub fn sigma_weights(basis: &FockBasis, nu: f64) -> Vec<f64> {
    basis.particle_numbers().iter().zip(basis.boson_numbers()).map(|(&p, &n)| smoothstep((p as f64 + n as f64) / nu)).collect()
}

/// Indicator of N1 <= nu and N2 <= nu.
pub fn sharp_weights(basis: &FockBasis, nu: usize) -> Vec<f64> {
    basis
        .particle_numbers()
        .iter()
        .zip(basis.boson_numbers())
        .map(|(&p, &n)| if (p as usize) <= nu && (n as usize) <= nu { 1.0 } else { 0.0 })
        .collect()
}

/// C^1 step equal to 1 on [0, 1] and 0 on [2, inf).
pub fn smoothstep(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let x = s - 1.0;
        1.0 - 3.0 * x * x + 2.0 * x * x * x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    Schrodinger,
    Interaction,
}

#[derive(Clone, Debug)]
enum TermKind {
    /// psi^*_p psi_q with the potential matrix element.
    Hop { p: usize, q: usize },
    /// f0 conj(u_{q+k}) psi_q a_k
    PairAnnihilate { q: usize, slot: usize },
    /// f0 u_{q+k} psi^*_q a^*_k
    PairCreate { q: usize, slot: usize },
    /// f0 u_q psi^*_{q+k} a_k
    Emit { q: usize, slot: usize },
    /// f0 conj(u_q) a^*_k psi_{q+k}
    Absorb { q: usize, slot: usize },
}

/// Quadratic generator of the fluctuation dynamics around a classical solution.
#[derive(Clone, Debug)]
pub struct FluctuationGenerator {
    basis: Arc<FockBasis>,
    grid: ModeGrid,
    kinds: Vec<TermKind>,
    tables: Vec<Arc<MonomialTable>>,
}

impl FluctuationGenerator {
    pub fn new(basis: &Arc<FockBasis>, grid: &ModeGrid) -> Result<Self> {
        check_layout(basis, grid)?;
        let m = grid.nodes();
        let mut kinds = Vec::new();
        let mut monos = Vec::new();
        let mut hops = std::collections::BTreeSet::new();
        for &k in grid.coupled_modes() {
            for q in 0..m {
                hops.insert((grid.shift(q, k, 1), q));
                hops.insert((grid.shift(q, k, -1), q));
            }
        }
        for &(p, q) in &hops {
            kinds.push(TermKind::Hop { p, q });
            monos.push(Monomial(vec![(Species::Particle, Ladder::Create, p), (Species::Particle, Ladder::Annihilate, q)]));
        }
        for (slot, &k) in grid.coupled_modes().iter().enumerate() {
            for q in 0..m {
                let qk = grid.shift(q, k, 1);
                kinds.push(TermKind::PairAnnihilate { q, slot });
                monos.push(Monomial(vec![(Species::Particle, Ladder::Annihilate, q), (Species::Boson, Ladder::Annihilate, slot)]));
                kinds.push(TermKind::PairCreate { q, slot });
                monos.push(Monomial(vec![(Species::Particle, Ladder::Create, q), (Species::Boson, Ladder::Create, slot)]));
                kinds.push(TermKind::Emit { q, slot });
                monos.push(Monomial(vec![(Species::Particle, Ladder::Create, qk), (Species::Boson, Ladder::Annihilate, slot)]));
                kinds.push(TermKind::Absorb { q, slot });
                monos.push(Monomial(vec![(Species::Boson, Ladder::Create, slot), (Species::Particle, Ladder::Annihilate, qk)]));
            }
        }
        let tables = monos.par_iter().map(|mono| MonomialTable::build(basis, mono).map(Arc::new)).collect::<Result<Vec<_>>>()?;
        Ok(Self { basis: basis.clone(), grid: grid.clone(), kinds, tables })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn term_count(&self) -> usize {
        self.kinds.len()
    }

    /// Coefficients for particle mode amplitudes `u` and coupled boson amplitudes `alpha` at time `t`.
    pub fn coefficients(&self, u: &[C64], alpha: &[C64], t: f64, picture: Picture) -> Result<Vec<C64>> {
        let g = &self.grid;
        let coupled = g.coupled_modes();
        if u.len() != g.nodes() {
            return Err(Error::SizeMismatch { expected: g.nodes(), got: u.len() });
        }
        if alpha.len() != coupled.len() {
            return Err(Error::SizeMismatch { expected: coupled.len(), got: alpha.len() });
        }
        let e = g.kinetic();
        let omega = |slot: usize| g.omega()[coupled[slot]];
        let f0 = |slot: usize| g.form_factor()[coupled[slot]];
        let phase = |x: f64| match picture {
            Picture::Schrodinger => C64::new(1.0, 0.0),
            Picture::Interaction => C64::from_polar(1.0, x * t),
        };
        Ok(self
            .kinds
            .iter()
            .map(|kind| match *kind {
                TermKind::Hop { p, q } => {
                    let mut w = C64::new(0.0, 0.0);
                    for (slot, &k) in coupled.iter().enumerate() {
                        if g.shift(q, k, 1) == p {
                            w += alpha[slot] * f0(slot);
                        }
                        if g.shift(q, k, -1) == p {
                            w += alpha[slot].conj() * f0(slot);
                        }
                    }
                    w * phase(e[p] - e[q])
                }
                TermKind::PairAnnihilate { q, slot } => {
                    let qk = g.shift(q, coupled[slot], 1);
                    u[qk].conj() * f0(slot) * phase(-(e[q] + omega(slot)))
                }
                TermKind::PairCreate { q, slot } => {
                    let qk = g.shift(q, coupled[slot], 1);
                    u[qk] * f0(slot) * phase(e[q] + omega(slot))
                }
                TermKind::Emit { q, slot } => {
                    let qk = g.shift(q, coupled[slot], 1);
                    u[q] * f0(slot) * phase(e[qk] - omega(slot))
                }
                TermKind::Absorb { q, slot } => {
                    let qk = g.shift(q, coupled[slot], 1);
                    u[q].conj() * f0(slot) * phase(omega(slot) - e[qk])
                }
            })
            .collect())
    }

    pub fn operator(&self, u: &[C64], alpha: &[C64], t: f64, picture: Picture) -> Result<TermOperator> {
        let c = self.coefficients(u, alpha, t, picture)?;
        TermOperator::new(&self.basis, None, self.tables.clone(), c)
    }
}

/// Anti-hermitian generator psi^*(f) - psi(conj f) + a^*(g) - a(conj g) of the Weyl operator,
/// returned as the hermitian K with generator = -i K.
pub fn weyl_generator(basis: &Arc<FockBasis>, f: &[C64], g: &[C64]) -> Result<TermOperator> {
    if f.len() != basis.psi_modes() {
        return Err(Error::SizeMismatch { expected: basis.psi_modes(), got: f.len() });
    }
    if g.len() != basis.boson_modes() {
        return Err(Error::SizeMismatch { expected: basis.boson_modes(), got: g.len() });
    }
    let mut monos = Vec::new();
    let mut coeffs = Vec::new();
    let i = C64::new(0.0, 1.0);
    for (species, amps) in [(Species::Particle, f), (Species::Boson, g)] {
        for (mode, &z) in amps.iter().enumerate() {
            if z == C64::new(0.0, 0.0) {
                continue;
            }
            monos.push(Monomial(vec![(species, Ladder::Create, mode)]));
            coeffs.push(i * z);
            monos.push(Monomial(vec![(species, Ladder::Annihilate, mode)]));
            coeffs.push(-i * z.conj());
        }
    }
    let tables = monos.par_iter().map(|m| MonomialTable::build(basis, m).map(Arc::new)).collect::<Result<Vec<_>>>()?;
    TermOperator::new(basis, None, tables, coeffs)
}
