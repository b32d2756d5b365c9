//! Truncated two-species bosonic Fock space.
//!
//! Each species keeps the occupation vectors with total at most its cap,
//! graded by total and ranked combinatorially within a total. The product
//! basis is ordered by sector (N1, N2), so every sector is a contiguous slice.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{self, PAR_THRESHOLD};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Species {
    /// The Schrodinger field psi.
    Particle,
    /// The boson field a.
    Boson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Occupation vectors of one species with total at most `cap`.
#[derive(Clone, Debug)]
pub struct SpeciesBasis {
    modes: usize,
    cap: usize,
    /// compositions[s][k]: number of ways to put s quanta into k modes.
    compositions: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    occupations: Vec<u8>,
}

impl SpeciesBasis {
    pub fn new(modes: usize, cap: usize) -> Result<Self> {
        if cap > 250 {
            return Err(Error::InvalidArgument(format!("cap {cap} exceeds 250")));
        }
        let mut compositions = vec![vec![0usize; modes + 1]; cap + 1];
        compositions[0][0] = 1;
        for s in 0..=cap {
            for k in 1..=modes {
                // The first mode holds v quanta, the rest hold s - v.
                let mut c = 0usize;
                for v in 0..=s {
                    c = c.checked_add(compositions[s - v][k - 1]).ok_or_else(|| Error::InvalidArgument("basis too large".into()))?;
                }
                compositions[s][k] = c;
            }
        }
        let mut offsets = Vec::with_capacity(cap + 2);
        offsets.push(0);
        for s in 0..=cap {
            let next = offsets[s] + compositions[s][modes];
            offsets.push(next);
        }
        let dim = offsets[cap + 1];
        let mut occupations = vec![0u8; dim * modes];
        let mut basis = Self { modes, cap, compositions, offsets, occupations: Vec::new() };
        if modes > 0 {
            let mut occ = vec![0u8; modes];
            for s in 0..=cap {
                for local in 0..basis.sector_len(s) {
                    basis.unrank_into(s, local, &mut occ);
                    let idx = basis.offsets[s] + local;
                    occupations[idx * modes..(idx + 1) * modes].copy_from_slice(&occ);
                }
            }
        }
        basis.occupations = occupations;
        Ok(basis)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.cap + 1]
    }

    pub fn sector_len(&self, total: usize) -> usize {
        if total > self.cap {
            0
        } else {
            self.compositions[total][self.modes]
        }
    }

    pub fn sector_offset(&self, total: usize) -> usize {
        self.offsets[total.min(self.cap + 1)]
    }

    pub fn occupation(&self, idx: usize) -> &[u8] {
        &self.occupations[idx * self.modes..(idx + 1) * self.modes]
    }

    /// Rank of `occ` within its total; compositions are ordered lexicographically.
    pub fn local_rank(&self, occ: &[u8]) -> usize {
        let mut remaining: usize = occ.iter().map(|&n| n as usize).sum();
        let mut rank = 0;
        for (i, &n) in occ.iter().enumerate().take(self.modes.saturating_sub(1)) {
            let rest = self.modes - i - 1;
            for v in 0..n as usize {
                rank += self.compositions[remaining - v][rest];
            }
            remaining -= n as usize;
        }
        rank
    }

    /// Index of `occ` in this basis, or `None` when it exceeds the cap.
    pub fn rank(&self, occ: &[u8]) -> Option<usize> {
        let total: usize = occ.iter().map(|&n| n as usize).sum();
        if total > self.cap {
            return None;
        }
        Some(self.offsets[total] + self.local_rank(occ))
    }

    fn unrank_into(&self, total: usize, mut local: usize, occ: &mut [u8]) {
        let mut remaining = total;
        for i in 0..self.modes {
            let rest = self.modes - i - 1;
            if rest == 0 {
                occ[i] = remaining as u8;
                break;
            }
            let mut v = 0;
            loop {
                let c = self.compositions[remaining - v][rest];
                if local < c {
                    break;
                }
                local -= c;
                v += 1;
            }
            occ[i] = v as u8;
            remaining -= v;
        }
    }
}

/// Product basis of the particle and boson species.
#[derive(Clone, Debug)]
pub struct FockBasis {
    psi: SpeciesBasis,
    a: SpeciesBasis,
    sector_offsets: Vec<usize>,
    psi_of: Vec<u32>,
    a_of: Vec<u32>,
    n1: Vec<u8>,
    n2: Vec<u8>,
}

impl FockBasis {
    pub fn new(psi_modes: usize, boson_modes: usize, psi_cap: usize, boson_cap: usize) -> Result<Self> {
        let psi = SpeciesBasis::new(psi_modes, psi_cap)?;
        let a = SpeciesBasis::new(boson_modes, boson_cap)?;
        let mut sector_offsets = Vec::with_capacity((psi_cap + 1) * (boson_cap + 1) + 1);
        let mut total = 0usize;
        for p in 0..=psi_cap {
            for n in 0..=boson_cap {
                sector_offsets.push(total);
                total = psi.sector_len(p).checked_mul(a.sector_len(n)).and_then(|c| total.checked_add(c)).ok_or_else(|| Error::InvalidArgument("basis too large".into()))?;
            }
        }
        sector_offsets.push(total);
        if total > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("basis dimension {total} exceeds the index range")));
        }
        let mut psi_of = Vec::with_capacity(total);
        let mut a_of = Vec::with_capacity(total);
        let mut n1 = Vec::with_capacity(total);
        let mut n2 = Vec::with_capacity(total);
        for p in 0..=psi_cap {
            for n in 0..=boson_cap {
                for lp in 0..psi.sector_len(p) {
                    for ln in 0..a.sector_len(n) {
                        psi_of.push((psi.sector_offset(p) + lp) as u32);
                        a_of.push((a.sector_offset(n) + ln) as u32);
                        n1.push(p as u8);
                        n2.push(n as u8);
                    }
                }
            }
        }
        Ok(Self { psi, a, sector_offsets, psi_of, a_of, n1, n2 })
    }

    pub fn dim(&self) -> usize {
        self.psi_of.len()
    }

    pub fn species(&self, s: Species) -> &SpeciesBasis {
        match s {
            Species::Particle => &self.psi,
            Species::Boson => &self.a,
        }
    }

    pub fn psi_modes(&self) -> usize {
        self.psi.modes
    }

    pub fn boson_modes(&self) -> usize {
        self.a.modes
    }

    pub fn psi_cap(&self) -> usize {
        self.psi.cap
    }

    pub fn boson_cap(&self) -> usize {
        self.a.cap
    }

    pub fn particle_numbers(&self) -> &[u8] {
        &self.n1
    }

    pub fn boson_numbers(&self) -> &[u8] {
        &self.n2
    }

    pub fn occupations(&self, idx: usize) -> (&[u8], &[u8]) {
        (self.psi.occupation(self.psi_of[idx] as usize), self.a.occupation(self.a_of[idx] as usize))
    }

    /// Contiguous index range of sector (N1 = p, N2 = n).
    pub fn sector_range(&self, p: usize, n: usize) -> std::ops::Range<usize> {
        if p > self.psi.cap || n > self.a.cap {
            return 0..0;
        }
        let s = p * (self.a.cap + 1) + n;
        self.sector_offsets[s]..self.sector_offsets[s + 1]
    }

    /// Index of a product occupation, or `None` if either species exceeds its cap.
    pub fn index_of(&self, psi_occ: &[u8], a_occ: &[u8]) -> Option<usize> {
        let p: usize = psi_occ.iter().map(|&v| v as usize).sum();
        let n: usize = a_occ.iter().map(|&v| v as usize).sum();
        if p > self.psi.cap || n > self.a.cap {
            return None;
        }
        let lp = self.psi.local_rank(psi_occ);
        let ln = self.a.local_rank(a_occ);
        Some(self.sector_range(p, n).start + lp * self.a.sector_len(n) + ln)
    }

    fn check_mode(&self, species: Species, mode: usize) -> Result<()> {
        let count = self.species(species).modes;
        if mode >= count {
            return Err(Error::InvalidMode { mode, count });
        }
        Ok(())
    }
}

/// A vector in a truncated Fock space.
#[derive(Clone, Debug)]
pub struct QuantumState {
    basis: Arc<FockBasis>,
    pub amps: Vec<C64>,
}

impl QuantumState {
    pub fn zeros(basis: &Arc<FockBasis>) -> Self {
        Self { basis: basis.clone(), amps: vec![C64::new(0.0, 0.0); basis.dim()] }
    }

    pub fn vacuum(basis: &Arc<FockBasis>) -> Self {
        let mut s = Self::zeros(basis);
        s.amps[0] = C64::new(1.0, 0.0);
        s
    }

    pub fn from_amps(basis: &Arc<FockBasis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::SizeMismatch { expected: basis.dim(), got: amps.len() });
        }
        Ok(Self { basis: basis.clone(), amps })
    }

    /// Single basis vector with the given occupations.
    pub fn basis_vector(basis: &Arc<FockBasis>, psi_occ: &[u8], a_occ: &[u8]) -> Result<Self> {
        if psi_occ.len() != basis.psi_modes() || a_occ.len() != basis.boson_modes() {
            return Err(Error::InvalidArgument("occupation length does not match the mode count".into()));
        }
        let idx = basis.index_of(psi_occ, a_occ).ok_or_else(|| Error::InvalidArgument("occupation exceeds the caps".into()))?;
        let mut s = Self::zeros(basis);
        s.amps[idx] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn with_amps(&self, amps: Vec<C64>) -> Self {
        assert_eq!(amps.len(), self.amps.len());
        Self { basis: self.basis.clone(), amps }
    }

    pub fn norm(&self) -> f64 {
        numerics::norm(&self.amps)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for z in &mut self.amps {
                *z /= n;
            }
        }
        self
    }

    pub fn inner(&self, other: &QuantumState) -> Result<C64> {
        self.same_basis(other)?;
        Ok(numerics::inner(&self.amps, &other.amps))
    }

    pub fn distance(&self, other: &QuantumState) -> Result<f64> {
        self.same_basis(other)?;
        Ok(numerics::distance(&self.amps, &other.amps))
    }

    pub fn same_basis(&self, other: &QuantumState) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis.dim() == other.basis.dim() && self.basis.psi_cap() == other.basis.psi_cap() && self.basis.boson_cap() == other.basis.boson_cap() && self.basis.psi_modes() == other.basis.psi_modes() && self.basis.boson_modes() == other.basis.boson_modes() {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// Keeps only sector (N1 = p, N2 = n).
    pub fn sector_project(&self, p: usize, n: usize) -> Self {
        let mut out = Self::zeros(&self.basis);
        let r = self.basis.sector_range(p, n);
        out.amps[r.clone()].copy_from_slice(&self.amps[r]);
        out
    }

    /// Keeps the components with exactly `p` particles.
    pub fn particle_project(&self, p: usize) -> Self {
        self.mask(|n1, _| n1 as usize == p)
    }

    pub fn mask<F: Fn(u8, u8) -> bool + Sync>(&self, keep: F) -> Self {
        let b = &self.basis;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, z)| if keep(b.n1[i], b.n2[i]) { *z } else { C64::new(0.0, 0.0) })
            .collect();
        self.with_amps(amps)
    }

    /// Weighted norm ||(N + 1)^{delta/2} Phi|| with N the total number operator.
    pub fn number_norm(&self, delta: f64) -> f64 {
        let b = &self.basis;
        self.amps
            .iter()
            .enumerate()
            .map(|(i, z)| z.norm_sqr() * (b.n1[i] as f64 + b.n2[i] as f64 + 1.0).powf(delta))
            .sum::<f64>()
            .sqrt()
    }

    /// Weight outside the states with N1 <= p_max and N2 <= n_max.
    pub fn tail_weight(&self, p_max: usize, n_max: usize) -> f64 {
        self.mask(|n1, n2| n1 as usize > p_max || n2 as usize > n_max).norm().powi(2)
    }

    /// Re-expresses the state in `target`, which must have the same mode counts.
    /// Returns the state and the weight that did not fit.
    pub fn embed(&self, target: &Arc<FockBasis>) -> Result<(QuantumState, f64)> {
        if target.psi_modes() != self.basis.psi_modes() || target.boson_modes() != self.basis.boson_modes() {
            return Err(Error::BasisMismatch);
        }
        let mut out = QuantumState::zeros(target);
        let mut lost = 0.0;
        for (i, z) in self.amps.iter().enumerate() {
            if *z == C64::new(0.0, 0.0) {
                continue;
            }
            let (po, ao) = self.basis.occupations(i);
            match target.index_of(po, ao) {
                Some(j) => out.amps[j] = *z,
                None => lost += z.norm_sqr(),
            }
        }
        Ok((out, lost))
    }
}

/// Applies a single creation or annihilation operator of `species` at `mode`.
/// Returns the new state and the squared norm that creation pushed past the cap.
pub fn apply_ladder(state: &QuantumState, species: Species, ladder: Ladder, mode: usize) -> Result<(QuantumState, f64)> {
    let basis = state.basis.clone();
    basis.check_mode(species, mode)?;
    let sb = basis.species(species);
    let b = &*basis;
    let x = &state.amps;
    let row = |i: usize| -> C64 {
        let (po, ao) = b.occupations(i);
        let mut buf = match species {
            Species::Particle => po.to_vec(),
            Species::Boson => ao.to_vec(),
        };
        let n = buf[mode];
        let amp = match ladder {
            Ladder::Annihilate => {
                // Row i receives from the state with one more quantum in `mode`.
                let total: usize = buf.iter().map(|&v| v as usize).sum();
                if total + 1 > sb.cap {
                    return C64::new(0.0, 0.0);
                }
                buf[mode] = n + 1;
                ((n as f64) + 1.0).sqrt()
            }
            Ladder::Create => {
                if n == 0 {
                    return C64::new(0.0, 0.0);
                }
                buf[mode] = n - 1;
                (n as f64).sqrt()
            }
        };
        let j = match species {
            Species::Particle => b.index_of(&buf, ao),
            Species::Boson => b.index_of(po, &buf),
        }
        .expect("source state lies inside the basis");
        x[j] * amp
    };
    let amps: Vec<C64> = if b.dim() >= PAR_THRESHOLD {
        (0..b.dim()).into_par_iter().map(row).collect()
    } else {
        (0..b.dim()).map(row).collect()
    };
    let leakage = match ladder {
        Ladder::Annihilate => 0.0,
        Ladder::Create => {
            let cap = sb.cap as u8;
            (0..b.dim())
                .filter(|&i| match species {
                    Species::Particle => b.n1[i] == cap,
                    Species::Boson => b.n2[i] == cap,
                })
                .map(|i| {
                    let (po, ao) = b.occupations(i);
                    let n = match species {
                        Species::Particle => po[mode],
                        Species::Boson => ao[mode],
                    };
                    x[i].norm_sqr() * (n as f64 + 1.0)
                })
                .sum()
        }
    };
    Ok((QuantumState { basis, amps }, leakage))
}

/// Applies sum_j coeffs[j] * op_j, where op_j is the ladder operator on mode j.
pub fn apply_field(state: &QuantumState, species: Species, ladder: Ladder, coeffs: &[C64]) -> Result<(QuantumState, f64)> {
    let modes = state.basis.species(species).modes;
    if coeffs.len() != modes {
        return Err(Error::SizeMismatch { expected: modes, got: coeffs.len() });
    }
    let mut out = QuantumState::zeros(&state.basis);
    let mut leak_amps = 0.0;
    for (j, &c) in coeffs.iter().enumerate() {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let (term, leak) = apply_ladder(state, species, ladder, j)?;
        numerics::axpy(c, &term.amps, &mut out.amps);
        leak_amps += c.norm() * leak.sqrt();
    }
    Ok((out, leak_amps * leak_amps))
}

/// Residual ||([b_i, b_j^*] - delta_ij) Phi|| for one species.
pub fn ccr_residual(state: &QuantumState, species: Species, i: usize, j: usize) -> Result<f64> {
    let (cj, _) = apply_ladder(state, species, Ladder::Create, j)?;
    let (ab, _) = apply_ladder(&cj, species, Ladder::Annihilate, i)?;
    let (ai, _) = apply_ladder(state, species, Ladder::Annihilate, i)?;
    let (ba, _) = apply_ladder(&ai, species, Ladder::Create, j)?;
    let delta = if i == j { 1.0 } else { 0.0 };
    Ok(ab.amps.iter().zip(&ba.amps).zip(&state.amps).map(|((p, q), s)| (p - q - s * delta).norm_sqr()).sum::<f64>().sqrt())
}
