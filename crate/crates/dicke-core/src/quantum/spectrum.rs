use super::basis::{build_basis, BasisState, Sector};
use super::eigen::{diagonalize, Eigen};
use super::hamiltonian::hamiltonian_matrix;
use crate::{Error, ModelParams, Result};
use faer::Mat;
use std::collections::BTreeMap;

/// Observables whose expectation values are tabulated per eigenstate. All
/// four are diagonal in the product basis, so ⟨A⟩ = Σ_i v_i²·a_i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Observable {
    BosonNumber,
    J3,
    MOp,
    Parity,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::BosonNumber,
        Observable::J3,
        Observable::MOp,
        Observable::Parity,
    ];

    fn diagonal(self, params: &ModelParams, state: &BasisState) -> f64 {
        match self {
            Observable::BosonNumber => state.n as f64,
            Observable::J3 => state.m(),
            Observable::MOp => state.m_total(params) as f64,
            Observable::Parity => state.parity(params) as f64,
        }
    }
}

/// Diagonalized sector: ascending energies, eigenvector columns in basis
/// order, and the per-state expectation tables.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub params: ModelParams,
    pub sector: Sector,
    pub basis: Vec<BasisState>,
    pub energies: Vec<f64>,
    pub vectors: Mat<f64>,
    expectations: BTreeMap<Observable, Vec<f64>>,
}

impl Spectrum {
    /// Build basis, assemble and diagonalize the sector Hamiltonian, and
    /// tabulate observable expectations.
    pub fn compute(params: &ModelParams, sector: &Sector) -> Result<Spectrum> {
        let basis = build_basis(params, sector)?;
        let h = hamiltonian_matrix(params, &basis)?;
        let Eigen { values, vectors } = diagonalize(&h)?;
        Ok(Self::from_parts(*params, *sector, basis, values, vectors))
    }

    pub(crate) fn from_parts(
        params: ModelParams,
        sector: Sector,
        basis: Vec<BasisState>,
        energies: Vec<f64>,
        vectors: Mat<f64>,
    ) -> Spectrum {
        let mut expectations = BTreeMap::new();
        for obs in Observable::ALL {
            let diag: Vec<f64> = basis.iter().map(|s| obs.diagonal(&params, s)).collect();
            let values = (0..energies.len())
                .map(|k| {
                    (0..basis.len())
                        .map(|i| vectors[(i, k)] * vectors[(i, k)] * diag[i])
                        .sum()
                })
                .collect();
            expectations.insert(obs, values);
        }
        Spectrum { params, sector, basis, energies, vectors, expectations }
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Per-state expectation values of one observable, in energy order.
    pub fn expectations(&self, observable: Observable) -> &[f64] {
        &self.expectations[&observable]
    }

    /// |⟨ref|ψ_k⟩|² for every eigenstate. Sums to one by completeness.
    pub fn localization_overlap(&self, reference: &BasisState) -> Result<Vec<f64>> {
        let idx = self
            .basis
            .iter()
            .position(|s| s == reference)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "reference state (n={}, m_twice={}) not in sector {}",
                    reference.n, reference.m_twice, self.sector
                ))
            })?;
        Ok((0..self.len())
            .map(|k| {
                let c = self.vectors[(idx, k)];
                c * c
            })
            .collect())
    }

    /// Largest deviation of the eigenvector Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let dot: f64 = (0..n)
                    .map(|i| self.vectors[(i, a)] * self.vectors[(i, b)])
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }
}
