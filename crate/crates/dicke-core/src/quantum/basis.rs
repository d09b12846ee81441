use crate::{Error, ModelParams, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// One product state |n⟩ ⊗ |j, m⟩. The magnetic quantum number is stored
/// doubled so half-integer spins stay exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub n: u32,
    pub m_twice: i32,
}

impl BasisState {
    pub fn m(&self) -> f64 {
        self.m_twice as f64 / 2.0
    }

    /// M = n + m + j, the conserved excitation count at δ = 0.
    pub fn m_total(&self, params: &ModelParams) -> i64 {
        self.n as i64 + (self.m_twice as i64 + params.two_j as i64) / 2
    }

    /// Π = (−1)^(n+m+j).
    pub fn parity(&self, params: &ModelParams) -> i8 {
        if self.m_total(params) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    fn in_range(&self, params: &ModelParams) -> bool {
        self.m_twice.unsigned_abs() <= params.two_j
            && (self.m_twice.rem_euclid(2)) == (params.two_j as i32).rem_euclid(2)
    }
}

/// Symmetry sector of the Hamiltonian.
///
/// `MBlock(M)` is the block of fixed M = n + m + j, finite-dimensional and
/// exact for δ = 0. `ParityBlock` is the Π = ±1 sector truncated at boson
/// occupation `n_max`, the working basis once δ > 0 mixes the M blocks in
/// steps of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    MBlock(i64),
    ParityBlock { parity: i8, n_max: u32 },
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::MBlock(m) => write!(f, "M={m}"),
            Sector::ParityBlock { parity, n_max } => {
                write!(f, "parity={:+};n_max={}", parity, n_max)
            }
        }
    }
}

impl Sector {
    pub fn dimension(&self, params: &ModelParams) -> usize {
        match *self {
            Sector::MBlock(m) => {
                if m < 0 {
                    0
                } else {
                    (m.min(params.two_j as i64) + 1) as usize
                }
            }
            Sector::ParityBlock { parity, n_max } => {
                let mut dim = 0usize;
                for n in 0..=n_max as i64 {
                    let levels = params.two_j as i64 + 1;
                    // m index runs 0..=two_j; (−1)^(n + m_idx) must match
                    let wanted_even = (parity == 1) == (n % 2 == 0);
                    dim += if wanted_even {
                        ((levels + 1) / 2) as usize
                    } else {
                        (levels / 2) as usize
                    };
                }
                dim
            }
        }
    }
}

/// Enumerate the basis of a sector in deterministic order: ascending n,
/// then ascending m. In an M block this makes the co-rotating coupling
/// tridiagonal; in a parity block it keeps the matrix banded with bandwidth
/// ~ two_j + 2.
pub fn build_basis(params: &ModelParams, sector: &Sector) -> Result<Vec<BasisState>> {
    params.validate()?;
    let two_j = params.two_j as i64;
    match *sector {
        Sector::MBlock(m_total) => {
            if m_total < 0 {
                return Err(Error::Domain(format!(
                    "MBlock requires M >= 0, got {m_total}"
                )));
            }
            let n_min = (m_total - two_j).max(0);
            let mut basis = Vec::with_capacity((m_total - n_min + 1) as usize);
            for n in n_min..=m_total {
                // m + j = M − n
                let m_twice = (2 * (m_total - n) - two_j) as i32;
                basis.push(BasisState { n: n as u32, m_twice });
            }
            debug_assert_eq!(basis.len(), sector.dimension(params));
            Ok(basis)
        }
        Sector::ParityBlock { parity, n_max } => {
            if parity != 1 && parity != -1 {
                return Err(Error::Domain(format!(
                    "parity must be +1 or -1, got {parity}"
                )));
            }
            let mut basis = Vec::with_capacity(sector.dimension(params));
            for n in 0..=n_max as i64 {
                for m_idx in 0..=two_j {
                    let even = (n + m_idx) % 2 == 0;
                    if even == (parity == 1) {
                        basis.push(BasisState {
                            n: n as u32,
                            m_twice: (2 * m_idx - two_j) as i32,
                        });
                    }
                }
            }
            Ok(basis)
        }
    }
}

pub(crate) fn check_basis_in_range(params: &ModelParams, basis: &[BasisState]) -> Result<()> {
    for state in basis {
        if !state.in_range(params) {
            return Err(Error::Domain(format!(
                "basis state (n={}, m_twice={}) outside quasispin range two_j={}",
                state.n, state.m_twice, params.two_j
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(two_j: u32) -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.8, 0.0, two_j, two_j).unwrap()
    }

    #[test]
    fn spin_half_m_block() {
        let p = ModelParams::new(1.0, 1.0, 0.8, 0.0, 1, 1).unwrap();
        let basis = build_basis(&p, &Sector::MBlock(1)).unwrap();
        assert_eq!(
            basis,
            vec![
                BasisState { n: 0, m_twice: 1 },
                BasisState { n: 1, m_twice: -1 },
            ]
        );
    }

    #[test]
    fn m_block_dimensions() {
        let p = params(40);
        assert_eq!(build_basis(&p, &Sector::MBlock(5)).unwrap().len(), 6);
        assert_eq!(build_basis(&p, &Sector::MBlock(45)).unwrap().len(), 41);
        // dimension formula min(M, 2j) + 1 for every M up to 3j
        for m in 0..=60 {
            let dim = build_basis(&p, &Sector::MBlock(m)).unwrap().len();
            assert_eq!(dim, (m.min(40) + 1) as usize);
        }
    }

    #[test]
    fn vacuum_block() {
        let p = params(40);
        let basis = build_basis(&p, &Sector::MBlock(0)).unwrap();
        assert_eq!(basis, vec![BasisState { n: 0, m_twice: -40 }]);
    }

    #[test]
    fn negative_m_rejected() {
        let p = params(40);
        assert!(build_basis(&p, &Sector::MBlock(-1)).is_err());
    }

    #[test]
    fn parity_block_enumeration() {
        let p = params(2);
        let plus = build_basis(&p, &Sector::ParityBlock { parity: 1, n_max: 2 }).unwrap();
        // n=0: m_idx 0,2; n=1: m_idx 1; n=2: m_idx 0,2
        assert_eq!(
            plus,
            vec![
                BasisState { n: 0, m_twice: -2 },
                BasisState { n: 0, m_twice: 2 },
                BasisState { n: 1, m_twice: 0 },
                BasisState { n: 2, m_twice: -2 },
                BasisState { n: 2, m_twice: 2 },
            ]
        );
        let minus = build_basis(&p, &Sector::ParityBlock { parity: -1, n_max: 2 }).unwrap();
        assert_eq!(minus.len(), 4);
        // the two parity sectors partition the truncated space
        assert_eq!(plus.len() + minus.len(), 3 * 3);
        for s in &plus {
            assert_eq!(s.parity(&p), 1);
        }
        for s in &minus {
            assert_eq!(s.parity(&p), -1);
        }
        assert!(build_basis(&p, &Sector::ParityBlock { parity: 0, n_max: 2 }).is_err());
    }

    #[test]
    fn dimension_matches_enumeration() {
        let p = params(5);
        for sector in [
            Sector::MBlock(0),
            Sector::MBlock(3),
            Sector::MBlock(12),
            Sector::ParityBlock { parity: 1, n_max: 7 },
            Sector::ParityBlock { parity: -1, n_max: 7 },
        ] {
            assert_eq!(
                build_basis(&p, &sector).unwrap().len(),
                sector.dimension(&p)
            );
        }
    }

    #[test]
    fn m_total_and_parity() {
        let p = params(40);
        let s = BasisState { n: 3, m_twice: -40 };
        assert_eq!(s.m_total(&p), 3);
        assert_eq!(s.parity(&p), -1);
        let s = BasisState { n: 0, m_twice: 40 };
        assert_eq!(s.m_total(&p), 40);
        assert_eq!(s.parity(&p), 1);
    }
}
