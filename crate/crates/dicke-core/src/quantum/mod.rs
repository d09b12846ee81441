//! Sector-wise construction and diagonalization of the quantum Hamiltonian.

mod basis;
mod cutoff;
mod eigen;
mod hamiltonian;
mod spectrum;

pub use basis::{build_basis, BasisState, Sector};
pub use cutoff::converge_cutoff;
pub use eigen::{diagonalize, frobenius_norm, residual_max, Eigen};
pub use hamiltonian::hamiltonian_matrix;
pub use spectrum::{Observable, Spectrum};
