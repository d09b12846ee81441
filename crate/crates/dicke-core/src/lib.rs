//! Numerics for the extended Dicke model.
//!
//! The crate covers three layers that share one parameter set:
//!
//! * sector-wise exact diagonalization of the quantum Hamiltonian
//!   (conserved-`M` blocks in the integrable case, parity blocks with a
//!   boson cutoff once the integrability-breaking coupling is switched on),
//! * the classical limit: Hamiltonian flow in a globally regular chart,
//!   the rotating-frame transformation, critical energies and the pinched
//!   (homoclinic) orbit machinery,
//! * lattice diagnostics: energy-momentum and Peres lattices, elementary-cell
//!   transport around the spectral defect (quantum monodromy), smoothed level
//!   densities and the breakdown metrics used away from integrability.

pub mod classical;
mod error;
pub mod export;
pub mod lattice;
pub mod params;
pub mod quantum;
pub mod stats;

pub use error::{Error, Result};
pub use params::ModelParams;
