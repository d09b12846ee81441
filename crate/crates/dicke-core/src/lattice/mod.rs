//! Eigenvalue lattices and their discrete geometry.
//!
//! At δ = 0 the per-M spectra stack into a two-dimensional lattice indexed
//! by the conserved column M and the intra-column level index k. The lattice
//! of an overcritical model carries an isolated defect where the column
//! length saturates at the spin dimension, and parallel transport of a local
//! cell around that defect picks up a nontrivial integer monodromy. This
//! module builds the lattices ([`em_lattice`], [`peres_lattice`]), walks
//! chains of fixed k across columns ([`chains`], [`defect_locate`]), and
//! performs the cell transport ([`transport_loop`]).

mod chains;
mod grid;
mod transport;

pub use chains::{all_chains, chains, defect_locate, Chain};
pub use grid::{em_lattice, peres_lattice, Lattice, LatticePoint};
pub use transport::{transport_loop, transport_path, Cell, LoopStep, MonodromyMatrix};
