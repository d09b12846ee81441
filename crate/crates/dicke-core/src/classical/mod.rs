//! Classical limit: scaled Hamiltonians, canonical transformation, critical
//! formulas, equations of motion and orbit-level analyses (pinched torus,
//! spirals, Poincaré sections, reduced periods).

mod critical;
mod eom;
mod ode;
mod orbits;
mod state;

pub use critical::{critical_values, hessian_signature, transformed_extremes, CriticalValues};
pub use eom::{eom_spin, eom_transformed, photon_rate, PhaseDeriv, TransformedDeriv};
pub use ode::{integrate_adaptive, EventDirection, EventSpec, OdeOptions, OdeSolution};
pub use orbits::{
    integrate, period, pinched_orbit, poincare_section, section_initial_condition, spiral_fit,
    OrbitEvent, OrbitEventKind, OrbitTrace, PeriodResult, SectionCrossing, SpiralFit,
};
pub use state::{
    domain_radii, hamiltonian_full, hamiltonian_transformed, invariant_m, transform_backward,
    transform_forward, wrap_angle, PhaseState, TransformedState,
};
