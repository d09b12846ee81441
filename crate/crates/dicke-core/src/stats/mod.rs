//! Spectral statistics: smoothed level densities, logarithmic peak fits,
//! semiclassical spacing checks and the lattice disorder score.

mod breakdown;
mod density;
mod spacing;

pub use breakdown::{breakdown_metric, disorder_score, DisorderScore};
pub use density::{
    default_sigma, derivative_jump, esqpt_fit, smoothed_density, DensityCurve, EsqptFit,
};
pub use spacing::spacing_check;
