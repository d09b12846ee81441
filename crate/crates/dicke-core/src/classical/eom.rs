//! Equations of motion in the two charts: the globally regular laboratory
//! chart with Cartesian spin, and the rotating-frame chart at fixed `M`.

use crate::classical::state::{pole_factors, PhaseState, TransformedState};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Time derivative of a [`PhaseState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDeriv {
    pub x_dot: f64,
    pub p_dot: f64,
    pub s_dot: [f64; 3],
}

/// Time derivative of a [`TransformedState`]; `m_value` is conserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedDeriv {
    pub xp_dot: f64,
    pub pp_dot: f64,
    pub phip_dot: f64,
}

/// Coupling constants of the laboratory-chart flow, precomputed once per
/// integration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SpinFlow {
    omega: f64,
    omega0: f64,
    /// `sqrt(2) lambda_gamma (1 + delta)`: co-rotating weight.
    co: f64,
    /// `sqrt(2) lambda_gamma (1 - delta)`: counter-rotating weight.
    counter: f64,
}

impl SpinFlow {
    pub(crate) fn new(params: &ModelParams) -> Self {
        let lg = std::f64::consts::SQRT_2 * params.lambda_gamma();
        Self {
            omega: params.omega,
            omega0: params.omega0,
            co: lg * (1.0 + params.delta),
            counter: lg * (1.0 - params.delta),
        }
    }

    /// Right-hand side on the flat array `(x, p, s1, s2, s3)`.
    pub(crate) fn rhs(&self, y: &[f64; 5]) -> [f64; 5] {
        let [x, p, s1, s2, s3] = *y;
        // Effective magnetic field B = (co * x, -counter * p, omega0),
        // spin precession s_dot = B x s.
        let b1 = self.co * x;
        let b2 = -self.counter * p;
        [
            self.omega * p - self.counter * s2,
            -self.omega * x - self.co * s1,
            b2 * s3 - self.omega0 * s2,
            self.omega0 * s1 - b1 * s3,
            b1 * s2 - b2 * s1,
        ]
    }
}

/// Hamiltonian flow in the laboratory chart. Regular on the whole sphere,
/// valid for every `delta`.
pub fn eom_spin(state: &PhaseState, params: &ModelParams) -> PhaseDeriv {
    let flow = SpinFlow::new(params);
    let d = flow.rhs(&[state.x, state.p, state.s[0], state.s[1], state.s[2]]);
    PhaseDeriv {
        x_dot: d[0],
        p_dot: d[1],
        s_dot: [d[2], d[3], d[4]],
    }
}

/// Right-hand side of the rotating-frame flow on `(x', p')`, plus the drift
/// rate of the cyclic angle. `delta = 0` only.
pub(crate) fn transformed_rhs(
    params: &ModelParams,
    m_value: f64,
    xp: f64,
    pp: f64,
) -> Result<(f64, f64, f64)> {
    let r2 = xp * xp + pp * pp;
    let (u, v) = pole_factors(m_value, r2);
    let edge_tol = 1e-12;
    if u < -edge_tol || v < -edge_tol {
        return Err(Error::Domain(format!(
            "radius r'^2 = {r2} outside the domain for M = {m_value}"
        )));
    }
    let s2 = 2.0 * u.max(0.0) * v.max(0.0);
    let s_factor = s2.sqrt();
    if s_factor == 0.0 {
        return Err(Error::Numerical(
            "rotating-frame flow is singular on the domain circles".into(),
        ));
    }
    let z = m_value - (r2 + 1.0) / 2.0;
    let lg = params.lambda_gamma();
    let dw = params.delta_omega();
    Ok((
        dw * pp + lg * 2.0 * xp * pp * z / s_factor,
        -dw * xp - lg * (s2 + 2.0 * xp * xp * z) / s_factor,
        params.omega0 - lg * 2.0 * xp * z / s_factor,
    ))
}

/// Reduced `(x', p')` flow at fixed `M` with the chart singularity clamped,
/// for use inside the adaptive integrator where the right-hand side must be
/// total. Orbits on regular tori never reach the clamp.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReducedFlow {
    lg: f64,
    dw: f64,
    m_value: f64,
}

impl ReducedFlow {
    pub(crate) fn new(params: &ModelParams, m_value: f64) -> Self {
        Self {
            lg: params.lambda_gamma(),
            dw: params.delta_omega(),
            m_value,
        }
    }

    pub(crate) fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
        let [xp, pp] = *y;
        let r2 = xp * xp + pp * pp;
        let (u, v) = pole_factors(self.m_value, r2);
        let s2 = (2.0 * u.max(0.0) * v.max(0.0)).max(1e-300);
        let s = s2.sqrt();
        let z = self.m_value - (r2 + 1.0) / 2.0;
        [
            self.dw * pp + self.lg * 2.0 * xp * pp * z / s,
            -self.dw * xp - self.lg * (s2 + 2.0 * xp * xp * z) / s,
        ]
    }
}

/// Hamiltonian flow in the rotating frame at fixed `M`.
///
/// Errors: contract violation for `delta > 0` (the frame only removes the
/// co-rotating phase), domain error off the annulus, numerical error on the
/// domain circles where the chart degenerates.
pub fn eom_transformed(state: &TransformedState, params: &ModelParams) -> Result<TransformedDeriv> {
    if params.delta != 0.0 {
        return Err(Error::Contract(
            "rotating-frame flow requires delta = 0".into(),
        ));
    }
    let (xp_dot, pp_dot, phip_dot) = transformed_rhs(params, state.m_value, state.xp, state.pp)?;
    Ok(TransformedDeriv {
        xp_dot,
        pp_dot,
        phip_dot,
    })
}

/// Instantaneous photon emission rate per emitter pair,
/// `n_dot / N* = x' x'_dot + p' p'_dot = (1/2) d(r'^2)/dt`.
pub fn photon_rate(state: &TransformedState, params: &ModelParams) -> Result<f64> {
    let d = eom_transformed(state, params)?;
    Ok(state.xp * d.xp_dot + state.pp * d.pp_dot)
}
