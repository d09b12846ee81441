//! Phase-space states for the classical limit and the algebra that connects
//! them: scaled Hamiltonians, the conserved combination `M`, and the
//! rotating-frame canonical transformation.

use crate::error::{Error, Result};
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};

/// Wraps an angle into `[0, 2*pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = angle % two_pi;
    if a < 0.0 {
        a += two_pi;
    }
    if a >= two_pi {
        a = 0.0;
    }
    a
}

/// Point of the classical phase space: field quadratures `(x, p)` plus a
/// Bloch vector of fixed length `1/2`.
///
/// The spin is stored in Cartesian components so the dynamics stays regular
/// at the poles; the `(phi, z)` pair of the cylindrical chart is exposed
/// through accessors. The invariant `s1^2 + s2^2 + s3^2 = 1/4` is enforced on
/// construction and re-imposed by the integrator after every accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    /// Field coordinate (scaled).
    pub x: f64,
    /// Field momentum (scaled).
    pub p: f64,
    /// Spin Cartesian components `(s1, s2, s3)`, norm `1/2`.
    pub s: [f64; 3],
}

impl PhaseState {
    /// Builds a state from the cylindrical spin chart `(phi, z)`.
    ///
    /// Returns a domain error when `|z| > 1/2`.
    pub fn from_angles(x: f64, p: f64, phi: f64, z: f64) -> Result<Self> {
        if !(-0.5..=0.5).contains(&z) {
            return Err(Error::Domain(format!(
                "spin projection z = {z} outside [-1/2, 1/2]"
            )));
        }
        // rho^2 = 1/4 - z^2 in the cancellation-free product form.
        let rho = ((0.5 - z) * (0.5 + z)).max(0.0).sqrt();
        Ok(Self {
            x,
            p,
            s: [rho * phi.cos(), rho * phi.sin(), z],
        })
    }

    /// Builds a state from Cartesian spin components, rescaling them onto the
    /// `|s| = 1/2` sphere. Rejects a zero spin vector.
    pub fn from_spin(x: f64, p: f64, s: [f64; 3]) -> Result<Self> {
        let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::Domain(
                "spin vector must be finite and nonzero".into(),
            ));
        }
        let f = 0.5 / norm;
        Ok(Self {
            x,
            p,
            s: [s[0] * f, s[1] * f, s[2] * f],
        })
    }

    /// Bloch longitude in `[0, 2*pi)`. Undefined in exact arithmetic at the
    /// poles; returns `0` there.
    pub fn phi(&self) -> f64 {
        if self.s[0] == 0.0 && self.s[1] == 0.0 {
            return 0.0;
        }
        wrap_angle(self.s[1].atan2(self.s[0]))
    }

    /// Spin projection `z = s3`.
    pub fn z(&self) -> f64 {
        self.s[2]
    }

    /// Equatorial spin magnitude `rho = sqrt(s1^2 + s2^2)`.
    pub fn rho(&self) -> f64 {
        (self.s[0] * self.s[0] + self.s[1] * self.s[1]).sqrt()
    }

    /// Deviation of `|s|^2` from `1/4`; diagnostic for the norm invariant.
    pub fn spin_norm_defect(&self) -> f64 {
        (self.s[0] * self.s[0] + self.s[1] * self.s[1] + self.s[2] * self.s[2] - 0.25).abs()
    }

    /// True when the state sits within `tol` (chordal distance) of a spin
    /// pole, where the longitude is indeterminate.
    pub fn is_polar(&self, tol: f64) -> bool {
        self.rho() < tol
    }
}

/// Point of the rotating frame: radial quadratures `(x', p')` at fixed `M`.
///
/// The frame angle `phi'` is cyclic for `delta = 0`; it is carried along so
/// orbits can be mapped back to the laboratory chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedState {
    /// Rotated field coordinate.
    pub xp: f64,
    /// Rotated field momentum.
    pub pp: f64,
    /// Value of the conserved combination `M`.
    pub m_value: f64,
    /// Cyclic angle conjugate to `M`, wrapped to `[0, 2*pi)`.
    pub phip: f64,
}

impl TransformedState {
    /// Squared radius `r'^2 = x'^2 + p'^2`.
    pub fn r_squared(&self) -> f64 {
        self.xp * self.xp + self.pp * self.pp
    }

    /// Spin projection `z` recovered from `M` and the radius.
    pub fn z(&self) -> f64 {
        self.m_value - (self.r_squared() + 1.0) / 2.0
    }
}

/// Cancellation-free factors `u = 1/2 - z` and `v = 1/2 + z` for
/// `z = M - (r'^2 + 1)/2`, written so that `u` vanishes exactly on the inner
/// domain circle and `v` on the outer one.
pub(crate) fn pole_factors(m_value: f64, r_squared: f64) -> (f64, f64) {
    let u = (r_squared - 2.0 * (m_value - 1.0)) / 2.0;
    let v = (2.0 * m_value - r_squared) / 2.0;
    (u, v)
}

/// Conserved combination `M = (x^2 + p^2 + 1)/2 + s3` of the `delta = 0`
/// dynamics (scaled excitation count).
pub fn invariant_m(state: &PhaseState) -> f64 {
    (state.x * state.x + state.p * state.p + 1.0) / 2.0 + state.s[2]
}

/// Scaled classical Hamiltonian in the laboratory chart.
///
/// `H = omega (x^2 + p^2)/2 + omega0 s3
///    + sqrt(2) lambda_gamma [(1+delta) x s1 - (1-delta) p s2]`.
pub fn hamiltonian_full(state: &PhaseState, params: &ModelParams) -> f64 {
    let lg = params.lambda_gamma();
    let coupling = std::f64::consts::SQRT_2
        * lg
        * ((1.0 + params.delta) * state.x * state.s[0]
            - (1.0 - params.delta) * state.p * state.s[1]);
    params.omega * (state.x * state.x + state.p * state.p) / 2.0
        + params.omega0 * state.s[2]
        + coupling
}

/// Scaled Hamiltonian in the rotating frame at fixed `M` (`delta = 0` only):
///
/// `H' = omega0 M - omega/2 + (omega - omega0)(r'^2 + 1)/2
///     + lambda_gamma x' sqrt(1/2 - 2 z^2)`,   `z = M - (r'^2 + 1)/2`.
///
/// Errors: contract violation for `delta > 0`, domain error when the radius
/// leaves the annulus allowed by `M`.
pub fn hamiltonian_transformed(state: &TransformedState, params: &ModelParams) -> Result<f64> {
    if params.delta != 0.0 {
        return Err(Error::Contract(
            "rotating-frame Hamiltonian requires delta = 0".into(),
        ));
    }
    let r2 = state.r_squared();
    let (u, v) = pole_factors(state.m_value, r2);
    let edge_tol = 1e-12;
    if u < -edge_tol || v < -edge_tol {
        return Err(Error::Domain(format!(
            "radius r'^2 = {r2} outside the domain for M = {}",
            state.m_value
        )));
    }
    // sqrt(1/2 - 2 z^2) = sqrt(2 u v), clamped against roundoff at the edges.
    let s_factor = (2.0 * u.max(0.0) * v.max(0.0)).sqrt();
    Ok(params.omega0 * state.m_value - params.omega / 2.0
        + params.delta_omega() * (r2 + 1.0) / 2.0
        + params.lambda_gamma() * state.xp * s_factor)
}

/// Maps a laboratory state into the rotating frame:
/// `(x', p') = R(phi) (x, p)` with `R` the rotation by the Bloch longitude,
/// and `phi' = phi + M - 1/2`.
pub fn transform_forward(state: &PhaseState) -> TransformedState {
    let phi = state.phi();
    let (sin_phi, cos_phi) = phi.sin_cos();
    let m_value = invariant_m(state);
    TransformedState {
        xp: cos_phi * state.x - sin_phi * state.p,
        pp: sin_phi * state.x + cos_phi * state.p,
        m_value,
        phip: wrap_angle(phi + m_value - 0.5),
    }
}

/// Inverse of [`transform_forward`] given the Bloch longitude `phi`.
///
/// On the domain edges (`r' = r'_min` or `r' = r'_max`) the spin sits at a
/// pole and `phi` is indeterminate there; the caller-supplied value is used
/// unchanged, which is the continuity convention of the integrator.
pub fn transform_backward(state: &TransformedState, phi: f64) -> Result<PhaseState> {
    let r2 = state.r_squared();
    let (u, v) = pole_factors(state.m_value, r2);
    let edge_tol = 1e-12;
    if u < -edge_tol || v < -edge_tol {
        return Err(Error::Domain(format!(
            "radius r'^2 = {r2} outside the domain for M = {}",
            state.m_value
        )));
    }
    let (sin_phi, cos_phi) = phi.sin_cos();
    // rho = sqrt(1/4 - z^2) = sqrt(u v) in the stable product form.
    let rho = (u.max(0.0) * v.max(0.0)).sqrt();
    let z = state.m_value - (r2 + 1.0) / 2.0;
    Ok(PhaseState {
        x: cos_phi * state.xp + sin_phi * state.pp,
        p: -sin_phi * state.xp + cos_phi * state.pp,
        s: [rho * cos_phi, rho * sin_phi, z.clamp(-0.5, 0.5)],
    })
}

/// Radial bounds of the rotating-frame domain at fixed `M`:
/// `r'_min = sqrt(2(M-1))` for `M > 1` (else `0`), `r'_max = sqrt(2M)`.
///
/// Errors for `M < 0`, where the domain is empty.
pub fn domain_radii(m_value: f64) -> Result<(f64, f64)> {
    if m_value < 0.0 {
        return Err(Error::Domain(format!(
            "M = {m_value} is negative; the accessible region is empty"
        )));
    }
    let r_min = if m_value > 1.0 {
        (2.0 * (m_value - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((r_min, (2.0 * m_value).sqrt()))
}
