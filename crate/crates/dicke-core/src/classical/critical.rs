//! Critical couplings and energies of the classical landscape, an
//! independent numerical extremizer for cross-checks, and the inertia of the
//! north-pole stationary point.

use crate::classical::state::{domain_radii, pole_factors};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quantum::diagonalize;
use faer::Mat;
use serde::{Deserialize, Serialize};

/// Critical couplings and energies at `M = 1`.
///
/// The closed forms assume `omega >= omega0`; the mirrored arrangement
/// follows from the reflection identity of the rotating-frame landscape
/// under swapping the two frequencies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalValues {
    /// Superradiant threshold `sqrt(omega omega0) / (1 + delta)`.
    pub lambda_c: f64,
    /// Rotating-frame threshold `|omega - omega0| / 2`.
    pub lambda_c_prime: f64,
    /// Scaled ground energy of the laboratory landscape.
    pub e_ground: f64,
    /// Location of the landscape minimum in `s = 1/2 - z`; `None` at zero
    /// coupling.
    pub s_minus: Option<f64>,
    /// Location of the landscape maximum in `s = 1/2 - z`.
    pub s_plus: Option<f64>,
    /// Lower edge of the rotating-frame landscape at `M = 1`.
    pub e0_prime: f64,
    /// Upper edge of the rotating-frame landscape at `M = 1`.
    pub e1_prime: f64,
    /// Saddle (separatrix) energy `omega0 / 2`; present only above the
    /// rotating-frame threshold where the origin is conical.
    pub ec_prime: Option<f64>,
    /// Dwell-time scale of the pinched orbit; present only above the
    /// superradiant threshold.
    pub t_c: Option<f64>,
}

/// Stationary points `s_pm` of the boundary families
/// `G_pm(s) = omega0/2 + (omega - omega0) s pm 2 lambda_gamma s sqrt(1 - s)`
/// with `s = 1/2 - z` in `[0, 1]`.
fn boundary_stationary(delta_omega: f64, lambda_gamma: f64) -> (f64, f64) {
    let w = delta_omega / (2.0 * lambda_gamma);
    let root = (w * w + 3.0).sqrt();
    let s_minus = 2.0 / 3.0 - 2.0 / 9.0 * w * w - 2.0 / 9.0 * w * root;
    let s_plus = 2.0 / 3.0 - 2.0 / 9.0 * w * w + 2.0 / 9.0 * w * root;
    (s_minus, s_plus)
}

/// Evaluates the closed-form critical data of the classical model.
pub fn critical_values(params: &ModelParams) -> CriticalValues {
    let lg = params.lambda_gamma();
    let dw = params.delta_omega();
    let lambda_c = (params.omega * params.omega0).sqrt() / (1.0 + params.delta);
    let lambda_c_prime = dw.abs() / 2.0;
    let lc_gamma = params.gamma().sqrt() * lambda_c;

    let e_ground = if lg <= lc_gamma {
        -params.omega0 / 2.0
    } else {
        let l2 = lg * lg;
        let c2 = lc_gamma * lc_gamma;
        -(params.omega0 / 2.0) * (l2 * l2 + c2 * c2) / (2.0 * l2 * c2)
    };

    let (s_minus, s_plus) = if lg > 0.0 {
        let (sm, sp) = boundary_stationary(dw, lg);
        (Some(sm), Some(sp))
    } else {
        (None, None)
    };

    let e0_prime = if lg > lambda_c_prime {
        let sm = s_minus.expect("coupling is positive above the threshold");
        params.omega0 / 2.0 + dw * sm - 2.0 * lg * sm * (1.0 - sm).sqrt()
    } else {
        params.omega0 / 2.0
    };
    let e1_prime = match s_plus {
        Some(sp) => params.omega0 / 2.0 + dw * sp + 2.0 * lg * sp * (1.0 - sp).sqrt(),
        None => params.omega0 / 2.0 + dw,
    };
    let ec_prime = (lg > lambda_c_prime).then_some(params.omega0 / 2.0);
    let t_c = (lg > lc_gamma).then(|| {
        let ratio = (lc_gamma / lg).powi(2);
        (params.omega0 / 2.0) / ratio.atanh()
    });

    CriticalValues {
        lambda_c,
        lambda_c_prime,
        e_ground,
        s_minus,
        s_plus,
        e0_prime,
        e1_prime,
        ec_prime,
        t_c,
    }
}

fn golden_minimize(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn scan_minimum(f: &impl Fn(f64) -> f64, a: f64, b: f64, n_grid: usize) -> (f64, f64) {
    let step = (b - a) / (n_grid - 1) as f64;
    let mut best = (a, f(a));
    for i in 1..n_grid {
        let x = a + step * i as f64;
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let lo = (best.0 - step).max(a);
    let hi = (best.0 + step).min(b);
    let refined = golden_minimize(f, lo, hi, 80);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

/// Global minimum and maximum of the rotating-frame energy over the domain
/// at fixed `M`, found by direct numerical search.
///
/// On each circle of radius `r` the energy is extremal on the `x'` axis, so
/// the search reduces to two one-dimensional profiles
/// `base(r) -+ lambda_gamma r S(r)`; those are scanned on a grid and refined
/// by golden-section. Serves as an oracle that is independent of the closed
/// forms in [`critical_values`].
pub fn transformed_extremes(
    params: &ModelParams,
    m_value: f64,
    n_grid: usize,
) -> Result<(f64, f64)> {
    if params.delta != 0.0 {
        return Err(Error::Contract(
            "rotating-frame landscape requires delta = 0".into(),
        ));
    }
    if n_grid < 16 {
        return Err(Error::Domain("extremes scan needs at least 16 points".into()));
    }
    let (r_min, r_max) = domain_radii(m_value)?;
    let lg = params.lambda_gamma();
    let base = |r: f64| {
        params.omega0 * m_value - params.omega / 2.0
            + params.delta_omega() * (r * r + 1.0) / 2.0
    };
    let coupling = |r: f64| {
        let (u, v) = pole_factors(m_value, r * r);
        lg * r * (2.0 * u.max(0.0) * v.max(0.0)).sqrt()
    };
    let lower = |r: f64| base(r) - coupling(r);
    let upper_neg = |r: f64| -(base(r) + coupling(r));
    let (_, min_e) = scan_minimum(&lower, r_min, r_max, n_grid);
    let (_, neg_max_e) = scan_minimum(&upper_neg, r_min, r_max, n_grid);
    Ok((min_e, -neg_max_e))
}

/// Inertia (positive count, negative count) of the Hessian of the full
/// Hamiltonian at the north-pole stationary point `x = p = 0`, `z = 1/2`,
/// computed by finite differences in a canonical chart that is regular at
/// the pole.
///
/// Errors with a degeneracy flag when an eigenvalue is smaller than `1e-8`
/// in magnitude.
pub fn hessian_signature(params: &ModelParams) -> Result<(usize, usize)> {
    let lg = params.lambda_gamma();
    // Canonical polar chart at the north pole: Q = sqrt(2(1/2 - z)) cos phi,
    // P = -sqrt(2(1/2 - z)) sin phi. The full Hamiltonian becomes
    // H(x, p, Q, P) = omega (x^2+p^2)/2 + omega0 (1/2 - (Q^2+P^2)/2)
    //              + lambda_gamma sqrt(1 - (Q^2+P^2)/2)
    //                [(1+delta) x Q + (1-delta) p P].
    let f = |y: &[f64; 4]| {
        let [x, p, q, pq] = *y;
        let u = (q * q + pq * pq) / 2.0;
        params.omega * (x * x + p * p) / 2.0 + params.omega0 * (0.5 - u)
            + lg * (1.0 - u).max(0.0).sqrt()
                * ((1.0 + params.delta) * x * q + (1.0 - params.delta) * p * pq)
    };
    let h = 1e-4;
    let mut hess = Mat::zeros(4, 4);
    let origin = [0.0; 4];
    let f0 = f(&origin);
    for i in 0..4 {
        for j in 0..=i {
            let val = if i == j {
                let mut yp = origin;
                yp[i] = h;
                let mut ym = origin;
                ym[i] = -h;
                (f(&yp) - 2.0 * f0 + f(&ym)) / (h * h)
            } else {
                let at = |si: f64, sj: f64| {
                    let mut y = origin;
                    y[i] = si * h;
                    y[j] = sj * h;
                    f(&y)
                };
                (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
            };
            hess[(i, j)] = val;
            hess[(j, i)] = val;
        }
    }
    let eigen = diagonalize(&hess)?;
    let mut pos = 0;
    let mut neg = 0;
    for &v in &eigen.values {
        if v.abs() < 1e-8 {
            return Err(Error::Numerical(format!(
                "degenerate Hessian eigenvalue {v:.3e} at the stationary point"
            )));
        }
        if v > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    Ok((pos, neg))
}
