//! Adaptive Dormand-Prince 5(4) integrator with dense output and event
//! location. Fixed-dimension states keep the hot loop allocation-free.

use crate::error::{Error, Result};

/// Tolerances and budgets for [`integrate_adaptive`].
#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on the step size; keeps event scanning dense enough.
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: 0.1,
            h_init: None,
            max_steps: 20_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

/// Which sign changes of the event function are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventDirection {
    /// Negative to positive.
    Rising,
    /// Positive to negative.
    Falling,
    Any,
}

/// A scalar event function whose roots along the solution are located.
pub struct EventSpec<'a, const N: usize> {
    pub function: Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>,
    pub direction: EventDirection,
    /// Evaluated at the refined root; `false` discards the occurrence.
    pub gate: Option<Box<dyn Fn(f64, &[f64; N]) -> bool + 'a>>,
    /// Terminal events stop the integration at the root.
    pub terminal: bool,
}

/// A located event occurrence.
#[derive(Debug, Clone, Copy)]
pub struct OdeEvent<const N: usize> {
    /// Index into the event-spec slice.
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
}

/// Accepted-step samples plus located events.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub events: Vec<OdeEvent<N>>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// True when a terminal event ended the run before `t_end`.
    pub terminated: bool,
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output weights (Hairer & Wanner, DOPRI5 continuous extension).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Quartic Hermite-type interpolant over one accepted step.
struct DenseStep<const N: usize> {
    t0: f64,
    h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let mt = 1.0 - theta;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + mt * (self.rcont[2][i]
                            + theta * (self.rcont[3][i] + mt * self.rcont[4][i])));
        }
        y
    }
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / N as f64).sqrt()
}

fn initial_step<const N: usize>(
    rhs: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    opts: &OdeOptions,
) -> f64 {
    let sc: Vec<f64> = (0..N)
        .map(|i| opts.atol + opts.rtol * y0[i].abs())
        .collect();
    let rms = |v: &[f64; N]| -> f64 {
        let s: f64 = (0..N).map(|i| (v[i] / sc[i]).powi(2)).sum();
        (s / N as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += h0 * f0[i];
    }
    let f1 = rhs(t0 + h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t_end > t0`.
///
/// Events are detected on the dense output of each accepted step (eight
/// sub-intervals, so multiple roots per step are resolved), refined by
/// bisection to near machine precision in `t`, filtered by direction and
/// gate, and reported in time order. `post_step` runs on every accepted
/// state before it is stored; it is the hook for constraint renormalization.
pub fn integrate_adaptive<const N: usize>(
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
    t_span: (f64, f64),
    y0: [f64; N],
    opts: &OdeOptions,
    events: &[EventSpec<N>],
    post_step: impl Fn(&mut [f64; N]),
) -> Result<OdeSolution<N>> {
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::Domain(format!(
            "integration span must run forward, got [{t0}, {t_end}]"
        )));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0 && opts.h_max > 0.0) {
        return Err(Error::Domain("tolerances and h_max must be positive".into()));
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&rhs, t, &y, &k1, opts))
        .min(opts.h_max)
        .min(t_end - t0);

    let mut sol = OdeSolution {
        times: vec![t0],
        states: vec![y0],
        events: Vec::new(),
        steps_accepted: 0,
        steps_rejected: 0,
        terminated: false,
    };
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.function)(t, &y)).collect();
    let mut steps = 0usize;

    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Resource(format!(
                "step budget {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Numerical(format!("step size underflow at t = {t}")));
        }
        let h_step = h.min(t_end - t);

        // Stage evaluations (k1 recycled from the previous step: FSAL).
        let stage = |coeffs: &[(f64, &[f64; N])]| {
            let mut yn = y;
            for i in 0..N {
                for (a, k) in coeffs {
                    yn[i] += h_step * a * k[i];
                }
            }
            yn
        };
        let k2 = rhs(t + h_step / 5.0, &stage(&[(A21, &k1)]));
        let k3 = rhs(t + 3.0 / 10.0 * h_step, &stage(&[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + 4.0 / 5.0 * h_step,
            &stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + 8.0 / 9.0 * h_step,
            &stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h_step,
            &stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let mut y_new = y;
        for i in 0..N {
            y_new[i] +=
                h_step * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let t_new = t + h_step;
        let k7 = rhs(t_new, &y_new);

        let mut err_vec = [0.0; N];
        for i in 0..N {
            err_vec[i] = h_step
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = error_norm(&err_vec, &y, &y_new, opts);

        if err > 1.0 {
            sol.steps_rejected += 1;
            h = h_step * (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }

        sol.steps_accepted += 1;

        // Event handling on the dense interpolant of this step.
        let mut terminal_hit: Option<(f64, [f64; N])> = None;
        if !events.is_empty() {
            let mut rcont = [[0.0; N]; 5];
            for i in 0..N {
                let dy = y_new[i] - y[i];
                let bspl = h_step * k1[i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - h_step * k7[i] - bspl;
                rcont[4][i] = h_step
                    * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let dense = DenseStep {
                t0: t,
                h: h_step,
                rcont,
            };
            let mut found: Vec<OdeEvent<N>> = Vec::new();
            const SUBDIV: usize = 8;
            for (idx, ev) in events.iter().enumerate() {
                let mut ta = t;
                let mut ga = g_prev[idx];
                for j in 1..=SUBDIV {
                    let tb = if j == SUBDIV {
                        t_new
                    } else {
                        t + h_step * j as f64 / SUBDIV as f64
                    };
                    let yb = if j == SUBDIV { y_new } else { dense.eval(tb) };
                    let gb = (ev.function)(tb, &yb);
                    let crossed = ga != 0.0 && (ga < 0.0) != (gb < 0.0) && gb != ga;
                    if crossed {
                        let rising = ga < 0.0;
                        let wanted = match ev.direction {
                            EventDirection::Rising => rising,
                            EventDirection::Falling => !rising,
                            EventDirection::Any => true,
                        };
                        if wanted {
                            // Bisection on the dense output.
                            let (mut lo, mut hi) = (ta, tb);
                            let mut glo = ga;
                            for _ in 0..90 {
                                let mid = 0.5 * (lo + hi);
                                if mid <= lo || mid >= hi {
                                    break;
                                }
                                let gm = (ev.function)(mid, &dense.eval(mid));
                                if (gm < 0.0) == (glo < 0.0) && gm != 0.0 {
                                    lo = mid;
                                    glo = gm;
                                } else {
                                    hi = mid;
                                }
                            }
                            let t_star = 0.5 * (lo + hi);
                            let y_star = dense.eval(t_star);
                            let pass = ev
                                .gate
                                .as_ref()
                                .map(|g| g(t_star, &y_star))
                                .unwrap_or(true);
                            if pass {
                                found.push(OdeEvent {
                                    index: idx,
                                    t: t_star,
                                    y: y_star,
                                });
                            }
                        }
                    }
                    ta = tb;
                    ga = gb;
                }
                g_prev[idx] = ga;
            }
            found.sort_by(|a, b| a.t.total_cmp(&b.t));
            for ev in found {
                let terminal = events[ev.index].terminal;
                let (ev_t, ev_y) = (ev.t, ev.y);
                sol.events.push(ev);
                if terminal {
                    terminal_hit = Some((ev_t, ev_y));
                    break;
                }
            }
        }

        if let Some((t_stop, y_stop)) = terminal_hit {
            let mut y_final = y_stop;
            post_step(&mut y_final);
            sol.times.push(t_stop);
            sol.states.push(y_final);
            sol.terminated = true;
            return Ok(sol);
        }

        post_step(&mut y_new);
        t = t_new;
        y = y_new;
        // Renormalization shifts the state by O(eps); recycling k7 keeps FSAL.
        k1 = k7;
        sol.times.push(t);
        sol.states.push(y);

        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h_step * factor).min(opts.h_max);
    }

    Ok(sol)
}
