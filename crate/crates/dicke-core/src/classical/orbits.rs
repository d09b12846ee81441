//! Orbit-level analyses: full-chart integration with event detection,
//! pinched-torus (homoclinic) orbits with spiral fits, Poincaré sections on
//! the rotating-frame angle, and periods of reduced orbits.

use crate::classical::critical::critical_values;
use crate::classical::eom::{ReducedFlow, SpinFlow};
use crate::classical::ode::{
    integrate_adaptive, EventDirection, EventSpec, OdeOptions, OdeSolution,
};
use crate::classical::state::{
    domain_radii, hamiltonian_full, hamiltonian_transformed, invariant_m, pole_factors,
    transform_backward, transform_forward, wrap_angle, PhaseState, TransformedState,
};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Spin radius below which a radial minimum counts as a pole passage.
const POLE_GATE: f64 = 0.05;
/// Spin radius for the homoclinic-return terminal event.
const RETURN_GATE: f64 = 0.01;
/// Earliest time a homoclinic return may fire, so the launch itself is not
/// mistaken for a return.
const RETURN_MIN_TIME: f64 = 1.0;
/// Outer spin radius of the spiral-fit window around the north pole.
const FIT_CEIL: f64 = 0.05;
/// Samples closer to the pole than this are dropped from the exponent fits
/// (they sit at the absolute-tolerance floor of the integrator).
const FIT_FLOOR: f64 = 1e-8;

/// Kinds of located orbit events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitEventKind {
    /// Radial minimum near the north pole.
    NorthPole,
    /// Radial minimum near the south pole.
    SouthPole,
    /// Sign change of the spin projection.
    Equator,
}

/// An event located along an orbit.
#[derive(Debug, Clone, Copy)]
pub struct OrbitEvent {
    pub kind: OrbitEventKind,
    pub t: f64,
    pub state: PhaseState,
}

/// Integrated orbit with per-sample conserved quantities and events.
#[derive(Debug, Clone)]
pub struct OrbitTrace {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// Scaled energy at each sample.
    pub energies: Vec<f64>,
    /// Conserved combination `M` at each sample.
    pub m_values: Vec<f64>,
    pub events: Vec<OrbitEvent>,
    /// True when a terminal event (homoclinic return) ended the run.
    pub terminated: bool,
}

impl OrbitTrace {
    /// Time average of `M` over the full window (trapezoidal rule).
    pub fn m_average(&self) -> f64 {
        let span = self.times.last().unwrap() - self.times[0];
        if span <= 0.0 || self.times.len() < 2 {
            return self.m_values[0];
        }
        let mut acc = 0.0;
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            acc += 0.5 * (self.m_values[i] + self.m_values[i - 1]) * dt;
        }
        acc / span
    }

    /// Largest deviation of the energy from its initial value.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        self.energies
            .iter()
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `M` from its initial value.
    pub fn m_drift(&self) -> f64 {
        let m0 = self.m_values[0];
        self.m_values
            .iter()
            .map(|m| (m - m0).abs())
            .fold(0.0, f64::max)
    }

    pub fn events_of(&self, kind: OrbitEventKind) -> impl Iterator<Item = &OrbitEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// One intersection of an orbit with the `phi' = 0` plane.
#[derive(Debug, Clone, Copy)]
pub struct SectionCrossing {
    pub orbit_id: usize,
    pub t: f64,
    pub xp: f64,
    pub pp: f64,
    /// Sign of `d phi'/dt` at the crossing.
    pub direction: i8,
    /// Time average of `M` over the parent orbit's full window.
    pub m_avg: f64,
}

fn state_from(y: &[f64; 5]) -> PhaseState {
    PhaseState {
        x: y[0],
        p: y[1],
        s: [y[2], y[3], y[4]],
    }
}

fn m_of(y: &[f64; 5]) -> f64 {
    (y[0] * y[0] + y[1] * y[1] + 1.0) / 2.0 + y[4]
}

struct RunOutput {
    trace: OrbitTrace,
    crossings: Vec<SectionCrossing>,
    /// Refined states at the section crossings, read by diagnostics tests.
    #[allow(dead_code)]
    crossing_states: Vec<PhaseState>,
}

/// Shared driver: integrates the laboratory-chart flow with pole and equator
/// events, optionally the `phi' = 0` section, optionally a terminal
/// homoclinic-return event.
fn run_orbit(
    initial: &PhaseState,
    params: &ModelParams,
    t_end: f64,
    opts: &OdeOptions,
    with_section: bool,
    terminal_return: bool,
) -> Result<RunOutput> {
    let flow = SpinFlow::new(params);
    let y0 = [
        initial.x,
        initial.p,
        initial.s[0],
        initial.s[1],
        initial.s[2],
    ];

    // d(rho^2)/dt: its rising zeros are radial minima (pole passages).
    let radial_rate = move |_t: f64, y: &[f64; 5]| {
        let d = flow.rhs(y);
        2.0 * (y[2] * d[2] + y[3] * d[3])
    };
    let section_fn = |_t: f64, y: &[f64; 5]| {
        let alpha = m_of(y) - 0.5;
        y[3] * alpha.cos() + y[2] * alpha.sin()
    };

    let mut specs: Vec<EventSpec<5>> = vec![
        EventSpec {
            function: Box::new(|_t, y: &[f64; 5]| y[4]),
            direction: EventDirection::Any,
            gate: None,
            terminal: false,
        },
        EventSpec {
            function: Box::new(radial_rate),
            direction: EventDirection::Rising,
            gate: Some(Box::new(|_t, y: &[f64; 5]| {
                y[2] * y[2] + y[3] * y[3] < POLE_GATE * POLE_GATE && y[4] > 0.0
            })),
            terminal: false,
        },
        EventSpec {
            function: Box::new(radial_rate),
            direction: EventDirection::Rising,
            gate: Some(Box::new(|_t, y: &[f64; 5]| {
                y[2] * y[2] + y[3] * y[3] < POLE_GATE * POLE_GATE && y[4] < 0.0
            })),
            terminal: false,
        },
    ];
    let section_index = specs.len();
    if with_section {
        specs.push(EventSpec {
            function: Box::new(section_fn),
            direction: EventDirection::Any,
            gate: Some(Box::new(|_t, y: &[f64; 5]| {
                let alpha = m_of(y) - 0.5;
                y[2] * alpha.cos() - y[3] * alpha.sin() > 0.0
            })),
            terminal: false,
        });
    }
    let return_index = specs.len();
    if terminal_return {
        specs.push(EventSpec {
            function: Box::new(radial_rate),
            direction: EventDirection::Rising,
            gate: Some(Box::new(|t, y: &[f64; 5]| {
                y[2] * y[2] + y[3] * y[3] < RETURN_GATE * RETURN_GATE
                    && y[4] > 0.0
                    && t > RETURN_MIN_TIME
            })),
            terminal: true,
        });
    }

    let renorm = |y: &mut [f64; 5]| {
        let n = (y[2] * y[2] + y[3] * y[3] + y[4] * y[4]).sqrt();
        let f = 0.5 / n;
        y[2] *= f;
        y[3] *= f;
        y[4] *= f;
    };
    let sol: OdeSolution<5> =
        integrate_adaptive(|_t, y| flow.rhs(y), (0.0, t_end), y0, opts, &specs, renorm)?;

    let states: Vec<PhaseState> = sol.states.iter().map(state_from).collect();
    let energies: Vec<f64> = states.iter().map(|s| hamiltonian_full(s, params)).collect();
    let m_values: Vec<f64> = states.iter().map(invariant_m).collect();
    let mut events = Vec::new();
    let mut crossings = Vec::new();
    let mut crossing_states = Vec::new();
    for ev in &sol.events {
        let st = state_from(&ev.y);
        if ev.index == section_index && with_section {
            let ts = transform_forward(&st);
            let d = flow.rhs(&ev.y);
            let rho2 = ev.y[2] * ev.y[2] + ev.y[3] * ev.y[3];
            let phi_dot = (ev.y[2] * d[3] - ev.y[3] * d[2]) / rho2;
            let m_dot = ev.y[0] * d[0] + ev.y[1] * d[1] + d[4];
            crossings.push(SectionCrossing {
                orbit_id: 0,
                t: ev.t,
                xp: ts.xp,
                pp: ts.pp,
                direction: if phi_dot + m_dot >= 0.0 { 1 } else { -1 },
                m_avg: 0.0,
            });
            crossing_states.push(st);
            continue;
        }
        let kind = if ev.index == 0 {
            OrbitEventKind::Equator
        } else if ev.index == 1 || (terminal_return && ev.index == return_index) {
            OrbitEventKind::NorthPole
        } else {
            OrbitEventKind::SouthPole
        };
        events.push(OrbitEvent {
            kind,
            t: ev.t,
            state: st,
        });
    }

    let trace = OrbitTrace {
        times: sol.times,
        states,
        energies,
        m_values,
        events,
        terminated: sol.terminated,
    };
    let m_avg = trace.m_average();
    for c in &mut crossings {
        c.m_avg = m_avg;
    }
    Ok(RunOutput {
        trace,
        crossings,
        crossing_states,
    })
}

/// Integrates an orbit in the laboratory chart, recording pole and equator
/// passages.
///
/// The spin norm is renormalized after every accepted step, so the energy
/// drift stays within `100 * tol * t_end` and `M` is conserved to the same
/// order when `delta = 0`.
pub fn integrate(
    initial: &PhaseState,
    params: &ModelParams,
    t_end: f64,
    tol: f64,
) -> Result<OrbitTrace> {
    // The stepper runs 50x tighter than the requested budget: strong
    // coupling drives hundreds of accepted steps per unit time, and the
    // drift bound is on the accumulated sum of their local errors.
    let opts = OdeOptions::with_tol(tol / 50.0);
    Ok(run_orbit(initial, params, t_end, &opts, false, false)?.trace)
}

/// Launches an orbit on the critical contour a distance `epsilon` from the
/// north pole along the unstable direction and follows it until the
/// homoclinic return, detected as a radial minimum inside the return gate.
///
/// `phi0` is the initial Bloch longitude. Requires `delta = 0` and
/// `lambda_gamma > lambda'_c`, otherwise no pinched torus exists.
pub fn pinched_orbit(params: &ModelParams, phi0: f64, epsilon: f64) -> Result<OrbitTrace> {
    if params.delta != 0.0 {
        return Err(Error::Contract("pinched orbits require delta = 0".into()));
    }
    if !(epsilon > 0.0 && epsilon < 0.1) {
        return Err(Error::Domain(format!(
            "launch offset epsilon = {epsilon} outside (0, 0.1)"
        )));
    }
    let cv = critical_values(params);
    let lg = params.lambda_gamma();
    if lg <= cv.lambda_c_prime {
        return Err(Error::Domain(format!(
            "no pinched torus: lambda_gamma = {lg} <= lambda'_c = {}",
            cv.lambda_c_prime
        )));
    }
    // Launch angle in the rotating frame: the critical contour at radius
    // epsilon fixes cos(alpha); the unstable branch has sin(alpha) < 0.
    let cos_alpha =
        -params.delta_omega() / (2.0 * lg * (1.0 - epsilon * epsilon / 2.0).sqrt());
    if cos_alpha.abs() >= 1.0 {
        return Err(Error::Domain(
            "coupling too close to the rotating-frame threshold".into(),
        ));
    }
    let sin_alpha = -(1.0 - cos_alpha * cos_alpha).sqrt();
    let ts = TransformedState {
        xp: epsilon * cos_alpha,
        pp: epsilon * sin_alpha,
        m_value: 1.0,
        phip: 0.0,
    };
    let initial = transform_backward(&ts, phi0)?;

    // The launch state components are of order epsilon, so the absolute
    // floor must sit far below them for the escape time to be meaningful.
    let opts = OdeOptions {
        rtol: 1e-12,
        atol: 1e-16,
        ..OdeOptions::default()
    };
    let out = run_orbit(&initial, params, 200.0, &opts, false, true)?;
    if !out.trace.terminated {
        return Err(Error::Numerical(
            "no homoclinic return within the time budget".into(),
        ));
    }
    Ok(out.trace)
}

/// Least-squares line through `(x, y)` pairs: returns `(slope, intercept)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Parameters of the logarithmic spiral wound by a pinched orbit around the
/// north pole.
#[derive(Debug, Clone, Copy)]
pub struct SpiralFit {
    /// Growth rate of `ln rho` on the outgoing branch (positive).
    pub exponent_out: f64,
    /// Growth rate of `ln rho` on the incoming branch (negative).
    pub exponent_in: f64,
    /// Mean angular speed of the Bloch longitude in the polar region.
    pub frequency: f64,
    /// Total polar windings accumulated over both dwell segments.
    pub windings: f64,
    /// First time the orbit leaves the fit window around the pole.
    pub escape_time: f64,
    /// Last time the orbit re-enters the fit window.
    pub reentry_time: f64,
}

/// Fits the in- and outgoing spiral branches of a homoclinic orbit.
///
/// Requires at least two full windings accumulated in the polar dwell
/// segments. The return leg re-approaches the pole far less deeply than the
/// launch offset, so winding counts grow slowly: offsets around `1e-11`
/// give roughly 2.4.
pub fn spiral_fit(trace: &OrbitTrace) -> Result<SpiralFit> {
    let n = trace.states.len();
    if n < 32 {
        return Err(Error::InsufficientData(
            "trace too short for a spiral fit".into(),
        ));
    }
    let rho: Vec<f64> = trace.states.iter().map(|s| s.rho()).collect();
    // Unwrapped Bloch longitude; adjacent samples differ by far less than pi
    // at the enforced step cap.
    let mut phi = Vec::with_capacity(n);
    phi.push(trace.states[0].phi());
    for i in 1..n {
        let mut d = trace.states[i].phi() - trace.states[i - 1].phi();
        while d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        }
        while d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        phi.push(phi[i - 1] + d);
    }

    let escape = match rho.iter().position(|&r| r >= FIT_CEIL) {
        Some(i) if i >= 8 => i,
        _ => {
            return Err(Error::InsufficientData(
                "orbit never leaves the polar window".into(),
            ))
        }
    };
    let reentry = n - 1
        - rho
            .iter()
            .rev()
            .position(|&r| r >= FIT_CEIL)
            .expect("an escape exists, so a last exceedance exists");
    if reentry + 8 > n {
        return Err(Error::InsufficientData(
            "incoming branch too short for a spiral fit".into(),
        ));
    }

    let windings = ((phi[escape] - phi[0]).abs() + (phi[n - 1] - phi[reentry]).abs())
        / std::f64::consts::TAU;
    if windings < 2.0 {
        return Err(Error::InsufficientData(format!(
            "only {windings:.2} windings accumulated; need at least 2"
        )));
    }

    let fit_branch = |range: std::ops::Range<usize>| -> Result<(f64, f64)> {
        let mut ts = Vec::new();
        let mut ln_rho = Vec::new();
        let mut phis = Vec::new();
        for i in range {
            if rho[i] > FIT_FLOOR && rho[i] < FIT_CEIL {
                ts.push(trace.times[i]);
                ln_rho.push(rho[i].ln());
                phis.push(phi[i]);
            }
        }
        if ts.len() < 8 {
            return Err(Error::InsufficientData(
                "too few polar samples for an exponent fit".into(),
            ));
        }
        let (exponent, _) = linear_fit(&ts, &ln_rho);
        let (omega, _) = linear_fit(&ts, &phis);
        Ok((exponent, omega))
    };
    let (exponent_out, omega_out) = fit_branch(0..escape)?;
    let (exponent_in, omega_in) = fit_branch(reentry..n)?;

    Ok(SpiralFit {
        exponent_out,
        exponent_in,
        frequency: (omega_out.abs() + omega_in.abs()) / 2.0,
        windings,
        escape_time: trace.times[escape],
        reentry_time: trace.times[reentry],
    })
}

/// Builds an initial condition on the `phi' = 0` section with the given `M`
/// and full-Hamiltonian energy: `p' = 0` and `x'` found by a bisection scan
/// along the accessible part of the `x'` axis.
pub fn section_initial_condition(
    params: &ModelParams,
    m_value: f64,
    energy: f64,
) -> Result<PhaseState> {
    let (r_min, r_max) = domain_radii(m_value)?;
    if r_max <= 0.0 {
        return Err(Error::Domain("empty domain at M = 0".into()));
    }
    let phi0 = wrap_angle(0.5 - m_value);
    let inset = 1e-9 * r_max.max(1.0);
    let mismatch = |xp: f64| -> f64 {
        let ts = TransformedState {
            xp,
            pp: 0.0,
            m_value,
            phip: 0.0,
        };
        let st = transform_backward(&ts, phi0).expect("scan stays inside the domain");
        hamiltonian_full(&st, params) - energy
    };
    let mut segments = Vec::new();
    if r_min > 0.0 {
        segments.push((-r_max + inset, -r_min - inset));
        segments.push((r_min + inset, r_max - inset));
    } else {
        segments.push((-r_max + inset, r_max - inset));
    }
    for (a, b) in segments {
        if b <= a {
            continue;
        }
        let steps = 2000;
        let dx = (b - a) / steps as f64;
        let mut xa = a;
        let mut fa = mismatch(xa);
        for i in 1..=steps {
            let xb = a + dx * i as f64;
            let fb = mismatch(xb);
            if fa == 0.0 {
                break;
            }
            if (fa < 0.0) != (fb < 0.0) {
                let (mut lo, mut hi, mut flo) = (xa, xb, fa);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = mismatch(mid);
                    if (fm < 0.0) == (flo < 0.0) && fm != 0.0 {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                let xp = 0.5 * (lo + hi);
                let ts = TransformedState {
                    xp,
                    pp: 0.0,
                    m_value,
                    phip: 0.0,
                };
                return transform_backward(&ts, phi0);
            }
            xa = xb;
            fa = fb;
        }
    }
    Err(Error::Domain(format!(
        "no section point with energy {energy} at M = {m_value}"
    )))
}

/// Computes the `phi' = 0` Poincaré section for a set of initial conditions.
///
/// Crossings are refined on the dense output, keep the sign of `d phi'/dt`,
/// and carry the parent orbit's full-window `M` average. An empty result is
/// not an error; short windows simply produce no crossings.
pub fn poincare_section(
    params: &ModelParams,
    initials: &[PhaseState],
    t_end: f64,
    tol: f64,
) -> Result<Vec<SectionCrossing>> {
    let opts = OdeOptions::with_tol(tol);
    let mut all = Vec::new();
    for (id, ic) in initials.iter().enumerate() {
        let mut out = run_orbit(ic, params, t_end, &opts, true, false)?;
        for c in &mut out.crossings {
            c.orbit_id = id;
        }
        all.extend(out.crossings);
    }
    Ok(all)
}

/// Result of a reduced-orbit period computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodResult {
    Finite(f64),
    /// The orbit limits onto the pinched torus; no finite period exists.
    Divergent,
}

impl PeriodResult {
    pub fn finite(self) -> Option<f64> {
        match self {
            PeriodResult::Finite(t) => Some(t),
            PeriodResult::Divergent => None,
        }
    }
}

/// Period of the closed reduced orbit at `(M, energy)`, measured as the
/// first return to the starting axis point in the `(x', p')` flow.
///
/// Returns the divergent-period signal on the pinched torus itself and for
/// orbits that fail to close within the internal time budget. `delta = 0`
/// only.
pub fn period(params: &ModelParams, m_value: f64, energy: f64) -> Result<PeriodResult> {
    if params.delta != 0.0 {
        return Err(Error::Contract("reduced periods require delta = 0".into()));
    }
    let (r_min, r_max) = domain_radii(m_value)?;
    if r_max <= 0.0 {
        return Err(Error::Domain("empty domain at M = 0".into()));
    }
    let cv = critical_values(params);
    if params.lambda_gamma() > cv.lambda_c_prime
        && (m_value - 1.0).abs() < 1e-9
        && (energy - params.omega0 / 2.0).abs() < 1e-9
    {
        return Ok(PeriodResult::Divergent);
    }

    // Axis crossings with the requested energy: H' is even in p', so every
    // closed level curve crosses p' = 0 at least twice. Collect all roots
    // and start from the one farthest from the domain circles, where the
    // rotating chart degenerates; near-critical curves hug both circles.
    let profile = |xp: f64| -> f64 {
        let ts = TransformedState {
            xp,
            pp: 0.0,
            m_value,
            phip: 0.0,
        };
        hamiltonian_transformed(&ts, params).expect("scan stays inside the domain") - energy
    };
    let inset = 1e-9 * r_max.max(1.0);
    let mut segments = Vec::new();
    if r_min > 0.0 {
        segments.push((-r_max + inset, -r_min - inset));
        segments.push((r_min + inset, r_max - inset));
    } else {
        segments.push((-r_max + inset, r_max - inset));
    }
    let mut roots = Vec::new();
    for (a, b) in segments {
        if b <= a {
            continue;
        }
        let steps = 4000;
        let dx = (b - a) / steps as f64;
        let mut xa = a;
        let mut fa = profile(xa);
        for i in 1..=steps {
            let xb = a + dx * i as f64;
            let fb = profile(xb);
            if (fa < 0.0) != (fb < 0.0) && fa != 0.0 {
                let (mut lo, mut hi, mut flo) = (xa, xb, fa);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = profile(mid);
                    if (fm < 0.0) == (flo < 0.0) && fm != 0.0 {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            xa = xb;
            fa = fb;
        }
    }
    let pole_margin = |xp: f64| {
        let (u, v) = pole_factors(m_value, xp * xp);
        u.min(v)
    };
    let x0 = roots
        .into_iter()
        .max_by(|a, b| pole_margin(*a).total_cmp(&pole_margin(*b)))
        .ok_or_else(|| {
            Error::Domain(format!(
                "energy {energy} outside the accessible band at M = {m_value}"
            ))
        })?;

    let flow = ReducedFlow::new(params, m_value);
    if flow.rhs(&[x0, 0.0])[1].abs() < 1e-10 {
        return Err(Error::Domain(
            "energy sits at a stationary point; the orbit is a fixed point".into(),
        ));
    }

    // Integrate in the globally regular laboratory chart and watch the
    // reduced coordinates through the transform; stepping the reduced flow
    // directly underflows where the level curve touches a domain circle.
    let start = transform_backward(
        &TransformedState {
            xp: x0,
            pp: 0.0,
            m_value,
            phip: 0.0,
        },
        wrap_angle(0.5 - m_value),
    )?;
    let y0 = [start.x, start.p, start.s[0], start.s[1], start.s[2]];
    let match_tol = 1e-6 * r_max.max(1.0);
    // The reconstructed launch leaves p' at roundoff rather than exactly
    // zero; the dead time discards that root. Orbital periods at the
    // model's frequency scales sit far above it.
    let dead_time = 1e-3;
    let events = [EventSpec::<5> {
        function: Box::new(|_t, y: &[f64; 5]| transform_forward(&state_from(y)).pp),
        direction: EventDirection::Any,
        gate: Some(Box::new(move |t, y: &[f64; 5]| {
            t > dead_time && (transform_forward(&state_from(y)).xp - x0).abs() < match_tol
        })),
        terminal: true,
    }];
    let lab = SpinFlow::new(params);
    let renorm = |y: &mut [f64; 5]| {
        let n = (y[2] * y[2] + y[3] * y[3] + y[4] * y[4]).sqrt();
        let f = 0.5 / n;
        y[2] *= f;
        y[3] *= f;
        y[4] *= f;
    };
    let opts = OdeOptions {
        h_max: 0.05,
        ..OdeOptions::with_tol(1e-12)
    };
    let sol = integrate_adaptive(|_t, y| lab.rhs(y), (0.0, 500.0), y0, &opts, &events, renorm)?;
    if !sol.terminated {
        return Ok(PeriodResult::Divergent);
    }
    Ok(PeriodResult::Finite(*sol.times.last().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{Sector, Spectrum};

    fn tuned(lambda: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, lambda, 0.0, 40, 40).unwrap()
    }

    #[test]
    fn conservation_budget_holds() {
        // Random delta = 0 orbit over t = 100 at tol = 1e-10: energy within
        // 100 * tol * t_end, M within 1e-8.
        let params = tuned(2.5);
        let ic = PhaseState::from_angles(0.7, -0.3, 1.1, 0.2).unwrap();
        let trace = integrate(&ic, &params, 100.0, 1e-10).unwrap();
        assert!((trace.times.last().unwrap() - 100.0).abs() < 1e-9);
        assert!(trace.energy_drift() < 1e-6, "drift {}", trace.energy_drift());
        assert!(trace.m_drift() < 1e-8, "M drift {}", trace.m_drift());
        for st in &trace.states {
            assert!(st.spin_norm_defect() < 1e-13);
        }
    }

    #[test]
    fn counter_rotating_term_breaks_m() {
        let params = ModelParams::new(1.0, 1.0, 2.5, 0.4, 40, 40).unwrap();
        let ic = PhaseState::from_angles(0.7, -0.3, 1.1, 0.2).unwrap();
        let trace = integrate(&ic, &params, 50.0, 1e-10).unwrap();
        assert!(trace.m_drift() > 1e-4, "M drift {}", trace.m_drift());
        // Energy is still conserved.
        assert!(trace.energy_drift() < 1e-6);
    }

    #[test]
    fn decoupled_orbit_matches_exact_solution() {
        let params = ModelParams::new(1.3, 1.0, 0.0, 0.0, 40, 40).unwrap();
        let ic = PhaseState::from_angles(0.5, 0.0, 0.4, 0.25).unwrap();
        let trace = integrate(&ic, &params, 10.0, 1e-12).unwrap();
        let t = *trace.times.last().unwrap();
        let st = trace.states.last().unwrap();
        // Field rotates at omega, spin precesses at omega0.
        assert!((st.x - 0.5 * (1.3 * t).cos()).abs() < 1e-9);
        assert!((st.p + 0.5 * (1.3 * t).sin()).abs() < 1e-9);
        let rho = ic.rho();
        assert!((st.s[0] - rho * (0.4 + t).cos()).abs() < 1e-9);
        assert!((st.s[1] - rho * (0.4 + t).sin()).abs() < 1e-9);
        assert!((st.s[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tuned_pinched_orbit_returns_home() {
        let params = tuned(2.5);
        let trace = pinched_orbit(&params, 0.7, 1e-6).unwrap();
        assert!(trace.terminated);
        // Launch sits exactly on the critical contour E = omega0 / 2.
        assert!((trace.energies[0] - 0.5).abs() < 1e-12);
        assert!((trace.m_values[0] - 1.0).abs() < 1e-12);
        assert!(trace.energy_drift() < 1e-8);
        assert!(trace.m_drift() < 1e-8);
        // Returns into the polar gate near the north pole.
        let last = trace.states.last().unwrap();
        assert!(last.rho() < RETURN_GATE);
        assert!(last.z() > 0.49);
        // On resonance the loop dives through the south pole and crosses the
        // equator twice.
        assert!(trace.events_of(OrbitEventKind::SouthPole).count() >= 1);
        assert!(trace.events_of(OrbitEventKind::Equator).count() >= 2);
        assert!(trace.events_of(OrbitEventKind::NorthPole).count() >= 1);
    }

    #[test]
    fn detuned_pinched_orbit_avoids_the_south_pole() {
        let params = ModelParams::new(2.0, 1.0, 2.5, 0.0, 40, 40).unwrap();
        let trace = pinched_orbit(&params, 0.0, 1e-6).unwrap();
        assert!(trace.terminated);
        assert!((trace.energies[0] - 0.5).abs() < 1e-12);
        assert!(trace.energy_drift() < 1e-8);
        assert_eq!(trace.events_of(OrbitEventKind::SouthPole).count(), 0);
        assert!(trace.events_of(OrbitEventKind::Equator).count() >= 2);
        // The south pole stays at a finite distance; record the closest
        // approach for reference.
        let min_south = trace
            .states
            .iter()
            .map(|s| (s.rho().powi(2) + (s.z() + 0.5).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(min_south > POLE_GATE);
    }

    #[test]
    fn pinched_orbit_requires_supercritical_coupling() {
        let sub = ModelParams::new(2.0, 1.0, 0.3, 0.0, 40, 40).unwrap();
        assert!(matches!(pinched_orbit(&sub, 0.0, 1e-6), Err(Error::Domain(_))));
        let mut with_delta = tuned(2.5);
        with_delta.delta = 0.1;
        assert!(matches!(
            pinched_orbit(&with_delta, 0.0, 1e-6),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            pinched_orbit(&tuned(2.5), 0.0, 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dwell_time_scales_logarithmically() {
        // Escape time grows by ln(10) / lambda_gamma per epsilon decade.
        let params = tuned(2.5);
        let esc = |eps: f64| -> f64 {
            let trace = pinched_orbit(&params, 0.7, eps).unwrap();
            let rho: Vec<f64> = trace.states.iter().map(|s| s.rho()).collect();
            let i = rho.iter().position(|&r| r >= FIT_CEIL).unwrap();
            // ln(rho) is linear in t near the pole; interpolate the exit.
            let f = (FIT_CEIL.ln() - rho[i - 1].ln()) / (rho[i].ln() - rho[i - 1].ln());
            trace.times[i - 1] + f * (trace.times[i] - trace.times[i - 1])
        };
        let t6 = esc(1e-6);
        let t7 = esc(1e-7);
        let t8 = esc(1e-8);
        let step = 10.0_f64.ln() / 2.5;
        assert!((t7 - t6 - step).abs() < 0.02, "decade step {}", t7 - t6);
        assert!((t8 - t7 - step).abs() < 0.02, "decade step {}", t8 - t7);
    }

    #[test]
    fn spiral_fit_recovers_rates() {
        // The return leg hugs the pole less deeply than the launch leg, so
        // a deep launch is needed for two full windings.
        let params = tuned(2.5);
        let trace = pinched_orbit(&params, 0.7, 1e-11).unwrap();
        let fit = spiral_fit(&trace).unwrap();
        // Escape and approach rates are +-lambda_gamma on resonance.
        assert!((fit.exponent_out - 2.5).abs() < 0.025, "out {}", fit.exponent_out);
        assert!((fit.exponent_in + 2.5).abs() < 0.025, "in {}", fit.exponent_in);
        // The spiral turns at the spin precession rate omega0.
        assert!((fit.frequency - 1.0).abs() < 0.01, "freq {}", fit.frequency);
        assert!(fit.windings >= 2.0 && fit.windings < 3.0, "windings {}", fit.windings);
        assert!(fit.escape_time < fit.reentry_time);
    }

    #[test]
    fn detuned_spiral_rates_include_the_launch_angle() {
        // Off resonance the saddle rate is lambda_gamma sqrt(1 - (lambda'_c
        // / lambda_gamma)^2) and the polar precession is (omega + omega0)/2.
        let params = ModelParams::new(2.0, 1.0, 2.5, 0.0, 40, 40).unwrap();
        let trace = pinched_orbit(&params, 0.0, 1e-11).unwrap();
        let fit = spiral_fit(&trace).unwrap();
        let sigma = 2.5 * (1.0 - (0.5 / 2.5_f64).powi(2)).sqrt();
        assert!((fit.exponent_out - sigma).abs() < 0.03, "out {}", fit.exponent_out);
        assert!((fit.exponent_in + sigma).abs() < 0.03, "in {}", fit.exponent_in);
        assert!((fit.frequency - 1.5).abs() < 0.02, "freq {}", fit.frequency);
    }

    #[test]
    fn spiral_fit_needs_windings() {
        let params = tuned(2.5);
        let trace = pinched_orbit(&params, 0.7, 1e-3).unwrap();
        assert!(matches!(
            spiral_fit(&trace),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn section_initial_conditions_sit_on_the_section() {
        for delta in [0.0, 0.4] {
            let params = ModelParams::new(1.0, 1.0, 2.5, delta, 40, 40).unwrap();
            for m0 in [0.75, 1.0, 1.2] {
                let st = section_initial_condition(&params, m0, 0.5).unwrap();
                assert!((invariant_m(&st) - m0).abs() < 1e-9);
                assert!((hamiltonian_full(&st, &params) - 0.5).abs() < 1e-9);
                // phi' = phi + M - 1/2 vanishes modulo 2 pi.
                let phip = wrap_angle(st.phi() + invariant_m(&st) - 0.5);
                let dist = phip.min(std::f64::consts::TAU - phip);
                assert!(dist < 1e-7, "phi' = {phip}");
            }
        }
        // Unreachable energy errors out.
        let params = tuned(2.5);
        assert!(matches!(
            section_initial_condition(&params, 1.0, 50.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn poincare_crossings_lie_on_the_section() {
        let params = tuned(2.5);
        let ics = [
            section_initial_condition(&params, 0.75, 0.5).unwrap(),
            section_initial_condition(&params, 1.2, 0.5).unwrap(),
        ];
        let crossings = poincare_section(&params, &ics, 150.0, 1e-10).unwrap();
        assert!(crossings.len() > 10, "only {} crossings", crossings.len());
        let mut seen = [false, false];
        for c in &crossings {
            seen[c.orbit_id] = true;
            assert!(c.direction == 1 || c.direction == -1);
            // Reconstruct phi' from the crossing state: x' and p' fix the
            // frame radius, M fixes z; the crossing parked phi' at 0 mod 2pi,
            // so sin(phi') as seen through the stored coordinates vanishes.
            // m_avg equals the conserved M at delta = 0.
            let m0 = if c.orbit_id == 0 { 0.75 } else { 1.2 };
            assert!((c.m_avg - m0).abs() < 1e-8);
            let r2 = c.xp * c.xp + c.pp * c.pp;
            let (r_min, r_max) = domain_radii(c.m_avg).unwrap();
            assert!(r2 >= r_min * r_min - 1e-9 && r2 <= r_max * r_max + 1e-9);
        }
        assert!(seen[0] && seen[1]);
        // Restart the same orbits half a frame turn away from the section:
        // a window far shorter than any sweep back to phi' = 0 stays empty.
        let far: Vec<PhaseState> = ics
            .iter()
            .map(|st| {
                let ts = transform_forward(st);
                transform_backward(&ts, st.phi() + std::f64::consts::PI).unwrap()
            })
            .collect();
        let none = poincare_section(&params, &far, 1e-4, 1e-10).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn section_angle_is_refined() {
        // Each refined crossing satisfies |phi' mod 2 pi| below 1e-10.
        let params = tuned(2.5);
        let ic = section_initial_condition(&params, 0.75, 0.5).unwrap();
        let out = run_orbit(
            &ic,
            &params,
            100.0,
            &OdeOptions::with_tol(1e-10),
            true,
            false,
        )
        .unwrap();
        assert!(!out.crossings.is_empty());
        for st in &out.crossing_states {
            let phip = wrap_angle(st.phi() + invariant_m(st) - 0.5);
            let dist = phip.min(std::f64::consts::TAU - phip);
            assert!(dist < 1e-10, "phi' residual {dist}");
        }
        // The trace itself conserves energy to the integration budget.
        assert!(out.trace.energy_drift() < 1e-6);
    }

    #[test]
    fn decoupled_period_is_the_detuning_period() {
        let params = ModelParams::new(2.0, 1.0, 0.0, 0.0, 40, 40).unwrap();
        let tau = period(&params, 0.75, {
            // Any accessible energy: H' = omega0 M - omega/2 + dw (r^2+1)/2.
            1.0 * 0.75 - 1.0 + (0.5 + 1.0) / 2.0
        })
        .unwrap()
        .finite()
        .unwrap();
        assert!((tau - std::f64::consts::TAU).abs() < 1e-6, "tau {tau}");
    }

    #[test]
    fn period_diverges_on_the_pinched_torus() {
        let params = tuned(2.5);
        assert_eq!(
            period(&params, 1.0, 0.5).unwrap(),
            PeriodResult::Divergent
        );
        // Approaching the separatrix from below, the period grows by
        // ln(10) / lambda_gamma per decade of energy distance.
        let tau = |d: f64| period(&params, 1.0, 0.5 - d).unwrap().finite().unwrap();
        let taus: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&d| tau(d))
            .collect();
        for w in taus.windows(2) {
            assert!(w[1] > w[0], "periods not monotone: {taus:?}");
        }
        let g1 = taus[3] - taus[2];
        let g2 = taus[4] - taus[3];
        assert!((g1 - g2).abs() < 0.05 * g1, "decade steps {g1} vs {g2}");
        assert!(g1 > 0.5 * (10.0_f64.ln() / 2.5) && g1 < 2.5 * (10.0_f64.ln() / 2.5));
    }

    #[test]
    fn period_rejects_bad_input() {
        let params = tuned(2.5);
        assert!(matches!(
            period(&params, 0.75, 100.0),
            Err(Error::Domain(_))
        ));
        let mut with_delta = tuned(2.5);
        with_delta.delta = 0.2;
        assert!(matches!(
            period(&with_delta, 0.75, 0.3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn period_matches_quantum_spacing() {
        // Semiclassical check: Delta E * tau = 2 pi h_eff for neighboring
        // levels of the M block, i.e. unscaled spacing times period is 2 pi.
        let params = ModelParams::new(1.0, 1.0, 2.5, 0.0, 80, 80).unwrap();
        let m_quantum = 60; // M = 60 / (2 j) = 0.75 in scaled units.
        let spec = Spectrum::compute(&params, &Sector::MBlock(m_quantum)).unwrap();
        let k = spec.len() / 3;
        let e_scaled = spec.energies[k] * params.hbar_eff();
        let tau = period(&params, 0.75, e_scaled).unwrap().finite().unwrap();
        let spacing = (spec.energies[k + 1] - spec.energies[k - 1]) / 2.0;
        let ratio = spacing * tau / std::f64::consts::TAU;
        assert!(
            (ratio - 1.0).abs() < 0.05,
            "semiclassical ratio {ratio} at level {k}"
        );
    }
}
