//! Disorder score for the eigenvalue lattice as the M-mixing term grows.
//!
//! At `delta = 0` the pairs (⟨M̂⟩, E) of every eigenstate form a regular
//! lattice: ⟨M̂⟩ is an exact integer and levels continue smoothly from one
//! column to the next. At `delta > 0` the conservation law is gone, ⟨M̂⟩
//! drifts off the integers and level continuation becomes ambiguous. The
//! score measures how much of a window has melted.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// A nearest candidate must be at least this factor closer than the runner-up
/// for a continuation step to count as unambiguous.
const AMBIGUITY_RATIO: f64 = 0.5;

/// Disorder score of one lattice within an analysis window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DisorderScore {
    /// Mixing strength the lattice was built at.
    pub delta: f64,
    /// `flagged / interior`; 0 for a perfect lattice.
    pub score: f64,
    /// Interior points whose continuation is ambiguous or whose local cell
    /// is not convex.
    pub flagged: usize,
    /// Points with the neighbors required for both checks.
    pub interior: usize,
}

/// Scores one lattice: the fraction of interior window points at which the
/// lattice structure has broken down.
///
/// Points are binned into pseudo-columns by rounding the abscissa (⟨M̂⟩) to
/// the nearest integer. A point is interior when both adjacent bins exist
/// and its own bin holds a level on each side of it; the extremal rows of a
/// bin sit on the spin-capacity fold at m = ±j, which is the boundary of the
/// lattice, not its interior. Two defects are counted:
///
/// - ambiguous continuation: extrapolating the point's energy through its
///   backward anchor into the next bin lands between two candidates instead
///   of selecting one (runner-up closer than [`AMBIGUITY_RATIO`] allows);
/// - non-convex cell: the quadrilateral spanned by the point, its upper
///   neighbor and the matching pair in the next bin, taken at raw abscissas,
///   fails the convexity sign test.
///
/// `m_window` bounds the pseudo-column index, `e_window` the energy of the
/// scored point; neighbors may lie outside `e_window` so cells at the window
/// edge stay intact.
pub fn disorder_score(
    lattice: &Lattice,
    delta: f64,
    m_window: (i64, i64),
    e_window: (f64, f64),
) -> Result<DisorderScore> {
    if m_window.0 > m_window.1 {
        return Err(Error::Domain(format!(
            "empty column window [{}, {}]",
            m_window.0, m_window.1
        )));
    }
    if !(e_window.0.is_finite() && e_window.1.is_finite() && e_window.0 < e_window.1) {
        return Err(Error::Domain(format!(
            "invalid energy window [{}, {}]",
            e_window.0, e_window.1
        )));
    }
    let mut bins: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for p in lattice.points() {
        let m = p.abscissa.round() as i64;
        if (m_window.0 - 1..=m_window.1 + 1).contains(&m) {
            bins.entry(m).or_default().push((p.abscissa, p.energy));
        }
    }
    for col in bins.values_mut() {
        col.sort_by(|a, b| a.1.total_cmp(&b.1));
    }
    let mut interior = 0usize;
    let mut flagged = 0usize;
    for (&m, col) in &bins {
        if !(m_window.0..=m_window.1).contains(&m) {
            continue;
        }
        let (Some(left), Some(right)) = (bins.get(&(m - 1)), bins.get(&(m + 1))) else {
            continue;
        };
        for kappa in 1..col.len() {
            let point = col[kappa];
            if point.1 < e_window.0 || point.1 > e_window.1 || kappa + 1 >= col.len() {
                continue;
            }
            let anchor = nearest(left, point.1);
            let prediction = 2.0 * point.1 - left[anchor].1;
            let (best, runner_up) = two_nearest(right, prediction);
            if best.1 + 1 >= right.len() {
                continue;
            }
            interior += 1;
            let ambiguous = match runner_up {
                Some(d2) => best.0 >= AMBIGUITY_RATIO * d2,
                None => false,
            };
            let cell = [
                point,
                right[best.1],
                right[best.1 + 1],
                col[kappa + 1],
            ];
            if ambiguous || !convex(&cell) {
                flagged += 1;
            }
        }
    }
    if interior == 0 {
        return Err(Error::Domain(
            "window contains no interior lattice points".into(),
        ));
    }
    Ok(DisorderScore {
        delta,
        score: flagged as f64 / interior as f64,
        flagged,
        interior,
    })
}

/// Scores a family of lattices built at increasing mixing strengths and
/// reports them in ascending `delta` order, one window for all.
pub fn breakdown_metric(
    lattices: &[(f64, Lattice)],
    m_window: (i64, i64),
    e_window: (f64, f64),
) -> Result<Vec<DisorderScore>> {
    if lattices.is_empty() {
        return Err(Error::Domain("no lattices to score".into()));
    }
    let mut scores = lattices
        .iter()
        .map(|(delta, lattice)| disorder_score(lattice, *delta, m_window, e_window))
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(scores)
}

/// Index of the column point nearest in energy to `target`; the column is
/// sorted by energy and nonempty.
fn nearest(col: &[(f64, f64)], target: f64) -> usize {
    let hi = col.partition_point(|p| p.1 < target);
    if hi == 0 {
        return 0;
    }
    if hi == col.len() {
        return col.len() - 1;
    }
    if target - col[hi - 1].1 <= col[hi].1 - target {
        hi - 1
    } else {
        hi
    }
}

/// Distance and index of the nearest point, plus the runner-up distance.
fn two_nearest(col: &[(f64, f64)], target: f64) -> ((f64, usize), Option<f64>) {
    let best = nearest(col, target);
    let d_best = (col[best].1 - target).abs();
    let mut d_second = f64::INFINITY;
    if best > 0 {
        d_second = d_second.min((col[best - 1].1 - target).abs());
    }
    if best + 1 < col.len() {
        d_second = d_second.min((col[best + 1].1 - target).abs());
    }
    (
        (d_best, best),
        d_second.is_finite().then_some(d_second),
    )
}

/// Convexity of the quadrilateral `q[0] -> q[1] -> q[2] -> q[3]` in the
/// (abscissa, energy) plane: every consecutive edge pair must turn the same
/// way. Degenerate (zero-area) turns count as broken.
fn convex(q: &[(f64, f64); 4]) -> bool {
    let mut sign = 0.0_f64;
    for i in 0..4 {
        let a = q[i];
        let b = q[(i + 1) % 4];
        let c = q[(i + 2) % 4];
        let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
        if cross == 0.0 {
            return false;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}
