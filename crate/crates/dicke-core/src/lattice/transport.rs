//! Parallel transport of lattice cells and monodromy extraction.

use super::grid::Lattice;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two prediction candidates closer than this are an ambiguity error.
const AMBIGUITY_TOL: f64 = 1e-9;
/// Largest rounding distance tolerated when the final cell is expressed in
/// the initial basis.
const RESIDUAL_MAX: f64 = 0.1;

/// A local lattice cell: the frame spanned by one unit step in the column
/// direction and one unit step up in level index, attached at `base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    /// Anchor point (column, k).
    pub base: (i64, usize),
    /// Step to the same k in the next column: (1, E_k(M+1) - E_k(M)).
    pub v_m: (f64, f64),
    /// Step to the next level in the same column: (0, E_{k+1}(M) - E_k(M)).
    pub v_k: (f64, f64),
}

impl Cell {
    /// Measure the cell at (column, k). Needs the level itself, the same
    /// index in the next column, and the next index in the same column.
    pub fn at(lattice: &Lattice, column: i64, k: usize) -> Result<Cell> {
        let e = lattice
            .energy(column, k)
            .ok_or_else(|| Error::Domain(format!("no lattice point at ({column}, {k})")))?;
        let e_right = lattice.energy(column + 1, k).ok_or_else(|| {
            Error::Domain(format!("cell at ({column}, {k}) leaves the lattice in M"))
        })?;
        let e_up = lattice.energy(column, k + 1).ok_or_else(|| {
            Error::Domain(format!("cell at ({column}, {k}) leaves the lattice in k"))
        })?;
        let v_k = (0.0, e_up - e);
        if v_k.1 <= 0.0 {
            return Err(Error::Numerical(format!(
                "degenerate cell at ({column}, {k}): non-increasing column"
            )));
        }
        Ok(Cell { base: (column, k), v_m: (1.0, e_right - e), v_k })
    }
}

/// One unit move of a transport path in (column, index) space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopStep {
    MPlus,
    MMinus,
    KPlus,
    KMinus,
}

/// Integer monodromy of a closed transport path, with the worst rounding
/// distance seen when solving for the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyMatrix {
    /// Rows are the transported basis vectors expressed in the initial
    /// basis: row 0 the image of v_m, row 1 the image of v_k.
    pub matrix: [[i64; 2]; 2],
    /// Max distance of any raw coefficient from its rounded integer.
    pub residual: f64,
}

impl MonodromyMatrix {
    pub fn identity() -> MonodromyMatrix {
        MonodromyMatrix { matrix: [[1, 0], [0, 1]], residual: 0.0 }
    }

    pub fn det(&self) -> i64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }
}

/// One corner of the transported cell, followed by continuity.
#[derive(Debug, Clone, Copy)]
struct Anchor {
    col: i64,
    k: usize,
    energy: f64,
    /// Energy change per +1 column step along the chain this corner rides.
    slope: f64,
}

impl Anchor {
    /// Move one column over, re-anchoring to the level nearest the linear
    /// extrapolation and replacing the slope with the realized difference.
    fn shift_m(&mut self, lattice: &Lattice, dir: i64) -> Result<()> {
        let target = self.col + dir;
        let prediction = self.energy + self.slope * dir as f64;
        let (k_new, e_new) = re_anchor(lattice, target, prediction)?;
        self.slope = (e_new - self.energy) * dir as f64;
        self.col = target;
        self.k = k_new;
        self.energy = e_new;
        Ok(())
    }

    /// Move one level index up or down within the current column.
    fn shift_k(&mut self, lattice: &Lattice, dir: i64) -> Result<()> {
        let k_new = if dir > 0 {
            self.k + 1
        } else {
            self.k.checked_sub(1).ok_or_else(|| {
                Error::Domain(format!("transport leaves the lattice below column {}", self.col))
            })?
        };
        self.energy = lattice.energy(self.col, k_new).ok_or_else(|| {
            Error::Domain(format!("transport leaves the lattice at ({}, {k_new})", self.col))
        })?;
        self.k = k_new;
        Ok(())
    }
}

/// Find the level in `column` closest to `prediction`. Errors if the two
/// best candidates are indistinguishable at [`AMBIGUITY_TOL`].
fn re_anchor(lattice: &Lattice, column: i64, prediction: f64) -> Result<(usize, f64)> {
    let levels = lattice
        .column(column)
        .ok_or_else(|| Error::Domain(format!("transport leaves the lattice at column {column}")))?;
    let mut best = (0usize, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (k, point) in levels.iter().enumerate() {
        let d = (point.energy - prediction).abs();
        if d < best.1 {
            second = best.1;
            best = (k, d);
        } else if d < second {
            second = d;
        }
    }
    if second - best.1 < AMBIGUITY_TOL {
        return Err(Error::Numerical(format!(
            "ambiguous re-anchoring at column {column}: two levels within {AMBIGUITY_TOL:e} \
             of the prediction"
        )));
    }
    Ok((best.0, levels[best.0].energy))
}

/// Transport a cell along a closed path of unit steps and express the final
/// frame in the initial one.
///
/// All three cell corners (base, M-corner, k-corner) move together: column
/// steps re-anchor each corner to the level nearest its own linear
/// extrapolation, keeping the realized difference as the new slope, and
/// index steps shift each corner within its column. Around a defect the
/// whole cell comes home displaced in k (the affine chart develops the
/// closed loop to a shifted endpoint), so the initial basis is carried to
/// the comparison point as the lattice cell at the returned anchor; on a
/// defect-free loop the anchor lands exactly home and that cell is the
/// initial one bit for bit. Coefficients are rounded to integers; a
/// rounding distance at or above `0.1` means the extraction failed.
pub fn transport_path(
    lattice: &Lattice,
    start: (i64, usize),
    steps: &[LoopStep],
) -> Result<MonodromyMatrix> {
    let net_m: i64 = steps
        .iter()
        .map(|s| match s {
            LoopStep::MPlus => 1,
            LoopStep::MMinus => -1,
            _ => 0,
        })
        .sum();
    let net_k: i64 = steps
        .iter()
        .map(|s| match s {
            LoopStep::KPlus => 1,
            LoopStep::KMinus => -1,
            _ => 0,
        })
        .sum();
    if net_m != 0 || net_k != 0 {
        return Err(Error::Contract(format!(
            "transport path is not closed (net steps M={net_m}, k={net_k})"
        )));
    }

    let initial = Cell::at(lattice, start.0, start.1)?;
    let a0 = initial.v_m.1;
    let b0 = initial.v_k.1;
    let e0 = lattice.energy(start.0, start.1).expect("start validated by Cell::at");

    // All slopes start at a0; each corner replaces it with its own realized
    // slope on the first column step, so retraced paths stay bit-exact.
    let mut base = Anchor { col: start.0, k: start.1, energy: e0, slope: a0 };
    let mut corner_m = Anchor { col: start.0 + 1, k: start.1, energy: e0 + a0, slope: a0 };
    let mut corner_k = Anchor { col: start.0, k: start.1 + 1, energy: e0 + b0, slope: a0 };

    for step in steps {
        let (dm, dk) = match step {
            LoopStep::MPlus => (1i64, 0i64),
            LoopStep::MMinus => (-1, 0),
            LoopStep::KPlus => (0, 1),
            LoopStep::KMinus => (0, -1),
        };
        for corner in [&mut base, &mut corner_m, &mut corner_k] {
            if dm != 0 {
                corner.shift_m(lattice, dm)?;
            } else {
                corner.shift_k(lattice, dk)?;
            }
        }
    }

    // The corners keep their relative column offsets, so the transported
    // edges are exactly one column step and zero column steps wide.
    let a_final = corner_m.energy - base.energy;
    let b_final = corner_k.energy - base.energy;
    let frame = Cell::at(lattice, base.col, base.k)?;
    solve_frame(frame.v_m.1, frame.v_k.1, a_final, b_final)
}

/// Express the transported frame {(1, a_f), (0, b_f)} in the initial frame
/// {(1, a0), (0, b0)} and round to the integer monodromy matrix. Unit first
/// components force A11 = 1 and A21 = 0 exactly.
fn solve_frame(a0: f64, b0: f64, a_final: f64, b_final: f64) -> Result<MonodromyMatrix> {
    let raw = [[1.0, (a_final - a0) / b0], [0.0, b_final / b0]];
    let mut matrix = [[0i64; 2]; 2];
    let mut residual = 0.0f64;
    for (i, row) in raw.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            let rounded = c.round();
            residual = residual.max((c - rounded).abs());
            matrix[i][j] = rounded as i64;
        }
    }
    if residual >= RESIDUAL_MAX {
        return Err(Error::Numerical(format!(
            "monodromy extraction failed: rounding residual {residual:.3} exceeds {RESIDUAL_MAX}"
        )));
    }
    let result = MonodromyMatrix { matrix, residual };
    if result.det().abs() != 1 {
        return Err(Error::Numerical(format!(
            "monodromy matrix is not unimodular (det = {})",
            result.det()
        )));
    }
    Ok(result)
}

/// Transport around the rectangle centered at `(M*, E*)` with the given
/// half-widths (columns, index steps).
///
/// The anchor starts at the bottom-left corner: column `M* - dm`, index
/// `dk` below the level nearest `E*` in that column. The loop runs
/// counterclockwise: right in M, up in k, left, down.
pub fn transport_loop(
    lattice: &Lattice,
    center: (i64, f64),
    half_widths: (u32, u32),
) -> Result<MonodromyMatrix> {
    let (dm, dk) = (half_widths.0 as usize, half_widths.1 as usize);
    if dm == 0 || dk == 0 {
        return Err(Error::Domain("loop half-widths must be at least 1".into()));
    }
    let base_col = center.0 - dm as i64;
    let levels = lattice.column(base_col).ok_or_else(|| {
        Error::Domain(format!("loop base column {base_col} is outside the lattice"))
    })?;
    let k_near = levels
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (a.energy - center.1).abs().total_cmp(&(b.energy - center.1).abs())
        })
        .map(|(k, _)| k)
        .expect("columns are non-empty by construction");
    let k_start = k_near.checked_sub(dk).ok_or_else(|| {
        Error::Domain(format!("loop extends below column {base_col}"))
    })?;

    let mut steps = Vec::with_capacity(4 * (dm + dk));
    steps.extend(std::iter::repeat_n(LoopStep::MPlus, 2 * dm));
    steps.extend(std::iter::repeat_n(LoopStep::KPlus, 2 * dk));
    steps.extend(std::iter::repeat_n(LoopStep::MMinus, 2 * dm));
    steps.extend(std::iter::repeat_n(LoopStep::KMinus, 2 * dk));
    transport_path(lattice, (base_col, k_start), &steps)
}
