//! Lattice construction from diagonalized sectors.

use crate::error::{Error, Result};
use crate::quantum::{Observable, Sector, Spectrum};

/// Tolerance below which two energies in a column count as degenerate.
const TIE_TOL: f64 = 1e-12;

/// One node of a spectral lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    /// Integer column label (the conserved M for eigenvalue lattices).
    pub column: i64,
    /// Index within the column, counting up in energy from zero.
    pub k: usize,
    /// Level energy.
    pub energy: f64,
    /// Plotting abscissa: the column value or an expectation value.
    pub abscissa: f64,
}

/// A family of energy-ordered columns in the (abscissa, energy) plane.
///
/// Columns are labeled by integers and each holds its levels in strictly
/// ascending energy order. Columns whose levels tie within `1e-12` are kept
/// but reported by [`Lattice::degenerate_columns`]; transport and chain
/// walks over such columns are unreliable.
#[derive(Debug, Clone)]
pub struct Lattice {
    points: Vec<LatticePoint>,
    // (column id, start, end) ranges into `points`, ascending by id.
    index: Vec<(i64, usize, usize)>,
    degenerate: Vec<i64>,
}

impl Lattice {
    /// Assemble a lattice from `(column id, [(energy, abscissa)])` groups.
    /// Levels are sorted by energy within each column; duplicate column ids
    /// are rejected.
    pub fn from_columns(mut columns: Vec<(i64, Vec<(f64, f64)>)>) -> Result<Lattice> {
        if columns.is_empty() {
            return Err(Error::InsufficientData("lattice needs at least one column".into()));
        }
        columns.sort_by_key(|(id, _)| *id);
        for pair in columns.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Contract(format!("duplicate lattice column {}", pair[0].0)));
            }
        }
        let mut points = Vec::new();
        let mut index = Vec::new();
        let mut degenerate = Vec::new();
        for (id, mut levels) in columns {
            if levels.is_empty() {
                return Err(Error::InsufficientData(format!("column {id} is empty")));
            }
            levels.sort_by(|a, b| a.0.total_cmp(&b.0));
            let start = points.len();
            for (k, (energy, abscissa)) in levels.iter().enumerate() {
                if !energy.is_finite() || !abscissa.is_finite() {
                    return Err(Error::Domain(format!("non-finite level in column {id}")));
                }
                points.push(LatticePoint { column: id, k, energy: *energy, abscissa: *abscissa });
            }
            let tied = levels
                .windows(2)
                .any(|w| (w[1].0 - w[0].0).abs() <= TIE_TOL * f64::max(1.0, w[0].0.abs()));
            if tied {
                degenerate.push(id);
            }
            index.push((id, start, points.len()));
        }
        Ok(Lattice { points, index, degenerate })
    }

    /// All points, ordered by column then by k.
    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    /// Column ids in ascending order.
    pub fn column_ids(&self) -> Vec<i64> {
        self.index.iter().map(|&(id, _, _)| id).collect()
    }

    /// The levels of one column, ascending in energy, or None if absent.
    pub fn column(&self, id: i64) -> Option<&[LatticePoint]> {
        let pos = self.index.binary_search_by_key(&id, |&(c, _, _)| c).ok()?;
        let (_, start, end) = self.index[pos];
        Some(&self.points[start..end])
    }

    /// Energy of level k in the given column, if both exist.
    pub fn energy(&self, column: i64, k: usize) -> Option<f64> {
        self.column(column)?.get(k).map(|p| p.energy)
    }

    /// Columns containing degenerate (tied) levels.
    pub fn degenerate_columns(&self) -> &[i64] {
        &self.degenerate
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_uniform_params(spectra: &[Spectrum]) -> Result<()> {
    if spectra.is_empty() {
        return Err(Error::InsufficientData("no spectra supplied".into()));
    }
    for s in &spectra[1..] {
        if s.params != spectra[0].params {
            return Err(Error::Contract("spectra mix different model parameters".into()));
        }
    }
    Ok(())
}

fn m_block_of(s: &Spectrum) -> Result<i64> {
    match s.sector {
        Sector::MBlock(m) => Ok(m),
        Sector::ParityBlock { .. } => {
            Err(Error::Contract("eigenvalue lattice needs fixed-M sectors".into()))
        }
    }
}

/// Build the eigenvalue lattice E_k(M) from per-M spectra at δ = 0.
///
/// The spectra must share parameters, have `delta == 0`, and cover a
/// contiguous M range; a missing column is a gap error because chain and
/// transport steps assume unit column spacing. Degenerate columns (as at
/// λ = 0 in the tuned model, where a whole column collapses onto one
/// energy) are flagged, not rejected.
pub fn em_lattice(spectra: &[Spectrum]) -> Result<Lattice> {
    check_uniform_params(spectra)?;
    if spectra[0].params.delta != 0.0 {
        return Err(Error::Contract("eigenvalue lattice requires delta = 0".into()));
    }
    let mut columns = Vec::with_capacity(spectra.len());
    for s in spectra {
        let m = m_block_of(s)?;
        let levels = s.energies.iter().map(|&e| (e, m as f64)).collect();
        columns.push((m, levels));
    }
    columns.sort_by_key(|(m, _)| *m);
    for pair in columns.windows(2) {
        let gap = pair[1].0 - pair[0].0;
        if gap == 0 {
            return Err(Error::Contract(format!("duplicate lattice column {}", pair[0].0)));
        }
        if gap != 1 {
            return Err(Error::Domain(format!(
                "missing column M={} in lattice range",
                pair[0].0 + 1
            )));
        }
    }
    Lattice::from_columns(columns)
}

/// Build a Peres lattice: points (⟨A⟩_k, E_k) for every eigenstate.
///
/// For fixed-M spectra the column label is M; for parity sectors it is the
/// parity sign, which keeps the two blocks separable in exports. Contiguity
/// is not required since the abscissa is the expectation value, not the
/// column.
pub fn peres_lattice(spectra: &[Spectrum], observable: Observable) -> Result<Lattice> {
    check_uniform_params(spectra)?;
    let mut columns = Vec::with_capacity(spectra.len());
    let parity_labels = matches!(spectra[0].sector, Sector::ParityBlock { .. });
    for s in spectra {
        let id = match s.sector {
            Sector::MBlock(m) if !parity_labels => m,
            Sector::ParityBlock { parity, .. } if parity_labels => parity as i64,
            _ => return Err(Error::Contract("spectra mix sector kinds".into())),
        };
        let values = s.expectations(observable);
        let levels = s.energies.iter().zip(values).map(|(&e, &a)| (e, a)).collect();
        columns.push((id, levels));
    }
    Lattice::from_columns(columns)
}
