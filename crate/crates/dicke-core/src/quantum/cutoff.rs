use super::basis::Sector;
use super::spectrum::Spectrum;
use crate::{Error, ModelParams, Result};

/// Hard cap on the parity-block dimension the doubling search may reach.
const MAX_BLOCK_DIM: usize = 60_000;

/// Find a boson cutoff for parity-block diagonalization by doubling: return
/// the smallest `n_max` from the sequence `ceil(ceiling/ω)·2^k` such that no
/// eigenvalue below `energy_ceiling` (in either parity sector) moves by more
/// than `tol` when the cutoff is doubled. Each retained eigenvalue is paired
/// with the nearest one of the doubled basis, so levels newly resolved below
/// the ceiling by the larger basis do not mask the stability of existing ones.
pub fn converge_cutoff(params: &ModelParams, energy_ceiling: f64, tol: f64) -> Result<u32> {
    params.validate()?;
    if !energy_ceiling.is_finite() || !(tol > 0.0) {
        return Err(Error::Contract(format!(
            "need finite ceiling and tol > 0, got ceiling={energy_ceiling} tol={tol}"
        )));
    }

    let mut n_max = ((energy_ceiling / params.omega).ceil() as i64).max(1) as u32;
    check_budget(params, n_max, tol)?;
    let mut below = levels_below(params, n_max, energy_ceiling)?;
    loop {
        let doubled = n_max * 2;
        check_budget(params, doubled, tol)?;
        let below_doubled = levels_below(params, doubled, energy_ceiling)?;
        if max_shift(&below, &below_doubled) < tol {
            return Ok(n_max);
        }
        n_max = doubled;
        below = below_doubled;
    }
}

fn check_budget(params: &ModelParams, n_max: u32, tol: f64) -> Result<()> {
    let dim = Sector::ParityBlock { parity: 1, n_max }.dimension(params);
    if dim > MAX_BLOCK_DIM {
        return Err(Error::Resource(format!(
            "cutoff search exceeded dimension budget: n_max={n_max} gives parity blocks of \
             dimension {dim} (> {MAX_BLOCK_DIM}) before the shift dropped below tol={tol}"
        )));
    }
    Ok(())
}

/// Sorted union of both parity-sector eigenvalues below the ceiling.
fn levels_below(params: &ModelParams, n_max: u32, ceiling: f64) -> Result<Vec<f64>> {
    let mut all = Vec::new();
    for parity in [1i8, -1] {
        let s = Spectrum::compute(params, &Sector::ParityBlock { parity, n_max })?;
        all.extend(s.energies.iter().copied().take_while(|&e| e < ceiling));
    }
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// Largest distance from a coarse level to its nearest fine level. Both
/// inputs are sorted.
fn max_shift(coarse: &[f64], fine: &[f64]) -> f64 {
    if coarse.is_empty() {
        return 0.0;
    }
    if fine.is_empty() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    let mut lo = 0usize;
    for &e in coarse {
        while lo + 1 < fine.len() && fine[lo + 1] <= e {
            lo += 1;
        }
        let mut best = (fine[lo] - e).abs();
        if lo + 1 < fine.len() {
            best = best.min((fine[lo + 1] - e).abs());
        }
        worst = worst.max(best);
    }
    worst
}
