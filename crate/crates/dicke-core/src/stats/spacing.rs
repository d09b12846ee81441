//! Semiclassical check of level spacings inside one conserved-M block.
//!
//! With M conserved the model reduces to one effective degree of freedom, so
//! adjacent levels of a block are separated by one quantum of the reduced
//! action: dE = 2 pi hbar_eff / tau in scaled units, with tau the period of
//! the classical orbit at the bracketing energy. The ratio returned here is
//! dE_abs * tau / (2 pi); the block size cancels because both the scaled
//! spacing and hbar_eff carry one factor of 1/(2j).

use crate::classical::{period, PeriodResult};
use crate::error::{Error, Result};
use crate::quantum::{Sector, Spectrum};

/// Ratio of the measured level spacing around `energy` (absolute units) to
/// the semiclassical quantum `2 pi hbar / tau`. Approaches 1 deep in the
/// correspondence regime.
///
/// The spectrum must be a conserved-M block at `delta = 0`; `energy` must lie
/// inside the block's spectral range. The classical torus is the one with
/// `M_cl = hbar_eff * (M + 1/2)`, the half quantum coming from the Maslov
/// index of the bosonic degree of freedom, at the scaled energy of the
/// bracket midpoint.
pub fn spacing_check(spectrum: &Spectrum, energy: f64) -> Result<f64> {
    let Sector::MBlock(m_block) = spectrum.sector else {
        return Err(Error::Contract(
            "spacing check needs a conserved-M block, not a parity sector".into(),
        ));
    };
    if spectrum.params.delta != 0.0 {
        return Err(Error::Contract(format!(
            "spacing check requires delta = 0, got {}",
            spectrum.params.delta
        )));
    }
    let levels = &spectrum.energies;
    if levels.len() < 2 {
        return Err(Error::Domain(
            "spacing check needs at least two levels".into(),
        ));
    }
    if !energy.is_finite() || energy < levels[0] || energy > levels[levels.len() - 1] {
        return Err(Error::Domain(format!(
            "energy {energy} lies outside the block's range [{}, {}]",
            levels[0],
            levels[levels.len() - 1]
        )));
    }
    let hi = levels.partition_point(|&e| e <= energy).min(levels.len() - 1);
    let lo = hi - 1;
    let spacing = levels[hi] - levels[lo];
    let midpoint = 0.5 * (levels[hi] + levels[lo]);
    let hbar = spectrum.params.hbar_eff();
    let m_cl = hbar * (m_block as f64 + 0.5);
    let e_cl = hbar * midpoint;
    match period(&spectrum.params, m_cl, e_cl)? {
        PeriodResult::Divergent => Err(Error::Numerical(
            "the bracket midpoint sits on the pinched orbit; the period diverges".into(),
        )),
        PeriodResult::Finite(tau) => Ok(spacing * tau / (2.0 * std::f64::consts::PI)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ModelParams;

    fn block(params: &ModelParams, m: i64) -> Spectrum {
        Spectrum::compute(params, &Sector::MBlock(m)).unwrap()
    }

    #[test]
    fn uncoupled_detuned_block_is_exactly_quantized() {
        // At lambda = 0 the block spectrum is an exact ladder of spacing
        // |omega - omega0| and the reduced orbit is a circle of period
        // 2 pi / |omega - omega0|, so the ratio is 1 up to quadrature error.
        let params = ModelParams::new(2.0, 1.0, 0.0, 0.0, 20, 20).unwrap();
        let spectrum = block(&params, 10);
        let mid = 0.5 * (spectrum.energies[0] + spectrum.energies[spectrum.len() - 1]);
        let ratio = spacing_check(&spectrum, mid).unwrap();
        assert!((ratio - 1.0).abs() < 1e-6, "ratio = {ratio}");
    }

    #[test]
    fn midspectrum_ratio_approaches_one() {
        // Supercritical coupling, M_cl ~ 0.75, mid-spectrum: measured 1.009
        // at 2j = 80, well inside the 5% correspondence band.
        let params = ModelParams::new(1.0, 1.0, 2.5, 0.0, 80, 80).unwrap();
        let spectrum = block(&params, 60);
        let mid = 0.5 * (spectrum.energies[0] + spectrum.energies[spectrum.len() - 1]);
        let ratio = spacing_check(&spectrum, mid).unwrap();
        assert!((ratio - 1.0).abs() < 0.05, "ratio = {ratio}");
    }

    #[test]
    fn ratio_converges_as_j_doubles() {
        // Measured errors 1.9e-2, 9.0e-3, 4.5e-3: the deviation halves with
        // each doubling, the first-order hbar_eff scaling.
        let mut errs = Vec::new();
        for two_j in [40u32, 80, 160] {
            let params = ModelParams::new(1.0, 1.0, 2.5, 0.0, two_j, two_j).unwrap();
            let spectrum = block(&params, two_j as i64 * 3 / 4);
            let mid = 0.5 * (spectrum.energies[0] + spectrum.energies[spectrum.len() - 1]);
            let ratio = spacing_check(&spectrum, mid).unwrap();
            errs.push((ratio - 1.0).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 0.01, "{errs:?}");
    }

    #[test]
    fn spacing_collapses_at_the_separatrix() {
        // On the M = 2j block the density diverges at omega0 * j, so the
        // local spacing dips there: measured 1.95 at E = 40 against 3.17 at
        // E = 20 and 4.24 at E = -40 for 2j = 80.
        let params = ModelParams::new(1.0, 1.0, 2.5, 0.0, 80, 80).unwrap();
        let spectrum = block(&params, 80);
        let near = |target: f64| -> f64 {
            let i = spectrum
                .energies
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .unwrap()
                .0
                .clamp(1, spectrum.len() - 1);
            spectrum.energies[i] - spectrum.energies[i - 1]
        };
        assert!(near(40.0) < 0.65 * near(20.0));
        assert!(near(20.0) < near(0.0) && near(0.0) < near(-40.0));
    }

    #[test]
    fn energies_outside_the_block_are_domain_errors() {
        let params = ModelParams::new(2.0, 1.0, 0.0, 0.0, 20, 20).unwrap();
        let spectrum = block(&params, 10);
        let below = spectrum.energies[0] - 1.0;
        assert!(matches!(
            spacing_check(&spectrum, below),
            Err(Error::Domain(_))
        ));
        let above = spectrum.energies[spectrum.len() - 1] + 1.0;
        assert!(matches!(
            spacing_check(&spectrum, above),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            spacing_check(&spectrum, f64::NAN),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn wrong_sectors_and_nonzero_delta_are_contract_errors() {
        let params = ModelParams::new(1.0, 1.0, 0.5, 0.0, 10, 10).unwrap();
        let parity = Spectrum::compute(
            &params,
            &Sector::ParityBlock {
                parity: 1,
                n_max: 20,
            },
        )
        .unwrap();
        assert!(matches!(
            spacing_check(&parity, 0.0),
            Err(Error::Contract(_))
        ));

        let detuned = ModelParams::new(1.0, 1.0, 0.5, 0.1, 10, 10).unwrap();
        let spectrum = block(&detuned, 5);
        let mid = 0.5 * (spectrum.energies[0] + spectrum.energies[spectrum.len() - 1]);
        assert!(matches!(
            spacing_check(&spectrum, mid),
            Err(Error::Contract(_))
        ));
    }
}
