//! Atomic writers for the crate's tabular and JSON outputs.
//!
//! Every writer stages its content in a temporary file next to the target
//! and renames it into place, so an interrupted run never leaves a partial
//! file. Floating-point values are printed with 12 significant digits:
//! enough to round-trip the physics, short enough to keep files diffable.
//! Missing parent directories are created. Non-finite values are rejected;
//! a NaN in an export always means an upstream bug.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::classical::{transform_forward, OrbitTrace, SectionCrossing};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::quantum::{Observable, Spectrum};
use crate::stats::DensityCurve;

/// Formats a float with 12 significant digits, trimming trailing zeros.
/// Magnitudes outside [1e-4, 1e12) switch to scientific notation.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let mag = x.abs().log10().floor() as i32;
    let mut s = if (-4..=11).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    };
    if let Some(dot) = s.find('.') {
        let exp_start = s.find('e').unwrap_or(s.len());
        let mut keep = exp_start;
        while keep > dot + 1 && s.as_bytes()[keep - 1] == b'0' {
            keep -= 1;
        }
        if keep == dot + 1 {
            keep = dot;
        }
        s.replace_range(keep..exp_start, "");
    }
    s
}

/// Rounds to the precision [`format_sig`] prints, for floats that end up in
/// JSON reports through serde.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format_sig(x).parse().expect("format_sig emits valid floats")
}

/// Spectrum table: one row per eigenstate of each sector.
pub fn write_spectrum_csv(path: &Path, spectra: &[Spectrum]) -> Result<()> {
    if spectra.is_empty() {
        return Err(Error::Domain("no spectra to export".into()));
    }
    let mut out = String::from("sector,k,E,exp_n,exp_J3,exp_M,parity\n");
    for spectrum in spectra {
        let n = spectrum.expectations(Observable::BosonNumber);
        let j3 = spectrum.expectations(Observable::J3);
        let m = spectrum.expectations(Observable::MOp);
        let parity = spectrum.expectations(Observable::Parity);
        for k in 0..spectrum.len() {
            let row = [spectrum.energies[k], n[k], j3[k], m[k], parity[k]];
            let mut fields = Vec::with_capacity(row.len());
            for value in row {
                fields.push(sig(value)?);
            }
            out.push_str(&format!(
                "{},{k},{}\n",
                spectrum.sector,
                fields.join(",")
            ));
        }
    }
    write_atomic(path, &out)
}

/// Orbit samples: lab-chart state, transformed chart, energy and `M`.
pub fn write_orbit_csv(path: &Path, trace: &OrbitTrace) -> Result<()> {
    if trace.times.is_empty() {
        return Err(Error::Domain("no orbit samples to export".into()));
    }
    let mut out = String::from("t,x,p,phi,z,xp,pp,E,M\n");
    for (i, state) in trace.states.iter().enumerate() {
        let tr = transform_forward(state);
        let row = [
            trace.times[i],
            state.x,
            state.p,
            state.phi(),
            state.z(),
            tr.xp,
            tr.pp,
            trace.energies[i],
            trace.m_values[i],
        ];
        push_row(&mut out, &row)?;
    }
    write_atomic(path, &out)
}

/// Poincare section crossings, tagged by parent orbit.
pub fn write_sections_csv(path: &Path, crossings: &[SectionCrossing]) -> Result<()> {
    if crossings.is_empty() {
        return Err(Error::Domain("no section crossings to export".into()));
    }
    let mut out = String::from("orbit_id,t,xp,pp,dir,M_avg\n");
    for c in crossings {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.orbit_id,
            sig(c.t)?,
            sig(c.xp)?,
            sig(c.pp)?,
            c.direction,
            sig(c.m_avg)?
        ));
    }
    write_atomic(path, &out)
}

/// Eigenvalue lattice points in column order.
pub fn write_lattice_csv(path: &Path, lattice: &Lattice) -> Result<()> {
    if lattice.is_empty() {
        return Err(Error::Domain("no lattice points to export".into()));
    }
    let mut out = String::from("column,k,abscissa,E\n");
    for p in lattice.points() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.column,
            p.k,
            sig(p.abscissa)?,
            sig(p.energy)?
        ));
    }
    write_atomic(path, &out)
}

/// Smoothed density curve as `E,rho` pairs.
pub fn write_density_csv(path: &Path, curve: &DensityCurve) -> Result<()> {
    if curve.grid.is_empty() {
        return Err(Error::Domain("no density samples to export".into()));
    }
    let mut out = String::from("E,rho\n");
    for (&e, &rho) in curve.grid.iter().zip(&curve.rho) {
        out.push_str(&format!("{},{}\n", sig(e)?, sig(rho)?));
    }
    write_atomic(path, &out)
}

/// Pretty-printed JSON, atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(format!("serializing {}: {e}", path.display())))?;
    write_atomic(path, &format!("{body}\n"))
}

fn push_row(out: &mut String, row: &[f64]) -> Result<()> {
    let mut first = true;
    for &value in row {
        if !first {
            out.push(',');
        }
        out.push_str(&sig(value)?);
        first = false;
    }
    out.push('\n');
    Ok(())
}

fn sig(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite value {x} in export")));
    }
    Ok(format_sig(x))
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let io_err = |stage: &str, e: std::io::Error| {
        Error::Io(format!("{stage} {}: {e}", path.display()))
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_err("creating directory for", e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("no file name in {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp).map_err(|e| io_err("creating", e))?;
        file.write_all(content.as_bytes())
            .map_err(|e| io_err("writing", e))?;
        file.sync_all().map_err(|e| io_err("syncing", e))?;
        fs::rename(&tmp, path).map_err(|e| io_err("renaming into", e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
