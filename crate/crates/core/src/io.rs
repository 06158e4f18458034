//! CSV writers for patterns, maps, spectra, reports and debug dumps.
//!
//! Floats are written in shortest round-trip form, so equal inputs give
//! byte-identical files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::decomp::TransferMatrix2D;
use crate::farfield::FarFieldPattern;
use crate::geometry::ArrayLattice;
use crate::linalg::CMatrix;
use crate::metrics::{CurrentSpectrum, MseReport, ScalingReport};
use crate::mom::CurrentDistribution;
use crate::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn db(x: f64) -> f64 {
    if x > 0.0 {
        (20.0 * x.log10()).max(crate::farfield::DB_FLOOR)
    } else {
        crate::farfield::DB_FLOOR
    }
}

/// Pattern samples with the total field normalized to its own peak.
pub fn write_pattern(path: &Path, pattern: &FarFieldPattern) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "theta_deg",
        "phi_deg",
        "re_Etheta",
        "im_Etheta",
        "re_Ephi",
        "im_Ephi",
        "mag_db_normalized",
    ])?;
    let mag_db = pattern.total_db();
    for (i, dir) in pattern.grid().directions().iter().enumerate() {
        let (et, ep) = (pattern.e_theta()[i], pattern.e_phi()[i]);
        w.serialize((
            dir.theta_deg,
            dir.phi_deg,
            et.re,
            et.im,
            ep.re,
            ep.im,
            mag_db[i],
        ))?;
    }
    finish(w, path)
}

/// `(u, v, mag_db)` rows; `uv` and `mag_db` are parallel.
pub fn write_uv_map(path: &Path, uv: &[(f64, f64)], mag_db: &[f64]) -> Result<()> {
    if uv.len() != mag_db.len() {
        return Err(Error::invalid("u-v samples and values differ in length"));
    }
    let mut w = writer(path)?;
    w.write_record(["u", "v", "mag_db"])?;
    for (&(u, v), m) in uv.iter().zip(mag_db) {
        w.serialize((u, v, m))?;
    }
    finish(w, path)
}

pub fn write_spectrum(path: &Path, spectrum: &CurrentSpectrum) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["u", "v", "mag_db"])?;
    for u in 1..=spectrum.nx {
        for v in 1..=spectrum.ny {
            w.serialize((u, v, spectrum.db[(u - 1) * spectrum.ny + v - 1]))?;
        }
    }
    finish(w, path)
}

pub fn write_mse(path: &Path, reports: &[MseReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "steer_deg",
        "method",
        "region_start_deg",
        "region_end_deg",
        "mse_db2",
    ])?;
    for r in reports {
        w.serialize((
            r.steer_theta_deg,
            r.method.to_string(),
            r.region_scan_deg.0,
            r.region_scan_deg.1,
            r.mse_db2,
        ))?;
    }
    finish(w, path)
}

pub fn write_bench(path: &Path, report: &ScalingReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "nx",
        "ny",
        "unknowns_decomp",
        "unknowns_oracle",
        "t_decomp_ms",
        "t_oracle_ms",
        "speedup",
    ])?;
    for r in &report.rows {
        w.serialize((
            r.nx,
            r.ny,
            r.unknowns_decomp,
            r.unknowns_oracle,
            r.decomp.total().as_secs_f64() * 1e3,
            r.oracle.total().as_secs_f64() * 1e3,
            r.speedup(),
        ))?;
    }
    finish(w, path)
}

/// Per-phase timings behind each bench row.
pub fn write_bench_breakdown(path: &Path, report: &ScalingReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "nx",
        "ny",
        "path",
        "fill_ms",
        "factor_ms",
        "solve_ms",
        "algebra_ms",
    ])?;
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    for r in &report.rows {
        for (name, t) in [("decomp", r.decomp), ("oracle", r.oracle)] {
            w.serialize((
                r.nx,
                r.ny,
                name,
                ms(t.solve.fill),
                ms(t.solve.factor),
                ms(t.solve.solve),
                ms(t.algebra),
            ))?;
        }
    }
    finish(w, path)
}

/// Dense matrix as `(row, col, re, im)`, 0-based.
pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["row", "col", "re", "im"])?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            w.serialize((r, c, z.re, z.im))?;
        }
    }
    finish(w, path)
}

/// Current vectors as `(row, col, re, im)`: row is the global unknown,
/// col the 0-based port slot.
pub fn write_currents(path: &Path, currents: &[CurrentDistribution]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["row", "col", "re", "im"])?;
    for j in currents {
        for (row, z) in j.values().iter().enumerate() {
            w.serialize((row, j.excited_port() - 1, z.re, z.im))?;
        }
    }
    finish(w, path)
}

/// `(mesh, element, port, magnitude_db)` for every Kronecker-expanded
/// coefficient; element and port are 1-based lattice indices.
pub fn write_transfer(path: &Path, t: &TransferMatrix2D) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["mesh", "element", "port", "magnitude_db"])?;
    let n = t.nx() * t.ny();
    for mesh in 0..t.segments() {
        for i in 0..n {
            for k in 0..n {
                w.serialize((mesh, i + 1, k + 1, db(t.coefficient(mesh, i, k).norm())))?;
            }
        }
    }
    finish(w, path)
}

/// Writes a plain text file.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Human-readable port label `(u,v)`.
pub fn port_label(lattice: &ArrayLattice, k: usize) -> Result<String> {
    let (u, v) = lattice.port_coords(k)?;
    Ok(format!("({u},{v})"))
}
