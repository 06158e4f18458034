//! Estimator quality and cost: current spectra, main-lobe errors and
//! solve-time scaling.

use std::ops::RangeInclusive;
use std::time::Duration;

use serde::Serialize;

use crate::farfield::{Direction, FarFieldPattern};
use crate::geometry::{ArrayLattice, ElementMesh};
use crate::mom::{CurrentDistribution, PortTermination, ORACLE_MAX_UNKNOWNS};
use crate::pipeline::{run_decomposed, run_oracle, ArrayModel, PathTiming};
use crate::{Error, Result};

/// Half-width of the window used when the lobe search finds fewer than
/// three samples.
pub const FALLBACK_HALF_WIDTH_DEG: f64 = 10.0;

/// Per-element averaged current magnitude in dB, peak at 0 dB.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentSpectrum {
    pub nx: usize,
    pub ny: usize,
    /// Indexed by port slot `k − 1`.
    pub db: Vec<f64>,
}

impl CurrentSpectrum {
    /// Largest pixel-wise absolute difference in dB.
    pub fn max_deviation(&self, other: &CurrentSpectrum) -> Result<f64> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::invalid("spectra have different shapes"));
        }
        Ok(self
            .db
            .iter()
            .zip(&other.db)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Averages `|J|` over segments and over all port excitations per element.
pub fn current_spectrum(
    currents: &[CurrentDistribution],
    lattice: &ArrayLattice,
) -> Result<CurrentSpectrum> {
    let n = lattice.len();
    if currents.len() != n {
        return Err(Error::invalid(format!(
            "spectrum needs all {n} port excitations, got {}",
            currents.len()
        )));
    }
    let mut mean = vec![0.0; n];
    for j in currents {
        if j.n_elements() != n {
            return Err(Error::invalid(
                "current distribution does not cover the lattice",
            ));
        }
        for (i, acc) in mean.iter_mut().enumerate() {
            let seg = j.element(i);
            *acc += seg.iter().map(|c| c.norm()).sum::<f64>() / seg.len() as f64;
        }
    }
    let peak = mean.iter().copied().fold(0.0, f64::max);
    let db = mean
        .iter()
        .map(|&v| {
            if peak > 0.0 && v > 0.0 {
                20.0 * (v / peak).log10()
            } else {
                crate::farfield::DB_FLOOR
            }
        })
        .collect();
    Ok(CurrentSpectrum {
        nx: lattice.nx(),
        ny: lattice.ny(),
        db,
    })
}

/// Which pattern model an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    PmmIsolated,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Proposed => f.write_str("proposed"),
            Method::PmmIsolated => f.write_str("pmm-isolated"),
        }
    }
}

/// Main-lobe error of one synthesized pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseReport {
    pub steer_theta_deg: f64,
    pub steer_phi_deg: f64,
    pub method: Method,
    /// Sample indices of the region within the cut.
    pub region: RangeInclusive<usize>,
    /// Scan angles bounding the region.
    pub region_scan_deg: (f64, f64),
    /// Mean squared dB difference, dB².
    pub mse_db2: f64,
}

/// Main lobe of `db` (ordered along a cut) around sample `steer`.
///
/// Climbs from `steer` to the nearest local maximum, then descends on both
/// sides to the first null. A side with no null inside the cut is bounded
/// by the cut edge. Regions narrower than three samples fall back to
/// `±FALLBACK_HALF_WIDTH_DEG` around the steering sample.
pub fn main_lobe_region(
    db: &[f64],
    scan_deg: &[f64],
    steer: usize,
) -> Result<RangeInclusive<usize>> {
    let n = db.len();
    if n == 0 || steer >= n || scan_deg.len() != n {
        return Err(Error::DegenerateRegion(format!(
            "steering sample {steer} outside a cut of {n} samples"
        )));
    }
    let mut peak = steer;
    if peak + 1 < n && db[peak + 1] > db[peak] {
        while peak + 1 < n && db[peak + 1] > db[peak] {
            peak += 1;
        }
    } else {
        while peak > 0 && db[peak - 1] > db[peak] {
            peak -= 1;
        }
    }
    let mut lo = peak;
    while lo > 0 && db[lo - 1] < db[lo] {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < n && db[hi + 1] < db[hi] {
        hi += 1;
    }
    if hi - lo >= 2 {
        return Ok(lo..=hi);
    }
    let centre = scan_deg[steer];
    let inside: Vec<usize> = (0..n)
        .filter(|&i| (scan_deg[i] - centre).abs() <= FALLBACK_HALF_WIDTH_DEG + 1e-9)
        .collect();
    match (inside.first(), inside.last()) {
        (Some(&a), Some(&b)) => Ok(a..=b),
        _ => Err(Error::DegenerateRegion(format!(
            "no samples within ±{FALLBACK_HALF_WIDTH_DEG}° of {centre}°"
        ))),
    }
}

/// Mean squared difference of two dB vectors over `region`.
pub fn mse_over_region(
    reference_db: &[f64],
    test_db: &[f64],
    region: RangeInclusive<usize>,
) -> Result<f64> {
    if region.is_empty()
        || *region.end() >= reference_db.len()
        || reference_db.len() != test_db.len()
    {
        return Err(Error::DegenerateRegion(format!(
            "region {region:?} is empty or out of range"
        )));
    }
    let count = region.clone().count() as f64;
    Ok(region
        .map(|i| (reference_db[i] - test_db[i]).powi(2))
        .sum::<f64>()
        / count)
}

/// Main-lobe MSE of `test` against `reference` on co-polar (θ̂) normalized
/// dB magnitudes. Both patterns must be on the same cut grid; each is
/// normalized to its own peak over the cut.
pub fn main_lobe_mse(
    reference: &FarFieldPattern,
    test: &FarFieldPattern,
    theta0_deg: f64,
    phi0_deg: f64,
    method: Method,
) -> Result<MseReport> {
    if **reference.grid() != **test.grid() {
        return Err(Error::invalid("patterns are sampled on different grids"));
    }
    let grid = reference.grid();
    let scan = grid
        .scan_deg()
        .ok_or_else(|| Error::DegenerateRegion("main lobe needs a single-cut grid".into()))?;
    let steer = grid
        .nearest(Direction::new(theta0_deg, phi0_deg))
        .ok_or_else(|| Error::DegenerateRegion("empty grid".into()))?;
    let ref_db = reference.co_pol_db();
    let test_db = test.co_pol_db();
    let region = main_lobe_region(&ref_db, scan, steer)?;
    let mse_db2 = mse_over_region(&ref_db, &test_db, region.clone())?;
    Ok(MseReport {
        steer_theta_deg: theta0_deg,
        steer_phi_deg: phi0_deg,
        method,
        region_scan_deg: (scan[*region.start()], scan[*region.end()]),
        region,
        mse_db2,
    })
}

/// One size of the scaling ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub nx: usize,
    pub ny: usize,
    pub unknowns_decomp: usize,
    pub unknowns_oracle: usize,
    pub decomp: PathTiming,
    pub oracle: PathTiming,
}

impl ScalingRow {
    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn speedup(&self) -> f64 {
        self.oracle.total().as_secs_f64() / self.decomp.total().as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Sizes refused by the dense-solve guard, with the reason.
    pub skipped: Vec<(usize, usize, String)>,
    /// Least-squares slope of ln(total time) vs ln(nx·ny).
    pub decomp_exponent: Option<f64>,
    pub oracle_exponent: Option<f64>,
}

/// Settings shared by every size of a benchmark ladder.
#[derive(Debug, Clone)]
pub struct BenchSetup {
    pub dx: f64,
    pub dy: f64,
    pub frequency: f64,
    pub element: ElementMesh,
    pub termination: PortTermination,
    /// Timed repeats per path; the minimum is kept.
    pub repeats: usize,
}

/// Unknown counts `(decomposed, reference)` for an `nx x ny` array of
/// `m`-segment elements.
pub fn unknown_counts(nx: usize, ny: usize, m: usize) -> (usize, usize) {
    (m * (nx + ny), m * nx * ny)
}

/// Times the decomposed and the reference path over `sizes`.
///
/// Each path runs once untimed, then `repeats` times; the fastest run is
/// kept. Runs are sequential.
pub fn scaling_benchmark(sizes: &[(usize, usize)], setup: &BenchSetup) -> Result<ScalingReport> {
    let m = setup.element.len();
    let repeats = setup.repeats.max(1);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &(nx, ny) in sizes {
        let (unknowns_decomp, unknowns_oracle) = unknown_counts(nx, ny, m);
        if unknowns_oracle > ORACLE_MAX_UNKNOWNS {
            skipped.push((
                nx,
                ny,
                format!("{unknowns_oracle} unknowns exceeds the limit of {ORACLE_MAX_UNKNOWNS}"),
            ));
            continue;
        }
        let model = ArrayModel {
            lattice: ArrayLattice::new(nx, ny, setup.dx, setup.dy, setup.frequency)?,
            element: setup.element.clone(),
            termination: setup.termination,
        };
        let decomp = fastest(repeats, || Ok(run_decomposed(&model)?.timing))?;
        let oracle = fastest(repeats, || Ok(run_oracle(&model)?.timing))?;
        rows.push(ScalingRow {
            nx,
            ny,
            unknowns_decomp,
            unknowns_oracle,
            decomp,
            oracle,
        });
    }
    let fit = |pick: fn(&ScalingRow) -> Duration| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.elements() as f64, pick(r).as_secs_f64()))
            .collect();
        fit_power_law(&pts)
    };
    Ok(ScalingReport {
        decomp_exponent: fit(|r| r.decomp.total()),
        oracle_exponent: fit(|r| r.oracle.total()),
        rows,
        skipped,
    })
}

fn fastest(repeats: usize, mut run: impl FnMut() -> Result<PathTiming>) -> Result<PathTiming> {
    run()?;
    let mut best: Option<PathTiming> = None;
    for _ in 0..repeats {
        let t = run()?;
        if best.is_none_or(|b| t.total() < b.total()) {
            best = Some(t);
        }
    }
    Ok(best.expect("at least one repeat"))
}

/// Slope of the least-squares line through `(ln x, ln y)`. Needs two
/// distinct positive abscissae.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
