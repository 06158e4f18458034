//! Far-field radiation of segment currents, pattern synthesis and steering.
//!
//! The far-field form of the free-space dyadic Green's function keeps the
//! transverse part of each current element:
//!
//! ```text
//! E(û) ∝ Σ_s [I − û ûᵀ] (t̂_s J_s ℓ_s) exp(+j k0 û·r_s)
//! ```
//!
//! Only the θ̂ and φ̂ components are stored, so the radial component is
//! zero by construction. The `−jωμ/4π · e^{−jkr}/r` prefactor is dropped;
//! patterns are compared after peak normalization.
//!
//! Directions use the standard frame `û = (sinθ cosφ, sinθ sinφ, cosθ)`.
//! Elevation cuts use a signed θ in [−90°, 90°] at a fixed φ, so negative θ
//! points into the φ + 180° half-plane.

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{ArrayLattice, ElementMesh};
use crate::mom::CurrentDistribution;
use crate::{Error, Result, C64};

/// Lowest normalized level in dB; exact nulls are clamped here.
pub const DB_FLOOR: f64 = -200.0;

/// Observation direction in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl Direction {
    pub fn new(theta_deg: f64, phi_deg: f64) -> Self {
        Self { theta_deg, phi_deg }
    }

    pub fn unit(&self) -> Vector3<f64> {
        let (st, ct) = self.theta_deg.to_radians().sin_cos();
        let (sp, cp) = self.phi_deg.to_radians().sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    pub fn theta_hat(&self) -> Vector3<f64> {
        let (st, ct) = self.theta_deg.to_radians().sin_cos();
        let (sp, cp) = self.phi_deg.to_radians().sin_cos();
        Vector3::new(ct * cp, ct * sp, -st)
    }

    pub fn phi_hat(&self) -> Vector3<f64> {
        let (sp, cp) = self.phi_deg.to_radians().sin_cos();
        Vector3::new(-sp, cp, 0.0)
    }
}

/// Plane in which beams are steered and main lobes are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScanPlane {
    /// Signed θ from −90° to 90° in the φ = `phi_deg` half-planes.
    Elevation { phi_deg: f64 },
    /// The z = 0 plane. Scan angle ψ is measured from +y toward +x, so
    /// ψ maps to θ = 90°, φ = 90° − ψ.
    Horizon,
}

impl ScanPlane {
    /// Direction of scan angle `scan_deg` in this plane.
    pub fn direction(&self, scan_deg: f64) -> Direction {
        match *self {
            ScanPlane::Elevation { phi_deg } => Direction::new(scan_deg, phi_deg),
            ScanPlane::Horizon => Direction::new(90.0, 90.0 - scan_deg),
        }
    }

    /// Scan angles −90°..=90° in steps of `step_deg`.
    pub fn cut(&self, step_deg: f64) -> Result<AngleGrid> {
        if !(step_deg > 0.0 && step_deg <= 90.0) {
            return Err(Error::invalid(format!(
                "grid step must be in (0, 90] degrees, got {step_deg}"
            )));
        }
        let count = (180.0 / step_deg).round() as usize;
        if ((count as f64) * step_deg - 180.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "grid step {step_deg} does not divide 180 degrees"
            )));
        }
        let scan: Vec<f64> = (0..=count).map(|i| -90.0 + i as f64 * step_deg).collect();
        let directions = scan.iter().map(|&s| self.direction(s)).collect();
        Ok(AngleGrid {
            directions,
            layout: GridLayout::Cut {
                plane: *self,
                scan_deg: scan,
            },
        })
    }
}

/// How the samples of a grid are arranged.
#[derive(Debug, Clone, PartialEq)]
pub enum GridLayout {
    /// Ordered samples along one scan plane.
    Cut {
        plane: ScanPlane,
        scan_deg: Vec<f64>,
    },
    /// Upper-hemisphere samples at direction cosines `(u, v)`.
    UV { uv: Vec<(f64, f64)> },
    /// Concatenation of other grids.
    Mixed,
}

/// Set of observation directions.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    directions: Vec<Direction>,
    layout: GridLayout,
}

impl AngleGrid {
    /// Square `n x n` grid of direction cosines over [−1, 1]², keeping only
    /// visible points (u² + v² ≤ 1).
    pub fn uv(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "u-v grid needs at least 2 points, got {n}"
            )));
        }
        let mut directions = Vec::new();
        let mut uv = Vec::new();
        for iu in 0..n {
            let u = -1.0 + 2.0 * iu as f64 / (n - 1) as f64;
            for iv in 0..n {
                let v = -1.0 + 2.0 * iv as f64 / (n - 1) as f64;
                let s2 = u * u + v * v;
                if s2 > 1.0 + 1e-12 {
                    continue;
                }
                let theta = s2.min(1.0).sqrt().asin().to_degrees();
                let phi = v.atan2(u).to_degrees();
                directions.push(Direction::new(theta, phi));
                uv.push((u, v));
            }
        }
        Ok(Self {
            directions,
            layout: GridLayout::UV { uv },
        })
    }

    /// Joins several grids into one sample list.
    pub fn concat(grids: &[AngleGrid]) -> Self {
        Self {
            directions: grids
                .iter()
                .flat_map(|g| g.directions.iter().copied())
                .collect(),
            layout: GridLayout::Mixed,
        }
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Scan angles when the grid is a single cut.
    pub fn scan_deg(&self) -> Option<&[f64]> {
        match &self.layout {
            GridLayout::Cut { scan_deg, .. } => Some(scan_deg),
            _ => None,
        }
    }

    /// Index of the sample closest in angle to `dir`.
    pub fn nearest(&self, dir: Direction) -> Option<usize> {
        let target = dir.unit();
        self.directions
            .iter()
            .enumerate()
            .map(|(i, d)| (i, d.unit().dot(&target)))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    PeakNormalized,
}

/// Complex far-field samples over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldPattern {
    grid: Arc<AngleGrid>,
    e_theta: Vec<C64>,
    e_phi: Vec<C64>,
    frequency: f64,
    normalization: Normalization,
}

impl FarFieldPattern {
    pub fn new(
        grid: Arc<AngleGrid>,
        e_theta: Vec<C64>,
        e_phi: Vec<C64>,
        frequency: f64,
        normalization: Normalization,
    ) -> Result<Self> {
        if e_theta.len() != grid.len() || e_phi.len() != grid.len() {
            return Err(Error::invalid("pattern length does not match its grid"));
        }
        Ok(Self {
            grid,
            e_theta,
            e_phi,
            frequency,
            normalization,
        })
    }

    pub fn grid(&self) -> &Arc<AngleGrid> {
        &self.grid
    }

    pub fn e_theta(&self) -> &[C64] {
        &self.e_theta
    }

    pub fn e_phi(&self) -> &[C64] {
        &self.e_phi
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.e_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_theta.is_empty()
    }

    /// `|E|` at sample `i`.
    pub fn magnitude(&self, i: usize) -> f64 {
        (self.e_theta[i].norm_sqr() + self.e_phi[i].norm_sqr()).sqrt()
    }

    /// Cartesian field vector at sample `i`.
    pub fn field_vector(&self, i: usize) -> Vector3<C64> {
        let d = self.grid.directions[i];
        let th = d.theta_hat().map(|x| C64::new(x, 0.0));
        let ph = d.phi_hat().map(|x| C64::new(x, 0.0));
        th * self.e_theta[i] + ph * self.e_phi[i]
    }

    /// Copy scaled so the largest `|E|` is 1.
    pub fn peak_normalized(&self) -> Self {
        let peak = (0..self.len())
            .map(|i| self.magnitude(i))
            .fold(0.0, f64::max);
        let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
        Self {
            e_theta: self.e_theta.iter().map(|v| v * scale).collect(),
            e_phi: self.e_phi.iter().map(|v| v * scale).collect(),
            normalization: Normalization::PeakNormalized,
            ..self.clone()
        }
    }

    /// Peak-normalized `|E|` in dB, floored at [`DB_FLOOR`].
    pub fn total_db(&self) -> Vec<f64> {
        let mags: Vec<f64> = (0..self.len()).map(|i| self.magnitude(i)).collect();
        to_normalized_db(&mags)
    }

    /// Peak-normalized `|E_θ|` in dB, floored at [`DB_FLOOR`].
    pub fn co_pol_db(&self) -> Vec<f64> {
        let mags: Vec<f64> = self.e_theta.iter().map(|v| v.norm()).collect();
        to_normalized_db(&mags)
    }
}

fn to_normalized_db(mags: &[f64]) -> Vec<f64> {
    let peak = mags.iter().copied().fold(0.0, f64::max);
    mags.iter()
        .map(|&m| {
            if peak > 0.0 && m > 0.0 {
                (20.0 * (m / peak).log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            }
        })
        .collect()
}

/// Complex port excitations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationVector(Vec<C64>);

impl ExcitationVector {
    pub fn new(weights: Vec<C64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("excitation vector is empty"));
        }
        if weights
            .iter()
            .any(|w| !(w.re.is_finite() && w.im.is_finite()))
        {
            return Err(Error::invalid("excitation vector has non-finite weights"));
        }
        if weights.iter().all(|w| w.norm() == 0.0) {
            return Err(Error::invalid("excitation vector is all zero"));
        }
        Ok(Self(weights))
    }

    /// Unit excitation of 1-based port `k`.
    pub fn unit(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::invalid(format!("port {k} outside 1..={n}")));
        }
        let mut w = vec![C64::new(0.0, 0.0); n];
        w[k - 1] = C64::new(1.0, 0.0);
        Self::new(w)
    }

    pub fn weights(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, alpha: C64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * alpha).collect())
    }
}

/// Real amplitude taper applied on top of the steering phases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Uniform,
    /// Separable cosine taper, `cos(π (u − (nx+1)/2) / nx)` per axis.
    Cosine,
}

impl Taper {
    pub fn amplitudes(&self, lattice: &ArrayLattice) -> Vec<f64> {
        let axis = |i: usize, n: usize| match self {
            Taper::Uniform => 1.0,
            Taper::Cosine => {
                (std::f64::consts::PI * (i as f64 - (n as f64 + 1.0) / 2.0) / n as f64).cos()
            }
        };
        let mut out = Vec::with_capacity(lattice.len());
        for u in 1..=lattice.nx() {
            for v in 1..=lattice.ny() {
                out.push(axis(u, lattice.nx()) * axis(v, lattice.ny()));
            }
        }
        out
    }
}

/// Far field of `j` for copies of `element` on `lattice`.
pub fn radiate(
    j: &CurrentDistribution,
    lattice: &ArrayLattice,
    element: &ElementMesh,
    grid: &Arc<AngleGrid>,
) -> Result<FarFieldPattern> {
    if j.n_elements() != lattice.len() {
        return Err(Error::invalid(format!(
            "current covers {} elements, lattice has {}",
            j.n_elements(),
            lattice.len()
        )));
    }
    radiate_at(j, lattice.positions(), element, lattice.frequency(), grid)
}

/// Far field of `j` for copies of `element` at arbitrary `origins`.
pub fn radiate_at(
    j: &CurrentDistribution,
    origins: &[Vector3<f64>],
    element: &ElementMesh,
    frequency: f64,
    grid: &Arc<AngleGrid>,
) -> Result<FarFieldPattern> {
    if grid.is_empty() {
        return Err(Error::invalid("angle grid is empty"));
    }
    if j.n_elements() != origins.len() || j.segments() != element.len() {
        return Err(Error::invalid(
            "current distribution does not match the geometry",
        ));
    }
    let k0 = 2.0 * std::f64::consts::PI * frequency / crate::SPEED_OF_LIGHT;
    // Source moments t̂ J ℓ and their positions.
    let mut sources: Vec<(Vector3<f64>, Vector3<C64>)> = Vec::with_capacity(j.values().len());
    for (i, origin) in origins.iter().enumerate() {
        for (s, seg) in element.segments().iter().enumerate() {
            let moment = seg.tangent.map(|t| C64::new(t * seg.length, 0.0)) * j.get(i, s);
            sources.push((origin + seg.midpoint, moment));
        }
    }
    let mut e_theta = Vec::with_capacity(grid.len());
    let mut e_phi = Vec::with_capacity(grid.len());
    for dir in grid.directions() {
        let u = dir.unit();
        let mut sum = Vector3::<C64>::zeros();
        for (r, moment) in &sources {
            let phase = C64::new(0.0, k0 * u.dot(r)).exp();
            sum += moment * phase;
        }
        let th = dir.theta_hat();
        let ph = dir.phi_hat();
        e_theta.push(sum.x * th.x + sum.y * th.y + sum.z * th.z);
        e_phi.push(sum.x * ph.x + sum.y * ph.y + sum.z * ph.z);
    }
    FarFieldPattern::new(grid.clone(), e_theta, e_phi, frequency, Normalization::Raw)
}

/// `F = Σ_k w_k E_k`, pointwise per component.
pub fn synthesize(aeps: &[FarFieldPattern], w: &ExcitationVector) -> Result<FarFieldPattern> {
    if aeps.len() != w.len() {
        return Err(Error::invalid(format!(
            "{} patterns but {} weights",
            aeps.len(),
            w.len()
        )));
    }
    let first = &aeps[0];
    if aeps
        .iter()
        .any(|p| p.grid != first.grid && *p.grid != *first.grid)
    {
        return Err(Error::invalid("patterns are sampled on different grids"));
    }
    let n = first.len();
    let mut e_theta = vec![C64::new(0.0, 0.0); n];
    let mut e_phi = vec![C64::new(0.0, 0.0); n];
    for (p, wk) in aeps.iter().zip(w.weights()) {
        for i in 0..n {
            e_theta[i] += wk * p.e_theta[i];
            e_phi[i] += wk * p.e_phi[i];
        }
    }
    FarFieldPattern::new(
        first.grid.clone(),
        e_theta,
        e_phi,
        first.frequency,
        Normalization::Raw,
    )
}

/// Phase-steering weights `w_k = a_k exp(−j k0 û₀·r_k)`.
///
/// `taper` holds optional real amplitudes `a_k`, one per port.
pub fn steering_weights(
    lattice: &ArrayLattice,
    theta0_deg: f64,
    phi0_deg: f64,
    taper: Option<&[f64]>,
) -> Result<ExcitationVector> {
    if !(theta0_deg.is_finite() && phi0_deg.is_finite()) {
        return Err(Error::invalid("steering angles must be finite"));
    }
    if let Some(t) = taper {
        if t.len() != lattice.len() {
            return Err(Error::invalid(format!(
                "taper has {} amplitudes, lattice has {} ports",
                t.len(),
                lattice.len()
            )));
        }
    }
    let k0 = lattice.wavenumber();
    let st = theta0_deg.to_radians().sin();
    let (sp, cp) = phi0_deg.to_radians().sin_cos();
    let weights = lattice
        .positions()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let amp = taper.map_or(1.0, |t| t[i]);
            C64::from_polar(amp, -k0 * (r.x * st * cp + r.y * st * sp))
        })
        .collect();
    ExcitationVector::new(weights)
}

/// Pattern multiplication with the isolated element pattern:
/// `F = E_iso · Σ_k w_k exp(+j k0 û·r_k)`.
pub fn pmm_isolated(
    isolated: &FarFieldPattern,
    lattice: &ArrayLattice,
    w: &ExcitationVector,
) -> Result<FarFieldPattern> {
    if w.len() != lattice.len() {
        return Err(Error::invalid("weight count does not match the lattice"));
    }
    let k0 = lattice.wavenumber();
    let mut e_theta = Vec::with_capacity(isolated.len());
    let mut e_phi = Vec::with_capacity(isolated.len());
    for (i, dir) in isolated.grid.directions().iter().enumerate() {
        let u = dir.unit();
        let af: C64 = lattice
            .positions()
            .iter()
            .zip(w.weights())
            .map(|(r, wk)| wk * C64::new(0.0, k0 * u.dot(r)).exp())
            .sum();
        e_theta.push(isolated.e_theta[i] * af);
        e_phi.push(isolated.e_phi[i] * af);
    }
    FarFieldPattern::new(
        isolated.grid.clone(),
        e_theta,
        e_phi,
        isolated.frequency,
        Normalization::Raw,
    )
}
