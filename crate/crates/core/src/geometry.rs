//! Array lattices, element discretization and the port-index map.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Lattice axis. `U` runs along x, `V` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    U,
    V,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::U => f.write_str("u"),
            Axis::V => f.write_str("v"),
        }
    }
}

/// Rectangular `nx x ny` lattice on the z = 0 plane.
///
/// Element `k = (u-1)·ny + v` sits at `((u-1)·dx·λ, (v-1)·dy·λ, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLattice {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    frequency: f64,
    positions: Vec<Vector3<f64>>,
}

impl ArrayLattice {
    /// Builds the lattice. Spacings are in wavelengths, frequency in Hz.
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, frequency: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!(
                "lattice dimensions must be positive, got {nx} x {ny}"
            )));
        }
        for (name, value) in [("dx", dx), ("dy", dy), ("frequency", frequency)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        let lambda = SPEED_OF_LIGHT / frequency;
        let mut positions = Vec::with_capacity(nx * ny);
        for u in 0..nx {
            for v in 0..ny {
                positions.push(Vector3::new(
                    u as f64 * dx * lambda,
                    v as f64 * dy * lambda,
                    0.0,
                ));
            }
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            frequency,
            positions,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Spacing along x in wavelengths.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Spacing along y in wavelengths.
    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }

    /// Number of elements (and ports).
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Element positions in meters, indexed by `k - 1`.
    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    /// Position of 1-based port `k`.
    pub fn position(&self, k: usize) -> Result<Vector3<f64>> {
        self.check_port(k)?;
        Ok(self.positions[k - 1])
    }

    /// 1-based u-major port index of lattice cell `(u, v)`.
    pub fn port_index(&self, u: usize, v: usize) -> Result<usize> {
        if u == 0 || u > self.nx || v == 0 || v > self.ny {
            return Err(Error::invalid(format!(
                "lattice cell ({u}, {v}) outside 1..={} x 1..={}",
                self.nx, self.ny
            )));
        }
        Ok((u - 1) * self.ny + v)
    }

    /// Inverse of [`port_index`](Self::port_index).
    pub fn port_coords(&self, k: usize) -> Result<(usize, usize)> {
        self.check_port(k)?;
        Ok(((k - 1) / self.ny + 1, (k - 1) % self.ny + 1))
    }

    pub(crate) fn check_port(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::invalid(format!(
                "port {k} outside 1..={}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Number of elements along `axis`.
    pub fn axis_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::U => self.nx,
            Axis::V => self.ny,
        }
    }

    /// The 1-D sub-lattice along `axis`: `nx x 1` for u, `1 x ny` for v.
    pub fn axis_lattice(&self, axis: Axis) -> ArrayLattice {
        let (nx, ny) = match axis {
            Axis::U => (self.nx, 1),
            Axis::V => (1, self.ny),
        };
        // Same spacings and frequency, so construction cannot fail.
        ArrayLattice::new(nx, ny, self.dx, self.dy, self.frequency)
            .expect("sub-lattice of a valid lattice")
    }
}

/// One straight wire segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Midpoint in meters, relative to the element origin.
    pub midpoint: Vector3<f64>,
    /// Unit direction of positive current.
    pub tangent: Vector3<f64>,
    /// Length in meters.
    pub length: f64,
    /// Wire radius in meters.
    pub radius: f64,
}

/// Discretized geometry of one antenna element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMesh {
    segments: Vec<Segment>,
    feed_index: usize,
}

impl ElementMesh {
    /// Validates and wraps a segment list.
    ///
    /// Tangents must be unit-norm, lengths positive, every radius smaller
    /// than the shortest segment, and `feed_index` in range.
    pub fn new(segments: Vec<Segment>, feed_index: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("element mesh has no segments"));
        }
        if feed_index >= segments.len() {
            return Err(Error::invalid(format!(
                "feed index {feed_index} outside 0..{}",
                segments.len()
            )));
        }
        let shortest = segments
            .iter()
            .map(|s| s.length)
            .fold(f64::INFINITY, f64::min);
        for (i, s) in segments.iter().enumerate() {
            if !(s.length.is_finite() && s.length > 0.0) {
                return Err(Error::invalid(format!(
                    "segment {i} has length {}",
                    s.length
                )));
            }
            if (s.tangent.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "segment {i} tangent is not unit-norm"
                )));
            }
            if !(s.radius > 0.0 && s.radius < shortest) {
                return Err(Error::invalid(format!(
                    "segment {i} radius {} violates thin-wire bound (shortest segment {shortest})",
                    s.radius
                )));
            }
        }
        Ok(Self {
            segments,
            feed_index,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn feed_index(&self) -> usize {
        self.feed_index
    }

    /// Segment count `m`.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Summed segment length, the part of the wire carrying current pulses.
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Returns `(segment_length, radius)` when the mesh is a straight,
    /// uniformly segmented, z-directed wire on the element axis, which is
    /// the geometry the impedance fill supports.
    pub fn uniform_z_wire(&self) -> Option<(f64, f64)> {
        let first = &self.segments[0];
        let (d, radius) = (first.length, first.radius);
        let z0 = first.midpoint.z;
        for (i, s) in self.segments.iter().enumerate() {
            let on_axis = s.midpoint.x.abs() <= 1e-12 * d && s.midpoint.y.abs() <= 1e-12 * d;
            let along_z = (s.tangent.z - 1.0).abs() <= 1e-12;
            let same_len = (s.length - d).abs() <= 1e-12 * d;
            let contiguous = (s.midpoint.z - z0 - i as f64 * d).abs() <= 1e-9 * d;
            if !(on_axis && along_z && same_len && contiguous && s.radius == radius) {
                return None;
            }
        }
        Some((d, radius))
    }
}

/// Splits a center-fed z-directed dipole into `m` current segments.
///
/// Segments have length `length/(m+1)` and are centred at
/// `-length/2 + i·d`, `i = 1..=m`. The half segment left bare at each tip
/// carries the end charge, so charge pulses, which straddle segment
/// junctions, stay on the wire. Covering the whole wire with current
/// segments instead makes the element electrically one segment longer.
///
/// `m` must be odd and at least 3 so that a center feed segment exists.
pub fn discretize_dipole(length: f64, radius: f64, m: usize) -> Result<ElementMesh> {
    if m < 3 || m.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "segment count must be odd and >= 3, got {m}"
        )));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::invalid(format!(
            "dipole length must be positive, got {length}"
        )));
    }
    let d = length / (m + 1) as f64;
    if !(radius > 0.0 && radius < d / 2.0) {
        return Err(Error::invalid(format!(
            "wire radius {radius} violates the thin-wire bound length/(2(m+1)) = {}",
            d / 2.0
        )));
    }
    let segments = (0..m)
        .map(|i| Segment {
            midpoint: Vector3::new(0.0, 0.0, -length / 2.0 + (i + 1) as f64 * d),
            tangent: Vector3::z(),
            length: d,
            radius,
        })
        .collect();
    ElementMesh::new(segments, (m - 1) / 2)
}
