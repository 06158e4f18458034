//! Thin-wire method-of-moments solver for arrays of z-directed wires.
//!
//! Currents are expanded in pulses, one per segment, and the electric-field
//! integral equation is point-matched at segment midpoints on the wire
//! surface. Charges follow from continuity as pulses centered on segment
//! edges (and wire tips), so an entry of the impedance matrix is
//!
//! ```text
//! Z_ab = jωμ d² ψ(Δz) + (2ψ(Δz) − ψ(Δz + d) − ψ(Δz − d)) / (jωε)
//! ψ(Δz) = (1/d) ∫_{-d/2}^{d/2} e^{−jkR} / (4πR) ds,   R² = (Δz − s)² + ρ² + a²
//! ```
//!
//! with `ρ` the distance between wire axes and `a` the wire radius (reduced
//! kernel). Every entry depends only on `|Δz|` and `ρ`, which makes the
//! matrix complex-symmetric by construction.
//!
//! Ports are delta-gap sources on each element's feed segment. One port is
//! driven with `v_source`; every other feed is loaded with `z_load`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::Vector3;

use crate::geometry::{ArrayLattice, Axis, ElementMesh};
use crate::linalg::{vector_norm1, CMatrix, CVector, DenseLu, MAX_CONDITION};
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * PI;

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 1.0 / (MU0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// Largest dense system the full-array reference solve will attempt.
pub const ORACLE_MAX_UNKNOWNS: usize = 20_000;

/// Normwise relative residual `‖b − Ax‖ / (‖A‖‖x‖ + ‖b‖)` (1-norms) every
/// solve must satisfy.
pub const MAX_RESIDUAL: f64 = 1e-10;

/// 8-point Gauss-Legendre rule on [-1, 1].
const GAUSS_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GAUSS_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Where a current distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentContext {
    Isolated,
    ArrayU,
    ArrayV,
    Array2d,
    /// Predicted by the directional decomposition.
    Estimated2d,
}

impl CurrentContext {
    pub fn for_axis(axis: Axis) -> Self {
        match axis {
            Axis::U => CurrentContext::ArrayU,
            Axis::V => CurrentContext::ArrayV,
        }
    }
}

/// Complex segment currents of every element for one excited port.
///
/// Values are element-major: element `i` (0-based), segment `s` lives at
/// `i * m + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentDistribution {
    values: Vec<C64>,
    n_elements: usize,
    segments: usize,
    excited_port: usize,
    context: CurrentContext,
}

impl CurrentDistribution {
    pub fn new(
        values: Vec<C64>,
        n_elements: usize,
        segments: usize,
        excited_port: usize,
        context: CurrentContext,
    ) -> Result<Self> {
        if values.len() != n_elements * segments {
            return Err(Error::invalid(format!(
                "current vector has {} entries, expected {n_elements} x {segments}",
                values.len()
            )));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::invalid("current vector has non-finite entries"));
        }
        Ok(Self {
            values,
            n_elements,
            segments,
            excited_port,
            context,
        })
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// Segments per element.
    pub fn segments(&self) -> usize {
        self.segments
    }

    /// 1-based excited port.
    pub fn excited_port(&self) -> usize {
        self.excited_port
    }

    pub fn context(&self) -> CurrentContext {
        self.context
    }

    /// Currents on element `i` (0-based).
    pub fn element(&self, i: usize) -> &[C64] {
        &self.values[i * self.segments..(i + 1) * self.segments]
    }

    pub fn get(&self, element: usize, segment: usize) -> C64 {
        self.values[element * self.segments + segment]
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }

    /// Largest entrywise difference relative to the largest entry of `self`.
    pub fn max_relative_difference(&self, other: &Self) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Port model: delta-gap source on the driven feed, loads on the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortTermination {
    pub z_load: C64,
    pub v_source: C64,
}

impl Default for PortTermination {
    fn default() -> Self {
        Self {
            z_load: C64::new(50.0, 0.0),
            v_source: C64::new(1.0, 0.0),
        }
    }
}

impl PortTermination {
    pub fn with_load(z_load: C64) -> Result<Self> {
        let t = Self {
            z_load,
            ..Self::default()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_load.re >= 0.0 && self.z_load.re.is_finite() && self.z_load.im.is_finite()) {
            return Err(Error::invalid(format!(
                "load impedance must have a non-negative real part, got {}",
                self.z_load
            )));
        }
        Ok(())
    }
}

/// Unloaded impedance matrix of a wire array.
#[derive(Debug, Clone)]
pub struct ImpedanceMatrix {
    pub entries: CMatrix,
    pub frequency: f64,
}

impl ImpedanceMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Feed segment index of every element in an array of `n` copies of `element`.
pub fn feed_segments(element: &ElementMesh, n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| i * element.len() + element.feed_index())
        .collect()
}

/// Fills the impedance matrix for copies of `element` placed at `origins`.
///
/// The element must be a straight, uniformly segmented z-directed wire.
pub fn fill_impedance_matrix(
    element: &ElementMesh,
    origins: &[Vector3<f64>],
    frequency: f64,
) -> Result<ImpedanceMatrix> {
    let (d, radius) = element.uniform_z_wire().ok_or_else(|| {
        Error::invalid("impedance fill supports straight z-directed wires with uniform segments")
    })?;
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::invalid(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    let m = element.len();
    let n = origins.len();
    let k0 = 2.0 * PI * frequency / SPEED_OF_LIGHT;
    let omega = 2.0 * PI * frequency;
    let vector_coef = C64::new(0.0, omega * MU0 * d * d);
    let scalar_coef = C64::new(0.0, -1.0 / (omega * EPS0));
    let wire_length = m as f64 * d;

    let mut z = CMatrix::zeros(n * m, n * m);
    let mut psi = vec![C64::new(0.0, 0.0); 2 * m + 1];
    let mut block = vec![C64::new(0.0, 0.0); 2 * m - 1];
    for p in 0..n {
        for q in 0..=p {
            let delta = origins[p] - origins[q];
            let rho = delta.x.hypot(delta.y);
            if p != q && rho < 2.0 * radius && delta.z.abs() < wire_length {
                return Err(Error::SingularGeometry(format!(
                    "elements {} and {} overlap (axis separation {rho:e} m)",
                    q + 1,
                    p + 1
                )));
            }
            let rho_eff = (rho * rho + radius * radius).sqrt();
            // ψ at Δz = j·d + Δoz for j in -m..=m.
            for (slot, value) in psi.iter_mut().enumerate() {
                let j = slot as f64 - m as f64;
                *value = segment_potential((j * d + delta.z).abs(), rho_eff, d, k0);
            }
            for (slot, entry) in block.iter_mut().enumerate() {
                // slot = (ia - ib) + m - 1, ψ index = (ia - ib) + m
                let c = slot + 1;
                *entry =
                    vector_coef * psi[c] + scalar_coef * (2.0 * psi[c] - psi[c + 1] - psi[c - 1]);
            }
            for ia in 0..m {
                for ib in 0..m {
                    let value = block[ia + m - 1 - ib];
                    z[(p * m + ia, q * m + ib)] = value;
                    z[(q * m + ib, p * m + ia)] = value;
                }
            }
        }
    }
    Ok(ImpedanceMatrix {
        entries: z,
        frequency,
    })
}

/// `ψ(Δz) = (1/d) ∫_{-d/2}^{d/2} e^{-jkR}/(4πR) ds`, `R² = (Δz - s)² + ρ²`.
///
/// The static `1/R` part is integrated in closed form; the bounded
/// remainder `(e^{-jkR} - 1)/R` by Gauss-Legendre, split at `R = ρ`.
pub(crate) fn segment_potential(dz: f64, rho: f64, d: f64, k0: f64) -> C64 {
    let upper = dz + 0.5 * d;
    let lower = dz - 0.5 * d;
    let static_part = (upper / rho).asinh() - (lower / rho).asinh();
    let split = 0.0f64.clamp(lower, upper);
    let mut dynamic = C64::new(0.0, 0.0);
    for (a, b) in [(lower, split), (split, upper)] {
        let half = 0.5 * (b - a);
        if half == 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS.iter()) {
            let t = mid + half * x;
            let r = (t * t + rho * rho).sqrt();
            let phase = C64::new(0.0, -k0 * r).exp();
            dynamic += (phase - 1.0) * (w * half / r);
        }
    }
    (dynamic + static_part) / (4.0 * PI * d)
}

/// Builds the system for driving port `excited` (1-based): `z_load` added to
/// every other feed diagonal, `v_source` on the driven feed.
pub fn apply_terminations(
    z: &ImpedanceMatrix,
    feeds: &[usize],
    excited: usize,
    termination: &PortTermination,
) -> Result<(CMatrix, CVector)> {
    termination.validate()?;
    if excited == 0 || excited > feeds.len() {
        return Err(Error::invalid(format!(
            "port {excited} outside 1..={}",
            feeds.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    if feeds.iter().any(|&f| f >= z.dim() || !seen.insert(f)) {
        return Err(Error::invalid(
            "feed segments must be distinct and inside the matrix",
        ));
    }
    let mut loaded = z.entries.clone();
    for (port, &f) in feeds.iter().enumerate() {
        if port + 1 != excited {
            loaded[(f, f)] += termination.z_load;
        }
    }
    let mut rhs = CVector::zeros(z.dim());
    rhs[feeds[excited - 1]] = termination.v_source;
    Ok((loaded, rhs))
}

/// Dense direct solve with a conditioning and residual check.
///
/// `scenario` names the run in error messages.
pub fn solve_currents(loaded: &CMatrix, rhs: &CVector, scenario: &str) -> Result<CVector> {
    let lu = factor_checked(loaded.clone(), scenario)?;
    let x = lu.solve(rhs);
    let r = loaded * &x - rhs;
    let residual = relative_residual(&r, lu.norm1(), &x, vector_norm1(rhs));
    if !(residual <= MAX_RESIDUAL) {
        return Err(Error::numerical(
            scenario,
            format!("relative residual {residual:e} exceeds {MAX_RESIDUAL:e}"),
        ));
    }
    Ok(x)
}

fn relative_residual(r: &CVector, norm_a: f64, x: &CVector, norm_b: f64) -> f64 {
    vector_norm1(r) / (norm_a * vector_norm1(x) + norm_b)
}

fn factor_checked(a: CMatrix, scenario: &str) -> Result<DenseLu> {
    let lu = DenseLu::factor(a)
        .ok_or_else(|| Error::numerical(scenario, "impedance matrix is singular"))?;
    let cond = lu.condition_estimate();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::numerical(
            scenario,
            format!("condition estimate {cond:e} exceeds {MAX_CONDITION:e}"),
        ));
    }
    Ok(lu)
}

/// Wall-clock breakdown of one array solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveTimings {
    pub fill: Duration,
    pub factor: Duration,
    pub solve: Duration,
}

impl SolveTimings {
    pub fn total(&self) -> Duration {
        self.fill + self.factor + self.solve
    }
}

impl std::ops::Add for SolveTimings {
    type Output = SolveTimings;

    fn add(self, rhs: Self) -> Self {
        SolveTimings {
            fill: self.fill + rhs.fill,
            factor: self.factor + rhs.factor,
            solve: self.solve + rhs.solve,
        }
    }
}

/// Result of driving every port of one array geometry.
#[derive(Debug, Clone)]
pub struct ArraySolution {
    /// One distribution per port, in port order.
    pub currents: Vec<CurrentDistribution>,
    /// Unloaded impedance matrix.
    pub impedance: ImpedanceMatrix,
    pub timings: SolveTimings,
}

/// Drives every port of the array in turn with the other ports loaded.
///
/// The matrix is filled and factored once with `z_load` on every feed; the
/// solution for driving port k with an ideal source is the matched-load
/// solution `y = A⁻¹ e_k` rescaled by `v / (1 − z_load · y[feed_k])`, which
/// removes the load from the driven feed exactly.
pub fn solve_array(
    element: &ElementMesh,
    origins: &[Vector3<f64>],
    frequency: f64,
    termination: &PortTermination,
    context: CurrentContext,
    scenario: &str,
) -> Result<ArraySolution> {
    termination.validate()?;
    let n = origins.len();
    let m = element.len();
    if n == 0 {
        return Err(Error::invalid("array has no elements"));
    }
    let start = Instant::now();
    let impedance = fill_impedance_matrix(element, origins, frequency)?;
    let fill = start.elapsed();

    let start = Instant::now();
    let feeds = feed_segments(element, n);
    // A lone element has nothing to terminate.
    let z_load = if n > 1 {
        termination.z_load
    } else {
        C64::new(0.0, 0.0)
    };
    let mut loaded = impedance.entries.clone();
    for &f in &feeds {
        loaded[(f, f)] += z_load;
    }
    let lu = factor_checked(loaded, scenario)?;
    let factor = start.elapsed();

    let start = Instant::now();
    // Column 1-norms of the unloaded matrix and, for feed columns, with
    // the load added; each port's explicit system mixes the two.
    let col_plain: Vec<f64> = (0..n * m)
        .map(|c| impedance.entries.column(c).iter().map(|z| z.norm()).sum())
        .collect();
    let col_loaded: Vec<f64> = feeds
        .iter()
        .map(|&f| {
            col_plain[f] - impedance.entries[(f, f)].norm()
                + (impedance.entries[(f, f)] + z_load).norm()
        })
        .collect();
    let norm_for_port = |port: usize| {
        let mut best = 0.0f64;
        let mut next_feed = 0;
        for (c, &plain) in col_plain.iter().enumerate() {
            let mut v = plain;
            if next_feed < n && feeds[next_feed] == c {
                if next_feed != port {
                    v = col_loaded[next_feed];
                }
                next_feed += 1;
            }
            best = best.max(v);
        }
        best
    };
    let mut unit = CMatrix::zeros(n * m, n);
    for (port, &f) in feeds.iter().enumerate() {
        unit[(f, port)] = C64::new(1.0, 0.0);
    }
    let matched = lu.solve_many(&unit);
    let mut currents = Vec::with_capacity(n);
    for (port, &f) in feeds.iter().enumerate() {
        let column = matched.column(port);
        let denom = C64::new(1.0, 0.0) - z_load * column[f];
        if !(denom.norm() > 1e-12) {
            return Err(Error::numerical(
                scenario,
                format!("port {} source rescaling is singular", port + 1),
            ));
        }
        let scale = termination.v_source / denom;
        let x: CVector = column * scale;
        check_port_residual(
            &impedance.entries,
            norm_for_port(port),
            &x,
            &feeds,
            port,
            z_load,
            termination,
            scenario,
        )?;
        currents.push(CurrentDistribution::new(
            x.iter().copied().collect(),
            n,
            m,
            port + 1,
            context,
        )?);
    }
    let solve = start.elapsed();
    Ok(ArraySolution {
        currents,
        impedance,
        timings: SolveTimings {
            fill,
            factor,
            solve,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn check_port_residual(
    z: &CMatrix,
    norm_a: f64,
    x: &CVector,
    feeds: &[usize],
    port: usize,
    z_load: C64,
    termination: &PortTermination,
    scenario: &str,
) -> Result<()> {
    let mut r = z * x;
    for (other, &f) in feeds.iter().enumerate() {
        if other != port {
            r[f] += z_load * x[f];
        }
    }
    r[feeds[port]] -= termination.v_source;
    let residual = relative_residual(&r, norm_a, x, termination.v_source.norm());
    if !(residual <= MAX_RESIDUAL) {
        return Err(Error::numerical(
            scenario,
            format!(
                "port {} relative residual {residual:e} exceeds {MAX_RESIDUAL:e}",
                port + 1
            ),
        ));
    }
    Ok(())
}

/// Currents of the element on its own, driven with `termination.v_source`.
pub fn solve_isolated(
    element: &ElementMesh,
    frequency: f64,
    termination: &PortTermination,
) -> Result<CurrentDistribution> {
    let sol = solve_array(
        element,
        &[Vector3::zeros()],
        frequency,
        termination,
        CurrentContext::Isolated,
        "isolated element",
    )?;
    Ok(sol.currents.into_iter().next().expect("one port"))
}

/// One distribution per port of the 1-D sub-array of `lattice` along `axis`.
pub fn solve_1d_array(
    axis: Axis,
    lattice: &ArrayLattice,
    element: &ElementMesh,
    termination: &PortTermination,
) -> Result<Vec<CurrentDistribution>> {
    Ok(solve_1d_array_timed(axis, lattice, element, termination)?.currents)
}

pub(crate) fn solve_1d_array_timed(
    axis: Axis,
    lattice: &ArrayLattice,
    element: &ElementMesh,
    termination: &PortTermination,
) -> Result<ArraySolution> {
    let sub = lattice.axis_lattice(axis);
    let label = format!("{}-axis array ({} elements)", axis, sub.len());
    solve_array(
        element,
        sub.positions(),
        lattice.frequency(),
        termination,
        CurrentContext::for_axis(axis),
        &label,
    )
}

/// Unknown count of the full-array reference solve.
pub fn oracle_unknowns(lattice: &ArrayLattice, element: &ElementMesh) -> usize {
    lattice.len() * element.len()
}

/// Full-wave reference currents for every port of the 2-D array.
pub fn solve_2d_oracle(
    lattice: &ArrayLattice,
    element: &ElementMesh,
    termination: &PortTermination,
) -> Result<Vec<CurrentDistribution>> {
    Ok(solve_2d_oracle_timed(lattice, element, termination)?.currents)
}

pub(crate) fn solve_2d_oracle_timed(
    lattice: &ArrayLattice,
    element: &ElementMesh,
    termination: &PortTermination,
) -> Result<ArraySolution> {
    let unknowns = oracle_unknowns(lattice, element);
    if unknowns > ORACLE_MAX_UNKNOWNS {
        return Err(Error::SizeGuard {
            unknowns,
            limit: ORACLE_MAX_UNKNOWNS,
        });
    }
    let label = format!("{}x{} reference array", lattice.nx(), lattice.ny());
    solve_array(
        element,
        lattice.positions(),
        lattice.frequency(),
        termination,
        CurrentContext::Array2d,
        &label,
    )
}

/// `V / I_feed` of the driven port.
pub fn input_impedance(
    current: &CurrentDistribution,
    element: &ElementMesh,
    termination: &PortTermination,
) -> C64 {
    let port = current.excited_port() - 1;
    termination.v_source / current.get(port, element.feed_index())
}
