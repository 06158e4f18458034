//! Current-based transfer matrices and their Kronecker expansion.
//!
//! For one axis with `n` elements, the transfer coefficient of mesh `m`,
//! element `i` and driven port `k` is the array current normalized by the
//! isolated-element current on the same mesh:
//!
//! ```text
//! C⁽ᵐ⁾[i, k] = J_k⁽ᵐ⁾(i) / J_iso⁽ᵐ⁾
//! ```
//!
//! The isolated currents act as a diagonal matrix: a single isolated solve
//! gives one current per mesh and nothing that could populate off-diagonal
//! entries. The 2-D transfer block of mesh `m` is `C_u⁽ᵐ⁾ ⊗ C_v⁽ᵐ⁾`, which
//! under the u-major port order means
//!
//! ```text
//! C₂D⁽ᵐ⁾[(ui, vi), (uk, vk)] = C_u⁽ᵐ⁾[ui, uk] · C_v⁽ᵐ⁾[vi, vk]
//! ```
//!
//! and the estimated current of port `k` is `J_iso⁽ᵐ⁾ · C₂D⁽ᵐ⁾[·, k]`. The
//! 2-D blocks are never materialized on the estimation path.

use nalgebra::DMatrix;

use crate::geometry::{ArrayLattice, Axis};
use crate::mom::{CurrentContext, CurrentDistribution};
use crate::{Error, Result, C64};

/// Isolated currents below this fraction of the peak are rejected as
/// normalization denominators.
pub const DIVISION_GUARD: f64 = 1e-9;

/// Per-mesh transfer matrices of one axis, stored mesh-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisTransferSet {
    axis: Axis,
    n: usize,
    segments: usize,
    /// `coeffs[(mesh * n + element) * n + port]`, all 0-based.
    coeffs: Vec<C64>,
}

impl AxisTransferSet {
    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Elements along the axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Meshes per element.
    pub fn segments(&self) -> usize {
        self.segments
    }

    /// `C⁽ᵐᵉˢʰ⁾[element, port]`, 0-based indices.
    pub fn coefficient(&self, mesh: usize, element: usize, port: usize) -> C64 {
        self.coeffs[(mesh * self.n + element) * self.n + port]
    }

    /// The `n x n` transfer matrix of one mesh.
    pub fn block(&self, mesh: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, k| self.coefficient(mesh, i, k))
    }
}

/// Normalizes the 1-D array currents by the isolated currents.
///
/// `j_axis[k]` must be the distribution for driving port `k + 1`.
pub fn build_axis_transfer(
    axis: Axis,
    j_iso: &CurrentDistribution,
    j_axis: &[CurrentDistribution],
) -> Result<AxisTransferSet> {
    if j_iso.n_elements() != 1 {
        return Err(Error::invalid(
            "isolated distribution must describe one element",
        ));
    }
    let segments = j_iso.segments();
    let n = j_axis.len();
    if n == 0 {
        return Err(Error::invalid("no 1-D array distributions supplied"));
    }
    for (k, j) in j_axis.iter().enumerate() {
        if j.n_elements() != n || j.segments() != segments {
            return Err(Error::invalid(format!(
                "distribution for port {} has {} x {} entries, expected {n} x {segments}",
                k + 1,
                j.n_elements(),
                j.segments()
            )));
        }
        if j.excited_port() != k + 1 {
            return Err(Error::invalid(format!(
                "distribution at position {} drives port {}",
                k + 1,
                j.excited_port()
            )));
        }
    }
    let iso = j_iso.element(0);
    let peak = iso.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (mesh, c) in iso.iter().enumerate() {
        let ratio = if peak > 0.0 { c.norm() / peak } else { 0.0 };
        if !(ratio > DIVISION_GUARD) {
            return Err(Error::DegenerateNormalization {
                mesh: mesh + 1,
                ratio,
                guard: DIVISION_GUARD,
            });
        }
    }

    let mut coeffs = Vec::with_capacity(segments * n * n);
    for (mesh, iso_m) in iso.iter().enumerate() {
        for element in 0..n {
            for j in j_axis {
                coeffs.push(j.get(element, mesh) / iso_m);
            }
        }
    }
    Ok(AxisTransferSet {
        axis,
        n,
        segments,
        coeffs,
    })
}

/// Implicit 2-D transfer matrix `C_u ⊗ C_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix2D {
    u: AxisTransferSet,
    v: AxisTransferSet,
}

impl TransferMatrix2D {
    pub fn nx(&self) -> usize {
        self.u.n
    }

    pub fn ny(&self) -> usize {
        self.v.n
    }

    pub fn segments(&self) -> usize {
        self.u.segments
    }

    pub fn u(&self) -> &AxisTransferSet {
        &self.u
    }

    pub fn v(&self) -> &AxisTransferSet {
        &self.v
    }

    /// Entry for 0-based element slot `element` and port slot `port`
    /// (slot = k − 1 under the u-major order).
    pub fn coefficient(&self, mesh: usize, element: usize, port: usize) -> C64 {
        let ny = self.v.n;
        let (ui, vi) = (element / ny, element % ny);
        let (uk, vk) = (port / ny, port % ny);
        self.u.coefficient(mesh, ui, uk) * self.v.coefficient(mesh, vi, vk)
    }

    /// Materialized `(nx·ny) x (nx·ny)` block of one mesh.
    pub fn block(&self, mesh: usize) -> DMatrix<C64> {
        self.u.block(mesh).kronecker(&self.v.block(mesh))
    }
}

/// Combines the u- and v-axis transfer sets.
pub fn kron_expand(cu: &AxisTransferSet, cv: &AxisTransferSet) -> Result<TransferMatrix2D> {
    if cu.segments != cv.segments {
        return Err(Error::invalid(format!(
            "mesh count mismatch: u axis has {}, v axis has {}",
            cu.segments, cv.segments
        )));
    }
    if cu.axis != Axis::U || cv.axis != Axis::V {
        return Err(Error::invalid(
            "kron_expand expects (u-axis, v-axis) transfer sets",
        ));
    }
    Ok(TransferMatrix2D {
        u: cu.clone(),
        v: cv.clone(),
    })
}

/// Estimated currents of every element for 1-based port `k`.
pub fn estimate_currents_2d(
    j_iso: &CurrentDistribution,
    c2d: &TransferMatrix2D,
    k: usize,
) -> Result<CurrentDistribution> {
    let (nx, ny, m) = (c2d.nx(), c2d.ny(), c2d.segments());
    let n = nx * ny;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("port {k} outside 1..={n}")));
    }
    if j_iso.n_elements() != 1 || j_iso.segments() != m {
        return Err(Error::invalid(
            "isolated distribution does not match the transfer matrix",
        ));
    }
    let iso = j_iso.element(0);
    let (uk, vk) = ((k - 1) / ny, (k - 1) % ny);
    let mut values = Vec::with_capacity(n * m);
    for ui in 0..nx {
        for vi in 0..ny {
            for (mesh, iso_m) in iso.iter().enumerate() {
                let c = c2d.u.coefficient(mesh, ui, uk) * c2d.v.coefficient(mesh, vi, vk);
                values.push(iso_m * c);
            }
        }
    }
    CurrentDistribution::new(values, n, m, k, CurrentContext::Estimated2d)
}

/// Estimates for every port of `lattice`, in port order.
pub fn estimate_all(
    j_iso: &CurrentDistribution,
    c2d: &TransferMatrix2D,
    lattice: &ArrayLattice,
) -> Result<Vec<CurrentDistribution>> {
    if lattice.nx() != c2d.nx() || lattice.ny() != c2d.ny() {
        return Err(Error::invalid("lattice does not match the transfer matrix"));
    }
    (1..=lattice.len())
        .map(|k| estimate_currents_2d(j_iso, c2d, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::discretize_dipole;
    use crate::mom::{solve_1d_array, solve_isolated, PortTermination};
    use crate::SPEED_OF_LIGHT;
    use proptest::prelude::*;

    const F: f64 = 10e9;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn synthetic(
        n: usize,
        m: usize,
        seed: f64,
        port: usize,
        ctx: CurrentContext,
    ) -> CurrentDistribution {
        let values = (0..n * m)
            .map(|i| {
                let t = i as f64 + seed;
                c(1.0 + (0.7 * t).sin().abs(), (1.3 * t).cos())
            })
            .collect();
        CurrentDistribution::new(values, n, m, port, ctx).unwrap()
    }

    fn axis_set(
        axis: Axis,
        n: usize,
        m: usize,
        seed: f64,
    ) -> (CurrentDistribution, AxisTransferSet) {
        let iso = synthetic(1, m, 0.5, 1, CurrentContext::Isolated);
        let js: Vec<_> = (1..=n)
            .map(|k| {
                synthetic(
                    n,
                    m,
                    seed + 10.0 * k as f64,
                    k,
                    CurrentContext::for_axis(axis),
                )
            })
            .collect();
        let set = build_axis_transfer(axis, &iso, &js).unwrap();
        (iso, set)
    }

    #[test]
    fn single_element_normalizes_to_one() {
        let iso = synthetic(1, 7, 0.0, 1, CurrentContext::Isolated);
        let set = build_axis_transfer(Axis::V, &iso, std::slice::from_ref(&iso)).unwrap();
        for mesh in 0..7 {
            assert_eq!(set.coefficient(mesh, 0, 0), c(1.0, 0.0));
        }
    }

    #[test]
    fn reconstruction_round_trip() {
        let m = 5;
        let iso = synthetic(1, m, 0.25, 1, CurrentContext::Isolated);
        let js: Vec<_> = (1..=3)
            .map(|k| synthetic(3, m, k as f64 * 3.1, k, CurrentContext::ArrayU))
            .collect();
        let set = build_axis_transfer(Axis::U, &iso, &js).unwrap();
        for (k, j) in js.iter().enumerate() {
            for i in 0..3 {
                for mesh in 0..m {
                    let back = iso.get(0, mesh) * set.coefficient(mesh, i, k);
                    let orig = j.get(i, mesh);
                    assert!((back - orig).norm() <= 4.0 * f64::EPSILON * orig.norm());
                }
            }
        }
    }

    #[test]
    fn vanishing_isolated_current_is_rejected() {
        let mut values: Vec<C64> = (0..5).map(|i| c(1.0 + i as f64, 0.0)).collect();
        values[3] = c(1e-12, 0.0);
        let iso = CurrentDistribution::new(values, 1, 5, 1, CurrentContext::Isolated).unwrap();
        let j = synthetic(1, 5, 1.0, 1, CurrentContext::ArrayU);
        match build_axis_transfer(Axis::U, &iso, &[j]) {
            Err(Error::DegenerateNormalization { mesh, .. }) => assert_eq!(mesh, 4),
            other => panic!("expected degenerate normalization, got {other:?}"),
        }
    }

    #[test]
    fn coupling_decays_with_separation_at_feed() {
        let lambda = SPEED_OF_LIGHT / F;
        let element = discretize_dipole(0.47 * lambda, 0.001 * lambda, 11).unwrap();
        let lat = ArrayLattice::new(3, 1, 0.14, 0.12, F).unwrap();
        let t = PortTermination::default();
        let iso = solve_isolated(&element, F, &t).unwrap();
        let js = solve_1d_array(Axis::U, &lat, &element, &t).unwrap();
        let set = build_axis_transfer(Axis::U, &iso, &js).unwrap();
        let feed = element.feed_index();
        // Port 1 driven: element 2 is one spacing away, element 3 two.
        assert!(set.coefficient(feed, 2, 0).norm() < set.coefficient(feed, 1, 0).norm());
        assert!(set.coefficient(feed, 0, 2).norm() < set.coefficient(feed, 1, 2).norm());
    }

    #[test]
    fn kron_with_trivial_v_axis_is_the_u_block() {
        let (iso, cu) = axis_set(Axis::U, 4, 3, 2.0);
        let cv = build_axis_transfer(Axis::V, &iso, std::slice::from_ref(&iso)).unwrap();
        let c2d = kron_expand(&cu, &cv).unwrap();
        for mesh in 0..3 {
            assert_eq!(c2d.block(mesh), cu.block(mesh));
        }
    }

    #[test]
    fn kron_dimensions_at_11x9_scale() {
        let (_, cu) = axis_set(Axis::U, 11, 2, 1.0);
        let (_, cv) = axis_set(Axis::V, 9, 2, 5.0);
        let c2d = kron_expand(&cu, &cv).unwrap();
        assert_eq!(c2d.block(0).shape(), (99, 99));
    }

    #[test]
    fn kron_spot_entry() {
        let (_, cu) = axis_set(Axis::U, 3, 2, 1.0);
        let (_, cv) = axis_set(Axis::V, 3, 2, 4.0);
        let c2d = kron_expand(&cu, &cv).unwrap();
        let lat = ArrayLattice::new(3, 3, 0.14, 0.12, F).unwrap();
        let elem = lat.port_index(2, 3).unwrap() - 1;
        let port = lat.port_index(1, 1).unwrap() - 1;
        for mesh in 0..2 {
            let expect = cu.coefficient(mesh, 1, 0) * cv.coefficient(mesh, 2, 0);
            assert_eq!(c2d.coefficient(mesh, elem, port), expect);
            assert_eq!(c2d.block(mesh)[(elem, port)], expect);
        }
    }

    #[test]
    fn kron_rejects_mismatched_meshes() {
        let (_, cu) = axis_set(Axis::U, 3, 2, 1.0);
        let (_, cv) = axis_set(Axis::V, 3, 4, 1.0);
        assert!(kron_expand(&cu, &cv).is_err());
        assert!(kron_expand(&cv, &cu).is_err());
    }

    #[test]
    fn one_by_one_estimate_is_isolated() {
        let iso = synthetic(1, 6, 0.3, 1, CurrentContext::Isolated);
        let cu = build_axis_transfer(Axis::U, &iso, std::slice::from_ref(&iso)).unwrap();
        let cv = build_axis_transfer(Axis::V, &iso, std::slice::from_ref(&iso)).unwrap();
        let c2d = kron_expand(&cu, &cv).unwrap();
        let est = estimate_currents_2d(&iso, &c2d, 1).unwrap();
        assert_eq!(est.values(), iso.values());
        assert_eq!(est.context(), CurrentContext::Estimated2d);
        assert!(estimate_currents_2d(&iso, &c2d, 2).is_err());
    }

    /// Explicit double loop over (element, port) pairs, independent of the
    /// mesh-major storage and of nalgebra's Kronecker product.
    fn kron_double_loop(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        let (p, q) = (a.nrows(), b.nrows());
        let mut out = DMatrix::zeros(p * q, p * q);
        for i1 in 0..p {
            for j1 in 0..p {
                for i2 in 0..q {
                    for j2 in 0..q {
                        out[(i1 * q + i2, j1 * q + j2)] = a[(i1, j1)] * b[(i2, j2)];
                    }
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn kronecker_consistency(nx in 1usize..=4, ny in 1usize..=4, m in 1usize..4, seed in 0.0f64..10.0) {
            let (_, cu) = axis_set(Axis::U, nx, m, seed);
            let (_, cv) = axis_set(Axis::V, ny, m, seed + 1.7);
            let c2d = kron_expand(&cu, &cv).unwrap();
            for mesh in 0..m {
                let explicit = kron_double_loop(&cu.block(mesh), &cv.block(mesh));
                prop_assert_eq!(&c2d.block(mesh), &explicit);
                for e in 0..nx * ny {
                    for p in 0..nx * ny {
                        prop_assert_eq!(c2d.coefficient(mesh, e, p), explicit[(e, p)]);
                    }
                }
            }
        }

        #[test]
        fn estimates_scale_with_isolated_currents(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let alpha = c(re, im);
            let (iso, cu) = axis_set(Axis::U, 3, 4, 0.9);
            let (_, cv) = axis_set(Axis::V, 2, 4, 2.2);
            let c2d = kron_expand(&cu, &cv).unwrap();
            let scaled_iso = iso.scaled(alpha);
            for k in 1..=6 {
                let a = estimate_currents_2d(&iso, &c2d, k).unwrap().scaled(alpha);
                let b = estimate_currents_2d(&scaled_iso, &c2d, k).unwrap();
                prop_assert!(a.max_relative_difference(&b) < 1e-14);
            }
        }
    }
}
