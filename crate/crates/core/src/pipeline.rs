//! End-to-end paths: the decomposed estimator and the full-array reference.

use std::time::{Duration, Instant};

use crate::decomp::{build_axis_transfer, estimate_all, kron_expand, TransferMatrix2D};
use crate::geometry::{ArrayLattice, Axis, ElementMesh};
use crate::mom::{
    solve_1d_array_timed, solve_2d_oracle_timed, solve_array, CurrentContext, CurrentDistribution,
    ImpedanceMatrix, PortTermination, SolveTimings,
};
use crate::Result;

/// Geometry and port model shared by both paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayModel {
    pub lattice: ArrayLattice,
    pub element: ElementMesh,
    pub termination: PortTermination,
}

/// Wall-clock cost of one path.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PathTiming {
    pub solve: SolveTimings,
    /// Transfer matrices, Kronecker expansion and estimation.
    pub algebra: Duration,
}

impl PathTiming {
    pub fn total(&self) -> Duration {
        self.solve.total() + self.algebra
    }
}

#[derive(Debug, Clone)]
pub struct DecomposedRun {
    pub isolated: CurrentDistribution,
    pub axis_u: Vec<CurrentDistribution>,
    pub axis_v: Vec<CurrentDistribution>,
    pub impedance_u: ImpedanceMatrix,
    pub impedance_v: ImpedanceMatrix,
    pub transfer: TransferMatrix2D,
    /// Estimated currents, one per port.
    pub estimates: Vec<CurrentDistribution>,
    pub timing: PathTiming,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub currents: Vec<CurrentDistribution>,
    pub impedance: ImpedanceMatrix,
    pub timing: PathTiming,
}

/// Isolated solve, two 1-D array solves, transfer matrices and estimates.
pub fn run_decomposed(model: &ArrayModel) -> Result<DecomposedRun> {
    let lattice = &model.lattice;
    let iso = solve_array(
        &model.element,
        &[nalgebra::Vector3::zeros()],
        lattice.frequency(),
        &model.termination,
        CurrentContext::Isolated,
        "isolated element",
    )?;
    let u = solve_1d_array_timed(Axis::U, lattice, &model.element, &model.termination)?;
    let v = solve_1d_array_timed(Axis::V, lattice, &model.element, &model.termination)?;
    let isolated = iso.currents.into_iter().next().expect("one port");

    let start = Instant::now();
    let cu = build_axis_transfer(Axis::U, &isolated, &u.currents)?;
    let cv = build_axis_transfer(Axis::V, &isolated, &v.currents)?;
    let transfer = kron_expand(&cu, &cv)?;
    let estimates = estimate_all(&isolated, &transfer, lattice)?;
    let algebra = start.elapsed();

    Ok(DecomposedRun {
        isolated,
        timing: PathTiming {
            solve: iso.timings + u.timings + v.timings,
            algebra,
        },
        axis_u: u.currents,
        axis_v: v.currents,
        impedance_u: u.impedance,
        impedance_v: v.impedance,
        transfer,
        estimates,
    })
}

/// Full 2-D solve with every port driven in turn.
pub fn run_oracle(model: &ArrayModel) -> Result<OracleRun> {
    let sol = solve_2d_oracle_timed(&model.lattice, &model.element, &model.termination)?;
    Ok(OracleRun {
        currents: sol.currents,
        impedance: sol.impedance,
        timing: PathTiming {
            solve: sol.timings,
            algebra: Duration::ZERO,
        },
    })
}
