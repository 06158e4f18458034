//! Shared setup for the criterion benches.

use aep_core::pipeline::ArrayModel;
use aep_core::scenario::Scenario;

/// The size ladder used by the scaling comparison.
pub const LADDER: [(usize, usize); 4] = [(3, 3), (5, 4), (7, 5), (9, 7)];

/// Default dipole array of `nx x ny` elements.
pub fn model(nx: usize, ny: usize) -> ArrayModel {
    Scenario {
        nx,
        ny,
        ..Scenario::default()
    }
    .model()
    .expect("default scenario is valid")
}
