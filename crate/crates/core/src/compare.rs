//! Cross-validation of the reduced memory-kernel dynamics against the
//! observable block of the full conservative propagation.

use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_full, propagate_reduced, ForcingSignal, ForcingTarget, TimeGrid};
use crate::error::Result;
use crate::linalg::CVector;
use crate::system::{assemble_full, BlockSystem};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CompareReport {
    pub t_max: f64,
    pub steps: usize,
    pub step: f64,
    /// `max_t ||v1_reduced(t) - P1 V(t)||` on the given grid.
    pub sup_diff: f64,
    /// The same on the grid with half the step.
    pub sup_diff_refined: f64,
    /// `log2(sup_diff / sup_diff_refined)`.
    pub order: f64,
}

/// Sup-norm gap between reduced and projected full dynamics on one grid,
/// starting from `(v1_0, 0)` with no forcing.
pub fn discrepancy(sys: &BlockSystem, v1_0: &CVector, grid: &TimeGrid) -> Result<f64> {
    let mut v0 = CVector::zeros(sys.dim());
    v0.rows_mut(0, sys.d1()).copy_from(v1_0);
    let full = propagate_full(&assemble_full(sys), &v0, &ForcingSignal::zero(ForcingTarget::Full), grid)?;
    let reduced = propagate_reduced(sys, v1_0, &ForcingSignal::zero(ForcingTarget::Observable), grid)?;
    reduced.sup_distance(&full.project(0, sys.d1()))
}

/// Runs both propagators on `grid` and on its halved-step refinement.
pub fn compare(sys: &BlockSystem, v1_0: &CVector, grid: &TimeGrid) -> Result<CompareReport> {
    let sup_diff = discrepancy(sys, v1_0, grid)?;
    let sup_diff_refined = discrepancy(sys, v1_0, &grid.refined())?;
    Ok(CompareReport {
        t_max: grid.t_max(),
        steps: grid.steps(),
        step: grid.step(),
        sup_diff,
        sup_diff_refined,
        order: (sup_diff / sup_diff_refined).log2(),
    })
}
