//! Uplink-downlink duality (UDD) power control.
//!
//! Each iteration pairs the MMSE receivers of the current beamformers with
//! uplink powers that make every virtual-uplink SINR exactly its target,
//! moves the transmit directions to the uplink MMSE filters, and re-solves
//! the downlink powers. From a feasible start the downlink power, the
//! weighted uplink power and the next downlink power interleave
//! monotonically.

use crate::problem::Problem;
use crate::solver::{self, Algorithm, SolveFailure, SolveOptions, SolveResult};

pub use crate::power::downlink_power_solve as downlink_power_solve_udd;
pub use crate::power::uplink_power_solve;

/// Runs UDD on `p`. The start must be feasible; with `warm_start_iters > 0`
/// a few MMSE-DUAL iterations are run first to get there.
pub fn solve(p: &Problem, opts: &SolveOptions) -> Result<SolveResult, SolveFailure> {
    solver::solve(p, Algorithm::Udd, opts)
}
