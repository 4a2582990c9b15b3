//! The dual-variable fixed point and the MMSE-DUAL entry point.
//!
//! The map is `f_s(lambda) = (gamma_s / (1 + gamma_s)) / (a_s^H Y_s a_s)` with
//! `a_s = H^H u_s` and `Y_s = (I + sum_{t in I(s) or t = s} lambda_t a_t a_t^H)^{-1}`,
//! where `t in I(s)` ranges over the streams whose receivers see `s`. With
//! one stream per user every `Y_s` is the same matrix. With several streams
//! per user, stream `m` of user `k` additionally drops that user's streams
//! `i > m`; those matrices come from one shared Cholesky factor and
//! Sherman-Morrison downdates.

use crate::beamforming::{check_count, effective_uplink, BeamformingError, DualVariables};
use crate::linalg::{add_outer, cholesky, identity, CVector};
use crate::problem::Problem;
use crate::solver::{self, Algorithm, SolveFailure, SolveOptions, SolveResult};

pub use crate::power::downlink_power_solve;
pub use crate::solver::SolveOptions as MmseDualOptions;

/// One synchronous application of the multiplier map.
pub fn lambda_map(p: &Problem, rx: &[CVector], lambda: &[f64]) -> Result<Vec<f64>, BeamformingError> {
    check_count(p, rx.len())?;
    check_count(p, lambda.len())?;
    let eff = effective_uplink(p, rx);
    let mut y = identity(p.num_tx());
    for (a, &l) in eff.iter().zip(lambda) {
        add_outer(&mut y, a, l);
    }
    let chol = cholesky(y).ok_or(BeamformingError::NotPositiveDefinite { stream: 0 })?;
    let mut out = vec![0.0; p.num_streams()];
    for k in 0..p.num_users() {
        let range = p.layout().user_streams(k);
        let mut z: Vec<CVector> = range.clone().map(|s| chol.solve(&eff[s])).collect();
        for m in (0..z.len()).rev() {
            let s = range.start + m;
            let quad = eff[s].dotc(&z[m]).re;
            if !(quad > 0.0 && quad.is_finite()) {
                return Err(BeamformingError::InvisibleToDual { stream: s });
            }
            let g = p.gamma_of(s);
            out[s] = g / (1.0 + g) / quad;
            if m > 0 && lambda[s] != 0.0 {
                // remove stream s from the matrix seen by the earlier streams
                let denom = 1.0 - lambda[s] * quad;
                let (head, tail) = z.split_at_mut(m);
                let zm = &tail[0];
                for zi in head.iter_mut() {
                    let coef = eff[s].dotc(zi) * (lambda[s] / denom);
                    *zi += zm * coef;
                }
            }
        }
    }
    Ok(out)
}

/// `n` synchronous iterations of [`lambda_map`] from `lambda0`.
pub fn lambda_fixed_point(
    p: &Problem,
    rx: &[CVector],
    lambda0: &[f64],
    n: usize,
) -> Result<DualVariables, BeamformingError> {
    let mut lambda = lambda0.to_vec();
    for _ in 0..n {
        lambda = lambda_map(p, rx, &lambda)?;
    }
    Ok(DualVariables(lambda))
}

/// `max_s |lambda_s - f_s(lambda)| / lambda_s`
pub fn fixed_point_residual(p: &Problem, rx: &[CVector], lambda: &[f64]) -> Result<f64, BeamformingError> {
    let f = lambda_map(p, rx, lambda)?;
    Ok(lambda
        .iter()
        .zip(&f)
        .map(|(l, x)| (l - x).abs() / l)
        .fold(0.0, f64::max))
}

/// Runs MMSE-DUAL on `p`.
pub fn solve(p: &Problem, opts: &SolveOptions) -> Result<SolveResult, SolveFailure> {
    solver::solve(p, Algorithm::MmseDual, opts)
}
