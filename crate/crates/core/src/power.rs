//! Power allocation for fixed beamforming directions: the downlink `p`/`mu`
//! system and the virtual-uplink `q` system, both with every SINR active.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::beamforming::{check_count, effective_uplink, BeamformingError};
use crate::linalg::{norm_sqr, solve_real, CVector, RealSolveError};
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error("power system is singular")]
    Singular,
    #[error("power system is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("power system has non-positive solution {values:?}: targets unsupportable on these directions")]
    NonPositive { values: Vec<f64> },
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
}

impl From<RealSolveError> for PowerError {
    fn from(e: RealSolveError) -> Self {
        match e {
            RealSolveError::Singular => Self::Singular,
            RealSolveError::IllConditioned(c) => Self::IllConditioned(c),
        }
    }
}

fn solve_positive(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>, PowerError> {
    let x = solve_real(a, &b)?;
    let values: Vec<f64> = x.iter().copied().collect();
    if values.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(PowerError::NonPositive { values });
    }
    Ok(values)
}

/// Downlink powers making every SINR equal its target.
///
/// Row `s`: `(1/gamma_s) mu_s |u_s^H H v_s|^2 - sum_{t in I(s)} mu_t |u_s^H H v_t|^2
/// = sigma_s^2 ||u_s||^2`, with `tx_dirs` of unit norm. Any nonzero scaling of
/// `u_s` scales row `s` uniformly, so normalized or weighted receivers give
/// the same powers.
pub fn downlink_power_solve(p: &Problem, rx: &[CVector], tx_dirs: &[CVector]) -> Result<Vec<f64>, PowerError> {
    check_count(p, rx.len())?;
    check_count(p, tx_dirs.len())?;
    let n = p.num_streams();
    if let Some(s) = rx.iter().position(|u| norm_sqr(u) == 0.0) {
        return Err(BeamformingError::ZeroReceiver { stream: s }.into());
    }
    let eff = effective_uplink(p, rx);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for s in 0..n {
        a[(s, s)] = eff[s].dotc(&tx_dirs[s]).norm_sqr() / p.gamma_of(s);
        for t in p.layout().interferers(s) {
            a[(s, t)] = -eff[s].dotc(&tx_dirs[t]).norm_sqr();
        }
        b[s] = p.noise_of(s) * norm_sqr(&rx[s]);
    }
    solve_positive(a, b)
}

/// Virtual-uplink powers making every uplink SINR equal its target.
///
/// Row `s`: `(1/gamma_s) q_s |v_s^H H^H u_s|^2 - sum_{t : s in I(t)} q_t |v_s^H H_t^H u_t|^2
/// = ||v_s||^2`, with unit-norm `rx_dirs` and the current (unnormalized)
/// transmit vectors.
pub fn uplink_power_solve(p: &Problem, rx_dirs: &[CVector], tx: &[CVector]) -> Result<Vec<f64>, PowerError> {
    check_count(p, rx_dirs.len())?;
    check_count(p, tx.len())?;
    let n = p.num_streams();
    if let Some(s) = tx.iter().position(|v| norm_sqr(v) == 0.0) {
        return Err(BeamformingError::ZeroTransmitter { stream: s }.into());
    }
    let eff = effective_uplink(p, rx_dirs);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for s in 0..n {
        a[(s, s)] = tx[s].dotc(&eff[s]).norm_sqr() / p.gamma_of(s);
        for t in p.layout().victims(s) {
            a[(s, t)] = -tx[s].dotc(&eff[t]).norm_sqr();
        }
        b[s] = norm_sqr(&tx[s]);
    }
    solve_positive(a, b)
}
