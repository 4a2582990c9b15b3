//! The outer iteration shared by both algorithms and every stream layout.
//!
//! Each iteration starts from transmit beamformers `v`, computes their
//! normalized MMSE receivers, records a trace row and then either stops or
//! produces new beamformers:
//!
//! * MMSE-DUAL: multipliers from the fixed point, uplink-MMSE directions
//!   weighted by the multipliers, downlink powers from the active-SINR system.
//! * UDD: uplink powers from the active uplink-SINR system, uplink-MMSE
//!   directions with the powers folded into the receivers, downlink powers.
//!
//! A solve stops at a feasible point once the relative total-power change
//! and the relative primal/dual power gap are both below the tolerance and
//! the first-order residuals are below `stationarity_tol`. Near the optimum
//! the power is flat, so a small power change alone still leaves residuals
//! of the order of its square root.
//! The returned point is the last recorded row: `v`, its MMSE receivers, and
//! the multipliers (MMSE-DUAL) or uplink powers (UDD) paired with them.

use std::fmt;

use thiserror::Error;

use crate::beamforming::{
    canonical_phase, downlink_sinr, max_violation, mmse_receivers, phase_normalize, total_power,
    uplink_mmse_directions, BeamformingError, DualVariables, RxBeamformers, TxBeamformers,
};
use crate::init::{initial_beamformers, InitError, InitMode};
use crate::kkt::stationarity;
use crate::linalg::{norm_sqr, CVector};
use crate::mmse_dual::lambda_fixed_point;
use crate::power::{downlink_power_solve, uplink_power_solve, PowerError};
use crate::problem::Problem;
use crate::trace::{Trace, FEASIBILITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    MmseDual,
    Udd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::MmseDual => "mmse-dual",
            Self::Udd => "udd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mmse-dual" => Ok(Self::MmseDual),
            "udd" => Ok(Self::Udd),
            _ => Err(format!("unknown algorithm '{s}' (expected mmse-dual or udd)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_outer_iters: usize,
    /// Inner fixed-point iterations `N` per outer iteration (MMSE-DUAL).
    pub fixed_point_iters: usize,
    /// Relative total-power change (and primal/dual gap) at which to stop.
    pub tolerance: f64,
    pub init: InitMode,
    pub seed: u64,
    /// Largest relative first-order residual accepted at a stop.
    pub stationarity_tol: f64,
    /// MMSE-DUAL iterations run before UDD starts; UDD needs a feasible start.
    pub warm_start_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            fixed_point_iters: 20,
            tolerance: 1e-8,
            init: InitMode::Random,
            seed: 0,
            stationarity_tol: 1e-7,
            warm_start_iters: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub algorithm: Algorithm,
    /// Phase-normalized so that `u_s^H H v_s` is real and positive.
    pub tx: TxBeamformers,
    /// Unit norm for MMSE-DUAL; `sqrt(q_s)` times a unit vector for UDD.
    pub rx: RxBeamformers,
    /// Multipliers paired with `rx`; all ones for UDD.
    pub lambda: DualVariables,
    /// Downlink powers `||v_s||^2`.
    pub powers: Vec<f64>,
    /// Uplink powers `q` (UDD only).
    pub uplink: Option<Vec<f64>>,
    pub trace: Trace,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SolveResult {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FailureKind {
    #[error("infeasible initialization: {reason}")]
    InfeasibleInitialization { q: Option<Vec<f64>>, reason: PowerError },
    #[error("power system unsolvable: {0}")]
    InfeasiblePowerSystem(PowerError),
    #[error("degenerate user: {0}")]
    DegenerateUser(BeamformingError),
    #[error("{0}")]
    Init(#[from] InitError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} (iteration {iteration})")]
pub struct SolveFailure {
    pub kind: FailureKind,
    pub iteration: usize,
    pub trace: Trace,
}

struct Point {
    v: Vec<CVector>,
    u: Vec<CVector>,
    lambda: Vec<f64>,
    q: Option<Vec<f64>>,
    status: SolveStatus,
}

struct Run<'a> {
    p: &'a Problem,
    opts: &'a SolveOptions,
    trace: Trace,
}

impl<'a> Run<'a> {
    fn fail(&mut self, kind: FailureKind) -> SolveFailure {
        SolveFailure {
            kind,
            iteration: self.trace.len(),
            trace: std::mem::take(&mut self.trace),
        }
    }

    fn degenerate(&mut self, e: BeamformingError) -> SolveFailure {
        self.fail(FailureKind::DegenerateUser(e))
    }

    /// Receivers, SINRs, power and violation of `v`.
    fn evaluate(&mut self, v: &[CVector]) -> Result<(Vec<CVector>, Vec<f64>, f64, f64), SolveFailure> {
        let u = mmse_receivers(self.p, v).map_err(|e| self.degenerate(e))?.0;
        let sinr = downlink_sinr(self.p, v, &u).map_err(|e| self.degenerate(e))?;
        let viol = max_violation(self.p, &sinr);
        Ok((u, sinr, total_power(v), viol))
    }

    /// Stop test for the candidate `(v, u, lambda)` of the current row.
    fn stop(&self, point: (&[CVector], &[CVector], &[f64]), power: f64, dual: f64, viol: f64) -> bool {
        let Some(prev) = self.trace.rows.iter().rev().nth(1) else {
            return false;
        };
        let tol = self.opts.tolerance;
        let settled = (prev.total_power - power).abs() < tol * power
            && (power - dual).abs() < tol * power
            && viol <= FEASIBILITY_TOL;
        settled
            && stationarity(self.p, point.0, point.1, point.2)
                .is_ok_and(|(a, b)| a.max(b) < self.opts.stationarity_tol)
    }

    fn dual_step(&mut self, u: &[CVector], lambda: &[f64]) -> Result<Vec<CVector>, SolveFailure> {
        let dirs = uplink_mmse_directions(self.p, u, lambda).map_err(|e| self.degenerate(e))?;
        let mu = downlink_power_solve(self.p, u, &dirs).map_err(|e| self.fail(FailureKind::InfeasiblePowerSystem(e)))?;
        Ok(TxBeamformers::from_split(&dirs, &mu).0)
    }

    /// MMSE-DUAL for at most `budget` rows. Without `converge` (warm start)
    /// the last row's update is still applied and the new point handed on.
    fn mmse_dual(&mut self, mut v: Vec<CVector>, budget: usize, converge: bool) -> Result<Point, SolveFailure> {
        let mut lambda = vec![1.0; self.p.num_streams()];
        for done in 1.. {
            let (u, sinr, power, viol) = self.evaluate(&v)?;
            self.trace.push(power, viol, sinr, None);
            lambda = lambda_fixed_point(self.p, &u, &lambda, self.opts.fixed_point_iters)
                .map_err(|e| self.degenerate(e))?
                .0;
            if converge {
                let dual: f64 = (0..u.len()).map(|s| lambda[s] * self.p.noise_of(s) * norm_sqr(&u[s])).sum();
                let status = if self.stop((&v, &u, &lambda), power, dual, viol) {
                    Some(SolveStatus::Converged)
                } else if done >= budget {
                    Some(SolveStatus::MaxIters)
                } else {
                    None
                };
                if let Some(status) = status {
                    return Ok(Point { v, u, lambda, q: None, status });
                }
            }
            v = self.dual_step(&u, &lambda)?;
            if !converge && done >= budget {
                return Ok(Point { v, u, lambda, q: None, status: SolveStatus::MaxIters });
            }
        }
        unreachable!()
    }

    fn udd(&mut self, mut v: Vec<CVector>, budget: usize) -> Result<Point, SolveFailure> {
        let ones = vec![1.0; self.p.num_streams()];
        for done in 1.. {
            let (u_bar, sinr, power, viol) = self.evaluate(&v)?;
            let q = match uplink_power_solve(self.p, &u_bar, &v) {
                Ok(q) => q,
                Err(reason) => {
                    self.trace.push(power, viol, sinr, None);
                    let q = match &reason {
                        PowerError::NonPositive { values } => Some(values.clone()),
                        _ => None,
                    };
                    return Err(self.fail(FailureKind::InfeasibleInitialization { q, reason }));
                }
            };
            let uplink: f64 = q.iter().enumerate().map(|(s, x)| self.p.noise_of(s) * x).sum();
            self.trace.push(power, viol, sinr, Some(uplink));
            let u: Vec<CVector> = u_bar.iter().zip(&q).map(|(x, &w)| x.scale(w.sqrt())).collect();
            let status = if self.stop((&v, &u, &ones), power, uplink, viol) {
                Some(SolveStatus::Converged)
            } else if done >= budget {
                Some(SolveStatus::MaxIters)
            } else {
                None
            };
            if let Some(status) = status {
                return Ok(Point { v, u, lambda: ones, q: Some(q), status });
            }
            v = self.dual_step(&u, &ones)?;
        }
        unreachable!()
    }
}

/// Solves `p` with the chosen algorithm.
pub fn solve(p: &Problem, algo: Algorithm, opts: &SolveOptions) -> Result<SolveResult, SolveFailure> {
    let mut run = Run {
        p,
        opts,
        trace: Trace::default(),
    };
    let v0 = initial_beamformers(p, &opts.init, opts.seed).map_err(|e| run.fail(e.into()))?.0;
    let point = match algo {
        Algorithm::MmseDual => run.mmse_dual(v0, opts.max_outer_iters, true)?,
        Algorithm::Udd => {
            let v = if opts.warm_start_iters > 0 {
                run.mmse_dual(v0, opts.warm_start_iters, false)?.v
            } else {
                v0
            };
            run.udd(v, opts.max_outer_iters)?
        }
    };
    finish(run, algo, point)
}

fn finish(mut run: Run<'_>, algorithm: Algorithm, point: Point) -> Result<SolveResult, SolveFailure> {
    let u: Vec<CVector> = point.u.iter().map(canonical_phase).collect();
    let tx = phase_normalize(run.p, &point.v, &u).map_err(|e| run.degenerate(e))?;
    let powers = tx.iter().map(norm_sqr).collect();
    let iterations = run.trace.len();
    Ok(SolveResult {
        algorithm,
        tx,
        rx: RxBeamformers(u),
        lambda: DualVariables(point.lambda),
        powers,
        uplink: point.q,
        trace: run.trace,
        status: point.status,
        iterations,
    })
}
