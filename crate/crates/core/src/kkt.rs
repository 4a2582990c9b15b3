//! Independent certificates for a candidate solution: first-order
//! conditions, constraint activity, eigenvalue structure and the
//! primal/dual power gap.
//!
//! Per stream `s` with `g = H v_s` and `a_t = H_t^H u_t`:
//!
//! * `A_s = C_s - (1/gamma_s) g g^H` must annihilate `u_s` (receiver optimality);
//! * `B_s = D_s(lambda) - (lambda_s/gamma_s) a_s a_s^H` must annihilate `v_s`
//!   (transmitter optimality), `D_s = I + sum_{t : s in I(t)} lambda_t a_t a_t^H`;
//! * `|u_s^H g|^2 >= gamma_s (interference + noise)` with equality when `lambda_s > 0`.
//!
//! These are the single-stream conditions; with a multi-stream layout the
//! interferer sets give the per-stream system of the SIC formulation.

use serde::{Deserialize, Serialize};

use crate::beamforming::{check_count, effective_uplink, interference_covariance, uplink_covariance, BeamformingError};
use crate::linalg::{hermitian_eigenvalues, hpd_solve, norm_sqr, right_singular, CMatrix, CVector};
use crate::problem::Problem;

/// Threshold for the first-order residuals.
pub const KKT_TOL: f64 = 1e-6;
/// Threshold for the relative primal/dual power gap.
pub const GAP_TOL: f64 = 1e-8;
/// Relative magnitude below which an eigenvalue counts as zero.
const EIG_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamKkt {
    pub stationarity_rx: f64,
    pub stationarity_tx: f64,
    /// `(|u^H H v|^2 - gamma (I + N)) / (gamma (I + N))`; negative means violated.
    pub relative_slack: f64,
    /// Smallest eigenvalue of `A_s` over its spectral norm.
    pub min_eig_a: f64,
    pub min_eig_b: f64,
    pub negative_eigs_a: usize,
    pub negative_eigs_b: usize,
    /// `|(1/gamma) v^H H^H C^{-1} H v - 1|`
    pub mmse_equality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity_rx: f64,
    pub stationarity_tx: f64,
    /// Largest `|relative slack|` weighted by `lambda_s / max(lambda)`.
    pub complementarity: f64,
    pub primal_violation: f64,
    /// `min_s lambda_s`
    pub dual_feasibility: f64,
    /// `|sum ||v||^2 - sum lambda sigma^2 ||u||^2| / sum ||v||^2`
    pub duality_gap: f64,
    /// Largest `|relative slack|`: how far any constraint is from active.
    pub max_activity: f64,
    pub streams: Vec<StreamKkt>,
}

impl KktReport {
    /// Largest first-order residual.
    pub fn max_residual(&self) -> f64 {
        [self.stationarity_rx, self.stationarity_tx, self.complementarity, self.primal_violation]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn is_kkt(&self) -> bool {
        self.max_residual() < KKT_TOL && self.dual_feasibility > 0.0
    }

    /// KKT point with zero primal/dual gap.
    pub fn is_certified(&self) -> bool {
        self.is_kkt() && self.duality_gap < GAP_TOL
    }

    pub fn min_eig_a(&self) -> f64 {
        self.streams.iter().map(|s| s.min_eig_a).fold(f64::INFINITY, f64::min)
    }

    pub fn min_eig_b(&self) -> f64 {
        self.streams.iter().map(|s| s.min_eig_b).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn rank_one(x: &CVector, w: f64) -> CMatrix {
    (x * x.adjoint()).scale(w)
}

fn eig_summary(m: &CMatrix) -> (f64, usize) {
    let ev = hermitian_eigenvalues(m);
    let norm = ev.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    if norm == 0.0 {
        return (0.0, 0);
    }
    let neg = ev.iter().filter(|&&e| e < -EIG_ZERO * norm).count();
    (ev[0] / norm, neg)
}

/// Relative first-order residuals `(||A_s u_s||, ||B_s v_s||)` of stream `s`.
fn stream_stationarity(p: &Problem, tx: &[CVector], rx: &[CVector], eff: &[CVector], lambda: &[f64], s: usize) -> (f64, f64, CMatrix, CMatrix, CMatrix) {
    let gamma = p.gamma_of(s);
    let g = p.channel_of(s) * &tx[s];
    let c = interference_covariance(p, tx, s);
    let a_mat = &c - rank_one(&g, 1.0 / gamma);
    let scale_a = c.norm().max(norm_sqr(&g) / gamma);
    let rx_res = (&a_mat * &rx[s]).norm() / (scale_a * rx[s].norm());
    let d = uplink_covariance(p, eff, lambda, s);
    let b_mat = &d - rank_one(&eff[s], lambda[s] / gamma);
    let scale_b = d.norm().max(lambda[s] * norm_sqr(&eff[s]) / gamma);
    let tx_res = (&b_mat * &tx[s]).norm() / (scale_b * tx[s].norm());
    (rx_res, tx_res, c, a_mat, b_mat)
}

/// Largest relative receiver and transmitter stationarity residuals.
pub fn stationarity(p: &Problem, tx: &[CVector], rx: &[CVector], lambda: &[f64]) -> Result<(f64, f64), BeamformingError> {
    check_count(p, tx.len())?;
    check_count(p, rx.len())?;
    check_count(p, lambda.len())?;
    let eff = effective_uplink(p, rx);
    Ok((0..p.num_streams()).fold((0.0, 0.0), |(a, b), s| {
        let (x, y, ..) = stream_stationarity(p, tx, rx, &eff, lambda, s);
        (f64::max(a, x), f64::max(b, y))
    }))
}

/// Evaluates every condition at `(tx, rx, lambda)`.
pub fn kkt_residual(p: &Problem, tx: &[CVector], rx: &[CVector], lambda: &[f64]) -> Result<KktReport, BeamformingError> {
    check_count(p, tx.len())?;
    check_count(p, rx.len())?;
    check_count(p, lambda.len())?;
    let n = p.num_streams();
    let eff = effective_uplink(p, rx);
    let lambda_max = lambda.iter().copied().fold(0.0, f64::max);
    let mut streams = Vec::with_capacity(n);
    for s in 0..n {
        let gamma = p.gamma_of(s);
        let g = p.channel_of(s) * &tx[s];
        let (stationarity_rx, stationarity_tx, c, a_mat, b_mat) = stream_stationarity(p, tx, rx, &eff, lambda, s);

        let signal = rx[s].dotc(&g).norm_sqr();
        let ipn = rx[s].dotc(&(&c * &rx[s])).re;
        let relative_slack = (signal - gamma * ipn) / (gamma * ipn);

        let (min_eig_a, negative_eigs_a) = eig_summary(&a_mat);
        let (min_eig_b, negative_eigs_b) = eig_summary(&b_mat);
        let mmse_equality = hpd_solve(c, &g)
            .map(|z| (g.dotc(&z).re / gamma - 1.0).abs())
            .unwrap_or(f64::NAN);
        streams.push(StreamKkt {
            stationarity_rx,
            stationarity_tx,
            relative_slack,
            min_eig_a,
            min_eig_b,
            negative_eigs_a,
            negative_eigs_b,
            mmse_equality,
        });
    }
    let fold_max = |f: &dyn Fn(usize, &StreamKkt) -> f64| streams.iter().enumerate().map(|(s, r)| f(s, r)).fold(0.0, f64::max);
    let power: f64 = tx.iter().map(norm_sqr).sum();
    let dual: f64 = (0..n).map(|s| lambda[s] * p.noise_of(s) * norm_sqr(&rx[s])).sum();
    Ok(KktReport {
        stationarity_rx: fold_max(&|_, r| r.stationarity_rx),
        stationarity_tx: fold_max(&|_, r| r.stationarity_tx),
        complementarity: fold_max(&|s, r| {
            if lambda_max > 0.0 {
                lambda[s] / lambda_max * r.relative_slack.abs()
            } else {
                0.0
            }
        }),
        primal_violation: fold_max(&|_, r| (-r.relative_slack).max(0.0)),
        dual_feasibility: lambda.iter().copied().fold(f64::INFINITY, f64::min),
        duality_gap: (power - dual).abs() / power.max(f64::MIN_POSITIVE),
        max_activity: fold_max(&|_, r| r.relative_slack.abs()),
        streams,
    })
}

/// `|sum p - sum sigma^2 q| / sum p` for per-stream downlink and uplink powers.
pub fn duality_certificate(p: &Problem, down: &[f64], up: &[f64]) -> f64 {
    let pd: f64 = down.iter().sum();
    let pu: f64 = up.iter().enumerate().map(|(s, q)| p.noise_of(s) * q).sum();
    (pd - pu).abs() / pd.max(f64::MIN_POSITIVE)
}

/// Closed-form optimum for one user with one stream: power
/// `gamma sigma^2 / sigma_max(H)^2` along the top right singular vector.
pub fn analytic_k1(p: &Problem) -> Option<(f64, CVector)> {
    if p.num_streams() != 1 {
        return None;
    }
    let (sv, vecs) = right_singular(p.channel(0));
    let smax = sv[0];
    Some((p.gamma_of(0) * p.noise_of(0) / (smax * smax), vecs.into_iter().next()?))
}
