//! Several streams per user with successive interference cancellation.
//!
//! Stream `(k, m)` is decoded after streams `(k, i)`, `i < m`, have been
//! cancelled, so it sees all other users plus its own later streams. Under
//! MMSE-SIC receivers the per-stream rates add up to the user's log-det
//! rate, and a rate target split equally over `d_k` streams becomes the
//! per-stream SINR target `exp(r_k / d_k) - 1`. Both solvers run unchanged
//! on the resulting stream problem.

use thiserror::Error;

use crate::beamforming::{
    canonical_phase, downlink_sinr, interference_covariance, mmse_receivers, BeamformingError, RxBeamformers,
};
use crate::kkt::{kkt_residual, KktReport};
use crate::layout::StreamLayout;
use crate::linalg::{add_outer, cholesky, hermitian_eigen, hpd_logdet, identity, norm_sqr, CMatrix, CVector};
use crate::problem::Problem;
use crate::scenario::{Scenario, ScenarioError};
use crate::solver::{self, Algorithm, SolveFailure, SolveOptions, SolveResult};

/// Equal split of each user's rate (nats) over its streams: `exp(r_k / d_k) - 1`.
pub fn stream_targets(rate: &[f64], layout: &StreamLayout) -> Vec<f64> {
    layout
        .streams()
        .iter()
        .map(|id| (rate[id.user] / layout.streams_of(id.user) as f64).exp_m1())
        .collect()
}

/// SINR of stream `s` against its SIC interferer set.
pub fn sic_sinr(p: &Problem, tx: &[CVector], rx: &[CVector], s: usize) -> Result<f64, BeamformingError> {
    Ok(downlink_sinr(p, tx, rx)?[s])
}

/// Per-stream MMSE receivers against the SIC interferer sets.
pub fn mmse_sic_receivers(p: &Problem, tx: &[CVector]) -> Result<RxBeamformers, BeamformingError> {
    mmse_receivers(p, tx)
}

/// `Psi_{k,m} = C_{(k,m)} + H v_{k,m} v_{k,m}^H H^H`; `Psi_{k, d_k + 1}` is
/// the covariance of the last stream.
fn psi(p: &Problem, tx: &[CVector], s: usize) -> CMatrix {
    let mut c = interference_covariance(p, tx, s);
    add_outer(&mut c, &(p.channel_of(s) * &tx[s]), 1.0);
    c
}

/// `Omega_k = sigma_k^2 I + sum_{j != k} H_k V_j V_j^H H_k^H`
fn omega(p: &Problem, tx: &[CVector], k: usize) -> CMatrix {
    let h = p.channel(k);
    let mut c = identity(h.nrows()).scale(p.sigma2()[k]);
    for (t, v) in tx.iter().enumerate() {
        if p.layout().user_of(t) != k {
            add_outer(&mut c, &(h * v), 1.0);
        }
    }
    c
}

/// `log det(I + H_k V_k V_k^H H_k^H Omega_k^{-1})` in nats.
pub fn user_rate(p: &Problem, tx: &[CVector], k: usize) -> Option<f64> {
    let om = omega(p, tx, k);
    let mut full = om.clone();
    for s in p.layout().user_streams(k) {
        add_outer(&mut full, &(p.channel(k) * &tx[s]), 1.0);
    }
    Some(hpd_logdet(full)? - hpd_logdet(om)?)
}

/// `sum_m log(1 + SINR_{k,m})` under MMSE-SIC receivers.
pub fn sic_rate_sum(p: &Problem, tx: &[CVector], k: usize) -> Result<f64, BeamformingError> {
    let range = p.layout().user_streams(k);
    let mut total = 0.0;
    for s in range {
        if norm_sqr(&(p.channel_of(s) * &tx[s])) == 0.0 {
            continue;
        }
        let (_, u) = crate::beamforming::mmse_receiver(p, tx, s)?;
        let num = u.dotc(&(p.channel_of(s) * &tx[s])).norm_sqr();
        let den = u.dotc(&(interference_covariance(p, tx, s) * &u)).re;
        total += (num / den).ln_1p();
    }
    Ok(total)
}

/// Builds the stream problem of a rate-targeted scenario and solves it.
pub fn solve_multistream(scn: &Scenario, algo: Algorithm, opts: &SolveOptions) -> Result<SolveResult, MultistreamError> {
    let p = Problem::multistream(scn)?;
    Ok(solver::solve(&p, algo, opts)?)
}

#[derive(Debug, Error)]
pub enum MultistreamError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solve(#[from] SolveFailure),
}

/// Receiver scaled as `Psi_{k,m+1}^{-1} H v / sqrt(1 + g)` with `g` the
/// achieved `v^H H^H Psi_{k,m+1}^{-1} H v` (the stream's SINR under MMSE).
fn canonical_receiver(p: &Problem, tx: &[CVector], s: usize) -> Option<(CVector, f64)> {
    let hv = p.channel_of(s) * &tx[s];
    let z = cholesky(interference_covariance(p, tx, s))?.solve(&hv);
    let g = hv.dotc(&z).re;
    Some((z.unscale((1.0 + g).sqrt()), g))
}

/// Multipliers rescaled to pair with the canonical receivers, so that
/// `lambda a a^H` is unchanged.
pub fn canonical_multipliers(p: &Problem, tx: &[CVector], rx: &[CVector], lambda: &[f64]) -> Option<Vec<f64>> {
    (0..p.num_streams())
        .map(|s| {
            let (uc, _) = canonical_receiver(p, tx, s)?;
            Some(lambda[s] * norm_sqr(&rx[s]) / norm_sqr(&uc))
        })
        .collect()
}

/// Relative residuals of the two rank-one identities behind the multiplier
/// collapse, for stream `s` at the canonical receiver:
/// `H^H u u^H H = H^H (Psi_{m+1}^{-1} - Psi_m^{-1}) H` and
/// `H^H u u^H H v = g H^H Psi_m^{-1} H v`.
pub fn key_identities(p: &Problem, tx: &[CVector], s: usize) -> Option<(f64, f64)> {
    let h = p.channel_of(s);
    let (uc, g) = canonical_receiver(p, tx, s)?;
    let next = cholesky(interference_covariance(p, tx, s))?;
    let this = cholesky(psi(p, tx, s))?;
    let a = h.adjoint() * &uc;
    let lhs = &a * a.adjoint();
    let rhs = h.adjoint() * (next.solve(h) - this.solve(h));
    let key2 = (&lhs - rhs).norm() / lhs.norm();
    let lhs3 = &lhs * &tx[s];
    let rhs3 = (h.adjoint() * this.solve(&(h * &tx[s]))).scale(g);
    let key3 = (&lhs3 - rhs3).norm() / lhs3.norm();
    Some((key2, key3))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserCollapse {
    /// `min_{m >= 2} |u_{k,m}^H H_k v_{k,1}|` with unit-norm receivers; infinite when `d_k = 1`.
    pub min_coupling: f64,
    pub condition_holds: bool,
    /// `max_m |lambda_{k,m} - lambda_{k,1}| / lambda_{k,1}` at canonical scaling.
    pub lambda_spread: f64,
    /// Relative residual of the collapsed first-order condition with `lambda_k = lambda_{k,1}`.
    pub stationarity: f64,
    /// `|R_k - r_k|`, when a rate target is given.
    pub rate_error: Option<f64>,
}

/// Threshold on the coupling `|u_{k,m}^H H_k v_{k,1}|` for the multiplier collapse.
pub const COUPLING_EPS: f64 = 1e-6;

/// Checks whether a stream-level KKT point is also first-order optimal for
/// the user-rate formulation: multipliers must agree within each user, and
/// the collapsed condition
/// `(I - lambda_k H_k^H Psi_{k,1}^{-1} H_k + sum_{j != k} lambda_j sum_i Y_{j,i}) V_k = 0`
/// must hold with `Y_{j,i} = H_j^H u_{j,i} u_{j,i}^H H_j` at canonical scaling.
pub fn collapse_check(
    p: &Problem,
    tx: &[CVector],
    rx: &[CVector],
    lambda: &[f64],
    rate: Option<&[f64]>,
) -> Option<Vec<UserCollapse>> {
    let lam = canonical_multipliers(p, tx, rx, lambda)?;
    let canon: Vec<CVector> = (0..p.num_streams())
        .map(|s| canonical_receiver(p, tx, s).map(|(u, _)| u))
        .collect::<Option<_>>()?;
    let layout = p.layout();
    let mut out = Vec::with_capacity(p.num_users());
    for k in 0..p.num_users() {
        let range = layout.user_streams(k);
        let first = range.start;
        let h = p.channel(k);
        let hv1 = h * &tx[first];
        let min_coupling = range
            .clone()
            .skip(1)
            .map(|s| rx[s].dotc(&hv1).norm() / rx[s].norm())
            .fold(f64::INFINITY, f64::min);
        let lambda_spread = range
            .clone()
            .map(|s| (lam[s] - lam[first]).abs() / lam[first])
            .fold(0.0, f64::max);

        let grad = h.adjoint() * cholesky(psi(p, tx, first))?.solve(h);
        let mut op = identity(p.num_tx()) - grad.scale(lam[first]);
        for (t, u) in canon.iter().enumerate() {
            let j = layout.user_of(t);
            if j != k {
                let lead = layout.user_streams(j).start;
                add_outer(&mut op, &(p.channel(j).adjoint() * u), lam[lead]);
            }
        }
        let scale = 1.0f64.max(grad.norm() * lam[first]);
        let (mut num, mut den) = (0.0, 0.0);
        for s in range.clone() {
            num += norm_sqr(&(&op * &tx[s]));
            den += norm_sqr(&tx[s]);
        }
        let stationarity = (num / den).sqrt() / scale;
        let rate_error = match (rate, user_rate(p, tx, k)) {
            (Some(r), Some(got)) => Some((got - r[k]).abs()),
            _ => None,
        };
        out.push(UserCollapse {
            min_coupling,
            condition_holds: min_coupling > COUPLING_EPS,
            lambda_spread,
            stationarity,
            rate_error,
        });
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CounterexampleError {
    #[error("the channel needs exactly two columns, got {0}")]
    Shape(usize),
    #[error("H^H H needs two distinct positive eigenvalues, got {0} and {1}")]
    Eigenvalues(f64, f64),
    #[error("target must be positive")]
    Target,
}

/// A two-stream single-user point that satisfies the stream-level KKT
/// system with unequal multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub problem: Problem,
    pub v: [CVector; 2],
    pub u: [CVector; 2],
    pub lambda: [f64; 2],
    /// Eigenvalues of `H^H H` carried by `v_1` and `v_2`.
    pub mu: [f64; 2],
    pub kkt: KktReport,
    /// Collapsed single-multiplier residual `||(I - lambda_1 H^H Psi_1^{-1} H) V|| / ||V||`.
    pub collapsed_residual: f64,
}

/// Streams along orthogonal eigenvectors of `H^H H` (`v_1` on the smaller
/// eigenvalue), noise power one, both stream targets `gamma`.
pub fn build_counterexample(h: &CMatrix, gamma: f64) -> Result<Counterexample, CounterexampleError> {
    if h.ncols() != 2 {
        return Err(CounterexampleError::Shape(h.ncols()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CounterexampleError::Target);
    }
    let (mu, vecs) = hermitian_eigen(&(h.adjoint() * h));
    let (mu1, mu2) = (mu[0], mu[1]);
    if mu1.is_nan() || mu1 <= 0.0 || (mu2 - mu1) <= 1e-12 * mu2 {
        return Err(CounterexampleError::Eigenvalues(mu1, mu2));
    }
    let v1 = canonical_phase(&vecs[0]).scale((gamma / mu1).sqrt());
    let v2 = canonical_phase(&vecs[1]).scale((gamma / mu2).sqrt());
    let hv2 = h * &v2;
    let mut c1 = identity(h.nrows());
    add_outer(&mut c1, &hv2, 1.0);
    let beta = 1.0 / (1.0 + gamma).sqrt();
    let u1 = cholesky(c1).expect("I + x x^H is positive definite").solve(&(h * &v1)).scale(beta);
    let u2 = hv2.scale(beta);
    let lambda = [(1.0 + gamma) / mu1, (1.0 + gamma) / mu2];
    let problem = Problem::from_parts(vec![h.clone()], vec![1.0], vec![gamma; 2], StreamLayout::new(&[2]))
        .expect("valid two-stream problem");
    let tx = vec![v1.clone(), v2.clone()];
    let rx = vec![u1.clone(), u2.clone()];
    let kkt = kkt_residual(&problem, &tx, &rx, &lambda).expect("shapes match");
    let grad = h.adjoint() * cholesky(psi(&problem, &tx, 0)).expect("positive definite").solve(h);
    let op = identity(2) - grad.scale(lambda[0]);
    let collapsed_residual = ((norm_sqr(&(&op * &v1)) + norm_sqr(&(&op * &v2))) / (norm_sqr(&v1) + norm_sqr(&v2))).sqrt();
    Ok(Counterexample {
        problem,
        v: [v1, v2],
        u: [u1, u2],
        lambda,
        mu: [mu1, mu2],
        kkt,
        collapsed_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::scenario::{generate_channel, SystemConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(a: f64, b: f64) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(vec![c64(a, 0.0), c64(b, 0.0)]))
    }

    #[test]
    fn targets() {
        let l1 = StreamLayout::single(1);
        assert!((stream_targets(&[2f64.ln()], &l1)[0] - 1.0).abs() < 1e-15);
        let l2 = StreamLayout::new(&[2]);
        let g = stream_targets(&[2.0], &l2);
        assert_eq!(g[0], g[1]);
        assert!((g[0] - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for r in [1.0, 0.1, 1e-3, 1e-6, 1e-9] {
            let g = stream_targets(&[r], &l1)[0];
            assert!(g > 0.0 && g < prev);
            prev = g;
        }
        assert!(prev < 1e-8);
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn two_by_two(seed: u64) -> Problem {
        let ch = generate_channel(&SystemConfig::uniform(2, 4, 2, 2), seed);
        Problem::from_parts(ch.0, vec![1.0; 2], vec![1.0; 4], StreamLayout::new(&[2, 2])).unwrap()
    }

    #[test]
    fn sic_sinr_termwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = generate_channel(&SystemConfig::uniform(1, 3, 3, 2), 6);
        let p = Problem::from_parts(ch.0, vec![0.7], vec![1.0; 2], StreamLayout::new(&[2])).unwrap();
        let tx: Vec<_> = (0..2).map(|_| random_vec(&mut rng, 3)).collect();
        let rx: Vec<_> = (0..2).map(|_| random_vec(&mut rng, 3)).collect();
        let h = p.channel(0);
        // stream 1 sees stream 2; the last stream sees only noise
        let num0 = rx[0].dotc(&(h * &tx[0])).norm_sqr();
        let den0 = rx[0].dotc(&(h * &tx[1])).norm_sqr() + 0.7 * norm_sqr(&rx[0]);
        let num1 = rx[1].dotc(&(h * &tx[1])).norm_sqr();
        let den1 = 0.7 * norm_sqr(&rx[1]);
        assert!((sic_sinr(&p, &tx, &rx, 0).unwrap() - num0 / den0).abs() < 1e-12 * (num0 / den0));
        assert!((sic_sinr(&p, &tx, &rx, 1).unwrap() - num1 / den1).abs() < 1e-12 * (num1 / den1));
    }

    #[test]
    fn rate_simple_cases() {
        let p = Problem::from_parts(
            vec![CMatrix::from_element(1, 1, c64(2.0, 0.0))],
            vec![0.5],
            vec![1.0],
            StreamLayout::single(1),
        )
        .unwrap();
        let v = vec![CVector::from_element(1, c64(0.3, 0.4))];
        let want = (4.0 * 0.25 / 0.5f64).ln_1p();
        assert!((user_rate(&p, &v, 0).unwrap() - want).abs() < 1e-14);
        let p = two_by_two(1);
        let zero = vec![CVector::zeros(4); 4];
        assert_eq!(user_rate(&p, &zero, 0).unwrap(), 0.0);
        assert_eq!(sic_rate_sum(&p, &zero, 0).unwrap(), 0.0);
    }

    #[test]
    fn rate_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let p = two_by_two(seed);
            let tx: Vec<_> = (0..4).map(|_| random_vec(&mut rng, 4)).collect();
            for k in 0..2 {
                let a = user_rate(&p, &tx, k).unwrap();
                let b = sic_rate_sum(&p, &tx, k).unwrap();
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn orthogonal_streams_get_matched_filters() {
        let p = Problem::from_parts(vec![diag(1.0, 2.0)], vec![1.0], vec![1.0; 2], StreamLayout::new(&[2])).unwrap();
        let e0 = CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        let e1 = CVector::from_vec(vec![c64(0.0, 0.0), c64(0.5, 0.0)]);
        let tx = vec![e0, e1];
        let u = mmse_sic_receivers(&p, &tx).unwrap();
        for s in 0..2 {
            let hv = p.channel(0) * &tx[s];
            let c = u[s].dotc(&hv).norm() / (u[s].norm() * hv.norm());
            assert!((c - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn counterexample_values() {
        let ce = build_counterexample(&diag(1.0, 2.0), 1.0).unwrap();
        assert!((ce.lambda[0] - 2.0).abs() < 1e-12 && (ce.lambda[1] - 0.5).abs() < 1e-12);
        assert!((&ce.v[0] - CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)])).norm() < 1e-12);
        assert!((&ce.v[1] - CVector::from_vec(vec![c64(0.0, 0.0), c64(0.5, 0.0)])).norm() < 1e-12);
        assert!(ce.kkt.max_residual() < 1e-10, "{:?}", ce.kkt);
        assert!(ce.collapsed_residual > 1e-3);

        let ce = build_counterexample(&diag(1.0, 2.0), 3.0).unwrap();
        assert!((ce.lambda[0] - 4.0).abs() < 1e-12 && (ce.lambda[1] - 1.0).abs() < 1e-12);
        assert!(ce.kkt.max_residual() < 1e-10);

        assert!(matches!(
            build_counterexample(&diag(1.0, 1.0), 1.0),
            Err(CounterexampleError::Eigenvalues(..))
        ));
    }
}
