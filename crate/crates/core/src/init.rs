//! Starting points for the outer iterations.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::beamforming::TxBeamformers;
use crate::linalg::{c64, left_singular_vectors, normalize, C64, CVector};
use crate::power::downlink_power_solve;
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitMode {
    /// i.i.d. CN(0, 1) entries drawn from ChaCha20 seeded with the solve seed.
    #[default]
    Random,
    /// Interference-nulling directions; requires `M >= total streams`.
    ZeroForcing,
    Given(TxBeamformers),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InitError {
    #[error("zero-forcing needs at least as many transmit antennas ({m}) as streams ({s})")]
    TooFewAntennas { m: usize, s: usize },
    #[error("zero-forcing failed: {0}")]
    ZeroForcing(String),
    #[error("initial beamformers: {0}")]
    Shape(String),
}

pub fn initial_beamformers(p: &Problem, mode: &InitMode, seed: u64) -> Result<TxBeamformers, InitError> {
    match mode {
        InitMode::Random => Ok(random(p, seed)),
        InitMode::ZeroForcing => zero_forcing(p),
        InitMode::Given(v) => {
            if v.len() != p.num_streams() {
                return Err(InitError::Shape(format!("expected {} vectors, got {}", p.num_streams(), v.len())));
            }
            if let Some(s) = v.iter().position(|x| x.len() != p.num_tx()) {
                return Err(InitError::Shape(format!("vector {s} has length {}, expected {}", v[s].len(), p.num_tx())));
            }
            Ok(v.clone())
        }
    }
}

/// Entries in stream order, then antenna order, real part before imaginary.
pub fn random(p: &Problem, seed: u64) -> TxBeamformers {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    TxBeamformers(
        (0..p.num_streams())
            .map(|_| {
                let entries: Vec<C64> = (0..p.num_tx()).map(|_| c64(draw() * scale, draw() * scale)).collect();
                CVector::from_vec(entries)
            })
            .collect(),
    )
}

/// Receivers along each user's strongest left singular vectors; transmit
/// directions from the pseudo-inverse of the stacked effective channels
/// `u_s^H H_k`, so every cross term `u_s^H H_k v_t` (t != s) vanishes; powers
/// from the downlink system, which is then diagonal.
pub fn zero_forcing(p: &Problem) -> Result<TxBeamformers, InitError> {
    let (m, s_total) = (p.num_tx(), p.num_streams());
    if m < s_total {
        return Err(InitError::TooFewAntennas { m, s: s_total });
    }
    let mut rx = Vec::with_capacity(s_total);
    for k in 0..p.num_users() {
        let d = p.layout().streams_of(k);
        rx.extend(left_singular_vectors(p.channel(k)).into_iter().take(d));
    }
    let mut g = DMatrix::<C64>::zeros(s_total, m);
    for (s, u) in rx.iter().enumerate() {
        let row = u.adjoint() * p.channel_of(s);
        g.row_mut(s).copy_from(&row);
    }
    let gram = &g * g.adjoint();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| InitError::ZeroForcing("stacked effective channels are rank deficient".into()))?;
    let w = g.adjoint() * inv;
    let dirs = (0..s_total)
        .map(|s| normalize(&w.column(s).into_owned()).ok_or_else(|| InitError::ZeroForcing(format!("stream {s} has no direction"))))
        .collect::<Result<Vec<_>, _>>()?;
    let powers = downlink_power_solve(p, &rx, &dirs).map_err(|e| InitError::ZeroForcing(e.to_string()))?;
    Ok(TxBeamformers::from_split(&dirs, &powers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{cross_gain, downlink_sinr, mmse_receivers};
    use crate::layout::StreamLayout;
    use crate::scenario::{generate_channel, SystemConfig};

    fn problem(k: usize, m: usize, n: usize, d: usize, seed: u64) -> Problem {
        let ch = generate_channel(&SystemConfig::uniform(k, m, n, d), seed);
        let layout = StreamLayout::new(&vec![d; k]);
        Problem::from_parts(ch.0, vec![1.0; k], vec![10.0; k * d], layout).unwrap()
    }

    #[test]
    fn random_is_deterministic() {
        let p = problem(3, 4, 3, 1, 1);
        assert_eq!(random(&p, 9), random(&p, 9));
        assert_ne!(random(&p, 9), random(&p, 10));
    }

    #[test]
    fn zero_forcing_nulls_cross_terms_and_is_feasible() {
        for (k, d) in [(3, 1), (2, 2)] {
            let p = problem(k, 4, 3, d, 2);
            let v = zero_forcing(&p).unwrap();
            let rx: Vec<_> = (0..p.num_users())
                .flat_map(|k| left_singular_vectors(p.channel(k)).into_iter().take(d))
                .collect();
            for s in 0..p.num_streams() {
                for t in 0..p.num_streams() {
                    if s != t {
                        assert!(cross_gain(&p, &rx, &v, s, t).norm() < 1e-10);
                    }
                }
            }
            let u = mmse_receivers(&p, &v).unwrap();
            for x in downlink_sinr(&p, &v, &u).unwrap() {
                assert!(x >= 10.0 * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn zero_forcing_needs_antennas() {
        let p = problem(3, 2, 2, 1, 0);
        assert_eq!(zero_forcing(&p).unwrap_err(), InitError::TooFewAntennas { m: 2, s: 3 });
    }
}
