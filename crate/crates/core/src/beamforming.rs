//! Shared beamforming primitives: downlink and virtual-uplink SINRs, MMSE
//! receivers on both sides, power accounting and phase normalization.
//!
//! All functions work per stream over a [`Problem`]; with one stream per
//! user they are the textbook single-stream expressions.

use std::ops::{Deref, DerefMut};

use thiserror::Error;

use crate::linalg::{add_outer, hpd_solve, identity, norm_sqr, normalize, C64, CMatrix, CVector};
use crate::problem::Problem;

/// Transmit beamformers `v_s` (length `M`), power embedded: `||v_s||^2 = p_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxBeamformers(pub Vec<CVector>);

/// Receive beamformers `u_s` (length `N_k` of the stream's user).
#[derive(Debug, Clone, PartialEq)]
pub struct RxBeamformers(pub Vec<CVector>);

/// Nonnegative multipliers, one per SINR constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariables(pub Vec<f64>);

macro_rules! vec_newtype {
    ($name:ident, $item:ty) => {
        impl Deref for $name {
            type Target = Vec<$item>;
            fn deref(&self) -> &Self::Target {
                &self.0
            }
        }
        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Self::Target {
                &mut self.0
            }
        }
    };
}

vec_newtype!(TxBeamformers, CVector);
vec_newtype!(RxBeamformers, CVector);
vec_newtype!(DualVariables, f64);

impl TxBeamformers {
    /// Builds `v_s = sqrt(p_s) * dir_s`.
    pub fn from_split(dirs: &[CVector], powers: &[f64]) -> Self {
        Self(dirs.iter().zip(powers).map(|(d, &p)| d.scale(p.sqrt())).collect())
    }

    /// Unit-norm directions and per-stream powers; zero vectors keep a zero direction.
    pub fn split(&self) -> (Vec<CVector>, Vec<f64>) {
        self.0
            .iter()
            .map(|v| (normalize(v).unwrap_or_else(|| v.clone()), norm_sqr(v)))
            .unzip()
    }
}

impl RxBeamformers {
    pub fn from_split(dirs: &[CVector], powers: &[f64]) -> Self {
        Self(dirs.iter().zip(powers).map(|(d, &q)| d.scale(q.sqrt())).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamformingError {
    #[error("receive vector of stream {stream} is zero")]
    ZeroReceiver { stream: usize },
    #[error("transmit direction of stream {stream} is zero")]
    ZeroTransmitter { stream: usize },
    #[error("stream {stream} is degenerate: H_k v is zero, so its SINR cannot be positive")]
    DegenerateDownlink { stream: usize },
    #[error("stream {stream} is degenerate: H_k^H u is zero")]
    DegenerateUplink { stream: usize },
    #[error("stream {stream}: u^H H v is zero, phase is undefined")]
    ZeroGain { stream: usize },
    #[error("stream {stream}: H^H u is invisible to the dual (zero quadratic form)")]
    InvisibleToDual { stream: usize },
    #[error("stream {stream}: covariance is not positive definite")]
    NotPositiveDefinite { stream: usize },
    #[error("expected {expected} beamformers, got {got}")]
    Count { expected: usize, got: usize },
}

impl BeamformingError {
    pub fn stream(&self) -> Option<usize> {
        match *self {
            Self::ZeroReceiver { stream }
            | Self::ZeroTransmitter { stream }
            | Self::DegenerateDownlink { stream }
            | Self::DegenerateUplink { stream }
            | Self::ZeroGain { stream }
            | Self::InvisibleToDual { stream }
            | Self::NotPositiveDefinite { stream } => Some(stream),
            Self::Count { .. } => None,
        }
    }
}

pub(crate) fn check_count(p: &Problem, got: usize) -> Result<(), BeamformingError> {
    if got != p.num_streams() {
        return Err(BeamformingError::Count {
            expected: p.num_streams(),
            got,
        });
    }
    Ok(())
}

/// `H_k^H u_s` for every stream: the effective uplink channel of each receiver.
pub fn effective_uplink(p: &Problem, rx: &[CVector]) -> Vec<CVector> {
    rx.iter()
        .enumerate()
        .map(|(s, u)| p.channel_of(s).adjoint() * u)
        .collect()
}

/// `u_s^H H_k v_t`
pub fn cross_gain(p: &Problem, rx: &[CVector], tx: &[CVector], s: usize, t: usize) -> C64 {
    rx[s].dotc(&(p.channel_of(s) * &tx[t]))
}

/// Downlink SINR of every stream for the given transmit and receive vectors.
///
/// Invariant to any nonzero complex scaling of each `u_s`.
pub fn downlink_sinr(p: &Problem, tx: &[CVector], rx: &[CVector]) -> Result<Vec<f64>, BeamformingError> {
    check_count(p, tx.len())?;
    check_count(p, rx.len())?;
    let eff = effective_uplink(p, rx);
    (0..p.num_streams())
        .map(|s| {
            let u2 = norm_sqr(&rx[s]);
            if u2 == 0.0 {
                return Err(BeamformingError::ZeroReceiver { stream: s });
            }
            let signal = eff[s].dotc(&tx[s]).norm_sqr();
            let interference: f64 = p
                .layout()
                .interferers(s)
                .map(|t| eff[s].dotc(&tx[t]).norm_sqr())
                .sum();
            Ok(signal / (interference + p.noise_of(s) * u2))
        })
        .collect()
}

/// Virtual-uplink SINR with uplink powers `q` on unit-norm directions.
///
/// Stream `s`'s uplink receiver is `tx_dirs[s]`; it is interfered by every
/// stream whose downlink receiver sees `s`, with unit noise.
pub fn uplink_sinr(
    p: &Problem,
    q: &[f64],
    rx_dirs: &[CVector],
    tx_dirs: &[CVector],
) -> Result<Vec<f64>, BeamformingError> {
    check_count(p, q.len())?;
    check_count(p, rx_dirs.len())?;
    check_count(p, tx_dirs.len())?;
    if let Some(s) = rx_dirs.iter().position(|u| norm_sqr(u) == 0.0) {
        return Err(BeamformingError::ZeroReceiver { stream: s });
    }
    if let Some(s) = tx_dirs.iter().position(|v| norm_sqr(v) == 0.0) {
        return Err(BeamformingError::ZeroTransmitter { stream: s });
    }
    let eff = effective_uplink(p, rx_dirs);
    Ok((0..p.num_streams())
        .map(|s| {
            let signal = q[s] * eff[s].dotc(&tx_dirs[s]).norm_sqr();
            let interference: f64 = p
                .layout()
                .victims(s)
                .map(|t| q[t] * eff[t].dotc(&tx_dirs[s]).norm_sqr())
                .sum();
            signal / (interference + norm_sqr(&tx_dirs[s]))
        })
        .collect())
}

/// Interference-plus-noise covariance `C_s` at stream `s`'s receiver.
pub fn interference_covariance(p: &Problem, tx: &[CVector], s: usize) -> CMatrix {
    let h = p.channel_of(s);
    let mut c = identity(h.nrows()).scale(p.noise_of(s));
    for t in p.layout().interferers(s) {
        add_outer(&mut c, &(h * &tx[t]), 1.0);
    }
    c
}

/// MMSE receiver `C_s^{-1} H_k v_s` for stream `s`, unnormalized and normalized.
pub fn mmse_receiver(p: &Problem, tx: &[CVector], s: usize) -> Result<(CVector, CVector), BeamformingError> {
    check_count(p, tx.len())?;
    let hv = p.channel_of(s) * &tx[s];
    if norm_sqr(&hv) == 0.0 {
        return Err(BeamformingError::DegenerateDownlink { stream: s });
    }
    let c = interference_covariance(p, tx, s);
    let u_hat = hpd_solve(c, &hv).ok_or(BeamformingError::NotPositiveDefinite { stream: s })?;
    let u_bar = normalize(&u_hat).ok_or(BeamformingError::DegenerateDownlink { stream: s })?;
    Ok((u_hat, u_bar))
}

/// Normalized MMSE (MMSE-SIC in multi-stream layouts) receivers for all streams.
pub fn mmse_receivers(p: &Problem, tx: &[CVector]) -> Result<RxBeamformers, BeamformingError> {
    (0..p.num_streams())
        .map(|s| mmse_receiver(p, tx, s).map(|(_, u)| u))
        .collect::<Result<Vec<_>, _>>()
        .map(RxBeamformers)
}

/// Virtual-uplink covariance `D_s = I + sum_t w_t a_t a_t^H` over the
/// streams `t` whose receivers see `s`, with `a_t = H^H u_t`.
pub fn uplink_covariance(p: &Problem, eff: &[CVector], weights: &[f64], s: usize) -> CMatrix {
    let mut d = identity(p.num_tx());
    for t in p.layout().victims(s) {
        add_outer(&mut d, &eff[t], weights[t]);
    }
    d
}

/// Uplink MMSE transmit direction `D_s^{-1} H_k^H u_s`.
///
/// `weights` are the multipliers in the dual algorithm, or all ones with the
/// uplink powers folded into `rx` in the duality-based algorithm.
pub fn uplink_mmse_direction(
    p: &Problem,
    rx: &[CVector],
    weights: &[f64],
    s: usize,
) -> Result<(CVector, CVector), BeamformingError> {
    check_count(p, rx.len())?;
    check_count(p, weights.len())?;
    let eff = effective_uplink(p, rx);
    uplink_direction_with(p, &eff, weights, s)
}

pub(crate) fn uplink_direction_with(
    p: &Problem,
    eff: &[CVector],
    weights: &[f64],
    s: usize,
) -> Result<(CVector, CVector), BeamformingError> {
    if norm_sqr(&eff[s]) == 0.0 {
        return Err(BeamformingError::DegenerateUplink { stream: s });
    }
    let d = uplink_covariance(p, eff, weights, s);
    let v_hat = hpd_solve(d, &eff[s]).ok_or(BeamformingError::NotPositiveDefinite { stream: s })?;
    let v_bar = normalize(&v_hat).ok_or(BeamformingError::DegenerateUplink { stream: s })?;
    Ok((v_hat, v_bar))
}

/// Unit-norm uplink MMSE directions for all streams.
pub fn uplink_mmse_directions(p: &Problem, rx: &[CVector], weights: &[f64]) -> Result<Vec<CVector>, BeamformingError> {
    check_count(p, rx.len())?;
    check_count(p, weights.len())?;
    let eff = effective_uplink(p, rx);
    (0..p.num_streams())
        .map(|s| uplink_direction_with(p, &eff, weights, s).map(|(_, v)| v))
        .collect()
}

/// Rotates each `v_s` so that `u_s^H H_k v_s` is real and positive.
///
/// Powers and SINRs are unchanged; this pins down the phase freedom of the
/// optimal transmit beamformers.
pub fn phase_normalize(p: &Problem, tx: &[CVector], rx: &[CVector]) -> Result<TxBeamformers, BeamformingError> {
    check_count(p, tx.len())?;
    check_count(p, rx.len())?;
    (0..p.num_streams())
        .map(|s| {
            let g = cross_gain(p, rx, tx, s, s);
            let mag = g.norm();
            if mag == 0.0 || !mag.is_finite() {
                return Err(BeamformingError::ZeroGain { stream: s });
            }
            Ok(&tx[s] * (g.conj() / mag))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(TxBeamformers)
}

/// Rotates `u` so that its largest-magnitude entry is real and positive.
///
/// Combined with [`phase_normalize`] this fixes the joint phase freedom of a
/// `(v_s, u_s)` pair, so results of different runs can be compared entrywise.
pub fn canonical_phase(u: &CVector) -> CVector {
    let pivot = u
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or_default();
    let mag = pivot.norm();
    if mag == 0.0 {
        return u.clone();
    }
    u * (pivot.conj() / mag)
}

/// `sum_s ||v_s||^2`
pub fn total_power(tx: &[CVector]) -> f64 {
    tx.iter().map(norm_sqr).sum()
}

/// Largest relative SINR shortfall `max_s max(0, (gamma_s - SINR_s) / gamma_s)`.
pub fn max_violation(p: &Problem, sinr: &[f64]) -> f64 {
    sinr.iter()
        .zip(p.gamma())
        .map(|(&x, &g)| ((g - x) / g).max(0.0))
        .fold(0.0, f64::max)
}
