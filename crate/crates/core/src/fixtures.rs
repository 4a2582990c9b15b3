//! A fixed two-user instance (K = M = N = 2, gamma = 10, sigma^2 = 1) with a
//! known infeasible starting point. Used by tests, the acceptance suite and
//! the CLI documentation.

use crate::beamforming::TxBeamformers;
use crate::linalg::{c64, CMatrix, CVector};
use crate::scenario::{Channel, QosTargets, Scenario, SystemConfig};

pub fn two_user_channel() -> Channel {
    let h1 = CMatrix::from_row_slice(
        2,
        2,
        &[
            c64(0.2097, 0.0429),
            c64(0.4385, 0.1650),
            c64(-0.9788, 0.1614),
            c64(0.1543, 0.5013),
        ],
    );
    let h2 = CMatrix::from_row_slice(
        2,
        2,
        &[
            c64(-1.0800, -0.3203),
            c64(0.2582, 0.1785),
            c64(0.1714, -0.2729),
            c64(-0.9692, -0.1711),
        ],
    );
    Channel(vec![h1, h2])
}

pub fn two_user_scenario() -> Scenario {
    Scenario::new(
        SystemConfig::uniform(2, 2, 2, 1),
        two_user_channel(),
        QosTargets::uniform(2, 10.0, 1.0),
    )
    .expect("fixture is valid")
}

/// Starting transmit beamformers that violate both SINR targets.
pub fn two_user_infeasible_start() -> TxBeamformers {
    TxBeamformers(vec![
        CVector::from_vec(vec![c64(0.0701, 0.7443), c64(-0.3386, 0.0235)]),
        CVector::from_vec(vec![c64(-1.3709, 2.0320), c64(0.1491, -0.0298)]),
    ])
}

/// Normalized MMSE receivers for [`two_user_infeasible_start`] as published
/// (4 decimals, phase convention unknown).
pub fn two_user_published_receivers() -> Vec<CVector> {
    vec![
        CVector::from_vec(vec![c64(-0.7423, -0.1885), c64(-0.2951, -0.5713)]),
        CVector::from_vec(vec![c64(0.7580, -0.6429), c64(-0.1084, 0.0209)]),
    ]
}

pub const TWO_USER_PUBLISHED_SINR: [f64; 2] = [0.1592, 4.3871];
pub const TWO_USER_PUBLISHED_UPLINK_POWER: [f64; 2] = [-3.5627, -1.1379];
