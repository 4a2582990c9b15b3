//! System model: dimensions, channels, QoS targets, random channel draws and
//! the scenario file format.
//!
//! A scenario file is JSON with the fixed top-level fields
//! `K, M, N, d, gamma, sigma2, rate, H`. Complex numbers are `[re, im]` pairs
//! and `H[k]` is the `N[k] x M` channel of user `k` stored as an array of rows.
//! `rate` is empty for single-stream scenarios; when it is populated the
//! scenario is solved per stream with targets `exp(rate[k] / d[k]) - 1`.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c64, CMatrix};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("shape mismatch for user {user}: {detail}")]
    ShapeMismatch { user: usize, detail: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Dimensions of the downlink: `K` users, `M` transmit antennas, `N_k`
/// receive antennas and `d_k` streams per user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_tx: usize,
    pub rx_antennas: Vec<usize>,
    pub streams: Vec<usize>,
}

impl SystemConfig {
    /// Every user gets `n` receive antennas and `d` streams.
    pub fn uniform(num_users: usize, num_tx: usize, n: usize, d: usize) -> Self {
        Self {
            num_users,
            num_tx,
            rx_antennas: vec![n; num_users],
            streams: vec![d; num_users],
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.num_users == 0 {
            return Err(ScenarioError::Invalid("K must be at least 1".into()));
        }
        if self.num_tx == 0 {
            return Err(ScenarioError::Invalid("M must be at least 1".into()));
        }
        if self.rx_antennas.len() != self.num_users || self.streams.len() != self.num_users {
            return Err(ScenarioError::Invalid(format!(
                "N and d must have K = {} entries (got {} and {})",
                self.num_users,
                self.rx_antennas.len(),
                self.streams.len()
            )));
        }
        for (k, (&n, &d)) in self.rx_antennas.iter().zip(&self.streams).enumerate() {
            if n == 0 {
                return Err(ScenarioError::ShapeMismatch {
                    user: k,
                    detail: "N_k must be at least 1".into(),
                });
            }
            if d == 0 || d > n.min(self.num_tx) {
                return Err(ScenarioError::ShapeMismatch {
                    user: k,
                    detail: format!("d_k = {d} must lie in 1..=min(M, N_k) = {}", n.min(self.num_tx)),
                });
            }
        }
        Ok(())
    }

    pub fn total_streams(&self) -> usize {
        self.streams.iter().sum()
    }
}

/// Per-user channel matrices `H_k` of shape `N_k x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel(pub Vec<CMatrix>);

impl Channel {
    pub fn matrices(&self) -> &[CMatrix] {
        &self.0
    }

    pub fn user(&self, k: usize) -> &CMatrix {
        &self.0[k]
    }

    pub fn num_users(&self) -> usize {
        self.0.len()
    }
}

/// SINR targets, noise powers and (multi-stream only) rate targets in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct QosTargets {
    pub gamma: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub rate: Vec<f64>,
}

impl QosTargets {
    pub fn uniform(num_users: usize, gamma: f64, sigma2: f64) -> Self {
        Self {
            gamma: vec![gamma; num_users],
            sigma2: vec![sigma2; num_users],
            rate: Vec::new(),
        }
    }

    pub fn is_multistream(&self) -> bool {
        !self.rate.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub channel: Channel,
    pub targets: QosTargets,
}

impl Scenario {
    pub fn new(config: SystemConfig, channel: Channel, targets: QosTargets) -> Result<Self, ScenarioError> {
        let scn = Self {
            config,
            channel,
            targets,
        };
        scn.validate()?;
        Ok(scn)
    }

    /// Single-stream scenario with a freshly drawn channel.
    pub fn generate(config: SystemConfig, targets: QosTargets, seed: u64) -> Result<Self, ScenarioError> {
        config.validate()?;
        let channel = generate_channel(&config, seed);
        Self::new(config, channel, targets)
    }

    pub fn num_users(&self) -> usize {
        self.config.num_users
    }

    pub fn num_tx(&self) -> usize {
        self.config.num_tx
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let cfg = &self.config;
        cfg.validate()?;
        let k_users = cfg.num_users;
        if self.channel.num_users() != k_users {
            return Err(ScenarioError::Invalid(format!(
                "H has {} matrices but K = {k_users}",
                self.channel.num_users()
            )));
        }
        for (k, h) in self.channel.matrices().iter().enumerate() {
            if h.nrows() != cfg.rx_antennas[k] || h.ncols() != cfg.num_tx {
                return Err(ScenarioError::ShapeMismatch {
                    user: k,
                    detail: format!(
                        "H[{k}] is {}x{} but N_k x M = {}x{}",
                        h.nrows(),
                        h.ncols(),
                        cfg.rx_antennas[k],
                        cfg.num_tx
                    ),
                });
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(ScenarioError::ShapeMismatch {
                    user: k,
                    detail: "channel has non-finite entries".into(),
                });
            }
            if h.iter().all(|z| z.norm() == 0.0) {
                return Err(ScenarioError::ShapeMismatch {
                    user: k,
                    detail: "channel matrix is identically zero".into(),
                });
            }
        }
        let t = &self.targets;
        check_positive("gamma", &t.gamma, k_users)?;
        check_positive("sigma2", &t.sigma2, k_users)?;
        if t.is_multistream() {
            check_positive("rate", &t.rate, k_users)?;
        } else if cfg.streams.iter().any(|&d| d > 1) {
            return Err(ScenarioError::Invalid(
                "multi-stream scenarios (some d_k > 1) need a rate target per user".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_scenario()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn check_positive(name: &str, values: &[f64], k_users: usize) -> Result<(), ScenarioError> {
    if values.len() != k_users {
        return Err(ScenarioError::Invalid(format!(
            "{name} has {} entries but K = {k_users}",
            values.len()
        )));
    }
    if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(ScenarioError::Invalid(format!(
            "{name}[{k}] = {v} must be positive and finite"
        )));
    }
    Ok(())
}

/// Draws i.i.d. CN(0, 1) channel entries (real and imaginary parts each
/// N(0, 1/2)) from a ChaCha20 stream seeded with `seed`.
///
/// Draw order: users ascending, each matrix row-major, real part before
/// imaginary part. The same seed always yields bit-identical matrices.
pub fn generate_channel(config: &SystemConfig, seed: u64) -> Channel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mats = config
        .rx_antennas
        .iter()
        .map(|&n| {
            let mut h = CMatrix::zeros(n, config.num_tx);
            for i in 0..n {
                for j in 0..config.num_tx {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    h[(i, j)] = c64(re * scale, im * scale);
                }
            }
            h
        })
        .collect();
    Channel(mats)
}

pub(crate) type ComplexPair = [f64; 2];

pub(crate) fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: Vec<usize>,
    #[serde(default)]
    d: Vec<usize>,
    gamma: Vec<f64>,
    sigma2: Vec<f64>,
    #[serde(default)]
    rate: Vec<f64>,
    #[serde(rename = "H")]
    h: Vec<Vec<Vec<ComplexPair>>>,
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        Self {
            k: s.config.num_users,
            m: s.config.num_tx,
            n: s.config.rx_antennas.clone(),
            d: s.config.streams.clone(),
            gamma: s.targets.gamma.clone(),
            sigma2: s.targets.sigma2.clone(),
            rate: s.targets.rate.clone(),
            h: s.channel.matrices().iter().map(matrix_to_rows).collect(),
        }
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let d = if self.d.is_empty() { vec![1; self.k] } else { self.d };
        let config = SystemConfig {
            num_users: self.k,
            num_tx: self.m,
            rx_antennas: self.n,
            streams: d,
        };
        config.validate()?;
        if self.h.len() != self.k {
            return Err(ScenarioError::Invalid(format!(
                "H has {} matrices but K = {}",
                self.h.len(),
                self.k
            )));
        }
        let mut mats = Vec::with_capacity(self.k);
        for (k, rows) in self.h.into_iter().enumerate() {
            let n_k = config.rx_antennas[k];
            if rows.len() != n_k {
                return Err(ScenarioError::ShapeMismatch {
                    user: k,
                    detail: format!("H[{k}] has {} rows but N[{k}] = {n_k}", rows.len()),
                });
            }
            let mut h = CMatrix::zeros(n_k, config.num_tx);
            for (i, row) in rows.into_iter().enumerate() {
                if row.len() != config.num_tx {
                    return Err(ScenarioError::ShapeMismatch {
                        user: k,
                        detail: format!("H[{k}] row {i} has {} entries but M = {}", row.len(), config.num_tx),
                    });
                }
                for (j, [re, im]) in row.into_iter().enumerate() {
                    h[(i, j)] = c64(re, im);
                }
            }
            mats.push(h);
        }
        Scenario::new(
            config,
            Channel(mats),
            QosTargets {
                gamma: self.gamma,
                sigma2: self.sigma2,
                rate: self.rate,
            },
        )
    }
}
