//! Solution files: beamformers and multipliers in the scenario file's
//! conventions (`[re, im]` pairs, streams in (user, stream) order).
//!
//! Only `V` is required, so a hand-written file with just transmit vectors
//! doubles as an initialization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamforming::{RxBeamformers, TxBeamformers};
use crate::linalg::{c64, CVector};
use crate::problem::Problem;
use crate::scenario::{ComplexPair, ScenarioError};
use crate::solver::{SolveResult, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub algo: Option<String>,
    pub status: Option<String>,
    pub iterations: Option<usize>,
    pub tx: TxBeamformers,
    pub rx: Option<RxBeamformers>,
    pub lambda: Option<Vec<f64>>,
    pub uplink: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    algo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_power: Option<f64>,
    /// `[user, stream]`, both 1-based.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    streams: Vec<[usize; 2]>,
    #[serde(rename = "V")]
    v: Vec<Vec<ComplexPair>>,
    #[serde(rename = "U", default, skip_serializing_if = "Vec::is_empty")]
    u: Vec<Vec<ComplexPair>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    power: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<f64>>,
}

fn to_pairs(v: &CVector) -> Vec<ComplexPair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[ComplexPair]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&[re, im]| c64(re, im)))
}

pub fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max_iters",
    }
}

impl Solution {
    pub fn from_result(r: &SolveResult) -> Self {
        Self {
            algo: Some(r.algorithm.name().to_string()),
            status: Some(status_name(r.status).to_string()),
            iterations: Some(r.iterations),
            tx: r.tx.clone(),
            rx: Some(r.rx.clone()),
            lambda: Some(r.lambda.0.clone()),
            uplink: r.uplink.clone(),
        }
    }

    /// Transmit vectors only, e.g. a starting point.
    pub fn from_tx(tx: TxBeamformers) -> Self {
        Self {
            algo: None,
            status: None,
            iterations: None,
            tx,
            rx: None,
            lambda: None,
            uplink: None,
        }
    }

    /// Serializes with stream labels taken from `p`'s layout.
    pub fn to_json(&self, p: Option<&Problem>) -> String {
        let streams = p
            .map(|p| p.layout().streams().iter().map(|id| [id.user + 1, id.index + 1]).collect())
            .unwrap_or_default();
        let file = SolutionFile {
            algo: self.algo.clone(),
            status: self.status.clone(),
            iterations: self.iterations,
            total_power: self.rx.as_ref().map(|_| crate::beamforming::total_power(&self.tx)),
            streams,
            v: self.tx.iter().map(to_pairs).collect(),
            u: self.rx.as_ref().map(|u| u.iter().map(to_pairs).collect()).unwrap_or_default(),
            lambda: self.lambda.clone().unwrap_or_default(),
            power: self.rx.as_ref().map(|_| self.tx.iter().map(crate::linalg::norm_sqr).collect()).unwrap_or_default(),
            q: self.uplink.clone(),
        };
        serde_json::to_string_pretty(&file).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let f: SolutionFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(Self {
            algo: f.algo,
            status: f.status,
            iterations: f.iterations,
            tx: TxBeamformers(f.v.iter().map(|v| from_pairs(v)).collect()),
            rx: (!f.u.is_empty()).then(|| RxBeamformers(f.u.iter().map(|u| from_pairs(u)).collect())),
            lambda: (!f.lambda.is_empty()).then_some(f.lambda),
            uplink: f.q,
        })
    }

    /// Checks vector counts and lengths against `p`.
    pub fn check(&self, p: &Problem) -> Result<(), ScenarioError> {
        let n = p.num_streams();
        let bad = |what: &str, got: usize| ScenarioError::Invalid(format!("{what} has {got} entries, expected {n}"));
        if self.tx.len() != n {
            return Err(bad("V", self.tx.len()));
        }
        for (s, v) in self.tx.iter().enumerate() {
            if v.len() != p.num_tx() {
                return Err(ScenarioError::ShapeMismatch {
                    user: p.layout().user_of(s),
                    detail: format!("V[{s}] has length {}, expected M = {}", v.len(), p.num_tx()),
                });
            }
        }
        if let Some(u) = &self.rx {
            if u.len() != n {
                return Err(bad("U", u.len()));
            }
            for (s, x) in u.iter().enumerate() {
                let k = p.layout().user_of(s);
                if x.len() != p.rx_antennas(k) {
                    return Err(ScenarioError::ShapeMismatch {
                        user: k,
                        detail: format!("U[{s}] has length {}, expected N = {}", x.len(), p.rx_antennas(k)),
                    });
                }
            }
        }
        if let Some(l) = &self.lambda {
            if l.len() != n {
                return Err(bad("lambda", l.len()));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>, p: Option<&Problem>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json(p)).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
