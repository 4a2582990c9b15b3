use crate::layout::StreamLayout;
use crate::linalg::CMatrix;
use crate::scenario::{Scenario, ScenarioError};

/// A scenario flattened to per-stream SINR targets over a stream layout.
///
/// Single-stream problems use `gamma` directly; multi-stream problems derive
/// every stream target of user `k` as `exp(rate_k / d_k) - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    channel: Vec<CMatrix>,
    sigma2: Vec<f64>,
    gamma: Vec<f64>,
    layout: StreamLayout,
    num_tx: usize,
}

impl Problem {
    /// Picks the multi-stream formulation when the scenario carries rates.
    pub fn from_scenario(scn: &Scenario) -> Result<Self, ScenarioError> {
        if scn.targets.is_multistream() {
            Self::multistream(scn)
        } else {
            Self::single_stream(scn)
        }
    }

    pub fn single_stream(scn: &Scenario) -> Result<Self, ScenarioError> {
        scn.validate()?;
        if let Some(k) = scn.config.streams.iter().position(|&d| d != 1) {
            return Err(ScenarioError::Invalid(format!(
                "user {k} has d_k = {}; single-stream solve needs d_k = 1",
                scn.config.streams[k]
            )));
        }
        Ok(Self {
            channel: scn.channel.matrices().to_vec(),
            sigma2: scn.targets.sigma2.clone(),
            gamma: scn.targets.gamma.clone(),
            layout: StreamLayout::single(scn.num_users()),
            num_tx: scn.num_tx(),
        })
    }

    pub fn multistream(scn: &Scenario) -> Result<Self, ScenarioError> {
        scn.validate()?;
        if !scn.targets.is_multistream() {
            return Err(ScenarioError::Invalid(
                "multi-stream solve needs a rate target per user".into(),
            ));
        }
        let layout = StreamLayout::new(&scn.config.streams);
        let gamma = crate::multistream::stream_targets(&scn.targets.rate, &layout);
        Ok(Self {
            channel: scn.channel.matrices().to_vec(),
            sigma2: scn.targets.sigma2.clone(),
            gamma,
            layout,
            num_tx: scn.num_tx(),
        })
    }

    /// Builds a problem from raw parts; used by tests and hand-built examples.
    pub fn from_parts(
        channel: Vec<CMatrix>,
        sigma2: Vec<f64>,
        gamma: Vec<f64>,
        layout: StreamLayout,
    ) -> Result<Self, ScenarioError> {
        let num_tx = channel.first().map(|h| h.ncols()).unwrap_or(0);
        if channel.len() != layout.num_users() || sigma2.len() != layout.num_users() {
            return Err(ScenarioError::Invalid("users disagree between channel, noise and layout".into()));
        }
        if gamma.len() != layout.len() {
            return Err(ScenarioError::Invalid("one SINR target per stream is required".into()));
        }
        if let Some(k) = channel.iter().position(|h| h.ncols() != num_tx) {
            return Err(ScenarioError::ShapeMismatch {
                user: k,
                detail: "all channels need the same number of columns".into(),
            });
        }
        if gamma.iter().chain(&sigma2).any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(ScenarioError::Invalid("targets and noise powers must be positive".into()));
        }
        Ok(Self {
            channel,
            sigma2,
            gamma,
            layout,
            num_tx,
        })
    }

    pub fn layout(&self) -> &StreamLayout {
        &self.layout
    }

    pub fn num_streams(&self) -> usize {
        self.layout.len()
    }

    pub fn num_users(&self) -> usize {
        self.layout.num_users()
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn rx_antennas(&self, k: usize) -> usize {
        self.channel[k].nrows()
    }

    pub fn channel(&self, k: usize) -> &CMatrix {
        &self.channel[k]
    }

    /// Channel seen by stream `s`'s user.
    pub fn channel_of(&self, s: usize) -> &CMatrix {
        &self.channel[self.layout.user_of(s)]
    }

    pub fn noise_of(&self, s: usize) -> f64 {
        self.sigma2[self.layout.user_of(s)]
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_of(&self, s: usize) -> f64 {
        self.gamma[s]
    }
}
