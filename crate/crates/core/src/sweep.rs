//! Many solves of one problem from different random starts, and the
//! clustering of their converged objectives.

use rayon::prelude::*;

use crate::init::InitMode;
use crate::problem::Problem;
use crate::scenario::{QosTargets, Scenario, ScenarioError, SystemConfig};
use crate::solver::{solve, Algorithm, SolveOptions, SolveStatus};
use crate::trace::Trace;

/// Relative tolerance under which two objectives are the same solution.
pub const CLUSTER_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    Converged,
    MaxIters,
    Failed(String),
}

impl TrialStatus {
    pub fn label(&self) -> &str {
        match self {
            Self::Converged => "converged",
            Self::MaxIters => "max_iters",
            Self::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub seed: u64,
    pub power: Option<f64>,
    pub iterations: usize,
    pub status: TrialStatus,
    pub trace: Trace,
}

/// Runs one random-start solve per seed `seed_base .. seed_base + inits`,
/// in parallel. The result is ordered by seed.
pub fn run_trials(p: &Problem, algo: Algorithm, opts: &SolveOptions, seed_base: u64, inits: usize) -> Vec<Trial> {
    (0..inits as u64)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base + i;
            let opts = SolveOptions {
                init: InitMode::Random,
                seed,
                ..opts.clone()
            };
            match solve(p, algo, &opts) {
                Ok(r) => Trial {
                    seed,
                    power: Some(r.total_power()),
                    iterations: r.iterations,
                    status: match r.status {
                        SolveStatus::Converged => TrialStatus::Converged,
                        SolveStatus::MaxIters => TrialStatus::MaxIters,
                    },
                    trace: r.trace,
                },
                Err(f) => Trial {
                    seed,
                    power: None,
                    iterations: f.iteration,
                    status: TrialStatus::Failed(f.kind.to_string()),
                    trace: f.trace,
                },
            }
        })
        .collect()
}

/// Greedy clustering of positive values: sorted ascending, a value opens a
/// new cluster when it exceeds the current cluster's smallest member by more
/// than `rel_tol` relative. Returns `(representative, size)` pairs.
pub fn cluster(values: &[f64], rel_tol: f64) -> Vec<(f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for x in sorted {
        match out.last_mut() {
            Some((rep, n)) if (x - *rep).abs() <= rel_tol * rep.abs() => *n += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

/// Clusters of the converged trials' objectives.
pub fn converged_clusters(trials: &[Trial], rel_tol: f64) -> Vec<(f64, usize)> {
    let powers: Vec<f64> = trials
        .iter()
        .filter(|t| t.status == TrialStatus::Converged)
        .filter_map(|t| t.power)
        .collect();
    cluster(&powers, rel_tol)
}

/// Sweep summary CSV: `seed,converged_power,iters,status`.
pub fn trials_csv(trials: &[Trial]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "converged_power", "iters", "status"]).expect("in-memory write");
    for t in trials {
        let power = t.power.map(|x| format!("{x:.17e}")).unwrap_or_default();
        w.write_record([t.seed.to_string(), power, t.iterations.to_string(), t.status.label().to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[derive(Debug, Clone, PartialEq)]
pub struct HuntRecord {
    pub channel_seed: u64,
    pub clusters: Vec<(f64, usize)>,
    pub converged: usize,
}

/// Draws one channel per seed and reports how many distinct objectives the
/// random starts reach on each. Channels run one after another; the starts
/// of each channel run in parallel.
pub fn hunt(
    config: &SystemConfig,
    targets: &QosTargets,
    algo: Algorithm,
    opts: &SolveOptions,
    channel_seeds: impl IntoIterator<Item = u64>,
    inits: usize,
) -> Result<Vec<HuntRecord>, ScenarioError> {
    let mut out = Vec::new();
    for channel_seed in channel_seeds {
        let scn = Scenario::generate(config.clone(), targets.clone(), channel_seed)?;
        let p = Problem::from_scenario(&scn)?;
        let trials = run_trials(&p, algo, opts, 0, inits);
        out.push(HuntRecord {
            channel_seed,
            clusters: converged_clusters(&trials, CLUSTER_TOL),
            converged: trials.iter().filter(|t| t.status == TrialStatus::Converged).count(),
        });
    }
    Ok(out)
}
