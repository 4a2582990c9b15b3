//! `qcpm`: scenario generation, solves, multi-start sweeps, verification and
//! the multi-stream counter-example.
//!
//! Exit codes: 0 success, 1 other errors, 2 usage errors, 10 iteration limit,
//! 11 infeasible initialization, 12 unsolvable power system, 13 degenerate
//! user, 14 verification failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qcpm::beamforming::mmse_receivers;
use qcpm::kkt::{kkt_residual, GAP_TOL, KKT_TOL};
use qcpm::linalg::{c64, CMatrix};
use qcpm::mmse_dual::lambda_fixed_point;
use qcpm::multistream::build_counterexample;
use qcpm::solution::{status_name, Solution};
use qcpm::sweep::{converged_clusters, hunt, run_trials, trials_csv, CLUSTER_TOL};
use qcpm::{
    solve, Algorithm, FailureKind, InitMode, Problem, QosTargets, Scenario, SolveOptions, SolveStatus, SystemConfig,
};

mod code {
    pub const MAX_ITERS: u8 = 10;
    pub const INFEASIBLE_INIT: u8 = 11;
    pub const INFEASIBLE_POWER: u8 = 12;
    pub const DEGENERATE: u8 = 13;
    pub const NOT_CERTIFIED: u8 = 14;
}

#[derive(Parser)]
#[command(name = "qcpm", version, about = "QoS-constrained transmit power minimization for multi-user MIMO downlinks")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "QCPM_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Rayleigh channel and write a scenario file.
    Gen(GenArgs),
    /// Run one solve.
    Solve(SolveArgs),
    /// Solve one scenario from many random starts, or hunt for channels with
    /// several local solutions.
    Sweep(SweepArgs),
    /// Check a solution against the optimality conditions.
    Verify(VerifyArgs),
    /// Two-stream point satisfying the per-stream conditions but not the
    /// single-multiplier ones.
    Counterexample(CounterexampleArgs),
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err("must be positive and finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args, Clone)]
struct SystemArgs {
    #[arg(long = "K", value_parser = count)]
    k: Option<usize>,
    #[arg(long = "M", value_parser = count)]
    m: Option<usize>,
    #[arg(long = "N", value_parser = count)]
    n: Option<usize>,
    #[arg(long, value_parser = positive)]
    gamma: Option<f64>,
    #[arg(long, value_parser = positive)]
    sigma2: Option<f64>,
    /// Streams per user.
    #[arg(long, value_parser = count, default_value_t = 1)]
    d: usize,
    /// Per-user rate target in nats; switches to the multi-stream formulation.
    #[arg(long, value_parser = positive)]
    rate: Option<f64>,
}

impl SystemArgs {
    fn build(&self) -> Result<(SystemConfig, QosTargets), clap::Error> {
        let missing = |name: &str| clap::Error::raw(clap::error::ErrorKind::MissingRequiredArgument, format!("--{name} is required\n"));
        let k = self.k.ok_or_else(|| missing("K"))?;
        let m = self.m.ok_or_else(|| missing("M"))?;
        let n = self.n.ok_or_else(|| missing("N"))?;
        let sigma2 = self.sigma2.ok_or_else(|| missing("sigma2"))?;
        let config = SystemConfig::uniform(k, m, n, self.d);
        let targets = match self.rate {
            Some(r) => {
                let gamma = (r / self.d as f64).exp_m1();
                QosTargets {
                    gamma: vec![self.gamma.unwrap_or(gamma); k],
                    sigma2: vec![sigma2; k],
                    rate: vec![r; k],
                }
            }
            None => QosTargets::uniform(k, self.gamma.ok_or_else(|| missing("gamma"))?, sigma2),
        };
        let invalid = |e: qcpm::ScenarioError| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n"));
        config.validate().map_err(invalid)?;
        if self.d > 1 && self.rate.is_none() {
            return Err(clap::Error::raw(
                clap::error::ErrorKind::MissingRequiredArgument,
                "--rate is required when --d > 1\n",
            ));
        }
        Ok((config, targets))
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = "scenario.json")]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    MmseDual,
    Udd,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::MmseDual => Algorithm::MmseDual,
            AlgoArg::Udd => Algorithm::Udd,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum InitArg {
    Random,
    Zf,
    File,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "mmse-dual")]
    algo: AlgoArg,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, value_parser = positive, default_value_t = 1e-8)]
    tol: f64,
    /// Largest first-order residual accepted at a stop.
    #[arg(long, value_parser = positive, default_value_t = 1e-7)]
    stationarity_tol: f64,
    #[arg(long, default_value_t = 20)]
    fp_iters: usize,
    /// MMSE-DUAL iterations before UDD starts (default 0 with `--init file`, else 3).
    #[arg(long)]
    warm_start: Option<usize>,
}

impl SolverArgs {
    fn options(&self, init: InitMode, seed: u64) -> SolveOptions {
        let warm = self.warm_start.unwrap_or(if matches!(init, InitMode::Given(_)) { 0 } else { 3 });
        SolveOptions {
            max_outer_iters: self.max_iter,
            fixed_point_iters: self.fp_iters,
            tolerance: self.tol,
            init,
            seed,
            stationarity_tol: self.stationarity_tol,
            warm_start_iters: warm,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    /// Solution file whose `V` is the starting point (`--init file`).
    #[arg(long, required_if_eq("init", "file"))]
    init_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "trace.csv")]
    trace: PathBuf,
    #[arg(short, long, default_value = "solution.json")]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, required_unless_present = "hunt", conflicts_with = "hunt")]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Random starts per scenario.
    #[arg(long, value_parser = count, default_value_t = 20)]
    inits: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Instead of one scenario, draw this many channels from `--K --M --N
    /// --gamma --sigma2` and report those with more than one solution.
    #[arg(long, value_parser = count)]
    hunt: Option<usize>,
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value_t = 0)]
    channel_seed_base: u64,
    /// Per-start traces merged into one CSV with a leading seed column.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(short, long, default_value = "sweep.csv")]
    output: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(short, long, default_value = "report.json")]
    output: PathBuf,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Diagonal channel `diag(a, b)`.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
    diag: Vec<f64>,
    /// Full channel as JSON rows of `[re, im]` pairs; overrides `--diag`.
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long, value_parser = positive, default_value_t = 1.0)]
    gamma: f64,
}

struct Ctx {
    out_dir: PathBuf,
}

impl Ctx {
    fn out(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn write(&self, p: &Path, text: &str) -> Result<PathBuf> {
        let path = self.out(p);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn load_problem(path: &Path) -> Result<(Scenario, Problem)> {
    let scn = Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
    let p = Problem::from_scenario(&scn)?;
    Ok((scn, p))
}

fn gen(ctx: &Ctx, a: GenArgs) -> Result<ExitCode> {
    let (config, targets) = a.system.build().unwrap_or_else(|e| e.exit());
    let scn = Scenario::generate(config, targets, a.seed)?;
    let path = ctx.write(&a.output, &scn.to_json())?;
    println!("seed {} -> {}", a.seed, path.display());
    Ok(ExitCode::SUCCESS)
}

fn failure_code(kind: &FailureKind) -> u8 {
    match kind {
        FailureKind::InfeasibleInitialization { .. } => code::INFEASIBLE_INIT,
        FailureKind::InfeasiblePowerSystem(_) => code::INFEASIBLE_POWER,
        FailureKind::DegenerateUser(_) => code::DEGENERATE,
        FailureKind::Init(_) => 1,
    }
}

fn solve_cmd(ctx: &Ctx, a: SolveArgs) -> Result<ExitCode> {
    let (_, p) = load_problem(&a.scenario)?;
    let init = match a.init {
        InitArg::Random => InitMode::Random,
        InitArg::Zf => InitMode::ZeroForcing,
        InitArg::File => {
            let path = a.init_file.as_ref().expect("required by clap");
            let sol = Solution::load(path).with_context(|| format!("loading {}", path.display()))?;
            sol.check(&p)?;
            InitMode::Given(sol.tx)
        }
    };
    let algo: Algorithm = a.solver.algo.into();
    match solve(&p, algo, &a.solver.options(init, a.seed)) {
        Ok(r) => {
            ctx.write(&a.trace, &r.trace.to_csv_string())?;
            let path = ctx.write(&a.output, &Solution::from_result(&r).to_json(Some(&p)))?;
            println!(
                "{algo}: {} after {} iterations, total power {:.12e} -> {}",
                status_name(r.status),
                r.iterations,
                r.total_power(),
                path.display()
            );
            Ok(match r.status {
                SolveStatus::Converged => ExitCode::SUCCESS,
                SolveStatus::MaxIters => {
                    eprintln!("error: iteration limit {} reached before convergence", a.solver.max_iter);
                    ExitCode::from(code::MAX_ITERS)
                }
            })
        }
        Err(f) => {
            ctx.write(&a.trace, &f.trace.to_csv_string())?;
            match &f.kind {
                FailureKind::InfeasibleInitialization { q: Some(q), .. } => {
                    let q: Vec<String> = q.iter().enumerate().map(|(s, x)| format!("q{} = {x:.4}", s + 1)).collect();
                    eprintln!("error: infeasible initialization at iteration {}: {}", f.iteration, q.join(", "));
                }
                kind => eprintln!("error: {kind} (iteration {})", f.iteration),
            }
            Ok(ExitCode::from(failure_code(&f.kind)))
        }
    }
}

fn sweep_cmd(ctx: &Ctx, a: SweepArgs) -> Result<ExitCode> {
    let algo: Algorithm = a.solver.algo.into();
    let opts = a.solver.options(InitMode::Random, 0);
    if let Some(channels) = a.hunt {
        let (config, targets) = a.system.build().unwrap_or_else(|e| e.exit());
        let seeds = a.channel_seed_base..a.channel_seed_base + channels as u64;
        let records = hunt(&config, &targets, algo, &opts, seeds, a.inits)?;
        let mut csv = String::from("channel_seed,converged,clusters,objectives\n");
        for r in &records {
            let objs: Vec<String> = r.clusters.iter().map(|(x, n)| format!("{x:.10e}x{n}")).collect();
            csv += &format!("{},{},{},{}\n", r.channel_seed, r.converged, r.clusters.len(), objs.join(" "));
            if r.clusters.len() > 1 {
                println!("channel seed {}: {} distinct objectives {:?}", r.channel_seed, r.clusters.len(), r.clusters);
            }
        }
        let hits = records.iter().filter(|r| r.clusters.len() > 1).count();
        let path = ctx.write(&a.output, &csv)?;
        println!("{hits} of {channels} channels reach more than one objective -> {}", path.display());
        return Ok(ExitCode::SUCCESS);
    }
    let (_, p) = load_problem(a.scenario.as_ref().expect("required by clap"))?;
    let trials = run_trials(&p, algo, &opts, a.seed_base, a.inits);
    let path = ctx.write(&a.output, &trials_csv(&trials))?;
    if let Some(t) = &a.traces {
        let mut merged = String::new();
        for trial in &trials {
            let text = trial.trace.to_csv_string();
            let mut lines = text.lines();
            let header = lines.next().unwrap_or_default();
            if merged.is_empty() {
                merged = format!("seed,{header}\n");
            }
            for line in lines {
                merged += &format!("{},{line}\n", trial.seed);
            }
        }
        ctx.write(t, &merged)?;
    }
    let clusters = converged_clusters(&trials, CLUSTER_TOL);
    let converged: usize = clusters.iter().map(|c| c.1).sum();
    println!(
        "{} starts, {converged} converged, {} distinct objectives at {CLUSTER_TOL:e} relative -> {}",
        trials.len(),
        clusters.len(),
        path.display()
    );
    for (x, n) in &clusters {
        println!("  {x:.12e} x {n}");
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(ctx: &Ctx, a: VerifyArgs) -> Result<ExitCode> {
    let (_, p) = load_problem(&a.scenario)?;
    let sol = Solution::load(&a.solution).with_context(|| format!("loading {}", a.solution.display()))?;
    sol.check(&p)?;
    let rx = match sol.rx {
        Some(u) => u,
        None => mmse_receivers(&p, &sol.tx)?,
    };
    let lambda = match sol.lambda {
        Some(l) => l,
        None => lambda_fixed_point(&p, &rx, &vec![1.0; p.num_streams()], 1000)?.0,
    };
    let report = kkt_residual(&p, &sol.tx, &rx, &lambda)?;
    let path = ctx.write(&a.output, &report.to_json())?;
    println!(
        "stationarity rx {:.2e} tx {:.2e}, complementarity {:.2e}, violation {:.2e}, min lambda {:.3e}, gap {:.2e} -> {}",
        report.stationarity_rx,
        report.stationarity_tx,
        report.complementarity,
        report.primal_violation,
        report.dual_feasibility,
        report.duality_gap,
        path.display()
    );
    if report.is_certified() {
        println!("certified");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "error: not certified (residual {:.2e} vs {KKT_TOL:e}, gap {:.2e} vs {GAP_TOL:e}, min lambda {:.3e})",
            report.max_residual(),
            report.duality_gap,
            report.dual_feasibility
        );
        Ok(ExitCode::from(code::NOT_CERTIFIED))
    }
}

fn counterexample_cmd(a: CounterexampleArgs) -> Result<ExitCode> {
    let h = match &a.matrix {
        Some(text) => {
            let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(text).context("parsing --matrix")?;
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ncols) {
                bail!("--matrix rows have different lengths");
            }
            CMatrix::from_fn(rows.len(), ncols, |i, j| c64(rows[i][j][0], rows[i][j][1]))
        }
        None if a.diag.len() != 2 => {
            clap::Error::raw(clap::error::ErrorKind::WrongNumberOfValues, "--diag takes exactly two values\n").exit()
        }
        None => CMatrix::from_diagonal(&qcpm::linalg::CVector::from_vec(vec![c64(a.diag[0], 0.0), c64(a.diag[1], 0.0)])),
    };
    let ce = build_counterexample(&h, a.gamma)?;
    let fmt = |v: &qcpm::linalg::CVector| {
        let parts: Vec<String> = v.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
        format!("[{}]", parts.join(", "))
    };
    println!("mu = [{:.12}, {:.12}]", ce.mu[0], ce.mu[1]);
    println!("v1 = {}", fmt(&ce.v[0]));
    println!("v2 = {}", fmt(&ce.v[1]));
    println!("u1 = {}", fmt(&ce.u[0]));
    println!("u2 = {}", fmt(&ce.u[1]));
    println!("lambda = [{:.12}, {:.12}]", ce.lambda[0], ce.lambda[1]);
    println!("per-stream residual = {:.3e}", ce.kkt.max_residual());
    println!("single-multiplier residual = {:.6}", ce.collapsed_residual);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { out_dir: cli.out_dir };
    let result = match cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Solve(a) => solve_cmd(&ctx, a),
        Command::Sweep(a) => sweep_cmd(&ctx, a),
        Command::Verify(a) => verify_cmd(&ctx, a),
        Command::Counterexample(a) => counterexample_cmd(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
