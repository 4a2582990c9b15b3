use qcpm::kkt::kkt_residual;
use qcpm::linalg::{c64, CMatrix, CVector};
use qcpm::mmse_dual::{fixed_point_residual, lambda_fixed_point};
use qcpm::multistream::{solve_multistream, user_rate};
use qcpm::{
    solve, Algorithm, Channel, FailureKind, InitMode, Problem, QosTargets, Scenario, SolveOptions, SolveStatus,
    SystemConfig, TxBeamformers,
};

fn problem(k: usize, m: usize, n: usize, gamma: f64, seed: u64) -> Problem {
    let scn = Scenario::generate(SystemConfig::uniform(k, m, n, 1), QosTargets::uniform(k, gamma, 1.0), seed).unwrap();
    Problem::from_scenario(&scn).unwrap()
}

fn opts(seed: u64) -> SolveOptions {
    SolveOptions {
        seed,
        max_outer_iters: 5000,
        ..SolveOptions::default()
    }
}

#[test]
fn mmse_dual_power_never_rises_once_feasible() {
    for seed in 0..30 {
        let p = problem(3, 4, 3, 10.0, seed);
        let r = solve(&p, Algorithm::MmseDual, &opts(seed)).unwrap();
        let rows = &r.trace.rows;
        let first = rows.iter().position(|r| r.feasible).unwrap();
        assert!(rows[first..].iter().all(|r| r.feasible), "seed {seed} leaves the feasible set");
        for w in rows[first..].windows(2) {
            assert!(w[1].total_power <= w[0].total_power + 1e-10, "seed {seed} iteration {}", w[1].iter);
        }
    }
}

#[test]
fn udd_power_chain_is_monotone() {
    for seed in 0..30 {
        let p = problem(4, 7, 3, 10.0, seed);
        let r = solve(&p, Algorithm::Udd, &opts(seed)).unwrap();
        let rows: Vec<_> = r.trace.rows.iter().filter(|r| r.uplink_power.is_some()).collect();
        for w in rows.windows(2) {
            let up = w[0].uplink_power.unwrap();
            assert!(up >= 0.0);
            assert!(up <= w[0].total_power + 1e-9, "seed {seed} row {}", w[0].iter);
            assert!(w[1].total_power <= up + 1e-9, "seed {seed} row {}", w[1].iter);
        }
    }
}

#[test]
fn converged_multipliers_are_a_fixed_point() {
    for seed in 0..10 {
        let p = problem(3, 4, 3, 10.0, seed);
        let r = solve(&p, Algorithm::MmseDual, &opts(seed)).unwrap();
        let lam = lambda_fixed_point(&p, &r.rx, &r.lambda, 200).unwrap();
        let res = fixed_point_residual(&p, &r.rx, &lam).unwrap();
        assert!(res < 1e-10, "seed {seed}: {res:e}");
        assert!(r.lambda.iter().all(|&l| l > 0.0));
    }
}

#[test]
fn initial_phases_do_not_change_the_solution() {
    let mut compared = 0;
    for seed in 0..20 {
        let p = problem(3, 4, 3, 10.0, seed);
        let v = qcpm::init::random(&p, seed);
        let rotated = TxBeamformers(
            v.iter()
                .enumerate()
                .map(|(s, x)| x * c64((1.3 * s as f64 + 0.4).cos(), (1.3 * s as f64 + 0.4).sin()))
                .collect(),
        );
        let run = |init| {
            let o = SolveOptions {
                init: InitMode::Given(init),
                tolerance: 1e-12,
                stationarity_tol: 1e-10,
                max_outer_iters: 50_000,
                ..SolveOptions::default()
            };
            solve(&p, Algorithm::MmseDual, &o).unwrap()
        };
        let (a, b) = (run(v.clone()), run(rotated));
        if (a.total_power() - b.total_power()).abs() > 1e-8 * a.total_power() {
            continue;
        }
        compared += 1;
        for (x, y) in a.tx.iter().zip(b.tx.iter()) {
            assert!((x - y).camax() < 1e-5, "seed {seed}");
        }
    }
    assert!(compared >= 15, "only {compared} runs reached the same objective");
}

#[test]
fn converged_points_pass_kkt_for_both_inits() {
    for init in [InitMode::Random, InitMode::ZeroForcing] {
        for seed in 0..5 {
            let p = problem(3, 5, 2, 5.0, seed);
            for algo in [Algorithm::MmseDual, Algorithm::Udd] {
                let o = SolveOptions {
                    init: init.clone(),
                    ..opts(seed)
                };
                let r = solve(&p, algo, &o).unwrap();
                assert_eq!(r.status, SolveStatus::Converged);
                let k = kkt_residual(&p, &r.tx, &r.rx, &r.lambda).unwrap();
                assert!(k.is_certified(), "{algo} seed {seed}: {k:?}");
            }
        }
    }
}

#[test]
fn single_user_two_streams_reaches_its_rate() {
    let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c64(1.0, 0.0), c64(2.0, 0.0)]));
    let rate = 2.0 * 2f64.ln();
    let targets = QosTargets {
        gamma: vec![1.0],
        sigma2: vec![1.0],
        rate: vec![rate],
    };
    let cfg = SystemConfig::uniform(1, 2, 2, 2);
    let scn = Scenario::new(cfg, Channel(vec![h]), targets).unwrap();
    let p = Problem::from_scenario(&scn).unwrap();
    assert!(p.gamma().iter().all(|g| (g - 1.0).abs() < 1e-15));
    for algo in [Algorithm::MmseDual, Algorithm::Udd] {
        let r = solve_multistream(&scn, algo, &opts(0)).unwrap();
        let got = user_rate(&p, &r.tx, 0).unwrap();
        assert!((got - rate).abs() < 1e-6 * rate, "{algo}: {got}");
    }
}

#[test]
fn failures_carry_their_trace() {
    let p = Problem::from_scenario(&qcpm::fixtures::two_user_scenario()).unwrap();
    let o = SolveOptions {
        init: InitMode::Given(qcpm::fixtures::two_user_infeasible_start()),
        warm_start_iters: 0,
        ..SolveOptions::default()
    };
    let f = solve(&p, Algorithm::Udd, &o).unwrap_err();
    assert!(matches!(f.kind, FailureKind::InfeasibleInitialization { .. }));
    assert_eq!(f.iteration, 1);
    assert_eq!(f.trace.len(), 1);
    // With the default warm start the same start is recovered.
    let o = SolveOptions {
        warm_start_iters: 3,
        ..o
    };
    assert_eq!(solve(&p, Algorithm::Udd, &o).unwrap().status, SolveStatus::Converged);
}
