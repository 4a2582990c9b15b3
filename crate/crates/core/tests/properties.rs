use proptest::prelude::*;

use qcpm::beamforming::{downlink_sinr, mmse_receivers, uplink_sinr};
use qcpm::init::{random, zero_forcing};
use qcpm::linalg::{c64, normalize, CVector};
use qcpm::mmse_dual::lambda_map;
use qcpm::power::{downlink_power_solve, uplink_power_solve};
use qcpm::solution::Solution;
use qcpm::{solve, Algorithm, Problem, QosTargets, Scenario, SolveOptions, SystemConfig};

fn problem(k: usize, m: usize, n: usize, gamma: f64, seed: u64) -> Problem {
    let scn = Scenario::generate(SystemConfig::uniform(k, m, n, 1), QosTargets::uniform(k, gamma, 1.0), seed).unwrap();
    Problem::from_scenario(&scn).unwrap()
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=4, 1usize..=5, 1usize..=4)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinr_ignores_receiver_scale_and_beam_phases(
        (k, m, n) in dims(), seed in 0u64..1000, scale in 0.01f64..100.0, theta in 0.0f64..6.3,
    ) {
        let p = problem(k, m, n, 5.0, seed);
        let v = random(&p, seed + 1);
        let u = random(&Problem::from_parts(
            (0..k).map(|k| p.channel(k).adjoint()).collect(), vec![1.0; k], vec![1.0; k], p.layout().clone(),
        ).unwrap(), seed + 2);
        let base = downlink_sinr(&p, &v, &u).unwrap();
        let scaled: Vec<CVector> = u.iter().map(|x| x * c64(scale * theta.cos(), scale * theta.sin())).collect();
        let rotated: Vec<CVector> = v.iter().enumerate()
            .map(|(s, x)| x * c64((theta * s as f64).cos(), (theta * s as f64).sin()))
            .collect();
        for (a, b) in base.iter().zip(downlink_sinr(&p, &v, &scaled).unwrap()) {
            prop_assert!(rel(*a, b) < 1e-10);
        }
        for (a, b) in base.iter().zip(downlink_sinr(&p, &rotated, &u).unwrap()) {
            prop_assert!(rel(*a, b) < 1e-10);
        }
    }

    #[test]
    fn mmse_receiver_maximizes_sinr((k, m, n) in dims(), seed in 0u64..1000) {
        let p = problem(k, m, n, 5.0, seed);
        let v = random(&p, seed);
        let best = downlink_sinr(&p, &v, &mmse_receivers(&p, &v).unwrap()).unwrap();
        let other_p = Problem::from_parts(
            (0..k).map(|k| p.channel(k).adjoint()).collect(), vec![1.0; k], vec![1.0; k], p.layout().clone(),
        ).unwrap();
        let u = random(&other_p, seed + 9);
        for (b, x) in best.iter().zip(downlink_sinr(&p, &v, &u).unwrap()) {
            prop_assert!(x <= b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lambda_map_is_a_standard_function(
        seed in 0u64..1000,
        lam in prop::collection::vec(0.01f64..20.0, 3),
        bump in prop::collection::vec(0.0f64..5.0, 3),
        alpha in 1.001f64..10.0,
    ) {
        let p = problem(3, 4, 3, 4.0, seed);
        let u = mmse_receivers(&p, &zero_forcing(&p).unwrap()).unwrap();
        let bigger: Vec<f64> = lam.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = lam.iter().map(|a| alpha * a).collect();
        let f = lambda_map(&p, &u, &lam).unwrap();
        let g = lambda_map(&p, &u, &bigger).unwrap();
        let h = lambda_map(&p, &u, &scaled).unwrap();
        for s in 0..3 {
            prop_assert!(f[s] > 0.0);
            prop_assert!(f[s] <= g[s] * (1.0 + 1e-12));
            prop_assert!(h[s] < alpha * f[s]);
        }
    }

    #[test]
    fn power_systems_meet_targets_and_balance(seed in 0u64..1000, gamma in 0.5f64..5.0) {
        let p = problem(3, 4, 3, gamma, seed);
        let v = zero_forcing(&p).unwrap();
        let u = mmse_receivers(&p, &v).unwrap();
        let dirs: Vec<CVector> = v.iter().map(|x| normalize(x).unwrap()).collect();
        let mu = downlink_power_solve(&p, &u, &dirs).unwrap();
        let tx: Vec<CVector> = dirs.iter().zip(&mu).map(|(d, m)| d.scale(m.sqrt())).collect();
        for x in downlink_sinr(&p, &tx, &u).unwrap() {
            prop_assert!(rel(x, gamma) < 1e-9);
        }
        let q = uplink_power_solve(&p, &u, &dirs).unwrap();
        for x in uplink_sinr(&p, &q, &u, &dirs).unwrap() {
            prop_assert!(rel(x, gamma) < 1e-9);
        }
        // Same unit directions on both links need the same total power (sigma^2 = 1).
        let down: f64 = mu.iter().sum();
        let up: f64 = q.iter().sum();
        prop_assert!(rel(down, up) < 1e-9, "{} vs {}", down, up);
    }

    #[test]
    fn scenario_and_solution_files_round_trip((k, m, n) in dims(), seed in 0u64..1000) {
        let scn = Scenario::generate(SystemConfig::uniform(k, m, n, 1), QosTargets::uniform(k, 3.0, 0.7), seed).unwrap();
        prop_assert_eq!(&Scenario::from_json(&scn.to_json()).unwrap(), &scn);
        let p = Problem::from_scenario(&scn).unwrap();
        let sol = Solution::from_tx(random(&p, seed));
        prop_assert_eq!(Solution::from_json(&sol.to_json(Some(&p))).unwrap(), sol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solves_are_deterministic_with_well_formed_traces(seed in 0u64..1000, udd in any::<bool>()) {
        let p = problem(3, 4, 3, 10.0, seed);
        let algo = if udd { Algorithm::Udd } else { Algorithm::MmseDual };
        let opts = SolveOptions { seed, max_outer_iters: 5000, ..SolveOptions::default() };
        let a = solve(&p, algo, &opts).unwrap();
        prop_assert_eq!(&a, &solve(&p, algo, &opts).unwrap());
        for (i, row) in a.trace.rows.iter().enumerate() {
            prop_assert_eq!(row.iter, i + 1);
            prop_assert!(row.total_power.is_finite());
        }
        prop_assert_eq!(a.iterations, a.trace.len());
    }
}
