use super::*;
use crate::analysis::{check_projection_lemma, ProjectionInstance};
use crate::linalg::dist_sq;
use crate::problems::{
    make_growth_problem, make_interpolation_least_squares, make_noiseless_quadratic, make_sign_vector_problem,
};
use proptest::prelude::*;

fn unit_quadratic() -> Problem {
    // L(w) = ½(w − 1)², every sample equal to L.
    make_noiseless_quadratic(1, 1.0, 1.0, 1.0).unwrap()
}

#[test]
fn schedule_examples() {
    let s = make_schedule(1.0, 12, 11, 1.0, 0.0).unwrap();
    assert_eq!(s.gamma, 1.0 / 24.0);
    assert_eq!(s.gamma_branches()[2], f64::INFINITY);
    let s = make_schedule(1.0, 1, 1, 1.0, 0.0).unwrap();
    assert_eq!(s.gamma, 1.0 / 48.0);

    // Each branch recomputed by hand: 1/12, 1/(24·101), √(1/(0.02·10⁶)).
    let s = make_schedule(1.0, 1, 100, 1.0, 0.02).unwrap();
    let [a, b, c] = s.gamma_branches();
    assert!((a - 0.083_333_333_333).abs() < 1e-12);
    assert!((b - 1.0 / 2424.0).abs() < 1e-18);
    assert!((c - 7.071_067_811_865e-3).abs() < 1e-12);
    assert_eq!(s.gamma, b);
    assert!((s.gamma - 4.125e-4).abs() < 1e-6);
}

#[test]
fn schedule_rejects_bad_inputs() {
    assert!(make_schedule(0.0, 1, 1, 1.0, 0.0).is_err());
    assert!(make_schedule(1.0, 0, 1, 1.0, 0.0).is_err());
    assert!(make_schedule(1.0, 1, 0, 1.0, 0.0).is_err());
    assert!(make_schedule(1.0, 1, 1, -1.0, 0.0).is_err());
    assert!(make_schedule(1.0, 1, 1, 1.0, -0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn schedule_invariants(h in 0.01f64..100.0, b in 1usize..512, horizon in 1u64..2000, noise in 0.0f64..10.0) {
        let s = make_schedule(h, b, horizon, 1.0, noise).unwrap();
        for t in 0..horizon {
            prop_assert!(s.beta(t) >= 1.0);
            prop_assert!(2.0 * h * s.step(t) <= s.beta(t));
            let lhs = (s.beta(t + 1) - 1.0 + 8.0 * h * s.step(t + 1) / b as f64) * s.step(t + 1);
            prop_assert!(lhs <= s.beta(t) * s.step(t) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn projection_examples() {
    assert_eq!(project_ball(&[3.0, 4.0], 1.0), vec![0.6, 0.8]);
    assert_eq!(project_ball(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
    assert_eq!(project_ball(&[0.0, 0.0], 2.0), vec![0.0, 0.0]);
}

#[test]
fn first_step_has_unit_beta() {
    let p = make_sign_vector_problem(2, 1.0, 1.0, &[1, -1, 1, 1]).unwrap();
    let s = make_schedule(1.0, 2, 5, 1.0, 0.0).unwrap();
    let mut state = OptimizerState::zeros(4);
    let info = acc_step(&mut state, &s, &p, &[0.0; 4], &mut RngState::new(0)).unwrap();
    assert_eq!(info.w_md, info.w_prev);
    assert_eq!(state.w_ag, state.w);
    assert_eq!(state.t, 1);
}

#[test]
fn single_step_hand_trace() {
    let out = run_acc_mb_sgd(&unit_quadratic(), 1, 1, 0, &RunOptions::default()).unwrap();
    assert!((out.w[0] - 1.0 / 48.0).abs() < 1e-15);
    let rec = out.trace.last().unwrap();
    assert!((rec.norm_w - 1.0 / 48.0).abs() < 1e-15);
    assert!((rec.norm_wag - 0.020_833_3).abs() < 1e-7);
}

#[test]
fn two_step_trace_matches_scalar_reimplementation() {
    // Independent scalar loop for L(w) = ½(w − 1)², T = 2, b = 1, H = B = 1.
    let gamma = (1.0_f64 / 12.0).min(1.0 / (24.0 * 3.0));
    let (mut w, mut ag) = (0.0_f64, 0.0_f64);
    let mut expect = Vec::new();
    for t in 0..2 {
        let beta = 1.0 + t as f64 / 6.0;
        let md = w / beta + (1.0 - 1.0 / beta) * ag;
        let g = md - 1.0;
        w = (w - gamma * (t + 1) as f64 * g).clamp(-1.0, 1.0);
        ag = w / beta + (1.0 - 1.0 / beta) * ag;
        expect.push((w, ag, 0.5 * (ag - 1.0) * (ag - 1.0)));
    }
    let out = run_acc_mb_sgd(&unit_quadratic(), 1, 2, 3, &RunOptions::default()).unwrap();
    let recs = &out.trace.records;
    assert_eq!(recs.len(), 3);
    for (rec, (w, ag, sub)) in recs[1..].iter().zip(expect) {
        assert!((rec.norm_w - w.abs()).abs() < 1e-12);
        assert!((rec.norm_wag - ag.abs()).abs() < 1e-12);
        assert!((rec.subopt - sub).abs() < 1e-12);
    }
}

#[test]
fn suboptimality_trends_down_with_horizon() {
    let p = make_interpolation_least_squares(4, 1, 1.0, 1.0, 2).unwrap();
    let mut prev = f64::INFINITY;
    for horizon in [8u64, 16, 32, 64, 128, 256] {
        let out = run_acc_mb_sgd(&p, 1, horizon, 9, &RunOptions::endpoints()).unwrap();
        let v = out.trace.final_subopt().unwrap();
        assert!(v <= prev, "T={horizon}: {v} > {prev}");
        prev = v;
    }
}

#[test]
fn iterates_stay_in_ball_and_runs_are_deterministic() {
    let p = make_interpolation_least_squares(8, 4, 2.0, 3.0, 7).unwrap();
    let opts = RunOptions {
        radius: Some(0.5),
        ..RunOptions::default()
    };
    let a = run_acc_mb_sgd(&p, 3, 200, 17, &opts).unwrap();
    let b = run_acc_mb_sgd(&p, 3, 200, 17, &opts).unwrap();
    assert_eq!(a.trace.csv_bytes().unwrap(), b.trace.csv_bytes().unwrap());
    assert!(a.trace.records.iter().all(|r| r.norm_w <= 0.5 + 1e-12 && r.norm_wag <= 0.5 + 1e-12));
    assert!(norm(&a.w) <= 0.5 + 1e-12);
    assert!(a.trace.validate(&p.config_hash()).is_ok());
    let c = run_acc_mb_sgd(&p, 3, 200, 18, &opts).unwrap();
    assert_ne!(a.trace.records, c.trace.records);
}

#[test]
fn noiseless_runs_depend_on_b_only_through_gamma() {
    let p = make_noiseless_quadratic(3, 1.0, 1.0, 2.0).unwrap();
    // Both batch sizes keep γ = 1/(12H).
    let a = run_acc_mb_sgd(&p, 24, 10, 1, &RunOptions::default()).unwrap();
    let b = run_acc_mb_sgd(&p, 48, 10, 2, &RunOptions::default()).unwrap();
    assert_eq!(a.trace.header.gamma, b.trace.header.gamma);
    // Averaging b identical gradients is exact up to rounding.
    for (x, y) in a.trace.records.iter().zip(&b.trace.records) {
        assert!((x.norm_w - y.norm_w).abs() < 1e-12);
        assert!((x.norm_wag - y.norm_wag).abs() < 1e-12);
        assert!((x.subopt - y.subopt).abs() < 1e-12);
        assert!(x.grad_noise_sq.unwrap_or(0.0) < 1e-28 && y.grad_noise_sq.unwrap_or(0.0) < 1e-28);
    }
}

#[test]
fn real_steps_satisfy_projection_inequality() {
    let p = make_interpolation_least_squares(8, 4, 2.0, 3.0, 7).unwrap();
    let s = make_schedule(2.0, 1, 50, 0.3, 0.0).unwrap();
    let mut state = OptimizerState::zeros(8);
    let mut rng = RngState::new(4);
    let probes: Vec<Vec<f64>> = (0..8)
        .map(|k| {
            let mut e = vec![0.0; 8];
            e[k] = if k % 2 == 0 { 0.3 } else { -0.1 };
            e
        })
        .collect();
    for _ in 0..50 {
        let info = acc_step(&mut state, &s, &p, &[0.0; 8], &mut rng).unwrap();
        let inst = ProjectionInstance {
            w_t: info.w_prev,
            w_md: info.w_md,
            g: info.grad,
            step: info.step,
            radius: 0.3,
        };
        assert_eq!(inst.next(), state.w);
        let check = check_projection_lemma(&inst, &probes).unwrap();
        assert!(check.passed, "{check:?}");
    }
    assert!(acc_step(&mut state, &s, &p, &[0.0; 8], &mut rng).is_err());
}

#[test]
fn sgd_hand_arithmetic() {
    let sched = SgdSchedule {
        step: 10.0,
        averaging: Averaging::Last,
    };
    let out = run_sgd(&unit_quadratic(), 1, 2, &sched, 0, &RunOptions::default()).unwrap();
    let norms: Vec<f64> = out.trace.records.iter().map(|r| r.norm_w).collect();
    assert_eq!(norms, vec![0.0, 0.5, 0.75]);
    assert_eq!(out.w, vec![0.75]);
    assert_eq!(out.trace.header.gamma, Some(0.5));

    let uni = run_sgd(&unit_quadratic(), 1, 2, &SgdSchedule::new(0.5), 0, &RunOptions::default()).unwrap();
    assert_eq!(uni.w, vec![0.625]);
    let tail = SgdSchedule {
        step: 0.5,
        averaging: Averaging::Tail,
    };
    let t4 = run_sgd(&unit_quadratic(), 1, 4, &tail, 0, &RunOptions::default()).unwrap();
    assert!((t4.w[0] - (0.875 + 0.9375) / 2.0).abs() < 1e-15);
}

#[test]
fn sgd_noiseless_ignores_batch_size() {
    let p = make_noiseless_quadratic(4, 1.0, 1.0, 3.0).unwrap();
    let s = SgdSchedule::new(0.3);
    let a = run_sgd(&p, 1, 30, &s, 5, &RunOptions::default()).unwrap();
    let b = run_sgd(&p, 4, 30, &s, 6, &RunOptions::default()).unwrap();
    assert_eq!(a.trace.records, b.trace.records);
}

#[test]
fn tuned_sgd_improves_with_horizon() {
    let p = make_interpolation_least_squares(8, 4, 1.0, 1.0, 0).unwrap();
    let grid: Vec<f64> = (0..6).map(|k| 0.5 * 0.5f64.powi(k)).collect();
    let mut prev = f64::INFINITY;
    for horizon in [64u64, 128, 256, 512] {
        let best = grid
            .iter()
            .map(|&step| {
                let finals: Vec<f64> = (0..20)
                    .map(|seed| {
                        run_sgd(&p, 1, horizon, &SgdSchedule::new(step), seed, &RunOptions::endpoints())
                            .unwrap()
                            .trace
                            .final_subopt()
                            .unwrap()
                    })
                    .collect();
                crate::analysis::median(&finals)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best < prev, "T={horizon}: {best} !< {prev}");
        prev = best;
    }
}

fn scan_budget(eps: f64, b_sq: f64, h: f64, b: usize, lstar: f64) -> u64 {
    let sigma = (2.0 * h * lstar).sqrt();
    (1u64..)
        .find(|&t| {
            let t = t as f64;
            108.0 * h * b_sq / (t * t) + 144.0 * h * b_sq / (b as f64 * t) + 27.0 * sigma * b_sq.sqrt() / (b as f64 * t).sqrt()
                <= eps
        })
        .unwrap()
}

#[test]
fn stage_budget_matches_linear_scan() {
    let t = stage_budget(1.08, 1.0, 1.0, 1_000_000, 0.0).unwrap();
    assert_eq!(t, scan_budget(1.08, 1.0, 1.0, 1_000_000, 0.0));
    assert_eq!(t, 11);
    assert_eq!(stage_budget(252.0, 1.0, 1.0, 1, 0.0).unwrap(), 1);
    for &(eps, b, lstar) in &[(0.5, 1, 0.0), (0.01, 8, 0.0), (0.05, 4, 0.1), (0.2, 64, 1.0)] {
        assert_eq!(stage_budget(eps, 2.0, 1.5, b, lstar).unwrap(), scan_budget(eps, 2.0, 1.5, b, lstar));
    }
    assert!(stage_budget(0.0, 1.0, 1.0, 1, 0.0).is_err());
}

proptest! {
    #[test]
    fn stage_budget_is_monotone_in_eps(eps in 1e-3f64..10.0, b in 1usize..64, lstar in 0.0f64..1.0) {
        let small = stage_budget(eps, 1.0, 1.0, b, lstar).unwrap();
        let large = stage_budget(2.0 * eps, 1.0, 1.0, b, lstar).unwrap();
        prop_assert!(large <= small);
    }
}

#[test]
fn stage_plan_examples() {
    let e = std::f64::consts::E;
    let eps = 0.01;
    let plan = make_stage_plan(e.powi(3) * eps, eps, e, 0.5, 1.0, 4, 0.0).unwrap();
    assert_eq!(plan.stages.len(), 3);
    let delta = plan.delta;
    assert!((plan.stages[0].eps - delta / e).abs() < 1e-15);
    assert!((plan.stages[0].radius_sq - 2.0 * delta / 0.5).abs() < 1e-14);

    // Recomputed independently: seven stages of 985 iterations each.
    let plan = make_stage_plan(1.0, 1e-3, e, 0.1, 1.0, 8, 0.0).unwrap();
    let scanned: u64 = (1..=7)
        .map(|t| {
            let t = t as f64;
            scan_budget(e.powf(-t), 2.0 * e.powf(1.0 - t) / 0.1, 1.0, 8, 0.0)
        })
        .sum();
    assert_eq!(plan.total_iterations(), scanned);
    assert_eq!(scanned, 6895);

    assert!(make_stage_plan(1.0, 0.1, 1.0, 0.1, 1.0, 1, 0.0).is_err());
    assert!(make_stage_plan(1.0, 0.1, e, 0.0, 1.0, 1, 0.0).is_err());
    assert!(make_stage_plan(1.0, 2.0, e, 0.1, 1.0, 1, 0.0).unwrap().stages.is_empty());
}

#[test]
fn single_stage_restart_equals_plain_run() {
    let p = make_growth_problem(6, 3, 0.25, 1.0, 1.0, 1).unwrap();
    let e = std::f64::consts::E;
    let plan = make_stage_plan(1.0, 0.5, e, 0.25, 1.0, 4, 0.0).unwrap();
    assert_eq!(plan.stages.len(), 1);
    let restarted = run_restarted(&p, &plan, 21, &RunOptions::default()).unwrap();
    let opts = RunOptions {
        radius: Some(plan.stages[0].radius()),
        ..RunOptions::default()
    };
    let plain = run_acc_mb_sgd(&p, 4, plan.stages[0].iterations, 21, &opts).unwrap();
    assert_eq!(restarted.w, plain.w);
    let strip = |t: &RunTrace| t.records.iter().map(|r| (r.t, r.subopt, r.norm_wag)).collect::<Vec<_>>();
    assert_eq!(strip(&restarted.trace), strip(&plain.trace));
}

#[test]
fn restart_stages_stay_within_their_balls() {
    let p = make_growth_problem(6, 3, 0.25, 1.0, 1.0, 1).unwrap();
    let plan = make_stage_plan(1.0, 1e-3, std::f64::consts::E, 0.25, 1.0, 8, 0.0).unwrap();
    let mut center = vec![0.0; 6];
    let mut rng = RngState::new(3);
    for stage in &plan.stages {
        let s = make_schedule(1.0, 8, stage.iterations, stage.radius(), 0.0).unwrap();
        let mut state = OptimizerState::zeros(6);
        while state.t < s.horizon {
            acc_step(&mut state, &s, &p, &center, &mut rng).unwrap();
            assert!(norm(&state.w) <= stage.radius() * (1.0 + 1e-12));
        }
        let next = add(&center, &state.w_ag);
        assert!(dist_sq(&next, &center).sqrt() <= stage.radius() * (1.0 + 1e-12));
        center = next;
    }
    let out = run_restarted(&p, &plan, 3, &RunOptions::endpoints()).unwrap();
    assert_eq!(out.w, center);
    let ends = out.trace.stage_ends();
    assert_eq!(ends.len(), plan.stages.len());
    assert_eq!(ends.last().unwrap().t, plan.total_iterations());
}

#[test]
fn non_finite_values_abort_with_flagged_trace() {
    #[derive(Debug)]
    struct Explodes;
    impl crate::problems::SampleObjective for Explodes {
        fn draw(&self, _: &mut dyn rand::RngCore) -> crate::problems::Sample {
            crate::problems::Sample::Exact
        }
        fn loss(&self, w: &[f64], _: &crate::problems::Sample) -> f64 {
            w[0] * w[0]
        }
        fn add_gradient(&self, w: &[f64], _: &crate::problems::Sample, out: &mut [f64]) {
            out[0] += if w[0] > 0.0 { f64::NAN } else { -1.0 };
        }
    }
    let meta = crate::problems::ProblemMeta {
        smoothness: 1.0,
        radius: 1.0,
        lstar: 0.0,
        sigma_star_sq: 0.0,
        lambda: 0.0,
        delta: 1.0,
        wstar: None,
    };
    let p = Problem::custom(1, meta, std::sync::Arc::new(Explodes)).unwrap();
    let opts = RunOptions {
        mc_samples: 4,
        ..RunOptions::default()
    };
    let out = run_acc_mb_sgd(&p, 1, 10, 0, &opts).unwrap();
    assert_eq!(
        out.trace.status,
        TraceStatus::Aborted {
            iteration: 1,
            what: "gradient".into()
        }
    );
    assert_eq!(out.trace.records.len(), 2);
}
