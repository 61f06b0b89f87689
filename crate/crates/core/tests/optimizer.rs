mod common;

use common::*;
use featgrad::dataio::{generate_synthetic, Dataset, SynthSpec};
use featgrad::estimator::EstimatorConfig;
use featgrad::optimizer::*;
use featgrad::preprocess::{fit_stats, PreprocessStats};
use featgrad::Matrix;
use rand::Rng;

fn problem(
    n: usize,
    d: usize,
    support: usize,
    seed: u64,
) -> (Dataset, Vec<usize>, PreprocessStats) {
    let spec = SynthSpec {
        n_rows: n,
        n_features: d,
        support_size: support,
        noise_std: 0.5,
        feature_correlation: 0.1,
        seed,
    };
    let (ds, truth) = generate_synthetic(&spec).unwrap();
    let stats = fit_stats(&ds, None, 0).unwrap();
    (ds, truth, stats)
}

#[test]
fn huge_penalty_switches_features_off() {
    let (ds, _, stats) = problem(200, 20, 3, 1);
    let state = fit(
        &ds,
        &stats,
        &EstimatorConfig::new(3).unwrap(),
        &OptimizerConfig::default(),
        1e6,
    )
    .unwrap();
    let s = state.scores();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    assert!(mean < 0.05, "{mean}");
}

#[test]
fn single_predictive_feature_ranks_first() {
    let mut r = rng(2);
    let n = 300;
    let mut values = random_vec(&mut r, n * 5);
    let labels: Vec<f64> = (0..n)
        .map(|i| if values[i * 5 + 2] > 0.0 { 1.0 } else { -1.0 })
        .collect();
    for i in 0..n {
        values[i * 5 + 2] += 0.1 * r.random_range(-1.0..1.0);
    }
    let ds = Dataset::dense("one", Matrix::from_vec(n, 5, values), labels).unwrap();
    let stats = fit_stats(&ds, None, 0).unwrap();
    let state = fit(
        &ds,
        &stats,
        &EstimatorConfig::new(2).unwrap(),
        &OptimizerConfig::default(),
        0.0,
    )
    .unwrap();
    let s = state.scores();
    let best = (0..5).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
    assert_eq!(best, 2, "{s:?}");
}

#[test]
fn stops_on_plateau_before_iteration_budget() {
    let (ds, _, stats) = problem(150, 10, 2, 3);
    let cfg = OptimizerConfig {
        rel_tolerance: 1e-3,
        ..Default::default()
    };
    let state = fit(&ds, &stats, &EstimatorConfig::new(2).unwrap(), &cfg, 0.1).unwrap();
    assert_eq!(state.stop_reason, Some(StopReason::RelativeTolerance));
    assert!(state.step < cfg.max_iterations);
    let t = &state.trace;
    let (a, b) = (&t[t.len() - 1], &t[t.len() - 2]);
    let (ta, tb) = (a.objective + a.penalty, b.objective + b.penalty);
    assert!((ta - tb).abs() / tb.abs() < 1e-3);
}

#[test]
fn iteration_budget_is_respected() {
    let (ds, _, stats) = problem(100, 8, 2, 4);
    let cfg = OptimizerConfig {
        max_iterations: 7,
        rel_tolerance: 0.0,
        ..Default::default()
    };
    let state = fit(&ds, &stats, &EstimatorConfig::new(2).unwrap(), &cfg, 0.1).unwrap();
    assert_eq!(state.step, 7);
    assert_eq!(state.stop_reason, Some(StopReason::MaxIterations));
    assert_eq!(state.trace.len(), 8);
}

#[test]
fn identical_inputs_give_identical_states() {
    let (ds, _, stats) = problem(300, 12, 3, 5);
    let est = EstimatorConfig::new(3).unwrap();
    for cfg in [
        OptimizerConfig::default(),
        OptimizerConfig {
            mini_batch_size: Some(50),
            accumulation_target: 100,
            epochs: 3,
            seed: 9,
            ..Default::default()
        },
    ] {
        let a = fit(&ds, &stats, &est, &cfg, 0.5).unwrap();
        let b = fit(&ds, &stats, &est, &cfg, 0.5).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn permuting_columns_permutes_scores() {
    let (ds, _, stats) = problem(200, 8, 3, 6);
    let perm = [5, 2, 7, 0, 1, 6, 3, 4];
    let x = ds.to_dense();
    let xp = x.select_columns(&perm);
    let dp = Dataset::dense("perm", xp, ds.labels().to_vec()).unwrap();
    let sp = PreprocessStats {
        means: perm.iter().map(|&j| stats.means[j]).collect(),
        ..stats.clone()
    };
    let est = EstimatorConfig::new(3).unwrap();
    let cfg = OptimizerConfig {
        max_iterations: 100,
        ..Default::default()
    };
    let a = fit(&ds, &stats, &est, &cfg, 0.3).unwrap().scores();
    let b = fit(&dp, &sp, &est, &cfg, 0.3).unwrap().scores();
    for (i, &j) in perm.iter().enumerate() {
        assert!((b[i] - a[j]).abs() <= 1e-9, "{} vs {}", b[i], a[j]);
    }
}

#[test]
fn full_batch_objective_mostly_decreases() {
    let (ds, _, stats) = problem(400, 15, 3, 7);
    let cfg = OptimizerConfig {
        rel_tolerance: 0.0,
        max_iterations: 200,
        ..Default::default()
    };
    let state = fit(&ds, &stats, &EstimatorConfig::new(3).unwrap(), &cfg, 0.1).unwrap();
    let totals: Vec<f64> = state
        .trace
        .iter()
        .map(|p| p.objective + p.penalty)
        .collect();
    let down = totals.windows(2).filter(|w| w[1] <= w[0]).count();
    let share = down as f64 / (totals.len() - 1) as f64;
    assert!(share >= 0.95, "only {share} of steps decreased");
}

#[test]
fn scores_stay_strictly_inside_unit_interval() {
    let (ds, _, stats) = problem(200, 10, 2, 8);
    for lambda in [0.0, 1.0, 1e6] {
        let state = fit(
            &ds,
            &stats,
            &EstimatorConfig::new(2).unwrap(),
            &OptimizerConfig::default(),
            lambda,
        )
        .unwrap();
        assert!(state.scores().iter().all(|&s| s > 0.0 && s < 1.0));
        assert!(state.trace.iter().all(|p| p.mean_s > 0.0 && p.mean_s < 1.0));
    }
}

#[test]
fn first_adam_step_moves_by_learning_rate() {
    let mut r = rng(9);
    let cfg = OptimizerConfig::default();
    let mut state = SelectionState::new(6, 0.0);
    let g: Vec<f64> = (0..6).map(|_| r.random_range(-5.0..5.0)).collect();
    adam_step(&mut state, &g, &cfg).unwrap();
    for (v, g) in state.v.iter().zip(&g) {
        assert!((v.abs() - cfg.learning_rate).abs() <= 0.05 * cfg.learning_rate);
        assert_eq!(v.signum(), -g.signum());
    }
}

#[test]
fn non_finite_gradient_is_reported() {
    let mut state = SelectionState::new(3, 0.0);
    let err = adam_step(
        &mut state,
        &[0.0, f64::NAN, 1.0],
        &OptimizerConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, featgrad::Error::NonFinite { step: 1, .. }));
    assert!(err.to_string().contains("1=NaN"));
    assert_eq!(state.step, 0);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _, stats) = problem(200, 10, 2, 10);
    let est = EstimatorConfig::new(3).unwrap();
    let full_cfg = OptimizerConfig {
        max_iterations: 40,
        rel_tolerance: 0.0,
        ..Default::default()
    };
    let straight = fit(&ds, &stats, &est, &full_cfg, 0.2).unwrap();

    let half = OptimizerConfig {
        max_iterations: 20,
        ..full_cfg.clone()
    };
    let first = fit(&ds, &stats, &est, &half, 0.2).unwrap();
    let path = dir.path().join("ckpt.json");
    save_checkpoint(&first, &path).unwrap();
    let mut resumed = load_checkpoint(&path).unwrap();
    assert_eq!(
        (&resumed.v, &resumed.adam_m, &resumed.adam_v),
        (&first.v, &first.adam_m, &first.adam_v)
    );
    assert_eq!((resumed.step, resumed.lambda), (20, 0.2));
    fit_from(&mut resumed, &ds, &stats, &est, &full_cfg).unwrap();
    assert_eq!(resumed.v, straight.v);
    assert_eq!(resumed.step, 40);
    assert_eq!(resumed.trace[..], straight.trace[20..]);

    // Resuming an in-memory state keeps its trace continuous.
    let mut continued = first.clone();
    fit_from(&mut continued, &ds, &stats, &est, &full_cfg).unwrap();
    assert_eq!(continued, straight);
}

#[test]
fn minibatch_runs_within_epoch_budget() {
    let (ds, truth, stats) = problem(1000, 20, 3, 11);
    let cfg = OptimizerConfig {
        mini_batch_size: Some(100),
        accumulation_target: 200,
        epochs: 4,
        rel_tolerance: 0.0,
        ..Default::default()
    };
    let state = fit(&ds, &stats, &EstimatorConfig::new(3).unwrap(), &cfg, 0.1).unwrap();
    assert_eq!(state.stop_reason, Some(StopReason::EpochBudget));
    assert_eq!(state.step, 4 * 5);
    let s = state.scores();
    let mut order: Vec<usize> = (0..20).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut top: Vec<usize> = order[..3].to_vec();
    top.sort_unstable();
    assert_eq!(top, truth);
}

#[test]
fn minibatch_smaller_than_order_is_a_config_error() {
    let (ds, _, stats) = problem(100, 5, 2, 12);
    let cfg = OptimizerConfig {
        mini_batch_size: Some(3),
        ..Default::default()
    };
    let err = fit(&ds, &stats, &EstimatorConfig::new(4).unwrap(), &cfg, 0.1).unwrap_err();
    assert!(matches!(err, featgrad::Error::Config(_)));
}

#[test]
fn trace_csv_has_one_line_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _, stats) = problem(100, 5, 2, 13);
    let cfg = OptimizerConfig {
        max_iterations: 5,
        rel_tolerance: 0.0,
        ..Default::default()
    };
    let state = fit(&ds, &stats, &EstimatorConfig::new(2).unwrap(), &cfg, 0.1).unwrap();
    let path = dir.path().join("trace.csv");
    write_trace(&state, &path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,objective,penalty,mean_s");
    assert_eq!(lines.len(), 7);
}
