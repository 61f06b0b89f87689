use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use featgrad::baselines::{anova_f_scores, mutual_info_scores};
use featgrad::dataio::{
    generate_synthetic, load_csv, load_svmlight, split, write_csv, write_svmlight, Dataset,
    SplitSpec, SynthSpec,
};
use featgrad::estimator::EstimatorConfig;
use featgrad::eval::{evaluate_selector, paired_ttest, LogRegConfig, LogRegMode};
use featgrad::optimizer::{
    fit_from, load_checkpoint, save_checkpoint, write_trace, OptimizerConfig, SelectionState,
};
use featgrad::preprocess::fit_stats;
use featgrad::selection::{
    grid_search_lambda, rank_features, rank_indices, rank_scores, read_ranking, write_ranking,
    DEFAULT_LAMBDA_GRID,
};
use featgrad::{Error, Result};

use crate::config::{parse_denominator, parse_execution, DataSource, SelectConfig};
use crate::{BaselineArgs, DataArgs, EvaluateArgs, Format, Method, Mode, SelectArgs, SynthArgs};

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load(source: &DataSource) -> Result<Dataset> {
    if is_csv(&source.path) {
        load_csv(&source.path, source.label_column)
    } else {
        load_svmlight(&source.path, source.n_features)
    }
}

/// Loads two files over a common feature count. Svmlight files may stop
/// short of the highest feature index, so the narrower one is widened.
fn load_pair(a: &DataSource, b: &DataSource) -> Result<(Dataset, Dataset)> {
    let first = load(a)?;
    let second = load(b)?;
    let d = first.n_features().max(second.n_features());
    let widen = |ds: Dataset, src: &DataSource| {
        if ds.n_features() < d && !is_csv(&src.path) {
            load(&DataSource {
                n_features: Some(d),
                ..src.clone()
            })
        } else {
            Ok(ds)
        }
    };
    Ok((widen(first, a)?, widen(second, b)?))
}

fn source(path: &Path, args: &DataArgs) -> DataSource {
    DataSource {
        path: path.to_path_buf(),
        label_column: args.label_col,
        n_features: args.n_features,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn resolve(a: &SelectArgs) -> Result<SelectConfig> {
    if let Some(path) = &a.replay {
        return SelectConfig::load(path);
    }
    let data = a
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("--data is required".into()))?;
    let mut estimator = match &a.coeffs {
        Some(c) => EstimatorConfig::with_coefficients(c.clone()),
        None => EstimatorConfig::new(a.order),
    }
    .map_err(|e| Error::Config(format!("--order/--coeffs: {e}")))?
    .with_execution(parse_execution(a.parallel));
    estimator = estimator.with_denominator(parse_denominator(&a.denominator)?)?;
    let optimizer = OptimizerConfig {
        learning_rate: a.lr,
        max_iterations: a.max_iters,
        rel_tolerance: a.tol,
        epochs: a.epochs,
        mini_batch_size: a.batch_size,
        accumulation_target: a.accumulate,
        seed: a.seed,
        ..Default::default()
    };
    optimizer.validate()?;
    let lambdas = match (&a.lambda, &a.lambda_grid) {
        (Some(l), _) => vec![*l],
        (None, Some(grid)) => grid.clone(),
        (None, None) if a.resume.is_some() => {
            return Err(Error::Config("--resume needs a single --lambda".into()));
        }
        (None, None) => DEFAULT_LAMBDA_GRID.to_vec(),
    };
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(Error::Config("--sizes must list positive sizes".into()));
    }
    Ok(SelectConfig {
        train: source(data, &a.data_args),
        validation: a.validation.as_ref().map(|p| source(p, &a.data_args)),
        validation_fraction: a.validation_fraction,
        estimator,
        optimizer,
        logreg: LogRegConfig {
            seed: a.seed,
            ..Default::default()
        },
        lambdas,
        sizes: a.sizes.clone(),
        subsample_stats: a.subsample_stats,
        resume: a.resume.clone(),
    })
}

pub fn select(a: SelectArgs) -> Result<()> {
    let cfg = resolve(&a)?;
    let out = a.out_dir.as_path();
    create_dir(out)?;
    cfg.save(&out.join("config.json"))?;

    let (mut train, validation) = match &cfg.validation {
        Some(src) => {
            let (t, v) = load_pair(&cfg.train, src)?;
            (t, Some(v))
        }
        None => (load(&cfg.train)?, None),
    };
    let validation = match validation {
        Some(v) => Some(v),
        None if cfg.lambdas.len() > 1 => {
            let spec = SplitSpec::new(1.0 - cfg.validation_fraction, 0.0, cfg.optimizer.seed);
            let (fit_part, _, held_out) = split(&train, &spec)?;
            train = fit_part;
            Some(held_out)
        }
        None => None,
    };
    train.require_both_classes()?;

    let stats = fit_stats(&train, cfg.subsample_stats, cfg.optimizer.seed)?;
    stats.save(out.join("stats.json"))?;

    let (state, result, grid_lines) = match (&validation, cfg.lambdas.as_slice()) {
        (Some(val), lambdas) if lambdas.len() > 1 => {
            let g = grid_search_lambda(
                &train,
                val,
                &stats,
                lambdas,
                &cfg.sizes,
                &cfg.estimator,
                &cfg.optimizer,
                &cfg.logreg,
            )?;
            let mut lines = String::from("lambda,mean_validation_auc,error\n");
            for e in &g.evaluations {
                let auc = e.mean_auc.map(|x| x.to_string()).unwrap_or_default();
                let err = e.error.as_deref().unwrap_or("").replace(',', ";");
                let _ = writeln!(lines, "{},{},{}", e.lambda, auc, err);
            }
            (g.state, g.result, Some(lines))
        }
        (_, lambdas) => {
            let lambda = lambdas[0];
            let mut state = match &cfg.resume {
                Some(path) => {
                    let s = load_checkpoint(path)?;
                    if s.lambda != lambda {
                        return Err(Error::Config(format!(
                            "--resume: checkpoint was trained with lambda {}, not {lambda}",
                            s.lambda
                        )));
                    }
                    s
                }
                None => SelectionState::new(train.n_features(), lambda),
            };
            fit_from(&mut state, &train, &stats, &cfg.estimator, &cfg.optimizer)?;
            let result = rank_features(&state, &cfg.sizes);
            (state, result, None)
        }
    };

    write_trace(&state, out.join("trace.csv"))?;
    save_checkpoint(&state, out.join("checkpoint.json"))?;
    result.write_report("featgrad", out.join("selection.json"))?;
    result.write_subsets(out.join("subsets.txt"))?;
    write_ranking(
        &result.ranking,
        "featgrad",
        train.n_features(),
        out.join("ranking.txt"),
    )?;
    if let Some(lines) = grid_lines {
        write_file(&out.join("grid.csv"), &lines)?;
    }
    println!(
        "selected with lambda {} after {} steps ({:?}); outputs in {}",
        state.lambda,
        state.step,
        state.stop_reason,
        out.display()
    );
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (train, test) = load_pair(
        &source(&a.train, &a.data_args),
        &source(&a.test, &a.data_args),
    )?;
    let cfg = LogRegConfig {
        mode: match a.mode {
            Mode::Batch => LogRegMode::Batch,
            Mode::Sgd => LogRegMode::Sgd,
        },
        l2: a.l2,
        seed: a.seed,
        ..Default::default()
    };
    let ranking = read_ranking(&a.ranking)?;
    let report = evaluate_selector(
        &label_of(&a.ranking),
        &ranking,
        &a.sizes,
        &train,
        &test,
        &cfg,
    )?;
    let mut csv = report.to_csv();
    if let Some(other) = &a.compare {
        let ranking_b = read_ranking(other)?;
        let report_b =
            evaluate_selector(&label_of(other), &ranking_b, &a.sizes, &train, &test, &cfg)?;
        csv.push_str(
            report_b
                .to_csv()
                .split_once('\n')
                .map_or("", |(_, rows)| rows),
        );
        let t = paired_ttest(&report.aucs, &report_b.aucs)?;
        println!(
            "paired t-test: t = {:.6}, p = {:.6}, df = {}",
            t.t, t.p_value, t.df
        );
    }
    write_file(&a.out, &csv)?;
    print!("{csv}");
    Ok(())
}

/// Selector name from the ranking file header, falling back to the file stem.
fn label_of(path: &Path) -> String {
    fs::read_to_string(path)
        .ok()
        .and_then(|text| {
            text.lines()
                .find_map(|l| l.strip_prefix("# selector:").map(|s| s.trim().to_string()))
        })
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    let ds = load(&source(&a.data, &a.data_args))?;
    let (name, scores) = match a.method {
        Method::Anova => ("anova", anova_f_scores(&ds)?),
        Method::Mi => {
            if a.bins < 2 {
                return Err(Error::Config("--bins must be at least 2".into()));
            }
            ("mi", mutual_info_scores(&ds, a.bins)?)
        }
    };
    let ranking = rank_indices(&scores);
    write_ranking(&ranking, name, ds.n_features(), &a.out)?;
    let head = rank_scores(scores, &[10], None)
        .subsets
        .into_values()
        .next()
        .unwrap_or_default();
    println!(
        "{name}: top features {head:?}; ranking in {}",
        a.out.display()
    );
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_rows: a.n,
        n_features: a.d,
        support_size: a.support,
        noise_std: a.noise,
        feature_correlation: a.correlation,
        seed: a.seed,
    };
    let (ds, support) = generate_synthetic(&spec)?;
    create_dir(&a.out_dir)?;
    let data_path: PathBuf = match a.format {
        Format::Svmlight => {
            let p = a.out_dir.join("data.svm");
            write_svmlight(&ds, &p)?;
            p
        }
        Format::Csv => {
            let p = a.out_dir.join("data.csv");
            write_csv(&ds, &p)?;
            p
        }
    };
    let mut text = String::new();
    for j in &support {
        let _ = writeln!(text, "{j}");
    }
    write_file(&a.out_dir.join("support.txt"), &text)?;
    write_file(
        &a.out_dir.join("spec.json"),
        &serde_json::to_string_pretty(&spec)?,
    )?;
    println!(
        "wrote {} rows x {} features to {}; true residual variance {:.6}",
        ds.n_rows(),
        ds.n_features(),
        data_path.display(),
        spec.true_residual_variance()
    );
    Ok(())
}
