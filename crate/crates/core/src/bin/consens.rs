//! Command-line front end: dataset generation, training, evaluation, the
//! full experiment protocol, sensitivity sweeps, bound verification, and
//! report conversion. All artifacts land under `--out` in `datasets/`,
//! `snapshots/`, and `reports/`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use consens::bounds::{monte_carlo_suite, SuiteConfig};
use consens::data::{load_csv, save_stream};
use consens::ensemble::{
    combine_predictions, dynsnap_train, ext_bagging_train, save_ensemble, single_base_train,
    snapshot_baseline_train, Combiner, DynSnapConfig, DynSnapVariant, EnsembleLearner,
    TrainerProfile,
};
use consens::error::{Error, Result};
use consens::experiment::{
    emit_report, load_config, run_experiment, sensitivity_sweep, ExperimentConfig,
    ExperimentReport, Method, ReportFormat, SweepDimension,
};
use consens::metrics::{pair_report, LabelVector, PredictionMatrix};

#[derive(Parser)]
#[command(
    name = "consens",
    version,
    about = "Consistency analysis for retrained classifiers with dynamic snapshot ensembles"
)]
struct Cli {
    /// Master seed; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for generated artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Experiment config file (flat `key = value`); defaults apply otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured stream datasets under <out>/datasets/.
    GenData,
    /// Train one method on a dataset CSV and save its ensemble.
    Train {
        /// SingleBase, ExtBagging, MCDropout, Snapshot, DynSnap-cyc, DynSnap-step.
        #[arg(long)]
        method: String,
        /// Training dataset CSV.
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict with a saved ensemble, or compare two prediction files.
    Evaluate {
        /// Ensemble manifest (or its directory); needs --data.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Dataset CSV to predict on.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Combiner applied at prediction time.
        #[arg(long, default_value = "AVG")]
        combiner: String,
        /// Where to write the prediction matrix (default <out>/reports/predictions.txt).
        #[arg(long)]
        pred_out: Option<PathBuf>,
        /// First prediction-matrix file for pairwise metrics.
        #[arg(long)]
        pred_a: Option<PathBuf>,
        /// Second prediction-matrix file for pairwise metrics.
        #[arg(long)]
        pred_b: Option<PathBuf>,
        /// Label file (one class index per line) for pairwise metrics.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Comma-separated top-k levels.
        #[arg(long, default_value = "1,2")]
        ks: String,
    },
    /// Run the full experiment protocol; writes JSON and CSV reports.
    Run,
    /// Run one experiment per value of a swept hyper-parameter.
    Sweep {
        /// m, beta, n, or window.
        #[arg(long)]
        dimension: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Monte Carlo verification of the ensemble consistency bounds.
    VerifyTheorems {
        /// Trials for the Euclidean checks.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Trials per Minkowski order.
        #[arg(long, default_value_t = 10_000)]
        minkowski_trials: u64,
    },
    /// Convert a JSON experiment report to another format.
    Report {
        /// Report JSON produced by `run`.
        #[arg(long)]
        input: PathBuf,
        /// json or csv.
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            let kind = match &err {
                Error::InvalidArgument(_) => "invalid_argument",
                Error::InvalidConfig(_) => "invalid_config",
                Error::InvalidState(_) => "invalid_state",
                Error::Parse { .. } => "parse",
                Error::TrainingDiverged { .. } => "training_diverged",
                Error::CannotFillEnsemble(_) => "cannot_fill_ensemble",
                Error::Io(_) => "io",
            };
            let payload = serde_json::json!({ "error": err.to_string(), "kind": kind });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn effective_config(cli_config: &Option<PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match cli_config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn reports_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.join("reports");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn parse_ks(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::invalid_argument(format!("bad k `{tok}`")))
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let cfg = effective_config(&cli.config, cli.seed)?;
    match cli.command {
        Command::GenData => {
            let stream = cfg.build_stream()?;
            let dir = cli.out.join("datasets");
            save_stream(&stream, &dir)?;
            println!(
                "wrote stream to {} (|D1|={}, |D2|={}, |D3|={}, validation={}, test={})",
                dir.display(),
                stream.d1.len(),
                stream.d2.len(),
                stream.d3.len(),
                stream.validation.len(),
                stream.test.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { method, data } => {
            let method = Method::parse(&method)?;
            let dataset = load_csv(&data)?;
            let ensemble = train_one(&cfg, method, &dataset)?;
            let dir = cli.out.join("snapshots").join(method.name());
            save_ensemble(&ensemble, &dir)?;
            println!(
                "trained {} ({} member(s), weights {:?}); ensemble at {}",
                method,
                ensemble.len(),
                ensemble.weights(),
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { ensemble, data, combiner, pred_out, pred_a, pred_b, labels, ks } => {
            match (ensemble, pred_a, pred_b) {
                (Some(manifest), None, None) => {
                    let data_path = data.ok_or_else(|| {
                        Error::invalid_argument("evaluate with --ensemble needs --data")
                    })?;
                    let dataset = load_csv(&data_path)?;
                    let learner = consens::ensemble::load_ensemble(&manifest)?
                        .with_combiner(Combiner::parse(&combiner)?);
                    let predictions = combine_predictions(&learner, dataset.features())?;
                    let out_path = match pred_out {
                        Some(path) => path,
                        None => reports_dir(&cli.out)?.join("predictions.txt"),
                    };
                    predictions.save(&out_path)?;
                    let label_vec = LabelVector::new(dataset.labels().to_vec())?;
                    let acc = consens::metrics::accuracy(&predictions, &label_vec)?;
                    println!("wrote {} rows to {}; accuracy {acc:.4}", predictions.n(), out_path.display());
                    Ok(ExitCode::SUCCESS)
                }
                (None, Some(a_path), Some(b_path)) => {
                    let labels_path = labels.ok_or_else(|| {
                        Error::invalid_argument("pairwise evaluate needs --labels")
                    })?;
                    let a = PredictionMatrix::load(&a_path)?;
                    let b = PredictionMatrix::load(&b_path)?;
                    let label_vec = LabelVector::load(&labels_path)?;
                    let ks = parse_ks(&ks)?;
                    let report = pair_report(&a, &b, &label_vec, &ks)?;
                    let flat = report.to_flat_map();
                    let json = serde_json::to_string_pretty(&flat).expect("flat map serializes");
                    let out_path = reports_dir(&cli.out)?.join("pair_report.json");
                    std::fs::write(&out_path, format!("{json}\n"))?;
                    println!("{json}");
                    Ok(ExitCode::SUCCESS)
                }
                _ => Err(Error::invalid_argument(
                    "evaluate needs either --ensemble with --data, or --pred-a/--pred-b/--labels",
                )),
            }
        }
        Command::Run => {
            let run = run_experiment(&cfg)?;
            let dir = reports_dir(&cli.out)?;
            emit_report(&run.report, ReportFormat::Json, &dir.join("report.json"))?;
            emit_report(&run.report, ReportFormat::Csv, &dir.join("report.csv"))?;
            for (method, report) in &run.report.methods {
                let wall = run.wall_seconds.get(method).copied().unwrap_or(0.0);
                println!(
                    "{method}: relative cost {:.2}, failed replicates {}, training wall {wall:.1}s",
                    report.relative_cost, report.failed_replicates
                );
            }
            println!("reports in {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { dimension, values } => {
            let dimension = SweepDimension::parse(&dimension)?;
            let values: Vec<f64> = values
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::invalid_argument(format!("bad sweep value `{tok}`")))
                })
                .collect::<Result<_>>()?;
            let sweep = sensitivity_sweep(&cfg, dimension, &values)?;
            let dir = reports_dir(&cli.out)?;
            let json_path = dir.join(format!("sweep_{}.json", sweep.dimension));
            let csv_path = dir.join(format!("sweep_{}.csv", sweep.dimension));
            std::fs::write(&json_path, sweep.to_json())?;
            std::fs::write(&csv_path, sweep.to_csv())?;
            println!("swept {} over {values:?}; reports in {}", sweep.dimension, dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyTheorems { trials, minkowski_trials } => {
            let suite = SuiteConfig {
                trials,
                minkowski_trials,
                seed: cfg.master_seed,
                ..SuiteConfig::default()
            };
            let report = monte_carlo_suite(&suite)?;
            let dir = reports_dir(&cli.out)?;
            std::fs::write(dir.join("bounds.json"), report.to_json())?;
            for (name, stats) in &report.checks {
                println!(
                    "{name}: trials {}, violations {}, min slack {:.3e}",
                    stats.trials, stats.violations, stats.min_slack
                );
            }
            if report.total_violations > 0 {
                println!("FAIL: {} violation(s) at tolerance {}", report.total_violations, report.tolerance);
                return Ok(ExitCode::from(2));
            }
            println!("all {} checked instances hold (tolerance {})", report.total_trials, report.tolerance);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input, format } => {
            let format = ReportFormat::parse(&format)?;
            let report = ExperimentReport::from_json(&std::fs::read_to_string(&input)?)?;
            let stem = input
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("report")
                .to_string();
            let extension = match format {
                ReportFormat::Json => "json",
                ReportFormat::Csv => "csv",
            };
            let out_path = reports_dir(&cli.out)?.join(format!("{stem}.{extension}"));
            emit_report(&report, format, &out_path)?;
            println!("wrote {}", out_path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Trains one method on a single dataset with the configured profile.
fn train_one(
    cfg: &ExperimentConfig,
    method: Method,
    data: &consens::data::LabeledDataset,
) -> Result<EnsembleLearner> {
    let seed = cfg.master_seed;
    let mut net = consens::net::NetConfig {
        input_dim: data.dim(),
        hidden_dims: cfg.hidden_dims.clone(),
        num_classes: data.class_count(),
        dropout_prob: 0.0,
        weight_init_scale: cfg.weight_init_scale,
        seed: 0,
        batch_size: cfg.batch_size,
        momentum: cfg.momentum,
    };
    if method == Method::McDropout {
        net.dropout_prob = cfg.dropout_prob;
    }
    let profile = TrainerProfile {
        net: net.clone(),
        epochs: cfg.epochs,
        alpha0: cfg.alpha0,
        milestone_fracs: cfg.step_milestone_fracs.clone(),
        valid_fraction: cfg.valid_fraction,
    };
    let dyn_cfg = |variant: DynSnapVariant| DynSnapConfig {
        variant,
        ensemble_size: cfg.ensemble_size,
        snapshots_per_cycle: cfg.snapshots_per_cycle,
        beta: cfg.beta,
        epochs: cfg.epochs,
        alpha0: cfg.alpha0,
        step_milestone_fracs: cfg.step_milestone_fracs.clone(),
        net,
        valid_fraction: cfg.valid_fraction,
        max_cycle_factor: 10,
    };
    Ok(match method {
        Method::SingleBase | Method::McDropout => single_base_train(&profile, data, seed)?,
        Method::ExtBagging => ext_bagging_train(&profile, data, cfg.ensemble_size, seed)?,
        Method::Snapshot => {
            snapshot_baseline_train(&dyn_cfg(DynSnapVariant::Cyclic), data, cfg.ensemble_size, seed)?
                .ensemble
        }
        Method::DynSnapCyc => dynsnap_train(&dyn_cfg(DynSnapVariant::Cyclic), data, seed)?.ensemble,
        Method::DynSnapStep => dynsnap_train(&dyn_cfg(DynSnapVariant::Step), data, seed)?.ensemble,
    })
}
