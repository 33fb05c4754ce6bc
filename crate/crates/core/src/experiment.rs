//! Experiment orchestration: the retraining protocol (methods x stream
//! stages x replicates), its flat key=value config format, report
//! aggregation, and JSON/CSV emission.
//!
//! A run trains three generations of each method on the nested stream stages
//! with replicate-derived seeds, predicts on the shared test set under every
//! configured combiner, reduces each generation triple with the pairwise
//! averaging protocol, and aggregates replicate means and standard
//! deviations. Reports carry a deterministic relative training cost per
//! method (training work in epoch-rows relative to a single base training)
//! so identical seeds produce byte-identical reports; wall-clock timings are
//! returned alongside, outside the serialized report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::data::{
    load_stream, make_stream, make_synthetic, round_half_up, ImbalanceSpec, LabeledDataset,
    StreamDataset,
};
use crate::ensemble::{
    combine_matrices, combine_predictions, dynsnap_train, ext_bagging_train, single_base_train,
    snapshot_baseline_train, Combiner, DynSnapConfig, DynSnapVariant, EnsembleLearner, PruneFactor,
    TrainerProfile,
};
use crate::error::{Error, Result};
use crate::metrics::{pairwise_average_report, AveragedReport, LabelVector, PredictionMatrix};
use crate::net::{mc_dropout_predict, NetConfig, NetParams};
use crate::rng::derive_seed;

/// The compared training methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    SingleBase,
    ExtBagging,
    McDropout,
    Snapshot,
    DynSnapCyc,
    DynSnapStep,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::SingleBase,
        Method::ExtBagging,
        Method::McDropout,
        Method::Snapshot,
        Method::DynSnapCyc,
        Method::DynSnapStep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SingleBase => "SingleBase",
            Method::ExtBagging => "ExtBagging",
            Method::McDropout => "MCDropout",
            Method::Snapshot => "Snapshot",
            Method::DynSnapCyc => "DynSnap-cyc",
            Method::DynSnapStep => "DynSnap-step",
        }
    }

    pub fn parse(token: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == token)
            .ok_or_else(|| Error::invalid_argument(format!("unknown method `{token}`")))
    }

    /// Stable id used in seed derivation; independent of config order.
    fn stable_id(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the stream comes from: generated on the fly or loaded from a
/// manifest written by `gen-data`.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamSource {
    Synthetic {
        classes: usize,
        feature_dims: usize,
        per_class: usize,
        separation: f64,
        imbalance: ImbalanceSpec,
    },
    Path(PathBuf),
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stream: StreamSource,
    pub methods: Vec<Method>,
    pub combiners: Vec<Combiner>,
    /// Ensemble size `m` (also the Monte Carlo dropout pass count).
    pub ensemble_size: usize,
    /// Snapshots per training cycle `N`.
    pub snapshots_per_cycle: usize,
    pub beta: PruneFactor,
    /// Epochs per training run `T`.
    pub epochs: usize,
    pub alpha0: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub hidden_dims: Vec<usize>,
    pub weight_init_scale: f64,
    /// Dropout probability of the Monte Carlo dropout method's base model.
    pub dropout_prob: f64,
    /// Step-decay milestones as `(fraction of T, multiplier)`.
    pub step_milestone_fracs: Vec<(f64, f64)>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Top-k levels for the coarse metrics.
    pub ks: Vec<usize>,
    pub valid_fraction: f64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    /// The desk-scale profile: a 5-class synthetic stream with one class
    /// absent before the third stage, sized to run in minutes on one core.
    fn default() -> Self {
        ExperimentConfig {
            stream: StreamSource::Synthetic {
                classes: 5,
                feature_dims: 10,
                per_class: 400,
                separation: 2.0,
                imbalance: default_imbalance(),
            },
            methods: Method::ALL.to_vec(),
            combiners: Combiner::ALL.to_vec(),
            ensemble_size: 10,
            snapshots_per_cycle: 5,
            beta: PruneFactor::Ideal,
            epochs: 50,
            alpha0: 0.05,
            momentum: 0.9,
            batch_size: 32,
            hidden_dims: vec![16],
            weight_init_scale: 0.3,
            dropout_prob: 0.1,
            step_milestone_fracs: vec![(0.4, 1e-1), (0.6, 1e-2), (0.8, 1e-3)],
            replicates: 5,
            master_seed: 20250811,
            ks: vec![1, 2],
            valid_fraction: 1.0 / 6.0,
            workers: 1,
        }
    }
}

fn default_imbalance() -> ImbalanceSpec {
    ImbalanceSpec {
        keep_fractions: vec![0.75, 0.6, 0.5, 0.4, 0.6],
        growth: (0.8, 1.0),
        held_out: Some(4),
        eval_per_class: 50,
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("method list must be non-empty".into()));
        }
        if self.combiners.is_empty() {
            return Err(Error::InvalidConfig("combiner list must be non-empty".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("need at least one replicate".into()));
        }
        if self.ensemble_size < 1 || self.snapshots_per_cycle < 1 {
            return Err(Error::InvalidConfig("need m >= 1 and N >= 1".into()));
        }
        if self.ks.is_empty() {
            return Err(Error::InvalidConfig("need at least one top-k level".into()));
        }
        self.net_config(0.0).validate()?;
        Ok(())
    }

    fn net_config(&self, dropout: f64) -> NetConfig {
        NetConfig {
            input_dim: match &self.stream {
                StreamSource::Synthetic { feature_dims, .. } => *feature_dims,
                StreamSource::Path(_) => 1, // replaced once the stream is loaded
            },
            hidden_dims: self.hidden_dims.clone(),
            num_classes: match &self.stream {
                StreamSource::Synthetic { classes, .. } => *classes,
                StreamSource::Path(_) => 2, // replaced once the stream is loaded
            },
            dropout_prob: dropout,
            weight_init_scale: self.weight_init_scale,
            seed: 0,
            batch_size: self.batch_size,
            momentum: self.momentum,
        }
    }

    /// Builds or loads the stream this experiment runs on.
    pub fn build_stream(&self) -> Result<StreamDataset> {
        match &self.stream {
            StreamSource::Synthetic { classes, feature_dims, per_class, separation, imbalance } => {
                let full = make_synthetic(
                    *classes,
                    *feature_dims,
                    *per_class,
                    *separation,
                    derive_seed(self.master_seed, &[SEED_STREAM, 0]),
                )?;
                make_stream(&full, imbalance, derive_seed(self.master_seed, &[SEED_STREAM, 1]))
            }
            StreamSource::Path(path) => load_stream(path),
        }
    }
}

const SEED_STREAM: u64 = 0;
const SEED_CELL: u64 = 1;
const SEED_MC: u64 = 2;

/// Seed for the training of one (replicate, method, stage) cell.
pub fn cell_seed(master: u64, replicate: usize, method: Method, stage: usize) -> u64 {
    derive_seed(master, &[SEED_CELL, replicate as u64, method.stable_id(), stage as u64])
}

/// Mean and sample standard deviation over replicates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub sd: f64,
}

fn stats_of(values: &[f64]) -> MetricStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MetricStats { mean, sd }
}

/// Replicate-aggregated metrics of one method.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MethodReport {
    /// Training work relative to a single base training; 1 for SingleBase
    /// by construction.
    pub relative_cost: f64,
    /// Replicates excluded because training diverged.
    pub failed_replicates: u64,
    /// combiner name -> metric name -> stats.
    pub combiners: BTreeMap<String, BTreeMap<String, MetricStats>>,
}

/// The serialized outcome of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub replicates: usize,
    pub ks: Vec<usize>,
    pub methods: BTreeMap<String, MethodReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(0, format!("bad report JSON: {e}")))
    }

    /// One `method,combiner,metric,mean,sd` row per metric, plus per-method
    /// `relative_cost` and `failed_replicates` rows under combiner `-`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,combiner,metric,mean,sd\n");
        for (method, report) in &self.methods {
            out.push_str(&format!("{method},-,relative_cost,{},0\n", format_float(report.relative_cost)));
            out.push_str(&format!("{method},-,failed_replicates,{},0\n", report.failed_replicates));
            for (combiner, metrics) in &report.combiners {
                for (metric, stats) in metrics {
                    out.push_str(&format!(
                        "{method},{combiner},{metric},{},{}\n",
                        format_float(stats.mean),
                        format_float(stats.sd)
                    ));
                }
            }
        }
        out
    }

    pub fn metric(&self, method: Method, combiner: Combiner, name: &str) -> Option<MetricStats> {
        self.methods
            .get(method.name())?
            .combiners
            .get(combiner.name())?
            .get(name)
            .copied()
    }
}

fn format_float(v: f64) -> String {
    // serde_json's shortest-round-trip float formatting, for CSV/JSON parity.
    serde_json::Number::from_f64(v).map_or_else(|| v.to_string(), |n| n.to_string())
}

/// In-memory outcome: the deterministic report plus measured wall-clock
/// training seconds per method (not serialized).
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub wall_seconds: BTreeMap<String, f64>,
}

/// One generation's trained model for prediction purposes.
enum StageModel {
    Ensemble(EnsembleLearner),
    McDropout { params: NetParams, weight: f64, passes: usize, seed: u64 },
}

impl StageModel {
    fn predict(&self, inputs: &[Vec<f64>], combiner: Combiner) -> Result<PredictionMatrix> {
        match self {
            StageModel::Ensemble(ensemble) => {
                combine_predictions(&ensemble.with_combiner(combiner), inputs)
            }
            StageModel::McDropout { params, weight, passes, seed } => {
                let averaged = mc_dropout_predict(params, inputs, *passes, *seed)?;
                combine_matrices(&[averaged], &[*weight], combiner)
            }
        }
    }
}

/// Train rows after the stratified validation split, for work accounting.
fn split_train_rows(data: &LabeledDataset, valid_fraction: f64) -> usize {
    let valid: usize = data
        .class_histogram()
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| round_half_up(valid_fraction * n as f64).clamp(1, n - 1))
        .sum();
    data.len() - valid
}

struct StageOutcome {
    model: StageModel,
    work_units: f64,
}

fn train_stage(
    cfg: &ExperimentConfig,
    method: Method,
    data: &LabeledDataset,
    input_dim: usize,
    classes: usize,
    seed: u64,
) -> Result<StageOutcome> {
    let mut net = cfg.net_config(if method == Method::McDropout { cfg.dropout_prob } else { 0.0 });
    net.input_dim = input_dim;
    net.num_classes = classes;
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
        net: net.clone(),
        valid_fraction: cfg.valid_fraction,
        max_cycle_factor: 10,
    };

    let rows = split_train_rows(data, cfg.valid_fraction) as f64;
    let epoch_units = |epochs: f64| epochs * rows;
    let window = cfg.epochs.div_ceil(cfg.snapshots_per_cycle.min(cfg.epochs));

    let outcome = match method {
        Method::SingleBase => StageOutcome {
            model: StageModel::Ensemble(single_base_train(&profile, data, seed)?),
            work_units: epoch_units(cfg.epochs as f64),
        },
        Method::ExtBagging => StageOutcome {
            model: StageModel::Ensemble(ext_bagging_train(&profile, data, cfg.ensemble_size, seed)?),
            work_units: epoch_units((cfg.ensemble_size * cfg.epochs) as f64),
        },
        Method::McDropout => {
            let learner = single_base_train(&profile, data, seed)?;
            let member = &learner.members[0];
            StageOutcome {
                model: StageModel::McDropout {
                    params: member.params.clone(),
                    weight: member.weight,
                    passes: cfg.ensemble_size,
                    seed: derive_seed(seed, &[SEED_MC]),
                },
                work_units: epoch_units(cfg.epochs as f64),
            }
        }
        Method::Snapshot => {
            let out = snapshot_baseline_train(&dyn_cfg(DynSnapVariant::Cyclic), data, cfg.ensemble_size, seed)?;
            StageOutcome {
                model: StageModel::Ensemble(out.ensemble),
                work_units: epoch_units((window * cfg.ensemble_size) as f64),
            }
        }
        Method::DynSnapCyc | Method::DynSnapStep => {
            let variant = if method == Method::DynSnapCyc {
                DynSnapVariant::Cyclic
            } else {
                DynSnapVariant::Step
            };
            let out = dynsnap_train(&dyn_cfg(variant), data, seed)?;
            let cycles = out.cycles.len() as f64;
            StageOutcome {
                model: StageModel::Ensemble(out.ensemble),
                work_units: epoch_units(cycles * cfg.epochs as f64),
            }
        }
    };
    Ok(outcome)
}

struct CellOutcome {
    method: Method,
    diverged: bool,
    work_units: f64,
    wall_seconds: f64,
    /// combiner name -> averaged three-generation report.
    per_combiner: BTreeMap<String, AveragedReport>,
}

fn run_cell(
    cfg: &ExperimentConfig,
    stream: &StreamDataset,
    test_labels: &LabelVector,
    replicate: usize,
    method: Method,
) -> Result<CellOutcome> {
    let input_dim = stream.d1.dim();
    let classes = stream.d1.class_count();
    let started = Instant::now();
    let mut work_units = 0.0;
    let mut models = Vec::with_capacity(3);
    for (stage_idx, stage_data) in stream.stages().into_iter().enumerate() {
        let seed = cell_seed(cfg.master_seed, replicate, method, stage_idx);
        match train_stage(cfg, method, stage_data, input_dim, classes, seed) {
            Ok(outcome) => {
                work_units += outcome.work_units;
                models.push(outcome.model);
            }
            Err(Error::TrainingDiverged { .. }) => {
                return Ok(CellOutcome {
                    method,
                    diverged: true,
                    work_units,
                    wall_seconds: started.elapsed().as_secs_f64(),
                    per_combiner: BTreeMap::new(),
                });
            }
            Err(other) => return Err(other),
        }
    }

    let mut per_combiner = BTreeMap::new();
    for &combiner in &cfg.combiners {
        let predictions = models
            .iter()
            .map(|m| m.predict(stream.test.features(), combiner))
            .collect::<Result<Vec<_>>>()?;
        let report = pairwise_average_report(&predictions, test_labels, &cfg.ks)?;
        per_combiner.insert(combiner.name().to_string(), report);
    }
    Ok(CellOutcome {
        method,
        diverged: false,
        work_units,
        wall_seconds: started.elapsed().as_secs_f64(),
        per_combiner,
    })
}

fn flatten_report(report: &AveragedReport) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    map.insert("acc".to_string(), report.acc);
    map.insert("con".to_string(), report.con);
    map.insert("acc_con".to_string(), report.acc_con);
    for (&k, &v) in &report.ccon_k {
        map.insert(format!("ccon_{k}"), v);
    }
    for (&k, &v) in &report.cacc_k {
        map.insert(format!("cacc_{k}"), v);
    }
    map.insert("pearson".to_string(), report.pearson);
    map.insert("cosine".to_string(), report.cosine);
    for (stats, suffix) in report.transitions.iter().zip(["12", "23", "13"]) {
        map.insert(format!("cto_c_{suffix}"), stats.cto_c);
        map.insert(format!("cto_i_{suffix}"), stats.cto_i);
        map.insert(format!("ito_c_{suffix}"), stats.ito_c);
        map.insert(format!("ito_i_{suffix}"), stats.ito_i);
        map.insert(format!("com_{suffix}"), stats.com);
    }
    map
}

/// Runs the full protocol described by `cfg`.
///
/// Cells of the (replicate x method) grid are independent jobs executed by
/// `cfg.workers` threads; the reduction iterates cells in a fixed order, so
/// the report does not depend on scheduling. A diverged training marks its
/// cell failed and excluded rather than aborting the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let stream = cfg.build_stream()?;
    if stream.test.is_empty() {
        return Err(Error::InvalidConfig("experiment stream has no test rows".into()));
    }
    let test_labels = LabelVector::new(stream.test.labels().to_vec())?;

    let jobs: Vec<(usize, Method)> = (0..cfg.replicates)
        .flat_map(|r| cfg.methods.iter().map(move |&m| (r, m)))
        .collect();
    let outcomes: Vec<Option<CellOutcome>> = {
        let slots: Mutex<Vec<Option<CellOutcome>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let first_error: Mutex<Option<Error>> = Mutex::new(None);
        let workers = cfg.workers.max(1).min(jobs.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let index = next.fetch_add(1, Ordering::Relaxed);
                    if index >= jobs.len() {
                        break;
                    }
                    let (replicate, method) = jobs[index];
                    match run_cell(cfg, &stream, &test_labels, replicate, method) {
                        Ok(outcome) => {
                            slots.lock().expect("slots lock")[index] = Some(outcome);
                        }
                        Err(err) => {
                            let mut guard = first_error.lock().expect("error lock");
                            if guard.is_none() {
                                *guard = Some(err);
                            }
                            break;
                        }
                    }
                });
            }
        });
        if let Some(err) = first_error.lock().expect("error lock").take() {
            return Err(err);
        }
        slots.into_inner().expect("slots")
    };

    // A single base training of every stage, the cost unit.
    let base_units: f64 = cfg.replicates as f64
        * stream
            .stages()
            .iter()
            .map(|d| cfg.epochs as f64 * split_train_rows(d, cfg.valid_fraction) as f64)
            .sum::<f64>();

    let mut method_units: BTreeMap<String, f64> = BTreeMap::new();
    let mut wall_seconds: BTreeMap<String, f64> = BTreeMap::new();
    let mut failures: BTreeMap<String, u64> = BTreeMap::new();
    let mut samples: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for outcome in outcomes.iter().flatten() {
        let method = outcome.method.name().to_string();
        *method_units.entry(method.clone()).or_insert(0.0) += outcome.work_units;
        *wall_seconds.entry(method.clone()).or_insert(0.0) += outcome.wall_seconds;
        if outcome.diverged {
            *failures.entry(method.clone()).or_insert(0) += 1;
            continue;
        }
        failures.entry(method.clone()).or_insert(0);
        for (combiner, report) in &outcome.per_combiner {
            for (metric, value) in flatten_report(report) {
                samples
                    .entry((method.clone(), combiner.clone(), metric))
                    .or_default()
                    .push(value);
            }
        }
    }

    let mut methods = BTreeMap::new();
    for &method in &cfg.methods {
        let name = method.name().to_string();
        let mut combiners: BTreeMap<String, BTreeMap<String, MetricStats>> = BTreeMap::new();
        for ((m, combiner, metric), values) in &samples {
            if m == &name {
                combiners
                    .entry(combiner.clone())
                    .or_default()
                    .insert(metric.clone(), stats_of(values));
            }
        }
        methods.insert(
            name.clone(),
            MethodReport {
                relative_cost: method_units.get(&name).copied().unwrap_or(0.0) / base_units,
                failed_replicates: failures.get(&name).copied().unwrap_or(0),
                combiners,
            },
        );
    }

    Ok(ExperimentRun {
        report: ExperimentReport {
            master_seed: cfg.master_seed,
            replicates: cfg.replicates,
            ks: cfg.ks.clone(),
            methods,
        },
        wall_seconds,
    })
}

/// A hyper-parameter dimension the sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDimension {
    /// Ensemble size `m`.
    EnsembleSize,
    /// Prune factor `beta`.
    Beta,
    /// Snapshots per cycle `N`.
    Snapshots,
    /// Snapshot window size `T/N` (varies `T` at fixed `N`).
    Window,
}

impl SweepDimension {
    pub fn parse(token: &str) -> Result<SweepDimension> {
        match token {
            "m" => Ok(SweepDimension::EnsembleSize),
            "beta" => Ok(SweepDimension::Beta),
            "n" => Ok(SweepDimension::Snapshots),
            "window" => Ok(SweepDimension::Window),
            other => Err(Error::invalid_argument(format!(
                "unknown sweep dimension `{other}` (expected m, beta, n, window)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepDimension::EnsembleSize => "m",
            SweepDimension::Beta => "beta",
            SweepDimension::Snapshots => "n",
            SweepDimension::Window => "window",
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<usize> {
            if v < 1.0 || v.fract() != 0.0 {
                return Err(Error::invalid_argument(format!("{} must be a positive integer, got {v}", self.name())));
            }
            Ok(v as usize)
        };
        match self {
            SweepDimension::EnsembleSize => cfg.ensemble_size = as_count(value)?,
            SweepDimension::Beta => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::invalid_argument(format!("beta {value} outside [0, 1]")));
                }
                cfg.beta = PruneFactor::Fixed(value);
            }
            SweepDimension::Snapshots => cfg.snapshots_per_cycle = as_count(value)?,
            SweepDimension::Window => cfg.epochs = as_count(value)? * cfg.snapshots_per_cycle,
        }
        Ok(())
    }
}

/// One swept value and its full experiment report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepReport {
    pub dimension: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("sweep serializes");
        text.push('\n');
        text
    }

    /// Plot-ready columnar rows: `dimension,value,method,combiner,metric,mean,sd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dimension,value,method,combiner,metric,mean,sd\n");
        for entry in &self.entries {
            for (method, report) in &entry.report.methods {
                for (combiner, metrics) in &report.combiners {
                    for (metric, stats) in metrics {
                        out.push_str(&format!(
                            "{},{},{method},{combiner},{metric},{},{}\n",
                            self.dimension,
                            format_float(entry.value),
                            format_float(stats.mean),
                            format_float(stats.sd)
                        ));
                    }
                }
            }
        }
        out
    }
}

/// Runs one experiment per swept value.
pub fn sensitivity_sweep(
    cfg: &ExperimentConfig,
    dimension: SweepDimension,
    values: &[f64],
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::invalid_argument("sweep needs at least one value"));
    }
    let mut entries = Vec::with_capacity(values.len());
    for &value in values {
        let mut swept = cfg.clone();
        dimension.apply(&mut swept, value)?;
        let run = run_experiment(&swept)?;
        entries.push(SweepEntry { value, report: run.report });
    }
    Ok(SweepReport { dimension: dimension.name().to_string(), entries })
}

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(token: &str) -> Result<ReportFormat> {
        match token {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid_argument(format!("unknown format `{other}`"))),
        }
    }
}

/// Writes a report to `path` with stable field ordering.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

// --- config file parsing -------------------------------------------------

fn parse_list<T, F>(value: &str, line: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|tok| f(tok).map_err(|e| Error::parse(line, e.to_string())))
        .collect()
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::invalid_argument(format!("bad number `{tok}`")))
}

fn parse_usize(tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::invalid_argument(format!("bad integer `{tok}`")))
}

/// Parses the flat `key = value` experiment config format. Lists are
/// comma-separated; `#` starts a comment; unknown keys are errors. Keys not
/// present keep their desk-scale defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut synthetic = match &cfg.stream {
        StreamSource::Synthetic { classes, feature_dims, per_class, separation, imbalance } => (
            *classes,
            *feature_dims,
            *per_class,
            *separation,
            imbalance.clone(),
        ),
        StreamSource::Path(_) => unreachable!("default stream is synthetic"),
    };
    let mut stream_path: Option<PathBuf> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "classes" => synthetic.0 = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "feature_dims" => synthetic.1 = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "per_class" => synthetic.2 = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "separation" => synthetic.3 = parse_f64(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "keep_fractions" => synthetic.4.keep_fractions = parse_list(value, line_no, parse_f64)?,
            "growth" => {
                let parts = parse_list(value, line_no, parse_f64)?;
                if parts.len() != 2 {
                    return Err(Error::parse(line_no, "growth needs exactly two fractions"));
                }
                synthetic.4.growth = (parts[0], parts[1]);
            }
            "held_out_class" => {
                synthetic.4.held_out = if value == "none" {
                    None
                } else {
                    Some(parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?)
                };
            }
            "eval_per_class" => {
                synthetic.4.eval_per_class =
                    parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?
            }
            "stream_path" => {
                stream_path = if value.is_empty() { None } else { Some(PathBuf::from(value)) };
            }
            "methods" => cfg.methods = parse_list(value, line_no, Method::parse)?,
            "combiners" => cfg.combiners = parse_list(value, line_no, Combiner::parse)?,
            "ensemble_size" => cfg.ensemble_size = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "snapshots_per_cycle" => cfg.snapshots_per_cycle = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "beta" => cfg.beta = PruneFactor::parse(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "epochs" => cfg.epochs = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "alpha0" => cfg.alpha0 = parse_f64(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "momentum" => cfg.momentum = parse_f64(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "batch_size" => cfg.batch_size = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "hidden_dims" => cfg.hidden_dims = parse_list(value, line_no, parse_usize)?,
            "weight_init_scale" => cfg.weight_init_scale = parse_f64(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "dropout_prob" => cfg.dropout_prob = parse_f64(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "step_milestones" => {
                cfg.step_milestone_fracs = parse_list(value, line_no, |tok| {
                    let (frac, mult) = tok
                        .split_once(':')
                        .ok_or_else(|| Error::invalid_argument(format!("expected `frac:mult`, got `{tok}`")))?;
                    Ok((parse_f64(frac.trim())?, parse_f64(mult.trim())?))
                })?;
            }
            "replicates" => cfg.replicates = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "seed" => {
                cfg.master_seed = value
                    .parse::<u64>()
                    .map_err(|_| Error::parse(line_no, format!("bad seed `{value}`")))?
            }
            "ks" => cfg.ks = parse_list(value, line_no, parse_usize)?,
            "valid_fraction" => cfg.valid_fraction = parse_f64(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            "workers" => cfg.workers = parse_usize(value).map_err(|e| Error::parse(line_no, e.to_string()))?,
            other => return Err(Error::parse(line_no, format!("unknown config key `{other}`"))),
        }
    }

    cfg.stream = match stream_path {
        Some(path) => StreamSource::Path(path),
        None => StreamSource::Synthetic {
            classes: synthetic.0,
            feature_dims: synthetic.1,
            per_class: synthetic.2,
            separation: synthetic.3,
            imbalance: synthetic.4,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
