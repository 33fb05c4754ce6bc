//! Dynamic snapshot ensemble construction with validation-accuracy pruning,
//! the four output combiners, and the baseline ensemble trainers.
//!
//! The dynamic trainer repeats snapshot training cycles on resampled splits,
//! keeps only snapshots whose validation accuracy clears the prune threshold
//! `tau = (1-beta) * max(w) + beta * min(w)`, and stops once the ensemble
//! holds `m` members. The ideal prune factor sets `tau` to the cycle's mean
//! accuracy, so every admitted member is at least cycle-average.

use std::io::Write;
use std::path::Path;

use crate::data::{resample_train_valid, LabeledDataset};
use crate::error::{Error, Result};
use crate::metrics::PredictionMatrix;
use crate::net::{
    evaluate, forward, init_params, train_epoch, ForwardMode, NetConfig, NetParams, TrainState,
};
use crate::rng::{derive_seed, stream};
use crate::schedule::{
    cyclic_snapshot_select, topn_snapshot_select, CyclicCosineSchedule, EpochRecord, LrSchedule,
    StepDecaySchedule,
};
use crate::simplex::{argmax, centroid, weighted_centroid, SimplexVector};

/// How member predictions merge into the ensemble output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Combiner {
    MajorityVote,
    WeightedMajorityVote,
    Average,
    WeightedAverage,
}

impl Combiner {
    pub const ALL: [Combiner; 4] = [
        Combiner::MajorityVote,
        Combiner::WeightedMajorityVote,
        Combiner::Average,
        Combiner::WeightedAverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Combiner::MajorityVote => "MV",
            Combiner::WeightedMajorityVote => "WMV",
            Combiner::Average => "AVG",
            Combiner::WeightedAverage => "WAVG",
        }
    }

    pub fn parse(token: &str) -> Result<Combiner> {
        match token {
            "MV" => Ok(Combiner::MajorityVote),
            "WMV" => Ok(Combiner::WeightedMajorityVote),
            "AVG" => Ok(Combiner::Average),
            "WAVG" => Ok(Combiner::WeightedAverage),
            other => Err(Error::invalid_argument(format!("unknown combiner `{other}`"))),
        }
    }
}

impl std::fmt::Display for Combiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One harvested snapshot: parameters, its validation accuracy (used as the
/// member weight), and where it came from (training cycle, rank within the
/// cycle's sorted snapshot list). Provenance is training-time metadata and is
/// not serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotLearner {
    pub params: NetParams,
    pub weight: f64,
    pub cycle: usize,
    pub index: usize,
}

/// An ordered set of snapshot learners plus the combiner applied at
/// prediction time. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleLearner {
    pub members: Vec<SnapshotLearner>,
    pub combiner: Combiner,
}

impl EnsembleLearner {
    pub fn new(members: Vec<SnapshotLearner>, combiner: Combiner) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidState("ensemble has no members".into()));
        }
        Ok(EnsembleLearner { members, combiner })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    /// The same members under a different combiner.
    pub fn with_combiner(&self, combiner: Combiner) -> EnsembleLearner {
        EnsembleLearner { members: self.members.clone(), combiner }
    }
}

/// Prune factor: a fixed interpolation knob in `[0, 1]`, or the data-driven
/// ideal value that sets the threshold to the cycle's mean accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneFactor {
    Fixed(f64),
    Ideal,
}

impl PruneFactor {
    pub fn parse(token: &str) -> Result<PruneFactor> {
        if token == "ideal" {
            return Ok(PruneFactor::Ideal);
        }
        let value: f64 = token
            .parse()
            .map_err(|_| Error::invalid_argument(format!("bad prune factor `{token}`")))?;
        Ok(PruneFactor::Fixed(value))
    }
}

impl std::fmt::Display for PruneFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PruneFactor::Fixed(b) => write!(f, "{b}"),
            PruneFactor::Ideal => f.write_str("ideal"),
        }
    }
}

/// Prune threshold `tau = (1-beta) * max(w) + beta * min(w)`.
///
/// Evaluated as `max - beta * (max - min)` with pinned endpoints, which is
/// the same expression but keeps `tau` within `[min, max]` and monotone in
/// `beta` under floating point, so the kept set can never lose a member as
/// `beta` grows and the best snapshot always clears the threshold.
pub fn prune_threshold(weights: &[f64], beta: f64) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::invalid_argument("prune threshold needs at least one weight"));
    }
    if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
        return Err(Error::invalid_argument(format!("prune factor {beta} outside [0, 1]")));
    }
    let max = weights.iter().cloned().fold(f64::MIN, f64::max);
    let min = weights.iter().cloned().fold(f64::MAX, f64::min);
    if beta == 0.0 {
        return Ok(max);
    }
    if beta == 1.0 {
        return Ok(min);
    }
    Ok(max - beta * (max - min))
}

/// The prune factor that puts the threshold at the cycle's mean accuracy:
/// `(max(w) - mean(w)) / (max(w) - min(w))`, or 0 when all weights are equal.
pub fn ideal_beta(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::invalid_argument("ideal beta needs at least one weight"));
    }
    let max = weights.iter().cloned().fold(f64::MIN, f64::max);
    let min = weights.iter().cloned().fold(f64::MAX, f64::min);
    if max == min {
        return Ok(0.0);
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    Ok((max - mean) / (max - min))
}

/// Which snapshot-learning flavor a dynamic trainer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynSnapVariant {
    /// Cyclic cosine schedule with best-of-window snapshots.
    Cyclic,
    /// Step-decay schedule with global top-N snapshots.
    Step,
}

/// Configuration of the dynamic snapshot ensemble trainer.
#[derive(Debug, Clone)]
pub struct DynSnapConfig {
    pub variant: DynSnapVariant,
    /// Target ensemble size `m`.
    pub ensemble_size: usize,
    /// Snapshots harvested per training cycle `N`.
    pub snapshots_per_cycle: usize,
    pub beta: PruneFactor,
    /// Epochs per training cycle `T`.
    pub epochs: usize,
    pub alpha0: f64,
    /// Step-decay milestones as `(fraction of T, multiplier)`.
    pub step_milestone_fracs: Vec<(f64, f64)>,
    pub net: NetConfig,
    /// Fraction of the training data resampled into each cycle's validation
    /// split.
    pub valid_fraction: f64,
    /// Training aborts after `max_cycle_factor * ceil(m / N)` cycles.
    pub max_cycle_factor: usize,
}

impl DynSnapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 1 || self.snapshots_per_cycle < 1 {
            return Err(Error::InvalidConfig("need m >= 1 and N >= 1".into()));
        }
        if self.epochs < self.snapshots_per_cycle {
            return Err(Error::InvalidConfig("need epochs >= snapshots per cycle".into()));
        }
        if let PruneFactor::Fixed(b) = self.beta {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("prune factor {b} outside [0, 1]")));
            }
        }
        if !self.alpha0.is_finite() || self.alpha0 <= 0.0 {
            return Err(Error::InvalidConfig("alpha0 must be positive".into()));
        }
        if !(self.valid_fraction > 0.0 && self.valid_fraction < 1.0) {
            return Err(Error::InvalidConfig("validation fraction must lie in (0, 1)".into()));
        }
        self.net.validate()
    }

    fn step_schedule(&self, epochs: usize) -> Result<StepDecaySchedule> {
        let mut milestones = Vec::new();
        for &(frac, mult) in &self.step_milestone_fracs {
            let epoch = crate::data::round_half_up(frac * epochs as f64).max(1);
            if milestones.last().is_some_and(|&(e, _)| e >= epoch) {
                continue;
            }
            milestones.push((epoch, mult));
        }
        StepDecaySchedule::new(self.alpha0, milestones)
    }
}

/// What one training cycle saw: the sorted snapshot accuracies, the resolved
/// prune factor and threshold, and which snapshots were admitted.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Snapshot validation accuracies in admission (descending) order.
    pub weights: Vec<f64>,
    pub beta: f64,
    pub tau: f64,
    /// Positions in `weights` that entered the ensemble.
    pub admitted: Vec<usize>,
}

/// A trained dynamic ensemble plus its per-cycle pruning log.
#[derive(Debug, Clone)]
pub struct DynSnapOutcome {
    pub ensemble: EnsembleLearner,
    pub cycles: Vec<CycleRecord>,
}

struct CycleRun {
    history: Vec<EpochRecord>,
    store: Vec<NetParams>,
}

/// One snapshot-learning cycle: resample a stratified train/validation split,
/// train for `epochs` epochs under `schedule`, and record validation accuracy
/// plus a parameter snapshot per epoch.
fn run_cycle(
    net: &NetConfig,
    schedule: &LrSchedule,
    epochs: usize,
    data: &LabeledDataset,
    valid_fraction: f64,
    cycle_seed: u64,
) -> Result<CycleRun> {
    let (train, valid) = resample_train_valid(data, valid_fraction, derive_seed(cycle_seed, &[0]))?;
    let mut cfg = net.clone();
    cfg.seed = derive_seed(cycle_seed, &[1]);
    let params = init_params(&cfg)?;
    let mut state = TrainState::new(params, schedule.lr(1)?, cfg.momentum)?;
    let mut shuffle_rng = stream(derive_seed(cycle_seed, &[2]));
    let mut dropout_rng = stream(derive_seed(cycle_seed, &[3]));

    let mut history = Vec::with_capacity(epochs);
    let mut store = Vec::with_capacity(epochs);
    for t in 1..=epochs {
        let lr = schedule.lr(t)?;
        train_epoch(&mut state, &train, lr, cfg.batch_size, &mut shuffle_rng, &mut dropout_rng)?;
        let val_acc = evaluate(&state.params, &valid)?;
        history.push(EpochRecord { epoch: t, val_acc, params_ref: store.len() });
        store.push(state.params.clone());
    }
    Ok(CycleRun { history, store })
}

/// Snapshots of one cycle, ordered by descending validation accuracy
/// (earliest epoch on ties).
fn harvest_snapshots(cfg: &DynSnapConfig, run: &CycleRun, epochs: usize, n: usize) -> Result<Vec<EpochRecord>> {
    let mut selected = match cfg.variant {
        DynSnapVariant::Cyclic => cyclic_snapshot_select(&run.history, epochs, n)?,
        DynSnapVariant::Step => topn_snapshot_select(&run.history, n)?,
    };
    selected.sort_by(|a, b| {
        b.val_acc
            .partial_cmp(&a.val_acc)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.epoch.cmp(&b.epoch))
    });
    Ok(selected)
}

fn attach_cycle(err: Error, cycle: usize) -> Error {
    match err {
        Error::TrainingDiverged { msg, .. } => Error::TrainingDiverged { cycle, msg },
        other => other,
    }
}

/// Trains a dynamic snapshot ensemble on `data`.
///
/// Cycles repeat until the ensemble holds `m` members: resample, train with
/// snapshot learning, sort the harvested snapshots by validation accuracy,
/// and admit those at or above the prune threshold, truncating mid-cycle once
/// the ensemble is full. Deterministic given `master_seed`.
pub fn dynsnap_train(cfg: &DynSnapConfig, data: &LabeledDataset, master_seed: u64) -> Result<DynSnapOutcome> {
    cfg.validate()?;
    let m = cfg.ensemble_size;
    let n = cfg.snapshots_per_cycle.min(cfg.epochs);
    let schedule = match cfg.variant {
        DynSnapVariant::Cyclic => {
            LrSchedule::CyclicCosine(CyclicCosineSchedule::new(cfg.alpha0, cfg.epochs, n)?)
        }
        DynSnapVariant::Step => LrSchedule::StepDecay(cfg.step_schedule(cfg.epochs)?),
    };
    let max_cycles = cfg.max_cycle_factor.max(1) * m.div_ceil(n);

    let mut members = Vec::with_capacity(m);
    let mut cycles = Vec::new();
    let mut cycle = 0;
    while members.len() < m {
        cycle += 1;
        if cycle > max_cycles {
            return Err(Error::CannotFillEnsemble(format!(
                "{} members after {max_cycles} cycles, target {m}",
                members.len()
            )));
        }
        let cycle_seed = derive_seed(master_seed, &[cycle as u64]);
        let run = run_cycle(&cfg.net, &schedule, cfg.epochs, data, cfg.valid_fraction, cycle_seed)
            .map_err(|e| attach_cycle(e, cycle))?;
        let snapshots = harvest_snapshots(cfg, &run, cfg.epochs, n)?;
        let weights: Vec<f64> = snapshots.iter().map(|s| s.val_acc).collect();
        let beta = match cfg.beta {
            PruneFactor::Fixed(b) => b,
            PruneFactor::Ideal => ideal_beta(&weights)?,
        };
        let tau = prune_threshold(&weights, beta)?;
        let mut admitted = Vec::new();
        for (j, snap) in snapshots.iter().enumerate() {
            if members.len() >= m {
                break;
            }
            if snap.val_acc >= tau {
                members.push(SnapshotLearner {
                    params: run.store[snap.params_ref].clone(),
                    weight: snap.val_acc,
                    cycle,
                    index: j,
                });
                admitted.push(j);
            }
        }
        cycles.push(CycleRecord { cycle, weights, beta, tau, admitted });
    }

    Ok(DynSnapOutcome {
        ensemble: EnsembleLearner::new(members, Combiner::Average)?,
        cycles,
    })
}

/// Combines already-computed member prediction matrices row by row.
pub fn combine_matrices(
    matrices: &[PredictionMatrix],
    weights: &[f64],
    combiner: Combiner,
) -> Result<PredictionMatrix> {
    if matrices.is_empty() {
        return Err(Error::InvalidState("no member predictions to combine".into()));
    }
    if matrices.len() != weights.len() {
        return Err(Error::invalid_argument("member predictions and weights differ in length"));
    }
    let n = matrices[0].n();
    let p = matrices[0].p();
    if matrices.iter().any(|m| m.n() != n || m.p() != p) {
        return Err(Error::invalid_argument("member predictions differ in shape"));
    }

    let mut rows = Vec::with_capacity(n);
    let mut member_rows: Vec<SimplexVector> = Vec::with_capacity(matrices.len());
    for t in 0..n {
        member_rows.clear();
        member_rows.extend(matrices.iter().map(|m| m.row(t).clone()));
        let row = match combiner {
            Combiner::Average => centroid(&member_rows)?,
            Combiner::WeightedAverage => weighted_centroid(&member_rows, weights)?,
            Combiner::MajorityVote | Combiner::WeightedMajorityVote => {
                let mut votes = vec![0.0; p];
                for (row, &w) in member_rows.iter().zip(weights) {
                    let vote = if combiner == Combiner::MajorityVote { 1.0 } else { w };
                    votes[row.argmax()] += vote;
                }
                SimplexVector::one_hot(p, argmax(&votes))?
            }
        };
        rows.push(row);
    }
    PredictionMatrix::new(rows)
}

/// Runs every member on `inputs` and merges the outputs with the ensemble's
/// combiner. Majority votes yield one-hot rows; averages yield simplex rows.
pub fn combine_predictions(ensemble: &EnsembleLearner, inputs: &[Vec<f64>]) -> Result<PredictionMatrix> {
    if ensemble.members.is_empty() {
        return Err(Error::InvalidState("ensemble has no members".into()));
    }
    let matrices = ensemble
        .members
        .iter()
        .map(|m| forward(&m.params, inputs, ForwardMode::Inference))
        .collect::<Result<Vec<_>>>()?;
    combine_matrices(&matrices, &ensemble.weights(), ensemble.combiner)
}

/// Shared settings for the baseline trainers (the "original learning
/// procedure"): one step-decay training run of `epochs` epochs.
#[derive(Debug, Clone)]
pub struct TrainerProfile {
    pub net: NetConfig,
    pub epochs: usize,
    pub alpha0: f64,
    /// Step-decay milestones as `(fraction of epochs, multiplier)`.
    pub milestone_fracs: Vec<(f64, f64)>,
    pub valid_fraction: f64,
}

impl TrainerProfile {
    fn schedule(&self) -> Result<LrSchedule> {
        let mut milestones = Vec::new();
        for &(frac, mult) in &self.milestone_fracs {
            let epoch = crate::data::round_half_up(frac * self.epochs as f64).max(1);
            if milestones.last().is_some_and(|&(e, _)| e >= epoch) {
                continue;
            }
            milestones.push((epoch, mult));
        }
        Ok(LrSchedule::StepDecay(StepDecaySchedule::new(self.alpha0, milestones)?))
    }
}

/// One training run; the best-validation epoch becomes a single-member
/// ensemble so downstream code is uniform.
pub fn single_base_train(profile: &TrainerProfile, data: &LabeledDataset, seed: u64) -> Result<EnsembleLearner> {
    let schedule = profile.schedule()?;
    let run = run_cycle(&profile.net, &schedule, profile.epochs, data, profile.valid_fraction, seed)
        .map_err(|e| attach_cycle(e, 1))?;
    let best = topn_snapshot_select(&run.history, 1)?;
    let member = SnapshotLearner {
        params: run.store[best[0].params_ref].clone(),
        weight: best[0].val_acc,
        cycle: 1,
        index: 0,
    };
    EnsembleLearner::new(vec![member], Combiner::Average)
}

/// `m` independent full trainings with fresh initialization and shuffle
/// seeds, combined with validation-accuracy weights.
pub fn ext_bagging_train(
    profile: &TrainerProfile,
    data: &LabeledDataset,
    m: usize,
    master_seed: u64,
) -> Result<EnsembleLearner> {
    if m < 1 {
        return Err(Error::invalid_argument("ensemble size must be >= 1"));
    }
    let schedule = profile.schedule()?;
    let mut members = Vec::with_capacity(m);
    for j in 0..m {
        let seed = derive_seed(master_seed, &[j as u64]);
        let run = run_cycle(&profile.net, &schedule, profile.epochs, data, profile.valid_fraction, seed)
            .map_err(|e| attach_cycle(e, j + 1))?;
        let best = topn_snapshot_select(&run.history, 1)?;
        members.push(SnapshotLearner {
            params: run.store[best[0].params_ref].clone(),
            weight: best[0].val_acc,
            cycle: j + 1,
            index: 0,
        });
    }
    EnsembleLearner::new(members, Combiner::Average)
}

/// The no-pruning snapshot baseline: one cyclic training cycle stretched so
/// exactly `m` snapshot windows fit, keeping every window's best.
pub fn snapshot_baseline_train(
    cfg: &DynSnapConfig,
    data: &LabeledDataset,
    m: usize,
    master_seed: u64,
) -> Result<DynSnapOutcome> {
    let window = cfg.epochs.div_ceil(cfg.snapshots_per_cycle.min(cfg.epochs));
    let mut scaled = cfg.clone();
    scaled.variant = DynSnapVariant::Cyclic;
    scaled.ensemble_size = m;
    scaled.snapshots_per_cycle = m;
    scaled.epochs = window * m;
    scaled.beta = PruneFactor::Fixed(1.0);
    dynsnap_train(&scaled, data, master_seed)
}

const MANIFEST_MAGIC: &str = "ENSEMBLE v1";

/// Serializes an ensemble: a manifest naming the combiner, member count,
/// weights, and snapshot file names, with one snapshot file per member.
pub fn save_ensemble(ensemble: &EnsembleLearner, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Vec::new();
    writeln!(manifest, "{MANIFEST_MAGIC}")?;
    writeln!(manifest, "combiner {}", ensemble.combiner)?;
    writeln!(manifest, "members {}", ensemble.len())?;
    for (i, member) in ensemble.members.iter().enumerate() {
        let file = format!("member_{i:03}.snap");
        crate::net::save_snapshot(&member.params, &dir.join(&file))?;
        writeln!(manifest, "member {:.16e} {file}", member.weight)?;
    }
    std::fs::write(dir.join("ensemble.manifest"), manifest)?;
    Ok(())
}

/// Loads an ensemble saved by [`save_ensemble`]. `path` may be the manifest
/// file or its directory.
pub fn load_ensemble(path: &Path) -> Result<EnsembleLearner> {
    let manifest_path = if path.is_dir() { path.join("ensemble.manifest") } else { path.to_path_buf() };
    let dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = std::fs::read_to_string(&manifest_path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, line)) if line.trim() == MANIFEST_MAGIC => {}
        Some((_, line)) => return Err(Error::parse(1, format!("bad ensemble magic `{line}`"))),
        None => return Err(Error::parse(1, "empty ensemble manifest")),
    }
    let mut combiner = None;
    let mut declared = None;
    let mut members = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            None => continue,
            Some("combiner") => {
                let token = parts.next().ok_or_else(|| Error::parse(line_no, "missing combiner"))?;
                combiner = Some(Combiner::parse(token)?);
            }
            Some("members") => {
                declared = Some(
                    parts
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| Error::parse(line_no, "bad member count"))?,
                );
            }
            Some("member") => {
                let weight: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(line_no, "bad member weight"))?;
                let file = parts.next().ok_or_else(|| Error::parse(line_no, "missing member file"))?;
                let params = crate::net::load_snapshot(&dir.join(file))?;
                members.push(SnapshotLearner { params, weight, cycle: 0, index: members.len() });
            }
            Some(other) => return Err(Error::parse(line_no, format!("unknown manifest key `{other}`"))),
        }
    }
    if let Some(count) = declared {
        if count != members.len() {
            return Err(Error::parse(0, format!("manifest declared {count} members, found {}", members.len())));
        }
    }
    EnsembleLearner::new(members, combiner.unwrap_or(Combiner::Average))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_synthetic;

    #[test]
    fn prune_threshold_endpoints() {
        let w = [0.9, 0.8, 0.7];
        assert_eq!(prune_threshold(&w, 0.0).unwrap(), 0.9);
        assert_eq!(prune_threshold(&w, 1.0).unwrap(), 0.7);
        let tau = prune_threshold(&w, 0.5).unwrap();
        assert_eq!(tau, 0.8);
        let kept: Vec<f64> = w.iter().cloned().filter(|&x| x >= tau).collect();
        assert_eq!(kept, vec![0.9, 0.8]);
        assert!(prune_threshold(&w, 1.5).is_err());
        assert!(prune_threshold(&[], 0.5).is_err());
    }

    #[test]
    fn ideal_beta_cases() {
        let w = [0.9, 0.8, 0.7];
        let beta = ideal_beta(&w).unwrap();
        assert!((beta - 0.5).abs() < 1e-12);
        let tau = prune_threshold(&w, beta).unwrap();
        let mean = w.iter().sum::<f64>() / 3.0;
        assert!((tau - mean).abs() < 1e-12);

        assert_eq!(ideal_beta(&[0.6, 0.6, 0.6]).unwrap(), 0.0);
        assert_eq!(ideal_beta(&[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn pruned_set_grows_with_beta() {
        let mut rng = crate::rng::stream(31);
        use rand::Rng;
        for _ in 0..200 {
            let n = rng.gen_range(1..=8);
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut previous: Vec<usize> = Vec::new();
            for step in 0..=10 {
                let beta = step as f64 / 10.0;
                let tau = prune_threshold(&w, beta).unwrap();
                let kept: Vec<usize> =
                    (0..w.len()).filter(|&i| w[i] >= tau).collect();
                assert!(
                    previous.iter().all(|i| kept.contains(i)),
                    "kept set shrank between betas for weights {w:?}"
                );
                previous = kept;
            }
            assert_eq!(previous.len(), w.len());
        }
    }

    fn quick_net(classes: usize, dims: usize) -> NetConfig {
        NetConfig {
            input_dim: dims,
            hidden_dims: vec![8],
            num_classes: classes,
            dropout_prob: 0.0,
            weight_init_scale: 0.3,
            seed: 0,
            batch_size: 16,
            momentum: 0.9,
        }
    }

    fn quick_cfg(variant: DynSnapVariant, m: usize, n: usize) -> DynSnapConfig {
        DynSnapConfig {
            variant,
            ensemble_size: m,
            snapshots_per_cycle: n,
            beta: PruneFactor::Ideal,
            epochs: 8,
            alpha0: 0.1,
            step_milestone_fracs: vec![(0.4, 1e-1), (0.6, 1e-2), (0.8, 1e-3)],
            net: quick_net(3, 4),
            valid_fraction: 1.0 / 6.0,
            max_cycle_factor: 10,
        }
    }

    fn quick_data() -> LabeledDataset {
        make_synthetic(3, 4, 60, 3.0, 77).unwrap()
    }

    #[test]
    fn dynsnap_single_member() {
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 1, 1);
        let out = dynsnap_train(&cfg, &quick_data(), 1).unwrap();
        assert_eq!(out.ensemble.len(), 1);
        assert_eq!(out.cycles.len(), 1);
    }

    #[test]
    fn dynsnap_fills_exactly_m() {
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 4, 4);
        let out = dynsnap_train(&cfg, &quick_data(), 2).unwrap();
        assert_eq!(out.ensemble.len(), 4);
        // Ideal-beta admission: every member is at least its cycle's mean.
        for record in &out.cycles {
            let mean = record.weights.iter().sum::<f64>() / record.weights.len() as f64;
            for &j in &record.admitted {
                assert!(record.weights[j] >= mean - 1e-12);
            }
        }
    }

    #[test]
    fn dynsnap_beta_one_single_cycle_is_snapshot_baseline() {
        let mut cfg = quick_cfg(DynSnapVariant::Cyclic, 4, 4);
        cfg.beta = PruneFactor::Fixed(1.0);
        let direct = dynsnap_train(&cfg, &quick_data(), 3).unwrap();
        assert_eq!(direct.cycles.len(), 1);
        // All four snapshots admitted in descending-accuracy order.
        let w = direct.ensemble.weights();
        assert!(w.windows(2).all(|p| p[0] >= p[1]));

        let base_cfg = quick_cfg(DynSnapVariant::Cyclic, 4, 4);
        let baseline = snapshot_baseline_train(&base_cfg, &quick_data(), 4, 3).unwrap();
        assert_eq!(baseline.ensemble.len(), 4);
        assert_eq!(baseline.ensemble, direct.ensemble);
    }

    #[test]
    fn dynsnap_is_deterministic() {
        let cfg = quick_cfg(DynSnapVariant::Step, 3, 3);
        let a = dynsnap_train(&cfg, &quick_data(), 9).unwrap();
        let b = dynsnap_train(&cfg, &quick_data(), 9).unwrap();
        assert_eq!(a.ensemble, b.ensemble);
    }

    #[test]
    fn dynsnap_beta_zero_terminates() {
        let mut cfg = quick_cfg(DynSnapVariant::Cyclic, 3, 2);
        cfg.beta = PruneFactor::Fixed(0.0);
        let out = dynsnap_train(&cfg, &quick_data(), 4).unwrap();
        assert_eq!(out.ensemble.len(), 3);
        for record in &out.cycles {
            assert!(!record.admitted.is_empty());
        }
    }

    #[test]
    fn combine_single_member_average_is_identity() {
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 1, 1);
        let data = quick_data();
        let out = dynsnap_train(&cfg, &data, 5).unwrap();
        let combined = combine_predictions(&out.ensemble, data.features()).unwrap();
        let direct = forward(&out.ensemble.members[0].params, data.features(), ForwardMode::Inference).unwrap();
        assert_eq!(combined, direct);
    }

    #[test]
    fn combiner_semantics_by_hand() {
        let a = PredictionMatrix::from_raw(vec![vec![1.0, 0.0]]).unwrap();
        let b = PredictionMatrix::from_raw(vec![vec![0.0, 1.0]]).unwrap();

        let avg = combine_matrices(&[a.clone(), b.clone()], &[0.5, 0.5], Combiner::Average).unwrap();
        assert_eq!(avg.row(0).values(), &[0.5, 0.5]);

        // Tied vote breaks to class 0.
        let mv = combine_matrices(&[a.clone(), b.clone()], &[0.5, 0.5], Combiner::MajorityVote).unwrap();
        assert_eq!(mv.row(0).values(), &[1.0, 0.0]);

        // Weighted vote follows the heavier member.
        let wmv =
            combine_matrices(&[a.clone(), b.clone()], &[0.2, 0.7], Combiner::WeightedMajorityVote).unwrap();
        assert_eq!(wmv.row(0).values(), &[0.0, 1.0]);

        let wavg = combine_matrices(&[a.clone(), b.clone()], &[3.0, 1.0], Combiner::WeightedAverage).unwrap();
        assert!((wavg.row(0).values()[0] - 0.75).abs() < 1e-12);

        // Majority across three members.
        let c = PredictionMatrix::from_raw(vec![vec![0.9, 0.1]]).unwrap();
        let mv3 = combine_matrices(&[a, c, b], &[1.0, 1.0, 1.0], Combiner::MajorityVote).unwrap();
        assert_eq!(mv3.row(0).values(), &[1.0, 0.0]);
    }

    #[test]
    fn vote_outputs_are_one_hot_and_averages_are_simplex() {
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 3, 3);
        let data = quick_data();
        let out = dynsnap_train(&cfg, &data, 6).unwrap();
        for combiner in Combiner::ALL {
            let preds = combine_predictions(&out.ensemble.with_combiner(combiner), data.features()).unwrap();
            for row in preds.rows() {
                match combiner {
                    Combiner::MajorityVote | Combiner::WeightedMajorityVote => {
                        assert!(row.is_one_hot());
                    }
                    _ => {
                        let total: f64 = row.values().iter().sum();
                        assert!((total - 1.0).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn average_combiner_satisfies_centroid_bound_row_wise() {
        // Train an ensemble and an independent retrained copy; per test row,
        // the distance between the AVG outputs must not exceed the average
        // member distance.
        use crate::simplex::euclidean_distance;
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 3, 3);
        let data = quick_data();
        let ensemble = dynsnap_train(&cfg, &data, 100).unwrap().ensemble;
        let copy = dynsnap_train(&cfg, &data, 200).unwrap().ensemble;

        let inputs = &data.features()[..20];
        let avg = combine_predictions(&ensemble, inputs).unwrap();
        let avg_copy = combine_predictions(&copy, inputs).unwrap();
        let member_preds: Vec<PredictionMatrix> = ensemble
            .members
            .iter()
            .map(|m| forward(&m.params, inputs, ForwardMode::Inference).unwrap())
            .collect();
        let copy_preds: Vec<PredictionMatrix> = copy
            .members
            .iter()
            .map(|m| forward(&m.params, inputs, ForwardMode::Inference).unwrap())
            .collect();
        for t in 0..20 {
            let lhs = euclidean_distance(avg.row(t), avg_copy.row(t)).unwrap();
            let rhs: f64 = member_preds
                .iter()
                .zip(&copy_preds)
                .map(|(a, b)| euclidean_distance(a.row(t), b.row(t)).unwrap())
                .sum::<f64>()
                / ensemble.len() as f64;
            assert!(lhs <= rhs + 1e-9, "row {t}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn single_member_argmax_is_combiner_independent() {
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 1, 1);
        let data = quick_data();
        let out = dynsnap_train(&cfg, &data, 55).unwrap();
        let argmaxes = |c: Combiner| -> Vec<usize> {
            combine_predictions(&out.ensemble.with_combiner(c), data.features())
                .unwrap()
                .rows()
                .iter()
                .map(|r| r.argmax())
                .collect()
        };
        let reference = argmaxes(Combiner::Average);
        for combiner in Combiner::ALL {
            assert_eq!(argmaxes(combiner), reference);
        }
    }

    #[test]
    fn ext_bagging_cases() {
        let profile = TrainerProfile {
            net: quick_net(3, 4),
            epochs: 6,
            alpha0: 0.1,
            milestone_fracs: vec![(0.5, 0.1)],
            valid_fraction: 1.0 / 6.0,
        };
        let data = quick_data();

        let single = ext_bagging_train(&profile, &data, 1, 11).unwrap();
        let base = single_base_train(&profile, &data, derive_seed(11, &[0])).unwrap();
        assert_eq!(single.members[0].params, base.members[0].params);

        let a = ext_bagging_train(&profile, &data, 3, 12).unwrap();
        let b = ext_bagging_train(&profile, &data, 3, 12).unwrap();
        assert_eq!(a, b);

        // Fresh seeds per member: initial parameters pairwise differ.
        let mut seen = Vec::new();
        for j in 0..3u64 {
            let mut cfg = profile.net.clone();
            cfg.seed = derive_seed(derive_seed(12, &[j]), &[1]);
            let init = init_params(&cfg).unwrap();
            assert!(!seen.contains(&init));
            seen.push(init);
        }
    }

    #[test]
    fn single_base_returns_best_epoch() {
        let profile = TrainerProfile {
            net: quick_net(3, 4),
            epochs: 6,
            alpha0: 0.1,
            milestone_fracs: vec![(0.5, 0.1)],
            valid_fraction: 1.0 / 6.0,
        };
        let data = quick_data();
        let learner = single_base_train(&profile, &data, 21).unwrap();
        assert_eq!(learner.len(), 1);

        // Recompute the history independently and compare the best epoch.
        let schedule = profile.schedule().unwrap();
        let run = run_cycle(&profile.net, &schedule, 6, &data, profile.valid_fraction, 21).unwrap();
        let best = run
            .history
            .iter()
            .map(|r| r.val_acc)
            .fold(f64::MIN, f64::max);
        assert_eq!(learner.members[0].weight, best);
    }

    #[test]
    fn snapshot_baseline_member_counts() {
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 4, 2);
        for m in [1, 3] {
            let out = snapshot_baseline_train(&cfg, &quick_data(), m, 8).unwrap();
            assert_eq!(out.ensemble.len(), m);
            assert_eq!(out.cycles.len(), 1);
        }
    }

    #[test]
    fn ensemble_serialization_round_trips_bit_exactly() {
        let cfg = quick_cfg(DynSnapVariant::Cyclic, 3, 3);
        let out = dynsnap_train(&cfg, &quick_data(), 14).unwrap();
        let dir = std::env::temp_dir().join(format!("consens-ens-{}", std::process::id()));
        save_ensemble(&out.ensemble, &dir).unwrap();
        let back = load_ensemble(&dir).unwrap();
        assert_eq!(back.len(), out.ensemble.len());
        assert_eq!(back.combiner, out.ensemble.combiner);
        for (a, b) in out.ensemble.members.iter().zip(&back.members) {
            assert_eq!(a.params, b.params);
            assert_eq!(a.weight, b.weight);
        }

        // Same training twice serializes to identical bytes.
        let dir2 = dir.with_extension("again");
        let out2 = dynsnap_train(&cfg, &quick_data(), 14).unwrap();
        save_ensemble(&out2.ensemble, &dir2).unwrap();
        let bytes1 = std::fs::read(dir.join("ensemble.manifest")).unwrap();
        let bytes2 = std::fs::read(dir2.join("ensemble.manifest")).unwrap();
        assert_eq!(bytes1, bytes2);
        for i in 0..out.ensemble.len() {
            let f1 = std::fs::read(dir.join(format!("member_{i:03}.snap"))).unwrap();
            let f2 = std::fs::read(dir2.join(format!("member_{i:03}.snap"))).unwrap();
            assert_eq!(f1, f2);
        }
        std::fs::remove_dir_all(&dir).ok();
        std::fs::remove_dir_all(&dir2).ok();
    }
}
