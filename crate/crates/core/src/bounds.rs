//! Empirical verification of the ensemble consistency bounds.
//!
//! The library's central claims are inequalities: the distance between the
//! centroids of an ensemble and its retrained copy never exceeds the average
//! member distance (and the same with the ground-truth triple distance, with
//! leave-one-out sub-ensembles, and for any Minkowski order), and the correct
//! consistency of two learners is pinned inside an envelope determined by
//! their accuracies. This module samples random ensemble pairs from Dirichlet
//! distributions and checks every inequality instance by instance, plus the
//! closed-form probability lower bound for the gain from adding an
//! above-average member.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::metrics::{LabelVector, PredictionMatrix};
use crate::rng::{derive_seed, stream};
use crate::simplex::{
    centroid, minkowski_distance, triple_distance_with_order, MinkowskiOrder, SimplexVector,
};

/// Absolute slack tolerance below which a bound counts as violated.
pub const SLACK_TOLERANCE: f64 = 1e-9;

/// An ensemble of `m` prediction vectors, its retrained copy, and the
/// one-hot ground truth, all of dimension `p`.
#[derive(Debug, Clone)]
pub struct EnsemblePairSample {
    pub members: Vec<SimplexVector>,
    pub copies: Vec<SimplexVector>,
    pub truth: SimplexVector,
}

impl EnsemblePairSample {
    pub fn new(members: Vec<SimplexVector>, copies: Vec<SimplexVector>, truth: SimplexVector) -> Result<Self> {
        if members.len() < 2 || members.len() != copies.len() {
            return Err(Error::invalid_argument(
                "sample needs m >= 2 members and equally many copies",
            ));
        }
        let p = truth.dim();
        if members.iter().chain(&copies).any(|v| v.dim() != p) {
            return Err(Error::invalid_argument("sample vectors differ in dimension"));
        }
        if !truth.is_one_hot() {
            return Err(Error::invalid_argument("sample truth must be one-hot"));
        }
        Ok(EnsemblePairSample { members, copies, truth })
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }
}

/// One draw from a symmetric Dirichlet via normalized Gamma variates.
pub fn sample_dirichlet<R: Rng>(p: usize, concentration: f64, rng: &mut R) -> Result<SimplexVector> {
    if !concentration.is_finite() || concentration <= 0.0 {
        return Err(Error::invalid_argument("Dirichlet concentration must be positive"));
    }
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::invalid_argument(format!("bad Gamma parameters: {e}")))?;
    let mut draws = vec![0.0; p];
    let mut total = 0.0;
    for d in &mut draws {
        *d = gamma.sample(rng);
        total += *d;
    }
    if total <= 0.0 {
        // Tiny concentrations can underflow every component; fall back to a
        // random vertex, which is the distribution's limit anyway.
        let hot = rng.gen_range(0..p);
        return SimplexVector::one_hot(p, hot);
    }
    for d in &mut draws {
        *d /= total;
    }
    SimplexVector::new(draws)
}

/// Samples an [`EnsemblePairSample`]: `2m` independent symmetric-Dirichlet
/// vectors plus a uniformly random one-hot truth. Deterministic given `seed`.
pub fn sample_ensemble_pair(m: usize, p: usize, concentration: f64, seed: u64) -> Result<EnsemblePairSample> {
    if m < 2 {
        return Err(Error::invalid_argument("ensemble size m must be >= 2"));
    }
    if p < 2 {
        return Err(Error::invalid_argument("dimension p must be >= 2"));
    }
    let mut rng = stream(seed);
    let members = (0..m)
        .map(|_| sample_dirichlet(p, concentration, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let copies = (0..m)
        .map(|_| sample_dirichlet(p, concentration, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let truth = SimplexVector::one_hot(p, rng.gen_range(0..p))?;
    EnsemblePairSample::new(members, copies, truth)
}

/// Both sides of one bound instance. `holds` is slack >= -[`SLACK_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn from_sides(lhs: f64, rhs: f64) -> BoundCheck {
        let slack = rhs - lhs;
        BoundCheck { lhs, rhs, slack, holds: slack >= -SLACK_TOLERANCE }
    }
}

/// Centroid distance vs. average member distance, at Minkowski order `q`:
/// `d(o, o~) <= (1/m) sum_j d(s_j, s~_j)`.
pub fn centroid_distance_bound(sample: &EnsemblePairSample, q: MinkowskiOrder) -> Result<BoundCheck> {
    let o = centroid(&sample.members)?;
    let o_copy = centroid(&sample.copies)?;
    let lhs = minkowski_distance(&o, &o_copy, q)?;
    let mut rhs = 0.0;
    for (s, s_copy) in sample.members.iter().zip(&sample.copies) {
        rhs += minkowski_distance(s, s_copy, q)?;
    }
    rhs /= sample.m() as f64;
    Ok(BoundCheck::from_sides(lhs, rhs))
}

fn leave_one_out_centroid(vectors: &[SimplexVector], skip: usize) -> Result<SimplexVector> {
    let kept: Vec<SimplexVector> = vectors
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, v)| v.clone())
        .collect();
    centroid(&kept)
}

/// Centroid distance vs. average leave-one-out centroid distance:
/// `d(o, o~) <= (1/m) sum_l d(o_l, o~_l)`.
pub fn loo_centroid_distance_bound(sample: &EnsemblePairSample) -> Result<BoundCheck> {
    let q = MinkowskiOrder::euclidean();
    let o = centroid(&sample.members)?;
    let o_copy = centroid(&sample.copies)?;
    let lhs = minkowski_distance(&o, &o_copy, q)?;
    let mut rhs = 0.0;
    for l in 0..sample.m() {
        let ol = leave_one_out_centroid(&sample.members, l)?;
        let ol_copy = leave_one_out_centroid(&sample.copies, l)?;
        rhs += minkowski_distance(&ol, &ol_copy, q)?;
    }
    rhs /= sample.m() as f64;
    Ok(BoundCheck::from_sides(lhs, rhs))
}

/// Triple distance through the truth vector, centroid vs. member average:
/// `d(o, o~, r) <= (1/m) sum_j d(s_j, s~_j, r)`.
pub fn centroid_triple_bound(sample: &EnsemblePairSample, q: MinkowskiOrder) -> Result<BoundCheck> {
    let o = centroid(&sample.members)?;
    let o_copy = centroid(&sample.copies)?;
    let lhs = triple_distance_with_order(&o, &o_copy, &sample.truth, q)?;
    let mut rhs = 0.0;
    for (s, s_copy) in sample.members.iter().zip(&sample.copies) {
        rhs += triple_distance_with_order(s, s_copy, &sample.truth, q)?;
    }
    rhs /= sample.m() as f64;
    Ok(BoundCheck::from_sides(lhs, rhs))
}

/// Leave-one-out version of [`centroid_triple_bound`].
pub fn loo_centroid_triple_bound(sample: &EnsemblePairSample) -> Result<BoundCheck> {
    let q = MinkowskiOrder::euclidean();
    let o = centroid(&sample.members)?;
    let o_copy = centroid(&sample.copies)?;
    let lhs = triple_distance_with_order(&o, &o_copy, &sample.truth, q)?;
    let mut rhs = 0.0;
    for l in 0..sample.m() {
        let ol = leave_one_out_centroid(&sample.members, l)?;
        let ol_copy = leave_one_out_centroid(&sample.copies, l)?;
        rhs += triple_distance_with_order(&ol, &ol_copy, &sample.truth, q)?;
    }
    rhs /= sample.m() as f64;
    Ok(BoundCheck::from_sides(lhs, rhs))
}

/// The correct-consistency envelope implied by two accuracies:
/// `(max(a + b - 1, 0), min(a, b))`.
pub fn ccon_envelope(acc_a: f64, acc_b: f64) -> Result<(f64, f64)> {
    for acc in [acc_a, acc_b] {
        if !(0.0..=1.0).contains(&acc) || !acc.is_finite() {
            return Err(Error::invalid_argument(format!("accuracy {acc} outside [0, 1]")));
        }
    }
    // A perfect learner collapses the lower bound to the other accuracy;
    // keep that case exact instead of routing it through a + b - 1.
    let lower = if acc_a == 1.0 {
        acc_b
    } else if acc_b == 1.0 {
        acc_a
    } else {
        (acc_a + acc_b - 1.0).max(0.0)
    };
    Ok((lower, acc_a.min(acc_b)))
}

/// Product over rows of the probability mass the matrix puts on the true
/// class: the chance that every argmax lands on its label if each prediction
/// were sampled from its own row.
pub fn true_class_mass(rows: &PredictionMatrix, labels: &LabelVector) -> Result<f64> {
    if rows.n() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "{} rows but {} labels",
            rows.n(),
            labels.len()
        )));
    }
    let mut product = 1.0;
    for (row, &label) in rows.rows().iter().zip(labels.labels()) {
        if label >= rows.p() {
            return Err(Error::invalid_argument(format!(
                "label {label} out of range for {} classes",
                rows.p()
            )));
        }
        product *= row.values()[label];
    }
    Ok(product)
}

/// Accuracy inputs for [`rho_lower_bound`]. The component means `mean_acc_sub`
/// and `mean_acc_all` are shared by the ensemble and its retrained copy.
#[derive(Debug, Clone, Copy)]
pub struct AccuracySet {
    /// Accuracy of the full ensemble.
    pub acc_ens: f64,
    /// Accuracy of the full ensemble's retrained copy.
    pub acc_ens_copy: f64,
    /// Accuracy of the sub-ensemble missing one member.
    pub acc_sub: f64,
    /// Accuracy of the sub-ensemble's retrained copy.
    pub acc_sub_copy: f64,
    /// Mean member accuracy of the sub-ensemble (`a`).
    pub mean_acc_sub: f64,
    /// Mean member accuracy of the full ensemble (`a+`).
    pub mean_acc_all: f64,
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(Error::invalid_argument(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

const DEGENERATE_EPS: f64 = 1e-12;

/// The accuracy-gain factor: probability that the full ensemble's accuracy
/// exceeds the sub-ensemble's, given their component-mean accuracies.
pub fn accuracy_gain_factor(mean_sub: f64, mean_all: f64) -> f64 {
    if (1.0 - mean_sub).abs() < DEGENERATE_EPS {
        // Mean accuracy 1 forces both ensembles to perfect accuracy.
        return 1.0;
    }
    let gap = 1.0 - mean_sub;
    let value = (mean_all - mean_sub) / gap + 0.5 * (1.0 - mean_all) / gap;
    value.clamp(0.0, 1.0)
}

/// The envelope-overlap factor: probability that a correct-consistency drawn
/// from the full-ensemble envelope `[b+, c+]` exceeds one drawn from the
/// sub-ensemble envelope `[b, c]`. 1/2 when the envelopes are disjoint or
/// collapsed.
pub fn envelope_overlap_factor(b: f64, c: f64, b_plus: f64, c_plus: f64) -> f64 {
    if c <= b_plus {
        return 0.5;
    }
    if (c - b).abs() < DEGENERATE_EPS || (c_plus - b_plus).abs() < DEGENERATE_EPS {
        // Collapsed envelope: the comparison carries no information.
        return 0.5;
    }
    let value = 0.5
        + 0.5 * ((b_plus - b) / (c - b) + (c_plus - c) / (c_plus - b_plus))
        + 0.25 * ((c - b_plus) / (c - b)) * ((c - b_plus) / (c_plus - b_plus));
    value.clamp(0.0, 1.0)
}

/// Lower bound on the probability that growing the ensemble with a member of
/// at-least-average accuracy does not hurt correct consistency.
///
/// The bound multiplies the true-class-mass products of both generations'
/// centroid predictions, the accuracy-gain factor for each generation, and
/// the envelope-overlap factor; the result is clamped to `[0, 1]`.
pub fn rho_lower_bound(
    ens_rows: &PredictionMatrix,
    ens_copy_rows: &PredictionMatrix,
    labels: &LabelVector,
    accs: &AccuracySet,
) -> Result<f64> {
    check_unit_interval("acc_ens", accs.acc_ens)?;
    check_unit_interval("acc_ens_copy", accs.acc_ens_copy)?;
    check_unit_interval("acc_sub", accs.acc_sub)?;
    check_unit_interval("acc_sub_copy", accs.acc_sub_copy)?;
    check_unit_interval("mean_acc_sub", accs.mean_acc_sub)?;
    check_unit_interval("mean_acc_all", accs.mean_acc_all)?;

    let eta = true_class_mass(ens_rows, labels)?;
    let eta_copy = true_class_mass(ens_copy_rows, labels)?;
    let eps = accuracy_gain_factor(accs.mean_acc_sub, accs.mean_acc_all);
    let eps_copy = eps;
    let (b_plus, c_plus) = ccon_envelope(accs.acc_ens, accs.acc_ens_copy)?;
    let (b, c) = ccon_envelope(accs.acc_sub, accs.acc_sub_copy)?;
    let upsilon = envelope_overlap_factor(b, c, b_plus, c_plus);
    Ok((eta * eta_copy * eps * eps_copy * upsilon).clamp(0.0, 1.0))
}

/// Configuration for [`monte_carlo_suite`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct SuiteConfig {
    /// Trials for the Euclidean checks (all four bounds per trial).
    pub trials: u64,
    /// Trials per Minkowski order (distance and triple bounds per trial).
    pub minkowski_trials: u64,
    /// Inclusive ensemble-size range to sample from.
    pub m_range: (usize, usize),
    /// Inclusive dimension range to sample from.
    pub p_range: (usize, usize),
    /// Dirichlet concentrations, cycled per trial.
    pub concentrations: Vec<f64>,
    /// Minkowski orders for the generalized checks.
    pub q_list: Vec<f64>,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trials: 100_000,
            minkowski_trials: 10_000,
            m_range: (2, 8),
            p_range: (2, 10),
            concentrations: vec![0.1, 1.0, 10.0],
            q_list: vec![1.5, 2.0, 3.0, 4.0],
            seed: 0,
        }
    }
}

pub const HISTOGRAM_BINS: usize = 30;
pub const HISTOGRAM_MAX_SLACK: f64 = 4.5;

/// Aggregate outcome of one bound across all suite trials.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckStats {
    pub trials: u64,
    pub violations: u64,
    pub min_slack: f64,
    pub max_slack: f64,
    /// Slack counts over [`HISTOGRAM_BINS`] equal bins spanning
    /// `[0, HISTOGRAM_MAX_SLACK]`; out-of-range slacks land in the edge bins.
    pub histogram: Vec<u64>,
}

impl CheckStats {
    fn new() -> Self {
        CheckStats {
            trials: 0,
            violations: 0,
            min_slack: f64::MAX,
            max_slack: f64::MIN,
            histogram: vec![0; HISTOGRAM_BINS],
        }
    }

    fn record(&mut self, check: &BoundCheck) {
        self.trials += 1;
        if !check.holds {
            self.violations += 1;
        }
        self.min_slack = self.min_slack.min(check.slack);
        self.max_slack = self.max_slack.max(check.slack);
        let bin = if check.slack <= 0.0 {
            0
        } else {
            (((check.slack / HISTOGRAM_MAX_SLACK) * HISTOGRAM_BINS as f64) as usize)
                .min(HISTOGRAM_BINS - 1)
        };
        self.histogram[bin] += 1;
    }
}

/// Suite outcome: per-bound statistics keyed by bound name.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SuiteReport {
    pub tolerance: f64,
    pub seed: u64,
    pub total_trials: u64,
    pub total_violations: u64,
    pub checks: BTreeMap<String, CheckStats>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite report serializes")
    }
}

fn q_label(q: f64) -> String {
    format!("q{q}")
}

/// Runs every bound check over independently seeded random ensembles.
///
/// Each trial derives its own PRNG stream from `(seed, trial index)`, so the
/// suite is bit-deterministic and trials could run in any order.
pub fn monte_carlo_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.trials < 1 {
        return Err(Error::invalid_argument("suite needs at least one trial"));
    }
    if cfg.m_range.0 < 2 || cfg.m_range.0 > cfg.m_range.1 {
        return Err(Error::invalid_argument("bad ensemble-size range"));
    }
    if cfg.p_range.0 < 2 || cfg.p_range.0 > cfg.p_range.1 {
        return Err(Error::invalid_argument("bad dimension range"));
    }
    if cfg.concentrations.is_empty() {
        return Err(Error::invalid_argument("need at least one concentration"));
    }

    let mut checks: BTreeMap<String, CheckStats> = BTreeMap::new();
    let euclid = MinkowskiOrder::euclidean();
    for name in [
        "centroid_distance",
        "loo_centroid_distance",
        "centroid_triple",
        "loo_centroid_triple",
    ] {
        checks.insert(name.to_string(), CheckStats::new());
    }
    for &q in &cfg.q_list {
        checks.insert(format!("centroid_distance_{}", q_label(q)), CheckStats::new());
        checks.insert(format!("centroid_triple_{}", q_label(q)), CheckStats::new());
    }

    let draw_sample = |trial: u64, phase: u64| -> Result<EnsemblePairSample> {
        let trial_seed = derive_seed(cfg.seed, &[phase, trial]);
        let mut rng = stream(trial_seed);
        let m = rng.gen_range(cfg.m_range.0..=cfg.m_range.1);
        let p = rng.gen_range(cfg.p_range.0..=cfg.p_range.1);
        let conc = cfg.concentrations[(trial as usize) % cfg.concentrations.len()];
        sample_ensemble_pair(m, p, conc, derive_seed(trial_seed, &[1]))
    };

    for trial in 0..cfg.trials {
        let sample = draw_sample(trial, 0)?;
        let c1 = centroid_distance_bound(&sample, euclid)?;
        let c2 = loo_centroid_distance_bound(&sample)?;
        let c3 = centroid_triple_bound(&sample, euclid)?;
        let c4 = loo_centroid_triple_bound(&sample)?;
        checks.get_mut("centroid_distance").unwrap().record(&c1);
        checks.get_mut("loo_centroid_distance").unwrap().record(&c2);
        checks.get_mut("centroid_triple").unwrap().record(&c3);
        checks.get_mut("loo_centroid_triple").unwrap().record(&c4);
    }

    for (qi, &q) in cfg.q_list.iter().enumerate() {
        let order = MinkowskiOrder::new(q)?;
        let dist_key = format!("centroid_distance_{}", q_label(q));
        let triple_key = format!("centroid_triple_{}", q_label(q));
        for trial in 0..cfg.minkowski_trials {
            let sample = draw_sample(trial, 1 + qi as u64)?;
            let c1 = centroid_distance_bound(&sample, order)?;
            let c3 = centroid_triple_bound(&sample, order)?;
            checks.get_mut(&dist_key).unwrap().record(&c1);
            checks.get_mut(&triple_key).unwrap().record(&c3);
        }
    }

    let total_trials = checks.values().map(|c| c.trials).sum();
    let total_violations = checks.values().map(|c| c.violations).sum();
    Ok(SuiteReport {
        tolerance: SLACK_TOLERANCE,
        seed: cfg.seed,
        total_trials,
        total_violations,
        checks,
    })
}
