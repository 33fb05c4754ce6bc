//! Learning-rate schedules and snapshot selection strategies.
//!
//! Snapshot training has two knobs: how the learning rate moves (cyclic
//! cosine restarts or a step-decay staircase) and which epochs get harvested
//! as ensemble members (the best of each cosine window, or the global top N
//! by validation accuracy). Epochs are the time unit throughout.

use crate::error::{Error, Result};

/// Cosine annealing with warm restarts: `N` windows of `ceil(T/N)` epochs,
/// each starting at `alpha0` and decaying along a half cosine.
#[derive(Debug, Clone)]
pub struct CyclicCosineSchedule {
    pub alpha0: f64,
    /// Total training epochs `T`.
    pub total_epochs: usize,
    /// Number of restart windows `N`.
    pub cycles: usize,
}

impl CyclicCosineSchedule {
    pub fn new(alpha0: f64, total_epochs: usize, cycles: usize) -> Result<Self> {
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(Error::invalid_argument("alpha0 must be positive"));
        }
        if cycles < 1 || total_epochs < cycles {
            return Err(Error::invalid_argument("need total_epochs >= cycles >= 1"));
        }
        Ok(CyclicCosineSchedule { alpha0, total_epochs, cycles })
    }

    /// Window length `ceil(T/N)` in epochs.
    pub fn window(&self) -> usize {
        self.total_epochs.div_ceil(self.cycles)
    }
}

/// Learning rate at epoch `t` (1-based):
/// `alpha0/2 * (cos(pi * ((t-1) mod w) / w) + 1)` with `w = ceil(T/N)`.
pub fn cyclic_cosine_lr(t: usize, sched: &CyclicCosineSchedule) -> Result<f64> {
    if t < 1 || t > sched.total_epochs {
        return Err(Error::invalid_argument(format!(
            "epoch {t} outside [1, {}]",
            sched.total_epochs
        )));
    }
    let window = sched.window();
    let phase = ((t - 1) % window) as f64 / window as f64;
    Ok(sched.alpha0 / 2.0 * ((std::f64::consts::PI * phase).cos() + 1.0))
}

/// Staircase decay: the learning rate is `alpha0` times the multiplier of
/// the most recent milestone at or before the current epoch.
#[derive(Debug, Clone)]
pub struct StepDecaySchedule {
    pub alpha0: f64,
    /// `(epoch, multiplier relative to alpha0)`, epochs strictly increasing.
    pub milestones: Vec<(usize, f64)>,
}

impl StepDecaySchedule {
    pub fn new(alpha0: f64, milestones: Vec<(usize, f64)>) -> Result<Self> {
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(Error::invalid_argument("alpha0 must be positive"));
        }
        if milestones.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid_argument("milestone epochs must strictly increase"));
        }
        if milestones.iter().any(|&(_, m)| !m.is_finite() || m <= 0.0) {
            return Err(Error::invalid_argument("milestone multipliers must be positive"));
        }
        Ok(StepDecaySchedule { alpha0, milestones })
    }
}

/// Learning rate at epoch `t` (1-based) under step decay.
pub fn step_decay_lr(t: usize, sched: &StepDecaySchedule) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid_argument("epochs are 1-based"));
    }
    let mut lr = sched.alpha0;
    for &(epoch, multiplier) in &sched.milestones {
        if epoch <= t {
            lr = sched.alpha0 * multiplier;
        } else {
            break;
        }
    }
    Ok(lr)
}

/// Either schedule, as configured by a trainer.
#[derive(Debug, Clone)]
pub enum LrSchedule {
    CyclicCosine(CyclicCosineSchedule),
    StepDecay(StepDecaySchedule),
}

impl LrSchedule {
    pub fn lr(&self, t: usize) -> Result<f64> {
        match self {
            LrSchedule::CyclicCosine(s) => cyclic_cosine_lr(t, s),
            LrSchedule::StepDecay(s) => step_decay_lr(t, s),
        }
    }
}

/// One epoch's outcome during snapshot training. `params_ref` indexes the
/// trainer's parallel snapshot store.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub val_acc: f64,
    pub params_ref: usize,
}

/// Best record of each `ceil(T/N)`-epoch window, ordered by window.
/// Within a window the highest validation accuracy wins, earliest epoch on
/// ties.
pub fn cyclic_snapshot_select(history: &[EpochRecord], total_epochs: usize, n: usize) -> Result<Vec<EpochRecord>> {
    if n < 1 || total_epochs < n {
        return Err(Error::invalid_argument("need total_epochs >= n >= 1"));
    }
    if history.len() < total_epochs {
        return Err(Error::invalid_argument(format!(
            "history covers {} epochs, schedule expects {total_epochs}",
            history.len()
        )));
    }
    let window = total_epochs.div_ceil(n);
    let mut selected = Vec::with_capacity(n);
    for w in 0..n {
        let start = w * window;
        let end = ((w + 1) * window).min(total_epochs);
        let best = history[start..end]
            .iter()
            .max_by(|a, b| {
                a.val_acc
                    .partial_cmp(&b.val_acc)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.epoch.cmp(&a.epoch))
            })
            .ok_or_else(|| Error::invalid_argument("empty snapshot window"))?;
        selected.push(best.clone());
    }
    Ok(selected)
}

/// The `n` records with highest validation accuracy over the whole run,
/// ordered by descending accuracy; earliest epoch wins ties.
pub fn topn_snapshot_select(history: &[EpochRecord], n: usize) -> Result<Vec<EpochRecord>> {
    if n < 1 {
        return Err(Error::invalid_argument("need n >= 1"));
    }
    if history.len() < n {
        return Err(Error::invalid_argument(format!(
            "history has {} records, need at least {n}",
            history.len()
        )));
    }
    let mut order: Vec<&EpochRecord> = history.iter().collect();
    order.sort_by(|a, b| {
        b.val_acc
            .partial_cmp(&a.val_acc)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.epoch.cmp(&b.epoch))
    });
    Ok(order.into_iter().take(n).cloned().collect())
}
