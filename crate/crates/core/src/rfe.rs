//! Recursive feature elimination driven by tree importances.
//!
//! Each iteration refits the reference model on the surviving columns,
//! scores a fixed validation split, and removes `step` features. The loop
//! ends when `k` features remain or when a removal would push validation
//! AUC more than `beta` below the best AUC seen so far (that removal is
//! rolled back).

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::aggregate::{FeatureKey, FeatureMatrix};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::learn::{train, ClassifierSpec};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EliminationRule {
    /// Drop the lowest-importance features first.
    #[default]
    EliminateLeastImportant,
    /// Drop the highest-importance feature while its importance exceeds
    /// `alpha`, as the procedure is literally worded.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfeConfig {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub k: usize,
    #[serde(default)]
    pub rule: EliminationRule,
    #[serde(default = "default_step")]
    pub step: usize,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta() -> f64 {
    0.05
}
fn default_step() -> usize {
    1
}
fn default_validation_fraction() -> f64 {
    0.2
}

impl RfeConfig {
    pub fn new(k: usize) -> Self {
        RfeConfig {
            alpha: 0.0,
            beta: default_beta(),
            k,
            rule: EliminationRule::default(),
            step: default_step(),
            validation_fraction: default_validation_fraction(),
            seed: 0,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_rule(mut self, rule: EliminationRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::ConfigKey {
                key: format!("rfe.{key}"),
                message: message.into(),
            })
        };
        if self.k < 1 {
            return bad("k", "must be at least 1");
        }
        if self.step < 1 {
            return bad("step", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", "must lie in [0, 1]");
        }
        if !(self.beta >= 0.0) {
            return bad("beta", "must be non-negative");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction", "must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    pub iteration: usize,
    pub removed: Vec<FeatureKey>,
    pub remaining: usize,
    pub val_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    ReachedK,
    /// The rejected removal and the validation AUC it would have produced.
    AucDrop {
        rejected: Vec<FeatureKey>,
        val_auc: f64,
        best_auc: f64,
    },
    /// No feature qualified for removal under the literal rule.
    NoCandidates,
}

/// Iteration 0 is the model on all columns; later entries record removals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeTrace {
    pub steps: Vec<RfeStep>,
    pub stop: StopReason,
}

impl RfeTrace {
    pub fn n_removed(&self) -> usize {
        self.steps.iter().map(|s| s.removed.len()).sum()
    }

    /// Writes `iteration,removed,remaining,val_auc`; removed names are
    /// joined with `;`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["iteration", "removed", "remaining", "val_auc"])?;
        for s in &self.steps {
            let removed: Vec<String> = s.removed.iter().map(|k| k.to_string()).collect();
            w.write_record([
                s.iteration.to_string(),
                removed.join(";"),
                s.remaining.to_string(),
                s.val_auc.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeOutcome {
    /// Surviving columns, in matrix order.
    pub selected: Vec<FeatureKey>,
    pub trace: RfeTrace,
}

/// Stratified holdout: returns `(train, validation)` row indices, both sorted.
pub fn stratified_holdout(labels: &[bool], fraction: f64, seed_: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::TooFewForFolds {
                count: idx.len(),
                n_folds: 2,
            });
        }
        idx.shuffle(&mut seed::rng(seed::derive(&[seed_, u64::from(class)])));
        let take = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        valid.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

fn validation_auc(
    spec: &ClassifierSpec,
    train_m: &FeatureMatrix,
    valid_m: &FeatureMatrix,
    cols: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let tm = train_m.select_columns(cols);
    let vm = valid_m.select_columns(cols);
    let model = train(spec, &tm)?;
    let scores = model.predict_proba(&vm)?;
    let importances = model.gini_importances()?.values;
    Ok((auc(&scores, &vm.labels)?, importances))
}

/// Runs elimination down to `config.k` columns (or until AUC degrades).
pub fn run_rfe(matrix: &FeatureMatrix, spec: &ClassifierSpec, config: &RfeConfig) -> Result<RfeOutcome> {
    config.validate()?;
    if !spec.kind.is_tree_based() {
        return Err(Error::ImportancesUndefined(spec.kind.as_str().into()));
    }
    let p = matrix.n_cols();
    if config.k >= p {
        return Err(Error::InvalidInput(format!(
            "k = {} must be smaller than the {p} available columns",
            config.k
        )));
    }
    let (train_idx, valid_idx) =
        stratified_holdout(&matrix.labels, config.validation_fraction, config.seed)?;
    let train_m = matrix.select_rows(&train_idx);
    let valid_m = matrix.select_rows(&valid_idx);

    // positions into `matrix` columns, kept in matrix order
    let mut remaining: Vec<usize> = (0..p).collect();
    let (auc0, mut importances) = validation_auc(spec, &train_m, &valid_m, &remaining)?;
    let mut best = auc0;
    let mut steps = vec![RfeStep {
        iteration: 0,
        removed: Vec::new(),
        remaining: p,
        val_auc: auc0,
    }];

    let stop = loop {
        if remaining.len() <= config.k {
            break StopReason::ReachedK;
        }
        let quota = config.step.min(remaining.len() - config.k);
        let mut order: Vec<usize> = (0..remaining.len()).collect();
        let chosen: Vec<usize> = match config.rule {
            EliminationRule::EliminateLeastImportant => {
                order.sort_by(|&a, &b| importances[a].total_cmp(&importances[b]).then(a.cmp(&b)));
                order.into_iter().take(quota).collect()
            }
            EliminationRule::PaperLiteral => {
                order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
                order
                    .into_iter()
                    .filter(|&i| importances[i] > config.alpha)
                    .take(quota)
                    .collect()
            }
        };
        if chosen.is_empty() {
            break StopReason::NoCandidates;
        }
        let removed_keys: Vec<FeatureKey> = chosen
            .iter()
            .map(|&i| matrix.feature_keys[remaining[i]].clone())
            .collect();
        let candidate: Vec<usize> = remaining
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .map(|(_, &c)| c)
            .collect();
        let (val_auc, next_importances) = validation_auc(spec, &train_m, &valid_m, &candidate)?;
        if best - val_auc > config.beta {
            break StopReason::AucDrop {
                rejected: removed_keys,
                val_auc,
                best_auc: best,
            };
        }
        best = best.max(val_auc);
        remaining = candidate;
        importances = next_importances;
        steps.push(RfeStep {
            iteration: steps.len(),
            removed: removed_keys,
            remaining: remaining.len(),
            val_auc,
        });
    };

    Ok(RfeOutcome {
        selected: remaining.iter().map(|&j| matrix.feature_keys[j].clone()).collect(),
        trace: RfeTrace { steps, stop },
    })
}
