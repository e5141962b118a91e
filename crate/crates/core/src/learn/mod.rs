//! Classifiers with a common train/score interface.
//!
//! Random forest is the reference model (it drives elimination and the
//! importance export); gradient boosting and an L2-regularized logistic
//! model are the other natively supported kinds.

mod boosting;
mod forest;
mod linear;
mod tree;

use serde::{Deserialize, Serialize};

use crate::aggregate::{FeatureKey, FeatureMatrix};
use crate::error::{Error, Result};

pub use tree::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    RandomForest,
    GradientBoosting,
    Linear,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::GradientBoosting => "gradient_boosting",
            ClassifierKind::Linear => "linear",
        }
    }

    pub fn is_tree_based(self) -> bool {
        !matches!(self, ClassifierKind::Linear)
    }
}

/// Number of candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// ⌈√p⌉
    Sqrt,
    All,
    Count(usize),
    Fraction(f64),
}

impl FeaturesPerSplit {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            FeaturesPerSplit::Sqrt => (p as f64).sqrt().ceil() as usize,
            FeaturesPerSplit::All => p,
            FeaturesPerSplit::Count(n) => n,
            FeaturesPerSplit::Fraction(f) => (f * p as f64).ceil() as usize,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    #[default]
    None,
    /// Weights inversely proportional to class frequency.
    Balanced,
}

/// Hyperparameters for one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    /// Defaults to unlimited for forests and 3 for boosting.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
    /// Defaults to ⌈√p⌉ for forests and all features for boosting.
    #[serde(default)]
    pub features_per_split: Option<FeaturesPerSplit>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_l2")]
    pub l2_penalty: f64,
    #[serde(default)]
    pub class_weight: ClassWeight,
    #[serde(default)]
    pub seed: u64,
}

fn default_trees() -> usize {
    100
}
fn default_min_leaf() -> usize {
    1
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_l2() -> f64 {
    1.0
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            n_trees: default_trees(),
            max_depth: None,
            min_samples_leaf: default_min_leaf(),
            features_per_split: None,
            learning_rate: default_learning_rate(),
            l2_penalty: default_l2(),
            class_weight: ClassWeight::None,
            seed: 0,
        }
    }

    pub fn random_forest() -> Self {
        Self::new(ClassifierKind::RandomForest)
    }

    pub fn gradient_boosting() -> Self {
        Self::new(ClassifierKind::GradientBoosting)
    }

    pub fn linear() -> Self {
        Self::new(ClassifierKind::Linear)
    }

    pub fn with_trees(mut self, n: usize) -> Self {
        self.n_trees = n;
        self
    }

    pub fn with_max_depth(mut self, d: usize) -> Self {
        self.max_depth = Some(d);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_class_weight(mut self, w: ClassWeight) -> Self {
        self.class_weight = w;
        self
    }

    pub fn with_features_per_split(mut self, f: FeaturesPerSplit) -> Self {
        self.features_per_split = Some(f);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::ConfigKey {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.n_trees < 1 {
            return bad("n_trees", "must be at least 1");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate", "must be positive");
        }
        if !(self.l2_penalty >= 0.0) || !self.l2_penalty.is_finite() {
            return bad("l2_penalty", "must be non-negative");
        }
        if let Some(FeaturesPerSplit::Fraction(f)) = self.features_per_split {
            if !(f > 0.0 && f <= 1.0) {
                return bad("features_per_split", "fraction must lie in (0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Forest {
        trees: Vec<Tree>,
        importances: Vec<f64>,
    },
    Boosting {
        init: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
        importances: Vec<f64>,
    },
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
        iterations: usize,
    },
}

/// A fitted classifier bound to its training column schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub feature_keys: Vec<FeatureKey>,
    pub fitted: Fitted,
}

/// Non-negative per-feature weights aligned to a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub feature_keys: Vec<FeatureKey>,
    pub values: Vec<f64>,
}

impl ImportanceVector {
    /// `(key, importance)` pairs, highest first; ties keep column order.
    pub fn ranked(&self) -> Vec<(FeatureKey, f64)> {
        let mut pairs: Vec<(FeatureKey, f64)> = self
            .feature_keys
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs
    }

    pub fn get(&self, key: &FeatureKey) -> Option<f64> {
        self.feature_keys
            .iter()
            .position(|k| k == key)
            .map(|j| self.values[j])
    }

    /// Writes `feature,importance`, sorted descending.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["feature", "importance"])?;
        for (k, v) in self.ranked() {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column indices sorted by feature key. Feature sampling and split
/// tie-breaking follow this order, which makes fitted trees independent of
/// how the caller arranged the columns.
fn canonical_order(keys: &[FeatureKey]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    order
}

fn columns(matrix: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..matrix.n_cols())
        .map(|j| matrix.rows.iter().map(|r| r[j]).collect())
        .collect()
}

fn class_weights(labels: &[bool], scheme: ClassWeight) -> Vec<f64> {
    match scheme {
        ClassWeight::None => vec![1.0; labels.len()],
        ClassWeight::Balanced => {
            let n = labels.len() as f64;
            let pos = labels.iter().filter(|&&l| l).count() as f64;
            let neg = n - pos;
            labels
                .iter()
                .map(|&l| if l { n / (2.0 * pos) } else { n / (2.0 * neg) })
                .collect()
        }
    }
}

/// Fits `spec` on `matrix`. Deterministic in `(spec, matrix)`.
pub fn train(spec: &ClassifierSpec, matrix: &FeatureMatrix) -> Result<TrainedModel> {
    spec.validate()?;
    if matrix.n_cols() == 0 {
        return Err(Error::NoColumns);
    }
    let pos = matrix.n_positive();
    if pos == 0 || pos == matrix.n_rows() {
        return Err(Error::SingleClass);
    }
    if let Some(bad) = matrix.rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite feature value {bad}")));
    }
    let cols = columns(matrix);
    let order = canonical_order(&matrix.feature_keys);
    let weights = class_weights(&matrix.labels, spec.class_weight);
    let targets: Vec<f64> = matrix.labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let fitted = match spec.kind {
        ClassifierKind::RandomForest => forest::fit(spec, &cols, &order, &targets, &weights),
        ClassifierKind::GradientBoosting => boosting::fit(spec, &cols, &order, &targets, &weights),
        ClassifierKind::Linear => linear::fit(spec, &cols, &targets, &weights),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_keys: matrix.feature_keys.clone(),
        fitted,
    })
}

impl TrainedModel {
    /// Probability of the positive class for each row of `matrix`.
    ///
    /// The matrix schema must equal the training schema exactly.
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.score_rows(&matrix.feature_keys, &matrix.rows)
    }

    pub fn score_rows(&self, schema: &[FeatureKey], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_schema(schema)?;
        if let Some(r) = rows.iter().find(|r| r.len() != schema.len()) {
            return Err(Error::InvalidInput(format!(
                "row has {} values, schema has {}",
                r.len(),
                schema.len()
            )));
        }
        Ok(rows.iter().map(|r| self.score_one(r)).collect())
    }

    fn check_schema(&self, schema: &[FeatureKey]) -> Result<()> {
        let n = self.feature_keys.len().max(schema.len());
        for index in 0..n {
            if self.feature_keys.get(index) != schema.get(index) {
                let expected = self
                    .feature_keys
                    .get(index)
                    .map(|k| k.to_string())
                    .unwrap_or_else(|| "<end of schema>".into());
                return Err(Error::SchemaMismatch { index, expected });
            }
        }
        Ok(())
    }

    fn score_one(&self, row: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Forest { trees, .. } => forest::score(trees, row),
            Fitted::Boosting {
                init,
                learning_rate,
                trees,
                ..
            } => boosting::score(*init, *learning_rate, trees, row),
            Fitted::Linear {
                intercept,
                coefficients,
                ..
            } => linear::score(*intercept, coefficients, row),
        }
    }

    /// Mean impurity decrease per feature, normalized to sum to one.
    ///
    /// All zeros when no tree ever split.
    pub fn gini_importances(&self) -> Result<ImportanceVector> {
        let raw = match &self.fitted {
            Fitted::Forest { importances, .. } | Fitted::Boosting { importances, .. } => importances,
            Fitted::Linear { .. } => {
                return Err(Error::ImportancesUndefined(self.spec.kind.as_str().into()))
            }
        };
        // summed in key order so the total does not depend on column order
        let total: f64 = canonical_order(&self.feature_keys).iter().map(|&j| raw[j]).sum();
        let values = if total > 0.0 {
            raw.iter().map(|v| v / total).collect()
        } else {
            vec![0.0; raw.len()]
        };
        Ok(ImportanceVector {
            feature_keys: self.feature_keys.clone(),
            values,
        })
    }

    /// Total number of internal split nodes across all trees.
    pub fn n_splits(&self) -> usize {
        match &self.fitted {
            Fitted::Forest { trees, .. } | Fitted::Boosting { trees, .. } => {
                trees.iter().map(Tree::n_splits).sum()
            }
            Fitted::Linear { .. } => 0,
        }
    }

    /// Structured text dump for inspection. Not a stable format.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Free-function form of [`TrainedModel::gini_importances`].
pub fn gini_importances(model: &TrainedModel) -> Result<ImportanceVector> {
    model.gini_importances()
}

/// Free-function form of [`TrainedModel::predict_proba`].
pub fn predict_proba(model: &TrainedModel, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict_proba(matrix)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
