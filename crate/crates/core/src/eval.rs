//! Stratified cross-validation, rank-based AUC, and the approach ×
//! classifier results grid.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{project, FeatureKey, FeatureMatrix, IntegrationApproach};
use crate::error::{Error, Result};
use crate::learn::{train, ClassifierKind, ClassifierSpec};
use crate::rfe::{run_rfe, RfeConfig, RfeOutcome};
use crate::seed;

/// Fold index per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }
}

/// Shuffles each class with `seed` and deals rows round-robin into folds.
/// Negatives continue where positives stopped so fold sizes also balance.
pub fn stratified_kfold(labels: &[bool], n_folds: usize, seed_: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::InvalidInput("at least 2 folds are required".into()));
    }
    let mut fold_of = vec![0; labels.len()];
    let mut offset = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < n_folds {
            return Err(Error::TooFewForFolds {
                count: idx.len(),
                n_folds,
            });
        }
        idx.shuffle(&mut seed::rng(seed::derive(&[seed_, u64::from(class)])));
        for (k, &i) in idx.iter().enumerate() {
            fold_of[i] = (offset + k) % n_folds;
        }
        offset = (offset + idx.len()) % n_folds;
    }
    Ok(FoldAssignment {
        fold_of,
        n_folds,
        seed: seed_,
    })
}

/// Area under the ROC curve via the Mann–Whitney statistic with midranks:
/// the probability that a random positive outscores a random negative,
/// ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += midrank * positives as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Per-fold AUCs: fit on the complement of each fold, score the fold.
///
/// Fold `f` trains with seed `derive(spec.seed, f)`; folds run in parallel
/// and the result does not depend on scheduling.
pub fn cross_validate(matrix: &FeatureMatrix, spec: &ClassifierSpec, folds: &FoldAssignment) -> Result<Vec<f64>> {
    if folds.fold_of.len() != matrix.n_rows() {
        return Err(Error::InvalidInput(format!(
            "fold assignment covers {} rows, matrix has {}",
            folds.fold_of.len(),
            matrix.n_rows()
        )));
    }
    (0..folds.n_folds)
        .into_par_iter()
        .map(|fold| {
            let train_m = matrix.select_rows(&folds.train_indices(fold));
            let test_m = matrix.select_rows(&folds.test_indices(fold));
            let mut fold_spec = spec.clone();
            fold_spec.seed = seed::derive(&[spec.seed, fold as u64]);
            let model = train(&fold_spec, &train_m)?;
            let scores = model.predict_proba(&test_m)?;
            auc(&scores, &test_m.labels)
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// A classifier entry of the grid, with its report label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedClassifier {
    pub name: String,
    pub spec: ClassifierSpec,
}

impl NamedClassifier {
    pub fn new(name: impl Into<String>, spec: ClassifierSpec) -> Self {
        NamedClassifier {
            name: name.into(),
            spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Dataset label written into every report row.
    pub ade: String,
    pub approaches: Vec<IntegrationApproach>,
    pub classifiers: Vec<NamedClassifier>,
    pub n_folds: usize,
    pub seed: u64,
    /// Required when `approaches` contains LMD-kbest.
    pub rfe: Option<RfeConfig>,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.approaches.is_empty() {
            return Err(Error::ConfigKey {
                key: "approaches".into(),
                message: "must not be empty".into(),
            });
        }
        if self.classifiers.is_empty() {
            return Err(Error::ConfigKey {
                key: "classifiers".into(),
                message: "must not be empty".into(),
            });
        }
        if self.approaches.iter().any(|a| a.is_kbest()) && self.rfe.is_none() {
            return Err(Error::ConfigKey {
                key: "rfe".into(),
                message: "approach LMD-kbest requires an rfe section".into(),
            });
        }
        for c in &self.classifiers {
            c.spec.validate()?;
        }
        if let Some(r) = &self.rfe {
            r.validate()?;
        }
        Ok(())
    }

    /// The model that drives elimination: the first tree-based classifier,
    /// preferring a random forest.
    pub fn elimination_spec(&self) -> ClassifierSpec {
        self.classifiers
            .iter()
            .find(|c| c.spec.kind == ClassifierKind::RandomForest)
            .or_else(|| self.classifiers.iter().find(|c| c.spec.kind.is_tree_based()))
            .map(|c| c.spec.clone())
            .unwrap_or_else(ClassifierSpec::random_forest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub approach: IntegrationApproach,
    pub classifier: String,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

/// Elimination run backing the LMD-kbest cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KBestSelection {
    pub outcome: RfeOutcome,
    /// How the selection was obtained relative to the folds.
    pub protocol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub ade: String,
    pub seed: u64,
    pub n_folds: usize,
    pub window_length: i64,
    pub k: Option<usize>,
    pub kbest: Option<KBestSelection>,
    pub cells: Vec<CellResult>,
}

const KBEST_PROTOCOL: &str = "elimination ran once on the training portion of fold 0 \
(with its own stratified validation split); the selected columns are reused for every fold and classifier";

impl EvaluationReport {
    pub fn cell(&self, approach: IntegrationApproach, classifier: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.approach == approach && c.classifier == classifier)
    }

    pub fn selected_features(&self) -> Option<&[FeatureKey]> {
        self.kbest.as_ref().map(|k| k.outcome.selected.as_slice())
    }

    /// Writes `ade,approach,classifier,fold,auc`.
    pub fn write_folds_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["ade", "approach", "classifier", "fold", "auc"])?;
        for c in &self.cells {
            for (f, a) in c.fold_aucs.iter().enumerate() {
                w.write_record([
                    self.ade.clone(),
                    c.approach.to_string(),
                    c.classifier.clone(),
                    f.to_string(),
                    a.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `ade,approach,classifier,mean_auc,std_auc`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["ade", "approach", "classifier", "mean_auc", "std_auc"])?;
        for c in &self.cells {
            w.write_record([
                self.ade.clone(),
                c.approach.to_string(),
                c.classifier.clone(),
                c.mean_auc.to_string(),
                c.std_auc.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates every (approach, classifier) cell on one shared fold
/// assignment. Cell seeds derive from `(seed, approach, classifier, fold)`.
pub fn results_grid(matrix: &FeatureMatrix, config: &GridConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let folds = stratified_kfold(&matrix.labels, config.n_folds, config.seed)?;

    let kbest = match (&config.rfe, config.approaches.iter().any(|a| a.is_kbest())) {
        (Some(rfe), true) => {
            let fold0_train = matrix.select_rows(&folds.train_indices(0));
            let outcome = run_rfe(&fold0_train, &config.elimination_spec(), rfe)?;
            Some(KBestSelection {
                outcome,
                protocol: KBEST_PROTOCOL.into(),
            })
        }
        _ => None,
    };

    let mut views = Vec::with_capacity(config.approaches.len());
    for &approach in &config.approaches {
        let view = if approach.is_kbest() {
            let selected = &kbest.as_ref().expect("validated above").outcome.selected;
            matrix.select_keys(selected)?
        } else {
            project(matrix, approach)?
        };
        if view.n_cols() == 0 {
            return Err(Error::InvalidInput(format!(
                "approach {approach} leaves no feature columns"
            )));
        }
        views.push((approach, view));
    }

    let mut cells = Vec::new();
    for (approach, view) in &views {
        for c in &config.classifiers {
            let mut spec = c.spec.clone();
            spec.seed = seed::derive(&[
                config.seed,
                seed::hash_str(&approach.to_string()),
                seed::hash_str(&c.name),
                c.spec.seed,
            ]);
            let fold_aucs = cross_validate(view, &spec, &folds)?;
            cells.push(CellResult {
                approach: *approach,
                classifier: c.name.clone(),
                mean_auc: mean(&fold_aucs),
                std_auc: std_dev(&fold_aucs),
                fold_aucs,
            });
        }
    }

    Ok(EvaluationReport {
        ade: config.ade.clone(),
        seed: config.seed,
        n_folds: config.n_folds,
        window_length: matrix.window_length,
        k: config.rfe.as_ref().map(|r| r.k),
        kbest,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force pair counting, independent of the rank formulation.
    fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        let s = [0.9, 0.4, 0.6, 0.2];
        let l = [true, false, false, true];
        assert_eq!(auc_pairs(&s, &l), 0.5);
        assert_eq!(auc(&s, &l).unwrap(), 0.5);
    }

    #[test]
    fn auc_errors() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
        assert!(auc(&[0.1], &[true, false]).is_err());
        assert!(auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn folds_divide_exactly() {
        let labels: Vec<bool> = (0..100).map(|i| i < 20).collect();
        let f = stratified_kfold(&labels, 10, 3).unwrap();
        for fold in 0..10 {
            let test = f.test_indices(fold);
            assert_eq!(test.iter().filter(|&&i| labels[i]).count(), 2);
            assert_eq!(test.iter().filter(|&&i| !labels[i]).count(), 8);
        }
    }

    #[test]
    fn eleven_positives_over_ten_folds() {
        let labels: Vec<bool> = (0..60).map(|i| i < 11).collect();
        let f = stratified_kfold(&labels, 10, 0).unwrap();
        let mut per_fold: Vec<usize> = (0..10)
            .map(|k| f.test_indices(k).iter().filter(|&&i| labels[i]).count())
            .collect();
        per_fold.sort();
        assert_eq!(per_fold, vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);
    }

    #[test]
    fn too_few_positives_rejected() {
        let labels: Vec<bool> = (0..60).map(|i| i < 5).collect();
        assert!(matches!(
            stratified_kfold(&labels, 10, 0),
            Err(Error::TooFewForFolds { count: 5, n_folds: 10 })
        ));
    }

    #[test]
    fn std_dev_is_sample_based() {
        assert_eq!(std_dev(&[1.0, 3.0]), 2f64.sqrt());
        assert_eq!(std_dev(&[4.0]), 0.0);
    }

    proptest! {
        #[test]
        fn auc_matches_pair_counting(
            raw in proptest::collection::vec((0u8..4, any::<bool>()), 2..9)
        ) {
            let scores: Vec<f64> = raw.iter().map(|r| f64::from(r.0) / 4.0).collect();
            let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos > 0 && pos < labels.len());
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc_pairs(&scores, &labels));
        }

        #[test]
        fn auc_flip_and_monotone_transform(
            raw in proptest::collection::vec((-1000i32..1000, any::<bool>()), 2..40)
        ) {
            let mut seen = std::collections::BTreeSet::new();
            let raw: Vec<_> = raw.into_iter().filter(|r| seen.insert(r.0)).collect();
            let scores: Vec<f64> = raw.iter().map(|r| f64::from(r.0)).collect();
            let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos > 0 && pos < labels.len());
            let a = auc(&scores, &labels).unwrap();
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            prop_assert!((a + auc(&scores, &flipped).unwrap() - 1.0).abs() < 1e-12);
            let warped: Vec<f64> = scores.iter().map(|s| (s / 300.0).exp()).collect();
            prop_assert_eq!(auc(&warped, &labels).unwrap(), a);
        }

        #[test]
        fn folds_balanced(labels in proptest::collection::vec(any::<bool>(), 20..200), k in 2usize..11, s in any::<u64>()) {
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos >= k && labels.len() - pos >= k);
            let f = stratified_kfold(&labels, k, s).unwrap();
            for class in [true, false] {
                let counts: Vec<usize> = (0..k)
                    .map(|fold| f.test_indices(fold).iter().filter(|&&i| labels[i] == class).count())
                    .collect();
                prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
            }
        }
    }
}
