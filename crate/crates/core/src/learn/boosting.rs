use super::tree::{self, Criterion, Tree, TreeData, TreeParams};
use super::{sigmoid, ClassifierSpec, FeaturesPerSplit, Fitted};
use crate::seed;

const DEFAULT_DEPTH: usize = 3;

/// Gradient boosting on the logistic loss. Each stage fits a squared-error
/// tree to the residuals `y - p`; leaf values are the weighted mean residual.
pub(super) fn fit(
    spec: &ClassifierSpec,
    columns: &[Vec<f64>],
    order: &[usize],
    targets: &[f64],
    weights: &[f64],
) -> Fitted {
    let n = targets.len();
    let p = columns.len();
    let params = TreeParams {
        criterion: Criterion::SquaredError,
        max_depth: Some(spec.max_depth.unwrap_or(DEFAULT_DEPTH)),
        min_samples_leaf: spec.min_samples_leaf,
        features_per_split: Some(
            spec.features_per_split
                .unwrap_or(FeaturesPerSplit::All)
                .resolve(p),
        ),
    };
    let w_total: f64 = weights.iter().sum();
    let w_pos: f64 = weights.iter().zip(targets).map(|(w, y)| w * y).sum();
    let rate = (w_pos / w_total).clamp(1e-12, 1.0 - 1e-12);
    let init = (rate / (1.0 - rate)).ln();

    let rows: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let count = vec![1u32; n];
    let mut raw = vec![init; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(spec.n_trees);
    let mut importances = vec![0.0; p];
    for stage in 0..spec.n_trees {
        for i in 0..n {
            residual[i] = targets[i] - sigmoid(raw[i]);
        }
        let data = TreeData {
            columns,
            order,
            target: &residual,
            weight: weights,
            count: &count,
        };
        let mut rng = seed::rng(spec.seed.wrapping_add(stage as u64));
        let tree = tree::grow(&data, &params, &mut rng, &mut importances);
        for (r, row) in raw.iter_mut().zip(&rows) {
            *r += spec.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    Fitted::Boosting {
        init,
        learning_rate: spec.learning_rate,
        trees,
        importances,
    }
}

pub(super) fn score(init: f64, learning_rate: f64, trees: &[Tree], row: &[f64]) -> f64 {
    let z = init + learning_rate * trees.iter().map(|t| t.predict(row)).sum::<f64>();
    sigmoid(z)
}
