use rand::Rng;
use rayon::prelude::*;

use super::tree::{self, Criterion, Tree, TreeData, TreeParams};
use super::{ClassifierSpec, FeaturesPerSplit, Fitted};
use crate::seed;

/// Bagged gini trees. Tree `t` draws its bootstrap and feature subsets from
/// seed `spec.seed + t`, so the parallel fit equals the sequential one.
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
        criterion: Criterion::Gini,
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        features_per_split: Some(
            spec.features_per_split
                .unwrap_or(FeaturesPerSplit::Sqrt)
                .resolve(p),
        ),
    };
    let grown: Vec<(Tree, Vec<f64>)> = (0..spec.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(spec.seed.wrapping_add(t as u64));
            let mut count = vec![0u32; n];
            for _ in 0..n {
                count[rng.gen_range(0..n)] += 1;
            }
            let data = TreeData {
                columns,
                order,
                target: targets,
                weight: weights,
                count: &count,
            };
            let mut importance = vec![0.0; p];
            let tree = tree::grow(&data, &params, &mut rng, &mut importance);
            (tree, importance)
        })
        .collect();
    let mut importances = vec![0.0; p];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        for (acc, v) in importances.iter_mut().zip(imp) {
            *acc += v;
        }
        trees.push(tree);
    }
    let k = trees.len() as f64;
    importances.iter_mut().for_each(|v| *v /= k);
    Fitted::Forest { trees, importances }
}

/// Soft vote: mean of the leaf positive-class fractions.
pub(super) fn score(trees: &[Tree], row: &[f64]) -> f64 {
    let sum: f64 = trees.iter().map(|t| t.predict(row)).sum();
    (sum / trees.len() as f64).clamp(0.0, 1.0)
}
