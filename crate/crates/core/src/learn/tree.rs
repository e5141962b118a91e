//! CART induction shared by the forest (gini) and boosting (squared error).

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    Gini,
    SquaredError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted tree. `feature` indices refer to the training matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }
}

pub(crate) struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features drawn per node; `None` means all.
    pub features_per_split: Option<usize>,
}

/// Training data in column-major layout.
///
/// `order` lists column indices in the order used for feature sampling and
/// tie-breaking; the tree records original indices.
pub(crate) struct TreeData<'a> {
    pub columns: &'a [Vec<f64>],
    pub order: &'a [usize],
    pub target: &'a [f64],
    /// Per-sample weight (class weight).
    pub weight: &'a [f64],
    /// Per-sample multiplicity (bootstrap counts); zero excludes the sample.
    pub count: &'a [u32],
}

#[derive(Clone, Copy, Default)]
struct Stats {
    count: f64,
    w: f64,
    wy: f64,
    wyy: f64,
}

impl Stats {
    fn add(&mut self, count: u32, w: f64, y: f64) {
        let cw = f64::from(count) * w;
        self.count += f64::from(count);
        self.w += cw;
        self.wy += cw * y;
        self.wyy += cw * y * y;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            count: self.count - o.count,
            w: self.w - o.w,
            wy: self.wy - o.wy,
            wyy: self.wyy - o.wyy,
        }
    }

    /// Node impurity scaled by node weight.
    fn weighted_impurity(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            // 1 - p^2 - (1-p)^2 = 2 p (1-p), with p = wy / w
            Criterion::Gini => {
                let pos = self.wy;
                let neg = self.w - self.wy;
                (2.0 * pos * neg / self.w).max(0.0)
            }
            Criterion::SquaredError => (self.wyy - self.wy * self.wy / self.w).max(0.0),
        }
    }

    fn leaf_value(&self) -> f64 {
        if self.w > 0.0 {
            self.wy / self.w
        } else {
            0.0
        }
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grows one tree and accumulates impurity decreases into `importance`
/// (indexed by original column, normalized by root weight).
pub(crate) fn grow(
    data: &TreeData<'_>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
    importance: &mut [f64],
) -> Tree {
    let samples: Vec<usize> = (0..data.target.len()).filter(|&i| data.count[i] > 0).collect();
    let mut root = Stats::default();
    for &i in &samples {
        root.add(data.count[i], data.weight[i], data.target[i]);
    }
    let mut builder = Builder {
        data,
        params,
        rng,
        importance,
        root_w: root.w,
        nodes: Vec::new(),
        buf: Vec::with_capacity(samples.len()),
    };
    builder.build(samples, root, 0);
    Tree {
        nodes: builder.nodes,
    }
}

struct Builder<'a, 'b> {
    data: &'a TreeData<'a>,
    params: &'a TreeParams,
    rng: &'b mut ChaCha8Rng,
    importance: &'b mut [f64],
    root_w: f64,
    nodes: Vec<Node>,
    buf: Vec<(f64, usize)>,
}

impl Builder<'_, '_> {
    fn build(&mut self, samples: Vec<usize>, stats: Stats, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: stats.leaf_value(),
        });
        let parent_imp = stats.weighted_impurity(self.params.criterion);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        if !depth_ok || parent_imp <= 0.0 || stats.count < 2.0 * min_leaf {
            return id;
        }
        let Some(best) = self.best_split(&samples, &stats, parent_imp) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.data.columns[best.feature][i] <= best.threshold);
        let mut ls = Stats::default();
        for &i in &left {
            ls.add(self.data.count[i], self.data.weight[i], self.data.target[i]);
        }
        let rs = stats.minus(&ls);
        if self.root_w > 0.0 {
            self.importance[best.feature] += best.gain / self.root_w;
        }
        let l = self.build(left, ls, depth + 1);
        let r = self.build(right, rs, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.data.order.len();
        match self.params.features_per_split {
            Some(m) if m < p => {
                let mut picked = index::sample(self.rng, p, m.max(1)).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|k| self.data.order[k]).collect()
            }
            _ => self.data.order.to_vec(),
        }
    }

    fn best_split(&mut self, samples: &[usize], stats: &Stats, parent_imp: f64) -> Option<Candidate> {
        let criterion = self.params.criterion;
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        let eps = 1e-12 * parent_imp.max(1e-300);
        let mut best: Option<Candidate> = None;
        for feature in self.candidate_features() {
            let col = &self.data.columns[feature];
            self.buf.clear();
            self.buf.extend(samples.iter().map(|&i| (col[i], i)));
            self.buf
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if self.buf[0].0 == self.buf[self.buf.len() - 1].0 {
                continue;
            }
            let mut left = Stats::default();
            for k in 0..self.buf.len() - 1 {
                let (x, i) = self.buf[k];
                left.add(self.data.count[i], self.data.weight[i], self.data.target[i]);
                let next = self.buf[k + 1].0;
                if next == x {
                    continue;
                }
                let right = stats.minus(&left);
                if left.count < min_leaf || right.count < min_leaf {
                    continue;
                }
                let gain = (parent_imp
                    - left.weighted_impurity(criterion)
                    - right.weighted_impurity(criterion))
                .max(0.0);
                // zero-gain splits are admitted so that symmetric
                // interactions (xor) can still be separated one level down
                let improves = match &best {
                    None => true,
                    Some(b) => gain > b.gain + eps,
                };
                if improves {
                    let mut threshold = 0.5 * (x + next);
                    if threshold >= next {
                        threshold = x;
                    }
                    best = Some(Candidate {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
