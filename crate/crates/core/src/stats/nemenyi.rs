use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{average_ranks, ScoreTable};
use crate::error::{Error, Result};

// Studentized range quantiles at infinite df divided by √2, for k = 2..=20.
const Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

/// Tabulated Nemenyi constant for `k` treatments at level `alpha`.
pub fn q_alpha(alpha: f64, k: usize) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(Error::Untabulated { alpha, k });
    };
    if !(2..=20).contains(&k) {
        return Err(Error::Untabulated { alpha, k });
    }
    Ok(table[k - 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    /// `avg_rank(a) − avg_rank(b)`.
    pub rank_difference: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NemenyiResult {
    pub alpha: f64,
    pub k: usize,
    pub n: usize,
    pub q_alpha: f64,
    pub critical_difference: f64,
    pub columns: Vec<String>,
    pub average_ranks: Vec<f64>,
    pub pairs: Vec<PairComparison>,
}

impl NemenyiResult {
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairComparison> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    /// Writes `approach_a,approach_b,rank_difference,cd,significant`.
    pub fn write_pairs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["approach_a", "approach_b", "rank_difference", "cd", "significant"])?;
        for p in &self.pairs {
            w.write_record([
                p.a.clone(),
                p.b.clone(),
                p.rank_difference.to_string(),
                self.critical_difference.to_string(),
                p.significant.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Critical-difference diagram data: `approach,avg_rank,cd`, best first.
    pub fn write_cd_diagram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["approach", "avg_rank", "cd"])?;
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.sort_by(|&a, &b| self.average_ranks[a].total_cmp(&self.average_ranks[b]));
        for j in order {
            w.write_record([
                self.columns[j].clone(),
                self.average_ranks[j].to_string(),
                self.critical_difference.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nemenyi post-hoc comparison: `CD = q_α √(k (k+1) / (6 n))`; a pair is
/// significant when its average-rank gap is at least `CD`.
pub fn nemenyi(table: &ScoreTable, alpha: f64) -> Result<NemenyiResult> {
    let k = table.n_cols();
    let n = table.n_rows();
    let q = q_alpha(alpha, k)?;
    let cd = q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt();
    let ranks = average_ranks(table, true);
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let diff = ranks[a] - ranks[b];
            pairs.push(PairComparison {
                a: table.columns()[a].clone(),
                b: table.columns()[b].clone(),
                rank_difference: diff,
                significant: diff.abs() >= cd,
            });
        }
    }
    Ok(NemenyiResult {
        alpha,
        k,
        n,
        q_alpha: q,
        critical_difference: cd,
        columns: table.columns().to_vec(),
        average_ranks: ranks,
        pairs,
    })
}
