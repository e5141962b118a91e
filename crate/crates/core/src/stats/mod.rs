//! Rank-based comparison of several approaches over several datasets:
//! Friedman test (chi-square and Iman–Davenport forms) and the Nemenyi
//! critical difference.

mod nemenyi;
pub mod special;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nemenyi::{nemenyi, q_alpha, NemenyiResult, PairComparison};

/// Complete datasets × treatments table of scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    rows: Vec<String>,
    columns: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(rows: Vec<String>, columns: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 || columns.len() < 2 {
            return Err(Error::ScoreTable(format!(
                "need at least 2 rows and 2 columns, got {}×{}",
                rows.len(),
                columns.len()
            )));
        }
        if values.len() != rows.len() {
            return Err(Error::ScoreTable(format!(
                "{} row labels for {} value rows",
                rows.len(),
                values.len()
            )));
        }
        for (r, row) in values.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::ScoreTable(format!(
                    "row `{}` has {} values, expected {}",
                    rows[r],
                    row.len(),
                    columns.len()
                )));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::ScoreTable(format!(
                    "non-finite value at row `{}`, column `{}`",
                    rows[r], columns[c]
                )));
            }
        }
        Ok(ScoreTable {
            rows,
            columns,
            values,
        })
    }

    /// Reads a CSV whose header holds treatment names (after one leading
    /// cell) and whose first column holds dataset names.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(input);
        let header = reader.headers()?.clone();
        let columns: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let name = rec.get(0).unwrap_or("").trim().to_string();
            let mut row = Vec::with_capacity(columns.len());
            for (c, col) in columns.iter().enumerate() {
                let cell = rec.get(c + 1).map(str::trim).unwrap_or("");
                if cell.is_empty() {
                    return Err(Error::ScoreTable(format!(
                        "missing cell at row `{name}`, column `{col}`"
                    )));
                }
                let v = cell.parse::<f64>().map_err(|_| {
                    Error::ScoreTable(format!(
                        "unparseable cell `{cell}` at row `{name}`, column `{col}`"
                    ))
                })?;
                row.push(v);
            }
            if rec.len() > columns.len() + 1 {
                return Err(Error::ScoreTable(format!("row `{name}` has extra cells")));
            }
            rows.push(name);
            values.push(row);
        }
        Self::new(rows, columns, values)
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// The table restricted to the named columns, in the given order.
    pub fn select_columns(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.columns
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::ScoreTable(format!("no column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.rows.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            self.values
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
        )
    }
}

/// Ranks within one row, 1 = best, tied values share their midrank.
pub fn rank_row(row: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = row[a].total_cmp(&row[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = midrank;
        }
        start = end;
    }
    ranks
}

/// Per-column rank sums over all rows.
pub fn rank_sums(table: &ScoreTable, higher_is_better: bool) -> Vec<f64> {
    let mut sums = vec![0.0; table.n_cols()];
    for row in &table.values {
        for (s, r) in sums.iter_mut().zip(rank_row(row, higher_is_better)) {
            *s += r;
        }
    }
    sums
}

/// Mean within-row rank of each column.
pub fn average_ranks(table: &ScoreTable, higher_is_better: bool) -> Vec<f64> {
    let n = table.n_rows() as f64;
    rank_sums(table, higher_is_better)
        .into_iter()
        .map(|s| s / n)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub columns: Vec<String>,
    pub n: usize,
    pub k: usize,
    pub rank_sums: Vec<f64>,
    pub average_ranks: Vec<f64>,
    pub chi_square: f64,
    pub chi_square_df: f64,
    pub chi_square_p: f64,
    /// Iman–Davenport statistic.
    pub f_statistic: f64,
    pub f_df1: f64,
    pub f_df2: f64,
    pub f_p: f64,
}

impl FriedmanResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record([
            "n",
            "k",
            "chi_square",
            "chi_square_df",
            "chi_square_p",
            "iman_davenport_f",
            "f_df1",
            "f_df2",
            "f_p",
        ])?;
        w.write_record([
            self.n.to_string(),
            self.k.to_string(),
            self.chi_square.to_string(),
            self.chi_square_df.to_string(),
            self.chi_square_p.to_string(),
            self.f_statistic.to_string(),
            self.f_df1.to_string(),
            self.f_df2.to_string(),
            self.f_p.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Friedman test on a table where higher scores are better.
///
/// `χ²_F = 12 / (n k (k+1)) Σ R_j² − 3 n (k+1)` with `R_j` the column rank
/// sums (no tie correction), and Iman–Davenport
/// `F = (n−1) χ²_F / (n (k−1) − χ²_F)` on `(k−1, (k−1)(n−1))` df.
pub fn friedman_test(table: &ScoreTable) -> Result<FriedmanResult> {
    let n = table.n_rows();
    let k = table.n_cols();
    if n < 2 || k < 2 {
        return Err(Error::ScoreTable("degenerate table".into()));
    }
    let sums = rank_sums(table, true);
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = sums.iter().map(|r| r * r).sum();
    let chi = (12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    let df = kf - 1.0;
    let denom = nf * (kf - 1.0) - chi;
    let f_stat = if denom > 1e-12 * nf * kf {
        (nf - 1.0) * chi / denom
    } else {
        f64::INFINITY
    };
    let (f_df1, f_df2) = (kf - 1.0, (kf - 1.0) * (nf - 1.0));
    Ok(FriedmanResult {
        columns: table.columns.clone(),
        n,
        k,
        average_ranks: sums.iter().map(|s| s / nf).collect(),
        rank_sums: sums,
        chi_square: chi,
        chi_square_df: df,
        chi_square_p: special::chi_square_sf(chi, df),
        f_statistic: f_stat,
        f_df1,
        f_df2,
        f_p: special::f_sf(f_stat, f_df1, f_df2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(values: Vec<Vec<f64>>) -> ScoreTable {
        let rows = (0..values.len()).map(|i| format!("r{i}")).collect();
        let cols = (0..values[0].len()).map(|j| format!("c{j}")).collect();
        ScoreTable::new(rows, cols, values).unwrap()
    }

    #[test]
    fn midranks_for_ties() {
        assert_eq!(rank_row(&[0.9, 0.5, 0.9, 0.1], true), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(rank_row(&[0.9, 0.5, 0.1], false), vec![3.0, 2.0, 1.0]);
        assert_eq!(rank_row(&[2.0; 4], true), vec![2.5; 4]);
    }

    #[test]
    fn dominant_column_ranks_first() {
        let t = table(vec![vec![0.9, 0.1, 0.2], vec![0.8, 0.7, 0.3], vec![0.99, 0.5, 0.6]]);
        assert_eq!(average_ranks(&t, true)[0], 1.0);
    }

    #[test]
    fn identical_columns_give_zero_statistic() {
        let t = table(vec![vec![0.7, 0.7, 0.7], vec![0.6, 0.6, 0.6]]);
        let r = friedman_test(&t).unwrap();
        assert_eq!(r.chi_square, 0.0);
        assert_eq!(r.chi_square_p, 1.0);
        assert_eq!(r.f_p, 1.0);
    }

    #[test]
    fn perfect_concordance_has_infinite_f() {
        let t = table(vec![vec![3.0, 2.0, 1.0], vec![3.0, 2.0, 1.0], vec![3.0, 2.0, 1.0]]);
        let r = friedman_test(&t).unwrap();
        assert_eq!(r.chi_square, 6.0);
        assert!(r.f_statistic.is_infinite());
        assert_eq!(r.f_p, 0.0);
    }

    #[test]
    fn table_shape_is_checked() {
        assert!(ScoreTable::new(vec!["a".into()], vec!["x".into(), "y".into()], vec![vec![1.0, 2.0]]).is_err());
        let csv = "ade,L,M\nD611,0.8,\nG620,0.7,0.9\n";
        let err = ScoreTable::read_csv(csv.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("D611") && err.contains("`M`"), "{err}");
    }

    /// Sign patterns for k = 2: χ²_F = (n₊ − n₋)² / n.
    #[test]
    fn two_columns_reduce_to_sign_statistic() {
        for n in 2..=6usize {
            for mask in 0..(1u32 << n) {
                let values: Vec<Vec<f64>> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
                    .collect();
                let plus = mask.count_ones() as f64;
                let minus = n as f64 - plus;
                let expected = (plus - minus).powi(2) / n as f64;
                let got = friedman_test(&table(values)).unwrap().chi_square;
                assert!((got - expected).abs() < 1e-12, "n={n} mask={mask}");
            }
        }
    }

    proptest! {
        #[test]
        fn rank_invariants(
            values in proptest::collection::vec(proptest::collection::vec(0u8..6, 4), 2..8),
            shift in -3.0f64..3.0, scale in 0.1f64..5.0, rot in 0usize..4,
        ) {
            let values: Vec<Vec<f64>> = values.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
            let t = table(values.clone());
            let (n, k) = (t.n_rows() as f64, t.n_cols() as f64);
            let sums = rank_sums(&t, true);
            prop_assert_eq!(sums.iter().sum::<f64>(), n * k * (k + 1.0) / 2.0);

            let warped = table(values.iter().map(|r| r.iter().map(|v| (v * scale + shift).exp()).collect()).collect());
            prop_assert_eq!(average_ranks(&warped, true), average_ranks(&t, true));

            let rotated = table(values.iter().map(|r| {
                let mut r = r.clone();
                r.rotate_left(rot);
                r
            }).collect());
            let a = friedman_test(&t).unwrap().chi_square;
            let b = friedman_test(&rotated).unwrap().chi_square;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
