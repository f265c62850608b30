//! Label-based retrieval metrics over Hamming rankings.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Ground truth: a query and a database item are relevant to each other when
/// their ±1 label vectors share a +1 coordinate.
#[derive(Debug, Clone)]
pub struct RelevanceOracle {
    queries: Vec<Vec<u64>>,
    database: Vec<Vec<u64>>,
}

fn positive_masks(labels: &DenseMatrix) -> Vec<Vec<u64>> {
    let words = labels.rows().div_ceil(64).max(1);
    (0..labels.cols())
        .map(|i| {
            let mut mask = vec![0u64; words];
            for r in 0..labels.rows() {
                if labels[(r, i)] > 0.0 {
                    mask[r / 64] |= 1 << (r % 64);
                }
            }
            mask
        })
        .collect()
}

impl RelevanceOracle {
    /// `query_labels` is c×q, `db_labels` is c×n.
    pub fn new(query_labels: &DenseMatrix, db_labels: &DenseMatrix) -> Result<Self> {
        if query_labels.rows() != db_labels.rows() {
            return Err(Error::usage(format!(
                "query labels have {} classes, database labels have {}",
                query_labels.rows(),
                db_labels.rows()
            )));
        }
        Ok(Self {
            queries: positive_masks(query_labels),
            database: positive_masks(db_labels),
        })
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn db_size(&self) -> usize {
        self.database.len()
    }

    #[inline]
    pub fn is_relevant(&self, query: usize, item: usize) -> bool {
        self.queries[query]
            .iter()
            .zip(&self.database[item])
            .any(|(a, b)| a & b != 0)
    }

    /// Relevance flags of a ranked list, truncated to `cutoff` when given.
    pub fn judge(&self, query: usize, ranking: &[usize], cutoff: Option<usize>) -> Vec<bool> {
        let k = cutoff.map_or(ranking.len(), |c| c.min(ranking.len()));
        ranking[..k].iter().map(|&i| self.is_relevant(query, i)).collect()
    }
}

/// Mean of precision@k over the ranks k holding a relevant item; 0 when
/// nothing in the list is relevant.
///
/// The sum is carried in double-double form so short hand-checkable lists
/// come out correctly rounded (e.g. `(1,0,1)` gives the nearest f64 to 5/6).
pub fn average_precision(ranked_relevance: &[bool]) -> f64 {
    let mut hits = 0usize;
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for (k, &rel) in ranked_relevance.iter().enumerate() {
        if rel {
            hits += 1;
            let (num, den) = (hits as f64, (k + 1) as f64);
            let q = num / den;
            let q_err = (-q).mul_add(den, num) / den;
            let s = hi + q;
            let bp = s - hi;
            let s_err = (hi - (s - bp)) + (q - bp);
            hi = s;
            lo += s_err + q_err;
        }
    }
    if hits == 0 {
        return 0.0;
    }
    let r = hits as f64;
    let (sum_hi, sum_lo) = (hi + lo, lo - ((hi + lo) - hi));
    let q = sum_hi / r;
    q + ((-q).mul_add(r, sum_hi) + sum_lo) / r
}

fn check_rankings(rankings: &[Vec<usize>], oracle: &RelevanceOracle) -> Result<()> {
    if rankings.len() != oracle.num_queries() {
        return Err(Error::usage(format!(
            "{} rankings for {} queries",
            rankings.len(),
            oracle.num_queries()
        )));
    }
    if let Some(bad) = rankings.iter().flatten().find(|&&i| i >= oracle.db_size()) {
        return Err(Error::usage(format!(
            "ranking names item {bad} but the database has {}",
            oracle.db_size()
        )));
    }
    Ok(())
}

/// Mean AP over queries. With a cutoff each list is truncated first and the
/// relevant count is taken within the truncated list.
pub fn mean_ap(rankings: &[Vec<usize>], oracle: &RelevanceOracle, cutoff: Option<usize>) -> Result<f64> {
    check_rankings(rankings, oracle)?;
    if rankings.is_empty() {
        return Err(Error::usage("no queries to evaluate"));
    }
    let total: f64 = rankings
        .iter()
        .enumerate()
        .map(|(q, r)| average_precision(&oracle.judge(q, r, cutoff)))
        .sum();
    Ok(total / rankings.len() as f64)
}

/// Mean over queries of the relevant fraction among the top `k`.
pub fn precision_at_k(rankings: &[Vec<usize>], oracle: &RelevanceOracle, k: usize) -> Result<f64> {
    check_rankings(rankings, oracle)?;
    if rankings.is_empty() {
        return Err(Error::usage("no queries to evaluate"));
    }
    if k == 0 || k > oracle.db_size() {
        return Err(Error::usage(format!(
            "precision@{k} out of range for a database of {}",
            oracle.db_size()
        )));
    }
    if let Some(short) = rankings.iter().position(|r| r.len() < k) {
        return Err(Error::usage(format!("ranking {short} has fewer than {k} items")));
    }
    let total: f64 = rankings
        .iter()
        .enumerate()
        .map(|(q, r)| oracle.judge(q, r, Some(k)).iter().filter(|&&b| b).count() as f64 / k as f64)
        .sum();
    Ok(total / rankings.len() as f64)
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub bits: usize,
    pub method: String,
    pub seed: u64,
    pub value: f64,
}

pub const METRICS_HEADER: &str = "metric,bits,method,seed,value";

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{:.6}", r.metric, r.bits, r.method, r.seed, r.value).unwrap();
    }
    out
}

/// Fixed-width table of the same rows, for terminals.
pub fn metrics_table(rows: &[MetricRow]) -> String {
    let mut out = format!("{:<14} {:>5} {:<12} {:>8} {:>10}\n", "metric", "bits", "method", "seed", "value");
    for r in rows {
        writeln!(out, "{:<14} {:>5} {:<12} {:>8} {:>10.4}", r.metric, r.bits, r.method, r.seed, r.value).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::one_hot_pm;

    #[test]
    fn hand_cases() {
        assert_eq!(average_precision(&[true, false, true]), 5.0 / 6.0);
        assert_eq!(average_precision(&[true, true, true]), 1.0);
        assert_eq!(average_precision(&[false, false]), 0.0);
        assert_eq!(average_precision(&[false, true]), 0.5);
    }

    fn oracle_two_classes() -> RelevanceOracle {
        let q = one_hot_pm(&[0, 1], 2).unwrap();
        let db = one_hot_pm(&[0, 1, 0, 1], 2).unwrap();
        RelevanceOracle::new(&q, &db).unwrap()
    }

    #[test]
    fn map_and_precision() {
        let oracle = oracle_two_classes();
        let perfect = vec![vec![0, 2, 1, 3], vec![1, 3, 0, 2]];
        assert_eq!(mean_ap(&perfect, &oracle, None).unwrap(), 1.0);
        assert_eq!(precision_at_k(&perfect, &oracle, 2).unwrap(), 1.0);
        let worst = vec![vec![1, 3, 0, 2], vec![0, 2, 1, 3]];
        assert_eq!(precision_at_k(&worst, &oracle, 2).unwrap(), 0.0);
        assert_eq!(precision_at_k(&worst, &oracle, 4).unwrap(), 0.5);
        let one = vec![vec![0, 1, 2, 3]];
        let single = RelevanceOracle::new(&one_hot_pm(&[0], 2).unwrap(), &one_hot_pm(&[0, 1, 0, 1], 2).unwrap()).unwrap();
        assert_eq!(mean_ap(&one, &single, None).unwrap(), 5.0 / 6.0);
        // Truncated at 1: only the first item counts.
        assert_eq!(mean_ap(&worst, &oracle, Some(1)).unwrap(), 0.0);
    }

    #[test]
    fn multi_label_relevance() {
        let q = DenseMatrix::from_rows(&[[1.0], [1.0], [-1.0]]).unwrap();
        let db = DenseMatrix::from_rows(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0]]).unwrap();
        let o = RelevanceOracle::new(&q, &db).unwrap();
        assert!(o.is_relevant(0, 0));
        assert!(!o.is_relevant(0, 1));
    }

    #[test]
    fn errors() {
        let oracle = oracle_two_classes();
        let r = vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]];
        assert!(precision_at_k(&r, &oracle, 5).is_err());
        assert!(precision_at_k(&r, &oracle, 0).is_err());
        assert!(mean_ap(&r[..1], &oracle, None).is_err());
        assert!(mean_ap(&[vec![9], vec![0]], &oracle, None).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![MetricRow {
            metric: "map".into(),
            bits: 32,
            method: "boost".into(),
            seed: 7,
            value: 0.5,
        }];
        assert_eq!(metrics_csv(&rows), "metric,bits,method,seed,value\nmap,32,boost,7,0.500000\n");
    }
}
