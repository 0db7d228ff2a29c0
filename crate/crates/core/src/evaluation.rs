//! Ranking metrics, run-file evaluation and the paired randomization test.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DremError, Result};
use crate::retrieval::RunLine;
use crate::rng::{stream, Stream};

/// Query key → relevant item names.
pub type Qrels = BTreeMap<String, BTreeSet<String>>;

/// Precision at each relevant retrieved rank, summed, over all relevant
/// items (retrieved or not).
pub fn average_precision<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, item) in ranked.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

pub fn reciprocal_rank<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>) -> f64 {
    ranked.iter().position(|i| relevant.contains(i)).map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Binary-gain NDCG over the first ten ranks.
pub fn ndcg_at_10<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>) -> f64 {
    let discount = |r: usize| 1.0 / ((r + 2) as f64).log2();
    let dcg: f64 =
        ranked.iter().take(10).enumerate().filter(|(_, i)| relevant.contains(i)).map(|(r, _)| discount(r)).sum();
    let idcg: f64 = (0..relevant.len().min(10)).map(discount).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Two-sided paired randomization test on the mean difference. Each pair's
/// labels swap independently with probability ½; the observed assignment
/// counts as one permutation.
pub fn fisher_randomization(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(DremError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = d.iter().sum::<f64>().abs();
    let tolerance = 1e-12 * d.iter().map(|x| x.abs()).sum::<f64>();
    let mut rng = stream(seed, Stream::Significance);
    let mut at_least = 0usize;
    for _ in 0..iterations {
        let s: f64 = d.iter().map(|&x| if rng.random::<bool>() { x } else { -x }).sum();
        if s.abs() >= observed - tolerance {
            at_least += 1;
        }
    }
    Ok((1 + at_least) as f64 / (iterations + 1) as f64)
}

/// Reads `key 0 item relevance` lines; non-positive relevance is ignored.
pub fn parse_qrels(reader: impl BufRead, path: &Path) -> Result<Qrels> {
    let mut q = Qrels::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DremError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let rel: Option<i64> = f.get(3).and_then(|r| r.parse().ok());
        match (f.len(), rel) {
            (4, Some(rel)) => {
                let entry = q.entry(f[0].to_string()).or_default();
                if rel > 0 {
                    entry.insert(f[2].to_string());
                }
            }
            _ => {
                return Err(DremError::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: "expected `key 0 item relevance`".into(),
                })
            }
        }
    }
    Ok(q)
}

pub fn read_qrels(path: &Path) -> Result<Qrels> {
    let file = std::fs::File::open(path).map_err(|e| DremError::io(path, e))?;
    parse_qrels(std::io::BufReader::new(file), path)
}

pub fn write_qrels(out: &mut impl Write, qrels: &Qrels) -> std::io::Result<()> {
    for (key, items) in qrels {
        for item in items {
            writeln!(out, "{key} 0 {item} 1")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub key: String,
    pub ap: f64,
    pub rr: f64,
    pub ndcg10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pairs: usize,
    pub map: f64,
    pub mrr: f64,
    pub ndcg10: f64,
    pub per_pair: Vec<PairMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Map,
    Mrr,
    Ndcg10,
}

impl MetricsReport {
    /// Per-pair values of one metric, in key order.
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.per_pair
            .iter()
            .map(|p| match metric {
                Metric::Map => p.ap,
                Metric::Mrr => p.rr,
                Metric::Ndcg10 => p.ndcg10,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs    {}", self.pairs)?;
        writeln!(f, "MAP      {:.4}", self.map)?;
        writeln!(f, "MRR      {:.4}", self.mrr)?;
        write!(f, "NDCG@10  {:.4}", self.ndcg10)
    }
}

/// Scores a run against judgments. Lines are ordered per key by their rank
/// column; judged keys absent from the run score zero; keys with no
/// relevant item are skipped.
pub fn evaluate(run: &[RunLine], qrels: &Qrels) -> MetricsReport {
    let mut lists: BTreeMap<&str, Vec<(u32, &str)>> = BTreeMap::new();
    for l in run {
        lists.entry(l.key.as_str()).or_default().push((l.rank, l.item.as_str()));
    }
    for list in lists.values_mut() {
        list.sort();
    }
    let mut per_pair = Vec::new();
    for (key, relevant) in qrels {
        if relevant.is_empty() {
            warn!("query {key} has no relevant items; skipped");
            continue;
        }
        let ranked: Vec<String> =
            lists.get(key.as_str()).map(|l| l.iter().map(|(_, i)| i.to_string()).collect()).unwrap_or_default();
        per_pair.push(PairMetrics {
            key: key.clone(),
            ap: average_precision(&ranked, relevant),
            rr: reciprocal_rank(&ranked, relevant),
            ndcg10: ndcg_at_10(&ranked, relevant),
        });
    }
    let n = per_pair.len();
    let mean = |f: fn(&PairMetrics) -> f64| if n == 0 { 0.0 } else { per_pair.iter().map(f).sum::<f64>() / n as f64 };
    MetricsReport { pairs: n, map: mean(|p| p.ap), mrr: mean(|p| p.rr), ndcg10: mean(|p| p.ndcg10), per_pair }
}

pub fn evaluate_run(run_path: &Path, qrels_path: &Path) -> Result<MetricsReport> {
    Ok(evaluate(&crate::retrieval::read_run(run_path)?, &read_qrels(qrels_path)?))
}

/// Pairwise Fisher p-values between systems on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub systems: Vec<String>,
    /// `p[i][j]` compares system `i` with system `j`; the diagonal is 1.
    pub p: Vec<Vec<f64>>,
}

pub fn significance_matrix(
    reports: &[(String, MetricsReport)],
    metric: Metric,
    iterations: usize,
    seed: u64,
) -> Result<SignificanceMatrix> {
    let n = reports.len();
    let values: Vec<Vec<f64>> = reports.iter().map(|(_, r)| r.values(metric)).collect();
    let mut p = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = fisher_randomization(&values[i], &values[j], iterations, seed)?;
            p[i][j] = v;
            p[j][i] = v;
        }
    }
    Ok(SignificanceMatrix { systems: reports.iter().map(|(s, _)| s.clone()).collect(), p })
}

impl fmt::Display for SignificanceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.systems.iter().map(String::len).max().unwrap_or(0).max(8);
        write!(f, "{:width$}", "")?;
        for s in &self.systems {
            write!(f, " {s:>width$}")?;
        }
        for (s, row) in self.systems.iter().zip(&self.p) {
            write!(f, "\n{s:width$}")?;
            for v in row {
                write!(f, " {v:>width$.4}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[u32]) -> BTreeSet<u32> {
        items.iter().copied().collect()
    }

    #[test]
    fn average_precision_examples() {
        assert!((average_precision(&[1, 9, 2], &set(&[1, 2])) - 0.833_333_333_333_333_4).abs() < 1e-12);
        assert_eq!(average_precision(&[1, 2, 9], &set(&[1, 2])), 1.0);
        assert_eq!(average_precision(&[7, 8], &set(&[1, 2])), 0.0);
        // One of two relevant items retrieved.
        assert_eq!(average_precision(&[1, 8], &set(&[1, 2])), 0.5);
    }

    #[test]
    fn reciprocal_rank_examples() {
        assert_eq!(reciprocal_rank(&[5, 1], &set(&[1])), 0.5);
        assert_eq!(reciprocal_rank(&[1, 5], &set(&[1])), 1.0);
        assert_eq!(reciprocal_rank(&[5, 6], &set(&[1])), 0.0);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_10(&[1], &set(&[1])), 1.0);
        assert!((ndcg_at_10(&[5, 6, 1], &set(&[1])) - 0.5).abs() < 1e-15);
        let eleven: Vec<u32> = (10..20).chain([1]).collect();
        assert_eq!(ndcg_at_10(&eleven, &set(&[1])), 0.0);
    }

    #[test]
    fn ndcg_ignores_order_below_ten() {
        let mut a: Vec<u32> = (0..30).collect();
        let rel = set(&[2, 5, 12, 20, 25]);
        let base = ndcg_at_10(&a, &rel);
        a[10..].reverse();
        assert_eq!(ndcg_at_10(&a, &rel), base);
    }

    #[test]
    fn randomization_examples() {
        let a = vec![0.3, 0.5, 0.1];
        assert_eq!(fisher_randomization(&a, &a, 1000, 1).unwrap(), 1.0);
        let b: Vec<f64> = (0..50).map(|i| (i % 7) as f64 / 7.0).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 1.0).collect();
        assert!(fisher_randomization(&a, &b, 10_000, 1).unwrap() <= 0.001);
        assert!(fisher_randomization(&a, &b[1..], 10, 1).is_err());
        let p = fisher_randomization(&[1.0], &[0.0], 10_000, 3).unwrap();
        // Both assignments give |d| = 1, so every permutation counts.
        assert_eq!(p, 1.0);
    }

    #[test]
    fn qrels_and_run_evaluation() {
        let qrels = parse_qrels(&b"u_1 0 a 1\nu_1 0 b 1\nu_2 0 c 1\nu_3 0 d 0\n"[..], Path::new("q")).unwrap();
        let run =
            crate::retrieval::parse_run(&b"u_1 Q0 x 2 0.5 t\nu_1 Q0 a 1 0.9 t\nu_1 Q0 b 3 0.1 t\n"[..], Path::new("r"))
                .unwrap();
        let rep = evaluate(&run, &qrels);
        assert_eq!(rep.pairs, 2);
        // u_1: [a, x, b]; u_2 missing from the run.
        assert!((rep.per_pair[0].ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(rep.per_pair[1].ap, 0.0);
        assert!((rep.map - (1.0 + 2.0 / 3.0) / 4.0).abs() < 1e-15);
        let empty = evaluate(&[], &qrels);
        assert_eq!((empty.map, empty.mrr, empty.ndcg10), (0.0, 0.0, 0.0));
        assert!(parse_qrels(&b"u_1 0 a\n"[..], Path::new("q")).is_err());
    }

    #[test]
    fn matrix_is_symmetric() {
        let mk = |vals: &[f64]| MetricsReport {
            pairs: vals.len(),
            map: 0.0,
            mrr: 0.0,
            ndcg10: 0.0,
            per_pair: vals
                .iter()
                .enumerate()
                .map(|(i, &v)| PairMetrics { key: i.to_string(), ap: v, rr: v, ndcg10: v })
                .collect(),
        };
        let reports = vec![
            ("a".into(), mk(&[0.1, 0.2, 0.9])),
            ("b".into(), mk(&[0.5, 0.4, 0.3])),
            ("c".into(), mk(&[0.1, 0.2, 0.9])),
        ];
        let m = significance_matrix(&reports, Metric::Map, 500, 2).unwrap();
        assert_eq!(m.p[0][2], 1.0);
        assert_eq!(m.p[0][1], m.p[1][0]);
        assert!(m.to_string().lines().count() == 4);
    }
}
