//! Ranking items for a user and a query by `(u + f(q))·i`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{DremError, Result};
use crate::model::{dot, ModelParams, Translation};
use crate::schema::EntityType;

/// A ranked result list for one `(user, query)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub user: u32,
    pub query: u32,
    /// `(item, score)`, best first.
    pub items: Vec<(u32, f64)>,
}

impl RankedList {
    pub fn item_ids(&self) -> Vec<u32> {
        self.items.iter().map(|&(i, _)| i).collect()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    id: u32,
}

impl Ord for Candidate {
    /// Greater means ranked earlier: higher score, then lower id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// The `top_k` best `(id, score)` pairs, score descending and ties by
/// ascending id, using a bounded heap.
pub fn top_k(scores: impl IntoIterator<Item = f64>, top_k: usize) -> Vec<(u32, f64)> {
    if top_k == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(top_k + 1);
    for (id, score) in scores.into_iter().enumerate() {
        // Folds −0.0 into +0.0 so the id tie-break applies to zero scores.
        let c = Candidate { score: score + 0.0, id: id as u32 };
        if heap.len() < top_k {
            heap.push(Reverse(c));
        } else if let Some(mut worst) = heap.peek_mut() {
            if c > worst.0 {
                *worst = Reverse(c);
            }
        }
    }
    let mut out: Vec<Candidate> = heap.into_iter().map(|r| r.0).collect();
    out.sort_by(|a, b| b.cmp(a));
    out.into_iter().map(|c| (c.id, c.score)).collect()
}

/// `(u + f(q))·i` for every item, in item-id order.
pub fn score_items(model: &ModelParams, user: u32, query_words: &[u32]) -> Result<Vec<f64>> {
    let v = model.project_query(query_words)?;
    let h = model.translate(EntityType::User, user, Translation::Query(&v))?;
    let items = model.table(EntityType::Item);
    Ok((0..items.rows()).map(|i| dot(&h, items.row(i))).collect())
}

/// `u·i` for every item, ignoring the query.
pub fn score_items_without_query(model: &ModelParams, user: u32) -> Result<Vec<f64>> {
    let u = model.entity(EntityType::User, user)?;
    let items = model.table(EntityType::Item);
    Ok((0..items.rows()).map(|i| dot(u, items.row(i))).collect())
}

pub fn rank_items(model: &ModelParams, user: u32, query: u32, query_words: &[u32], k: usize) -> Result<RankedList> {
    let scores = score_items(model, user, query_words)?;
    Ok(RankedList { user, query, items: top_k(scores, k) })
}

/// Key shared by run files and qrels: `user_query`.
pub fn query_key(user: &str, query: u32) -> String {
    format!("{user}_{query}")
}

/// Writes TREC run lines `key Q0 item rank score tag`.
pub fn write_run(
    out: &mut impl Write,
    lists: &[RankedList],
    tag: &str,
    user_name: impl Fn(u32) -> String,
    item_name: impl Fn(u32) -> String,
) -> std::io::Result<()> {
    for list in lists {
        let key = query_key(&user_name(list.user), list.query);
        for (rank, (item, score)) in list.items.iter().enumerate() {
            writeln!(out, "{key} Q0 {} {} {score} {tag}", item_name(*item), rank + 1)?;
        }
    }
    Ok(())
}

/// One line of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLine {
    pub key: String,
    pub item: String,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

pub fn parse_run(reader: impl BufRead, path: &Path) -> Result<Vec<RunLine>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DremError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| DremError::Parse { path: path.to_path_buf(), line: n + 1, message };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let rank = f[3].parse().map_err(|_| err(format!("bad rank {:?}", f[3])))?;
        let score = f[4].parse().map_err(|_| err(format!("bad score {:?}", f[4])))?;
        out.push(RunLine { key: f[0].into(), item: f[2].into(), rank, score, tag: f[5].into() });
    }
    Ok(out)
}

pub fn read_run(path: &Path) -> Result<Vec<RunLine>> {
    let file = std::fs::File::open(path).map_err(|e| DremError::io(path, e))?;
    parse_run(std::io::BufReader::new(file), path)
}
