use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{EntityCatalog, ItemMeta, Vocabulary};
use crate::text::tokenize;

/// A pseudo-query derived from one category hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    /// Distinct word ids in first-occurrence order.
    pub words: Vec<u32>,
    /// The category path the query was first extracted from.
    pub source_path: Vec<String>,
    /// Items carrying a path that produces this query, ascending.
    pub items: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuerySet {
    queries: Vec<Query>,
    by_item: Vec<Vec<u32>>,
}

impl QuerySet {
    /// Indexes queries by item; `num_items` bounds the item ids.
    pub fn new(queries: Vec<Query>, num_items: usize) -> Self {
        let mut by_item = vec![Vec::new(); num_items];
        for (qid, q) in queries.iter().enumerate() {
            for &i in &q.items {
                by_item[i as usize].push(qid as u32);
            }
        }
        QuerySet { queries, by_item }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Query> {
        self.queries.get(id as usize)
    }

    pub fn words(&self, id: u32) -> &[u32] {
        &self.queries[id as usize].words
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Query)> {
        self.queries.iter().enumerate().map(|(i, q)| (i as u32, q))
    }

    /// Query ids extracted from the item's category paths.
    pub fn for_item(&self, item: u32) -> &[u32] {
        self.by_item.get(item as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn text(&self, id: u32, vocab: &Vocabulary) -> String {
        self.words(id).iter().filter_map(|&w| vocab.word(w)).collect::<Vec<_>>().join(" ")
    }
}

/// Turns one category path into query terms: tokenize the concatenated
/// level names, drop stopwords, keep the first occurrence of each word.
pub fn query_terms(path: &[String], stopwords: &HashSet<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    tokenize(&path.join(" ")).into_iter().filter(|t| !stopwords.contains(t) && seen.insert(t.clone())).collect()
}

/// Builds the query pool from every catalog item's category paths with more
/// than two levels. Out-of-vocabulary terms are dropped and queries that end
/// up empty are skipped; identical queries merge into one id.
/// Word ids, source path and items of one pooled query.
type PooledQuery = (Vec<u32>, Vec<String>, BTreeSet<u32>);

pub fn extract_queries(catalog: &EntityCatalog, metadata: &[ItemMeta], stopwords: &HashSet<String>) -> QuerySet {
    let mut pool: BTreeMap<Vec<String>, PooledQuery> = BTreeMap::new();
    let mut metas: Vec<(u32, &ItemMeta)> =
        metadata.iter().filter_map(|m| catalog.items.id(&m.item_id).map(|id| (id, m))).collect();
    metas.sort_by_key(|(id, _)| *id);
    for (item, m) in metas {
        for path in m.category_paths.iter().filter(|p| p.len() > 2) {
            let terms: Vec<String> =
                query_terms(path, stopwords).into_iter().filter(|t| catalog.words.id(t).is_some()).collect();
            if terms.is_empty() {
                continue;
            }
            let ids = terms.iter().map(|t| catalog.words.id(t).unwrap()).collect();
            pool.entry(terms).or_insert_with(|| (ids, path.clone(), BTreeSet::new())).2.insert(item);
        }
    }
    let queries = pool
        .into_values()
        .map(|(words, source_path, items)| Query { words, source_path, items: items.into_iter().collect() })
        .collect();
    QuerySet::new(queries, catalog.items.len())
}
