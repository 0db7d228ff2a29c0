//! Text baselines over concatenated item documents: query likelihood with
//! Dirichlet smoothing and BM25.

use std::collections::HashMap;

use crate::corpus::{item_documents, EntityCatalog, ItemMeta, Review};
use crate::error::{DremError, Result};
use crate::retrieval::{top_k, RankedList};

/// Term statistics of one document per item.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocStore {
    terms: HashMap<String, u32>,
    tf: Vec<HashMap<u32, u64>>,
    lengths: Vec<u64>,
    corpus_tf: Vec<u64>,
    df: Vec<u64>,
    corpus_len: u64,
}

impl DocStore {
    pub fn new<S: AsRef<str>>(docs: &[Vec<S>]) -> Self {
        let mut store = DocStore::default();
        for doc in docs {
            let mut tf: HashMap<u32, u64> = HashMap::new();
            for tok in doc {
                let next = store.terms.len() as u32;
                let id = *store.terms.entry(tok.as_ref().to_string()).or_insert(next);
                if id as usize == store.corpus_tf.len() {
                    store.corpus_tf.push(0);
                    store.df.push(0);
                }
                *tf.entry(id).or_default() += 1;
                store.corpus_tf[id as usize] += 1;
            }
            for &id in tf.keys() {
                store.df[id as usize] += 1;
            }
            store.lengths.push(doc.len() as u64);
            store.corpus_len += doc.len() as u64;
            store.tf.push(tf);
        }
        store
    }

    pub fn num_docs(&self) -> usize {
        self.lengths.len()
    }

    pub fn doc_len(&self, doc: u32) -> u64 {
        self.lengths[doc as usize]
    }

    pub fn corpus_len(&self) -> u64 {
        self.corpus_len
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.lengths.is_empty() {
            0.0
        } else {
            self.corpus_len as f64 / self.lengths.len() as f64
        }
    }

    fn term(&self, word: &str) -> Option<u32> {
        self.terms.get(word).copied()
    }

    /// `#(w,d)`.
    pub fn term_freq(&self, word: &str, doc: u32) -> u64 {
        self.term(word).and_then(|t| self.tf[doc as usize].get(&t).copied()).unwrap_or(0)
    }

    /// `#(w,C)`.
    pub fn corpus_freq(&self, word: &str) -> u64 {
        self.term(word).map_or(0, |t| self.corpus_tf[t as usize])
    }

    pub fn doc_freq(&self, word: &str) -> u64 {
        self.term(word).map_or(0, |t| self.df[t as usize])
    }

    fn check_doc(&self, doc: u32) -> Result<()> {
        if (doc as usize) < self.num_docs() {
            Ok(())
        } else {
            Err(DremError::UnknownId { kind: crate::schema::EntityType::Item, id: doc })
        }
    }
}

/// One document per item from title, description and the training reviews.
pub fn build_item_documents(catalog: &EntityCatalog, metadata: &[ItemMeta], train_reviews: &[&Review]) -> DocStore {
    DocStore::new(&item_documents(catalog, metadata, train_reviews))
}

/// Counts of each distinct query word, in first-seen order.
fn query_counts<S: AsRef<str>>(query: &[S]) -> Vec<(&str, u64)> {
    let mut out: Vec<(&str, u64)> = Vec::new();
    for w in query {
        match out.iter_mut().find(|(x, _)| *x == w.as_ref()) {
            Some((_, n)) => *n += 1,
            None => out.push((w.as_ref(), 1)),
        }
    }
    out
}

/// `log((#(w,d) + μ·#(w,C)/|C|) / (|d| + μ))`.
pub fn ql_term(tf: u64, doc_len: u64, corpus_tf: u64, corpus_len: u64, mu: f64) -> f64 {
    ((tf as f64 + mu * corpus_tf as f64 / corpus_len as f64) / (doc_len as f64 + mu)).ln()
}

/// Dirichlet-smoothed query log-likelihood in natural log. Words absent
/// from the corpus are skipped.
pub fn ql_score<S: AsRef<str>>(store: &DocStore, query: &[S], doc: u32, mu: f64) -> Result<f64> {
    ql_score_in_base(store, query, doc, mu, std::f64::consts::E)
}

/// [`ql_score`] with logarithms in an arbitrary base.
pub fn ql_score_in_base<S: AsRef<str>>(store: &DocStore, query: &[S], doc: u32, mu: f64, base: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(DremError::InvalidArgument(format!("μ must be positive, got {mu}")));
    }
    store.check_doc(doc)?;
    let mut score = 0.0;
    for (w, n) in query_counts(query) {
        let cf = store.corpus_freq(w);
        if cf == 0 {
            log::warn!("query word {w:?} never occurs in the corpus; skipped");
            continue;
        }
        let t = ql_term(store.term_freq(w, doc), store.doc_len(doc), cf, store.corpus_len(), mu);
        score += n as f64 * t / base.ln();
    }
    Ok(score)
}

/// `ln((N − df + 0.5)/(df + 0.5) + 1)`.
pub fn bm25_idf(df: u64, num_docs: usize) -> f64 {
    ((num_docs as f64 - df as f64 + 0.5) / (df as f64 + 0.5) + 1.0).ln()
}

/// `tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avg|d|))`.
pub fn bm25_saturation(tf: f64, doc_len: u64, avg_len: f64, k1: f64, b: f64) -> f64 {
    let norm = if avg_len > 0.0 { 1.0 - b + b * doc_len as f64 / avg_len } else { 1.0 };
    tf * (k1 + 1.0) / (tf + k1 * norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// Saturate on the query-side count `#(w,q)` instead of `#(w,d)`; only
    /// words present in the document contribute.
    pub literal_paper_formula: bool,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75, literal_paper_formula: false }
    }
}

pub fn bm25_score<S: AsRef<str>>(store: &DocStore, query: &[S], doc: u32, params: &Bm25Params) -> Result<f64> {
    store.check_doc(doc)?;
    let avg = store.avg_doc_len();
    let len = store.doc_len(doc);
    let mut score = 0.0;
    for (w, n) in query_counts(query) {
        let tf = store.term_freq(w, doc);
        if tf == 0 {
            continue;
        }
        let idf = bm25_idf(store.doc_freq(w), store.num_docs());
        score += if params.literal_paper_formula {
            idf * bm25_saturation(n as f64, len, avg, params.k1, params.b)
        } else {
            n as f64 * idf * bm25_saturation(tf as f64, len, avg, params.k1, params.b)
        };
    }
    Ok(score)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scorer {
    QueryLikelihood { mu: f64 },
    Bm25(Bm25Params),
}

impl Scorer {
    pub fn ql() -> Self {
        Scorer::QueryLikelihood { mu: 2000.0 }
    }

    pub fn bm25() -> Self {
        Scorer::Bm25(Bm25Params::default())
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Scorer::QueryLikelihood { .. } => "ql",
            Scorer::Bm25(_) => "bm25",
        }
    }

    pub fn score<S: AsRef<str>>(&self, store: &DocStore, query: &[S], doc: u32) -> Result<f64> {
        match self {
            Scorer::QueryLikelihood { mu } => ql_score(store, query, doc, *mu),
            Scorer::Bm25(p) => bm25_score(store, query, doc, p),
        }
    }
}

/// Ranks every document for a query; the user only labels the list.
pub fn rank_baseline<S: AsRef<str>>(
    store: &DocStore,
    scorer: &Scorer,
    user: u32,
    query: u32,
    words: &[S],
    k: usize,
) -> Result<RankedList> {
    if words.is_empty() {
        return Err(DremError::EmptyQuery);
    }
    let scores = (0..store.num_docs() as u32).map(|d| scorer.score(store, words, d)).collect::<Result<Vec<_>>>()?;
    Ok(RankedList { user, query, items: top_k(scores, k) })
}
