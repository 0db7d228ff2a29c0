use std::collections::{BTreeMap, HashMap};

use super::Review;
use crate::error::{DremError, Result};

/// Dense, order-independent mapping between names and ids: ids follow the
/// sorted order of the names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort();
        names.dedup();
        Self::from_sorted(names)
    }

    /// Builds from names already in id order (e.g. read back from disk).
    pub fn from_sorted(names: Vec<String>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        IdMap { names, index }
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: IdMap,
    freq: Vec<u64>,
}

impl Vocabulary {
    pub fn from_counts(words: IdMap, freq: Vec<u64>) -> Self {
        Vocabulary { words, freq }
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.words.id(word)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.name(id)
    }

    pub fn frequency(&self, id: u32) -> u64 {
        self.freq[id as usize]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &IdMap {
        &self.words
    }
}

/// Keeps every word whose corpus frequency is at least `min_freq`.
pub fn build_vocabulary(reviews: &[Review], min_freq: u64) -> Result<Vocabulary> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in reviews {
        for t in &r.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(DremError::EmptyCorpus("no review tokens to build a vocabulary from"));
    }
    let (names, freq): (Vec<String>, Vec<u64>) =
        counts.into_iter().filter(|&(_, c)| c >= min_freq).map(|(w, c)| (w.to_string(), c)).unzip();
    Ok(Vocabulary { words: IdMap::from_sorted(names), freq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn review(words: &[&str]) -> Review {
        Review { user_id: "u".into(), item_id: "i".into(), tokens: words.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn threshold_boundary() {
        let mut words = vec!["a"; 6];
        words.extend(["b"; 5]);
        words.extend(["c"; 4]);
        let v = build_vocabulary(&[review(&words)], 5).unwrap();
        assert_eq!(v.words().names(), &["a", "b"]);
        assert_eq!(v.frequency(v.id("b").unwrap()), 5);
        assert_eq!(v.id("c"), None);
        let all = build_vocabulary(&[review(&words)], 1).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(build_vocabulary(&[], 5).is_err());
    }

    #[test]
    fn id_map_is_sorted_and_dense() {
        let m = IdMap::from_names(["b", "a", "c", "a"]);
        assert_eq!(m.names(), &["a", "b", "c"]);
        assert_eq!(m.id("c"), Some(2));
        assert_eq!(m.name(1), Some("b"));
    }

    proptest! {
        #[test]
        fn retention_is_exactly_the_frequency_threshold(
            tokens in prop::collection::vec(0u8..12, 0..200),
            min_freq in 1u64..8,
        ) {
            let words: Vec<String> = tokens.iter().map(|t| format!("w{t}")).collect();
            let r = Review { user_id: "u".into(), item_id: "i".into(), tokens: words.clone() };
            let Ok(v) = build_vocabulary(&[r], min_freq) else {
                prop_assert!(words.is_empty());
                return Ok(());
            };
            let mut counts: HashMap<&str, u64> = HashMap::new();
            for w in &words { *counts.entry(w).or_default() += 1; }
            for (w, c) in counts {
                prop_assert_eq!(v.id(w).is_some(), c >= min_freq);
            }
            for id in 0..v.len() as u32 {
                prop_assert!(v.frequency(id) >= min_freq);
            }
        }
    }
}
