//! Tokenization and the bundled stopword list.
//!
//! Every component that turns raw text into words (corpus ingestion, query
//! extraction, the text baselines) goes through [`tokenize`].

use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORDS_V1: &str = include_str!("../data/stopwords.txt");

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// The shipped English stopword list.
pub fn stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_V1
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits_on_punctuation() {
        assert_eq!(tokenize("Great PHONE, great phone!"), vec!["great", "phone", "great", "phone"]);
    }

    #[test]
    fn empty_and_symbol_only_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" -- !! ").is_empty());
    }

    #[test]
    fn digits_are_kept() {
        assert_eq!(tokenize("Up24 (v2.0)"), vec!["up24", "v2", "0"]);
    }

    #[test]
    fn stopword_list_is_sane() {
        let sw = stopwords();
        assert!(sw.len() > 250);
        assert!(sw.contains("the") && sw.contains("and"));
        assert!(!sw.contains("phone") && !sw.contains("electronics"));
    }
}
