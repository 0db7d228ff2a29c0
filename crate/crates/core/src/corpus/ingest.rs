//! Line-delimited JSON readers for the public Amazon review and metadata
//! dumps.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{DremError, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Review {
    pub user_id: String,
    pub item_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemMeta {
    pub item_id: String,
    pub title_tokens: Vec<String>,
    pub description_tokens: Vec<String>,
    pub brand: Option<String>,
    pub category_paths: Vec<Vec<String>>,
    pub also_bought: Vec<String>,
    pub also_viewed: Vec<String>,
    pub bought_together: Vec<String>,
}

/// Records read from one file plus what was skipped on the way.
#[derive(Debug, Clone, Default)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    /// Records dropped because they carried no usable content.
    pub dropped: usize,
    /// `(line number, message)` for lines that failed to parse.
    pub malformed: Vec<(usize, String)>,
}

#[derive(Deserialize)]
struct RawReview {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    #[serde(rename = "reviewText", default)]
    review_text: Option<String>,
}

#[derive(Deserialize, Default)]
struct RawRelated {
    #[serde(default)]
    also_bought: Option<Vec<String>>,
    #[serde(default)]
    also_viewed: Option<Vec<String>>,
    #[serde(default)]
    bought_together: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct RawMeta {
    #[serde(default)]
    asin: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    brand: Option<String>,
    #[serde(default)]
    categories: Option<Vec<Vec<String>>>,
    #[serde(default)]
    related: Option<RawRelated>,
}

enum Parsed<T> {
    Record(T),
    Dropped,
    Malformed(String),
}

fn read_lines<T, F>(path: &Path, parse: F) -> Result<Ingested<T>>
where
    T: Send,
    F: Fn(&str) -> Parsed<T> + Sync,
{
    let text = fs::read_to_string(path).map_err(|e| DremError::io(path, e))?;
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)).collect();
    let parsed: Vec<(usize, Parsed<T>)> = lines.par_iter().map(|&(n, l)| (n, parse(l))).collect();

    let mut out = Ingested { records: Vec::with_capacity(parsed.len()), dropped: 0, malformed: vec![] };
    for (line, p) in parsed {
        match p {
            Parsed::Record(r) => out.records.push(r),
            Parsed::Dropped => out.dropped += 1,
            Parsed::Malformed(msg) => {
                warn!("{}:{line}: {msg}", path.display());
                out.malformed.push((line, msg));
            }
        }
    }
    Ok(out)
}

/// Reads reviews (`reviewerID`, `asin`, `reviewText`), tokenizing the text.
/// Reviews whose text yields no tokens are dropped.
pub fn ingest_reviews(path: &Path) -> Result<Ingested<Review>> {
    read_lines(path, |line| match serde_json::from_str::<RawReview>(line) {
        Err(e) => Parsed::Malformed(e.to_string()),
        Ok(raw) => {
            let tokens = tokenize(raw.review_text.as_deref().unwrap_or(""));
            if tokens.is_empty() {
                Parsed::Dropped
            } else {
                Parsed::Record(Review { user_id: raw.reviewer_id, item_id: raw.asin, tokens })
            }
        }
    })
}

fn clean_links(item: &str, links: Option<Vec<String>>) -> Vec<String> {
    let mut seen = HashSet::new();
    links.unwrap_or_default().into_iter().filter(|l| l != item && seen.insert(l.clone())).collect()
}

/// Reads item metadata. Records without an `asin` are skipped; related-item
/// lists lose self-links and duplicates.
pub fn ingest_metadata(path: &Path) -> Result<Ingested<ItemMeta>> {
    read_lines(path, |line| match serde_json::from_str::<RawMeta>(line) {
        Err(e) => Parsed::Malformed(e.to_string()),
        Ok(raw) => match raw.asin.filter(|a| !a.is_empty()) {
            None => Parsed::Malformed("record has no asin".into()),
            Some(item_id) => {
                let related = raw.related.unwrap_or_default();
                Parsed::Record(ItemMeta {
                    title_tokens: tokenize(raw.title.as_deref().unwrap_or("")),
                    description_tokens: tokenize(raw.description.as_deref().unwrap_or("")),
                    brand: raw.brand.map(|b| b.trim().to_string()).filter(|b| !b.is_empty()),
                    category_paths: raw.categories.unwrap_or_default().into_iter().filter(|p| !p.is_empty()).collect(),
                    also_bought: clean_links(&item_id, related.also_bought),
                    also_viewed: clean_links(&item_id, related.also_viewed),
                    bought_together: clean_links(&item_id, related.bought_together),
                    item_id,
                })
            }
        },
    })
}

/// Iteratively keeps only users and items with at least `k` reviews each.
pub fn k_core_filter(mut reviews: Vec<Review>, k: usize) -> Vec<Review> {
    loop {
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for r in &reviews {
            *users.entry(&r.user_id).or_default() += 1;
            *items.entry(&r.item_id).or_default() += 1;
        }
        let keep: Vec<bool> =
            reviews.iter().map(|r| users[r.user_id.as_str()] >= k && items[r.item_id.as_str()] >= k).collect();
        if keep.iter().all(|&b| b) {
            return reviews;
        }
        let mut flags = keep.into_iter();
        reviews.retain(|_| flags.next().unwrap());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn reviews_are_tokenized_in_order() {
        let f = file_with(&[
            r#"{"reviewerID": "U1", "asin": "I1", "reviewText": "Great PHONE, great phone!"}"#,
            r#"{"reviewerID": "U2", "asin": "I1", "reviewText": "ok"}"#,
        ]);
        let got = ingest_reviews(f.path()).unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.records[0].tokens, vec!["great", "phone", "great", "phone"]);
        assert_eq!(got.records[1].user_id, "U2");
    }

    #[test]
    fn empty_text_is_dropped_and_bad_lines_reported() {
        let f = file_with(&[
            r#"{"reviewerID": "U1", "asin": "I1", "reviewText": ""}"#,
            r#"{"reviewerID": "U1", "asin": "I1"}"#,
            "not json",
            r#"{"reviewerID": "U1", "asin": "I2", "reviewText": "fine"}"#,
        ]);
        let got = ingest_reviews(f.path()).unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.dropped, 2);
        assert_eq!(got.malformed.len(), 1);
        assert_eq!(got.malformed[0].0, 3);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        assert!(matches!(ingest_reviews(Path::new("/nonexistent/reviews.json")), Err(DremError::Io { .. })));
    }

    #[test]
    fn metadata_cleans_links_and_optional_fields() {
        let f = file_with(&[
            r#"{"asin": "A", "related": {"also_bought": ["A", "B", "A", "B"]}, "categories": [["X", "Y"]]}"#,
            r#"{"title": "no id"}"#,
        ]);
        let got = ingest_metadata(f.path()).unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.malformed.len(), 1);
        let m = &got.records[0];
        assert_eq!(m.also_bought, vec!["B"]);
        assert!(m.also_viewed.is_empty());
        assert_eq!(m.brand, None);
        assert_eq!(m.category_paths, vec![vec!["X".to_string(), "Y".to_string()]]);
    }

    #[test]
    fn k_core_removes_sparse_users_iteratively() {
        let r = |u: &str, i: &str| Review { user_id: u.into(), item_id: i.into(), tokens: vec!["x".into()] };
        // u1,u2 each review i1,i2; u3 reviews only i3 once.
        let reviews = vec![r("u1", "i1"), r("u1", "i2"), r("u2", "i1"), r("u2", "i2"), r("u3", "i3")];
        let kept = k_core_filter(reviews, 2);
        assert_eq!(kept.len(), 4);
        assert!(kept.iter().all(|r| r.user_id != "u3"));
    }
}
