//! A small corpus in the public review/metadata dump format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const SUBCATS: [&str; 4] = ["Cases", "Chargers", "Headsets", "Screen Protectors"];
const EXTRA: [&str; 3] = ["Wearable", "Audio", "Power"];
const WORDS: [&str; 12] =
    ["sturdy", "slim", "fast", "cable", "battery", "sound", "clear", "glass", "grip", "power", "bass", "fit"];

/// Writes `reviews.json` and `meta.json` into `dir` and returns their paths.
pub fn write_toy_corpus(dir: &Path) -> (PathBuf, PathBuf) {
    let items = 24;
    let users = 30;
    let mut meta = String::new();
    for i in 0..items {
        let sub = SUBCATS[i % 4];
        let related: Vec<String> = (1..=2).map(|d| format!("\"I{:02}\"", (i + 4 * d) % items)).collect();
        writeln!(
            meta,
            r#"{{"asin": "I{i:02}", "title": "{sub} model {i}", "brand": "Brand{}", "categories": [["Cell Phones & Accessories", "Accessories", "{sub}"], ["Electronics", "Gadgets", "{}"]], "related": {{"also_bought": [{}], "also_viewed": ["I{i:02}", {}]}}}}"#,
            i % 3,
            EXTRA[i % 3],
            related.join(", "),
            related[0],
        )
        .unwrap();
    }
    let mut reviews = String::new();
    for u in 0..users {
        let fav = u % 4;
        for j in 0..6 {
            let i = (fav + 4 * ((u + j) % 6) + if j == 5 { 1 } else { 0 }) % items;
            let sub = SUBCATS[i % 4].to_lowercase();
            let text = format!(
                "{sub} {} {} accessories {} cell phones {} gadgets electronics",
                WORDS[(i * 3) % 12],
                WORDS[(i * 3 + 1) % 12],
                WORDS[(u + j) % 12],
                EXTRA[i % 3].to_lowercase()
            );
            writeln!(reviews, r#"{{"reviewerID": "U{u:02}", "asin": "I{i:02}", "reviewText": "{text}"}}"#).unwrap();
        }
    }
    let (r, m) = (dir.join("reviews.json"), dir.join("meta.json"));
    std::fs::write(&r, reviews).unwrap();
    std::fs::write(&m, meta).unwrap();
    (r, m)
}
