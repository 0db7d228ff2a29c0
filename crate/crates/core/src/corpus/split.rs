use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{DynamicTriple, EntityCatalog, QuerySet, Review};
use crate::error::{DremError, Result};
use crate::rng::{stream, Stream};

/// Binary relevance: `(user, query)` → purchased items relevant to the query.
pub type Judgments = BTreeMap<(u32, u32), BTreeSet<u32>>;

/// Outcome of hiding reviews and queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub test_review: Vec<bool>,
    pub test_query: Vec<bool>,
    /// Training purchases paired with every training query of the item.
    pub train_purchases: Vec<DynamicTriple>,
    pub judgments: Judgments,
}

impl SplitPlan {
    pub fn train_reviews<'a>(&'a self, reviews: &'a [Review]) -> impl Iterator<Item = &'a Review> {
        reviews.iter().zip(&self.test_review).filter(|(_, &t)| !t).map(|(r, _)| r)
    }

    pub fn test_reviews<'a>(&'a self, reviews: &'a [Review]) -> impl Iterator<Item = &'a Review> {
        reviews.iter().zip(&self.test_review).filter(|(_, &t)| t).map(|(r, _)| r)
    }

    pub fn num_test_queries(&self) -> usize {
        self.test_query.iter().filter(|&&t| t).count()
    }
}

fn pick(n: usize, ratio: f64, rng: &mut impl Rng) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut flags = vec![false; n];
    for &i in idx.iter().take((ratio * n as f64).round() as usize) {
        flags[i] = true;
    }
    flags
}

/// Hides `test_ratio` of the reviews and of the queries. When every query
/// of an item lands in the test set, one of them is drawn at random and
/// returned to training. Training purchases pair each visible review with
/// the item's training queries; judgments pair hidden reviews with the
/// item's test queries.
pub fn train_test_split(
    reviews: &[Review],
    catalog: &EntityCatalog,
    queries: &QuerySet,
    test_ratio: f64,
    seed: u64,
) -> Result<SplitPlan> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(DremError::InvalidArgument(format!("test ratio {test_ratio} is outside (0, 1)")));
    }
    let mut rng = stream(seed, Stream::Split);
    let test_review = pick(reviews.len(), test_ratio, &mut rng);
    let mut test_query = pick(queries.len(), test_ratio, &mut rng);

    for item in 0..catalog.items.len() as u32 {
        let qs = queries.for_item(item);
        if !qs.is_empty() && qs.iter().all(|&q| test_query[q as usize]) {
            let back = qs[rng.random_range(0..qs.len())];
            test_query[back as usize] = false;
        }
    }

    let mut train = BTreeSet::new();
    let mut judgments = Judgments::new();
    for (r, &hidden) in reviews.iter().zip(&test_review) {
        let (Some(user), Some(item)) = (catalog.users.id(&r.user_id), catalog.items.id(&r.item_id)) else {
            continue;
        };
        for &query in queries.for_item(item) {
            match (hidden, test_query[query as usize]) {
                (false, false) => {
                    train.insert(DynamicTriple { user, query, item });
                }
                (true, true) => {
                    judgments.entry((user, query)).or_default().insert(item);
                }
                _ => {}
            }
        }
    }
    Ok(SplitPlan { test_review, test_query, train_purchases: train.into_iter().collect(), judgments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, extract_queries, ItemMeta};
    use crate::text::stopwords;

    fn fixture() -> (Vec<Review>, EntityCatalog, QuerySet) {
        let mut reviews = Vec::new();
        let mut meta = Vec::new();
        for i in 0..12 {
            for u in 0..8 {
                if (i + u) % 3 != 0 {
                    reviews.push(Review {
                        user_id: format!("u{u}"),
                        item_id: format!("i{i}"),
                        tokens: vec!["alpha".into(), "beta".into(), "gamma".into(), format!("t{}", i % 4)],
                    });
                }
            }
            let path = |a: &str, b: &str| vec!["alpha".to_string(), a.to_string(), b.to_string()];
            let mut paths = vec![path("beta", &format!("t{}", i % 4))];
            if i % 2 == 0 {
                paths.push(path("gamma", &format!("t{}", (i + 1) % 4)));
            }
            meta.push(ItemMeta { item_id: format!("i{i}"), category_paths: paths, ..Default::default() });
        }
        let vocab = build_vocabulary(&reviews, 1).unwrap();
        let cat = EntityCatalog::build(&reviews, &meta, vocab);
        let qs = extract_queries(&cat, &meta, stopwords());
        (reviews, cat, qs)
    }

    #[test]
    fn ratio_must_be_inside_unit_interval() {
        let (r, c, q) = fixture();
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(train_test_split(&r, &c, &q, bad, 1).is_err());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (r, c, q) = fixture();
        let a = train_test_split(&r, &c, &q, 0.3, 42).unwrap();
        let b = train_test_split(&r, &c, &q, 0.3, 42).unwrap();
        assert_eq!(a, b);
        let hidden = a.test_review.iter().filter(|&&t| t).count();
        assert_eq!(hidden, (0.3 * r.len() as f64).round() as usize);
    }

    #[test]
    fn every_item_keeps_a_training_query_and_test_is_unseen() {
        let (r, c, q) = fixture();
        for seed in 0..20 {
            let plan = train_test_split(&r, &c, &q, 0.3, seed).unwrap();
            for item in 0..c.items.len() as u32 {
                let qs = q.for_item(item);
                assert!(qs.is_empty() || qs.iter().any(|&x| !plan.test_query[x as usize]));
            }
            let train: BTreeSet<_> = plan.train_purchases.iter().map(|t| (t.user, t.query, t.item)).collect();
            for (&(u, qid), items) in &plan.judgments {
                assert!(!items.is_empty());
                for &i in items {
                    assert!(!train.contains(&(u, qid, i)));
                }
            }
        }
    }

    #[test]
    fn single_query_item_gets_its_query_back() {
        // One item with one query, test ratio high enough to draw it.
        let reviews =
            vec![Review { user_id: "u".into(), item_id: "i".into(), tokens: vec!["a".into(), "b".into(), "c".into()] }];
        let meta = vec![ItemMeta {
            item_id: "i".into(),
            category_paths: vec![vec!["a".into(), "b".into(), "c".into()]],
            ..Default::default()
        }];
        let cat = EntityCatalog::build(&reviews, &meta, build_vocabulary(&reviews, 1).unwrap());
        let qs = extract_queries(&cat, &meta, stopwords());
        let plan = train_test_split(&reviews, &cat, &qs, 0.9, 3).unwrap();
        assert_eq!(plan.test_query, vec![false]);
    }
}
