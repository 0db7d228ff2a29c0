//! Planted-model data generator.
//!
//! Ground-truth embeddings are drawn first; every observed tail is then
//! sampled with probability proportional to `exp((x + r)·y)`. Items cluster
//! by category, words by the category they describe, and users carry a
//! preferred brand whose strength is configurable.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{DynamicTriple, Judgments, Query, QuerySet, StaticTriple, TripleStore};
use crate::error::{DremError, Result};
use crate::model::dot;
use crate::rng::{stream, Stream};
use crate::schema::{EntityType, ModelSchema, Relation};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    pub words: usize,
    pub brands: usize,
    pub categories: usize,
    /// Dimension of the ground-truth embeddings.
    pub truth_dim: usize,
    /// Norm of the category centers.
    pub category_scale: f64,
    /// Norm of the brand component in item and user vectors (0 disables it).
    pub brand_signal: f64,
    /// Norm of the idiosyncratic part of every vector.
    pub noise_scale: f64,
    pub purchases_per_user: usize,
    pub categories_per_user: usize,
    /// Brands sold in each category (category `c` carries brands `c, c+1, …`
    /// modulo the brand count). Users shop in categories carrying their
    /// preferred brand whenever fewer than all brands share a category.
    pub brands_per_category: usize,
    pub words_per_review: usize,
    pub query_length: usize,
    pub links_per_item: usize,
    /// Fraction of distinct purchases held out for testing.
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            users: 50,
            items: 100,
            words: 200,
            brands: 5,
            categories: 10,
            truth_dim: 16,
            category_scale: 2.5,
            brand_signal: 1.0,
            noise_scale: 0.7,
            purchases_per_user: 16,
            categories_per_user: 3,
            brands_per_category: 5,
            words_per_review: 8,
            query_length: 3,
            links_per_item: 2,
            test_ratio: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// A larger, sparser catalog where users are loyal to a brand and brand
    /// membership is the main signal the review text does not carry.
    pub fn brand_loyal(seed: u64) -> Self {
        SyntheticConfig {
            items: 400,
            brand_signal: 2.0,
            purchases_per_user: 12,
            words_per_review: 2,
            seed,
            ..Default::default()
        }
    }
}

/// Generated graph plus the split of purchases.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub schema: ModelSchema,
    /// One query per category.
    pub queries: QuerySet,
    /// Static facts from training purchases and metadata, plus the
    /// training purchases themselves.
    pub train: TripleStore,
    /// Training purchases grouped by `(user, query)`.
    pub train_judgments: Judgments,
    /// Held-out purchases grouped by `(user, query)`.
    pub test_judgments: Judgments,
    pub item_category: Vec<u32>,
    pub item_brand: Vec<u32>,
    pub truth: GroundTruth,
}

/// The planted vectors the data was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub users: Vec<Vec<f64>>,
    pub user_brand: Vec<u32>,
    pub items: Vec<Vec<f64>>,
    /// Query translation of each category query.
    pub queries: Vec<Vec<f64>>,
}

impl GroundTruth {
    /// `(u* + v*_q)·i*` for every item.
    pub fn scores(&self, user: u32, query: u32) -> Vec<f64> {
        let h = add(&self.users[user as usize], &self.queries[query as usize]);
        self.items.iter().map(|i| dot(&h, i)).collect()
    }
}

fn gaussian(rng: &mut impl rand::Rng, dim: usize, norm: f64) -> Vec<f64> {
    let scale = norm / (dim as f64).sqrt();
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gaussian vector supported on coordinates `range` only.
fn gaussian_in(rng: &mut impl rand::Rng, dim: usize, range: std::ops::Range<usize>, norm: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    let part = gaussian(rng, range.len(), norm);
    v[range].copy_from_slice(&part);
    v
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Index sampler proportional to `exp(h·y)` over `rows`.
fn softmax_sampler(h: &[f64], rows: &[Vec<f64>], exclude: Option<usize>) -> WeightedIndex<f64> {
    let logits: Vec<f64> = rows.iter().map(|y| dot(h, y)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> =
        logits.iter().enumerate().map(|(j, l)| if Some(j) == exclude { 0.0 } else { (l - max).exp() }).collect();
    WeightedIndex::new(weights).expect("at least one positive weight")
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    let c = config;
    if c.categories == 0 || c.brands == 0 || c.users == 0 || c.items < 2 {
        return Err(DremError::InvalidArgument("synthetic sizes must be positive (items ≥ 2)".into()));
    }
    if c.truth_dim < 2 {
        return Err(DremError::InvalidArgument("truth dimension must be ≥ 2".into()));
    }
    if c.words < c.categories * c.query_length || c.query_length == 0 {
        return Err(DremError::InvalidArgument("too few words for one query per category".into()));
    }
    if !(c.test_ratio > 0.0 && c.test_ratio < 1.0) {
        return Err(DremError::InvalidArgument(format!("test ratio {} is outside (0, 1)", c.test_ratio)));
    }
    let mut rng = stream(c.seed, Stream::Synthetic);
    let d = c.truth_dim;

    // Categories live in the first half of the coordinates, brands in the
    // second, so brand preference does not interact with the query.
    let half = d / 2;
    let centers: Vec<Vec<f64>> =
        (0..c.categories).map(|_| gaussian_in(&mut rng, d, 0..half, c.category_scale)).collect();
    let brand_vecs: Vec<Vec<f64>> = (0..c.brands).map(|_| gaussian_in(&mut rng, d, half..d, 1.0)).collect();
    let item_category: Vec<u32> = (0..c.items).map(|i| (i % c.categories) as u32).collect();
    let per_cat = c.brands_per_category.clamp(1, c.brands);
    let item_brand: Vec<u32> =
        (0..c.items).map(|i| ((i % c.categories + (i / c.categories) % per_cat) % c.brands) as u32).collect();
    let items: Vec<Vec<f64>> = (0..c.items)
        .map(|i| {
            let brand: Vec<f64> = brand_vecs[item_brand[i] as usize].iter().map(|x| c.brand_signal * x).collect();
            add(&add(&centers[item_category[i] as usize], &brand), &gaussian(&mut rng, d, c.noise_scale))
        })
        .collect();
    let words: Vec<Vec<f64>> =
        (0..c.words).map(|w| add(&centers[w % c.categories], &gaussian(&mut rng, d, c.noise_scale))).collect();
    let users: Vec<(Vec<f64>, Vec<u32>, u32)> = (0..c.users)
        .map(|_| {
            let pref = rng.random_range(0..c.brands);
            let brand: Vec<f64> = brand_vecs[pref].iter().map(|x| c.brand_signal * x).collect();
            let mut cats: Vec<u32> = (0..c.categories as u32)
                .filter(|&k| per_cat == c.brands || (0..per_cat).any(|j| (k as usize + j) % c.brands == pref))
                .collect();
            cats.shuffle(&mut rng);
            cats.truncate(c.categories_per_user.max(1));
            (add(&brand, &gaussian(&mut rng, d, c.noise_scale)), cats, pref as u32)
        })
        .collect();
    let relation_vecs: Vec<Vec<f64>> = Relation::STATIC.iter().map(|_| gaussian(&mut rng, d, 0.3)).collect();
    let rel = |r: Relation| &relation_vecs[r.static_index().unwrap()];

    // Query of category k: its first `query_length` words.
    let queries: Vec<Query> = (0..c.categories)
        .map(|k| Query {
            words: (0..c.query_length).map(|j| (k + j * c.categories) as u32).collect(),
            source_path: vec![format!("category {k}")],
            items: (0..c.items as u32).filter(|&i| item_category[i as usize] == k as u32).collect(),
        })
        .collect();
    let queries = QuerySet::new(queries, c.items);

    let mut purchases = BTreeSet::new();
    for (u, (uvec, cats, _)) in users.iter().enumerate() {
        for _ in 0..c.purchases_per_user {
            let k = *cats.choose(&mut rng).unwrap();
            let h = add(uvec, &centers[k as usize]);
            let item = softmax_sampler(&h, &items, None).sample(&mut rng);
            purchases.insert(DynamicTriple { user: u as u32, query: k, item: item as u32 });
        }
    }
    let mut purchases: Vec<DynamicTriple> = purchases.into_iter().collect();
    purchases.shuffle(&mut rng);
    let n_test = (c.test_ratio * purchases.len() as f64).round() as usize;
    let test = purchases.split_off(purchases.len() - n_test);
    let train = purchases;

    let mut statics = Vec::new();
    let mut push = |relation, head: usize, tail: usize| {
        statics.push(StaticTriple { relation, head: head as u32, tail: tail as u32, count: 1 })
    };
    let mut reviewed: Vec<&DynamicTriple> = train.iter().collect();
    reviewed.sort();
    for p in reviewed {
        let (u, i) = (p.user as usize, p.item as usize);
        let by_user = softmax_sampler(&add(&users[u].0, rel(Relation::UserWrite)), &words, None);
        let by_item = softmax_sampler(&add(&items[i], rel(Relation::ItemWrite)), &words, None);
        for j in 0..c.words_per_review {
            let w = if j % 2 == 0 { by_user.sample(&mut rng) } else { by_item.sample(&mut rng) };
            push(Relation::UserWrite, u, w);
            push(Relation::ItemWrite, i, w);
        }
    }
    for i in 0..c.items {
        push(Relation::IsBrand, i, item_brand[i] as usize);
        push(Relation::IsCategory, i, item_category[i] as usize);
        for r in [Relation::AlsoBought, Relation::AlsoViewed, Relation::BoughtTogether] {
            let sampler = softmax_sampler(&add(&items[i], rel(r)), &items, Some(i));
            for _ in 0..c.links_per_item {
                push(r, i, sampler.sample(&mut rng));
            }
        }
    }

    let group = |triples: &[DynamicTriple]| {
        let mut j = Judgments::new();
        for t in triples {
            j.entry((t.user, t.query)).or_default().insert(t.item);
        }
        j
    };
    let schema = ModelSchema::new(
        &[
            (EntityType::User, c.users),
            (EntityType::Item, c.items),
            (EntityType::Word, c.words),
            (EntityType::Brand, c.brands),
            (EntityType::Category, c.categories),
        ],
        &Relation::ALL,
    )?;
    Ok(SyntheticDataset {
        schema,
        queries,
        train_judgments: group(&train),
        test_judgments: group(&test),
        train: TripleStore::new(statics, train),
        item_category,
        item_brand,
        truth: GroundTruth {
            user_brand: users.iter().map(|u| u.2).collect(),
            users: users.into_iter().map(|u| u.0).collect(),
            items,
            queries: centers,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_split_disjoint() {
        let a = generate(&SyntheticConfig::default()).unwrap();
        let b = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test_judgments, b.test_judgments);
        for (pair, items) in &a.test_judgments {
            if let Some(train) = a.train_judgments.get(pair) {
                assert!(items.is_disjoint(train));
            }
        }
        assert_eq!(a.schema.count(EntityType::Word), 200);
        assert_eq!(a.queries.len(), 10);
    }

    #[test]
    fn purchases_follow_the_query_category() {
        let data = generate(&SyntheticConfig::default()).unwrap();
        let in_cat = data.train.dynamics().iter().filter(|t| data.item_category[t.item as usize] == t.query).count();
        let chance = 1.0 / data.queries.len() as f64;
        assert!(in_cat as f64 > 3.0 * chance * data.train.dynamics().len() as f64);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate(&SyntheticConfig { words: 5, ..Default::default() }).is_err());
        assert!(generate(&SyntheticConfig { test_ratio: 1.0, ..Default::default() }).is_err());
    }
}
