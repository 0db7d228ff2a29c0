//! From raw review and metadata dumps to a split, triple-encoded dataset.

mod catalog;
mod ingest;
mod queries;
mod split;
mod triples;
mod vocab;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

pub use catalog::{split_categories, CategorySplit, EntityCatalog};
pub use ingest::{ingest_metadata, ingest_reviews, k_core_filter, Ingested, ItemMeta, Review};
pub use queries::{extract_queries, query_terms, Query, QuerySet};
pub use split::{train_test_split, Judgments, SplitPlan};
pub use triples::{build_triples, DynamicTriple, StaticTriple, TripleStore};
pub use vocab::{build_vocabulary, IdMap, Vocabulary};

use crate::error::Result;
use crate::schema::{EntityType, Relation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions {
    pub min_freq: u64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions { min_freq: 5, test_ratio: 0.3, seed: 0 }
    }
}

/// Everything the trainer, the baselines and the evaluator need.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub catalog: EntityCatalog,
    pub queries: QuerySet,
    pub plan: SplitPlan,
    /// Training triples: static facts from visible reviews and metadata,
    /// plus training purchases.
    pub train: TripleStore,
}

/// Vocabulary → catalog → queries → split → training triples.
///
/// Write triples come from visible reviews only: a hidden review is hidden
/// entirely.
pub fn prepare_dataset(reviews: &[Review], metadata: &[ItemMeta], opts: PrepareOptions) -> Result<PreparedDataset> {
    let vocab = build_vocabulary(reviews, opts.min_freq)?;
    let catalog = EntityCatalog::build(reviews, metadata, vocab);
    let queries = extract_queries(&catalog, metadata, crate::text::stopwords());
    let plan = train_test_split(reviews, &catalog, &queries, opts.test_ratio, opts.seed)?;
    let visible: Vec<Review> = plan.train_reviews(reviews).cloned().collect();
    let statics = build_triples(&visible, metadata, &catalog);
    let mut train = TripleStore::new(statics.statics().iter().copied(), plan.train_purchases.clone());
    train.skipped = statics.skipped;
    Ok(PreparedDataset { catalog, queries, plan, train })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return MeanStd::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Summary statistics laid out like the usual dataset table.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub vocabulary: usize,
    pub reviews: usize,
    pub users: usize,
    pub items: usize,
    pub brands: usize,
    pub categories: usize,
    /// Per static relation, occurrences per head entity.
    pub per_head: Vec<(Relation, MeanStd)>,
    pub train_reviews: usize,
    pub test_reviews: usize,
    pub train_queries: usize,
    pub test_queries: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub train_relevant: MeanStd,
    pub test_relevant: MeanStd,
}

impl DatasetStats {
    pub fn compute(data: &PreparedDataset) -> Self {
        let c = &data.catalog;
        let per_head = Relation::STATIC
            .into_iter()
            .map(|r| {
                let mut counts = vec![0u64; c.count(r.head_type())];
                for t in data.train.statics().iter().filter(|t| t.relation == r) {
                    counts[t.head as usize] += t.count as u64;
                }
                (r, MeanStd::of(counts.into_iter().map(|x| x as f64)))
            })
            .collect();
        let mut train_pairs: BTreeMap<(u32, u32), HashSet<u32>> = BTreeMap::new();
        for t in data.train.dynamics() {
            train_pairs.entry((t.user, t.query)).or_default().insert(t.item);
        }
        let test_reviews = data.plan.test_review.iter().filter(|&&t| t).count();
        let test_queries = data.plan.num_test_queries();
        DatasetStats {
            vocabulary: c.words.len(),
            reviews: data.plan.test_review.len(),
            users: c.users.len(),
            items: c.items.len(),
            brands: c.brands.len(),
            categories: c.categories.len(),
            per_head,
            train_reviews: data.plan.test_review.len() - test_reviews,
            test_reviews,
            train_queries: data.queries.len() - test_queries,
            test_queries,
            train_pairs: train_pairs.len(),
            test_pairs: data.plan.judgments.len(),
            train_relevant: MeanStd::of(train_pairs.values().map(|s| s.len() as f64)),
            test_relevant: MeanStd::of(data.plan.judgments.values().map(|s| s.len() as f64)),
        }
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Corpus")?;
        writeln!(f, "    Vocabulary size               {}", self.vocabulary)?;
        writeln!(f, "    Number of reviews             {}", self.reviews)?;
        writeln!(f, "    Number of users               {}", self.users)?;
        writeln!(f, "    Number of items               {}", self.items)?;
        writeln!(f, "    Number of brands              {}", self.brands)?;
        writeln!(f, "    Number of categories          {}", self.categories)?;
        writeln!(f, "Relationships (training triples)")?;
        for (r, ms) in &self.per_head {
            let label = format!("{} per {}", r.name(), r.head_type());
            writeln!(f, "    {label:<30}{ms}")?;
        }
        writeln!(f, "Train/Test")?;
        writeln!(f, "    Number of reviews             {}/{}", self.train_reviews, self.test_reviews)?;
        writeln!(f, "    Number of queries             {}/{}", self.train_queries, self.test_queries)?;
        writeln!(f, "    Number of user-query pairs    {}/{}", self.train_pairs, self.test_pairs)?;
        writeln!(f, "    Relevant items per pair       {}/{}", self.train_relevant, self.test_relevant)
    }
}

/// Entity counts keyed by type, for building a model schema.
pub fn entity_counts(catalog: &EntityCatalog) -> Vec<(EntityType, usize)> {
    EntityType::ALL.iter().map(|&t| (t, catalog.count(t))).collect()
}

/// Item surface text for the text baselines: title, description, and the
/// given reviews, concatenated per item.
pub fn item_documents(catalog: &EntityCatalog, metadata: &[ItemMeta], reviews: &[&Review]) -> Vec<Vec<String>> {
    let mut docs = vec![Vec::new(); catalog.items.len()];
    let metas: HashMap<u32, &ItemMeta> = catalog::meta_by_item(catalog, metadata);
    for (i, doc) in docs.iter_mut().enumerate() {
        if let Some(m) = metas.get(&(i as u32)) {
            doc.extend(m.title_tokens.iter().cloned());
            doc.extend(m.description_tokens.iter().cloned());
        }
    }
    for r in reviews {
        if let Some(i) = catalog.items.id(&r.item_id) {
            docs[i as usize].extend(r.tokens.iter().cloned());
        }
    }
    docs
}
