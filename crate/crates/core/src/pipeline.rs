//! The end-to-end stages behind the command-line tool.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::baselines::{rank_baseline, DocStore, Scorer};
use crate::config::RunConfig;
use crate::corpus::{
    entity_counts, ingest_metadata, ingest_reviews, item_documents, prepare_dataset, DatasetStats, PrepareOptions,
};
use crate::error::{DremError, Result};
use crate::evaluation::{evaluate, MetricsReport};
use crate::explainer::{build_schema_graph, extract_explanations, Explanation};
use crate::model::ModelParams;
use crate::persist::{write_artifacts, Artifacts};
use crate::retrieval::{parse_run, rank_items, write_run, RankedList};
use crate::schema::{EntityType, ModelSchema};
use crate::trainer::{train, LossTrace};

/// Reads the raw dumps, prepares the dataset and writes its artifacts to
/// `config.data_dir`.
pub fn ingest(config: &RunConfig) -> Result<(Artifacts, DatasetStats)> {
    let missing = |flag: &str| DremError::InvalidArgument(format!("--{flag} is required"));
    let reviews_path = config.reviews.as_deref().ok_or_else(|| missing("reviews"))?;
    let meta_path = config.metadata.as_deref().ok_or_else(|| missing("metadata"))?;
    let reviews = ingest_reviews(reviews_path)?;
    let meta = ingest_metadata(meta_path)?;
    for (path, malformed, dropped) in
        [(reviews_path, &reviews.malformed, reviews.dropped), (meta_path, &meta.malformed, meta.dropped)]
    {
        if !malformed.is_empty() || dropped > 0 {
            warn!("{}: {} malformed, {} dropped records", path.display(), malformed.len(), dropped);
        }
    }
    let opts = PrepareOptions { min_freq: config.min_freq, test_ratio: config.test_ratio, seed: config.seed };
    let data = prepare_dataset(&reviews.records, &meta.records, opts)?;
    let stats = DatasetStats::compute(&data);
    let visible: Vec<_> = data.plan.train_reviews(&reviews.records).collect();
    let docs = item_documents(&data.catalog, &meta.records, &visible);
    let art = Artifacts {
        catalog: data.catalog,
        queries: data.queries,
        train: data.train,
        judgments: data.plan.judgments,
        docs,
    };
    write_artifacts(&config.data_dir, &art, Some(&stats))?;
    Ok((art, stats))
}

/// Trains a model on the configured relation subset. The result is rounded
/// to the precision of the model file.
pub fn train_model(art: &Artifacts, config: &RunConfig) -> Result<(ModelParams, LossTrace)> {
    let relations = config.relations.relations();
    let schema = ModelSchema::new(&entity_counts(&art.catalog), &relations)?;
    let store = art.train.restrict(&relations);
    let tc = config.train_config();
    let mut model = ModelParams::init(&schema, tc.dim, config.seed)?;
    info!(
        "training {} on {} static and {} dynamic triples",
        config.relations,
        store.statics().len(),
        store.dynamics().len()
    );
    let trace = train(&mut model, &store, &art.queries, &tc)?;
    model.round_to_f32();
    Ok((model, trace))
}

/// Ranks items for every judged `(user, query)` pair.
pub fn drem_rankings(model: &ModelParams, art: &Artifacts, k: usize) -> Result<Vec<RankedList>> {
    art.judgments.par_iter().map(|(&(u, q), _)| rank_items(model, u, q, art.queries.words(q), k)).collect()
}

/// Ranks items with a text baseline for every judged pair.
pub fn baseline_rankings(art: &Artifacts, scorer: &Scorer, k: usize) -> Result<Vec<RankedList>> {
    let store = DocStore::new(&art.docs);
    art.judgments
        .par_iter()
        .map(|(&(u, q), _)| {
            let words: Vec<&str> = art.queries.words(q).iter().filter_map(|&w| art.catalog.words.word(w)).collect();
            rank_baseline(&store, scorer, u, q, &words, k)
        })
        .collect()
}

/// TREC run text keyed by surface names.
pub fn run_text(art: &Artifacts, lists: &[RankedList], tag: &str) -> String {
    let c = &art.catalog;
    let mut buf = Vec::new();
    write_run(
        &mut buf,
        lists,
        tag,
        |u| c.users.name(u).unwrap_or_default().to_string(),
        |i| c.items.name(i).unwrap_or_default().to_string(),
    )
    .expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("run text is UTF-8")
}

/// Scores rankings against the held-out judgments.
pub fn evaluate_lists(art: &Artifacts, lists: &[RankedList], tag: &str) -> Result<MetricsReport> {
    let text = run_text(art, lists, tag);
    let run = parse_run(text.as_bytes(), Path::new("<memory>"))?;
    Ok(evaluate(&run, &art.qrels()))
}

/// Explanations for one `(user, query, item)` triple.
pub fn explain(
    model: &ModelParams,
    art: &Artifacts,
    user: u32,
    query: u32,
    item: u32,
    config: &RunConfig,
) -> Result<Vec<Explanation>> {
    if art.queries.get(query).is_none() {
        return Err(DremError::InvalidArgument(format!("unknown query id {query}")));
    }
    let graph = build_schema_graph(model.schema());
    extract_explanations(model, &graph, user, query, art.queries.words(query), item, &config.explain_options())
}

/// Resolves a surface name, or a numeric id when no entity has that name.
pub fn resolve(art: &Artifacts, t: EntityType, name: &str) -> Result<u32> {
    art.catalog
        .id(t, name)
        .or_else(|| name.parse().ok().filter(|&id: &u32| (id as usize) < art.catalog.count(t)))
        .ok_or_else(|| DremError::InvalidArgument(format!("unknown {t} `{name}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub dim: usize,
    pub outcome: std::result::Result<MetricsReport, String>,
}

/// Trains and evaluates one model per grid point, retraining from scratch.
/// Failures are recorded per point.
pub fn sweep(art: &Artifacts, config: &RunConfig, lambdas: &[f64], dims: &[usize]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &dim in dims {
        for &lambda in lambdas {
            let point = RunConfig { lambda, dim, ..config.clone() };
            let outcome = point
                .validate()
                .and_then(|_| train_model(art, &point))
                .and_then(|(m, _)| evaluate_lists(art, &drem_rankings(&m, art, point.top_k)?, "drem"))
                .map_err(|e| e.to_string());
            match &outcome {
                Ok(r) => info!("lambda {lambda} dim {dim}: MAP {:.4}", r.map),
                Err(e) => warn!("lambda {lambda} dim {dim} failed: {e}"),
            }
            rows.push(SweepRow { lambda, dim, outcome });
        }
    }
    rows
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda,dim,map,mrr,ndcg10,error\n");
    for r in rows {
        match &r.outcome {
            Ok(m) => writeln!(s, "{},{},{:.6},{:.6},{:.6},", r.lambda, r.dim, m.map, m.mrr, m.ndcg10),
            Err(e) => writeln!(s, "{},{},,,,{:?}", r.lambda, r.dim, e.replace(',', ";")),
        }
        .expect("writing to a string cannot fail");
    }
    s
}
