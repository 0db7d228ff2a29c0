//! Explanation paths between a user and a retrieved item.
//!
//! Both endpoints are translated along the shortest relation path of the
//! schema graph into a shared entity subspace, and every entity of that
//! subspace is scored by how well it aligns with both translated vectors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::Serialize;

use crate::corpus::EntityCatalog;
use crate::error::{DremError, Result};
use crate::model::{dot, log_sum_exp, ModelParams};
use crate::schema::{EntityType, ModelSchema, Relation};

/// Entity types as nodes, relations as directed unit-weight edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaGraph {
    nodes: Vec<EntityType>,
    edges: Vec<Relation>,
}

impl SchemaGraph {
    pub fn nodes(&self) -> &[EntityType] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Relation] {
        &self.edges
    }

    pub fn has_node(&self, t: EntityType) -> bool {
        self.nodes.contains(&t)
    }

    /// Outgoing edges of `t`, ordered by relation name.
    pub fn out_edges(&self, t: EntityType) -> impl Iterator<Item = Relation> + '_ {
        let mut out: Vec<Relation> = self.edges.iter().copied().filter(|r| r.head_type() == t).collect();
        out.sort_by_key(|r| r.name());
        out.into_iter()
    }
}

pub fn build_schema_graph(schema: &ModelSchema) -> SchemaGraph {
    SchemaGraph { nodes: schema.entity_types().collect(), edges: schema.relations().to_vec() }
}

/// An ordered list of relations; the empty list is the identity path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RelationPath(pub Vec<Relation>);

impl RelationPath {
    pub fn identity() -> Self {
        RelationPath(Vec::new())
    }

    pub fn hops(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.0
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|r| r.name()).collect()
    }

    /// Checks that the path can be walked from `start` and returns the type
    /// it ends at.
    pub fn end_type(&self, start: EntityType) -> Result<EntityType> {
        let mut at = start;
        for &r in &self.0 {
            if r.head_type() != at {
                return Err(DremError::TypeMismatch { relation: r, found: at });
            }
            at = r.tail_type();
        }
        Ok(at)
    }

    /// Compact form such as `u+search_purchase+is_brand`.
    pub fn display_from(&self, start: &str) -> String {
        let mut s = start.to_string();
        for r in &self.0 {
            s.push('+');
            s.push_str(r.name());
        }
        s
    }
}

#[derive(PartialEq, Eq)]
struct Label {
    names: Vec<&'static str>,
    path: Vec<Relation>,
    at: EntityType,
}

impl Ord for Label {
    /// Reversed so the max-heap pops the shortest, then lexicographically
    /// smallest, path first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.names.len(), &other.names).cmp(&(self.names.len(), &self.names))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimal-hop forward path between two entity types, or `None` when `to` is
/// unreachable. Among equally short paths the one whose sequence of relation
/// names is lexicographically smallest wins.
pub fn shortest_type_path(graph: &SchemaGraph, from: EntityType, to: EntityType) -> Result<Option<RelationPath>> {
    for t in [from, to] {
        if !graph.has_node(t) {
            return Err(DremError::InvalidArgument(format!("entity type {t} is not in the schema graph")));
        }
    }
    let mut settled = [false; 5];
    let mut heap = BinaryHeap::new();
    heap.push(Label { names: Vec::new(), path: Vec::new(), at: from });
    while let Some(Label { names, path, at }) = heap.pop() {
        if settled[at.index()] {
            continue;
        }
        settled[at.index()] = true;
        if at == to {
            return Ok(Some(RelationPath(path)));
        }
        for r in graph.out_edges(at) {
            let next = r.tail_type();
            if !settled[next.index()] {
                let mut names = names.clone();
                names.push(r.name());
                let mut path = path.clone();
                path.push(r);
                heap.push(Label { names, path, at: next });
            }
        }
    }
    Ok(None)
}

fn walk(model: &ModelParams, start: EntityType, id: u32, path: &RelationPath, query_words: &[u32]) -> Result<Vec<f64>> {
    path.end_type(start)?;
    let mut v = model.entity(start, id)?.to_vec();
    for &r in path.relations() {
        let delta = if r.is_dynamic() { model.project_query(query_words)?.0 } else { model.relation(r).to_vec() };
        v.iter_mut().zip(&delta).for_each(|(x, d)| *x += d);
    }
    Ok(v)
}

/// Scores every entity `e` of `bridge` by
/// `log P(e|e_u) + log P(e|e_i)` with
/// `P(e|x) = exp(x·e − β·hops) / Σ_e′ exp(x·e′)`, best first.
///
/// The decay term only appears in the numerator, so the probabilities of a
/// subspace need not sum to one.
#[allow(clippy::too_many_arguments)]
pub fn soft_match(
    model: &ModelParams,
    user: u32,
    query_words: &[u32],
    item: u32,
    bridge: EntityType,
    path_u: &RelationPath,
    path_i: &RelationPath,
    beta: f64,
) -> Result<Vec<(u32, f64)>> {
    for (start, path) in [(EntityType::User, path_u), (EntityType::Item, path_i)] {
        let end = path.end_type(start)?;
        if end != bridge {
            return Err(DremError::InvalidArgument(format!(
                "path {} ends at {end}, not at the bridge type {bridge}",
                path.display_from(start.name())
            )));
        }
    }
    let e_u = walk(model, EntityType::User, user, path_u, query_words)?;
    let e_i = walk(model, EntityType::Item, item, path_i, query_words)?;
    let table = model.table(bridge);
    let logits_u: Vec<f64> = (0..table.rows()).map(|e| dot(&e_u, table.row(e))).collect();
    let logits_i: Vec<f64> = (0..table.rows()).map(|e| dot(&e_i, table.row(e))).collect();
    let (z_u, z_i) = (log_sum_exp(&logits_u), log_sum_exp(&logits_i));
    let (n, m) = (path_u.hops() as f64, path_i.hops() as f64);
    let mut scored: Vec<(u32, f64)> = logits_u
        .iter()
        .zip(&logits_i)
        .enumerate()
        .map(|(e, (lu, li))| (e as u32, (lu - beta * n - z_u) + (li - beta * m - z_i)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplainOptions {
    pub max_hops: usize,
    pub top_per_type: usize,
    pub beta: f64,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions { max_hops: 4, top_per_type: 6, beta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub user: u32,
    pub query: u32,
    pub item: u32,
    pub path_u: RelationPath,
    pub path_i: RelationPath,
    pub bridge_type: EntityType,
    pub bridge_entity: u32,
    pub score: f64,
}

impl Explanation {
    pub fn hops(&self) -> usize {
        self.path_u.hops() + self.path_i.hops()
    }

    /// True for the bare purchase edge `u+search_purchase → item ← i`.
    pub fn is_bare_purchase(&self) -> bool {
        self.path_u.0 == [Relation::SearchPurchase] && self.path_i.is_identity()
    }
}

impl fmt::Display for Explanation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} → {} {} ← {}  S = {:.2}",
            self.path_u.display_from("u"),
            self.bridge_type,
            self.bridge_entity,
            self.path_i.display_from("i"),
            self.score
        )
    }
}

/// Runs the soft matching search over every bridge type of the graph and
/// returns the kept explanations, best first.
pub fn extract_explanations(
    model: &ModelParams,
    graph: &SchemaGraph,
    user: u32,
    query: u32,
    query_words: &[u32],
    item: u32,
    opts: &ExplainOptions,
) -> Result<Vec<Explanation>> {
    model.entity(EntityType::User, user)?;
    model.entity(EntityType::Item, item)?;
    let mut out = Vec::new();
    for &bridge in graph.nodes() {
        let (Some(path_u), Some(path_i)) = (
            shortest_type_path(graph, EntityType::User, bridge)?,
            shortest_type_path(graph, EntityType::Item, bridge)?,
        ) else {
            continue;
        };
        if path_u.hops() + path_i.hops() > opts.max_hops {
            continue;
        }
        if path_u.0 == [Relation::SearchPurchase] && path_i.is_identity() {
            continue;
        }
        let scored = soft_match(model, user, query_words, item, bridge, &path_u, &path_i, opts.beta)?;
        for (entity, score) in scored.into_iter().take(opts.top_per_type) {
            out.push(Explanation {
                user,
                query,
                item,
                path_u: path_u.clone(),
                path_i: path_i.clone(),
                bridge_type: bridge,
                bridge_entity: entity,
                score,
            });
        }
    }
    out.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then(a.bridge_type.cmp(&b.bridge_type)).then(a.bridge_entity.cmp(&b.bridge_entity))
    });
    Ok(out)
}

/// Surface names for entity ids.
pub trait EntityNames {
    fn entity_name(&self, t: EntityType, id: u32) -> String;
}

impl EntityNames for EntityCatalog {
    fn entity_name(&self, t: EntityType, id: u32) -> String {
        self.name(t, id).map(str::to_string).unwrap_or_else(|| format!("{t} {id}"))
    }
}

/// Names every entity `<type> <id>`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NumericNames;

impl EntityNames for NumericNames {
    fn entity_name(&self, t: EntityType, id: u32) -> String {
        format!("{t} {id}")
    }
}

pub fn render_template(expl: &Explanation, names: &impl EntityNames) -> String {
    let item = names.entity_name(EntityType::Item, expl.item);
    let bridge = names.entity_name(expl.bridge_type, expl.bridge_entity);
    match expl.bridge_type {
        EntityType::Brand => format!(
            "Based on your profile and query, you may like to see somethings by {bridge}, and {item} is a top product of this brand."
        ),
        EntityType::Category => format!(
            "Based on your profile and query, you may like to see somethings in {bridge}, and {item} is a top product in this category."
        ),
        EntityType::Word => format!(
            "Based on your profile and query, you often mention {bridge}, which is frequently used to describe {item}."
        ),
        _ => format!(
            "{item} is connected to you through {bridge} ({} → {} ← {}).",
            expl.path_u.display_from("you"),
            expl.bridge_type,
            expl.path_i.display_from("item")
        ),
    }
}

/// One line of the explanation JSONL output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationRecord {
    pub user_id: String,
    pub query_id: u32,
    pub item_id: String,
    pub bridge_type: String,
    pub bridge_entity: String,
    pub path_u: Vec<&'static str>,
    pub path_i: Vec<&'static str>,
    pub score: f64,
    pub text: String,
}

impl ExplanationRecord {
    pub fn new(expl: &Explanation, names: &impl EntityNames) -> Self {
        ExplanationRecord {
            user_id: names.entity_name(EntityType::User, expl.user),
            query_id: expl.query,
            item_id: names.entity_name(EntityType::Item, expl.item),
            bridge_type: expl.bridge_type.name().to_string(),
            bridge_entity: names.entity_name(expl.bridge_type, expl.bridge_entity),
            path_u: expl.path_u.names(),
            path_i: expl.path_i.names(),
            score: expl.score,
            text: render_template(expl, names),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("explanation records always serialize")
    }
}

/// Shortest paths between every ordered pair of types, for display.
pub fn all_shortest_paths(graph: &SchemaGraph) -> Result<BTreeMap<(EntityType, EntityType), Option<RelationPath>>> {
    let mut out = BTreeMap::new();
    for &a in graph.nodes() {
        for &b in graph.nodes() {
            out.insert((a, b), shortest_type_path(graph, a, b)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn full_model(seed: u64) -> ModelParams {
        let schema = ModelSchema::full(4, 9, 20, 3, 5);
        let mut m = ModelParams::init(&schema, 6, seed).unwrap();
        let mut rng = crate::rng::stream(seed, crate::rng::Stream::Synthetic);
        for t in EntityType::ALL {
            m.table_mut(t).as_mut_slice().iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        }
        for r in Relation::STATIC {
            m.relation_mut(r).iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        }
        m
    }

    #[test]
    fn full_schema_graph() {
        let g = build_schema_graph(&ModelSchema::full(1, 1, 1, 1, 1));
        assert_eq!(g.nodes().len(), 5);
        assert_eq!(g.edges().len(), 8);
        assert_eq!(g, build_schema_graph(&ModelSchema::full(1, 1, 1, 1, 1)));
    }

    #[test]
    fn known_shortest_paths() {
        let g = build_schema_graph(&ModelSchema::full(1, 1, 1, 1, 1));
        let p = |a, b| shortest_type_path(&g, a, b).unwrap();
        assert_eq!(p(EntityType::User, EntityType::Word).unwrap().0, [Relation::UserWrite]);
        assert_eq!(p(EntityType::User, EntityType::Brand).unwrap().0, [Relation::SearchPurchase, Relation::IsBrand]);
        assert!(p(EntityType::Item, EntityType::Item).unwrap().is_identity());
        assert_eq!(p(EntityType::Item, EntityType::User), None);
    }

    #[test]
    fn unknown_type_is_an_error() {
        let schema = ModelSchema::new(
            &[(EntityType::User, 1), (EntityType::Item, 1), (EntityType::Word, 1)],
            &[Relation::UserWrite, Relation::ItemWrite],
        )
        .unwrap();
        let g = build_schema_graph(&schema);
        assert!(shortest_type_path(&g, EntityType::User, EntityType::Brand).is_err());
    }

    #[test]
    fn singleton_subspace_scores_only_the_decay() {
        let schema = ModelSchema::full(2, 3, 4, 1, 2);
        let m = ModelParams::init(&schema, 5, 1).unwrap();
        let pu = RelationPath(vec![Relation::SearchPurchase, Relation::IsBrand]);
        let pi = RelationPath(vec![Relation::IsBrand]);
        let s = soft_match(&m, 1, &[0, 2], 2, EntityType::Brand, &pu, &pi, 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].1 - -3.0).abs() < 1e-12);
    }

    #[test]
    fn each_extra_hop_costs_beta() {
        let m = full_model(4);
        let pi = RelationPath(vec![Relation::IsCategory]);
        let short = RelationPath(vec![Relation::SearchPurchase, Relation::IsCategory]);
        let a = soft_match(&m, 0, &[1], 3, EntityType::Category, &short, &pi, 1.0).unwrap();
        let b = soft_match(&m, 0, &[1], 3, EntityType::Category, &short, &pi, 2.5).unwrap();
        for ((ea, sa), (eb, sb)) in a.iter().zip(&b) {
            assert_eq!(ea, eb);
            assert!((sa - sb - 1.5 * 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_match_direct_evaluation() {
        let m = full_model(7);
        let words = [3, 11];
        let pu = RelationPath(vec![Relation::SearchPurchase, Relation::AlsoViewed, Relation::IsBrand]);
        let pi = RelationPath(vec![Relation::BoughtTogether, Relation::IsBrand]);
        let got = soft_match(&m, 2, &words, 5, EntityType::Brand, &pu, &pi, 1.0).unwrap();

        let v = m.project_query(&words).unwrap().0;
        let mut e_u = m.entity(EntityType::User, 2).unwrap().to_vec();
        for (k, x) in e_u.iter_mut().enumerate() {
            *x += v[k] + m.relation(Relation::AlsoViewed)[k] + m.relation(Relation::IsBrand)[k];
        }
        let mut e_i = m.entity(EntityType::Item, 5).unwrap().to_vec();
        for (k, x) in e_i.iter_mut().enumerate() {
            *x += m.relation(Relation::BoughtTogether)[k] + m.relation(Relation::IsBrand)[k];
        }
        let brands = m.table(EntityType::Brand);
        let p = |x: &[f64], e: usize, hops: f64| {
            let z: f64 = (0..brands.rows()).map(|j| dot(x, brands.row(j)).exp()).sum();
            (dot(x, brands.row(e)) - hops).exp() / z
        };
        for &(e, s) in &got {
            let direct = p(&e_u, e as usize, 3.0).ln() + p(&e_i, e as usize, 2.0).ln();
            assert!((s - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn path_type_errors() {
        let m = full_model(1);
        let bad = RelationPath(vec![Relation::IsBrand]);
        let pi = RelationPath(vec![Relation::IsBrand]);
        assert!(matches!(
            soft_match(&m, 0, &[0], 0, EntityType::Brand, &bad, &pi, 1.0),
            Err(DremError::TypeMismatch { .. })
        ));
        let wrong_end = RelationPath(vec![Relation::UserWrite]);
        assert!(soft_match(&m, 0, &[0], 0, EntityType::Brand, &wrong_end, &pi, 1.0).is_err());
    }

    #[test]
    fn extraction_on_full_schema() {
        let m = full_model(3);
        let g = build_schema_graph(m.schema());
        let out = extract_explanations(&m, &g, 1, 0, &[2, 5], 4, &ExplainOptions::default()).unwrap();
        assert!(out.iter().all(|e| !e.is_bare_purchase() && e.hops() <= 4));
        assert!(out.windows(2).all(|w| w[0].score >= w[1].score));
        let types: std::collections::BTreeSet<EntityType> = out.iter().map(|e| e.bridge_type).collect();
        assert_eq!(types.into_iter().collect::<Vec<_>>(), [EntityType::Word, EntityType::Brand, EntityType::Category]);
        assert_eq!(out.iter().filter(|e| e.bridge_type == EntityType::Word).count(), 6);
        assert_eq!(out.iter().filter(|e| e.bridge_type == EntityType::Brand).count(), 3);

        for e in &out {
            let again = soft_match(&m, 1, &[2, 5], 4, e.bridge_type, &e.path_u, &e.path_i, 1.0).unwrap();
            let s = again.iter().find(|x| x.0 == e.bridge_entity).unwrap().1;
            assert!((s - e.score).abs() < 1e-9);
        }
        assert!(extract_explanations(&m, &g, 99, 0, &[2], 4, &ExplainOptions::default()).is_err());
    }

    #[test]
    fn max_hops_limits_bridges() {
        let m = full_model(3);
        let g = build_schema_graph(m.schema());
        let opts = ExplainOptions { max_hops: 2, ..Default::default() };
        let out = extract_explanations(&m, &g, 1, 0, &[2], 4, &opts).unwrap();
        assert!(out.iter().all(|e| e.bridge_type == EntityType::Word));
    }

    #[test]
    fn templates() {
        let base = Explanation {
            user: 0,
            query: 0,
            item: 1,
            path_u: RelationPath(vec![Relation::SearchPurchase, Relation::IsBrand]),
            path_i: RelationPath(vec![Relation::IsBrand]),
            bridge_type: EntityType::Brand,
            bridge_entity: 2,
            score: -2.36,
        };
        struct Names;
        impl EntityNames for Names {
            fn entity_name(&self, t: EntityType, _: u32) -> String {
                match t {
                    EntityType::Brand => "Pebble Technology".into(),
                    EntityType::Category => "Sports&Outdoors".into(),
                    EntityType::Word => "fashion".into(),
                    _ => "Pebble Smartwatch".into(),
                }
            }
        }
        assert_eq!(
            render_template(&base, &Names),
            "Based on your profile and query, you may like to see somethings by Pebble Technology, and Pebble Smartwatch is a top product of this brand."
        );
        let cat = Explanation { bridge_type: EntityType::Category, ..base.clone() };
        assert!(render_template(&cat, &Names).contains("somethings in Sports&Outdoors"));
        let word = Explanation { bridge_type: EntityType::Word, ..base.clone() };
        assert!(render_template(&word, &Names).contains("you often mention fashion"));
        let user = Explanation { bridge_type: EntityType::User, ..base.clone() };
        assert!(render_template(&user, &Names).contains("search_purchase"));
        assert_eq!(base.to_string(), "u+search_purchase+is_brand → brand 2 ← i+is_brand  S = -2.36");

        let line = ExplanationRecord::new(&base, &NumericNames).to_json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["path_u"], serde_json::json!(["search_purchase", "is_brand"]));
        assert_eq!(v["bridge_entity"], "brand 2");
        assert_eq!(v["score"], -2.36);
    }
}
