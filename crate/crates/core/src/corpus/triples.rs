use std::collections::BTreeMap;

use super::catalog::{meta_by_item, split_categories};
use super::{EntityCatalog, ItemMeta, Review};
use crate::schema::Relation;

/// One distinct static fact with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct StaticTriple {
    pub relation: Relation,
    pub head: u32,
    pub tail: u32,
    pub count: u32,
}

/// One observed search-and-purchase event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DynamicTriple {
    pub user: u32,
    pub query: u32,
    pub item: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleStore {
    statics: Vec<StaticTriple>,
    dynamics: Vec<DynamicTriple>,
    /// Per static relation: `(tail, occurrences)` ascending by tail.
    tail_freq: Vec<Vec<(u32, u64)>>,
    /// Links whose tail could not be resolved to a catalog entity.
    pub skipped: usize,
}

impl TripleStore {
    /// Merges duplicate static keys (summing counts) and sorts everything.
    pub fn new(statics: impl IntoIterator<Item = StaticTriple>, dynamics: Vec<DynamicTriple>) -> Self {
        let mut merged: BTreeMap<(Relation, u32, u32), u32> = BTreeMap::new();
        for t in statics {
            assert!(!t.relation.is_dynamic(), "search_purchase facts are dynamic triples");
            *merged.entry((t.relation, t.head, t.tail)).or_default() += t.count;
        }
        let statics: Vec<StaticTriple> = merged
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .map(|((relation, head, tail), count)| StaticTriple { relation, head, tail, count })
            .collect();
        let mut freq: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); Relation::STATIC.len()];
        for t in &statics {
            *freq[t.relation.static_index().unwrap()].entry(t.tail).or_default() += t.count as u64;
        }
        let mut dynamics = dynamics;
        dynamics.sort();
        TripleStore {
            statics,
            dynamics,
            tail_freq: freq.into_iter().map(|m| m.into_iter().collect()).collect(),
            skipped: 0,
        }
    }

    pub fn statics(&self) -> &[StaticTriple] {
        &self.statics
    }

    pub fn dynamics(&self) -> &[DynamicTriple] {
        &self.dynamics
    }

    /// `(tail, occurrences)` table of a static relation.
    pub fn tail_frequencies(&self, r: Relation) -> &[(u32, u64)] {
        r.static_index().map(|i| self.tail_freq[i].as_slice()).unwrap_or(&[])
    }

    /// Total occurrences of a static relation.
    pub fn relation_count(&self, r: Relation) -> u64 {
        self.tail_frequencies(r).iter().map(|&(_, c)| c).sum()
    }

    /// Normalized tail frequency `P_r(tail)`.
    pub fn noise_probability(&self, r: Relation, tail: u32) -> f64 {
        let table = self.tail_frequencies(r);
        let total = self.relation_count(r);
        match table.binary_search_by_key(&tail, |&(t, _)| t) {
            Ok(i) if total > 0 => table[i].1 as f64 / total as f64,
            _ => 0.0,
        }
    }

    /// Static occurrences with repeats, i.e. the length of one epoch's static stream.
    pub fn static_occurrences(&self) -> u64 {
        self.statics.iter().map(|t| t.count as u64).sum()
    }

    /// Copy keeping only the listed static relations (dynamic triples stay).
    pub fn restrict(&self, keep: &[Relation]) -> TripleStore {
        let statics = self.statics.iter().copied().filter(|t| keep.contains(&t.relation));
        let mut out = TripleStore::new(statics, self.dynamics.clone());
        out.skipped = self.skipped;
        out
    }

    /// Static relations that actually have triples.
    pub fn relations_present(&self) -> Vec<Relation> {
        Relation::STATIC.into_iter().filter(|r| self.relation_count(*r) > 0).collect()
    }
}

/// Emits static triples: one `Write` per in-vocabulary word occurrence for
/// both the reviewer and the reviewed item, and one triple per observed
/// item-item, brand and category link. Dynamic triples are added by the
/// split.
pub fn build_triples(reviews: &[Review], metadata: &[ItemMeta], catalog: &EntityCatalog) -> TripleStore {
    let mut statics = Vec::new();
    let mut skipped = 0;
    for r in reviews {
        let (Some(u), Some(i)) = (catalog.users.id(&r.user_id), catalog.items.id(&r.item_id)) else {
            skipped += 1;
            continue;
        };
        for w in r.tokens.iter().filter_map(|t| catalog.words.id(t)) {
            statics.push(StaticTriple { relation: Relation::UserWrite, head: u, tail: w, count: 1 });
            statics.push(StaticTriple { relation: Relation::ItemWrite, head: i, tail: w, count: 1 });
        }
    }

    let metas = meta_by_item(catalog, metadata);
    let mut items: Vec<_> = metas.iter().collect();
    items.sort_by_key(|(id, _)| **id);
    for (&i, m) in items {
        for (relation, links) in [
            (Relation::AlsoBought, &m.also_bought),
            (Relation::AlsoViewed, &m.also_viewed),
            (Relation::BoughtTogether, &m.bought_together),
        ] {
            for link in links {
                match catalog.items.id(link) {
                    Some(j) if j != i => statics.push(StaticTriple { relation, head: i, tail: j, count: 1 }),
                    Some(_) => {}
                    None => skipped += 1,
                }
            }
        }
        if let Some(brand) = &m.brand {
            match catalog.brands.id(brand) {
                Some(b) => statics.push(StaticTriple { relation: Relation::IsBrand, head: i, tail: b, count: 1 }),
                None => skipped += 1,
            }
        }
    }
    let split = split_categories(metas.values().copied());
    for (item, c) in &split.links {
        let name = split.categories.name(*c).expect("link ids come from the same split");
        let (Some(i), Some(c)) = (catalog.items.id(item), catalog.categories.id(name)) else {
            skipped += 1;
            continue;
        };
        statics.push(StaticTriple { relation: Relation::IsCategory, head: i, tail: c, count: 1 });
    }

    let mut store = TripleStore::new(statics, Vec::new());
    store.skipped = skipped;
    store
}
