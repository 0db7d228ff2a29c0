//! Entity types and relation signatures of the product knowledge graph.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DremError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    User,
    Item,
    Word,
    Brand,
    Category,
}

impl EntityType {
    pub const ALL: [EntityType; 5] =
        [EntityType::User, EntityType::Item, EntityType::Word, EntityType::Brand, EntityType::Category];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityType::User => "user",
            EntityType::Item => "item",
            EntityType::Word => "word",
            EntityType::Brand => "brand",
            EntityType::Category => "category",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityType {
    type Err = DremError;

    fn from_str(s: &str) -> Result<Self> {
        EntityType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| DremError::InvalidArgument(format!("unknown entity type `{s}`")))
    }
}

/// Typed, directed relation between entity types.
///
/// `SearchPurchase` is the only dynamic relation: its translation vector is
/// computed per query instead of being a learned constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    SearchPurchase,
    UserWrite,
    ItemWrite,
    AlsoBought,
    AlsoViewed,
    BoughtTogether,
    IsBrand,
    IsCategory,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::SearchPurchase,
        Relation::UserWrite,
        Relation::ItemWrite,
        Relation::AlsoBought,
        Relation::AlsoViewed,
        Relation::BoughtTogether,
        Relation::IsBrand,
        Relation::IsCategory,
    ];

    pub const STATIC: [Relation; 7] = [
        Relation::UserWrite,
        Relation::ItemWrite,
        Relation::AlsoBought,
        Relation::AlsoViewed,
        Relation::BoughtTogether,
        Relation::IsBrand,
        Relation::IsCategory,
    ];

    pub fn head_type(self) -> EntityType {
        match self {
            Relation::SearchPurchase | Relation::UserWrite => EntityType::User,
            _ => EntityType::Item,
        }
    }

    pub fn tail_type(self) -> EntityType {
        match self {
            Relation::SearchPurchase | Relation::AlsoBought | Relation::AlsoViewed | Relation::BoughtTogether => {
                EntityType::Item
            }
            Relation::UserWrite | Relation::ItemWrite => EntityType::Word,
            Relation::IsBrand => EntityType::Brand,
            Relation::IsCategory => EntityType::Category,
        }
    }

    pub fn is_dynamic(self) -> bool {
        self == Relation::SearchPurchase
    }

    /// Row of this relation in the static relation table, `None` for the
    /// dynamic relation.
    pub fn static_index(self) -> Option<usize> {
        match self {
            Relation::SearchPurchase => None,
            r => Some(r as usize - 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::SearchPurchase => "search_purchase",
            Relation::UserWrite => "user_write",
            Relation::ItemWrite => "item_write",
            Relation::AlsoBought => "also_bought",
            Relation::AlsoViewed => "also_viewed",
            Relation::BoughtTogether => "bought_together",
            Relation::IsBrand => "is_brand",
            Relation::IsCategory => "is_category",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Relation> {
        Relation::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = DremError;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| DremError::InvalidArgument(format!("unknown relation `{s}`")))
    }
}

/// Entity cardinalities plus the set of relations the model is built with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSchema {
    counts: [usize; 5],
    present: [bool; 5],
    relations: Vec<Relation>,
}

impl ModelSchema {
    /// Builds a schema over the given entity types. Relations whose endpoint
    /// types are missing are rejected, and `SearchPurchase` is always added.
    pub fn new(entity_counts: &[(EntityType, usize)], relations: &[Relation]) -> Result<Self> {
        let mut counts = [0; 5];
        let mut present = [false; 5];
        for &(t, n) in entity_counts {
            counts[t.index()] = n;
            present[t.index()] = true;
        }
        let mut rels: Vec<Relation> = relations.to_vec();
        rels.push(Relation::SearchPurchase);
        rels.sort();
        rels.dedup();
        for r in &rels {
            for t in [r.head_type(), r.tail_type()] {
                if !present[t.index()] {
                    return Err(DremError::InvalidArgument(format!(
                        "relation {r} needs entity type {t}, which the schema lacks"
                    )));
                }
            }
        }
        Ok(ModelSchema { counts, present, relations: rels })
    }

    /// All five entity types and all eight relations.
    pub fn full(users: usize, items: usize, words: usize, brands: usize, categories: usize) -> Self {
        Self::new(
            &[
                (EntityType::User, users),
                (EntityType::Item, items),
                (EntityType::Word, words),
                (EntityType::Brand, brands),
                (EntityType::Category, categories),
            ],
            &Relation::ALL,
        )
        .expect("full schema is well-formed")
    }

    pub fn count(&self, t: EntityType) -> usize {
        self.counts[t.index()]
    }

    pub fn has_type(&self, t: EntityType) -> bool {
        self.present[t.index()]
    }

    pub fn entity_types(&self) -> impl Iterator<Item = EntityType> + '_ {
        EntityType::ALL.into_iter().filter(|t| self.has_type(*t))
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn has_relation(&self, r: Relation) -> bool {
        self.relations.contains(&r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signatures() {
        assert_eq!(Relation::SearchPurchase.head_type(), EntityType::User);
        assert_eq!(Relation::SearchPurchase.tail_type(), EntityType::Item);
        assert_eq!(Relation::UserWrite.tail_type(), EntityType::Word);
        assert_eq!(Relation::ItemWrite.head_type(), EntityType::Item);
        assert_eq!(Relation::IsCategory.tail_type(), EntityType::Category);
        let dynamic: Vec<_> = Relation::ALL.iter().filter(|r| r.is_dynamic()).collect();
        assert_eq!(dynamic, vec![&Relation::SearchPurchase]);
    }

    #[test]
    fn static_indices_are_dense() {
        let idx: Vec<_> = Relation::STATIC.iter().map(|r| r.static_index().unwrap()).collect();
        assert_eq!(idx, (0..7).collect::<Vec<_>>());
        assert_eq!(Relation::SearchPurchase.static_index(), None);
    }

    #[test]
    fn names_round_trip() {
        for r in Relation::ALL {
            assert_eq!(r.name().parse::<Relation>().unwrap(), r);
            assert_eq!(Relation::from_code(r.code()), Some(r));
        }
        for t in EntityType::ALL {
            assert_eq!(t.name().parse::<EntityType>().unwrap(), t);
        }
    }

    #[test]
    fn schema_rejects_missing_endpoint() {
        let err = ModelSchema::new(&[(EntityType::User, 2), (EntityType::Item, 3)], &[Relation::IsBrand]);
        assert!(err.is_err());
    }

    #[test]
    fn schema_always_has_search_purchase() {
        let s = ModelSchema::new(&[(EntityType::User, 2), (EntityType::Item, 3)], &[]).unwrap();
        assert_eq!(s.relations(), &[Relation::SearchPurchase]);
    }
}
