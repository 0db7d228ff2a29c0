use std::collections::{BTreeSet, HashMap};

use super::{IdMap, ItemMeta, Review, Vocabulary};
use crate::schema::EntityType;

/// Dense id maps for every entity type.
///
/// Categories are anonymized: the model only ever sees the integer symbol of
/// a category level, while the surface name is kept for rendering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityCatalog {
    pub users: IdMap,
    pub items: IdMap,
    pub words: Vocabulary,
    pub brands: IdMap,
    pub categories: IdMap,
}

impl EntityCatalog {
    /// Users and items come from the reviews; brands and categories from the
    /// metadata of those items.
    pub fn build(reviews: &[Review], metadata: &[ItemMeta], words: Vocabulary) -> Self {
        let users = IdMap::from_names(reviews.iter().map(|r| r.user_id.as_str()));
        let items = IdMap::from_names(reviews.iter().map(|r| r.item_id.as_str()));
        let known: Vec<&ItemMeta> = metadata.iter().filter(|m| items.id(&m.item_id).is_some()).collect();
        let brands = IdMap::from_names(known.iter().filter_map(|m| m.brand.as_deref()));
        let categories = split_categories(known.iter().copied()).categories;
        EntityCatalog { users, items, words, brands, categories }
    }

    pub fn count(&self, t: EntityType) -> usize {
        match t {
            EntityType::User => self.users.len(),
            EntityType::Item => self.items.len(),
            EntityType::Word => self.words.len(),
            EntityType::Brand => self.brands.len(),
            EntityType::Category => self.categories.len(),
        }
    }

    pub fn name(&self, t: EntityType, id: u32) -> Option<&str> {
        match t {
            EntityType::User => self.users.name(id),
            EntityType::Item => self.items.name(id),
            EntityType::Word => self.words.word(id),
            EntityType::Brand => self.brands.name(id),
            EntityType::Category => self.categories.name(id),
        }
    }

    pub fn id(&self, t: EntityType, name: &str) -> Option<u32> {
        match t {
            EntityType::User => self.users.id(name),
            EntityType::Item => self.items.id(name),
            EntityType::Word => self.words.id(name),
            EntityType::Brand => self.brands.id(name),
            EntityType::Category => self.categories.id(name),
        }
    }
}

/// Category entities and item→category links.
#[derive(Debug, Clone, Default)]
pub struct CategorySplit {
    pub categories: IdMap,
    /// `(item_id, category id)`, one per distinct pair.
    pub links: Vec<(String, u32)>,
}

/// Every level of every category path becomes its own entity; an item links
/// to all levels of all of its paths. Levels with the same name share one
/// entity.
pub fn split_categories<'a, I>(metadata: I) -> CategorySplit
where
    I: IntoIterator<Item = &'a ItemMeta>,
{
    let metadata: Vec<&ItemMeta> = metadata.into_iter().collect();
    let categories =
        IdMap::from_names(metadata.iter().flat_map(|m| m.category_paths.iter().flatten()).map(String::as_str));
    let mut links = BTreeSet::new();
    for m in &metadata {
        for level in m.category_paths.iter().flatten() {
            links.insert((m.item_id.clone(), categories.id(level).expect("collected above")));
        }
    }
    CategorySplit { categories, links: links.into_iter().collect() }
}

/// Metadata keyed by item id, restricted to catalog items.
pub(crate) fn meta_by_item<'a>(catalog: &EntityCatalog, metadata: &'a [ItemMeta]) -> HashMap<u32, &'a ItemMeta> {
    metadata.iter().filter_map(|m| catalog.items.id(&m.item_id).map(|id| (id, m))).collect()
}
