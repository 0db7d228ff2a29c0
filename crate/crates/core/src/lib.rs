//! Dynamic relation embeddings for explainable personalized product search.
//!
//! Users, items, review words, brands and categories live in one latent
//! space. Static relations (`Write`, `Also_bought`, `Is_brand`, ...) are
//! learned translation vectors; the `Search&Purchase` relation is computed
//! per query. Items are ranked for a `(user, query)` pair by
//! `(user + f(query)) · item`, and explanations are recovered by soft
//! matching user-side and item-side translations in a shared entity type.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod explainer;
pub mod model;
pub mod persist;
pub mod pipeline;
pub mod retrieval;
pub mod rng;
pub mod schema;
pub mod synthetic;
pub mod text;
pub mod trainer;

pub use error::{DremError, Result};
pub use model::{ModelParams, QueryVector, Translation};
pub use schema::{EntityType, ModelSchema, Relation};
