//! Learnable parameters and the scoring primitives built on them.
//!
//! Every relation is an additive translation: a head embedding plus a
//! relation vector lands near the tail embedding. Static relations own one
//! learned vector each. The dynamic `SearchPurchase` relation instead uses
//! a query vector `tanh(W · mean(word embeddings) + b)`.

use rand::Rng;

use crate::error::{DremError, Result};
use crate::rng::{stream, Stream};
use crate::schema::{EntityType, ModelSchema, Relation};

/// Row-major table of `rows × dim` reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Embeddings { dim, data: vec![0.0; rows * dim] }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(DremError::InvalidArgument(format!("{} values do not form rows of width {dim}", data.len())));
        }
        Ok(Embeddings { dim, data })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Inner product with a fixed left-to-right summation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Translation vector of the dynamic relation for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector(pub Vec<f64>);

impl QueryVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// What to add to a head embedding.
#[derive(Debug, Clone, Copy)]
pub enum Translation<'a> {
    Static(Relation),
    Query(&'a QueryVector),
}

impl Translation<'_> {
    pub fn relation(&self) -> Relation {
        match self {
            Translation::Static(r) => *r,
            Translation::Query(_) => Relation::SearchPurchase,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    schema: ModelSchema,
    dim: usize,
    tables: Vec<Embeddings>,
    relations: Embeddings,
    proj_w: Vec<f64>,
    proj_b: Vec<f64>,
}

impl ModelParams {
    /// Random initialization: entity rows and the perturbation added to an
    /// identity projector are uniform in `±0.5/dim`; relation vectors and the
    /// projector bias start at zero.
    pub fn init(schema: &ModelSchema, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(DremError::InvalidArgument("embedding dimension must be ≥ 1".into()));
        }
        let mut rng = stream(seed, Stream::Init);
        let bound = 0.5 / dim as f64;
        let mut draw = move || rng.random_range(-bound..=bound);
        let tables = EntityType::ALL
            .iter()
            .map(|&t| {
                let n = schema.count(t) * dim;
                Embeddings { dim, data: (0..n).map(|_| draw()).collect() }
            })
            .collect();
        let mut proj_w: Vec<f64> = (0..dim * dim).map(|_| draw()).collect();
        for j in 0..dim {
            proj_w[j * dim + j] += 1.0;
        }
        Ok(ModelParams {
            schema: schema.clone(),
            dim,
            tables,
            relations: Embeddings::zeros(Relation::STATIC.len(), dim),
            proj_w,
            proj_b: vec![0.0; dim],
        })
    }

    /// Assembles parameters from raw blocks (used by the model file reader).
    pub fn from_parts(
        schema: ModelSchema,
        dim: usize,
        tables: Vec<Embeddings>,
        relations: Embeddings,
        proj_w: Vec<f64>,
        proj_b: Vec<f64>,
    ) -> Result<Self> {
        let bad = |what: &str| DremError::Format(format!("{what} has the wrong shape"));
        if tables.len() != EntityType::ALL.len() {
            return Err(bad("entity table list"));
        }
        for (t, table) in EntityType::ALL.iter().zip(&tables) {
            if table.dim != dim || table.rows() != schema.count(*t) {
                return Err(bad(t.name()));
            }
        }
        if relations.dim != dim || relations.rows() != Relation::STATIC.len() {
            return Err(bad("relation table"));
        }
        if proj_w.len() != dim * dim {
            return Err(bad("projector matrix"));
        }
        if proj_b.len() != dim {
            return Err(bad("projector bias"));
        }
        Ok(ModelParams { schema, dim, tables, relations, proj_w, proj_b })
    }

    pub fn schema(&self) -> &ModelSchema {
        &self.schema
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn table(&self, t: EntityType) -> &Embeddings {
        &self.tables[t.index()]
    }

    pub fn table_mut(&mut self, t: EntityType) -> &mut Embeddings {
        &mut self.tables[t.index()]
    }

    pub fn entity(&self, t: EntityType, id: u32) -> Result<&[f64]> {
        let table = self.table(t);
        if (id as usize) < table.rows() {
            Ok(table.row(id as usize))
        } else {
            Err(DremError::UnknownId { kind: t, id })
        }
    }

    /// Learned vector of a static relation. Panics on `SearchPurchase`.
    pub fn relation(&self, r: Relation) -> &[f64] {
        let idx = r.static_index().expect("the dynamic relation has no stored vector");
        self.relations.row(idx)
    }

    pub fn relation_mut(&mut self, r: Relation) -> &mut [f64] {
        let idx = r.static_index().expect("the dynamic relation has no stored vector");
        self.relations.row_mut(idx)
    }

    pub fn relation_table(&self) -> &Embeddings {
        &self.relations
    }

    pub fn projector(&self) -> (&[f64], &[f64]) {
        (&self.proj_w, &self.proj_b)
    }

    pub fn projector_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.proj_w, &mut self.proj_b)
    }

    /// Every parameter block with a label, in storage order.
    pub fn blocks(&self) -> impl Iterator<Item = (String, &[f64])> {
        EntityType::ALL.iter().map(|t| (t.name().to_string(), self.table(*t).as_slice())).chain([
            ("relations".to_string(), self.relations.as_slice()),
            ("projector_w".to_string(), &self.proj_w[..]),
            ("projector_b".to_string(), &self.proj_b[..]),
        ])
    }

    /// Rounds every value to the nearest `f32`, the precision of the model file.
    pub fn round_to_f32(&mut self) {
        let round = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = *x as f32 as f64);
        for t in &mut self.tables {
            round(t.as_mut_slice());
        }
        round(self.relations.as_mut_slice());
        round(&mut self.proj_w);
        round(&mut self.proj_b);
    }

    /// Mean of the query's word embeddings (each listed word counted once).
    pub fn mean_word_embedding(&self, word_ids: &[u32]) -> Result<Vec<f64>> {
        if word_ids.is_empty() {
            return Err(DremError::EmptyQuery);
        }
        let mut mean = vec![0.0; self.dim];
        for &w in word_ids {
            for (m, x) in mean.iter_mut().zip(self.entity(EntityType::Word, w)?) {
                *m += x;
            }
        }
        let n = word_ids.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }

    /// `W · m + b` for a mean word vector `m`.
    pub fn projector_preactivation(&self, mean: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|j| dot(&self.proj_w[j * self.dim..(j + 1) * self.dim], mean) + self.proj_b[j]).collect()
    }

    /// Query vector `tanh(W · mean(words) + b)`.
    pub fn project_query(&self, word_ids: &[u32]) -> Result<QueryVector> {
        let mean = self.mean_word_embedding(word_ids)?;
        let z = self.projector_preactivation(&mean);
        Ok(QueryVector(z.into_iter().map(f64::tanh).collect()))
    }

    /// Head embedding plus the translation vector.
    pub fn translate(&self, head_type: EntityType, head_id: u32, by: Translation<'_>) -> Result<Vec<f64>> {
        let relation = by.relation();
        if relation.head_type() != head_type {
            return Err(DremError::TypeMismatch { relation, found: head_type });
        }
        let head = self.entity(head_type, head_id)?;
        let delta = match by {
            Translation::Static(r) => self.relation(r),
            Translation::Query(v) => v.as_slice(),
        };
        Ok(head.iter().zip(delta).map(|(h, d)| h + d).collect())
    }

    /// Dot product of a translated vector with a tail embedding.
    pub fn score_tail(&self, translated: &[f64], tail_type: EntityType, tail_id: u32) -> Result<f64> {
        Ok(dot(translated, self.entity(tail_type, tail_id)?))
    }

    /// Softmax probability of `tail` among `candidates` for a translated head.
    pub fn softmax_prob(
        &self,
        head_type: EntityType,
        head_id: u32,
        by: Translation<'_>,
        tail: u32,
        candidates: &[u32],
    ) -> Result<f64> {
        let pos = candidates.iter().position(|&c| c == tail).ok_or(DremError::TailNotInCandidates(tail))?;
        let translated = self.translate(head_type, head_id, by)?;
        let tail_type = by.relation().tail_type();
        let logits =
            candidates.iter().map(|&c| self.score_tail(&translated, tail_type, c)).collect::<Result<Vec<_>>>()?;
        Ok(softmax(&logits)[pos])
    }
}

/// Softmax with max-logit subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `log Σ exp(x)` with max subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
