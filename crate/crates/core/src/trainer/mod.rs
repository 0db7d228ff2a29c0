//! Stochastic gradient ascent on the combined static and dynamic objective.

mod noise;
mod objective;
mod pmi;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use noise::NoiseTable;
pub use objective::{log_sigmoid, sigmoid, triple_gradients, triple_objective, Gradient, ParamKey, TripleRef};
pub use pmi::{scalar_optimum_check, shifted_pmi};

use crate::corpus::{QuerySet, TripleStore};
use crate::error::{DremError, Result};
use crate::model::ModelParams;
use crate::rng::{stream, Stream};

/// How per-triple gradients combine into a batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchReduction {
    /// Average over the batch.
    Mean,
    /// Plain sum over the batch.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    /// Weight of the dynamic relation in `[0, 1]`; static triples get `1 − λ`.
    pub lambda: f64,
    /// Negatives per positive.
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub reduction: BatchReduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 300,
            lambda: 0.5,
            negatives: 5,
            epochs: 20,
            lr_start: 0.5,
            batch_size: 64,
            grad_clip_norm: 5.0,
            seed: 0,
            reduction: BatchReduction::Sum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DremError::InvalidArgument(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} is outside [0, 1]", self.lambda));
        }
        if self.negatives == 0 {
            return bad("k must be ≥ 1".into());
        }
        if !(self.lr_start > 0.0) {
            return bad(format!("lr_start {} must be positive", self.lr_start));
        }
        if self.batch_size == 0 || self.dim == 0 {
            return bad("batch size and dimension must be ≥ 1".into());
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad(format!("clip norm {} must be positive", self.grad_clip_norm));
        }
        Ok(())
    }

    fn weight(&self, dynamic: bool) -> f64 {
        if dynamic {
            self.lambda
        } else {
            1.0 - self.lambda
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    /// Mean per-triple objective over every triple of the epoch.
    pub mean_objective: f64,
    pub mean_objective_static: f64,
    pub mean_objective_dynamic: f64,
    /// Learning rate at the last step of the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub epochs: Vec<EpochTrace>,
}

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_objective,mean_objective_static,mean_objective_dynamic,lr\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch, e.mean_objective, e.mean_objective_static, e.mean_objective_dynamic, e.lr
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| DremError::io(path, e))
    }
}

/// Summed, weighted gradient of one batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchGradient {
    pub blocks: BTreeMap<ParamKey, Vec<f64>>,
}

impl BatchGradient {
    fn add(&mut self, g: Gradient, weight: f64) {
        for (key, v) in g.parts {
            let slot = self.blocks.entry(key).or_insert_with(|| vec![0.0; v.len()]);
            slot.iter_mut().zip(&v).for_each(|(a, b)| *a += weight * b);
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks.values().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.blocks.values_mut().flatten().for_each(|x| *x *= factor);
    }

    /// Rescales to `max_norm` when the global norm exceeds it.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
        norm
    }

    /// `θ ← θ + lr·g`, then checks the touched blocks for NaN or infinity.
    pub fn apply(&self, params: &mut ModelParams, lr: f64, step: usize) -> Result<()> {
        for (&key, g) in &self.blocks {
            let target = objective::block_mut(params, key);
            target.iter_mut().zip(g).for_each(|(t, g)| *t += lr * g);
            if target.iter().any(|x| !x.is_finite()) {
                return Err(DremError::NonFinite { block: key.label(), step });
            }
        }
        Ok(())
    }
}

/// Per-triple objectives and the reduced, weighted, unclipped batch
/// gradient. Triples with zero weight contribute their objective only.
pub fn batch_gradient(
    params: &ModelParams,
    batch: &[TripleRef<'_>],
    negatives: &[Vec<u32>],
    config: &TrainConfig,
) -> Result<(Vec<f64>, BatchGradient)> {
    let results: Vec<Result<(f64, Option<Gradient>)>> = batch
        .par_iter()
        .zip(negatives)
        .map(|(t, negs)| {
            if config.weight(t.relation().is_dynamic()) == 0.0 {
                Ok((triple_objective(params, t, negs)?, None))
            } else {
                triple_gradients(params, t, negs).map(|(o, g)| (o, Some(g)))
            }
        })
        .collect();
    let denom = match config.reduction {
        BatchReduction::Mean => batch.len() as f64,
        BatchReduction::Sum => 1.0,
    };
    let mut grad = BatchGradient::default();
    let mut objectives = Vec::with_capacity(batch.len());
    for (t, r) in batch.iter().zip(results) {
        let (obj, g) = r?;
        objectives.push(obj);
        if let Some(g) = g {
            grad.add(g, config.weight(t.relation().is_dynamic()) / denom);
        }
    }
    Ok((objectives, grad))
}

fn to_ref<'a>(store: &TripleStore, queries: &'a QuerySet, statics: &[u32], idx: u32) -> TripleRef<'a> {
    let n_static = statics.len() as u32;
    if idx < n_static {
        let t = store.statics()[statics[idx as usize] as usize];
        TripleRef::Static { relation: t.relation, head: t.head, tail: t.tail }
    } else {
        let t = store.dynamics()[(idx - n_static) as usize];
        TripleRef::Dynamic { user: t.user, words: queries.words(t.query), item: t.item }
    }
}

/// Trains `params` in place and returns the per-epoch trace.
///
/// Every epoch shuffles the concatenation of static occurrences (a triple
/// with count `c` appears `c` times) and dynamic triples, then walks it in
/// batches. The learning rate decays linearly from `lr_start` towards 0 over
/// all steps.
pub fn train(
    params: &mut ModelParams,
    store: &TripleStore,
    queries: &QuerySet,
    config: &TrainConfig,
) -> Result<LossTrace> {
    config.validate()?;
    if params.dim() != config.dim {
        return Err(DremError::InvalidArgument(format!(
            "model dimension {} differs from the configured {}",
            params.dim(),
            config.dim
        )));
    }
    let statics: Vec<u32> =
        store.statics().iter().enumerate().flat_map(|(i, t)| std::iter::repeat_n(i as u32, t.count as usize)).collect();
    let total = statics.len() + store.dynamics().len();
    if total == 0 {
        return Err(DremError::EmptyCorpus("no training triples"));
    }
    if total > u32::MAX as usize {
        return Err(DremError::InvalidArgument("more than 2^32 training triples".into()));
    }
    let noise = NoiseTable::new(store, params.schema().count(crate::schema::EntityType::Item));
    let mut rng = stream(config.seed, Stream::Sampling);
    let mut order: Vec<u32> = (0..total as u32).collect();
    let steps_per_epoch = total.div_ceil(config.batch_size);
    let total_steps = (steps_per_epoch * config.epochs) as f64;
    let mut trace = LossTrace::default();
    let mut step = 0usize;
    info!(
        "training on {} static and {} dynamic triples for {} epochs",
        statics.len(),
        store.dynamics().len(),
        config.epochs
    );

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut sum_s, mut n_s, mut sum_d, mut n_d) = (0.0, 0usize, 0.0, 0usize);
        let mut lr = config.lr_start;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TripleRef<'_>> = chunk.iter().map(|&i| to_ref(store, queries, &statics, i)).collect();
            let negatives = batch
                .iter()
                .map(|t| noise.sample_negatives(t.relation(), config.negatives, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let (objectives, mut grad) = batch_gradient(params, &batch, &negatives, config)?;
            for (t, o) in batch.iter().zip(&objectives) {
                if t.relation().is_dynamic() {
                    sum_d += o;
                    n_d += 1;
                } else {
                    sum_s += o;
                    n_s += 1;
                }
            }
            grad.clip(config.grad_clip_norm);
            lr = config.lr_start * (1.0 - step as f64 / total_steps);
            grad.apply(params, lr, step)?;
            step += 1;
        }
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        let e = EpochTrace {
            epoch: epoch + 1,
            mean_objective: mean(sum_s + sum_d, n_s + n_d),
            mean_objective_static: mean(sum_s, n_s),
            mean_objective_dynamic: mean(sum_d, n_d),
            lr,
        };
        debug!(
            "epoch {}: objective {:.5} (static {:.5}, dynamic {:.5})",
            e.epoch, e.mean_objective, e.mean_objective_static, e.mean_objective_dynamic
        );
        trace.epochs.push(e);
    }
    Ok(trace)
}
