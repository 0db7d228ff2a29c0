//! Negative-sampling distributions.

use rand::Rng;

use crate::corpus::TripleStore;
use crate::error::{DremError, Result};
use crate::schema::Relation;

#[derive(Debug, Clone)]
struct Cumulative {
    tails: Vec<u32>,
    /// Running occurrence totals, strictly increasing.
    bounds: Vec<u64>,
}

impl Cumulative {
    fn total(&self) -> u64 {
        self.bounds.last().copied().unwrap_or(0)
    }
}

/// Frequency-proportional tail samplers for static relations and a uniform
/// item sampler for the dynamic relation.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    tables: Vec<Cumulative>,
    num_items: u32,
}

impl NoiseTable {
    pub fn new(store: &TripleStore, num_items: usize) -> Self {
        let tables = Relation::STATIC
            .iter()
            .map(|&r| {
                let mut acc = 0;
                let (tails, bounds) = store
                    .tail_frequencies(r)
                    .iter()
                    .map(|&(t, c)| {
                        acc += c;
                        (t, acc)
                    })
                    .unzip();
                Cumulative { tails, bounds }
            })
            .collect();
        NoiseTable { tables, num_items: num_items as u32 }
    }

    /// Probability of drawing `tail` as a negative for `relation`.
    pub fn probability(&self, relation: Relation, tail: u32) -> f64 {
        match relation.static_index() {
            None if tail < self.num_items => 1.0 / self.num_items as f64,
            None => 0.0,
            Some(idx) => {
                let t = &self.tables[idx];
                match t.tails.binary_search(&tail) {
                    Ok(i) => {
                        let lo = if i == 0 { 0 } else { t.bounds[i - 1] };
                        (t.bounds[i] - lo) as f64 / t.total() as f64
                    }
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// `k` independent draws. Draws may repeat and may hit the positive tail.
    pub fn sample_negatives(&self, relation: Relation, k: usize, rng: &mut impl Rng) -> Result<Vec<u32>> {
        match relation.static_index() {
            None => {
                if self.num_items == 0 {
                    return Err(DremError::EmptyNoiseTable(relation));
                }
                Ok((0..k).map(|_| rng.random_range(0..self.num_items)).collect())
            }
            Some(idx) => {
                let t = &self.tables[idx];
                let total = t.total();
                if total == 0 {
                    return Err(DremError::EmptyNoiseTable(relation));
                }
                Ok((0..k)
                    .map(|_| {
                        let x = rng.random_range(0..total);
                        t.tails[t.bounds.partition_point(|&b| b <= x)]
                    })
                    .collect())
            }
        }
    }
}
