//! Per-triple negative-sampling objective and its analytic gradient.

use crate::error::{DremError, Result};
use crate::model::{dot, ModelParams};
use crate::schema::{EntityType, Relation};

/// One training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TripleRef<'a> {
    Static { relation: Relation, head: u32, tail: u32 },
    Dynamic { user: u32, words: &'a [u32], item: u32 },
}

impl TripleRef<'_> {
    pub fn relation(&self) -> Relation {
        match self {
            TripleRef::Static { relation, .. } => *relation,
            TripleRef::Dynamic { .. } => Relation::SearchPurchase,
        }
    }

    fn head(&self) -> (EntityType, u32) {
        match *self {
            TripleRef::Static { relation, head, .. } => (relation.head_type(), head),
            TripleRef::Dynamic { user, .. } => (EntityType::User, user),
        }
    }

    fn tail(&self) -> (EntityType, u32) {
        match *self {
            TripleRef::Static { relation, tail, .. } => (relation.tail_type(), tail),
            TripleRef::Dynamic { item, .. } => (EntityType::Item, item),
        }
    }
}

/// Addresses one parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKey {
    Entity(EntityType, u32),
    Relation(Relation),
    ProjectorW,
    ProjectorB,
}

impl ParamKey {
    pub fn label(&self) -> String {
        match self {
            ParamKey::Entity(t, id) => format!("{t}[{id}]"),
            ParamKey::Relation(r) => format!("relation {r}"),
            ParamKey::ProjectorW => "projector_w".into(),
            ParamKey::ProjectorB => "projector_b".into(),
        }
    }
}

pub(crate) fn block_mut(params: &mut ModelParams, key: ParamKey) -> &mut [f64] {
    match key {
        ParamKey::Entity(t, id) => params.table_mut(t).row_mut(id as usize),
        ParamKey::Relation(r) => params.relation_mut(r),
        ParamKey::ProjectorW => params.projector_mut().0,
        ParamKey::ProjectorB => params.projector_mut().1,
    }
}

/// `log σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradient fragments of one triple. Keys may repeat; fragments with the
/// same key add up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub parts: Vec<(ParamKey, Vec<f64>)>,
}

struct Forward {
    h: Vec<f64>,
    /// Mean word vector and projector output, for dynamic triples.
    query: Option<(Vec<f64>, Vec<f64>)>,
}

fn check_ids(params: &ModelParams, triple: &TripleRef<'_>, negatives: &[u32]) -> Result<()> {
    let (ht, hid) = triple.head();
    let (tt, tid) = triple.tail();
    params.entity(ht, hid)?;
    params.entity(tt, tid)?;
    for &n in negatives {
        params.entity(tt, n)?;
    }
    if let TripleRef::Static { relation, .. } = triple {
        if relation.is_dynamic() {
            return Err(DremError::InvalidArgument("search_purchase needs a query".into()));
        }
    }
    Ok(())
}

fn forward(params: &ModelParams, triple: &TripleRef<'_>) -> Result<Forward> {
    match *triple {
        TripleRef::Static { relation, head, .. } => {
            let h = params
                .entity(relation.head_type(), head)?
                .iter()
                .zip(params.relation(relation))
                .map(|(a, b)| a + b)
                .collect();
            Ok(Forward { h, query: None })
        }
        TripleRef::Dynamic { user, words, .. } => {
            let mean = params.mean_word_embedding(words)?;
            let z = params.projector_preactivation(&mean);
            let v: Vec<f64> = z.iter().map(|x| x.tanh()).collect();
            let h = params.entity(EntityType::User, user)?.iter().zip(&v).map(|(a, b)| a + b).collect();
            Ok(Forward { h, query: Some((mean, v)) })
        }
    }
}

/// `log σ(h·y) + Σ_j log σ(−h·y_j)` with `h` the translated head, `y` the
/// positive tail and `y_j` the negatives.
pub fn triple_objective(params: &ModelParams, triple: &TripleRef<'_>, negatives: &[u32]) -> Result<f64> {
    check_ids(params, triple, negatives)?;
    let fw = forward(params, triple)?;
    let (tt, tid) = triple.tail();
    let table = params.table(tt);
    let mut obj = log_sigmoid(dot(&fw.h, table.row(tid as usize)));
    for &n in negatives {
        obj += log_sigmoid(-dot(&fw.h, table.row(n as usize)));
    }
    Ok(obj)
}

/// Objective value and its gradient (direction of ascent) with respect to
/// every parameter the triple touches.
pub fn triple_gradients(params: &ModelParams, triple: &TripleRef<'_>, negatives: &[u32]) -> Result<(f64, Gradient)> {
    check_ids(params, triple, negatives)?;
    let fw = forward(params, triple)?;
    let dim = params.dim();
    let (tt, tid) = triple.tail();
    let table = params.table(tt);
    let mut parts = Vec::with_capacity(negatives.len() + 4);

    let y = table.row(tid as usize);
    let s = dot(&fw.h, y);
    let mut obj = log_sigmoid(s);
    let coef = 1.0 - sigmoid(s);
    let mut g_h: Vec<f64> = y.iter().map(|v| coef * v).collect();
    parts.push((ParamKey::Entity(tt, tid), fw.h.iter().map(|v| coef * v).collect()));
    for &n in negatives {
        let yn = table.row(n as usize);
        let s = dot(&fw.h, yn);
        obj += log_sigmoid(-s);
        let c = sigmoid(s);
        for (g, v) in g_h.iter_mut().zip(yn) {
            *g -= c * v;
        }
        parts.push((ParamKey::Entity(tt, n), fw.h.iter().map(|v| -c * v).collect()));
    }

    let (ht, hid) = triple.head();
    parts.push((ParamKey::Entity(ht, hid), g_h.clone()));
    match (triple, fw.query) {
        (TripleRef::Static { relation, .. }, _) => parts.push((ParamKey::Relation(*relation), g_h)),
        (TripleRef::Dynamic { words, .. }, Some((mean, v))) => {
            let g_z: Vec<f64> = g_h.iter().zip(&v).map(|(g, v)| g * (1.0 - v * v)).collect();
            let (w, _) = params.projector();
            let mut g_w = vec![0.0; dim * dim];
            let mut g_m = vec![0.0; dim];
            for j in 0..dim {
                let row = &w[j * dim..(j + 1) * dim];
                for k in 0..dim {
                    g_w[j * dim + k] = g_z[j] * mean[k];
                    g_m[k] += row[k] * g_z[j];
                }
            }
            let n = words.len() as f64;
            let g_word: Vec<f64> = g_m.iter().map(|g| g / n).collect();
            for &wid in words.iter() {
                parts.push((ParamKey::Entity(EntityType::Word, wid), g_word.clone()));
            }
            parts.push((ParamKey::ProjectorW, g_w));
            parts.push((ParamKey::ProjectorB, g_z));
        }
        (TripleRef::Dynamic { .. }, None) => unreachable!("dynamic forward always builds a query"),
    }
    Ok((obj, Gradient { parts }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Embeddings;
    use crate::schema::ModelSchema;
    use std::collections::BTreeMap;

    fn params(dim: usize, seed: u64) -> ModelParams {
        let mut p = ModelParams::init(&ModelSchema::full(3, 4, 6, 2, 2), dim, seed).unwrap();
        // Move away from the tiny-initialization regime so every term matters.
        use rand::Rng;
        let mut rng = crate::rng::stream(seed + 100, crate::rng::Stream::Synthetic);
        for t in EntityType::ALL {
            p.table_mut(t).as_mut_slice().iter_mut().for_each(|x| *x = rng.random_range(-0.8..0.8));
        }
        for r in Relation::STATIC {
            p.relation_mut(r).iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
        }
        let (w, b) = p.projector_mut();
        w.iter_mut().for_each(|x| *x += rng.random_range(-0.3..0.3));
        b.iter_mut().for_each(|x| *x = rng.random_range(-0.3..0.3));
        p
    }

    fn summed(g: &Gradient) -> BTreeMap<ParamKey, Vec<f64>> {
        let mut out: BTreeMap<ParamKey, Vec<f64>> = BTreeMap::new();
        for (k, v) in &g.parts {
            let e = out.entry(*k).or_insert_with(|| vec![0.0; v.len()]);
            e.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        out
    }

    /// Central differences on every coordinate of every touched block;
    /// returns the worst per-block relative error.
    fn worst_relative_error(p: &ModelParams, triple: TripleRef<'_>, negs: &[u32]) -> f64 {
        let (obj, g) = triple_gradients(p, &triple, negs).unwrap();
        assert!((obj - triple_objective(p, &triple, negs).unwrap()).abs() < 1e-12);
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for (key, analytic) in summed(&g) {
            let mut numeric = vec![0.0; analytic.len()];
            for (c, num) in numeric.iter_mut().enumerate() {
                let mut plus = p.clone();
                block_mut(&mut plus, key)[c] += eps;
                let mut minus = p.clone();
                block_mut(&mut minus, key)[c] -= eps;
                let fp = triple_objective(&plus, &triple, negs).unwrap();
                let fm = triple_objective(&minus, &triple, negs).unwrap();
                *num = (fp - fm) / (2.0 * eps);
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
            worst = worst.max(diff / scale);
        }
        worst
    }

    #[test]
    fn static_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let p = params(6, seed);
            for (relation, head, tail, negs) in [
                (Relation::UserWrite, 1, 2, vec![0, 3, 5, 2, 4]),
                (Relation::AlsoBought, 0, 3, vec![3, 0, 0, 1, 2]),
                (Relation::IsBrand, 2, 1, vec![0, 0, 1]),
            ] {
                let err = worst_relative_error(&p, TripleRef::Static { relation, head, tail }, &negs);
                assert!(err < 1e-5, "{relation}: {err}");
            }
        }
    }

    #[test]
    fn dynamic_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let p = params(5, seed);
            let words = [0u32, 3, 5];
            let triple = TripleRef::Dynamic { user: 2, words: &words, item: 1 };
            let err = worst_relative_error(&p, triple, &[0, 1, 3, 3, 2]);
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_parameters_give_six_log_halves() {
        let schema = ModelSchema::full(2, 3, 2, 1, 1);
        let tables = EntityType::ALL.iter().map(|&t| Embeddings::zeros(schema.count(t), 4)).collect();
        let p =
            ModelParams::from_parts(schema, 4, tables, Embeddings::zeros(7, 4), vec![0.0; 16], vec![0.0; 4]).unwrap();
        let t = TripleRef::Static { relation: Relation::AlsoViewed, head: 0, tail: 1 };
        let obj = triple_objective(&p, &t, &[0, 1, 2, 2, 0]).unwrap();
        assert!((obj - -4.158_883_083_359_672).abs() < 1e-12);
        let (_, g) = triple_gradients(&p, &t, &[0, 1, 2, 2, 0]).unwrap();
        assert!(g.parts.iter().all(|(_, v)| v.iter().all(|&x| x == 0.0)));
        let words = [0u32, 1];
        let d = TripleRef::Dynamic { user: 1, words: &words, item: 2 };
        assert!((triple_objective(&p, &d, &[0, 1, 2, 0, 1]).unwrap() - -4.158_883_083_359_672).abs() < 1e-12);
    }

    #[test]
    fn saturated_scores_approach_zero() {
        let mut p = params(2, 3);
        p.table_mut(EntityType::Brand).as_mut_slice().copy_from_slice(&[30.0, 0.0, -30.0, 0.0]);
        p.table_mut(EntityType::Item).row_mut(0).copy_from_slice(&[1.0, 0.0]);
        p.relation_mut(Relation::IsBrand).copy_from_slice(&[0.0, 0.0]);
        let t = TripleRef::Static { relation: Relation::IsBrand, head: 0, tail: 0 };
        let obj = triple_objective(&p, &t, &[1, 1, 1, 1, 1]).unwrap();
        assert!(obj < 0.0 && obj > -1e-11, "{obj}");
    }

    /// Straight-line evaluation from the raw blocks, sharing no code with
    /// the forward pass.
    fn oracle(p: &ModelParams, user: u32, words: &[u32], item: u32, negs: &[u32]) -> f64 {
        let d = p.dim();
        let wt = p.table(EntityType::Word).as_slice();
        let (w, b) = p.projector();
        let mut m = vec![0.0; d];
        for &x in words {
            for k in 0..d {
                m[k] += wt[x as usize * d + k] / words.len() as f64;
            }
        }
        let mut h = vec![0.0; d];
        for j in 0..d {
            let mut z = b[j];
            for k in 0..d {
                z += w[j * d + k] * m[k];
            }
            h[j] = p.table(EntityType::User).as_slice()[user as usize * d + j] + z.tanh();
        }
        let it = p.table(EntityType::Item).as_slice();
        let score = |i: u32| (0..d).map(|k| h[k] * it[i as usize * d + k]).sum::<f64>();
        let ls = |x: f64| -(1.0 + (-x).exp()).ln();
        ls(score(item)) + negs.iter().map(|&n| ls(-score(n))).sum::<f64>()
    }

    #[test]
    fn matches_straight_line_oracle() {
        for seed in 0..10 {
            let p = params(7, seed);
            let words = [1u32, 4];
            let t = TripleRef::Dynamic { user: 0, words: &words, item: 3 };
            let negs = [0, 2, 2, 1, 3];
            let got = triple_objective(&p, &t, &negs).unwrap();
            assert!((got - oracle(&p, 0, &words, 3, &negs)).abs() < 1e-10);
        }
    }

    #[test]
    fn stable_log_sigmoid() {
        assert_eq!(log_sigmoid(800.0), 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }

    #[test]
    fn head_type_is_checked() {
        let p = params(3, 1);
        let t = TripleRef::Static { relation: Relation::SearchPurchase, head: 0, tail: 0 };
        assert!(triple_objective(&p, &t, &[]).is_err());
        let t = TripleRef::Static { relation: Relation::IsBrand, head: 0, tail: 9 };
        assert!(matches!(triple_objective(&p, &t, &[]), Err(DremError::UnknownId { .. })));
        let t = TripleRef::Dynamic { user: 0, words: &[], item: 0 };
        assert!(matches!(triple_objective(&p, &t, &[]), Err(DremError::EmptyQuery)));
    }
}
