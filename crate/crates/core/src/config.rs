//! Run configuration: plain `key = value` files, overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::{Bm25Params, Scorer};
use crate::error::{DremError, Result};
use crate::explainer::ExplainOptions;
use crate::schema::Relation;
use crate::trainer::TrainConfig;

/// Which static relations a model is trained with. `Write` is always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelationSubset {
    NoMeta,
    AlsoBought,
    AlsoViewed,
    BoughtTogether,
    Brand,
    Category,
    #[default]
    All,
}

impl RelationSubset {
    pub const ALL: [RelationSubset; 7] = [
        RelationSubset::NoMeta,
        RelationSubset::AlsoBought,
        RelationSubset::AlsoViewed,
        RelationSubset::BoughtTogether,
        RelationSubset::Brand,
        RelationSubset::Category,
        RelationSubset::All,
    ];

    pub fn relations(self) -> Vec<Relation> {
        let mut out = vec![Relation::UserWrite, Relation::ItemWrite];
        match self {
            RelationSubset::NoMeta => {}
            RelationSubset::AlsoBought => out.push(Relation::AlsoBought),
            RelationSubset::AlsoViewed => out.push(Relation::AlsoViewed),
            RelationSubset::BoughtTogether => out.push(Relation::BoughtTogether),
            RelationSubset::Brand => out.push(Relation::IsBrand),
            RelationSubset::Category => out.push(Relation::IsCategory),
            RelationSubset::All => out = Relation::STATIC.to_vec(),
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationSubset::NoMeta => "NoMeta",
            RelationSubset::AlsoBought => "AB",
            RelationSubset::AlsoViewed => "AV",
            RelationSubset::BoughtTogether => "BT",
            RelationSubset::Brand => "Bnd",
            RelationSubset::Category => "Cat",
            RelationSubset::All => "All",
        }
    }
}

impl fmt::Display for RelationSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationSubset {
    type Err = DremError;

    fn from_str(s: &str) -> Result<Self> {
        RelationSubset::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(s)).ok_or_else(|| {
            DremError::InvalidArgument(format!("unknown relation subset `{s}` (NoMeta, AB, AV, BT, Bnd, Cat, All)"))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub reviews: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub min_freq: u64,
    pub test_ratio: f64,
    pub dim: usize,
    pub lambda: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub beta: f64,
    pub max_hops: usize,
    pub top_per_type: usize,
    pub top_k: usize,
    pub relations: RelationSubset,
    pub seed: u64,
    pub mu: f64,
    pub k1: f64,
    pub b: f64,
    pub bm25_literal_paper_formula: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let e = ExplainOptions::default();
        let bm = Bm25Params::default();
        RunConfig {
            reviews: None,
            metadata: None,
            data_dir: PathBuf::from("data"),
            min_freq: 5,
            test_ratio: 0.3,
            dim: t.dim,
            lambda: t.lambda,
            negatives: t.negatives,
            epochs: t.epochs,
            lr_start: t.lr_start,
            batch_size: t.batch_size,
            grad_clip_norm: t.grad_clip_norm,
            beta: e.beta,
            max_hops: e.max_hops,
            top_per_type: e.top_per_type,
            top_k: 100,
            relations: RelationSubset::All,
            seed: 0,
            mu: 2000.0,
            k1: bm.k1,
            b: bm.b,
            bm25_literal_paper_formula: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| DremError::InvalidArgument(format!("bad value {value:?} for `{key}`")))
}

impl RunConfig {
    /// Sets one field from its key; `-` and `_` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim().replace('-', "_");
        let v = value.trim();
        match k.as_str() {
            "reviews" => self.reviews = Some(v.into()),
            "metadata" => self.metadata = Some(v.into()),
            "data_dir" => self.data_dir = v.into(),
            "min_freq" => self.min_freq = parse(key, v)?,
            "test_ratio" => self.test_ratio = parse(key, v)?,
            "dim" | "alpha" => self.dim = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "negatives" | "k" => self.negatives = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "lr_start" => self.lr_start = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "grad_clip_norm" => self.grad_clip_norm = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "max_hops" => self.max_hops = parse(key, v)?,
            "top_per_type" => self.top_per_type = parse(key, v)?,
            "top_k" => self.top_k = parse(key, v)?,
            "relations" => self.relations = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "mu" => self.mu = parse(key, v)?,
            "k1" => self.k1 = parse(key, v)?,
            "b" => self.b = parse(key, v)?,
            "bm25_literal_paper_formula" => self.bm25_literal_paper_formula = parse(key, v)?,
            _ => return Err(DremError::InvalidArgument(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| DremError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: "expected `key = value`".into(),
            })?;
            self.set(k, v).map_err(|e| DremError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DremError::io(path, e))?;
        let mut c = RunConfig::default();
        c.apply_text(&text, path)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DremError::InvalidArgument(m));
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return bad(format!("test-ratio {} is outside (0, 1)", self.test_ratio));
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu {} must be positive", self.mu));
        }
        if !(self.k1 >= 0.0) || !(0.0..=1.0).contains(&self.b) {
            return bad(format!("BM25 parameters k1={} b={} are out of range", self.k1, self.b));
        }
        if !(self.beta >= 0.0) || self.top_k == 0 || self.top_per_type == 0 {
            return bad("beta must be ≥ 0 and top-k, top-per-type ≥ 1".into());
        }
        self.train_config().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            lambda: self.lambda,
            negatives: self.negatives,
            epochs: self.epochs,
            lr_start: self.lr_start,
            batch_size: self.batch_size,
            grad_clip_norm: self.grad_clip_norm,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn explain_options(&self) -> ExplainOptions {
        ExplainOptions { max_hops: self.max_hops, top_per_type: self.top_per_type, beta: self.beta }
    }

    pub fn scorer(&self, system: &str) -> Result<Scorer> {
        match system {
            "ql" => Ok(Scorer::QueryLikelihood { mu: self.mu }),
            "bm25" => Ok(Scorer::Bm25(Bm25Params {
                k1: self.k1,
                b: self.b,
                literal_paper_formula: self.bm25_literal_paper_formula,
            })),
            other => Err(DremError::InvalidArgument(format!("unknown baseline `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_always_keep_write() {
        for s in RelationSubset::ALL {
            let r = s.relations();
            assert!(r.contains(&Relation::UserWrite) && r.contains(&Relation::ItemWrite));
            assert_eq!(s.name().parse::<RelationSubset>().unwrap(), s);
        }
        assert_eq!(RelationSubset::NoMeta.relations().len(), 2);
        assert_eq!(RelationSubset::All.relations().len(), 7);
        assert_eq!("bnd".parse::<RelationSubset>().unwrap(), RelationSubset::Brand);
        assert!("xyz".parse::<RelationSubset>().is_err());
    }

    #[test]
    fn key_value_text() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# comment\nlambda = 0.3\ndim=32   # inline\nrelations = NoMeta\ndata-dir = /tmp/x\n",
            Path::new("c"),
        )
        .unwrap();
        assert_eq!(c.lambda, 0.3);
        assert_eq!(c.dim, 32);
        assert_eq!(c.relations, RelationSubset::NoMeta);
        assert_eq!(c.data_dir, PathBuf::from("/tmp/x"));
        assert!(matches!(c.apply_text("nonsense\n", Path::new("c")), Err(DremError::Parse { line: 1, .. })));
        assert!(matches!(c.apply_text("\nfoo = 1\n", Path::new("c")), Err(DremError::Parse { line: 2, .. })));
        assert!(c.apply_text("dim = many", Path::new("c")).is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!((c.dim, c.lambda, c.negatives, c.epochs), (300, 0.5, 5, 20));
        assert_eq!((c.max_hops, c.top_per_type, c.top_k), (4, 6, 100));
        assert!(RunConfig { lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(RunConfig { mu: 0.0, ..Default::default() }.validate().is_err());
        assert!(RunConfig { b: 2.0, ..Default::default() }.validate().is_err());
        assert!(c.scorer("ql").is_ok() && c.scorer("bm25").is_ok() && c.scorer("lsi").is_err());
    }
}
