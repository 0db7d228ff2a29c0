//! Dataset artifacts written by `ingest` and read by every later command.
//!
//! | file            | content                                               |
//! |-----------------|-------------------------------------------------------|
//! | `catalog.tsv`   | `type  name  id  [frequency]` (frequency for words)   |
//! | `triples.bin`   | training triples, see [`encode_triples`]              |
//! | `queries.tsv`   | `id  word ids  item ids  path level…`                 |
//! | `judgments.tsv` | `user  query  item` dense ids of held-out purchases   |
//! | `qrels.txt`     | the same judgments keyed by surface names             |
//! | `docs.tsv`      | `item  tokens` training documents for text baselines |
//! | `stats.txt`     | dataset summary                                       |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::{
    DatasetStats, DynamicTriple, EntityCatalog, IdMap, Judgments, Query, QuerySet, StaticTriple, TripleStore,
    Vocabulary,
};
use crate::error::{DremError, Result};
use crate::evaluation::{write_qrels, Qrels};
use crate::retrieval::query_key;
use crate::schema::{EntityType, Relation};

pub const CATALOG: &str = "catalog.tsv";
pub const TRIPLES: &str = "triples.bin";
pub const QUERIES: &str = "queries.tsv";
pub const JUDGMENTS: &str = "judgments.tsv";
pub const QRELS: &str = "qrels.txt";
pub const DOCS: &str = "docs.tsv";
pub const STATS: &str = "stats.txt";

const TRIPLES_MAGIC: &[u8; 4] = b"DRTR";
const TRIPLES_VERSION: u32 = 1;

/// Everything the later pipeline stages read back.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub catalog: EntityCatalog,
    pub queries: QuerySet,
    pub train: TripleStore,
    /// Held-out purchases grouped by `(user, query)`.
    pub judgments: Judgments,
    /// Training text of each item.
    pub docs: Vec<Vec<String>>,
}

impl Artifacts {
    /// Judgments keyed by `user_query` surface keys and item names.
    pub fn qrels(&self) -> Qrels {
        self.judgments
            .iter()
            .map(|(&(u, q), items)| {
                let user = self.catalog.users.name(u).unwrap_or_default();
                let names = items.iter().filter_map(|&i| self.catalog.items.name(i)).map(str::to_string).collect();
                (query_key(user, q), names)
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

fn ids(list: &[u32]) -> String {
    list.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| DremError::io(&path, e))
}

fn read_text(dir: &Path, name: &str) -> Result<(std::path::PathBuf, String)> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| DremError::io(&path, e))?;
    Ok((path, text))
}

pub fn encode_triples(store: &TripleStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(TRIPLES_MAGIC);
    out.extend_from_slice(&TRIPLES_VERSION.to_le_bytes());
    out.extend_from_slice(&(store.skipped as u64).to_le_bytes());
    out.extend_from_slice(&(store.statics().len() as u64).to_le_bytes());
    for t in store.statics() {
        out.push(t.relation.code());
        for v in [t.head, t.tail, t.count] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(store.dynamics().len() as u64).to_le_bytes());
    for t in store.dynamics() {
        for v in [t.user, t.query, t.item] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_triples(bytes: &[u8]) -> Result<TripleStore> {
    let bad = |m: &str| DremError::Format(format!("triple file: {m}"));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != TRIPLES_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != TRIPLES_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let read_u64 = |s: &[u8]| u64::from_le_bytes(s.try_into().unwrap());
    let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    let skipped = read_u64(take(8)?) as usize;
    let n_static = read_u64(take(8)?) as usize;
    let mut statics = Vec::with_capacity(n_static.min(1 << 24));
    for _ in 0..n_static {
        let rec = take(13)?;
        let relation =
            Relation::from_code(rec[0]).filter(|r| !r.is_dynamic()).ok_or_else(|| bad("bad relation code"))?;
        statics.push(StaticTriple {
            relation,
            head: read_u32(&rec[1..5]),
            tail: read_u32(&rec[5..9]),
            count: read_u32(&rec[9..13]),
        });
    }
    let n_dyn = read_u64(take(8)?) as usize;
    let mut dynamics = Vec::with_capacity(n_dyn.min(1 << 24));
    for _ in 0..n_dyn {
        let rec = take(12)?;
        dynamics.push(DynamicTriple {
            user: read_u32(&rec[0..4]),
            query: read_u32(&rec[4..8]),
            item: read_u32(&rec[8..12]),
        });
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    let mut store = TripleStore::new(statics, dynamics);
    store.skipped = skipped;
    Ok(store)
}

fn catalog_tsv(catalog: &EntityCatalog) -> String {
    let mut s = String::new();
    for t in EntityType::ALL {
        for id in 0..catalog.count(t) as u32 {
            let name = escape(catalog.name(t, id).unwrap_or_default());
            if t == EntityType::Word {
                let _ = writeln!(s, "{t}\t{name}\t{id}\t{}", catalog.words.frequency(id));
            } else {
                let _ = writeln!(s, "{t}\t{name}\t{id}");
            }
        }
    }
    s
}

fn parse_catalog(path: &Path, text: &str) -> Result<EntityCatalog> {
    let mut names: BTreeMap<EntityType, Vec<String>> = BTreeMap::new();
    let mut freq = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |message: String| DremError::Parse { path: path.to_path_buf(), line: n + 1, message };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 3 {
            return Err(err(format!("expected at least 3 fields, found {}", f.len())));
        }
        let t: EntityType = f[0].parse().map_err(|e: DremError| err(e.to_string()))?;
        let id: usize = f[2].parse().map_err(|_| err(format!("bad id {:?}", f[2])))?;
        let list = names.entry(t).or_default();
        if id != list.len() {
            return Err(err(format!("{t} ids are not dense: expected {}, found {id}", list.len())));
        }
        list.push(unescape(f[1]));
        if t == EntityType::Word {
            let c = f.get(3).ok_or_else(|| err("word line without frequency".into()))?;
            freq.push(c.parse().map_err(|_| err(format!("bad frequency {c:?}")))?);
        }
    }
    let mut take = |t| IdMap::from_sorted(names.remove(&t).unwrap_or_default());
    Ok(EntityCatalog {
        users: take(EntityType::User),
        items: take(EntityType::Item),
        words: Vocabulary::from_counts(take(EntityType::Word), freq),
        brands: take(EntityType::Brand),
        categories: take(EntityType::Category),
    })
}

fn queries_tsv(queries: &QuerySet) -> String {
    let mut s = String::new();
    for (id, q) in queries.iter() {
        let path: Vec<String> = q.source_path.iter().map(|p| escape(p)).collect();
        let _ = writeln!(s, "{id}\t{}\t{}\t{}", ids(&q.words), ids(&q.items), path.join("\t"));
    }
    s
}

fn parse_ids(field: &str) -> std::result::Result<Vec<u32>, String> {
    field.split_whitespace().map(|x| x.parse().map_err(|_| format!("bad id {x:?}"))).collect()
}

fn parse_queries(path: &Path, text: &str, num_items: usize) -> Result<QuerySet> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |message: String| DremError::Parse { path: path.to_path_buf(), line: n + 1, message };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 3 || f[0] != out.len().to_string() {
            return Err(err("expected `id  words  items  path…` with dense ids".into()));
        }
        let items = parse_ids(f[2]).map_err(err)?;
        if items.iter().any(|&i| i as usize >= num_items) {
            return Err(err("item id out of range".into()));
        }
        out.push(Query {
            words: parse_ids(f[1]).map_err(err)?,
            items,
            source_path: f[3..].iter().map(|p| unescape(p)).collect(),
        });
    }
    Ok(QuerySet::new(out, num_items))
}

fn judgments_tsv(j: &Judgments) -> String {
    let mut s = String::new();
    for (&(u, q), items) in j {
        for i in items {
            let _ = writeln!(s, "{u}\t{q}\t{i}");
        }
    }
    s
}

fn parse_judgments(path: &Path, text: &str) -> Result<Judgments> {
    let mut j = Judgments::new();
    for (n, line) in text.lines().enumerate() {
        let f = parse_ids(&line.replace('\t', " ")).ok().filter(|f| f.len() == 3).ok_or_else(|| DremError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: "expected `user query item`".into(),
        })?;
        j.entry((f[0], f[1])).or_default().insert(f[2]);
    }
    Ok(j)
}

fn docs_tsv(docs: &[Vec<String>]) -> String {
    let mut s = String::new();
    for (i, d) in docs.iter().enumerate() {
        let _ = writeln!(s, "{i}\t{}", d.join(" "));
    }
    s
}

fn parse_docs(path: &Path, text: &str) -> Result<Vec<Vec<String>>> {
    let mut docs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let (id, toks) = line.split_once('\t').unwrap_or((line, ""));
        if id != docs.len().to_string() {
            return Err(DremError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: "document ids are not dense".into(),
            });
        }
        docs.push(toks.split_whitespace().map(str::to_string).collect());
    }
    Ok(docs)
}

/// Writes every artifact into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, art: &Artifacts, stats: Option<&DatasetStats>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| DremError::io(dir, e))?;
    write_file(dir, CATALOG, catalog_tsv(&art.catalog).as_bytes())?;
    write_file(dir, TRIPLES, &encode_triples(&art.train))?;
    write_file(dir, QUERIES, queries_tsv(&art.queries).as_bytes())?;
    write_file(dir, JUDGMENTS, judgments_tsv(&art.judgments).as_bytes())?;
    let mut qrels = Vec::new();
    write_qrels(&mut qrels, &art.qrels()).map_err(|e| DremError::io(dir.join(QRELS), e))?;
    write_file(dir, QRELS, &qrels)?;
    write_file(dir, DOCS, docs_tsv(&art.docs).as_bytes())?;
    if let Some(stats) = stats {
        write_file(dir, STATS, stats.to_string().as_bytes())?;
    }
    Ok(())
}

pub fn read_artifacts(dir: &Path) -> Result<Artifacts> {
    let (path, text) = read_text(dir, CATALOG)?;
    let catalog = parse_catalog(&path, &text)?;
    let (path, text) = read_text(dir, QUERIES)?;
    let queries = parse_queries(&path, &text, catalog.items.len())?;
    let path = dir.join(TRIPLES);
    let train = decode_triples(&fs::read(&path).map_err(|e| DremError::io(&path, e))?)?;
    let (path, text) = read_text(dir, JUDGMENTS)?;
    let judgments = parse_judgments(&path, &text)?;
    let (path, text) = read_text(dir, DOCS)?;
    let docs = parse_docs(&path, &text)?;
    Ok(Artifacts { catalog, queries, train, judgments, docs })
}
