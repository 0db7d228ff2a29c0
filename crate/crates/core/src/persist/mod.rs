//! On-disk formats: the binary model file and the dataset artifacts.

mod dataset;
mod model_file;

pub use dataset::{decode_triples, encode_triples, read_artifacts, write_artifacts, Artifacts};
pub use dataset::{CATALOG, DOCS, JUDGMENTS, QRELS, QUERIES, STATS, TRIPLES};
pub use model_file::{decode_model, encode_model, load_model, save_model, MAGIC, VERSION};
