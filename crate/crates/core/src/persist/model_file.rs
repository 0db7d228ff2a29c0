//! Binary model file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "DREM"  u32 version  u32 dim
//! u32 n_types   { u8 name_len, name, u64 count }*
//! u32 n_rels    { u8 name_len, name, u8 head_type, u8 tail_type }*
//! per listed type: count × dim f32
//! 7 × dim f32    static relation vectors in fixed relation order
//! dim × dim f32  projector W, row-major
//! dim f32        projector b
//! ```
//!
//! Values are stored as `f32`, so a model round-trips bit-exactly once it has
//! been passed through [`ModelParams::round_to_f32`].

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DremError, Result};
use crate::model::{Embeddings, ModelParams};
use crate::schema::{EntityType, ModelSchema, Relation};

pub const MAGIC: &[u8; 4] = b"DREM";
pub const VERSION: u32 = 1;

fn put_name(out: &mut Vec<u8>, name: &str) {
    out.push(name.len() as u8);
    out.extend_from_slice(name.as_bytes());
}

fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode_model(model: &ModelParams) -> Vec<u8> {
    let schema = model.schema();
    let dim = model.dim();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    let types: Vec<EntityType> = schema.entity_types().collect();
    out.extend_from_slice(&(types.len() as u32).to_le_bytes());
    for &t in &types {
        put_name(&mut out, t.name());
        out.extend_from_slice(&(schema.count(t) as u64).to_le_bytes());
    }
    out.extend_from_slice(&(schema.relations().len() as u32).to_le_bytes());
    for &r in schema.relations() {
        put_name(&mut out, r.name());
        out.push(r.head_type().index() as u8);
        out.push(r.tail_type().index() as u8);
    }
    for &t in &types {
        put_f32s(&mut out, model.table(t).as_slice());
    }
    put_f32s(&mut out, model.relation_table().as_slice());
    let (w, b) = model.projector();
    put_f32s(&mut out, w);
    put_f32s(&mut out, b);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| DremError::Format("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<&'a str> {
        let n = self.u8()? as usize;
        std::str::from_utf8(self.take(n)?).map_err(|_| DremError::Format("name is not UTF-8".into()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| DremError::Format("block too large".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(DremError::Format("not a model file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(DremError::Format(format!("unsupported version {version}, this build reads version {VERSION}")));
    }
    let dim = c.u32()? as usize;
    if dim == 0 {
        return Err(DremError::Format("dimension is zero".into()));
    }
    let mut counts = Vec::new();
    for _ in 0..c.u32()? {
        let t: EntityType = c.name()?.parse().map_err(|_| DremError::Format("unknown entity type".into()))?;
        counts.push((t, c.u64()? as usize));
    }
    let mut relations = Vec::new();
    for _ in 0..c.u32()? {
        let r: Relation = c.name()?.parse().map_err(|_| DremError::Format("unknown relation".into()))?;
        let (head, tail) = (c.u8()? as usize, c.u8()? as usize);
        if head != r.head_type().index() || tail != r.tail_type().index() {
            return Err(DremError::Format(format!("relation {r} has the wrong signature")));
        }
        relations.push(r);
    }
    let schema = ModelSchema::new(&counts, &relations).map_err(|e| DremError::Format(e.to_string()))?;
    let mut tables: Vec<Embeddings> = EntityType::ALL.iter().map(|_| Embeddings::zeros(0, dim)).collect();
    for &(t, n) in &counts {
        tables[t.index()] = Embeddings::from_vec(dim, c.f32s(n * dim)?)?;
    }
    let rel = Embeddings::from_vec(dim, c.f32s(Relation::STATIC.len() * dim)?)?;
    let w = c.f32s(dim * dim)?;
    let b = c.f32s(dim)?;
    if c.pos != bytes.len() {
        return Err(DremError::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    ModelParams::from_parts(schema, dim, tables, rel, w, b)
}

pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| DremError::io(path, e))?;
    f.write_all(&encode_model(model)).map_err(|e| DremError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| DremError::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelParams {
        let mut m = ModelParams::init(&ModelSchema::full(3, 4, 5, 2, 3), 6, 9).unwrap();
        m.relation_mut(Relation::IsBrand).fill(0.123_456_789);
        m.projector_mut().1[2] = -1.0e-3;
        m.round_to_f32();
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn partial_schema_round_trips() {
        let schema = ModelSchema::new(
            &[(EntityType::User, 2), (EntityType::Item, 3), (EntityType::Word, 4)],
            &[Relation::UserWrite, Relation::ItemWrite],
        )
        .unwrap();
        let mut m = ModelParams::init(&schema, 3, 1).unwrap();
        m.round_to_f32();
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_bad_files() {
        let bytes = encode_model(&model());
        let mut v2 = bytes.clone();
        v2[4] = 2;
        let err = decode_model(&v2).unwrap_err().to_string();
        assert!(err.contains("unsupported version 2"), "{err}");
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(&extra).is_err());
        assert!(decode_model(b"NOPE").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.drem");
        let m = model();
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
        assert!(matches!(load_model(&dir.path().join("missing")), Err(DremError::Io { .. })));
    }
}
