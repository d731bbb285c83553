//! Joint artwork embeddings and the `EMB1` binary table format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "EMB1" | u16 version (=1) | u32 count | u32 dim
//! count × (u16 len | len bytes UTF-8 id)
//! count × dim × f32, row-major in id-table order
//! ```

use indexmap::IndexMap;

use super::CatalogError;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u16 = 1;
/// Half-dimension of the joint vector for ViT-L-14 encoders.
pub const DEFAULT_HALF_DIM: usize = 768;

/// A finite, fixed-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, CatalogError> {
        if values.is_empty() {
            return Err(CatalogError::EmptyEmbedding);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CatalogError::NonFiniteValue { index: pos });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }
}

/// Joint representation: image half followed by text half, no renormalization.
pub fn concat_embedding(image: &EmbeddingVector, text: &EmbeddingVector) -> Result<EmbeddingVector, CatalogError> {
    if image.dim() != text.dim() {
        return Err(CatalogError::DimMismatch { expected: image.dim(), found: text.dim() });
    }
    let mut values = Vec::with_capacity(image.dim() * 2);
    values.extend_from_slice(image.values());
    values.extend_from_slice(text.values());
    Ok(EmbeddingVector(values))
}

pub type EmbeddingMap = IndexMap<String, EmbeddingVector>;

/// Decode an `EMB1` table. Order of the id table is preserved.
pub fn decode_embeddings(bytes: &[u8], expected_dim: usize) -> Result<EmbeddingMap, CatalogError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CatalogError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(CatalogError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if dim != expected_dim {
        return Err(CatalogError::DimMismatch { expected: expected_dim, found: dim });
    }
    if count > 0 && dim == 0 {
        return Err(CatalogError::EmptyEmbedding);
    }
    // Every id costs at least two bytes; reject absurd counts before allocating.
    if count > r.remaining() / 2 {
        return Err(CatalogError::Truncated);
    }
    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let raw = r.take(len)?;
        let id = std::str::from_utf8(raw).map_err(|_| CatalogError::InvalidUtf8)?;
        ids.push(id.to_owned());
    }
    let floats = count.checked_mul(dim).and_then(|n| n.checked_mul(4)).ok_or(CatalogError::Truncated)?;
    if r.remaining() < floats {
        return Err(CatalogError::Truncated);
    }
    let mut map = IndexMap::with_capacity(count);
    for id in ids {
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            let v = f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(CatalogError::NonFiniteValue { index: values.len() });
            }
            values.push(v);
        }
        if map.contains_key(&id) {
            return Err(CatalogError::DuplicateId(id));
        }
        map.insert(id, EmbeddingVector(values));
    }
    if r.remaining() != 0 {
        return Err(CatalogError::TrailingBytes(r.remaining()));
    }
    Ok(map)
}

/// Vector width declared in an `EMB1` header, without decoding the body.
pub fn peek_dim(bytes: &[u8]) -> Result<usize, CatalogError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CatalogError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(CatalogError::UnsupportedVersion(version));
    }
    r.u32()?;
    Ok(r.u32()? as usize)
}

/// Encode a table. All vectors must share `dim`.
pub fn encode_embeddings(map: &EmbeddingMap, dim: usize) -> Result<Vec<u8>, CatalogError> {
    let count = u32::try_from(map.len()).map_err(|_| CatalogError::TooLarge)?;
    let dim32 = u32::try_from(dim).map_err(|_| CatalogError::TooLarge)?;
    let mut out = Vec::with_capacity(14 + map.len() * (dim * 4 + 16));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim32.to_le_bytes());
    for id in map.keys() {
        let len = u16::try_from(id.len()).map_err(|_| CatalogError::TooLarge)?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for v in map.values() {
        if v.dim() != dim {
            return Err(CatalogError::DimMismatch { expected: dim, found: v.dim() });
        }
        for x in v.values() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn load_embeddings(path: &std::path::Path, expected_dim: usize) -> Result<EmbeddingMap, CatalogError> {
    let bytes = std::fs::read(path)?;
    decode_embeddings(&bytes, expected_dim)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CatalogError> {
        if self.remaining() < n {
            return Err(CatalogError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CatalogError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CatalogError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
