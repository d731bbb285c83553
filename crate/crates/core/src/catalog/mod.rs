//! Collection metadata, joint embeddings, and the public train/validation split.

mod embedding;
mod split;

use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoCoordinate;

pub use embedding::{
    concat_embedding, decode_embeddings, encode_embeddings, load_embeddings, peek_dim, EmbeddingMap, EmbeddingVector, DEFAULT_HALF_DIM,
    MAGIC, VERSION,
};
pub use split::{split_public, Split, SplitSpec};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("duplicate artwork id `{0}`")]
    DuplicateId(String),
    #[error("invalid artwork id `{0}` (allowed: A-Z a-z 0-9 . _ -)")]
    InvalidId(String),
    #[error("public artwork `{0}` has no coordinate")]
    PublicWithoutCoordinate(String),
    #[error("artwork `{id}`: {reason}")]
    BadField { id: String, reason: String },
    #[error("bad magic, expected EMB1")]
    BadMagic,
    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u16),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },
    #[error("embedding vectors must be non-empty")]
    EmptyEmbedding,
    #[error("embedding file truncated")]
    Truncated,
    #[error("{0} trailing bytes after embedding table")]
    TrailingBytes(usize),
    #[error("id is not valid UTF-8")]
    InvalidUtf8,
    #[error("value too large for the file format")]
    TooLarge,
    #[error("artwork `{0}` has no embedding")]
    MissingEmbedding(String),
    #[error("need at least 2 public artworks to split, found {0}")]
    TooFewPublic(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtworkKind {
    Public,
    Indoor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtworkRecord {
    pub id: String,
    pub object_id: String,
    pub title: String,
    pub artist: String,
    pub date: String,
    pub keywords: Vec<String>,
    pub kind: ArtworkKind,
    pub prompt: String,
    pub coordinate: Option<GeoCoordinate>,
    pub image_ref: String,
}

pub const REQUIRED_COLUMNS: [&str; 11] =
    ["id", "object_id", "title", "artist", "date", "keywords", "kind", "lat", "lon", "prompt", "image_ref"];

/// Ids end up as directory names inside run folders.
pub fn validate_id(id: &str) -> Result<(), CatalogError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id != "."
        && id != ".."
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
    if ok {
        Ok(())
    } else {
        Err(CatalogError::InvalidId(id.to_owned()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    pub records: IndexMap<String, ArtworkRecord>,
    pub embeddings: EmbeddingMap,
}

impl Catalog {
    pub fn public_count(&self) -> usize {
        self.records.values().filter(|r| r.kind == ArtworkKind::Public).count()
    }

    pub fn indoor_count(&self) -> usize {
        self.records.values().filter(|r| r.kind == ArtworkKind::Indoor).count()
    }

    pub fn ids_of(&self, kind: ArtworkKind) -> Vec<String> {
        self.records.values().filter(|r| r.kind == kind).map(|r| r.id.clone()).collect()
    }

    /// Attach embeddings; every record needs exactly one vector and all share a dim.
    /// Extra vectors for unknown ids are dropped.
    pub fn with_embeddings(mut self, mut embeddings: EmbeddingMap) -> Result<Self, CatalogError> {
        let mut attached = EmbeddingMap::with_capacity(self.records.len());
        let mut dim = None;
        for id in self.records.keys() {
            let v = embeddings.swap_remove(id).ok_or_else(|| CatalogError::MissingEmbedding(id.clone()))?;
            match dim {
                None => dim = Some(v.dim()),
                Some(d) if d != v.dim() => return Err(CatalogError::DimMismatch { expected: d, found: v.dim() }),
                _ => {}
            }
            attached.insert(id.clone(), v);
        }
        self.embeddings = attached;
        Ok(self)
    }
}

pub fn load_catalog(path: &Path) -> Result<Catalog, CatalogError> {
    let file = std::fs::File::open(path)?;
    parse_catalog(file)
}

pub fn parse_catalog<R: Read>(reader: R) -> Result<Catalog, CatalogError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; REQUIRED_COLUMNS.len()];
    for (slot, name) in cols.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers.iter().position(|h| h.trim() == name).ok_or(CatalogError::MissingColumn(name))?;
    }
    let [c_id, c_obj, c_title, c_artist, c_date, c_kw, c_kind, c_lat, c_lon, c_prompt, c_img] = cols;

    let mut records = IndexMap::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let id = field(c_id).to_owned();
        validate_id(&id)?;
        let bad = |reason: String| CatalogError::BadField { id: id.clone(), reason };
        let kind = match field(c_kind).to_ascii_lowercase().as_str() {
            "public" => ArtworkKind::Public,
            "indoor" => ArtworkKind::Indoor,
            other => return Err(bad(format!("unknown kind `{other}`"))),
        };
        let coordinate = match kind {
            ArtworkKind::Public => {
                let (lat, lon) = (field(c_lat), field(c_lon));
                if lat.is_empty() || lon.is_empty() {
                    return Err(CatalogError::PublicWithoutCoordinate(id));
                }
                let lat: f64 = lat.parse().map_err(|_| bad(format!("bad lat `{lat}`")))?;
                let lon: f64 = lon.parse().map_err(|_| bad(format!("bad lon `{lon}`")))?;
                Some(GeoCoordinate::new(lat, lon).map_err(|e| bad(e.to_string()))?)
            }
            ArtworkKind::Indoor => None,
        };
        let keywords = field(c_kw).split(';').map(str::trim).filter(|k| !k.is_empty()).map(str::to_owned).collect();
        let record = ArtworkRecord {
            id: id.clone(),
            object_id: field(c_obj).to_owned(),
            title: field(c_title).to_owned(),
            artist: field(c_artist).to_owned(),
            date: field(c_date).to_owned(),
            keywords,
            kind,
            prompt: field(c_prompt).to_owned(),
            coordinate,
            image_ref: field(c_img).to_owned(),
        };
        if records.insert(id.clone(), record).is_some() {
            return Err(CatalogError::DuplicateId(id));
        }
    }
    Ok(Catalog { records, embeddings: EmbeddingMap::new() })
}

/// Write records back in the ingest CSV layout.
pub fn write_catalog<W: std::io::Write>(catalog: &Catalog, writer: W) -> Result<(), CatalogError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REQUIRED_COLUMNS)?;
    for r in catalog.records.values() {
        let (lat, lon) = r.coordinate.map(|c| (c.lat.to_string(), c.lon.to_string())).unwrap_or_default();
        let kind = match r.kind {
            ArtworkKind::Public => "public",
            ArtworkKind::Indoor => "indoor",
        };
        w.write_record([
            r.id.as_str(),
            &r.object_id,
            &r.title,
            &r.artist,
            &r.date,
            &r.keywords.join(";"),
            kind,
            &lat,
            &lon,
            &r.prompt,
            &r.image_ref,
        ])?;
    }
    w.flush()?;
    Ok(())
}
