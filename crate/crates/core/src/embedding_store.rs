//! Precomputed sentence vectors in the `EMB1` binary format.
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! b"EMB1" | u32 dim | u32 count | count x (u32 key_len | key bytes | dim x f32)
//! ```
//!
//! Keys name one side of one segment: `<segment_id>#hyp` or `<segment_id>#ref`.

use std::fmt;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use indexmap::IndexMap;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"EMB1";

/// How many missing keys per side a mismatch error lists.
const MAX_LISTED_KEYS: usize = 10;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad magic bytes {0:?}, expected \"EMB1\"")]
    BadMagic([u8; 4]),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("record {index} (`{key}`): {message}")]
    BadRecord {
        index: usize,
        key: String,
        message: String,
    },
    #[error("duplicate key `{key}` at record {index}")]
    DuplicateKey { index: usize, key: String },
    #[error("vector for `{key}` has {found} components, store dimension is {expected}")]
    DimMismatch {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("cannot combine an empty list of stores")]
    NoStores,
    #[error(
        "key sets differ between `{first}` and `{other}`: missing from `{other}`: {missing_in_other:?}; missing from `{first}`: {missing_in_first:?}"
    )]
    KeyMismatch {
        first: String,
        other: String,
        missing_in_other: Vec<String>,
        missing_in_first: Vec<String>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Hypothesis,
    Reference,
}

impl Side {
    fn suffix(self) -> &'static str {
        match self {
            Side::Hypothesis => "hyp",
            Side::Reference => "ref",
        }
    }
}

/// Identifies the vector of one side of a segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EmbeddingKey {
    pub segment_id: String,
    pub side: Side,
}

impl EmbeddingKey {
    pub fn hyp(segment_id: impl Into<String>) -> Self {
        Self {
            segment_id: segment_id.into(),
            side: Side::Hypothesis,
        }
    }

    pub fn reference(segment_id: impl Into<String>) -> Self {
        Self {
            segment_id: segment_id.into(),
            side: Side::Reference,
        }
    }
}

impl fmt::Display for EmbeddingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.segment_id, self.side.suffix())
    }
}

/// Fixed-dimension map from keys to `f32` vectors, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    source_name: String,
    vectors: IndexMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, source_name: impl Into<String>) -> Self {
        Self {
            dim,
            source_name: source_name.into(),
            vectors: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Adds a vector under a raw string key.
    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimMismatch {
                key,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::BadRecord {
                index: self.vectors.len(),
                key,
                message: format!("component {i} is not finite"),
            });
        }
        if self.vectors.contains_key(&key) {
            return Err(EmbeddingError::DuplicateKey {
                index: self.vectors.len(),
                key,
            });
        }
        self.vectors.insert(key, vector);
        Ok(())
    }

    pub fn lookup(&self, key: &EmbeddingKey) -> Option<&[f32]> {
        self.lookup_raw(&key.to_string())
    }

    pub fn lookup_raw(&self, key: &str) -> Option<&[f32]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(self.dim as u32)?;
        out.write_u32::<LittleEndian>(self.vectors.len() as u32)?;
        for (key, v) in &self.vectors {
            out.write_u32::<LittleEndian>(key.len() as u32)?;
            out.write_all(key.as_bytes())?;
            for &x in v {
                out.write_f32::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        self.write_to(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    pub fn read_from<R: Read>(mut input: R, source_name: impl Into<String>) -> Result<Self> {
        let truncated = |what: &str| EmbeddingError::Truncated(what.to_owned());
        let mut magic = [0u8; 4];
        input
            .read_exact(&mut magic)
            .map_err(|_| truncated("missing magic"))?;
        if &magic != MAGIC {
            return Err(EmbeddingError::BadMagic(magic));
        }
        let dim = input
            .read_u32::<LittleEndian>()
            .map_err(|_| truncated("missing dimension"))? as usize;
        let count = input
            .read_u32::<LittleEndian>()
            .map_err(|_| truncated("missing record count"))? as usize;

        let mut store = EmbeddingStore::new(dim, source_name);
        store.vectors.reserve(count.min(1 << 20));
        let mut bytes = vec![0u8; dim * 4];
        for index in 0..count {
            let key_len = input.read_u32::<LittleEndian>().map_err(|_| {
                EmbeddingError::Truncated(format!("record {index}: missing key length"))
            })? as usize;
            let mut key_bytes = vec![0u8; key_len];
            input.read_exact(&mut key_bytes).map_err(|_| {
                EmbeddingError::Truncated(format!("record {index}: key cut short"))
            })?;
            let key = String::from_utf8(key_bytes).map_err(|_| EmbeddingError::BadRecord {
                index,
                key: String::from("<invalid utf-8>"),
                message: "key is not valid UTF-8".into(),
            })?;
            input.read_exact(&mut bytes).map_err(|_| EmbeddingError::BadRecord {
                index,
                key: key.clone(),
                message: format!("fewer than {dim} components before end of file"),
            })?;
            let vector: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            store.insert(key, vector)?;
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(|source| EmbeddingError::Io {
            path: String::from("<stream>"),
            source,
        })? != 0
        {
            return Err(EmbeddingError::BadRecord {
                index: count,
                key: String::new(),
                message: format!("trailing bytes after {count} declared records"),
            });
        }
        Ok(store)
    }
}

/// Loads an `EMB1` file. The source name is the file stem.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    EmbeddingStore::read_from(BufReader::new(file), name)
}

/// Concatenates per-key vectors of several stores, in list order.
///
/// All stores must hold exactly the same key set. The result keeps the key
/// order of the first store and has dimension equal to the sum of dimensions.
pub fn combine_sources(stores: &[EmbeddingStore]) -> Result<EmbeddingStore> {
    let (first, rest) = stores.split_first().ok_or(EmbeddingError::NoStores)?;
    for other in rest {
        let missing_in_other: Vec<String> = first
            .keys()
            .filter(|k| other.lookup_raw(k).is_none())
            .take(MAX_LISTED_KEYS)
            .map(str::to_owned)
            .collect();
        let missing_in_first: Vec<String> = other
            .keys()
            .filter(|k| first.lookup_raw(k).is_none())
            .take(MAX_LISTED_KEYS)
            .map(str::to_owned)
            .collect();
        if !missing_in_other.is_empty() || !missing_in_first.is_empty() {
            return Err(EmbeddingError::KeyMismatch {
                first: first.source_name.clone(),
                other: other.source_name.clone(),
                missing_in_other,
                missing_in_first,
            });
        }
    }
    if rest.is_empty() {
        return Ok(first.clone());
    }

    let dim = stores.iter().map(|s| s.dim).sum();
    let name = stores
        .iter()
        .map(|s| s.source_name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let mut combined = EmbeddingStore::new(dim, name);
    combined.vectors.reserve(first.len());
    for key in first.vectors.keys() {
        let mut v = Vec::with_capacity(dim);
        for s in stores {
            v.extend_from_slice(&s.vectors[key]);
        }
        combined.vectors.insert(key.clone(), v);
    }
    Ok(combined)
}
