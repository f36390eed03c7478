//! Flat tensor archives (`.tarc`) and checkpoint averaging.
//!
//! Layout:
//!
//! ```text
//! "TARC1"                      5 bytes of magic
//! L                            u64, little-endian
//! index                        L bytes of UTF-8 JSON
//! data                         little-endian f32 values
//! ```
//!
//! The index is `{"tensors": [{"name", "shape", "offset", "len"}], "meta": {}}`
//! where `offset` and `len` are byte positions inside the data section. A bare
//! list of tensor entries is accepted on read as well.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"TARC1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Format(format!("shape {shape:?} has a zero dimension")));
        }
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(Error::Format(format!(
                "shape {shape:?} needs {want} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// A tensor of `shape` with every element set to `value`.
    pub fn filled(shape: Vec<usize>, value: f32) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![value; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorArchive {
    entries: BTreeMap<String, Tensor>,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Index {
    Full {
        tensors: Vec<IndexEntry>,
        #[serde(default)]
        meta: BTreeMap<String, String>,
    },
    Bare(Vec<IndexEntry>),
}

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Format(format!("duplicate tensor name {name:?}")));
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    /// Tensors in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Applies `f` to every element, keeping shapes and meta.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, t)| {
                    let data = t.data.iter().map(|&x| f(x)).collect();
                    (k.clone(), Tensor { shape: t.shape.clone(), data })
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0u64;
        let mut tensors = Vec::with_capacity(self.entries.len());
        for (name, t) in &self.entries {
            let len = (t.data.len() * 4) as u64;
            tensors.push(IndexEntry {
                name: name.clone(),
                shape: t.shape.clone(),
                offset,
                len,
            });
            offset += len;
        }
        let index = serde_json::to_vec(&Index::Full {
            tensors,
            meta: self.meta.clone(),
        })?;
        let mut out = Vec::with_capacity(13 + index.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(index.len() as u64).to_le_bytes());
        out.extend_from_slice(&index);
        for t in self.entries.values() {
            for x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("bad magic: not a TARC1 archive".into()));
        }
        let header_end = MAGIC.len() + 8;
        if bytes.len() < header_end {
            return Err(Error::Format("truncated header".into()));
        }
        let index_len = u64::from_le_bytes(bytes[MAGIC.len()..header_end].try_into().unwrap());
        let data_start = (header_end as u64)
            .checked_add(index_len)
            .filter(|&e| e <= bytes.len() as u64)
            .ok_or_else(|| Error::Format(format!("truncated index: {index_len} bytes declared")))?
            as usize;
        let index: Index = serde_json::from_slice(&bytes[header_end..data_start])
            .map_err(|e| Error::Format(format!("unreadable index: {e}")))?;
        let (entries, meta) = match index {
            Index::Full { tensors, meta } => (tensors, meta),
            Index::Bare(tensors) => (tensors, BTreeMap::new()),
        };
        let data = &bytes[data_start..];
        let mut archive = TensorArchive {
            entries: BTreeMap::new(),
            meta,
        };
        for e in entries {
            let elements: usize = e.shape.iter().product();
            if e.shape.contains(&0) || e.len != (elements * 4) as u64 {
                return Err(Error::Format(format!(
                    "tensor {:?}: shape {:?} needs {} bytes but the index says {}",
                    e.name,
                    e.shape,
                    elements * 4,
                    e.len
                )));
            }
            let end = e.offset.checked_add(e.len).filter(|&end| end <= data.len() as u64).ok_or_else(|| {
                Error::Format(format!(
                    "tensor {:?}: data at {}..{} runs past the end of the file",
                    e.name,
                    e.offset,
                    e.offset.saturating_add(e.len)
                ))
            })?;
            let values = data[e.offset as usize..end as usize]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            archive.insert(e.name, Tensor { shape: e.shape, data: values })?;
        }
        Ok(archive)
    }

    /// SHA-256 of the serialized archive.
    pub fn checksum(&self) -> Result<String> {
        Ok(format!("sha256:{}", hex::encode(Sha256::digest(self.to_bytes()?))))
    }
}

pub fn read_archive(path: &Path) -> Result<TensorArchive> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorArchive::from_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_archive(archive: &TensorArchive, path: &Path) -> Result<()> {
    std::fs::write(path, archive.to_bytes()?).map_err(|e| Error::io(path, e))
}

/// Weighted elementwise mean of compatible archives.
///
/// Weights default to uniform and are normalized. Accumulation is in f64 over
/// the constituents sorted by content checksum, so the result does not depend
/// on the order of `archives`.
pub fn average(archives: &[TensorArchive], weights: Option<&[f64]>) -> Result<TensorArchive> {
    let first = archives
        .first()
        .ok_or_else(|| Error::Invalid("nothing to average".into()))?;
    let weights: Vec<f64> = match weights {
        None => vec![1.0; archives.len()],
        Some(w) => {
            if w.len() != archives.len() {
                return Err(Error::Invalid(format!("{} weights for {} archives", w.len(), archives.len())));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Invalid(format!("weights must be non-negative with a positive sum, got {w:?}")));
            }
            w.to_vec()
        }
    };
    for a in &archives[1..] {
        check_compatible(first, a)?;
    }
    let mut order: Vec<(String, f64, &TensorArchive)> = archives
        .iter()
        .zip(&weights)
        .map(|(a, &w)| Ok((a.checksum()?, w, a)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total: f64 = order.iter().map(|o| o.1).sum();

    let mut out = TensorArchive::new();
    for (name, t) in &first.entries {
        let mut acc = vec![0.0f64; t.data.len()];
        for (_, w, a) in &order {
            for (s, &x) in acc.iter_mut().zip(&a.entries[name].data) {
                *s += w * x as f64;
            }
        }
        let data = acc.into_iter().map(|s| (s / total) as f32).collect();
        out.insert(name.clone(), Tensor { shape: t.shape.clone(), data })?;
    }
    let checksums: Vec<&str> = order.iter().map(|o| o.0.as_str()).collect();
    let normalized: Vec<f64> = order.iter().map(|o| o.1 / total).collect();
    out.meta.insert("average.constituents".into(), serde_json::to_string(&checksums)?);
    out.meta.insert("average.weights".into(), serde_json::to_string(&normalized)?);
    Ok(out)
}

fn check_compatible(a: &TensorArchive, b: &TensorArchive) -> Result<()> {
    for (name, t) in &a.entries {
        match b.entries.get(name) {
            None => {
                return Err(Error::Compatibility {
                    tensor: name.clone(),
                    message: "missing from one archive".into(),
                })
            }
            Some(u) if u.shape != t.shape => {
                return Err(Error::Compatibility {
                    tensor: name.clone(),
                    message: format!("shape {:?} versus {:?}", t.shape, u.shape),
                })
            }
            Some(_) => {}
        }
    }
    if let Some(extra) = b.entries.keys().find(|k| !a.entries.contains_key(*k)) {
        return Err(Error::Compatibility {
            tensor: extra.clone(),
            message: "missing from one archive".into(),
        });
    }
    Ok(())
}
