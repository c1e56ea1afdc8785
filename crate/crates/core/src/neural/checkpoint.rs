//! Binary checkpoint: the magic bytes `WDERCKPT`, a little-endian `u64` header
//! length, a JSON header, then every array as little-endian `f64` values in
//! header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::{HeadKind, PolicyNet, ValueNet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"WDERCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Header entry describing one stored array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    /// `policy`, `value`, or free-form (optimizer moments, counters).
    pub role: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layer_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadKind>,
    #[serde(default)]
    pub seed: u64,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub seed: u64,
    pub arrays: Vec<ArrayInfo>,
    /// Caller-defined manifest (agent layout, training counters).
    #[serde(default)]
    pub manifest: serde_json::Value,
}

/// In-memory checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub manifest: serde_json::Value,
    entries: Vec<(ArrayInfo, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(seed: u64, manifest: serde_json::Value) -> Self {
        Self { seed, manifest, entries: Vec::new() }
    }

    pub fn push_policy(&mut self, name: &str, net: &PolicyNet) {
        let info = ArrayInfo {
            name: name.into(),
            role: "policy".into(),
            layer_sizes: net.layer_sizes().to_vec(),
            head: Some(net.head()),
            seed: net.seed(),
            len: net.param_count(),
        };
        self.entries.push((info, net.params().to_vec()));
    }

    pub fn push_value(&mut self, name: &str, net: &ValueNet) {
        let info = ArrayInfo {
            name: name.into(),
            role: "value".into(),
            layer_sizes: net.layer_sizes().to_vec(),
            head: None,
            seed: net.seed(),
            len: net.params().len(),
        };
        self.entries.push((info, net.params().to_vec()));
    }

    pub fn push_array(&mut self, name: &str, role: &str, data: Vec<f64>) {
        let info = ArrayInfo {
            name: name.into(),
            role: role.into(),
            layer_sizes: Vec::new(),
            head: None,
            seed: 0,
            len: data.len(),
        };
        self.entries.push((info, data));
    }

    fn find(&self, name: &str) -> Result<&(ArrayInfo, Vec<f64>)> {
        self.entries
            .iter()
            .find(|(info, _)| info.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no array named {name:?}")))
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.find(name)?.1)
    }

    pub fn has(&self, name: &str) -> bool {
        self.entries.iter().any(|(info, _)| info.name == name)
    }

    pub fn policy(&self, name: &str) -> Result<PolicyNet> {
        let (info, data) = self.find(name)?;
        let head = info.head.ok_or_else(|| Error::Format(format!("{name:?} has no head")))?;
        PolicyNet::from_parts(info.layer_sizes.clone(), head, data.clone(), info.seed)
    }

    pub fn value(&self, name: &str) -> Result<ValueNet> {
        let (info, data) = self.find(name)?;
        ValueNet::from_parts(info.layer_sizes.clone(), data.clone(), info.seed)
    }

    pub fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            format_version: FORMAT_VERSION,
            seed: self.seed,
            arrays: self.entries.iter().map(|(i, _)| i.clone()).collect(),
            manifest: self.manifest.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let payload: usize = self.entries.iter().map(|(_, d)| d.len() * 8).sum();
        let mut out = Vec::with_capacity(16 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, data) in &self.entries {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("missing checkpoint magic".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body_start = 16usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..body_start])?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {}", header.format_version)));
        }
        let mut cursor = body_start;
        let mut entries = Vec::with_capacity(header.arrays.len());
        for info in header.arrays {
            let end = cursor + info.len * 8;
            if end > bytes.len() {
                return Err(Error::Format(format!("truncated array {:?}", info.name)));
            }
            let data = bytes[cursor..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            cursor = end;
            entries.push((info, data));
        }
        if cursor != bytes.len() {
            return Err(Error::Format("trailing bytes after last array".into()));
        }
        Ok(Self { seed: header.seed, manifest: header.manifest, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
