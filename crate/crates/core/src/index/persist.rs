//! On-disk index layout: `manifest.json` plus `index.bin` in one directory.
//! `index.bin` starts with an 8-byte magic and a little-endian format
//! version, followed by the bincode payload.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use bincode::Options as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Bm25Params, TableIndex};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TBASSIDX";
const INDEX_FILE: &str = "index.bin";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("index io: {0}")]
    Io(#[from] io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("index payload: {0}")]
    Payload(#[from] bincode::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("index format version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("index.bin checksum does not match manifest")]
    Checksum,
    #[error("inconsistent index: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub corpus_sha256: String,
    pub kb_sha256: String,
    pub exclusion_sha256: String,
    pub bm25: Bm25Params,
    pub n_tables: usize,
    /// Filled in by [`save_index`].
    #[serde(default)]
    pub index_sha256: String,
}

impl IndexManifest {
    pub fn new(index: &TableIndex, corpus_sha256: String, kb_sha256: String, exclusion_sha256: String) -> Self {
        IndexManifest {
            format_version: FORMAT_VERSION,
            corpus_sha256,
            kb_sha256,
            exclusion_sha256,
            bm25: index.params(),
            n_tables: index.n_tables(),
            index_sha256: String::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_index(index: &TableIndex) -> Result<Vec<u8>, PersistError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bincode::serialize_into(&mut out, index)?;
    Ok(out)
}

/// Decodes an `index.bin` image. Rejects foreign files and other versions.
pub fn decode_index(bytes: &[u8]) -> Result<TableIndex, PersistError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(PersistError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(PersistError::Version { found: version, expected: FORMAT_VERSION });
    }
    let options = bincode::DefaultOptions::new()
        .with_fixint_encoding()
        .allow_trailing_bytes()
        .with_limit(bytes.len() as u64 * 8 + 1024);
    let index: TableIndex = options.deserialize(&bytes[12..])?;
    index.check_consistency().map_err(PersistError::Inconsistent)?;
    Ok(index)
}

pub fn save_index(dir: &Path, index: &TableIndex, manifest: &IndexManifest) -> Result<IndexManifest, PersistError> {
    fs::create_dir_all(dir)?;
    let bytes = encode_index(index)?;
    let mut manifest = manifest.clone();
    manifest.index_sha256 = sha256_hex(&bytes);
    fs::write(dir.join(INDEX_FILE), &bytes)?;
    let mut f = fs::File::create(dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<IndexManifest, PersistError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_index(dir: &Path) -> Result<(TableIndex, IndexManifest), PersistError> {
    let manifest = load_manifest(dir)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(PersistError::Version { found: manifest.format_version, expected: FORMAT_VERSION });
    }
    let bytes = fs::read(dir.join(INDEX_FILE))?;
    if !manifest.index_sha256.is_empty() && sha256_hex(&bytes) != manifest.index_sha256 {
        return Err(PersistError::Checksum);
    }
    Ok((decode_index(&bytes)?, manifest))
}
