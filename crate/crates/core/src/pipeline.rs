//! File-level plumbing shared by the command-line tool and the service:
//! reading corpora and exclusion lists, and building an index directory.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::EvaluationSplit;
use crate::index::{build_index, hex, save_index, sha256_hex, Bm25Params, IndexManifest, PersistError};
use crate::kb::{open_kb, HashingReader, KbError, KbFiles, KbStore};
use crate::table::{read_corpus, CorpusError, ParsedCorpus};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{}: {source}", path.display())]
    Kb { path: PathBuf, source: KbError },
    #[error("{}: {message}", path.display())]
    Exclusions { path: PathBuf, message: String },
    #[error(transparent)]
    Persist(#[from] PersistError),
}

/// A parsed corpus file and the SHA-256 of its bytes.
#[derive(Debug)]
pub struct CorpusFile {
    pub parsed: ParsedCorpus,
    pub sha256: String,
}

pub fn read_corpus_file(path: &Path) -> Result<CorpusFile, PipelineError> {
    let file = File::open(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    let mut reader = HashingReader { inner: file, hasher: Sha256::new() };
    let parsed = read_corpus(BufReader::new(&mut reader))
        .map_err(|source| PipelineError::Corpus { path: path.to_path_buf(), source })?;
    Ok(CorpusFile { parsed, sha256: hex(&reader.hasher.finalize()) })
}

pub fn open_kb_files(files: &KbFiles) -> Result<crate::kb::OpenedKb, PipelineError> {
    open_kb(files).map_err(|source| PipelineError::Kb { path: files.kb.clone(), source })
}

/// Table ids to keep out of an index. The file is either a split written by
/// the `split` command (JSON) or one id per line; `#` starts a comment line.
pub fn parse_exclusions(text: &str) -> Result<Vec<String>, String> {
    let mut ids: Vec<String> = if text.trim_start().starts_with('{') {
        serde_json::from_str::<EvaluationSplit>(text).map_err(|e| e.to_string())?.exclusion_list()
    } else {
        text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_string).collect()
    };
    ids.sort();
    ids.dedup();
    Ok(ids)
}

pub fn read_exclusions(path: &Path) -> Result<Vec<String>, PipelineError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    parse_exclusions(&text).map_err(|message| PipelineError::Exclusions { path: path.to_path_buf(), message })
}

/// Hash of the sorted, newline-terminated id list, independent of the
/// file format the ids came from.
pub fn exclusion_sha256(sorted_ids: &[String]) -> String {
    let mut bytes = Vec::new();
    for id in sorted_ids {
        bytes.extend_from_slice(id.as_bytes());
        bytes.push(b'\n');
    }
    sha256_hex(&bytes)
}

#[derive(Debug)]
pub struct BuildSummary {
    pub manifest: IndexManifest,
    pub skipped_tables: usize,
    pub skipped_kb_records: usize,
}

/// Reads the corpus and KB, links leftmost cells through the KB, indexes
/// every table not excluded and writes the index directory.
pub fn build_index_dir(
    corpus: &Path,
    kb: &KbFiles,
    exclusions: &[String],
    params: Bm25Params,
    out: &Path,
) -> Result<BuildSummary, PipelineError> {
    let opened = open_kb_files(kb)?;
    let mut corpus_file = read_corpus_file(corpus)?;
    link_corpus(&opened.loaded.store, &mut corpus_file.parsed.tables);
    let exclude: HashSet<String> = exclusions.iter().cloned().collect();
    let index = build_index(&corpus_file.parsed.tables, &opened.loaded.store, &exclude, params);
    let mut sorted = exclusions.to_vec();
    sorted.sort();
    sorted.dedup();
    let manifest = IndexManifest::new(&index, corpus_file.sha256, opened.sha256, exclusion_sha256(&sorted));
    let manifest = save_index(out, &index, &manifest)?;
    Ok(BuildSummary {
        manifest,
        skipped_tables: corpus_file.parsed.errors.len(),
        skipped_kb_records: opened.loaded.errors.len() + opened.redirect_errors.len(),
    })
}

pub fn link_corpus(kb: &KbStore, tables: &mut [crate::Table]) {
    for t in tables {
        kb.link_table(t);
    }
}
