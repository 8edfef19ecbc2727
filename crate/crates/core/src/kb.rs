//! Knowledge-base entity store.
//!
//! Dumps are newline-delimited JSON records:
//!
//! ```text
//! {"id": "Japan", "categories": [...], "types": [...],
//!  "triples": [["Japan", "capital", "Tokyo"]], "outlinks": [...], "abstract": "..."}
//! ```
//!
//! Outgoing links are taken as given in the dump. For DBpedia that means the
//! `dbo:wikiPageWikiLink` objects of the entity, i.e. its article hyperlinks.
//! Redirects come from a separate file of `from<TAB>to` lines.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lm::TermCounts;
use crate::text::tokenize;

/// Dense entity handle; ascending handles follow ascending entity ids.
pub type EntityIdx = u32;

/// One relation of an entity's structured representation: the source triple
/// with the entity's own position removed. `(p, o)` for subject triples,
/// `(s, p)` for object triples.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationPair {
    pub first: String,
    pub second: String,
}

impl RelationPair {
    pub fn new(first: impl Into<String>, second: impl Into<String>) -> Self {
        RelationPair { first: first.into(), second: second.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRecord {
    pub id: String,
    pub categories: BTreeSet<String>,
    pub types: BTreeSet<String>,
    pub relations: BTreeSet<RelationPair>,
    pub outlinks: BTreeSet<String>,
    pub abstract_terms: Vec<String>,
    /// False when the dump carried no (or an empty) abstract.
    pub has_abstract: bool,
    abstract_tf: HashMap<String, u64>,
}

impl EntityRecord {
    pub fn abstract_tf(&self, term: &str) -> u64 {
        self.abstract_tf.get(term).copied().unwrap_or(0)
    }

    pub fn abstract_len(&self) -> u64 {
        self.abstract_terms.len() as u64
    }

    pub fn properties(&self, kind: PropertyKind) -> &BTreeSet<String> {
        match kind {
            PropertyKind::Categories => &self.categories,
            PropertyKind::Types => &self.types,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Categories,
    Types,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge base stream unreadable: {0}")]
    Io(#[from] io::Error),
    #[error("duplicate entity id {0:?}")]
    DuplicateId(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbRecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Deserialize)]
struct RawEntity {
    id: String,
    #[serde(default)]
    categories: Vec<String>,
    #[serde(default)]
    types: Vec<String>,
    #[serde(default)]
    triples: Vec<[String; 3]>,
    #[serde(default)]
    outlinks: Vec<String>,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
}

/// Entity id redirects (`from -> to`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Redirects {
    map: HashMap<String, String>,
}

impl Redirects {
    pub fn insert(&mut self, from: impl Into<String>, to: impl Into<String>) {
        self.map.insert(from.into(), to.into());
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Follows the redirect chain. Cycles resolve to the id where the cycle
    /// was detected.
    pub fn resolve<'a>(&'a self, id: &'a str) -> &'a str {
        let mut current = id;
        let mut hops = 0;
        while let Some(next) = self.map.get(current) {
            if next == current || hops >= 16 {
                break;
            }
            current = next;
            hops += 1;
        }
        current
    }
}

/// Parses `from<TAB>to` lines. Blank lines are ignored; lines without a tab
/// are reported and skipped.
pub fn parse_redirects<R: BufRead>(reader: R) -> io::Result<(Redirects, Vec<KbRecordError>)> {
    let mut redirects = Redirects::default();
    let mut errors = Vec::new();
    for (i, line) in reader.split(b'\n').enumerate() {
        let line = line?;
        let text = String::from_utf8_lossy(&line);
        let text = text.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        match text.split_once('\t') {
            Some((from, to)) if !from.is_empty() && !to.is_empty() => redirects.insert(from, to),
            _ => errors.push(KbRecordError { line: i + 1, message: "expected `from<TAB>to`".into() }),
        }
    }
    Ok((redirects, errors))
}

/// KB files on disk: the entity dump plus an optional redirects table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbFiles {
    pub kb: PathBuf,
    pub redirects: Option<PathBuf>,
}

impl KbFiles {
    /// A directory resolves to `kb.jsonl` and, when present, `redirects.tsv`
    /// inside it; anything else is taken as the dump itself.
    pub fn locate(path: &Path, redirects: Option<&Path>) -> KbFiles {
        if path.is_dir() {
            let default_redirects = path.join("redirects.tsv");
            KbFiles {
                kb: path.join("kb.jsonl"),
                redirects: redirects
                    .map(Path::to_path_buf)
                    .or_else(|| default_redirects.is_file().then_some(default_redirects)),
            }
        } else {
            KbFiles { kb: path.to_path_buf(), redirects: redirects.map(Path::to_path_buf) }
        }
    }
}

#[derive(Debug)]
pub struct OpenedKb {
    pub loaded: LoadedKb,
    pub redirect_errors: Vec<KbRecordError>,
    /// SHA-256 over the dump bytes, then the redirects bytes if any.
    pub sha256: String,
}

/// Feeds everything read through it into a SHA-256.
pub(crate) struct HashingReader<R> {
    pub(crate) inner: R,
    pub(crate) hasher: Sha256,
}

impl<R: io::Read> io::Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

/// Loads the files, hashing them as they stream past.
pub fn open_kb(files: &KbFiles) -> Result<OpenedKb, KbError> {
    let (redirects, redirect_errors, redirects_digest) = match &files.redirects {
        Some(path) => {
            let mut reader = HashingReader { inner: File::open(path)?, hasher: Sha256::new() };
            let (redirects, errors) = parse_redirects(io::BufReader::new(&mut reader))?;
            (redirects, errors, Some(reader.hasher.finalize()))
        }
        None => (Redirects::default(), Vec::new(), None),
    };
    let mut reader = HashingReader { inner: File::open(&files.kb)?, hasher: Sha256::new() };
    let loaded = load_kb_with_redirects(io::BufReader::new(&mut reader), redirects)?;
    let kb_digest = reader.hasher.finalize();
    let digest = match redirects_digest {
        Some(r) => Sha256::new().chain_update(kb_digest).chain_update(r).finalize(),
        None => kb_digest,
    };
    let sha256 = crate::index::hex(&digest);
    Ok(OpenedKb { loaded, redirect_errors, sha256 })
}

/// Immutable entity store with eager property indexes and the background
/// abstract language model.
#[derive(Debug, Clone)]
pub struct KbStore {
    records: Vec<EntityRecord>,
    by_id: HashMap<String, EntityIdx>,
    redirects: Redirects,
    category_index: HashMap<String, Vec<EntityIdx>>,
    type_index: HashMap<String, Vec<EntityIdx>>,
    abstract_lm: TermCounts<String>,
    mean_abstract_len: f64,
}

#[derive(Debug)]
pub struct LoadedKb {
    pub store: KbStore,
    pub errors: Vec<KbRecordError>,
}

pub fn load_kb<R: BufRead>(reader: R) -> Result<LoadedKb, KbError> {
    load_kb_with_redirects(reader, Redirects::default())
}

/// Loads a dump. Triple endpoints are resolved through `redirects` before
/// relation pairs are formed.
pub fn load_kb_with_redirects<R: BufRead>(reader: R, redirects: Redirects) -> Result<LoadedKb, KbError> {
    let mut raws: Vec<RawEntity> = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.split(b'\n').enumerate() {
        let line = line?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let parsed = std::str::from_utf8(&line)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<RawEntity>(s).map_err(|e| e.to_string()));
        match parsed {
            Ok(raw) => {
                if !seen.insert(raw.id.clone()) {
                    return Err(KbError::DuplicateId(raw.id));
                }
                raws.push(raw);
            }
            Err(message) => errors.push(KbRecordError { line: i + 1, message }),
        }
    }
    Ok(LoadedKb { store: KbStore::from_raw(raws, redirects), errors })
}

impl KbStore {
    fn from_raw(mut raws: Vec<RawEntity>, redirects: Redirects) -> Self {
        raws.sort_by(|a, b| a.id.cmp(&b.id));
        let by_id: HashMap<String, EntityIdx> =
            raws.iter().enumerate().map(|(i, r)| (r.id.clone(), i as EntityIdx)).collect();

        let mut triples: BTreeSet<(String, String, String)> = BTreeSet::new();
        for raw in &raws {
            for [s, p, o] in &raw.triples {
                let s = redirects.resolve(s).to_string();
                let o = redirects.resolve(o).to_string();
                triples.insert((s, p.clone(), o));
            }
        }

        let mut records: Vec<EntityRecord> = raws
            .into_iter()
            .map(|raw| {
                let abstract_terms = raw.abstract_text.as_deref().map(tokenize).unwrap_or_default();
                let mut abstract_tf = HashMap::new();
                for t in &abstract_terms {
                    *abstract_tf.entry(t.clone()).or_insert(0) += 1;
                }
                EntityRecord {
                    has_abstract: !abstract_terms.is_empty(),
                    id: raw.id,
                    categories: raw.categories.into_iter().collect(),
                    types: raw.types.into_iter().collect(),
                    relations: BTreeSet::new(),
                    outlinks: raw.outlinks.iter().map(|l| redirects.resolve(l).to_string()).collect(),
                    abstract_terms,
                    abstract_tf,
                }
            })
            .collect();

        for (s, p, o) in triples {
            if s == o {
                continue;
            }
            if let Some(&i) = by_id.get(&s) {
                records[i as usize].relations.insert(RelationPair::new(p.clone(), o.clone()));
            }
            if let Some(&i) = by_id.get(&o) {
                records[i as usize].relations.insert(RelationPair::new(s, p));
            }
        }

        let mut category_index: HashMap<String, Vec<EntityIdx>> = HashMap::new();
        let mut type_index: HashMap<String, Vec<EntityIdx>> = HashMap::new();
        let mut abstract_lm = TermCounts::new();
        let mut with_abstract = 0u64;
        for (i, r) in records.iter().enumerate() {
            for c in &r.categories {
                category_index.entry(c.clone()).or_default().push(i as EntityIdx);
            }
            for t in &r.types {
                type_index.entry(t.clone()).or_default().push(i as EntityIdx);
            }
            if r.has_abstract {
                with_abstract += 1;
                for (t, &n) in &r.abstract_tf {
                    abstract_lm.add(t.clone(), n);
                }
            }
        }
        let mean_abstract_len =
            if with_abstract == 0 { 0.0 } else { abstract_lm.total() as f64 / with_abstract as f64 };

        KbStore { records, by_id, redirects, category_index, type_index, abstract_lm, mean_abstract_len }
    }

    pub fn total_entities(&self) -> usize {
        self.records.len()
    }

    /// Canonical id after redirects, if that entity exists.
    pub fn resolve(&self, id: &str) -> Option<&str> {
        let target = self.redirects.resolve(id);
        self.by_id.get(target).map(|&i| self.records[i as usize].id.as_str())
    }

    pub fn idx(&self, id: &str) -> Option<EntityIdx> {
        self.by_id.get(self.redirects.resolve(id)).copied()
    }

    pub fn get(&self, id: &str) -> Option<&EntityRecord> {
        self.idx(id).map(|i| &self.records[i as usize])
    }

    pub fn record(&self, idx: EntityIdx) -> &EntityRecord {
        &self.records[idx as usize]
    }

    pub fn require(&self, id: &str) -> Result<&EntityRecord, KbError> {
        self.get(id).ok_or_else(|| KbError::UnknownEntity(id.to_string()))
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    /// Background model over the abstracts of entities that have one.
    pub fn background_abstract_lm(&self) -> &TermCounts<String> {
        &self.abstract_lm
    }

    /// Mean abstract length over entities that have an abstract.
    pub fn mean_abstract_len(&self) -> f64 {
        self.mean_abstract_len
    }

    /// Entities carrying the given category or type.
    pub fn entities_with_property(&self, kind: PropertyKind, value: &str) -> &[EntityIdx] {
        let index = match kind {
            PropertyKind::Categories => &self.category_index,
            PropertyKind::Types => &self.type_index,
        };
        index.get(value).map_or(&[], Vec::as_slice)
    }

    /// Rewrites leftmost-column links to canonical ids and turns links to
    /// unknown entities into plain text.
    pub fn link_table(&self, table: &mut crate::table::Table) {
        for row in &mut table.rows {
            if let Some(cell) = row.first_mut() {
                cell.entity = cell.entity.as_deref().and_then(|e| self.resolve(e)).map(str::to_string);
            }
        }
    }
}

/// `|P_e ∩ (∪ P_seed)|` for the chosen property.
pub fn property_overlap_score<S: AsRef<str>>(
    kb: &KbStore,
    entity: &str,
    seeds: &[S],
    kind: PropertyKind,
) -> Result<usize, KbError> {
    let props = kb.require(entity)?.properties(kind);
    let mut union: HashSet<&str> = HashSet::new();
    for s in seeds {
        union.extend(kb.require(s.as_ref())?.properties(kind).iter().map(String::as_str));
    }
    Ok(props.iter().filter(|p| union.contains(p.as_str())).count())
}

/// Every entity with a non-zero overlap score against the seeds, ranked by
/// score then id, keeping those accepted by `keep`. Unknown seeds are
/// ignored.
pub fn rank_by_property_overlap<S: AsRef<str>>(
    kb: &KbStore,
    seeds: &[S],
    kind: PropertyKind,
    keep: impl Fn(EntityIdx) -> bool,
) -> Vec<(EntityIdx, usize)> {
    let union: BTreeSet<&str> = seeds
        .iter()
        .filter_map(|s| kb.get(s.as_ref()))
        .flat_map(|r| r.properties(kind).iter().map(String::as_str))
        .collect();
    let mut scores: HashMap<EntityIdx, usize> = HashMap::new();
    for p in union {
        for &e in kb.entities_with_property(kind, p) {
            *scores.entry(e).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(EntityIdx, usize)> = scores.into_iter().filter(|&(e, _)| keep(e)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}
