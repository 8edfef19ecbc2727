//! Inverted indexes and co-occurrence statistics over the table corpus.
//!
//! Tables are numbered in ascending id order, so every "lowest document
//! number wins" tie rule is also an ascending-id rule. Leftmost-column links
//! are resolved against the knowledge base at build time; links that do not
//! resolve are treated as plain text.

mod bm25;
mod persist;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use bm25::{Bm25Field, Bm25Params};
pub use persist::{
    decode_index, encode_index, hex, load_index, load_manifest, save_index, sha256_hex, IndexManifest, PersistError,
    FORMAT_VERSION,
};

use crate::kb::KbStore;
use crate::lm::TermCounts;
use crate::table::{normalize_label, NormalizedLabel, Table};
use crate::text::tokenize;

pub type TableIdx = u32;

/// String interner; ids are dense and assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Interner {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
}

impl From<Vec<String>> for Interner {
    fn from(strings: Vec<String>) -> Self {
        let ids = strings.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Interner { strings, ids }
    }
}

impl From<Interner> for Vec<String> {
    fn from(i: Interner) -> Self {
        i.strings
    }
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<u32> {
        self.ids.get(s).copied()
    }

    pub fn resolve(&self, id: u32) -> &str {
        &self.strings[id as usize]
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchField {
    Caption,
    Entities,
    Labels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub table_id: String,
    pub score: f64,
}

/// Heading-term profile of one entity: term frequencies over the heading
/// labels of every table listing the entity, sorted by term id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct TermProfile {
    tf: Vec<(u32, u64)>,
    len: u64,
}

impl TermProfile {
    fn get(&self, term: u32) -> u64 {
        self.tf.binary_search_by_key(&term, |&(t, _)| t).map_or(0, |i| self.tf[i].1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableIndex {
    params: Bm25Params,
    table_ids: Vec<String>,
    entities: Interner,
    labels: Interner,
    terms: Interner,
    /// Distinct leftmost entities per table, sorted.
    table_entities: Vec<Vec<u32>>,
    /// Distinct normalized labels per table, sorted.
    table_labels: Vec<Vec<u32>>,
    entity_postings: Vec<Vec<TableIdx>>,
    label_postings: Vec<Vec<TableIdx>>,
    heading_profiles: Vec<TermProfile>,
    /// Per entity: (caption term, number of tables with both), sorted.
    caption_cooccurrence: Vec<Vec<(u32, u32)>>,
    background_label_lm: TermCounts<u32>,
    caption_field: Bm25Field,
    entity_field: Bm25Field,
    label_field: Bm25Field,
}

/// Builds the index. Tables whose id is in `exclude` contribute nothing;
/// every other table contributes, entity-focused or not.
pub fn build_index<'a>(
    corpus: impl IntoIterator<Item = &'a Table>,
    kb: &KbStore,
    exclude: &HashSet<String>,
    params: Bm25Params,
) -> TableIndex {
    let mut tables: Vec<&Table> = corpus.into_iter().filter(|t| !exclude.contains(&t.id)).collect();
    tables.sort_by(|a, b| a.id.cmp(&b.id));
    tables.dedup_by(|a, b| a.id == b.id);

    let mut entities = Interner::default();
    let mut labels = Interner::default();
    let mut terms = Interner::default();
    let mut table_entities = Vec::with_capacity(tables.len());
    let mut table_labels = Vec::with_capacity(tables.len());
    let mut caption_docs = Vec::with_capacity(tables.len());
    let mut heading_terms = Vec::with_capacity(tables.len());
    let mut background_label_lm = TermCounts::new();

    for t in &tables {
        let mut ents: Vec<u32> =
            t.leftmost_entities().filter_map(|e| kb.resolve(e)).map(|e| entities.intern(e)).collect();
        ents.sort_unstable();
        ents.dedup();
        table_entities.push(ents);

        let mut labs = Vec::new();
        let mut hterms = Vec::new();
        for h in &t.headings {
            let norm = normalize_label(h);
            if norm.is_empty() {
                continue;
            }
            labs.push(labels.intern(norm.as_str()));
            for tok in tokenize(norm.as_str()) {
                let id = terms.intern(&tok);
                background_label_lm.add(id, 1);
                hterms.push(id);
            }
        }
        labs.sort_unstable();
        labs.dedup();
        table_labels.push(labs);
        heading_terms.push(hterms);

        caption_docs.push(tokenize(&t.caption).iter().map(|tok| terms.intern(tok)).collect::<Vec<_>>());
    }

    let mut entity_postings = vec![Vec::new(); entities.len()];
    let mut label_postings = vec![Vec::new(); labels.len()];
    let mut profiles: Vec<HashMap<u32, u64>> = vec![HashMap::new(); entities.len()];
    let mut cooc: Vec<HashMap<u32, u32>> = vec![HashMap::new(); entities.len()];
    for (d, ents) in table_entities.iter().enumerate() {
        let caption_terms: BTreeSet<u32> = caption_docs[d].iter().copied().collect();
        for &e in ents {
            entity_postings[e as usize].push(d as TableIdx);
            let profile = &mut profiles[e as usize];
            for &t in &heading_terms[d] {
                *profile.entry(t).or_insert(0) += 1;
            }
            let c = &mut cooc[e as usize];
            for &t in &caption_terms {
                *c.entry(t).or_insert(0) += 1;
            }
        }
        for &l in &table_labels[d] {
            label_postings[l as usize].push(d as TableIdx);
        }
    }
    let heading_profiles = profiles
        .into_iter()
        .map(|m| {
            let mut tf: Vec<(u32, u64)> = m.into_iter().collect();
            tf.sort_unstable();
            let len = tf.iter().map(|&(_, n)| n).sum();
            TermProfile { tf, len }
        })
        .collect();
    let caption_cooccurrence = cooc
        .into_iter()
        .map(|m| {
            let mut v: Vec<(u32, u32)> = m.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect();

    let caption_field = Bm25Field::build(terms.len(), &caption_docs);
    let entity_field = Bm25Field::build(entities.len(), &table_entities);
    let label_field = Bm25Field::build(labels.len(), &table_labels);

    TableIndex {
        params,
        table_ids: tables.iter().map(|t| t.id.clone()).collect(),
        entities,
        labels,
        terms,
        table_entities,
        table_labels,
        entity_postings,
        label_postings,
        heading_profiles,
        caption_cooccurrence,
        background_label_lm,
        caption_field,
        entity_field,
        label_field,
    }
}

/// Size of the intersection of two ascending lists.
pub(crate) fn intersection_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub(crate) fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

impl TableIndex {
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Structural checks run on every decoded index.
    pub fn check_consistency(&self) -> Result<(), String> {
        fn ascending_below(xs: &[u32], bound: usize) -> bool {
            xs.windows(2).all(|w| w[0] < w[1]) && xs.iter().all(|&x| (x as usize) < bound)
        }
        let p = &self.params;
        if !(p.k1.is_finite() && p.k1 >= 0.0 && (0.0..=1.0).contains(&p.b)) {
            return Err("bad BM25 parameters".into());
        }
        let n = self.table_ids.len();
        let (ne, nl, nt) = (self.entities.len(), self.labels.len(), self.terms.len());
        if self.table_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err("table ids not strictly ascending".into());
        }
        for interner in [&self.entities, &self.labels, &self.terms] {
            if interner.ids.len() != interner.strings.len() {
                return Err("duplicate interned string".into());
            }
        }
        if self.table_entities.len() != n || self.table_labels.len() != n {
            return Err("per-table lists do not match the table count".into());
        }
        if !self.table_entities.iter().all(|v| ascending_below(v, ne))
            || !self.table_labels.iter().all(|v| ascending_below(v, nl))
        {
            return Err("per-table handle out of range".into());
        }
        if self.entity_postings.len() != ne
            || self.label_postings.len() != nl
            || self.heading_profiles.len() != ne
            || self.caption_cooccurrence.len() != ne
        {
            return Err("per-entity or per-label lists have the wrong size".into());
        }
        if !self.entity_postings.iter().chain(&self.label_postings).all(|v| ascending_below(v, n)) {
            return Err("posting out of range".into());
        }
        for profile in &self.heading_profiles {
            let terms: Vec<u32> = profile.tf.iter().map(|&(t, _)| t).collect();
            let sum = profile.tf.iter().try_fold(0u64, |acc, &(_, c)| acc.checked_add(c));
            if !ascending_below(&terms, nt) || sum != Some(profile.len) {
                return Err("bad heading profile".into());
            }
        }
        for cooc in &self.caption_cooccurrence {
            let terms: Vec<u32> = cooc.iter().map(|&(t, _)| t).collect();
            if !ascending_below(&terms, nt) {
                return Err("bad caption co-occurrence list".into());
            }
        }
        if self.background_label_lm.iter().any(|(&t, _)| t as usize >= nt) {
            return Err("background term out of range".into());
        }
        self.caption_field.check(nt, n)?;
        self.entity_field.check(ne, n)?;
        self.label_field.check(nl, n)?;
        Ok(())
    }

    pub fn n_tables(&self) -> usize {
        self.table_ids.len()
    }

    pub fn table_id(&self, t: TableIdx) -> &str {
        &self.table_ids[t as usize]
    }

    pub fn table_idx(&self, id: &str) -> Option<TableIdx> {
        self.table_ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok().map(|i| i as TableIdx)
    }

    pub fn entity_id(&self, e: u32) -> &str {
        self.entities.resolve(e)
    }

    pub fn entity_handle(&self, id: &str) -> Option<u32> {
        self.entities.get(id)
    }

    pub fn label(&self, l: u32) -> &str {
        self.labels.resolve(l)
    }

    pub fn label_handle(&self, l: &NormalizedLabel) -> Option<u32> {
        self.labels.get(l.as_str())
    }

    pub fn term_handle(&self, t: &str) -> Option<u32> {
        self.terms.get(t)
    }

    /// Distinct leftmost entities of a table (handles, sorted).
    pub fn table_entities(&self, t: TableIdx) -> &[u32] {
        &self.table_entities[t as usize]
    }

    /// Distinct normalized labels of a table (handles, sorted).
    pub fn table_labels(&self, t: TableIdx) -> &[u32] {
        &self.table_labels[t as usize]
    }

    /// Tables listing the entity in their leftmost column.
    pub fn entity_postings(&self, id: &str) -> &[TableIdx] {
        self.entities.get(id).map_or(&[], |e| self.entity_postings[e as usize].as_slice())
    }

    pub fn label_postings(&self, l: &NormalizedLabel) -> &[TableIdx] {
        self.label_handle(l).map_or(&[], |h| self.label_postings[h as usize].as_slice())
    }

    pub fn tables_with_entity(&self, id: &str) -> impl Iterator<Item = &str> + '_ {
        self.entity_postings(id).iter().map(|&t| self.table_id(t))
    }

    /// `#(e)`
    pub fn entity_table_count(&self, id: &str) -> usize {
        self.entity_postings(id).len()
    }

    /// `#(l)`
    pub fn label_table_count(&self, l: &NormalizedLabel) -> usize {
        self.label_postings(l).len()
    }

    /// Tables containing every given entity, ascending. All tables for an
    /// empty set.
    pub fn tables_with_all<S: AsRef<str>>(&self, ids: &[S]) -> Vec<TableIdx> {
        if ids.is_empty() {
            return (0..self.n_tables() as TableIdx).collect();
        }
        let mut lists: Vec<&[TableIdx]> = ids.iter().map(|e| self.entity_postings(e.as_ref())).collect();
        lists.sort_by_key(|l| l.len());
        let mut acc = lists[0].to_vec();
        for l in &lists[1..] {
            if acc.is_empty() {
                break;
            }
            acc = intersect(&acc, l);
        }
        acc
    }

    /// `#(E)`: tables containing all the entities; `n_tables` for an empty set.
    pub fn count_tables_with_all<S: AsRef<str>>(&self, ids: &[S]) -> usize {
        if ids.is_empty() {
            return self.n_tables();
        }
        self.tables_with_all(ids).len()
    }

    /// `#(l,e)`
    pub fn count_tables_with_entity_and_label(&self, entity: &str, label: &NormalizedLabel) -> usize {
        intersection_count(self.entity_postings(entity), self.label_postings(label))
    }

    /// `#(l1,l2)`, symmetric.
    pub fn label_pair_count(&self, l1: &NormalizedLabel, l2: &NormalizedLabel) -> usize {
        intersection_count(self.label_postings(l1), self.label_postings(l2))
    }

    /// `tf(t,e)` over heading labels of the entity's tables.
    pub fn heading_tf(&self, entity: &str, term: &str) -> u64 {
        match (self.entities.get(entity), self.terms.get(term)) {
            (Some(e), Some(t)) => self.heading_profiles[e as usize].get(t),
            _ => 0,
        }
    }

    /// `|e|` for the heading-label representation.
    pub fn heading_len(&self, entity: &str) -> u64 {
        self.entities.get(entity).map_or(0, |e| self.heading_profiles[e as usize].len)
    }

    /// Mean `|e|` over entities present in the corpus.
    pub fn mean_heading_len(&self) -> f64 {
        if self.heading_profiles.is_empty() {
            return 0.0;
        }
        let total: u64 = self.heading_profiles.iter().map(|p| p.len).sum();
        total as f64 / self.heading_profiles.len() as f64
    }

    /// `#(t,e)`: tables with `term` in the caption and `entity` in the
    /// leftmost column.
    pub fn caption_term_count(&self, term: &str, entity: &str) -> usize {
        match (self.entities.get(entity), self.terms.get(term)) {
            (Some(e), Some(t)) => {
                let v = &self.caption_cooccurrence[e as usize];
                v.binary_search_by_key(&t, |&(x, _)| x).map_or(0, |i| v[i].1 as usize)
            }
            _ => 0,
        }
    }

    /// Background heading-term model `P(t|θ)`.
    pub fn background_label_prob(&self, term: &str) -> f64 {
        self.terms.get(term).map_or(0.0, |t| self.background_label_lm.prob(&t))
    }

    pub fn background_label_lm(&self) -> &TermCounts<u32> {
        &self.background_label_lm
    }

    pub fn field(&self, field: SearchField) -> &Bm25Field {
        match field {
            SearchField::Caption => &self.caption_field,
            SearchField::Entities => &self.entity_field,
            SearchField::Labels => &self.label_field,
        }
    }

    /// Maps a query to token handles for the field: caption text is
    /// tokenized, entity ids are taken as-is, labels are normalized.
    /// Tokens unknown to the index are dropped.
    pub fn query_tokens<S: AsRef<str>>(&self, field: SearchField, query: &[S]) -> BTreeSet<u32> {
        match field {
            SearchField::Caption => {
                query.iter().flat_map(|q| tokenize(q.as_ref())).filter_map(|t| self.terms.get(&t)).collect()
            }
            SearchField::Entities => query.iter().filter_map(|q| self.entities.get(q.as_ref())).collect(),
            SearchField::Labels => {
                query.iter().filter_map(|q| self.labels.get(normalize_label(q.as_ref()).as_str())).collect()
            }
        }
    }

    pub(crate) fn search_handles(&self, field: SearchField, query: &BTreeSet<u32>, k: usize) -> Vec<(TableIdx, f64)> {
        self.field(field).top_k(&self.params, query, k)
    }

    /// BM25 top-`k` tables for the query on one field.
    pub fn search<S: AsRef<str>>(&self, field: SearchField, query: &[S], k: usize) -> Vec<SearchHit> {
        let tokens = self.query_tokens(field, query);
        self.search_handles(field, &tokens, k)
            .into_iter()
            .map(|(t, score)| SearchHit { table_id: self.table_id(t).to_string(), score })
            .collect()
    }

    /// BM25 score of a single table's caption for the query tokens.
    pub fn caption_score(&self, query: &BTreeSet<u32>, t: TableIdx) -> f64 {
        self.caption_field.score_doc(&self.params, query, t)
    }
}
