//! Column population: candidate heading labels ranked through related
//! tables,
//!
//! ```text
//! score(l) = Σ_T P(l|T) · P(T|E) · P(T|c) · P(T|L)
//! ```
//!
//! where `T` ranges over the candidate tables, `P(T|E)` is seed-entity
//! coverage, `P(T|c)` a scaled caption BM25 score and `P(T|L)` seed-label
//! overlap. Also hosts the label-benefit baseline built on pairwise label
//! co-occurrence.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::index::{intersection_count, SearchField, TableIdx, TableIndex};
use crate::ranking::{RankedSuggestions, Suggestion};
use crate::rows::ConfigError;
use crate::table::{normalize_label, NormalizedLabel, SeedTable};

/// Evidence used both to retrieve candidate tables and to weigh them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableSignal {
    /// A: caption similarity.
    Caption,
    /// B: heading-label overlap.
    Labels,
    /// C: entity overlap.
    Entities,
}

impl TableSignal {
    pub const ALL: [TableSignal; 3] = [TableSignal::Caption, TableSignal::Labels, TableSignal::Entities];

    pub fn name(self) -> &'static str {
        match self {
            TableSignal::Caption => "caption",
            TableSignal::Labels => "labels",
            TableSignal::Entities => "entities",
        }
    }

    fn field(self) -> SearchField {
        match self {
            TableSignal::Caption => SearchField::Caption,
            TableSignal::Labels => SearchField::Labels,
            TableSignal::Entities => SearchField::Entities,
        }
    }
}

impl fmt::Display for TableSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableSignal {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "caption" | "a" => Ok(TableSignal::Caption),
            "labels" | "b" => Ok(TableSignal::Labels),
            "entities" | "c" => Ok(TableSignal::Entities),
            other => Err(ConfigError::UnknownComponent(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColCandidateConfig {
    pub methods: BTreeMap<TableSignal, usize>,
}

impl Default for ColCandidateConfig {
    fn default() -> Self {
        ColCandidateConfig {
            methods: [(TableSignal::Caption, 256), (TableSignal::Labels, 256), (TableSignal::Entities, 64)].into(),
        }
    }
}

impl ColCandidateConfig {
    pub fn only(signal: TableSignal, k: usize) -> Self {
        ColCandidateConfig { methods: [(signal, k)].into() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.methods.is_empty() {
            return Err(ConfigError::NoMethods);
        }
        if self.methods.values().any(|&k| k == 0) {
            return Err(ConfigError::ZeroK);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionScale {
    /// BM25 score divided by the largest score among the candidate tables.
    #[default]
    MaxNormalized,
    /// Raw BM25 score.
    Raw,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelWeight {
    /// `P(l|T) = 1` for every label of `T`.
    #[default]
    Indicator,
    /// `P(l|T) = 1 / |T_L|`.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColRankingConfig {
    /// Relevance factors multiplied into each table's weight.
    pub components: BTreeSet<TableSignal>,
    pub caption_scale: CaptionScale,
    pub label_weight: LabelWeight,
}

impl Default for ColRankingConfig {
    fn default() -> Self {
        ColRankingConfig {
            components: TableSignal::ALL.into(),
            caption_scale: CaptionScale::default(),
            label_weight: LabelWeight::default(),
        }
    }
}

impl ColRankingConfig {
    pub fn with_components(components: impl IntoIterator<Item = TableSignal>) -> Self {
        ColRankingConfig { components: components.into_iter().collect(), ..Default::default() }
    }
}

/// Relevance factors of one candidate table. A `None` factor is neutral
/// because the corresponding seed field is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateTable {
    pub table_id: String,
    #[serde(skip)]
    pub idx: TableIdx,
    /// `P(T|E)`
    pub entity_coverage: Option<f64>,
    /// `P(T|c)`
    pub caption_similarity: Option<f64>,
    /// `P(T|L)`
    pub label_overlap: Option<f64>,
    pub provenance: BTreeSet<TableSignal>,
}

impl CandidateTable {
    pub fn factor(&self, signal: TableSignal) -> Option<f64> {
        match signal {
            TableSignal::Caption => self.caption_similarity,
            TableSignal::Labels => self.label_overlap,
            TableSignal::Entities => self.entity_coverage,
        }
    }

    /// Product of the enabled factors, neutral ones counting as 1.
    pub fn relevance(&self, components: &BTreeSet<TableSignal>) -> f64 {
        components.iter().map(|&s| self.factor(s).unwrap_or(1.0)).product()
    }
}

/// Seed fields resolved against the index.
struct SeedView {
    entities: Vec<u32>,
    entity_count: usize,
    labels: Vec<u32>,
    label_count: usize,
    seed_labels: BTreeSet<NormalizedLabel>,
    caption_tokens: BTreeSet<u32>,
    caption_empty: bool,
}

impl SeedView {
    fn new(index: &TableIndex, seed: &SeedTable) -> Self {
        let distinct: BTreeSet<&str> = seed.seed_entities.iter().map(String::as_str).collect();
        let mut entities: Vec<u32> = distinct.iter().filter_map(|e| index.entity_handle(e)).collect();
        entities.sort_unstable();
        let seed_labels: BTreeSet<NormalizedLabel> = seed.normalized_labels().into_iter().collect();
        let mut labels: Vec<u32> = seed_labels.iter().filter_map(|l| index.label_handle(l)).collect();
        labels.sort_unstable();
        SeedView {
            entity_count: distinct.len(),
            entities,
            label_count: seed_labels.len(),
            labels,
            seed_labels,
            caption_tokens: index.query_tokens(SearchField::Caption, std::slice::from_ref(&seed.caption)),
            caption_empty: crate::text::tokenize(&seed.caption).is_empty(),
        }
    }

    fn query(&self, index: &TableIndex, signal: TableSignal, seed: &SeedTable) -> BTreeSet<u32> {
        match signal {
            TableSignal::Caption => self.caption_tokens.clone(),
            TableSignal::Labels => index.query_tokens(SearchField::Labels, &seed.seed_labels),
            TableSignal::Entities => self.entities.iter().copied().collect(),
        }
    }

    fn coverage(&self, index: &TableIndex, t: TableIdx) -> Option<f64> {
        (self.entity_count > 0)
            .then(|| intersection_count(index.table_entities(t), &self.entities) as f64 / self.entity_count as f64)
    }

    fn overlap(&self, index: &TableIndex, t: TableIdx) -> Option<f64> {
        (self.label_count > 0)
            .then(|| intersection_count(index.table_labels(t), &self.labels) as f64 / self.label_count as f64)
    }
}

/// Candidate labels plus the candidate tables they came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ColumnCandidates {
    pub labels: BTreeSet<String>,
    /// Ascending table id.
    pub tables: Vec<CandidateTable>,
}

/// Retrieves top-k tables per enabled signal, takes their labels minus the
/// seed labels, and scores each retrieved table's relevance factors.
pub fn select_column_candidates(index: &TableIndex, seed: &SeedTable, cfg: &ColCandidateConfig) -> ColumnCandidates {
    select_column_candidates_with(index, seed, cfg, CaptionScale::MaxNormalized)
}

/// Same as [`select_column_candidates`] with an explicit caption scaling.
pub fn select_column_candidates_with(
    index: &TableIndex,
    seed: &SeedTable,
    cfg: &ColCandidateConfig,
    scale: CaptionScale,
) -> ColumnCandidates {
    let view = SeedView::new(index, seed);
    let mut retrieved: BTreeMap<TableIdx, BTreeSet<TableSignal>> = BTreeMap::new();
    for (&signal, &k) in &cfg.methods {
        let q = view.query(index, signal, seed);
        for (t, _) in index.search_handles(signal.field(), &q, k) {
            retrieved.entry(t).or_default().insert(signal);
        }
    }

    let raw_caption: Vec<f64> = retrieved.keys().map(|&t| index.caption_score(&view.caption_tokens, t)).collect();
    let divisor = match scale {
        CaptionScale::Raw => 1.0,
        CaptionScale::MaxNormalized => raw_caption.iter().copied().fold(0.0, f64::max),
    };

    let mut labels = BTreeSet::new();
    let mut tables = Vec::with_capacity(retrieved.len());
    for ((t, provenance), raw) in retrieved.into_iter().zip(raw_caption) {
        for &l in index.table_labels(t) {
            let label = index.label(l);
            if !view.seed_labels.iter().any(|s| s.as_str() == label) {
                labels.insert(label.to_string());
            }
        }
        let caption_similarity = if view.caption_empty {
            None
        } else if divisor > 0.0 {
            Some(raw / divisor)
        } else {
            Some(0.0)
        };
        tables.push(CandidateTable {
            table_id: index.table_id(t).to_string(),
            idx: t,
            entity_coverage: view.coverage(index, t),
            caption_similarity,
            label_overlap: view.overlap(index, t),
            provenance,
        });
    }
    ColumnCandidates { labels, tables }
}

/// `P(T|E) · P(T|c) · P(T|L)` for a single table, with the caption score
/// divided by `caption_divisor`. `None` when the table is not indexed.
pub fn table_relevance(
    index: &TableIndex,
    table_id: &str,
    seed: &SeedTable,
    caption_divisor: f64,
) -> Option<CandidateTable> {
    let t = index.table_idx(table_id)?;
    let view = SeedView::new(index, seed);
    let raw = index.caption_score(&view.caption_tokens, t);
    Some(CandidateTable {
        table_id: table_id.to_string(),
        idx: t,
        entity_coverage: view.coverage(index, t),
        caption_similarity: (!view.caption_empty)
            .then(|| if caption_divisor > 0.0 { raw / caption_divisor } else { 0.0 }),
        label_overlap: view.overlap(index, t),
        provenance: BTreeSet::new(),
    })
}

/// Bridge-model scores for a given candidate set.
pub fn rank_column_candidates(
    index: &TableIndex,
    candidates: &ColumnCandidates,
    cfg: &ColRankingConfig,
) -> RankedSuggestions {
    let mut scores: BTreeMap<&str, f64> = candidates.labels.iter().map(|l| (l.as_str(), 0.0)).collect();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    for table in &candidates.tables {
        let relevance = table.relevance(&cfg.components);
        let labels = index.table_labels(table.idx);
        let weight = match cfg.label_weight {
            LabelWeight::Indicator => 1.0,
            LabelWeight::Normalized if labels.is_empty() => 0.0,
            LabelWeight::Normalized => 1.0 / labels.len() as f64,
        };
        for &l in labels {
            let label = index.label(l);
            if let Some(s) = scores.get_mut(label) {
                *s += weight * relevance;
                *support.entry(label).or_insert(0) += 1;
            }
        }
    }

    let neutral: Vec<String> = cfg
        .components
        .iter()
        .filter(|&&s| candidates.tables.first().is_some_and(|t| t.factor(s).is_none()))
        .map(|s| s.name().to_string())
        .collect();
    let items = scores
        .into_iter()
        .map(|(label, score)| Suggestion {
            id: label.to_string(),
            score,
            components: [
                ("bridge".to_string(), score),
                ("tables".to_string(), support.get(label).copied().unwrap_or(0) as f64),
            ]
            .into(),
            neutral: neutral.clone(),
            provenance: Vec::new(),
        })
        .collect();
    RankedSuggestions::from_unsorted(items)
}

pub fn rank_columns(
    index: &TableIndex,
    seed: &SeedTable,
    cand_cfg: &ColCandidateConfig,
    cfg: &ColRankingConfig,
) -> RankedSuggestions {
    let candidates = select_column_candidates_with(index, seed, cand_cfg, cfg.caption_scale);
    rank_column_candidates(index, &candidates, cfg)
}

/// `cs(l1, l2) = #(l1, l2) / #(l1)`, 0 when `l1` never occurs.
pub fn acs_consistency(index: &TableIndex, l1: &NormalizedLabel, l2: &NormalizedLabel) -> f64 {
    let n = index.label_table_count(l1);
    if n == 0 {
        return 0.0;
    }
    index.label_pair_count(l1, l2) as f64 / n as f64
}

/// Mean of `cs(l_i, l)` over the seed labels; 0 for an empty seed list.
pub fn baseline_label_benefit(index: &TableIndex, seed_labels: &[NormalizedLabel], l: &NormalizedLabel) -> f64 {
    if seed_labels.is_empty() {
        return 0.0;
    }
    let sum: f64 = seed_labels.iter().map(|s| acs_consistency(index, s, l)).sum();
    sum / seed_labels.len() as f64
}

/// Label-benefit baseline over the same candidate labels as the bridge model.
pub fn rank_columns_baseline(index: &TableIndex, seed: &SeedTable, cand_cfg: &ColCandidateConfig) -> RankedSuggestions {
    let candidates = select_column_candidates(index, seed, cand_cfg);
    rank_baseline_candidates(index, seed, &candidates)
}

pub fn rank_baseline_candidates(
    index: &TableIndex,
    seed: &SeedTable,
    candidates: &ColumnCandidates,
) -> RankedSuggestions {
    let seed_labels = seed.normalized_labels();
    let items = candidates
        .labels
        .iter()
        .map(|l| {
            let norm = normalize_label(l);
            let score = baseline_label_benefit(index, &seed_labels, &norm);
            Suggestion {
                id: l.clone(),
                score,
                components: [("benefit".to_string(), score)].into(),
                neutral: Vec::new(),
                provenance: Vec::new(),
            }
        })
        .collect();
    RankedSuggestions::from_unsorted(items)
}

/// Deduplicates a ranked list of raw labels by normalized form, keeping the
/// highest-ranked occurrence.
pub fn dedup_normalized<'a>(ranked: impl IntoIterator<Item = &'a str>) -> Vec<NormalizedLabel> {
    let mut seen = HashSet::new();
    ranked.into_iter().map(normalize_label).filter(|l| !l.is_empty() && seen.insert(l.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_keeps_first_normalized_form() {
        let out = dedup_normalized(["Date", "Team", "date:", "Dates", ""]);
        let names: Vec<_> = out.iter().map(NormalizedLabel::as_str).collect();
        assert_eq!(names, ["date", "team"]);
    }

    #[test]
    fn signal_parsing() {
        assert_eq!("labels".parse::<TableSignal>(), Ok(TableSignal::Labels));
        assert!("x".parse::<TableSignal>().is_err());
    }
}
