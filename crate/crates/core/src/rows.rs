//! Row population: candidate entity selection and the three-factor entity
//! ranking model `score(e) = P(e|E) · P(L|e) · P(c|e)`.
//!
//! * `P(e|E) = λ_E · P_KB(e|E) + (1 − λ_E) · P_TC(e|E)` where the KB part is
//!   either the seed relation model or the average pairwise WLM/Jaccard link
//!   similarity, and `P_TC = #(e,E) / #(E)`.
//! * `P(L|e) = Σ_l [ λ_L · Π_{t∈l} P_LM(t|θ_e) + (1 − λ_L)/|L| · #(l,e)/#(e) ]`
//!   with a Dirichlet-smoothed heading-term model.
//! * `P(c|e) = Π_{t∈c} [ λ_c · P_KB(t|θ_e) + (1 − λ_c) · #(t,e)/#(e) ]` with a
//!   Dirichlet-smoothed abstract model.
//!
//! Disabled components contribute a factor of 1.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Engine;
use crate::index::{intersection_count, SearchField, TableIdx, TableIndex};
use crate::kb::{rank_by_property_overlap, KbError, KbStore, PropertyKind, RelationPair};
use crate::lm::dirichlet;
use crate::ranking::{RankedSuggestions, Suggestion};
use crate::table::{NormalizedLabel, SeedTable};
use crate::text::tokenize;

/// Per-factor floor used in soft mode.
pub const SOFT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{name} must be in [0, 1], got {value}")]
    Lambda { name: &'static str, value: f64 },
    #[error("mu must be positive, got {0}")]
    Mu(f64),
    #[error("candidate k must be at least 1")]
    ZeroK,
    #[error("no candidate-selection method enabled")]
    NoMethods,
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowCandidateMethod {
    /// A1: category overlap in the knowledge base.
    Categories,
    /// A2: type overlap in the knowledge base.
    Types,
    /// B: caption search over the table corpus.
    Caption,
    /// C: seed-entity search over the table corpus.
    Entities,
}

impl RowCandidateMethod {
    pub fn name(self) -> &'static str {
        match self {
            RowCandidateMethod::Categories => "categories",
            RowCandidateMethod::Types => "types",
            RowCandidateMethod::Caption => "caption",
            RowCandidateMethod::Entities => "entities",
        }
    }
}

impl FromStr for RowCandidateMethod {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "categories" | "a1" => Ok(RowCandidateMethod::Categories),
            "types" | "a2" => Ok(RowCandidateMethod::Types),
            "caption" | "b" => Ok(RowCandidateMethod::Caption),
            "entities" | "c" => Ok(RowCandidateMethod::Entities),
            other => Err(ConfigError::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RowCandidateConfig {
    /// Enabled methods and their top-k cut-off.
    pub methods: BTreeMap<RowCandidateMethod, usize>,
    /// Admit entities without an abstract into the candidate pool.
    pub include_without_abstract: bool,
}

impl Default for RowCandidateConfig {
    fn default() -> Self {
        RowCandidateConfig {
            methods: [
                (RowCandidateMethod::Categories, 256),
                (RowCandidateMethod::Caption, 256),
                (RowCandidateMethod::Entities, 256),
            ]
            .into(),
            include_without_abstract: false,
        }
    }
}

impl RowCandidateConfig {
    pub fn only(method: RowCandidateMethod, k: usize) -> Self {
        RowCandidateConfig { methods: [(method, k)].into(), ..Default::default() }
    }

    /// Default k for a method: 4096 for types, 256 otherwise.
    pub fn default_k(method: RowCandidateMethod) -> usize {
        match method {
            RowCandidateMethod::Types => 4096,
            _ => 256,
        }
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

/// Candidate entities with the methods that proposed each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowCandidates {
    pub entities: BTreeMap<String, BTreeSet<RowCandidateMethod>>,
}

impl RowCandidates {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

fn canonical_seeds(kb: &KbStore, seed: &SeedTable) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in &seed.seed_entities {
        let id = kb.resolve(e).unwrap_or(e).to_string();
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

/// Union of each enabled method's top-k entities, seeds excluded.
pub fn select_row_candidates(engine: &Engine, seed: &SeedTable, cfg: &RowCandidateConfig) -> RowCandidates {
    let kb = &engine.kb;
    let index = &engine.index;
    let seeds = canonical_seeds(kb, seed);
    let seed_set: BTreeSet<&str> =
        seeds.iter().map(String::as_str).chain(seed.seed_entities.iter().map(String::as_str)).collect();
    let admit = |id: &str| -> bool {
        if seed_set.contains(id) {
            return false;
        }
        match kb.get(id) {
            Some(r) => cfg.include_without_abstract || r.has_abstract,
            None => false,
        }
    };

    let mut out = RowCandidates::default();
    let mut add = |id: &str, m: RowCandidateMethod| {
        out.entities.entry(id.to_string()).or_default().insert(m);
    };

    for (&method, &k) in &cfg.methods {
        match method {
            RowCandidateMethod::Categories | RowCandidateMethod::Types => {
                let kind = if method == RowCandidateMethod::Categories {
                    PropertyKind::Categories
                } else {
                    PropertyKind::Types
                };
                let ranked = rank_by_property_overlap(kb, &seeds, kind, |e| admit(&kb.record(e).id));
                for (e, _) in ranked.into_iter().take(k) {
                    add(&kb.record(e).id, method);
                }
            }
            RowCandidateMethod::Caption | RowCandidateMethod::Entities => {
                let tokens = if method == RowCandidateMethod::Caption {
                    index.query_tokens(SearchField::Caption, std::slice::from_ref(&seed.caption))
                } else {
                    index.query_tokens(SearchField::Entities, &seeds)
                };
                let field =
                    if method == RowCandidateMethod::Caption { SearchField::Caption } else { SearchField::Entities };
                for (t, _) in index.search_handles(field, &tokens, k) {
                    for &e in index.table_entities(t) {
                        let id = index.entity_id(e);
                        if admit(id) {
                            add(id, method);
                        }
                    }
                }
            }
        }
    }
    out
}

/// KB estimator for `P_KB(e|E)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KbSimilarity {
    Relations,
    Wlm,
    Jaccard,
}

impl FromStr for KbSimilarity {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "relations" => Ok(KbSimilarity::Relations),
            "wlm" => Ok(KbSimilarity::Wlm),
            "jaccard" => Ok(KbSimilarity::Jaccard),
            other => Err(ConfigError::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkSimilarity {
    Wlm,
    Jaccard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowComponent {
    #[serde(rename = "esim")]
    EntitySimilarity,
    #[serde(rename = "label")]
    LabelLikelihood,
    #[serde(rename = "caption")]
    CaptionLikelihood,
}

impl RowComponent {
    pub const ALL: [RowComponent; 3] =
        [RowComponent::EntitySimilarity, RowComponent::LabelLikelihood, RowComponent::CaptionLikelihood];

    pub fn name(self) -> &'static str {
        match self {
            RowComponent::EntitySimilarity => "esim",
            RowComponent::LabelLikelihood => "label",
            RowComponent::CaptionLikelihood => "caption",
        }
    }
}

impl fmt::Display for RowComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RowComponent {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "esim" | "entity_similarity" => Ok(RowComponent::EntitySimilarity),
            "label" | "label_likelihood" => Ok(RowComponent::LabelLikelihood),
            "caption" | "caption_likelihood" => Ok(RowComponent::CaptionLikelihood),
            other => Err(ConfigError::UnknownComponent(other.to_string())),
        }
    }
}

/// How the KB similarity enters the entity-similarity mixture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KbScale {
    /// Mixed as computed.
    #[default]
    AsIs,
    /// Divided by its maximum over the candidate set before mixing.
    MaxNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RowRankingConfig {
    pub lambda_e: f64,
    pub lambda_l: f64,
    pub lambda_c: f64,
    /// Dirichlet prior for the heading-term model; mean `|e|` when unset.
    pub mu_labels: Option<f64>,
    /// Dirichlet prior for the abstract model; mean abstract length when unset.
    pub mu_caption: Option<f64>,
    pub kb_similarity: KbSimilarity,
    pub components: BTreeSet<RowComponent>,
    /// Floor every factor at [`SOFT_FLOOR`].
    pub soft: bool,
    pub kb_scale: KbScale,
}

impl Default for RowRankingConfig {
    fn default() -> Self {
        RowRankingConfig {
            lambda_e: 0.5,
            lambda_l: 0.5,
            lambda_c: 0.5,
            mu_labels: None,
            mu_caption: None,
            kb_similarity: KbSimilarity::Jaccard,
            components: RowComponent::ALL.into(),
            soft: false,
            kb_scale: KbScale::AsIs,
        }
    }
}

impl RowRankingConfig {
    pub fn with_components(components: impl IntoIterator<Item = RowComponent>) -> Self {
        RowRankingConfig { components: components.into_iter().collect(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [("lambda_e", self.lambda_e), ("lambda_l", self.lambda_l), ("lambda_c", self.lambda_c)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Lambda { name, value });
            }
        }
        for mu in [self.mu_labels, self.mu_caption].into_iter().flatten() {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(ConfigError::Mu(mu));
            }
        }
        Ok(())
    }
}

/// Jaccard coefficient of two link sets; 0 when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Link-based relatedness
/// `1 − (ln max(|A|,|B|) − ln |A∩B|) / (ln N − ln min(|A|,|B|))`, clamped to
/// `[0, 1]`, 0 when the sets do not overlap.
pub fn wlm(a: &BTreeSet<String>, b: &BTreeSet<String>, total_entities: usize) -> f64 {
    let inter = a.intersection(b).count();
    if inter == 0 {
        return 0.0;
    }
    let (max, min) = (a.len().max(b.len()) as f64, a.len().min(b.len()) as f64);
    let num = max.ln() - (inter as f64).ln();
    let den = (total_entities as f64).ln() - min.ln();
    if den <= 0.0 {
        return if num == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - num / den).clamp(0.0, 1.0)
}

pub fn pairwise_link_similarity(kb: &KbStore, e1: &str, e2: &str, method: LinkSimilarity) -> Result<f64, KbError> {
    let a = &kb.require(e1)?.outlinks;
    let b = &kb.require(e2)?.outlinks;
    Ok(match method {
        LinkSimilarity::Jaccard => jaccard(a, b),
        LinkSimilarity::Wlm => wlm(a, b, kb.total_entities()),
    })
}

/// Mean pairwise link similarity between `e` and each seed.
pub fn avg_pairwise_kb_similarity<S: AsRef<str>>(
    kb: &KbStore,
    e: &str,
    seeds: &[S],
    method: LinkSimilarity,
) -> Result<f64, KbError> {
    if seeds.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for s in seeds {
        sum += pairwise_link_similarity(kb, e, s.as_ref(), method)?;
    }
    Ok(sum / seeds.len() as f64)
}

/// Seed relation model `θ_E`: how many seeds carry each relation, and the
/// total relation count over all seeds.
#[derive(Debug, Clone, Default)]
pub struct SeedRelations<'a> {
    counts: HashMap<&'a RelationPair, u64>,
    total: u64,
}

impl<'a> SeedRelations<'a> {
    pub fn new<S: AsRef<str>>(kb: &'a KbStore, seeds: &[S]) -> Self {
        let mut model = SeedRelations::default();
        for s in seeds {
            if let Some(r) = kb.get(s.as_ref()) {
                for rel in &r.relations {
                    *model.counts.entry(rel).or_insert(0) += 1;
                    model.total += 1;
                }
            }
        }
        model
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn prob(&self, rel: &RelationPair) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(rel).copied().unwrap_or(0) as f64 / self.total as f64
    }

    /// `Σ_{r∈ê} P(r|θ_E)`; 0 (with a debug diagnostic) when the seeds have
    /// no relations.
    pub fn score(&self, kb: &KbStore, e: &str) -> f64 {
        if self.total == 0 {
            tracing::debug!(entity = e, "seed entities have no relations; P_KB = 0");
            return 0.0;
        }
        let Some(r) = kb.get(e) else { return 0.0 };
        let hits: u64 = r.relations.iter().map(|rel| self.counts.get(rel).copied().unwrap_or(0)).sum();
        hits as f64 / self.total as f64
    }
}

pub fn kb_relation_similarity<S: AsRef<str>>(kb: &KbStore, e: &str, seeds: &[S]) -> f64 {
    SeedRelations::new(kb, seeds).score(kb, e)
}

/// `#(E ∪ {e}) / #(E)`, 0 when no table holds all seeds.
pub fn tc_cooccurrence_similarity<S: AsRef<str>>(index: &TableIndex, e: &str, seeds: &[S]) -> f64 {
    let with_seeds = index.tables_with_all(seeds);
    tc_from_tables(index, e, &with_seeds)
}

fn tc_from_tables(index: &TableIndex, e: &str, with_seeds: &[TableIdx]) -> f64 {
    if with_seeds.is_empty() {
        return 0.0;
    }
    intersection_count(with_seeds, index.entity_postings(e)) as f64 / with_seeds.len() as f64
}

fn resolved_mu(explicit: Option<f64>, mean_len: f64) -> f64 {
    match explicit {
        Some(mu) => mu,
        None if mean_len > 0.0 => mean_len,
        None => 1.0,
    }
}

struct PreparedLabel {
    norm: NormalizedLabel,
    terms: Vec<String>,
}

/// Per-seed precomputation shared by every candidate.
pub struct RowScorer<'a> {
    engine: &'a Engine,
    cfg: &'a RowRankingConfig,
    seeds: Vec<String>,
    seed_relations: SeedRelations<'a>,
    seed_tables: Vec<TableIdx>,
    labels: Vec<PreparedLabel>,
    caption_terms: Vec<String>,
    mu_labels: f64,
    mu_caption: f64,
}

/// Raw component values for one candidate. `None` marks a neutral factor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RowComponents {
    pub kb: f64,
    pub tc: f64,
    pub entity_similarity: Option<f64>,
    pub label_likelihood: Option<f64>,
    pub caption_likelihood: Option<f64>,
}

impl<'a> RowScorer<'a> {
    pub fn new(engine: &'a Engine, seed: &SeedTable, cfg: &'a RowRankingConfig) -> Self {
        let seeds = canonical_seeds(&engine.kb, seed);
        let labels = seed
            .normalized_labels()
            .into_iter()
            .map(|norm| PreparedLabel { terms: tokenize(norm.as_str()), norm })
            .filter(|l| !l.terms.is_empty())
            .collect();
        RowScorer {
            seed_relations: SeedRelations::new(&engine.kb, &seeds),
            seed_tables: engine.index.tables_with_all(&seeds),
            labels,
            caption_terms: tokenize(&seed.caption),
            mu_labels: resolved_mu(cfg.mu_labels, engine.index.mean_heading_len()),
            mu_caption: resolved_mu(cfg.mu_caption, engine.kb.mean_abstract_len()),
            seeds,
            engine,
            cfg,
        }
    }

    pub fn mu_labels(&self) -> f64 {
        self.mu_labels
    }

    pub fn mu_caption(&self) -> f64 {
        self.mu_caption
    }

    pub fn kb_component(&self, e: &str) -> f64 {
        let kb = &self.engine.kb;
        if kb.get(e).is_none() {
            return 0.0;
        }
        match self.cfg.kb_similarity {
            KbSimilarity::Relations => self.seed_relations.score(kb, e),
            KbSimilarity::Wlm | KbSimilarity::Jaccard => {
                let method = if self.cfg.kb_similarity == KbSimilarity::Wlm {
                    LinkSimilarity::Wlm
                } else {
                    LinkSimilarity::Jaccard
                };
                let links = &kb.record(kb.idx(e).expect("checked")).outlinks;
                let empty = BTreeSet::new();
                let sum: f64 = self
                    .seeds
                    .iter()
                    .map(|s| {
                        let other = kb.get(s).map_or(&empty, |r| &r.outlinks);
                        match method {
                            LinkSimilarity::Jaccard => jaccard(links, other),
                            LinkSimilarity::Wlm => wlm(links, other, kb.total_entities()),
                        }
                    })
                    .sum();
                if self.seeds.is_empty() {
                    0.0
                } else {
                    sum / self.seeds.len() as f64
                }
            }
        }
    }

    pub fn tc_component(&self, e: &str) -> f64 {
        tc_from_tables(&self.engine.index, e, &self.seed_tables)
    }

    fn mix_entity_similarity(&self, kb: f64, tc: f64) -> f64 {
        self.cfg.lambda_e * kb + (1.0 - self.cfg.lambda_e) * tc
    }

    /// `P(e|E)`, or `None` when there are no seed entities.
    pub fn entity_similarity(&self, e: &str) -> Option<f64> {
        if self.seeds.is_empty() {
            return None;
        }
        Some(self.mix_entity_similarity(self.kb_component(e), self.tc_component(e)))
    }

    /// Heading-term model `P_LM(t|θ_e)`.
    pub fn label_term_prob(&self, term: &str, e: &str) -> f64 {
        let index = &self.engine.index;
        dirichlet(index.heading_tf(e, term), index.heading_len(e), self.mu_labels, index.background_label_prob(term))
    }

    /// Exact-match model `P_EM(l|e) = #(l,e)/#(e)`.
    pub fn label_exact_prob(&self, label: &NormalizedLabel, e: &str) -> f64 {
        let index = &self.engine.index;
        let n = index.entity_table_count(e);
        if n == 0 {
            return 0.0;
        }
        index.count_tables_with_entity_and_label(e, label) as f64 / n as f64
    }

    /// `P(L|e)`, or `None` when no seed label has a usable term.
    pub fn label_likelihood(&self, e: &str) -> Option<f64> {
        if self.labels.is_empty() {
            return None;
        }
        let lambda = self.cfg.lambda_l;
        let n = self.labels.len() as f64;
        let mut sum = 0.0;
        for l in &self.labels {
            let lm: f64 = l.terms.iter().map(|t| self.label_term_prob(t, e)).product();
            sum += lambda * lm + (1.0 - lambda) / n * self.label_exact_prob(&l.norm, e);
        }
        Some(sum)
    }

    /// Abstract model `P_KB(t|θ_e)`; background only when the entity has no
    /// abstract.
    pub fn caption_kb_term_prob(&self, term: &str, e: &str) -> f64 {
        let kb = &self.engine.kb;
        let (tf, len) = kb.get(e).map_or((0, 0), |r| (r.abstract_tf(term), r.abstract_len()));
        dirichlet(tf, len, self.mu_caption, kb.background_abstract_lm().prob(term))
    }

    /// Caption co-occurrence model `P_TC(t|e) = #(t,e)/#(e)`.
    pub fn caption_tc_term_prob(&self, term: &str, e: &str) -> f64 {
        let index = &self.engine.index;
        let n = index.entity_table_count(e);
        if n == 0 {
            return 0.0;
        }
        index.caption_term_count(term, e) as f64 / n as f64
    }

    /// `P(c|e)`, or `None` for a caption without terms.
    pub fn caption_likelihood(&self, e: &str) -> Option<f64> {
        if self.caption_terms.is_empty() {
            return None;
        }
        let lambda = self.cfg.lambda_c;
        Some(
            self.caption_terms
                .iter()
                .map(|t| lambda * self.caption_kb_term_prob(t, e) + (1.0 - lambda) * self.caption_tc_term_prob(t, e))
                .product(),
        )
    }

    /// Enabled components for one candidate. The KB part of entity
    /// similarity is divided by `kb_divisor` before mixing.
    pub fn components(&self, e: &str, kb_divisor: f64) -> RowComponents {
        let enabled = |c| self.cfg.components.contains(&c);
        let mut out = RowComponents::default();
        if enabled(RowComponent::EntitySimilarity) && !self.seeds.is_empty() {
            out.kb = self.kb_component(e) / kb_divisor;
            out.tc = self.tc_component(e);
            out.entity_similarity = Some(self.mix_entity_similarity(out.kb, out.tc));
        }
        if enabled(RowComponent::LabelLikelihood) {
            out.label_likelihood = self.label_likelihood(e);
        }
        if enabled(RowComponent::CaptionLikelihood) {
            out.caption_likelihood = self.caption_likelihood(e);
        }
        out
    }

    fn factor(&self, v: Option<f64>) -> f64 {
        match v {
            Some(x) if self.cfg.soft => x.max(SOFT_FLOOR),
            Some(x) => x,
            None => 1.0,
        }
    }

    pub fn total(&self, c: &RowComponents) -> f64 {
        self.factor(c.entity_similarity) * self.factor(c.label_likelihood) * self.factor(c.caption_likelihood)
    }

    fn suggestion(&self, id: &str, c: &RowComponents, provenance: &BTreeSet<RowCandidateMethod>) -> Suggestion {
        let mut components = BTreeMap::new();
        let mut neutral = Vec::new();
        for comp in &self.cfg.components {
            let v = match comp {
                RowComponent::EntitySimilarity => c.entity_similarity,
                RowComponent::LabelLikelihood => c.label_likelihood,
                RowComponent::CaptionLikelihood => c.caption_likelihood,
            };
            match v {
                Some(x) => {
                    components.insert(comp.name().to_string(), x);
                }
                None => {
                    components.insert(comp.name().to_string(), 1.0);
                    neutral.push(comp.name().to_string());
                }
            }
        }
        if c.entity_similarity.is_some() {
            components.insert("kb".into(), c.kb);
            components.insert("tc".into(), c.tc);
        }
        Suggestion {
            id: id.to_string(),
            score: self.total(c),
            components,
            neutral,
            provenance: provenance.iter().map(|m| m.name().to_string()).collect(),
        }
    }
}

pub fn entity_similarity(engine: &Engine, e: &str, seeds: &[String], cfg: &RowRankingConfig) -> f64 {
    let seed = SeedTable { seed_entities: seeds.to_vec(), ..Default::default() };
    RowScorer::new(engine, &seed, cfg).entity_similarity(e).unwrap_or(1.0)
}

pub fn label_likelihood(engine: &Engine, labels: &[String], e: &str, cfg: &RowRankingConfig) -> f64 {
    let seed = SeedTable { seed_labels: labels.to_vec(), ..Default::default() };
    RowScorer::new(engine, &seed, cfg).label_likelihood(e).unwrap_or(1.0)
}

pub fn caption_likelihood(engine: &Engine, caption: &str, e: &str, cfg: &RowRankingConfig) -> f64 {
    let seed = SeedTable { caption: caption.to_string(), ..Default::default() };
    RowScorer::new(engine, &seed, cfg).caption_likelihood(e).unwrap_or(1.0)
}

/// Scores an explicit candidate set.
pub fn rank_candidates(
    engine: &Engine,
    seed: &SeedTable,
    candidates: &RowCandidates,
    cfg: &RowRankingConfig,
) -> RankedSuggestions {
    let scorer = RowScorer::new(engine, seed, cfg);
    let ids: Vec<(&String, &BTreeSet<RowCandidateMethod>)> = candidates.entities.iter().collect();

    let kb_divisor = match cfg.kb_scale {
        KbScale::AsIs => 1.0,
        KbScale::MaxNormalized => {
            let max = ids.par_iter().map(|(id, _)| scorer.kb_component(id)).reduce(|| 0.0, f64::max);
            if max > 0.0 {
                max
            } else {
                1.0
            }
        }
    };

    let items: Vec<Suggestion> =
        ids.par_iter().map(|(id, prov)| scorer.suggestion(id, &scorer.components(id, kb_divisor), prov)).collect();
    RankedSuggestions::from_unsorted(items)
}

/// Candidate selection followed by ranking.
pub fn rank_rows(
    engine: &Engine,
    seed: &SeedTable,
    cand_cfg: &RowCandidateConfig,
    rank_cfg: &RowRankingConfig,
) -> RankedSuggestions {
    let candidates = select_row_candidates(engine, seed, cand_cfg);
    rank_candidates(engine, seed, &candidates, rank_cfg)
}
