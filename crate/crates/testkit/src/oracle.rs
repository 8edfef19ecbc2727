//! Reference scorers that recompute every estimator by scanning the raw KB
//! records and the indexed tables. Nothing here touches the inverted index
//! or the KB store; only label normalization and tokenization are shared,
//! since they define what a label and a term are.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;
use tabassist_core::rows::{KbSimilarity, RowComponent, RowRankingConfig};
use tabassist_core::text::tokenize;
use tabassist_core::{normalize_label, SeedTable, Table};

const K1: f64 = 1.2;
const B: f64 = 0.75;

#[derive(Debug, Clone, Default)]
pub struct OracleEntity {
    pub categories: BTreeSet<String>,
    pub types: BTreeSet<String>,
    pub outlinks: BTreeSet<String>,
    pub abstract_tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OracleTable {
    pub id: String,
    pub caption_tokens: Vec<String>,
    pub entities: BTreeSet<String>,
    pub labels: BTreeSet<String>,
    pub heading_terms: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Oracle {
    pub entities: BTreeMap<String, OracleEntity>,
    pub triples: BTreeSet<(String, String, String)>,
    pub tables: Vec<OracleTable>,
    mean_heading_len: f64,
    mean_abstract_len: f64,
}

fn strings(v: &Value, key: &str) -> Vec<String> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

fn count<T: PartialEq>(xs: &[T], x: &T) -> usize {
    xs.iter().filter(|y| *y == x).count()
}

impl Oracle {
    /// `kb_jsonl` is the raw dump, `tables` the indexed tables.
    pub fn new(kb_jsonl: &str, tables: &[Table]) -> Self {
        let mut entities = BTreeMap::new();
        let mut triples = BTreeSet::new();
        for line in kb_jsonl.lines().filter(|l| !l.trim().is_empty()) {
            let v: Value = serde_json::from_str(line).expect("fixture KB line is JSON");
            let id = v["id"].as_str().expect("id").to_string();
            if let Some(ts) = v.get("triples").and_then(Value::as_array) {
                for t in ts {
                    let t: Vec<String> =
                        t.as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
                    triples.insert((t[0].clone(), t[1].clone(), t[2].clone()));
                }
            }
            let abstract_tokens = v.get("abstract").and_then(Value::as_str).map(tokenize).unwrap_or_default();
            entities.insert(
                id,
                OracleEntity {
                    categories: strings(&v, "categories").into_iter().collect(),
                    types: strings(&v, "types").into_iter().collect(),
                    outlinks: strings(&v, "outlinks").into_iter().collect(),
                    abstract_tokens,
                },
            );
        }

        let mut tables: Vec<OracleTable> = tables
            .iter()
            .map(|t| {
                let labels: Vec<String> = t
                    .headings
                    .iter()
                    .map(|h| normalize_label(h).as_str().to_string())
                    .filter(|l| !l.is_empty())
                    .collect();
                OracleTable {
                    id: t.id.clone(),
                    caption_tokens: tokenize(&t.caption),
                    entities: t
                        .rows
                        .iter()
                        .filter_map(|r| r.first().and_then(|c| c.entity.clone()))
                        .filter(|e| entities.contains_key(e))
                        .collect(),
                    heading_terms: labels.iter().flat_map(|l| tokenize(l)).collect(),
                    labels: labels.into_iter().collect(),
                }
            })
            .collect();
        tables.sort_by(|a, b| a.id.cmp(&b.id));
        let mut oracle = Oracle { entities, triples, tables, mean_heading_len: 0.0, mean_abstract_len: 0.0 };
        oracle.mean_heading_len = oracle.scan_mean_heading_len();
        oracle.mean_abstract_len = oracle.scan_mean_abstract_len();
        oracle
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    fn tables_with(&self, e: &str) -> impl Iterator<Item = &OracleTable> {
        let e = e.to_string();
        self.tables.iter().filter(move |t| t.entities.contains(&e))
    }

    // ----- KB side -----

    /// Triples touching `e` with `e`'s own position removed.
    pub fn relations(&self, e: &str) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (s, p, o) in &self.triples {
            if s == o {
                continue;
            }
            if s == e {
                out.insert((p.clone(), o.clone()));
            }
            if o == e {
                out.insert((s.clone(), p.clone()));
            }
        }
        out
    }

    pub fn relation_similarity(&self, e: &str, seeds: &[String]) -> f64 {
        if !self.entities.contains_key(e) {
            return 0.0;
        }
        let seed_rels: Vec<BTreeSet<(String, String)>> =
            seeds.iter().filter(|s| self.entities.contains_key(*s)).map(|s| self.relations(s)).collect();
        let total: usize = seed_rels.iter().map(BTreeSet::len).sum();
        if total == 0 {
            return 0.0;
        }
        let mut hits = 0usize;
        for r in self.relations(e) {
            hits += seed_rels.iter().filter(|rs| rs.contains(&r)).count();
        }
        hits as f64 / total as f64
    }

    fn outlinks(&self, e: &str) -> BTreeSet<String> {
        self.entities.get(e).map(|r| r.outlinks.clone()).unwrap_or_default()
    }

    pub fn link_jaccard(&self, a: &str, b: &str) -> f64 {
        let (x, y) = (self.outlinks(a), self.outlinks(b));
        let inter = x.iter().filter(|l| y.contains(*l)).count() as f64;
        let union = x.iter().chain(y.iter()).collect::<BTreeSet<_>>().len() as f64;
        if union == 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn link_wlm(&self, a: &str, b: &str) -> f64 {
        let (x, y) = (self.outlinks(a), self.outlinks(b));
        let inter = x.iter().filter(|l| y.contains(*l)).count() as f64;
        if inter == 0.0 {
            return 0.0;
        }
        let big = (x.len().max(y.len()) as f64).ln();
        let small = (x.len().min(y.len()) as f64).ln();
        let n = (self.n_entities() as f64).ln();
        if n - small <= 0.0 {
            return if big == inter.ln() { 1.0 } else { 0.0 };
        }
        let v = 1.0 - (big - inter.ln()) / (n - small);
        v.clamp(0.0, 1.0)
    }

    pub fn kb_similarity(&self, e: &str, seeds: &[String], method: KbSimilarity) -> f64 {
        if !self.entities.contains_key(e) {
            return 0.0;
        }
        match method {
            KbSimilarity::Relations => self.relation_similarity(e, seeds),
            KbSimilarity::Jaccard | KbSimilarity::Wlm => {
                if seeds.is_empty() {
                    return 0.0;
                }
                let sum: f64 =
                    seeds
                        .iter()
                        .map(|s| {
                            if method == KbSimilarity::Jaccard {
                                self.link_jaccard(e, s)
                            } else {
                                self.link_wlm(e, s)
                            }
                        })
                        .sum();
                sum / seeds.len() as f64
            }
        }
    }

    /// `|P_e ∩ ∪ P_seed|` for categories (`types == false`) or types.
    pub fn property_overlap(&self, e: &str, seeds: &[String], types: bool) -> usize {
        let props = |id: &str| -> BTreeSet<String> {
            self.entities
                .get(id)
                .map(|r| if types { r.types.clone() } else { r.categories.clone() })
                .unwrap_or_default()
        };
        let union: BTreeSet<String> = seeds.iter().flat_map(|s| props(s)).collect();
        props(e).iter().filter(|p| union.contains(*p)).count()
    }

    // ----- table-corpus side -----

    pub fn tc_similarity(&self, e: &str, seeds: &[String]) -> f64 {
        let with_seeds: Vec<&OracleTable> =
            self.tables.iter().filter(|t| seeds.iter().all(|s| t.entities.contains(s))).collect();
        if with_seeds.is_empty() {
            return 0.0;
        }
        with_seeds.iter().filter(|t| t.entities.contains(e)).count() as f64 / with_seeds.len() as f64
    }

    pub fn heading_tf(&self, e: &str, term: &str) -> usize {
        self.tables_with(e).map(|t| count(&t.heading_terms, &term.to_string())).sum()
    }

    pub fn heading_len(&self, e: &str) -> usize {
        self.tables_with(e).map(|t| t.heading_terms.len()).sum()
    }

    pub fn mean_heading_len(&self) -> f64 {
        self.mean_heading_len
    }

    fn scan_mean_heading_len(&self) -> f64 {
        let present: BTreeSet<&String> = self.tables.iter().flat_map(|t| &t.entities).collect();
        if present.is_empty() {
            return 0.0;
        }
        let total: usize = present.iter().map(|e| self.heading_len(e)).sum();
        total as f64 / present.len() as f64
    }

    pub fn background_heading_prob(&self, term: &str) -> f64 {
        let total: usize = self.tables.iter().map(|t| t.heading_terms.len()).sum();
        if total == 0 {
            return 0.0;
        }
        let n: usize = self.tables.iter().map(|t| count(&t.heading_terms, &term.to_string())).sum();
        n as f64 / total as f64
    }

    pub fn p_lm(&self, term: &str, e: &str, mu: f64) -> f64 {
        let tf = self.heading_tf(e, term) as f64;
        let len = self.heading_len(e) as f64;
        (tf + mu * self.background_heading_prob(term)) / (len + mu)
    }

    pub fn p_em(&self, label: &str, e: &str) -> f64 {
        let n = self.tables_with(e).count();
        if n == 0 {
            return 0.0;
        }
        self.tables_with(e).filter(|t| t.labels.contains(label)).count() as f64 / n as f64
    }

    pub fn mean_abstract_len(&self) -> f64 {
        self.mean_abstract_len
    }

    fn scan_mean_abstract_len(&self) -> f64 {
        let with: Vec<usize> = self.entities.values().map(|r| r.abstract_tokens.len()).filter(|&n| n > 0).collect();
        if with.is_empty() {
            0.0
        } else {
            with.iter().sum::<usize>() as f64 / with.len() as f64
        }
    }

    pub fn background_abstract_prob(&self, term: &str) -> f64 {
        let total: usize = self.entities.values().map(|r| r.abstract_tokens.len()).sum();
        if total == 0 {
            return 0.0;
        }
        let n: usize = self.entities.values().map(|r| count(&r.abstract_tokens, &term.to_string())).sum();
        n as f64 / total as f64
    }

    pub fn p_abstract(&self, term: &str, e: &str, mu: f64) -> f64 {
        let toks = self.entities.get(e).map(|r| r.abstract_tokens.clone()).unwrap_or_default();
        (count(&toks, &term.to_string()) as f64 + mu * self.background_abstract_prob(term)) / (toks.len() as f64 + mu)
    }

    pub fn p_caption_tc(&self, term: &str, e: &str) -> f64 {
        let n = self.tables_with(e).count();
        if n == 0 {
            return 0.0;
        }
        self.tables_with(e).filter(|t| t.caption_tokens.iter().any(|x| x == term)).count() as f64 / n as f64
    }

    // ----- row model -----

    fn seeds(seed: &SeedTable) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &seed.seed_entities {
            if !out.contains(e) {
                out.push(e.clone());
            }
        }
        out
    }

    fn mu(explicit: Option<f64>, mean: f64) -> f64 {
        explicit.unwrap_or(if mean > 0.0 { mean } else { 1.0 })
    }

    pub fn entity_similarity(&self, e: &str, seed: &SeedTable, cfg: &RowRankingConfig) -> Option<f64> {
        let seeds = Self::seeds(seed);
        if seeds.is_empty() {
            return None;
        }
        Some(
            cfg.lambda_e * self.kb_similarity(e, &seeds, cfg.kb_similarity)
                + (1.0 - cfg.lambda_e) * self.tc_similarity(e, &seeds),
        )
    }

    pub fn label_likelihood(&self, e: &str, seed: &SeedTable, cfg: &RowRankingConfig) -> Option<f64> {
        let mu = Self::mu(cfg.mu_labels, self.mean_heading_len());
        let labels: Vec<(String, Vec<String>)> = seed
            .normalized_labels()
            .into_iter()
            .map(|l| (l.as_str().to_string(), tokenize(l.as_str())))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        if labels.is_empty() {
            return None;
        }
        let n = labels.len() as f64;
        Some(
            labels
                .iter()
                .map(|(l, terms)| {
                    let lm: f64 = terms.iter().map(|t| self.p_lm(t, e, mu)).product();
                    cfg.lambda_l * lm + (1.0 - cfg.lambda_l) / n * self.p_em(l, e)
                })
                .sum(),
        )
    }

    pub fn caption_likelihood(&self, e: &str, seed: &SeedTable, cfg: &RowRankingConfig) -> Option<f64> {
        let mu = Self::mu(cfg.mu_caption, self.mean_abstract_len());
        let terms = tokenize(&seed.caption);
        if terms.is_empty() {
            return None;
        }
        Some(
            terms
                .iter()
                .map(|t| cfg.lambda_c * self.p_abstract(t, e, mu) + (1.0 - cfg.lambda_c) * self.p_caption_tc(t, e))
                .product(),
        )
    }

    pub fn row_score(&self, e: &str, seed: &SeedTable, cfg: &RowRankingConfig) -> f64 {
        let on = |c| cfg.components.contains(&c);
        let mut score = 1.0;
        if on(RowComponent::EntitySimilarity) {
            score *= self.entity_similarity(e, seed, cfg).unwrap_or(1.0);
        }
        if on(RowComponent::LabelLikelihood) {
            score *= self.label_likelihood(e, seed, cfg).unwrap_or(1.0);
        }
        if on(RowComponent::CaptionLikelihood) {
            score *= self.caption_likelihood(e, seed, cfg).unwrap_or(1.0);
        }
        score
    }

    // ----- retrieval -----

    /// BM25 of every indexed table, in ascending id order.
    fn bm25_all(&self, query: &BTreeSet<String>, doc: impl Fn(&OracleTable) -> Vec<String>) -> Vec<f64> {
        let docs: Vec<Vec<String>> = self.tables.iter().map(doc).collect();
        let n = docs.len() as f64;
        let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
        let df: BTreeMap<&String, f64> =
            query.iter().map(|q| (q, docs.iter().filter(|d| d.contains(q)).count() as f64)).collect();
        docs.iter()
            .map(|d| {
                let mut score = 0.0;
                for q in query {
                    let tf = count(d, q) as f64;
                    if tf == 0.0 {
                        continue;
                    }
                    let idf = (1.0 + (n - df[q] + 0.5) / (df[q] + 0.5)).ln();
                    let norm = if avg > 0.0 { 1.0 - B + B * d.len() as f64 / avg } else { 1.0 };
                    score += idf * tf * (K1 + 1.0) / (tf + K1 * norm);
                }
                score
            })
            .collect()
    }

    fn pick(&self, all: &[f64], table: &OracleTable) -> f64 {
        let i = self.tables.iter().position(|t| t.id == table.id).expect("indexed table");
        all[i]
    }

    pub fn caption_scores(&self, caption: &str) -> Vec<f64> {
        let q: BTreeSet<String> = tokenize(caption).into_iter().collect();
        self.bm25_all(&q, |t| t.caption_tokens.clone())
    }

    pub fn entity_scores(&self, seeds: &[String]) -> Vec<f64> {
        let q: BTreeSet<String> = seeds.iter().cloned().collect();
        self.bm25_all(&q, |t| t.entities.iter().cloned().collect())
    }

    pub fn label_scores(&self, labels: &[String]) -> Vec<f64> {
        let q: BTreeSet<String> = labels.iter().map(|l| normalize_label(l).as_str().to_string()).collect();
        self.bm25_all(&q, |t| t.labels.iter().cloned().collect())
    }

    pub fn caption_bm25(&self, caption: &str, table: &OracleTable) -> f64 {
        self.pick(&self.caption_scores(caption), table)
    }

    pub fn table(&self, id: &str) -> Option<&OracleTable> {
        self.tables.iter().find(|t| t.id == id)
    }

    // ----- column model -----

    pub fn coverage(&self, table: &OracleTable, seed: &SeedTable) -> Option<f64> {
        let seeds: BTreeSet<&String> = seed.seed_entities.iter().collect();
        if seeds.is_empty() {
            return None;
        }
        Some(seeds.iter().filter(|s| table.entities.contains(**s)).count() as f64 / seeds.len() as f64)
    }

    pub fn label_overlap(&self, table: &OracleTable, seed: &SeedTable) -> Option<f64> {
        let labels: BTreeSet<String> = seed
            .seed_labels
            .iter()
            .map(|l| normalize_label(l).as_str().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        if labels.is_empty() {
            return None;
        }
        Some(labels.iter().filter(|l| table.labels.contains(*l)).count() as f64 / labels.len() as f64)
    }

    /// `P(T|c)` for each table of `pool`, the BM25 score divided by its
    /// maximum over `pool`.
    pub fn caption_factors(&self, seed: &SeedTable, pool: &[&OracleTable]) -> Vec<Option<f64>> {
        if tokenize(&seed.caption).is_empty() {
            return vec![None; pool.len()];
        }
        let all = self.caption_scores(&seed.caption);
        let raw: Vec<f64> = pool.iter().map(|t| self.pick(&all, t)).collect();
        let max = raw.iter().copied().fold(0.0, f64::max);
        raw.into_iter().map(|r| Some(if max > 0.0 { r / max } else { 0.0 })).collect()
    }

    /// Bridge scores of every label in `pool` (minus the seed labels).
    pub fn column_scores(&self, seed: &SeedTable, pool: &[&OracleTable]) -> BTreeMap<String, f64> {
        let seed_labels: BTreeSet<String> = seed.normalized_labels().iter().map(|l| l.as_str().to_string()).collect();
        let factors = self.caption_factors(seed, pool);
        let mut scores = BTreeMap::new();
        for (t, caption) in pool.iter().zip(factors) {
            let caption = caption.unwrap_or(1.0);
            let relevance =
                self.coverage(t, seed).unwrap_or(1.0) * caption * self.label_overlap(t, seed).unwrap_or(1.0);
            for l in &t.labels {
                if !seed_labels.contains(l) {
                    *scores.entry(l.clone()).or_insert(0.0) += relevance;
                }
            }
        }
        scores
    }

    pub fn label_count(&self, l: &str) -> usize {
        self.tables.iter().filter(|t| t.labels.contains(l)).count()
    }

    pub fn cs(&self, l1: &str, l2: &str) -> f64 {
        let n = self.label_count(l1);
        if n == 0 {
            return 0.0;
        }
        self.tables.iter().filter(|t| t.labels.contains(l1) && t.labels.contains(l2)).count() as f64 / n as f64
    }

    pub fn label_benefit(&self, l: &str, seed: &SeedTable) -> f64 {
        let labels: Vec<String> = seed.normalized_labels().iter().map(|x| x.as_str().to_string()).collect();
        if labels.is_empty() {
            return 0.0;
        }
        labels.iter().map(|s| self.cs(s, l)).sum::<f64>() / labels.len() as f64
    }
}

/// Relative agreement: `|a - b| <= tol * max(|a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
