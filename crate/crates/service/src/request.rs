//! Suggestion requests: wire format, validation and execution. The CLI and
//! the HTTP handlers both go through [`suggest`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tabassist_core::columns::{
    rank_baseline_candidates, rank_column_candidates, select_column_candidates_with, ColCandidateConfig,
    ColRankingConfig, TableSignal,
};
use tabassist_core::eval::{ColumnMethod, Task};
use tabassist_core::rows::{
    rank_rows, KbSimilarity, RowCandidateConfig, RowCandidateMethod, RowComponent, RowRankingConfig,
};
use tabassist_core::{Engine, RankedSuggestions, SeedTable, Suggestion};
use thiserror::Error;

pub const DEFAULT_TOP_K: usize = 100;
pub const DEFAULT_TOP_K_CAP: usize = 500;

/// Body of `POST /suggest/rows` and `POST /suggest/columns`. The seed
/// fields use the same names as the seed-table file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestRequest {
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default)]
    pub labels: Vec<String>,
    /// Must name the endpoint's task when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    /// Enabled ranking components; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_labels: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_caption: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kb_similarity: Option<String>,
    /// Column ranker: `bridge` (default) or `baseline`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Candidate-selection k per method, merged over the defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_k: Option<BTreeMap<String, usize>>,
}

impl SuggestRequest {
    pub fn from_seed(seed: SeedTable) -> Self {
        SuggestRequest {
            caption: seed.caption,
            entities: seed.seed_entities,
            labels: seed.seed_labels,
            ..Default::default()
        }
    }

    pub fn seed(&self) -> SeedTable {
        SeedTable::new(self.caption.clone(), self.entities.iter().cloned(), self.labels.iter().cloned())
    }
}

/// A request that parsed but cannot be served as asked.
#[derive(Debug, Error, PartialEq)]
pub enum RequestError {
    #[error("request is for task {requested:?} but was sent to the {endpoint} endpoint")]
    TaskMismatch { requested: String, endpoint: Task },
    #[error("top_k must be in [1, {cap}], got {got}")]
    TopK { got: usize, cap: usize },
    #[error("{0}")]
    Config(#[from] tabassist_core::rows::ConfigError),
    #[error("{0}")]
    Seed(#[from] tabassist_core::table::SeedError),
    #[error("unknown column method {0:?}")]
    UnknownColumnMethod(String),
    #[error("{0} does not apply to the {1} task")]
    NotApplicable(&'static str, Task),
}

/// A validated request, ready to run against an engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Rows {
        seed: SeedTable,
        candidates: RowCandidateConfig,
        ranking: RowRankingConfig,
        top_k: usize,
    },
    Columns {
        seed: SeedTable,
        candidates: ColCandidateConfig,
        ranking: ColRankingConfig,
        method: ColumnMethod,
        top_k: usize,
    },
}

fn parse_all<T: std::str::FromStr<Err = tabassist_core::rows::ConfigError>>(
    names: &[String],
) -> Result<Vec<T>, RequestError> {
    names.iter().map(|n| n.trim().parse().map_err(RequestError::from)).collect()
}

pub fn plan(task: Task, req: &SuggestRequest, top_k_cap: usize) -> Result<Plan, RequestError> {
    if let Some(requested) = &req.task {
        if requested.parse::<Task>().ok() != Some(task) {
            return Err(RequestError::TaskMismatch { requested: requested.clone(), endpoint: task });
        }
    }
    let top_k = req.top_k.unwrap_or(DEFAULT_TOP_K.min(top_k_cap));
    if top_k == 0 || top_k > top_k_cap {
        return Err(RequestError::TopK { got: top_k, cap: top_k_cap });
    }
    let seed = req.seed();
    seed.validate()?;

    match task {
        Task::Rows => {
            if req.method.is_some() {
                return Err(RequestError::NotApplicable("method", task));
            }
            let mut ranking = RowRankingConfig::default();
            if let Some(names) = &req.components {
                ranking.components = parse_all::<RowComponent>(names)?.into_iter().collect();
            }
            ranking.lambda_e = req.lambda_e.unwrap_or(ranking.lambda_e);
            ranking.lambda_l = req.lambda_l.unwrap_or(ranking.lambda_l);
            ranking.lambda_c = req.lambda_c.unwrap_or(ranking.lambda_c);
            ranking.mu_labels = req.mu_labels.or(ranking.mu_labels);
            ranking.mu_caption = req.mu_caption.or(ranking.mu_caption);
            if let Some(s) = &req.kb_similarity {
                ranking.kb_similarity = s.parse::<KbSimilarity>()?;
            }
            ranking.validate()?;
            let mut candidates = RowCandidateConfig::default();
            for (name, &k) in req.candidate_k.iter().flatten() {
                candidates.methods.insert(name.parse::<RowCandidateMethod>()?, k);
            }
            candidates.validate()?;
            Ok(Plan::Rows { seed, candidates, ranking, top_k })
        }
        Task::Columns => {
            let row_only = [
                ("lambda_e", req.lambda_e.is_some()),
                ("lambda_l", req.lambda_l.is_some()),
                ("lambda_c", req.lambda_c.is_some()),
                ("mu_labels", req.mu_labels.is_some()),
                ("mu_caption", req.mu_caption.is_some()),
                ("kb_similarity", req.kb_similarity.is_some()),
            ];
            if let Some((name, _)) = row_only.iter().find(|x| x.1) {
                return Err(RequestError::NotApplicable(name, task));
            }
            let mut ranking = ColRankingConfig::default();
            if let Some(names) = &req.components {
                ranking.components = parse_all::<TableSignal>(names)?.into_iter().collect();
            }
            let method = match req.method.as_deref() {
                None | Some("bridge") => ColumnMethod::Bridge,
                Some("baseline") | Some("acsdb") => ColumnMethod::Baseline,
                Some(other) => return Err(RequestError::UnknownColumnMethod(other.to_string())),
            };
            let mut candidates = ColCandidateConfig::default();
            for (name, &k) in req.candidate_k.iter().flatten() {
                candidates.methods.insert(name.parse::<TableSignal>()?, k);
            }
            candidates.validate()?;
            Ok(Plan::Columns { seed, candidates, ranking, method, top_k })
        }
    }
}

impl Plan {
    pub fn task(&self) -> Task {
        match self {
            Plan::Rows { .. } => Task::Rows,
            Plan::Columns { .. } => Task::Columns,
        }
    }

    pub fn run(&self, engine: &Engine) -> RankedSuggestions {
        let (mut ranked, top_k) = match self {
            Plan::Rows { seed, candidates, ranking, top_k } => (rank_rows(engine, seed, candidates, ranking), *top_k),
            Plan::Columns { seed, candidates, ranking, method, top_k } => {
                let pool = select_column_candidates_with(&engine.index, seed, candidates, ranking.caption_scale);
                let ranked = match method {
                    ColumnMethod::Bridge => rank_column_candidates(&engine.index, &pool, ranking),
                    ColumnMethod::Baseline => rank_baseline_candidates(&engine.index, seed, &pool),
                };
                (ranked, *top_k)
            }
        };
        ranked.truncate(top_k);
        ranked
    }
}

/// Validates `req` for `task` and ranks against `engine`.
pub fn suggest(
    engine: &Engine,
    task: Task,
    req: &SuggestRequest,
    top_k_cap: usize,
) -> Result<Vec<Suggestion>, RequestError> {
    Ok(plan(task, req, top_k_cap)?.run(engine).items)
}

/// Body returned by the suggestion endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub task: Task,
    pub suggestions: Vec<Suggestion>,
    pub timing_ms: f64,
    pub snapshot_version: u64,
}
