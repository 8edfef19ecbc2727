//! Offline evaluation: splits, seed simulation, ranking metrics and reports.

mod metrics;
mod simulate;
mod split;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub use metrics::{average_precision, mean, reciprocal_rank, StableSum};
pub use simulate::{simulate_case, SimulateError, SimulatedCase};
pub use split::{make_split, EvaluationSplit, SplitError, Task};

use crate::columns::{
    rank_baseline_candidates, rank_column_candidates, select_column_candidates_with, ColCandidateConfig,
    ColRankingConfig,
};
use crate::engine::Engine;
use crate::rows::{rank_candidates, select_row_candidates, ConfigError, RowCandidateConfig, RowRankingConfig};
use crate::table::Table;

pub const DEFAULT_DEPTH: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnMethod {
    #[default]
    Bridge,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Seed sizes to simulate; the task default when empty.
    pub seed_sizes: Vec<usize>,
    pub depth: usize,
    pub row_candidates: RowCandidateConfig,
    pub row_ranking: RowRankingConfig,
    pub column_candidates: ColCandidateConfig,
    pub column_ranking: ColRankingConfig,
    pub column_method: ColumnMethod,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed_sizes: Vec::new(),
            depth: DEFAULT_DEPTH,
            row_candidates: RowCandidateConfig::default(),
            row_ranking: RowRankingConfig::default(),
            column_candidates: ColCandidateConfig::default(),
            column_ranking: ColRankingConfig::default(),
            column_method: ColumnMethod::default(),
        }
    }
}

impl EvalConfig {
    pub fn seed_sizes_for(&self, task: Task) -> Vec<usize> {
        if self.seed_sizes.is_empty() {
            task.default_seed_sizes()
        } else {
            self.seed_sizes.clone()
        }
    }

    pub fn validate(&self, task: Task) -> Result<(), ConfigError> {
        if self.depth == 0 || self.seed_sizes.contains(&0) {
            return Err(ConfigError::ZeroK);
        }
        match task {
            Task::Rows => {
                self.row_candidates.validate()?;
                self.row_ranking.validate()
            }
            Task::Columns => self.column_candidates.validate(),
        }
    }
}

/// What a ranker returns for one simulated case.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankerOutput {
    pub candidates: Vec<String>,
    pub ranked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub table_id: String,
    pub ap: f64,
    pub rr: f64,
    pub recall: f64,
    pub n_candidates: usize,
    pub n_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub table_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSizeReport {
    pub seed_size: usize,
    pub evaluated: usize,
    pub map: f64,
    pub mrr: f64,
    pub mean_recall: f64,
    pub mean_candidates: f64,
    pub cases: Vec<CaseResult>,
    pub skipped: Vec<SkippedCase>,
}

impl SeedSizeReport {
    fn from_cases(seed_size: usize, cases: Vec<CaseResult>, skipped: Vec<SkippedCase>) -> Self {
        SeedSizeReport {
            seed_size,
            evaluated: cases.len(),
            map: mean(cases.iter().map(|c| c.ap)),
            mrr: mean(cases.iter().map(|c| c.rr)),
            mean_recall: mean(cases.iter().map(|c| c.recall)),
            mean_candidates: mean(cases.iter().map(|c| c.n_candidates as f64)),
            cases,
            skipped,
        }
    }

    pub fn ap_by_table(&self) -> BTreeMap<&str, f64> {
        self.cases.iter().map(|c| (c.table_id.as_str(), c.ap)).collect()
    }

    /// Mean candidate recall of cases with AP = 1, 0.4 < AP < 0.6 and AP = 0.
    pub fn recall_by_ap_band(&self) -> Vec<ApBand> {
        let bands: [(&str, fn(f64) -> bool); 3] =
            [("ap=1", |ap| ap >= 1.0 - 1e-12), ("0.4<ap<0.6", |ap| ap > 0.4 && ap < 0.6), ("ap=0", |ap| ap <= 0.0)];
        bands
            .iter()
            .map(|(name, pred)| {
                let recalls: Vec<f64> = self.cases.iter().filter(|c| pred(c.ap)).map(|c| c.recall).collect();
                ApBand { band: name.to_string(), count: recalls.len(), mean_recall: mean(recalls) }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApBand {
    pub band: String,
    pub count: usize,
    pub mean_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub depth: usize,
    pub n_tables: usize,
    pub config: EvalConfig,
    pub per_seed_size: Vec<SeedSizeReport>,
}

impl EvalReport {
    pub fn seed_size(&self, size: usize) -> Option<&SeedSizeReport> {
        self.per_seed_size.iter().find(|r| r.seed_size == size)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs `ranker` over every table and seed size. Tables whose simulation
/// fails or leaves an empty ground truth are reported as skipped.
pub fn evaluate_with<F>(
    task: Task,
    tables: &[Table],
    seed_sizes: &[usize],
    depth: usize,
    ranker: F,
) -> Vec<SeedSizeReport>
where
    F: Fn(&SimulatedCase) -> RankerOutput + Sync,
{
    seed_sizes
        .iter()
        .map(|&size| {
            let outcomes: Vec<Result<CaseResult, SkippedCase>> = tables
                .par_iter()
                .map(|table| {
                    let skip = |reason: String| SkippedCase { table_id: table.id.clone(), reason };
                    let case = simulate_case(table, task, size).map_err(|e| skip(e.to_string()))?;
                    if case.ground_truth.is_empty() {
                        return Err(skip("empty ground truth".to_string()));
                    }
                    let out = ranker(&case);
                    Ok(score_case(&case, &out, depth))
                })
                .collect();
            let mut cases = Vec::new();
            let mut skipped = Vec::new();
            for o in outcomes {
                match o {
                    Ok(c) => cases.push(c),
                    Err(s) => skipped.push(s),
                }
            }
            SeedSizeReport::from_cases(size, cases, skipped)
        })
        .collect()
}

fn score_case(case: &SimulatedCase, out: &RankerOutput, depth: usize) -> CaseResult {
    let truth = case.truth_set();
    let ranked: Vec<&str> = out.ranked.iter().take(depth).map(String::as_str).collect();
    let candidates: HashSet<&str> = out.candidates.iter().map(String::as_str).collect();
    CaseResult {
        table_id: case.table_id.clone(),
        ap: average_precision(&ranked, &truth).unwrap_or(0.0),
        rr: reciprocal_rank(&ranked, &truth).unwrap_or(0.0),
        recall: truth.iter().filter(|t| candidates.contains(*t)).count() as f64 / truth.len() as f64,
        n_candidates: candidates.len(),
        n_truth: truth.len(),
    }
}

/// Runs the configured row or column method over `tables`.
pub fn run_evaluation(
    engine: &Engine,
    task: Task,
    tables: &[Table],
    cfg: &EvalConfig,
) -> Result<EvalReport, ConfigError> {
    cfg.validate(task)?;
    let sizes = cfg.seed_sizes_for(task);
    let per_seed_size = match task {
        Task::Rows => evaluate_with(task, tables, &sizes, cfg.depth, |case| {
            let candidates = select_row_candidates(engine, &case.seed, &cfg.row_candidates);
            let ranked = rank_candidates(engine, &case.seed, &candidates, &cfg.row_ranking);
            RankerOutput {
                candidates: candidates.entities.keys().cloned().collect(),
                ranked: ranked.ids().map(str::to_string).collect(),
            }
        }),
        Task::Columns => evaluate_with(task, tables, &sizes, cfg.depth, |case| {
            let candidates = select_column_candidates_with(
                &engine.index,
                &case.seed,
                &cfg.column_candidates,
                cfg.column_ranking.caption_scale,
            );
            let ranked = match cfg.column_method {
                ColumnMethod::Bridge => rank_column_candidates(&engine.index, &candidates, &cfg.column_ranking),
                ColumnMethod::Baseline => rank_baseline_candidates(&engine.index, &case.seed, &candidates),
            };
            RankerOutput {
                candidates: candidates.labels.iter().cloned().collect(),
                ranked: ranked.ids().map(str::to_string).collect(),
            }
        }),
    };
    Ok(EvalReport { task, depth: cfg.depth, n_tables: tables.len(), config: cfg.clone(), per_seed_size })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub p_value: f64,
}

/// Two-sided paired t-test on `a - b`. `None` with fewer than two pairs or
/// mismatched lengths.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<PairedTTest> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(diffs.iter().copied());
    let var = {
        let mut s = StableSum::default();
        for d in &diffs {
            s.add((d - m) * (d - m));
        }
        s.value() / (n - 1) as f64
    };
    if var <= 0.0 {
        let (t, p) = if m == 0.0 { (0.0, 1.0) } else { (m.signum() * f64::INFINITY, 0.0) };
        return Some(PairedTTest { n, mean_difference: m, t, p_value: p });
    }
    let t = m / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Some(PairedTTest { n, mean_difference: m, t, p_value })
}

/// Paired AP comparison of two runs at one seed size, over the tables both
/// runs evaluated.
pub fn compare_reports(a: &EvalReport, b: &EvalReport, seed_size: usize) -> Option<PairedTTest> {
    let ra = a.seed_size(seed_size)?.ap_by_table();
    let rb = b.seed_size(seed_size)?.ap_by_table();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ra.iter().filter_map(|(k, &x)| rb.get(k).map(|&y| (x, y))).unzip();
    paired_t_test(&xs, &ys)
}

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("sweep must look like name=start:stop:step, got {0:?}")]
    Syntax(String),
    #[error("unknown sweep parameter {0:?}")]
    UnknownParameter(String),
    #[error("sweep needs step >= 1e-6, |start|, |stop| <= 1e6 and at most 10000 points in a non-empty range")]
    Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

const SWEEP_PARAMETERS: [&str; 5] = ["lambda-e", "lambda-l", "lambda-c", "mu-labels", "mu-caption"];

/// Parses `name=start:stop:step`; the stop value is included.
pub fn parse_sweep(text: &str) -> Result<Sweep, SweepError> {
    let (name, range) = text.split_once('=').ok_or_else(|| SweepError::Syntax(text.to_string()))?;
    let name = name.trim().replace('_', "-");
    if !SWEEP_PARAMETERS.contains(&name.as_str()) {
        return Err(SweepError::UnknownParameter(name));
    }
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| SweepError::Syntax(text.to_string()))?;
    let [start, stop, step] = parts[..] else {
        return Err(SweepError::Syntax(text.to_string()));
    };
    let bounded = |x: f64| x.abs() <= 1e6;
    if !(step >= 1e-6) || !bounded(start) || !bounded(stop) || stop < start {
        return Err(SweepError::Range);
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 10_000 {
        return Err(SweepError::Range);
    }
    let values = (0..=n).map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10).collect();
    Ok(Sweep { parameter: name, values })
}

impl Sweep {
    pub fn apply(&self, cfg: &EvalConfig, value: f64) -> EvalConfig {
        let mut out = cfg.clone();
        let r = &mut out.row_ranking;
        match self.parameter.as_str() {
            "lambda-e" => r.lambda_e = value,
            "lambda-l" => r.lambda_l = value,
            "lambda-c" => r.lambda_c = value,
            "mu-labels" => r.mu_labels = Some(value),
            "mu-caption" => r.mu_caption = Some(value),
            _ => unreachable!("validated in parse_sweep"),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub points: Vec<SweepPoint>,
}

pub fn run_sweep(
    engine: &Engine,
    task: Task,
    tables: &[Table],
    cfg: &EvalConfig,
    sweep: &Sweep,
) -> Result<SweepReport, ConfigError> {
    let points = sweep
        .values
        .iter()
        .map(|&value| {
            let report = run_evaluation(engine, task, tables, &sweep.apply(cfg, value))?;
            Ok(SweepPoint { value, report })
        })
        .collect::<Result<_, ConfigError>>()?;
    Ok(SweepReport { parameter: sweep.parameter.clone(), points })
}
