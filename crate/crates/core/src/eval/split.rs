use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{classify_entity_focused, FocusCriteria, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Rows,
    Columns,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Rows => "rows",
            Task::Columns => "columns",
        }
    }

    /// Seed sizes evaluated by default: 1..=5 entities or 1..=3 labels.
    pub fn default_seed_sizes(self) -> Vec<usize> {
        match self {
            Task::Rows => (1..=5).collect(),
            Task::Columns => (1..=3).collect(),
        }
    }

    fn salt(self) -> u64 {
        match self {
            Task::Rows => 0x524f_5753,
            Task::Columns => 0x434f_4c53,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rows" | "row" => Ok(Task::Rows),
            "columns" | "column" | "cols" => Ok(Task::Columns),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// Disjoint validation and test table ids for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationSplit {
    pub task: Task,
    pub rng_seed: u64,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl EvaluationSplit {
    /// Ids that must be kept out of the index.
    pub fn exclusion_list(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.validation.iter().chain(&self.test).cloned().collect();
        ids.sort();
        ids
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("need {needed} entity-focused tables for the split but only {available} qualify")]
    Insufficient { needed: usize, available: usize },
}

/// Draws `size` validation and `size` test tables among the entity-focused
/// ones. The draw depends on `rng_seed` and on the task.
pub fn make_split(corpus: &[Table], task: Task, rng_seed: u64, size: usize) -> Result<EvaluationSplit, SplitError> {
    let criteria = FocusCriteria::default();
    let mut ids: Vec<&str> = corpus
        .iter()
        .filter(|t| classify_entity_focused(t, criteria.min_rows, criteria.min_extra_cols))
        .map(|t| t.id.as_str())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    ids.sort_unstable();
    if ids.len() < 2 * size {
        return Err(SplitError::Insufficient { needed: 2 * size, available: ids.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ task.salt());
    ids.shuffle(&mut rng);
    let mut validation: Vec<String> = ids[..size].iter().map(|s| s.to_string()).collect();
    let mut test: Vec<String> = ids[size..2 * size].iter().map(|s| s.to_string()).collect();
    validation.sort();
    test.sort();
    Ok(EvaluationSplit { task, rng_seed, validation, test })
}
