use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use super::Task;
use crate::table::{normalize_label, SeedTable, Table};

/// A seed table cut from a complete table, plus what is left as ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedCase {
    pub table_id: String,
    pub seed: SeedTable,
    /// Entity ids (rows) or normalized labels (columns).
    pub ground_truth: BTreeSet<String>,
    pub seed_size: usize,
}

impl SimulatedCase {
    pub fn truth_set(&self) -> HashSet<&str> {
        self.ground_truth.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimulateError {
    #[error("seed size must be at least 1")]
    ZeroSize,
    #[error("seed size {size} leaves nothing to predict ({available} available)")]
    TooLarge { size: usize, available: usize },
    #[error("leftmost column is not made of unique entities")]
    NotEntityFocused,
}

/// Rows: the first `size` entities seed, the remaining ones are the truth,
/// every heading is a seed label. Columns: the first `size` headings seed,
/// the remaining ones (normalized, deduplicated, minus seed forms) are the
/// truth, every entity is a seed entity.
pub fn simulate_case(table: &Table, task: Task, size: usize) -> Result<SimulatedCase, SimulateError> {
    if size == 0 {
        return Err(SimulateError::ZeroSize);
    }
    let mut entities = Vec::with_capacity(table.rows.len());
    let mut seen = HashSet::new();
    for e in table.leftmost() {
        match e {
            Some(id) if seen.insert(id) => entities.push(id.to_string()),
            _ => return Err(SimulateError::NotEntityFocused),
        }
    }

    match task {
        Task::Rows => {
            if size >= entities.len() {
                return Err(SimulateError::TooLarge { size, available: entities.len() });
            }
            let truth = entities[size..].iter().cloned().collect();
            entities.truncate(size);
            Ok(SimulatedCase {
                table_id: table.id.clone(),
                seed: SeedTable {
                    caption: table.caption.clone(),
                    seed_entities: entities,
                    seed_labels: table.headings.clone(),
                },
                ground_truth: truth,
                seed_size: size,
            })
        }
        Task::Columns => {
            if size >= table.headings.len() {
                return Err(SimulateError::TooLarge { size, available: table.headings.len() });
            }
            let seed_labels: Vec<String> = table.headings[..size].to_vec();
            let seed_forms: HashSet<String> =
                seed_labels.iter().map(|l| normalize_label(l).as_str().to_string()).collect();
            let truth = table.headings[size..]
                .iter()
                .map(|l| normalize_label(l).as_str().to_string())
                .filter(|l| !l.is_empty() && !seed_forms.contains(l))
                .collect();
            Ok(SimulatedCase {
                table_id: table.id.clone(),
                seed: SeedTable { caption: table.caption.clone(), seed_entities: entities, seed_labels },
                ground_truth: truth,
                seed_size: size,
            })
        }
    }
}
