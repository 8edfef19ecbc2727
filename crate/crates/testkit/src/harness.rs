//! Held-out evaluation setups over synthetic worlds.

use crate::{synthetic, Oracle};
use tabassist_core::eval::{make_split, simulate_case, EvaluationSplit, SimulatedCase, Task};
use tabassist_core::{Engine, Table};

pub struct Setup {
    pub engine: Engine,
    pub oracle: Oracle,
    pub split: EvaluationSplit,
    pub test_tables: Vec<Table>,
}

/// Synthetic world indexed without its held-out tables for `task`.
pub fn setup(seed: u64, task: Task, size: usize) -> Setup {
    let world = synthetic::world(seed);
    let (probe, linked) = world.build(&[]);
    drop(probe);
    let split = make_split(&linked, task, seed, size).expect("enough entity-focused tables");
    let (engine, corpus, oracle) = world.build_with_oracle(&split.exclusion_list());
    let test_tables: Vec<Table> = corpus.into_iter().filter(|t| split.test.contains(&t.id)).collect();
    assert_eq!(test_tables.len(), size);
    Setup { engine, oracle, split, test_tables }
}

pub fn cases(tables: &[Table], task: Task, sizes: &[usize]) -> Vec<SimulatedCase> {
    let mut out = Vec::new();
    for t in tables {
        for &s in sizes {
            if let Ok(c) = simulate_case(t, task, s) {
                out.push(c);
            }
        }
    }
    assert!(!out.is_empty(), "no simulated cases");
    out
}
