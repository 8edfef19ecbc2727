//! Test fixtures for tabassist: a seeded synthetic corpus, small constructed
//! corpora with known answers, and brute-force reference scorers that work
//! directly on the raw tables and KB records.

pub mod ablation;
pub mod harness;
pub mod oracle;
pub mod synthetic;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use tabassist_core::index::{build_index, Bm25Params};
use tabassist_core::kb::load_kb;
use tabassist_core::{Engine, Table};

pub use oracle::Oracle;

/// A KB dump plus a table corpus.
#[derive(Debug, Clone)]
pub struct World {
    pub kb_jsonl: String,
    pub corpus: Vec<Table>,
}

impl World {
    /// Loads the KB, links the corpus and indexes every table not in
    /// `exclude`. The returned tables are the linked corpus.
    pub fn build(&self, exclude: &[String]) -> (Engine, Vec<Table>) {
        let kb = load_kb(self.kb_jsonl.as_bytes()).expect("fixture KB loads").store;
        let mut corpus = self.corpus.clone();
        for t in &mut corpus {
            kb.link_table(t);
        }
        let exclude: HashSet<String> = exclude.iter().cloned().collect();
        let index = build_index(&corpus, &kb, &exclude, Bm25Params::default());
        (Engine::new(kb, index), corpus)
    }

    /// Engine plus a reference scorer over the same indexed tables.
    pub fn build_with_oracle(&self, exclude: &[String]) -> (Engine, Vec<Table>, Oracle) {
        let (engine, corpus) = self.build(exclude);
        let indexed: Vec<Table> = corpus.iter().filter(|t| !exclude.contains(&t.id)).cloned().collect();
        let oracle = Oracle::new(&self.kb_jsonl, &indexed);
        (engine, corpus, oracle)
    }

    /// Writes `corpus.jsonl` and `kb.jsonl` into `dir`.
    pub fn write_files(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        let corpus = dir.join("corpus.jsonl");
        let kb = dir.join("kb.jsonl");
        tabassist_core::table::write_corpus(std::fs::File::create(&corpus)?, &self.corpus)?;
        std::fs::write(&kb, &self.kb_jsonl)?;
        Ok((corpus, kb))
    }

    pub fn table(&self, id: &str) -> Option<&Table> {
        self.corpus.iter().find(|t| t.id == id)
    }
}

/// Directory holding the checked-in fixture files.
pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// The checked-in 20-table fixture.
pub fn golden_world() -> World {
    let dir = fixture_dir("golden");
    let kb_jsonl = std::fs::read_to_string(dir.join("kb.jsonl")).expect("golden kb.jsonl");
    let corpus = std::fs::read(dir.join("corpus.jsonl")).expect("golden corpus.jsonl");
    let parsed = tabassist_core::table::read_corpus(corpus.as_slice()).expect("golden corpus parses");
    assert!(parsed.errors.is_empty(), "golden corpus has bad records");
    World { kb_jsonl, corpus: parsed.tables }
}
