//! Suggestion engine for entity-focused tables.
//!
//! Given a partially filled table (a caption, entities down the leftmost
//! column, heading labels across the top) the engine ranks entities to add
//! as new rows and heading labels to add as new columns, using a table
//! corpus and a knowledge base.
//!
//! * [`table`] data model, corpus ingestion, label normalization
//! * [`kb`] knowledge-base entity store
//! * [`index`] corpus statistics and BM25 search
//! * [`rows`] / [`columns`] candidate selection and ranking
//! * [`eval`] simulated-user evaluation with MAP/MRR
//! * [`pipeline`] reading input files and building an index directory

pub mod columns;
pub mod engine;
pub mod eval;
pub mod index;
pub mod kb;
pub mod lm;
pub mod pipeline;
pub mod ranking;
pub mod rows;
pub mod table;
pub mod text;

pub use engine::Engine;
pub use ranking::{RankedSuggestions, Suggestion};
pub use table::{normalize_label, NormalizedLabel, SeedTable, Table};
