//! Table data model, corpus ingestion and heading-label normalization.
//!
//! Corpus files are newline-delimited JSON, one table per line:
//!
//! ```text
//! {"id": "t1", "caption": "...", "headings": ["Country", "Capital"],
//!  "rows": [[{"text": "Japan", "entity": "Japan"}, {"text": "Tokyo", "entity": null}]]}
//! ```

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single grid cell. `entity` holds the knowledge-base identifier when the
/// cell links to an entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub text: String,
    #[serde(default)]
    pub entity: Option<String>,
}

impl Cell {
    pub fn text(text: impl Into<String>) -> Self {
        Cell { text: text.into(), entity: None }
    }

    pub fn entity(id: impl Into<String>) -> Self {
        let id = id.into();
        Cell { text: id.clone(), entity: Some(id) }
    }
}

/// A corpus table: caption, heading row and content rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    pub caption: String,
    pub headings: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn column_count(&self) -> usize {
        self.headings.len()
    }

    /// Entity links of the leftmost column, one entry per row.
    pub fn leftmost(&self) -> impl Iterator<Item = Option<&str>> + '_ {
        self.rows.iter().map(|row| row.first().and_then(|c| c.entity.as_deref()))
    }

    /// Entities of the leftmost column in row order, skipping plain-text cells.
    pub fn leftmost_entities(&self) -> impl Iterator<Item = &str> + '_ {
        self.leftmost().flatten()
    }

    /// Checks the grid invariant: every row has exactly one cell per heading.
    pub fn check_shape(&self) -> Result<(), String> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.headings.len() {
                return Err(format!(
                    "row {} has {} cells but there are {} headings",
                    i,
                    row.len(),
                    self.headings.len()
                ));
            }
        }
        Ok(())
    }
}

/// The user's in-progress table. Serialized as
/// `{"caption": str, "entities": [str], "labels": [str]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTable {
    #[serde(default)]
    pub caption: String,
    #[serde(default, rename = "entities")]
    pub seed_entities: Vec<String>,
    #[serde(default, rename = "labels")]
    pub seed_labels: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeedError {
    #[error("duplicate seed entity {0:?}")]
    DuplicateEntity(String),
}

impl SeedTable {
    pub fn new(
        caption: impl Into<String>,
        entities: impl IntoIterator<Item = impl Into<String>>,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        SeedTable {
            caption: caption.into(),
            seed_entities: entities.into_iter().map(Into::into).collect(),
            seed_labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), SeedError> {
        let mut seen = HashSet::new();
        for e in &self.seed_entities {
            if !seen.insert(e.as_str()) {
                return Err(SeedError::DuplicateEntity(e.clone()));
            }
        }
        Ok(())
    }

    /// Seed labels in normalized form, deduplicated, empty forms dropped,
    /// first-occurrence order kept.
    pub fn normalized_labels(&self) -> Vec<NormalizedLabel> {
        let mut seen = HashSet::new();
        self.seed_labels
            .iter()
            .map(|l| normalize_label(l))
            .filter(|l| !l.is_empty() && seen.insert(l.clone()))
            .collect()
    }
}

/// A heading label in canonical form. Only constructible through
/// [`normalize_label`], so equality is match-equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct NormalizedLabel(String);

impl NormalizedLabel {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<String> for NormalizedLabel {
    fn from(raw: String) -> Self {
        normalize_label(&raw)
    }
}

impl From<NormalizedLabel> for String {
    fn from(l: NormalizedLabel) -> String {
        l.0
    }
}

impl fmt::Display for NormalizedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

const TRAILING_PUNCT: &[char] = &[':', '.', ',', ';'];

fn normalize_step(s: &str) -> String {
    let lower = s.to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = collapsed.trim_end_matches(TRAILING_PUNCT).trim_end().to_string();

    let last_start = out.rfind(' ').map_or(0, |i| i + 1);
    let last = &out[last_start..];
    if last.chars().count() > 3 && last.ends_with('s') && !last.ends_with("ss") {
        out.pop();
    }
    out
}

/// Canonical form used for every label comparison: lowercase, whitespace
/// collapsed, trailing `:.,;` removed, and a plural `s` dropped from the
/// final token when that token is longer than three characters (`ss`
/// endings are kept). Steps repeat until the string stops changing, which
/// makes the function idempotent.
pub fn normalize_label(raw: &str) -> NormalizedLabel {
    let mut current = normalize_step(raw);
    // Each step after the first only shortens the string, so this settles.
    for _ in 0..64 {
        let next = normalize_step(&current);
        if next == current {
            break;
        }
        current = next;
    }
    NormalizedLabel(current)
}

/// Minimum size for a table to count as entity-focused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusCriteria {
    pub min_rows: usize,
    pub min_extra_cols: usize,
}

impl Default for FocusCriteria {
    fn default() -> Self {
        FocusCriteria { min_rows: 6, min_extra_cols: 3 }
    }
}

/// True iff every leftmost cell links to an entity, those entities are
/// pairwise distinct, and the table has at least `min_rows` rows and
/// `min_extra_cols` columns besides the entity column.
pub fn classify_entity_focused(table: &Table, min_rows: usize, min_extra_cols: usize) -> bool {
    if table.rows.len() < min_rows || table.column_count() < min_extra_cols + 1 {
        return false;
    }
    let mut seen = HashSet::with_capacity(table.rows.len());
    table.leftmost().all(|e| match e {
        Some(id) => seen.insert(id),
        None => false,
    })
}

/// Share of rows whose leftmost cell links to an entity (0 for empty tables).
pub fn leftmost_entity_fraction(table: &Table) -> f64 {
    if table.rows.is_empty() {
        return 0.0;
    }
    let linked = table.leftmost().filter(Option::is_some).count();
    linked as f64 / table.rows.len() as f64
}

/// Table counts at increasing levels of leftmost-column entity coverage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FocusLevels {
    pub any_entity: usize,
    pub at_least_60: usize,
    pub at_least_80: usize,
    pub all_entities: usize,
    pub all_unique: usize,
}

/// Coverage ladder over a corpus, without and with the size constraints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FocusLadder {
    pub total: FocusLevels,
    pub constrained: FocusLevels,
}

impl FocusLadder {
    pub fn from_tables<'a>(tables: impl IntoIterator<Item = &'a Table>, criteria: FocusCriteria) -> Self {
        let mut ladder = FocusLadder::default();
        for t in tables {
            let frac = leftmost_entity_fraction(t);
            let unique = {
                let mut seen = HashSet::new();
                t.leftmost_entities().all(|e| seen.insert(e))
            };
            let sized = t.rows.len() >= criteria.min_rows && t.column_count() > criteria.min_extra_cols;
            let levels = [frac > 0.0, frac >= 0.6, frac >= 0.8, frac >= 1.0, frac >= 1.0 && unique];
            for bucket in [Some(&mut ladder.total), sized.then_some(&mut ladder.constrained)].into_iter().flatten() {
                bucket.any_entity += levels[0] as usize;
                bucket.at_least_60 += levels[1] as usize;
                bucket.at_least_80 += levels[2] as usize;
                bucket.all_entities += levels[3] as usize;
                bucket.all_unique += levels[4] as usize;
            }
        }
        ladder
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus stream unreadable: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
}

impl CorpusError {
    pub fn is_fatal(&self) -> bool {
        matches!(self, CorpusError::Io(_))
    }
}

#[derive(Deserialize)]
struct RawTable {
    id: String,
    caption: String,
    headings: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

/// Streaming reader over a corpus file. Yields one item per non-blank line;
/// malformed records come back as [`CorpusError::Record`] and iteration
/// continues. An I/O failure is yielded once and ends the stream.
pub struct CorpusReader<R> {
    reader: R,
    line: usize,
    buf: Vec<u8>,
    seen_ids: HashSet<String>,
    done: bool,
}

pub fn parse_corpus<R: BufRead>(reader: R) -> CorpusReader<R> {
    CorpusReader { reader, line: 0, buf: Vec::new(), seen_ids: HashSet::new(), done: false }
}

impl<R: BufRead> CorpusReader<R> {
    fn parse_record(&mut self) -> Result<Table, CorpusError> {
        let line = self.line;
        let record_err = |message: String| CorpusError::Record { line, message };
        let text = std::str::from_utf8(&self.buf).map_err(|e| record_err(e.to_string()))?;
        let raw: RawTable = serde_json::from_str(text).map_err(|e| record_err(e.to_string()))?;
        let table = Table { id: raw.id, caption: raw.caption, headings: raw.headings, rows: raw.rows };
        table.check_shape().map_err(record_err)?;
        if !self.seen_ids.insert(table.id.clone()) {
            return Err(record_err(format!("duplicate table id {:?}", table.id)));
        }
        Ok(table)
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Table, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {
                    self.line += 1;
                    if self.buf.iter().all(u8::is_ascii_whitespace) {
                        continue;
                    }
                    return Some(self.parse_record());
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::Io(e)));
                }
            }
        }
        None
    }
}

/// Result of reading a whole corpus: good tables in input order plus the
/// per-record errors that were skipped.
#[derive(Debug, Default)]
pub struct ParsedCorpus {
    pub tables: Vec<Table>,
    pub errors: Vec<CorpusError>,
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<ParsedCorpus, CorpusError> {
    let mut parsed = ParsedCorpus::default();
    for item in parse_corpus(reader) {
        match item {
            Ok(t) => parsed.tables.push(t),
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => parsed.errors.push(e),
        }
    }
    Ok(parsed)
}

pub fn write_corpus<'a, W: Write>(mut writer: W, tables: impl IntoIterator<Item = &'a Table>) -> io::Result<()> {
    for t in tables {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(id: &str, leftmost: &[Option<&str>], cols: usize) -> Table {
        Table {
            id: id.into(),
            caption: String::new(),
            headings: (0..cols).map(|i| format!("h{i}")).collect(),
            rows: leftmost
                .iter()
                .map(|e| {
                    let mut row = vec![match e {
                        Some(id) => Cell::entity(*id),
                        None => Cell::text("plain"),
                    }];
                    row.extend((1..cols).map(|_| Cell::text("v")));
                    row
                })
                .collect(),
        }
    }

    #[test]
    fn normalizes_common_label_variants() {
        for raw in ["Date", "date", "Dates", "date:"] {
            assert_eq!(normalize_label(raw).as_str(), "date", "{raw}");
        }
        assert_eq!(normalize_label("  Engine   Constructor ").as_str(), "engine constructor");
    }

    #[test]
    fn short_tokens_and_double_s_keep_their_s() {
        assert_eq!(normalize_label("Bus").as_str(), "bus");
        assert_eq!(normalize_label("Class").as_str(), "class");
        assert_eq!(normalize_label("Goals scored;").as_str(), "goals scored");
        assert_eq!(normalize_label("abc.s").as_str(), "abc");
    }

    #[test]
    fn classify_examples() {
        let ids = ["a", "b", "c", "d", "e", "f"];
        let all: Vec<_> = ids.iter().map(|s| Some(*s)).collect();
        assert!(classify_entity_focused(&grid("t", &all, 4), 6, 3));

        let mut with_text = all.clone();
        with_text[2] = None;
        assert!(!classify_entity_focused(&grid("t", &with_text, 4), 6, 3));

        let mut dup = all.clone();
        dup[5] = Some("a");
        assert!(!classify_entity_focused(&grid("t", &dup, 4), 6, 3));

        assert!(!classify_entity_focused(&grid("t", &all[..5], 4), 6, 3));
        assert!(!classify_entity_focused(&grid("t", &all, 3), 6, 3));
    }

    #[test]
    fn parses_two_records_in_order() {
        let tables = vec![grid("t1", &[Some("a")], 2), grid("t2", &[Some("b")], 2)];
        let mut buf = Vec::new();
        write_corpus(&mut buf, &tables).unwrap();
        let parsed = read_corpus(buf.as_slice()).unwrap();
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.tables, tables);
    }

    #[test]
    fn missing_headings_is_a_record_error() {
        let input = concat!(
            r#"{"id":"t1","caption":"c","headings":["a"],"rows":[]}"#,
            "\n",
            r#"{"id":"t2","caption":"c","rows":[]}"#,
            "\n"
        );
        let parsed = read_corpus(input.as_bytes()).unwrap();
        assert_eq!(parsed.tables.len(), 1);
        assert!(matches!(parsed.errors[..], [CorpusError::Record { line: 2, .. }]));
    }

    #[test]
    fn ragged_row_is_skipped_and_rest_parsed() {
        let good = serde_json::to_string(&grid("t1", &[Some("a")], 4)).unwrap();
        let mut ragged = grid("t2", &[Some("b")], 4);
        ragged.rows[0].pop();
        let ragged = serde_json::to_string(&ragged).unwrap();
        let good2 = serde_json::to_string(&grid("t3", &[Some("c")], 4)).unwrap();
        let input = format!("{good}\n{ragged}\n\n{good2}\n");

        let parsed = read_corpus(input.as_bytes()).unwrap();
        let ids: Vec<_> = parsed.tables.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["t1", "t3"]);
        assert_eq!(parsed.errors.len(), 1);
        match &parsed.errors[0] {
            CorpusError::Record { line, message } => {
                assert_eq!(*line, 2);
                assert!(message.contains("3 cells"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_bad_utf8_are_record_errors() {
        let t = serde_json::to_string(&grid("t1", &[], 1)).unwrap();
        let mut input = format!("{t}\n{t}\n").into_bytes();
        input.extend_from_slice(b"\xff\xfe\n");
        let parsed = read_corpus(input.as_slice()).unwrap();
        assert_eq!(parsed.tables.len(), 1);
        assert_eq!(parsed.errors.len(), 2);
    }

    struct FailingReader;
    impl io::Read for FailingReader {
        fn read(&mut self, _: &mut [u8]) -> io::Result<usize> {
            Err(io::Error::other("disk gone"))
        }
    }

    #[test]
    fn unreadable_stream_is_fatal() {
        let err = read_corpus(io::BufReader::new(FailingReader)).unwrap_err();
        assert!(err.is_fatal());
    }

    #[test]
    fn seed_table_wire_format() {
        let seed: SeedTable = serde_json::from_str(r#"{"caption":"c","entities":["a"],"labels":["Year"]}"#).unwrap();
        assert_eq!(seed, SeedTable::new("c", ["a"], ["Year"]));
        assert!(SeedTable::new("", ["a", "a"], Vec::<String>::new()).validate().is_err());
    }

    fn arb_table() -> impl Strategy<Value = Table> {
        let row_count = 0usize..10;
        let cols = 1usize..6;
        (row_count, cols, proptest::collection::vec(proptest::option::of(0u8..8), 10)).prop_map(|(n, m, ents)| {
            let names: Vec<String> = ents.iter().map(|e| e.map(|x| format!("e{x}")).unwrap_or_default()).collect();
            let leftmost: Vec<Option<&str>> = (0..n).map(|i| ents[i].map(|_| names[i].as_str())).collect();
            grid("t", &leftmost, m)
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC{0,24}") {
            let once = normalize_label(&raw);
            prop_assert_eq!(normalize_label(once.as_str()), once);
        }

        #[test]
        fn classify_matches_row_scan(t in arb_table()) {
            let mut expected = t.rows.len() >= 6 && t.headings.len() >= 4;
            let mut seen = Vec::new();
            for row in &t.rows {
                match &row[0].entity {
                    Some(e) if !seen.contains(e) => seen.push(e.clone()),
                    _ => expected = false,
                }
            }
            prop_assert_eq!(classify_entity_focused(&t, 6, 3), expected);
        }

        #[test]
        fn focus_ladder_is_monotone(tables in proptest::collection::vec(arb_table(), 0..30)) {
            let ladder = FocusLadder::from_tables(&tables, FocusCriteria::default());
            for l in [ladder.total, ladder.constrained] {
                prop_assert!(l.all_unique <= l.all_entities);
                prop_assert!(l.all_entities <= l.at_least_80);
                prop_assert!(l.at_least_80 <= l.at_least_60);
                prop_assert!(l.at_least_60 <= l.any_entity);
            }
            prop_assert_eq!(
                ladder.constrained.all_unique,
                tables.iter().filter(|t| classify_entity_focused(t, 6, 3)).count()
            );
        }
    }
}
