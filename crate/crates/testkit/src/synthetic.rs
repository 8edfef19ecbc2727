//! Seeded synthetic KB and table corpus (at most 200 entities and 200
//! tables). Entities fall into classes; tables mostly draw their rows,
//! caption words and headings from one class, with cross-class noise,
//! unlinked cells, links to unknown entities and heading variants.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tabassist_core::table::Cell;
use tabassist_core::Table;

use crate::World;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticParams {
    pub classes: usize,
    pub entities_per_class: usize,
    pub tables: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams { classes: 8, entities_per_class: 20, tables: 190 }
    }
}

const COMMON_WORDS: [&str; 16] = [
    "list", "of", "the", "season", "results", "table", "world", "national", "history", "top", "members", "records",
    "league", "official", "major", "notable",
];

const COMMON_LABELS: [&str; 10] =
    ["Year", "Notes", "Rank", "Country", "Date", "Total", "Location", "Score", "Status", "Ref."];

fn class_words(c: usize) -> Vec<String> {
    (0..6).map(|i| format!("w{c}x{i}")).collect()
}

fn class_labels(c: usize) -> Vec<String> {
    (0..5).map(|i| format!("Attr{c} {i}")).collect()
}

fn entity_id(c: usize, i: usize) -> String {
    format!("Q{c}_{i:02}")
}

/// Surface variants that normalize to the same label.
fn variant(label: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..6) {
        0 => label.to_uppercase(),
        1 => format!("{label}:"),
        2 => format!("{label}s"),
        3 => format!("  {label} "),
        _ => label.to_string(),
    }
}

pub fn generate(seed: u64, params: SyntheticParams) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let SyntheticParams { classes, entities_per_class, tables } = params;
    let all: Vec<(usize, String)> =
        (0..classes).flat_map(|c| (0..entities_per_class).map(move |i| (c, entity_id(c, i)))).collect();

    let mut kb_lines = Vec::with_capacity(all.len());
    for (c, id) in &all {
        let c = *c;
        let mut categories = vec![format!("Category:Class {c}")];
        for _ in 0..rng.gen_range(0..3) {
            categories.push(format!("Category:Misc {}", rng.gen_range(0..12)));
        }
        let types = vec![format!("type:Kind{}", c % 4), "type:Thing".to_string()];

        let mut triples = Vec::new();
        for _ in 0..rng.gen_range(1..5) {
            let p = format!("p{}", rng.gen_range(0..4));
            let o = if rng.gen_bool(0.7) {
                format!("V{c}_{}", rng.gen_range(0..4))
            } else {
                format!("V{}", rng.gen_range(0..6))
            };
            triples.push(json!([id, p, o]));
        }
        if rng.gen_bool(0.5) {
            let (_, other) = all.choose(&mut rng).unwrap();
            triples.push(json!([id, "linked", other]));
        }

        let mut outlinks = Vec::new();
        for _ in 0..rng.gen_range(2..12) {
            let target = if rng.gen_bool(0.7) {
                entity_id(c, rng.gen_range(0..entities_per_class))
            } else {
                all.choose(&mut rng).unwrap().1.clone()
            };
            if &target != id {
                outlinks.push(target);
            }
        }

        let mut rec = json!({
            "id": id,
            "categories": categories,
            "types": types,
            "triples": triples,
            "outlinks": outlinks,
        });
        if rng.gen_bool(0.85) {
            let words = class_words(c);
            let n = rng.gen_range(4..20);
            let text: Vec<String> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        words.choose(&mut rng).unwrap().clone()
                    } else {
                        COMMON_WORDS.choose(&mut rng).unwrap().to_string()
                    }
                })
                .collect();
            rec["abstract"] = json!(text.join(" "));
        }
        kb_lines.push(rec.to_string());
    }

    let mut corpus = Vec::with_capacity(tables);
    for t in 0..tables {
        let c = rng.gen_range(0..classes);
        let n_rows = rng.gen_range(3..11);
        let mut members: Vec<usize> = (0..entities_per_class).collect();
        members.shuffle(&mut rng);
        let mut rows: Vec<Vec<Cell>> = Vec::with_capacity(n_rows);
        let mut used = std::collections::HashSet::new();
        for &m in members.iter().take(n_rows) {
            let roll: f64 = rng.gen();
            let cell = if roll < 0.08 {
                let (_, other) = all.choose(&mut rng).unwrap();
                Cell::entity(other.clone())
            } else if roll < 0.11 {
                Cell::text(format!("plain {m}"))
            } else if roll < 0.13 {
                Cell::entity(format!("Missing_{m}"))
            } else {
                Cell::entity(entity_id(c, m))
            };
            if let Some(e) = &cell.entity {
                if !used.insert(e.clone()) {
                    continue;
                }
            }
            rows.push(vec![cell]);
        }

        let mut headings = vec![if rng.gen_bool(0.5) { "Name" } else { "Entity" }.to_string()];
        let mut labels = class_labels(c);
        labels.shuffle(&mut rng);
        for l in labels.iter().take(rng.gen_range(1..4)) {
            headings.push(variant(l, &mut rng));
        }
        for _ in 0..rng.gen_range(0..3) {
            headings.push(variant(COMMON_LABELS.choose(&mut rng).unwrap(), &mut rng));
        }
        if rng.gen_bool(0.03) {
            headings.push("   ".to_string());
        }
        for row in &mut rows {
            row.resize_with(headings.len(), || Cell::text("v"));
        }

        let words = class_words(c);
        let caption: Vec<String> = (0..rng.gen_range(1..6))
            .map(|_| {
                if rng.gen_bool(0.6) {
                    words.choose(&mut rng).unwrap().clone()
                } else {
                    COMMON_WORDS.choose(&mut rng).unwrap().to_string()
                }
            })
            .collect();

        corpus.push(Table { id: format!("T{t:03}"), caption: caption.join(" "), headings, rows });
    }

    World { kb_jsonl: kb_lines.join("\n") + "\n", corpus }
}

/// The default world for a seed.
pub fn world(seed: u64) -> World {
    generate(seed, SyntheticParams::default())
}
