//! Constructed corpora where each ranking component on its own favours a
//! different set of distractors, while the true answers are the only items
//! that score well on all components at once.

use serde_json::json;
use tabassist_core::table::Cell;
use tabassist_core::Table;

use crate::World;

fn table(id: &str, caption: &str, headings: &[&str], entities: &[String]) -> Table {
    Table {
        id: id.to_string(),
        caption: caption.to_string(),
        headings: headings.iter().map(|h| h.to_string()).collect(),
        rows: entities
            .iter()
            .map(|e| {
                let mut row = vec![Cell::entity(e.clone())];
                row.resize(headings.len(), Cell::text("x"));
                row
            })
            .collect(),
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn entity(id: &str, outlinks: &[String], abstract_text: &str) -> String {
    json!({
        "id": id,
        "categories": ["Category:All"],
        "types": ["type:Thing"],
        "outlinks": outlinks,
        "abstract": abstract_text,
    })
    .to_string()
}

/// Id of the held-out table evaluated by [`row_world`].
pub const ROW_TEST_TABLE: &str = "test-rows";

/// Row-population fixture. Evaluating seed size 1 on [`ROW_TEST_TABLE`]
/// (seed `s`, truth `g1..g5`):
/// - `dE*` share every outlink with `s` and co-occur with it in most tables,
/// - `dL*` sit in tables carrying exactly the seed headings,
/// - `dC*` have abstracts and table captions made of the seed caption words,
/// - `g*` are moderately related to `s` on all three.
pub fn row_world() -> World {
    let seed_links = names("x", 10);
    let (g, de, dl, dc) = (names("g", 5), names("dE", 6), names("dL", 6), names("dC", 6));
    let mut kb = vec![entity("s", &seed_links, "omega word")];
    for (i, id) in g.iter().enumerate() {
        let mut links = seed_links[..5].to_vec();
        links.extend(names(&format!("y{i}_"), 5));
        kb.push(entity(id, &links, "alpha gamma delta word"));
    }
    for id in &de {
        kb.push(entity(id, &seed_links, "omega sigma"));
    }
    for (i, id) in dl.iter().enumerate() {
        kb.push(entity(id, &names(&format!("l{i}_"), 4), "omega sigma"));
    }
    for (i, id) in dc.iter().enumerate() {
        kb.push(entity(id, &names(&format!("c{i}_"), 4), "alpha beta alpha beta"));
    }
    for f in names("f", 4) {
        kb.push(entity(&f, &[], "filler text"));
    }

    let heads = ["Player", "Club", "Goals", "Caps"];
    let with_seed = |mut v: Vec<String>| {
        v.insert(0, "s".to_string());
        v
    };
    let mut corpus = vec![table(ROW_TEST_TABLE, "alpha beta", &heads, &with_seed(g.clone()))];
    for i in 0..3 {
        corpus.push(table(&format!("e{i}"), "zeta eta", &["Unit", "Foo", "Bar", "Baz"], &with_seed(de.clone())));
        corpus.push(table(&format!("l{i}"), "lorem ipsum", &heads, &dl));
        corpus.push(table(&format!("c{i}"), "alpha beta", &["Item", "Foo", "Bar", "Baz"], &dc));
    }
    corpus.push(table("g0", "alpha beta gamma", &heads, &with_seed(g.clone())));
    corpus.push(table("g1", "alpha words", &["Player", "Misc", "Other", "Stuff"], &g));
    corpus.push(table("f0", "filler", &["Thing", "Foo", "Bar", "Baz"], &names("f", 4)));

    World { kb_jsonl: kb.join("\n") + "\n", corpus }
}

/// Id of the held-out table evaluated by [`column_world`].
pub const COLUMN_TEST_TABLE: &str = "test-cols";

/// Column-population fixture. Evaluating seed size 1 on
/// [`COLUMN_TEST_TABLE`] (seed label `Anchor`, truth `h1..h3`, seeds
/// `s1..s6`, caption "alpha beta"):
/// - `E*` tables hold every seed entity but share nothing else,
/// - `L*` tables carry the seed label only,
/// - `C*` tables have exactly the seed caption,
/// - `G` holds half of the seed entities, a longer caption with the seed
///   words, and the seed label next to the true labels.
pub fn column_world() -> World {
    let seeds = names("s", 6);
    let others = names("o", 6);
    let mut kb: Vec<String> = seeds.iter().chain(&others).map(|e| entity(e, &[], "word")).collect();
    kb.push(entity("lonely", &[], "word"));

    let mut corpus = vec![table(COLUMN_TEST_TABLE, "alpha beta", &["Anchor", "H1", "H2", "H3"], &seeds)];
    for i in 0..3 {
        corpus.push(table(&format!("E{i}"), "zeta eta", &["Entity", "EA", "EB", "EC"], &seeds));
        corpus.push(table(&format!("L{i}"), "lorem ipsum", &["Anchor", "LA", "LB", "LC"], &others[..3]));
        corpus.push(table(&format!("C{i}"), "alpha beta", &["Thing", "CA", "CB", "CC"], &others[3..]));
    }
    corpus.push(table("G", "alpha beta gamma delta", &["Anchor", "H1", "H2", "H3"], &seeds[..3]));
    corpus.push(table("F", "filler", &["Other", "FA", "FB", "FC"], &["lonely".to_string()]));

    World { kb_jsonl: kb.join("\n") + "\n", corpus }
}
