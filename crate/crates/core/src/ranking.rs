use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One ranked suggestion (an entity id or a normalized label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: String,
    pub score: f64,
    /// Per-component scores, keyed by component name.
    pub components: BTreeMap<String, f64>,
    /// Components that were neutral (factor 1) because their input was empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub neutral: Vec<String>,
    /// Candidate-selection methods that proposed this item.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<String>,
}

/// Suggestions in non-increasing score order, ties by ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedSuggestions {
    pub items: Vec<Suggestion>,
}

impl RankedSuggestions {
    pub fn from_unsorted(mut items: Vec<Suggestion>) -> Self {
        items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        RankedSuggestions { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.items.truncate(n);
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|s| s.id.as_str())
    }

    /// Tab-separated rows: rank, id, total score, then `name=value` per
    /// component in name order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank\tid\tscore\tcomponents\n");
        for (i, s) in self.items.iter().enumerate() {
            let comps: Vec<String> = s.components.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
            out.push_str(&format!("{}\t{}\t{:e}\t{}\n", i + 1, s.id, s.score, comps.join(",")));
        }
        out
    }
}
