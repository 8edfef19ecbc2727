//! Term-count language models.

use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Maximum-likelihood unigram model kept as raw counts so that persisted
/// statistics stay exact. Serialized with entries sorted by term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermCounts<K: std::hash::Hash + Eq> {
    counts: HashMap<K, u64>,
    total: u64,
}

impl<K: std::hash::Hash + Eq> TermCounts<K> {
    pub fn new() -> Self {
        TermCounts { counts: HashMap::new(), total: 0 }
    }

    pub fn add(&mut self, term: K, n: u64) {
        *self.counts.entry(term).or_insert(0) += n;
        self.total += n;
    }

    pub fn count<Q>(&self, term: &Q) -> u64
    where
        K: std::borrow::Borrow<Q>,
        Q: std::hash::Hash + Eq + ?Sized,
    {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `count / total`, or 0 for an empty model.
    pub fn prob<Q>(&self, term: &Q) -> f64
    where
        K: std::borrow::Borrow<Q>,
        Q: std::hash::Hash + Eq + ?Sized,
    {
        if self.total == 0 {
            0.0
        } else {
            self.count(term) as f64 / self.total as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, u64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Serialize)]
struct SortedCountsRef<'a, K> {
    counts: Vec<(&'a K, u64)>,
    total: u64,
}

#[derive(Deserialize)]
struct SortedCounts<K> {
    counts: Vec<(K, u64)>,
    total: u64,
}

impl<K: std::hash::Hash + Eq + Ord + Serialize> Serialize for TermCounts<K> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut counts: Vec<(&K, u64)> = self.counts.iter().map(|(k, &v)| (k, v)).collect();
        counts.sort_unstable_by(|a, b| a.0.cmp(b.0));
        SortedCountsRef { counts, total: self.total }.serialize(serializer)
    }
}

impl<'de, K: std::hash::Hash + Eq + Deserialize<'de>> Deserialize<'de> for TermCounts<K> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SortedCounts::<K>::deserialize(deserializer)?;
        let mut out = TermCounts::new();
        for (k, v) in raw.counts {
            if out.counts.insert(k, v).is_some() {
                return Err(serde::de::Error::custom("duplicate term in counts"));
            }
            out.total = out.total.checked_add(v).ok_or_else(|| serde::de::Error::custom("term counts overflow"))?;
        }
        if out.total != raw.total {
            return Err(serde::de::Error::custom("term counts do not add up to the total"));
        }
        Ok(out)
    }
}

/// Dirichlet-smoothed term probability `(tf + mu * p_bg) / (len + mu)`.
pub fn dirichlet(tf: u64, len: u64, mu: f64, p_background: f64) -> f64 {
    (tf as f64 + mu * p_background) / (len as f64 + mu)
}
