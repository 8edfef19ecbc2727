use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf(n_docs: usize, df: usize) -> f64 {
        let (n, df) = (n_docs as f64, df as f64);
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn term_weight(&self, tf: u32, doc_len: u32, avg_len: f64, idf: f64) -> f64 {
        let tf = tf as f64;
        let norm = if avg_len > 0.0 { 1.0 - self.b + self.b * doc_len as f64 / avg_len } else { 1.0 };
        idf * tf * (self.k1 + 1.0) / (tf + self.k1 * norm)
    }
}

/// One searchable field: per-token postings of `(doc, tf)` sorted by doc.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bm25Field {
    postings: Vec<Vec<(u32, u32)>>,
    doc_len: Vec<u32>,
    avg_len: f64,
}

impl Bm25Field {
    /// `docs[d]` lists the token ids of document `d` (with repetition).
    pub fn build(vocab_size: usize, docs: &[Vec<u32>]) -> Self {
        let mut postings: Vec<Vec<(u32, u32)>> = vec![Vec::new(); vocab_size];
        let mut doc_len = Vec::with_capacity(docs.len());
        for (d, tokens) in docs.iter().enumerate() {
            let mut tf: HashMap<u32, u32> = HashMap::new();
            for &t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            let mut tf: Vec<_> = tf.into_iter().collect();
            tf.sort_unstable();
            for (t, n) in tf {
                postings[t as usize].push((d as u32, n));
            }
            doc_len.push(tokens.len() as u32);
        }
        let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
        let avg_len = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Bm25Field { postings, doc_len, avg_len }
    }

    /// Structural checks for a decoded field: every posting refers to a
    /// known document, postings ascend, and document lengths match.
    pub fn check(&self, vocab_size: usize, n_docs: usize) -> Result<(), String> {
        if self.postings.len() != vocab_size || self.doc_len.len() != n_docs {
            return Err("field size does not match the index".into());
        }
        let mut lens = vec![0u64; n_docs];
        for plist in &self.postings {
            if plist.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err("postings out of order".into());
            }
            for &(d, tf) in plist {
                if d as usize >= n_docs || tf == 0 {
                    return Err("posting refers to an unknown document".into());
                }
                lens[d as usize] += tf as u64;
            }
        }
        if lens.iter().zip(&self.doc_len).any(|(&a, &b)| a != b as u64) {
            return Err("document lengths disagree with postings".into());
        }
        if !self.avg_len.is_finite() || self.avg_len < 0.0 {
            return Err("bad average document length".into());
        }
        Ok(())
    }

    pub fn n_docs(&self) -> usize {
        self.doc_len.len()
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.doc_len[doc as usize]
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn postings(&self, token: u32) -> &[(u32, u32)] {
        self.postings.get(token as usize).map_or(&[], Vec::as_slice)
    }

    /// Scores every document matching at least one query token. Tokens are
    /// deduplicated and visited in ascending order so sums are reproducible.
    pub fn score_all(&self, params: &Bm25Params, query: &BTreeSet<u32>) -> HashMap<u32, f64> {
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for &t in query {
            let plist = self.postings(t);
            if plist.is_empty() {
                continue;
            }
            let idf = Bm25Params::idf(self.n_docs(), plist.len());
            for &(d, tf) in plist {
                *scores.entry(d).or_insert(0.0) += params.term_weight(tf, self.doc_len(d), self.avg_len, idf);
            }
        }
        scores
    }

    /// Score of a single document, 0 when no query token occurs in it.
    pub fn score_doc(&self, params: &Bm25Params, query: &BTreeSet<u32>, doc: u32) -> f64 {
        let mut score = 0.0;
        for &t in query {
            let plist = self.postings(t);
            if let Ok(pos) = plist.binary_search_by_key(&doc, |&(d, _)| d) {
                let idf = Bm25Params::idf(self.n_docs(), plist.len());
                score += params.term_weight(plist[pos].1, self.doc_len(doc), self.avg_len, idf);
            }
        }
        score
    }

    /// Top-`k` documents by score; ties go to the lower document number.
    pub fn top_k(&self, params: &Bm25Params, query: &BTreeSet<u32>, k: usize) -> Vec<(u32, f64)> {
        let mut hits: Vec<(u32, f64)> = self.score_all(params, query).into_iter().collect();
        let cmp = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if hits.len() > k && k > 0 {
            hits.select_nth_unstable_by(k - 1, cmp);
            hits.truncate(k);
        }
        hits.sort_unstable_by(cmp);
        hits.truncate(k);
        hits
    }
}
