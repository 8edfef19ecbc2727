use std::collections::HashSet;
use std::hash::Hash;

/// Binary average precision with `|truth|` as denominator. `None` when the
/// truth set is empty.
pub fn average_precision<T: Eq + Hash, Q: std::borrow::Borrow<T>>(ranked: &[Q], truth: &HashSet<T>) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked.iter().enumerate() {
        if truth.contains(item.borrow()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / truth.len() as f64)
}

/// Reciprocal rank of the first relevant item, 0 if none is retrieved.
pub fn reciprocal_rank<T: Eq + Hash, Q: std::borrow::Borrow<T>>(ranked: &[Q], truth: &HashSet<T>) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    Some(ranked.iter().position(|x| truth.contains(x.borrow())).map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct StableSum {
    sum: f64,
    compensation: f64,
}

impl StableSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = StableSum::default();
    let mut n = 0usize;
    for x in xs {
        s.add(x);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s.value() / n as f64
    }
}
