//! Tokenization shared by captions, abstracts and heading labels.

/// Lowercases and splits on every non-alphanumeric character. No stemming,
/// no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}
