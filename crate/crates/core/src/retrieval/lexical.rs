//! Okapi BM25 over surrogate text.

use std::collections::HashMap;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

/// Lowercased runs of word characters (alphanumerics and `_`).
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Term frequencies and length of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermStats {
    pub tf: HashMap<String, u32>,
    pub len: usize,
}

impl TermStats {
    pub fn of(text: &str) -> Self {
        let tokens = tokenize(text);
        let mut tf = HashMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_insert(0) += 1;
        }
        TermStats {
            tf,
            len: tokens.len(),
        }
    }
}

pub fn idf(n_docs: usize, df: usize) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// BM25 contribution of one query term with frequency `tf` in a document of
/// length `len`.
pub fn term_score(idf: f64, tf: u32, len: usize, avgdl: f64) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = tf as f64;
    let norm = if avgdl > 0.0 { len as f64 / avgdl } else { 0.0 };
    idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization() {
        assert_eq!(
            tokenize("Memory-Augmented RAG_v2, 2024!"),
            ["memory", "augmented", "rag_v2", "2024"]
        );
        assert!(tokenize("  --  ").is_empty());
    }

    #[test]
    fn idf_is_positive() {
        assert!(idf(3, 3) > 0.0);
        assert!(idf(3, 1) > idf(3, 2));
    }
}
