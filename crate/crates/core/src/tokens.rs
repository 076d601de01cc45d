//! Token estimation used for budget hints and agent cost accounting.

/// Deterministic text → token count mapping.
///
/// Implementations must return 0 for the empty string and be monotone under
/// concatenation: `estimate(a + b) >= max(estimate(a), estimate(b))`.
/// Exact tokenizers plug in through this trait.
pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize;

    /// Longest prefix of `text` (on a char boundary) whose estimate is at
    /// most `max_tokens`.
    fn prefix<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        if self.estimate(text) <= max_tokens {
            return text;
        }
        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        // invariant: estimate(text[..bounds[lo]]) <= max_tokens
        let (mut lo, mut hi) = (0usize, bounds.len() - 1);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.estimate(&text[..bounds[mid]]) <= max_tokens {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        &text[..bounds[lo]]
    }
}

/// Reference estimator: every maximal run of word characters is one token and
/// every other non-whitespace character is one token.
#[derive(Debug, Default, Clone, Copy)]
pub struct WordPunctEstimator;

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl TokenEstimator for WordPunctEstimator {
    fn estimate(&self, text: &str) -> usize {
        let mut count = 0;
        let mut in_word = false;
        for c in text.chars() {
            if is_word(c) {
                if !in_word {
                    count += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    count += 1;
                }
            }
        }
        count
    }

    fn prefix<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        let mut count = 0;
        let mut in_word = false;
        for (i, c) in text.char_indices() {
            if is_word(c) {
                if !in_word {
                    if count == max_tokens {
                        return &text[..i];
                    }
                    count += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    if count == max_tokens {
                        return &text[..i];
                    }
                    count += 1;
                }
            }
        }
        text
    }
}
