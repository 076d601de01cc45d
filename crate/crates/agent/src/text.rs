//! Question-term matching used by the scripted policy.

use paperdesk_core::enrich::generator::{words, STOPWORDS};

/// Interrogatives and filler verbs that carry no topical signal.
const QUESTION_WORDS: &[&str] = &[
    "what", "which", "who", "whom", "whose", "when", "where", "why", "how", "does", "did", "do",
    "is", "are", "much", "many", "reach", "reached", "reaches", "achieve", "achieves", "achieved",
    "get", "gets", "report", "reported", "value", "score", "tell", "give",
];

/// Distinct lowercased content words of `question`, in order of appearance.
pub fn salient_terms(question: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in words(question) {
        if STOPWORDS.contains(&w.as_str()) || QUESTION_WORDS.contains(&w.as_str()) {
            continue;
        }
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

fn term_hits(term: &str, text_words: &[String]) -> bool {
    text_words
        .iter()
        .any(|w| w == term || (term.chars().count() >= 4 && w.starts_with(term)))
}

/// Fraction of `terms` present in `text`.
pub fn coverage(terms: &[String], text: &str) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let text_words: Vec<String> = words(text).collect();
    let hit = terms.iter().filter(|t| term_hits(t, &text_words)).count();
    hit as f64 / terms.len() as f64
}

/// Number of `terms` present in `text`.
pub fn overlap(terms: &[String], text: &str) -> usize {
    let text_words: Vec<String> = words(text).collect();
    terms.iter().filter(|t| term_hits(t, &text_words)).count()
}

/// Sentences of `text` as verbatim slices.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, c) in text.char_indices() {
        let end = i + c.len_utf8();
        let boundary = match c {
            '\n' => true,
            '.' | '?' | '!' => end == bytes.len() || bytes[end].is_ascii_whitespace(),
            _ => false,
        };
        if boundary {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Minimum share of question terms an answer sentence must cover.
pub const ANSWER_COVERAGE: f64 = 0.75;

/// The sentence of `text` that best covers `terms` and states a number,
/// provided it covers at least [`ANSWER_COVERAGE`]. Earlier sentences win
/// ties.
pub fn answer_sentence<'a>(terms: &[String], text: &'a str) -> Option<&'a str> {
    let mut best: Option<(f64, &str)> = None;
    for s in sentences(text) {
        if !s.chars().any(|c| c.is_ascii_digit()) {
            continue;
        }
        let c = coverage(terms, s);
        if c >= ANSWER_COVERAGE && best.is_none_or(|(b, _)| c > b) {
            best = Some((c, s));
        }
    }
    best.map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn salient_terms_drop_question_words() {
        assert_eq!(
            salient_terms("What accuracy does Zorbit reach on Kala-Bench?"),
            ["accuracy", "zorbit", "kala", "bench"]
        );
    }

    #[test]
    fn sentences_are_verbatim() {
        let t = "On X, it reaches 91.5. Next one?\nLast line";
        assert_eq!(
            sentences(t),
            ["On X, it reaches 91.5.", "Next one?", "Last line"]
        );
        for s in sentences(t) {
            assert!(t.contains(s));
        }
    }

    #[test]
    fn picks_covering_numeric_sentence() {
        let terms = salient_terms("What accuracy does Zorbit reach on Kala-Bench?");
        let body = "We report accuracy on Kala-Bench against five baselines. \
                    On Kala-Bench, Zorbit reaches a accuracy of 88.1, ahead of the strongest baseline at 30.2. \
                    On the auxiliary benchmarks, it reaches a accuracy of 25.0.";
        assert_eq!(
            answer_sentence(&terms, body),
            Some("On Kala-Bench, Zorbit reaches a accuracy of 88.1, ahead of the strongest baseline at 30.2.")
        );
        assert_eq!(answer_sentence(&terms, "Zorbit has 3 layers."), None);
    }

    #[test]
    fn prefix_matching_needs_four_chars() {
        assert_eq!(coverage(&["cite".into()], "cited twice"), 1.0);
        assert_eq!(coverage(&["f1".into()], "f10 score"), 0.0);
    }
}
