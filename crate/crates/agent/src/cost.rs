//! Read accounting and evidence verification.

use std::collections::BTreeMap;

use paperdesk_core::{PaperId, TokenEstimator};
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn visit<'a>(v: &'a Value, key: Option<&'a str>, f: &mut impl FnMut(Option<&'a str>, &'a Value)) {
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| visit(v, Some(k), f)),
        Value::Array(a) => a.iter().for_each(|v| visit(v, key, f)),
        _ => f(key, v),
    }
}

/// Token cost of a payload: the estimator applied to every string leaf.
pub fn payload_cost(estimator: &dyn TokenEstimator, data: &Value) -> usize {
    let mut total = 0;
    visit(data, None, &mut |_, v| {
        if let Value::String(s) = v {
            total += estimator.estimate(s);
        }
    });
    total
}

/// Whether `quote` occurs verbatim in `data`: inside a string leaf, or as
/// the `key: value` rendering of a scalar leaf.
pub fn quote_in_payload(quote: &str, data: &Value) -> bool {
    if quote.is_empty() {
        return false;
    }
    let mut found = false;
    visit(data, None, &mut |key, v| {
        if found {
            return;
        }
        let text = match v {
            Value::String(s) => {
                if s.contains(quote) {
                    found = true;
                    return;
                }
                s.clone()
            }
            Value::Null => return,
            other => other.to_string(),
        };
        if let Some(k) = key {
            found = format!("{k}: {text}") == quote;
        }
    });
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentBudget {
    pub max_tokens: usize,
    pub spent_tokens: usize,
    /// Section and raw reads allowed in one run.
    pub max_escalations: usize,
}

impl AgentBudget {
    pub fn new(max_tokens: usize) -> Self {
        AgentBudget {
            max_tokens,
            spent_tokens: 0,
            max_escalations: 4,
        }
    }

    pub fn remaining(&self) -> usize {
        self.max_tokens.saturating_sub(self.spent_tokens)
    }
}

/// Tokens spent per view kind (`retrieve`, `brief`, `head`, ...).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub spent_tokens: usize,
    pub max_tokens: usize,
    pub reads: usize,
    pub by_view: BTreeMap<String, usize>,
}

impl CostReport {
    pub fn add(&mut self, view: &str, cost: usize) {
        self.spent_tokens += cost;
        self.reads += 1;
        *self.by_view.entry(view.to_string()).or_default() += cost;
    }
}

/// One payload the agent consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadRecord {
    pub step: usize,
    /// `None` for retrieval result pages.
    pub paper_id: Option<PaperId>,
    pub view: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<usize>,
    pub cost: usize,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceLink {
    pub paper_id: PaperId,
    pub view: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<usize>,
    pub quote: String,
    pub claim: String,
}

/// Whether `link`'s quote occurs in a logged read of the same paper, view
/// and section.
pub fn verify_evidence(link: &EvidenceLink, reads: &[ReadRecord]) -> bool {
    reads.iter().any(|r| {
        r.paper_id.as_ref() == Some(&link.paper_id)
            && r.view == link.view
            && r.section == link.section
            && quote_in_payload(&link.quote, &r.data)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use paperdesk_core::WordPunctEstimator;
    use serde_json::json;

    #[test]
    fn cost_counts_string_leaves_only() {
        let v =
            json!({"title": "Two words", "n": 12345, "tags": ["a-b", "c"], "nested": {"x": "y."}});
        // "Two words" 2, "a-b" 3, "c" 1, "y." 2
        assert_eq!(payload_cost(&WordPunctEstimator, &v), 8);
        assert_eq!(payload_cost(&WordPunctEstimator, &json!(null)), 0);
    }

    #[test]
    fn quotes_match_substrings_and_scalar_renderings() {
        let v = json!({"body": "On X, it reaches 91.5.", "citations": 63, "venue": "The Web Conference", "sections": [{"idx": 0}]});
        assert!(quote_in_payload("it reaches 91.5", &v));
        assert!(quote_in_payload("citations: 63", &v));
        assert!(quote_in_payload("venue: The Web Conference", &v));
        assert!(quote_in_payload("idx: 0", &v));
        assert!(!quote_in_payload("citations: 64", &v));
        assert!(!quote_in_payload("", &v));
        assert!(!quote_in_payload("reaches 92", &v));
    }

    #[test]
    fn evidence_must_match_view_and_section() {
        let id = PaperId::arxiv("2401.00001").unwrap();
        let reads = vec![ReadRecord {
            step: 1,
            paper_id: Some(id.clone()),
            view: "section".into(),
            section: Some(4),
            cost: 3,
            data: json!({"body": "value of 12.5"}),
        }];
        let mut link = EvidenceLink {
            paper_id: id,
            view: "section".into(),
            section: Some(4),
            quote: "value of 12.5".into(),
            claim: "c".into(),
        };
        assert!(verify_evidence(&link, &reads));
        link.section = Some(3);
        assert!(!verify_evidence(&link, &reads));
    }
}
