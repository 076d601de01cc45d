//! Straightforward reference implementations that retrieval results are
//! checked against. They share no code with the index.

use std::collections::{BTreeMap, BTreeSet};

use paperdesk_core::retrieval::{Embedder, FilterSet, Surrogate};
use paperdesk_core::PaperId;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;
pub const RRF_K: f64 = 60.0;

fn terms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Attribute predicate written clause by clause from the filter semantics.
pub fn passes(s: &Surrogate, f: &FilterSet) -> bool {
    let lower = |x: &str| x.to_lowercase();
    let cat_ok = f.categories.is_empty()
        || s.categories
            .iter()
            .any(|c| f.categories.iter().any(|w| lower(c) == lower(w)));
    let authors_ok = f
        .authors
        .iter()
        .all(|a| s.authors.iter().any(|b| lower(a) == lower(b)));
    let from_ok = f
        .publish_from
        .is_none_or(|t| s.publish_at.unix() >= t.unix());
    let to_ok = f.publish_to.is_none_or(|t| s.publish_at.unix() <= t.unix());
    let cites_ok = f
        .min_citations
        .is_none_or(|m| s.citations.is_some_and(|c| c >= m));
    let venue_ok = f.venue_contains.as_ref().is_none_or(|v| {
        s.venue
            .as_ref()
            .is_some_and(|sv| lower(sv).contains(&lower(v)))
    });
    cat_ok && authors_ok && from_ok && to_ok && cites_ok && venue_ok
}

/// Score descending at 1e-9 resolution, so that scores equal up to rounding
/// order by id ascending.
fn sorted(mut v: Vec<(PaperId, f64)>) -> Vec<(PaperId, f64)> {
    let key = |s: f64| (s * 1e9).round() as i64;
    v.sort_by(|a, b| {
        key(b.1)
            .cmp(&key(a.1))
            .then_with(|| a.0.as_str().cmp(b.0.as_str()))
    });
    v
}

/// BM25 over every document in `docs` (statistics from the whole corpus,
/// scores only for documents passing `f`), positive scores only.
pub fn bm25(docs: &[Surrogate], q: &str, f: &FilterSet) -> Vec<(PaperId, f64)> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|d| terms(&d.text)).collect();
    let n = docs.len() as f64;
    let avgdl = if docs.is_empty() {
        0.0
    } else {
        tokenized.iter().map(Vec::len).sum::<usize>() as f64 / n
    };
    let query: BTreeSet<String> = terms(q).into_iter().collect();
    let mut out = Vec::new();
    for (d, toks) in docs.iter().zip(&tokenized) {
        if !passes(d, f) {
            continue;
        }
        let mut score = 0.0;
        for t in &query {
            let df = tokenized.iter().filter(|ts| ts.contains(t)).count() as f64;
            if df == 0.0 {
                continue;
            }
            let tf = toks.iter().filter(|x| *x == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            let norm = if avgdl > 0.0 {
                toks.len() as f64 / avgdl
            } else {
                0.0
            };
            score += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * norm));
        }
        if score > 0.0 {
            out.push((d.paper_id.clone(), score));
        }
    }
    sorted(out)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Exhaustive cosine similarity, positive scores only.
pub fn cosine_ranking(
    docs: &[Surrogate],
    embedder: &dyn Embedder,
    q: &str,
    f: &FilterSet,
) -> Vec<(PaperId, f64)> {
    let qv = embedder.embed(q);
    let out = docs
        .iter()
        .filter(|d| passes(d, f))
        .map(|d| (d.paper_id.clone(), cosine(&qv, &embedder.embed(&d.text))))
        .filter(|(_, s)| *s > 0.0)
        .collect();
    sorted(out)
}

/// Σ 1/(60 + rank) over the given orderings.
pub fn rrf(rankings: &[Vec<PaperId>]) -> Vec<(PaperId, f64)> {
    let mut acc: BTreeMap<PaperId, f64> = BTreeMap::new();
    for r in rankings {
        for (i, id) in r.iter().enumerate() {
            *acc.entry(id.clone()).or_default() += 1.0 / (RRF_K + (i + 1) as f64);
        }
    }
    sorted(acc.into_iter().collect())
}

/// Whether two rankings agree: same length, scores equal within `eps` at
/// every position, and identical ids except inside runs of tied scores,
/// where the id sets must match.
pub fn same_ranking(
    got: &[(PaperId, f64)],
    want: &[(PaperId, f64)],
    eps: f64,
) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("length {} != {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if (g.1 - w.1).abs() > eps * w.1.abs().max(1.0) {
            return Err(format!("position {i}: score {} != {}", g.1, w.1));
        }
    }
    let mut i = 0;
    while i < want.len() {
        let mut j = i + 1;
        while j < want.len() && (want[j].1 - want[i].1).abs() <= eps * want[i].1.abs().max(1.0) {
            j += 1;
        }
        if j - i == 1 {
            if got[i].0 != want[i].0 {
                return Err(format!("position {i}: {} != {}", got[i].0, want[i].0));
            }
        } else {
            let a: BTreeSet<_> = got[i..j].iter().map(|x| &x.0).collect();
            let b: BTreeSet<_> = want[i..j].iter().map(|x| &x.0).collect();
            if a != b {
                return Err(format!("tie group at {i}..{j} differs"));
            }
        }
        i = j;
    }
    Ok(())
}
