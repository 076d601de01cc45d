use std::collections::BTreeSet;
use std::sync::Arc;

use paperdesk_core::ingest::{normalize_markdown, segment_sections, SectionTree};
use paperdesk_core::retrieval::{
    reciprocal_rank_fusion, FilterSet, HashedEmbedder, Mode, Page, RetrievalQuery, SearchIndex,
    RRF_K,
};
use paperdesk_core::{project_view, PaperId, PaperRecord, ViewKind};
use paperdesk_service::ApiRequest;
use paperdesk_testkit::oracle::{bm25, cosine_ranking, passes, rrf, same_ranking};
use paperdesk_testkit::{corpus, random, DEMO_ID};
use serde_json::Value;

use crate::common::{ensure, fixture_store, service};

fn keys(v: &Value) -> BTreeSet<&str> {
    v.as_object()
        .map(|m| m.keys().map(String::as_str).collect())
        .unwrap_or_default()
}

pub fn schema_fidelity() -> Result<String, String> {
    let svc = service(fixture_store(Default::default()), true);
    // Anonymous: the demo paper is on the default allowlist.
    let resp = svc.handle(&ApiRequest::new(
        "/arxiv",
        &[("type", "head"), ("id", DEMO_ID)],
        None,
    ));
    ensure(resp.status == 200, || format!("status {}", resp.status))?;
    let body = resp.json();
    let head = &body["data"];
    let want: BTreeSet<&str> = [
        "arxiv_id",
        "src_url",
        "title",
        "abstract",
        "authors",
        "token_count",
        "venue",
        "journal_name",
        "citations",
        "sections",
        "categories",
        "publish_at",
        "keywords",
        "tldr",
        "github_url",
    ]
    .into();
    ensure(keys(head) == want, || {
        format!("head fields {:?}", keys(head))
    })?;
    let authors = head["authors"].as_array().ok_or("authors is not a list")?;
    ensure(
        !authors.is_empty() && authors.iter().all(|a| a["orgs"].is_array()),
        || "authors[].orgs missing".into(),
    )?;
    let sections = head["sections"]
        .as_array()
        .ok_or("sections is not a list")?;
    let section_keys: BTreeSet<&str> = ["name", "idx", "tldr", "token_count"].into();
    for s in sections {
        ensure(keys(s) == section_keys, || {
            format!("section fields {:?}", keys(s))
        })?;
    }
    ensure(head["citations"] == 63, || {
        format!("citations {}", head["citations"])
    })?;
    ensure(head["venue"] == "The Web Conference", || {
        format!("venue {}", head["venue"])
    })?;
    ensure(sections[0]["name"] == "1. Introduction", || {
        format!("first section {}", sections[0]["name"])
    })?;
    Ok(format!(
        "{} fields, {} sections",
        want.len(),
        sections.len()
    ))
}

fn partition_violation(body: &str, tree: &SectionTree) -> Option<String> {
    if tree.reconstruct(body) != body {
        return Some("reconstruction differs from the body".into());
    }
    let mut at = tree.prefix.end;
    if tree.prefix.start != 0 {
        return Some("prefix does not start at 0".into());
    }
    for (i, s) in tree.sections.iter().enumerate() {
        if s.heading.start != at || s.content.start != s.heading.end {
            return Some(format!("section {i} is not contiguous"));
        }
        if s.body.start < s.content.start || s.body.end > s.content.end {
            return Some(format!("section {i} body escapes its content"));
        }
        at = s.content.end;
    }
    (at != body.len()).then(|| format!("spans end at {at}, body has {} bytes", body.len()))
}

pub fn segmentation_partition() -> Result<String, String> {
    let mut checked = 0;
    let mut sections = 0;
    for p in corpus().all_papers() {
        let body = normalize_markdown(&p.markdown).map_err(|e| e.to_string())?;
        let tree = segment_sections(&body);
        if let Some(v) = partition_violation(&body, &tree) {
            return Err(format!("{}: {v}", p.meta.paper_id));
        }
        ensure(!tree.sections.is_empty(), || {
            format!("{}: no sections found", p.meta.paper_id)
        })?;
        sections += tree.sections.len();
        checked += 1;
    }
    ensure(checked >= 50, || format!("only {checked} fixtures"))?;
    let mut rng = random::rng(0x5e9);
    for i in 0..200 {
        let doc = random::heading_fuzz_doc(&mut rng);
        let tree = segment_sections(&doc);
        if let Some(v) = partition_violation(&doc, &tree) {
            return Err(format!("fuzz doc {i}: {v}\n{doc:?}"));
        }
        checked += 1;
    }
    Ok(format!("{checked} documents, {sections} fixture sections"))
}

fn record_with_body(chars: usize) -> PaperRecord {
    let mut draft = corpus()
        .records()
        .iter()
        .find(|r| r.paper_id().as_str() == DEMO_ID)
        .unwrap()
        .clone()
        .into_draft();
    draft.body = "a".repeat(chars);
    draft.sections.clear();
    PaperRecord::new(draft).unwrap()
}

pub fn preview_contract() -> Result<String, String> {
    for (len, want_len, want_flag) in [
        (0, 0, false),
        (9_999, 9_999, false),
        (10_000, 10_000, false),
        (10_001, 10_000, true),
        (25_000, 10_000, true),
    ] {
        let r = record_with_body(len);
        let v = project_view(&r, &ViewKind::Preview, 10_000)
            .map_err(|e| e.to_string())?
            .data;
        let got = v["preview"].as_str().ok_or("preview missing")?;
        ensure(got.chars().count() == want_len, || {
            format!("{len}: prefix {} chars", got.chars().count())
        })?;
        ensure(r.body().starts_with(got), || format!("{len}: not a prefix"))?;
        ensure(v["is_truncated"] == want_flag, || {
            format!("{len}: is_truncated {}", v["is_truncated"])
        })?;
    }
    Ok("5 lengths".into())
}

fn ranking(index: &SearchIndex, mode: Mode, q: &str, f: &FilterSet) -> Vec<(PaperId, f64)> {
    let query = RetrievalQuery::new(mode, q)
        .with_filters(f.clone())
        .with_page(Page::all());
    index
        .search(&query)
        .unwrap()
        .hits
        .into_iter()
        .map(|h| (h.paper_id, h.score))
        .collect()
}

const EPS: f64 = 1e-9;

pub fn retrieval_oracles() -> Result<String, String> {
    let embedder = HashedEmbedder::default();
    let mut hits = 0;
    for corpus_seed in 0..5u64 {
        let mut rng = random::rng(0xacc0 + corpus_seed);
        let docs = random::surrogates(&mut rng, 50);
        let index = SearchIndex::new(Arc::new(HashedEmbedder::default()));
        index.upsert_many(docs.clone());
        for qi in 0..20 {
            let q = random::query(&mut rng);
            let f = if qi % 2 == 0 {
                FilterSet::default()
            } else {
                random::filters(&mut rng)
            };
            let ctx = |mode: &str, e: String| {
                format!("corpus {corpus_seed} query {qi} ({q:?}) {mode}: {e}")
            };
            let lex = bm25(&docs, &q, &f);
            let dense = cosine_ranking(&docs, &embedder, &q, &f);
            same_ranking(&ranking(&index, Mode::Lexical, &q, &f), &lex, EPS)
                .map_err(|e| ctx("lexical", e))?;
            same_ranking(&ranking(&index, Mode::Dense, &q, &f), &dense, EPS)
                .map_err(|e| ctx("dense", e))?;
            let fused = rrf(&[
                lex.iter().map(|x| x.0.clone()).collect(),
                dense.iter().map(|x| x.0.clone()).collect(),
            ]);
            let got = ranking(&index, Mode::Hybrid, &q, &f);
            same_ranking(&got, &fused, EPS).map_err(|e| ctx("hybrid", e))?;
            hits += got.len();
        }
    }

    // [a, b, c] fused with [c, a, b] gives a, c, b.
    let id = |s: &str| PaperId::arxiv(format!("2401.0000{s}")).unwrap();
    let (a, b, c) = (id("1"), id("2"), id("3"));
    let fused = reciprocal_rank_fusion(
        &[
            &[a.clone(), b.clone(), c.clone()],
            &[c.clone(), a.clone(), b.clone()],
        ],
        RRF_K,
    );
    let want = [
        (a, 1.0 / 61.0 + 1.0 / 62.0),
        (c, 1.0 / 61.0 + 1.0 / 63.0),
        (b, 1.0 / 62.0 + 1.0 / 63.0),
    ];
    ensure(fused.len() == 3, || format!("fused {fused:?}"))?;
    for ((gi, gs), (wi, ws)) in fused.iter().zip(&want) {
        ensure(gi == wi && (gs - ws).abs() < 1e-15, || {
            format!("fused {fused:?}")
        })?;
    }
    Ok(format!(
        "100 queries, {hits} hybrid hits compared, [a,c,b] exact"
    ))
}

pub fn filter_properties() -> Result<String, String> {
    let mut pairs = 0;
    let mut narrowed = 0;
    for corpus_seed in 0..10u64 {
        let mut rng = random::rng(0xf11 + corpus_seed);
        let docs = random::surrogates(&mut rng, 50);
        let index = SearchIndex::new(Arc::new(HashedEmbedder::default()));
        index.upsert_many(docs.clone());
        for _ in 0..100 {
            let q = random::query(&mut rng);
            let f = random::filters(&mut rng);
            let g = random::tighten(&mut rng, &f);
            pairs += 1;
            for mode in [Mode::Lexical, Mode::Dense, Mode::Hybrid] {
                let wide = ranking(&index, mode, &q, &f);
                for (id, _) in &wide {
                    let d = docs.iter().find(|d| &d.paper_id == id).unwrap();
                    ensure(passes(d, &f), || format!("{id} violates {f:?}"))?;
                }
                let wide_ids: BTreeSet<&PaperId> = wide.iter().map(|x| &x.0).collect();
                let narrow = ranking(&index, mode, &q, &g);
                ensure(narrow.iter().all(|(id, _)| wide_ids.contains(id)), || {
                    format!("tightening {f:?} to {g:?} added results for {q:?}")
                })?;
                narrowed += usize::from(narrow.len() < wide.len());
            }
        }
    }
    Ok(format!(
        "{pairs} pairs x 3 modes, {narrowed} strictly narrowed, 0 violations"
    ))
}
