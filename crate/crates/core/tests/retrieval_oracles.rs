use std::collections::BTreeSet;
use std::sync::Arc;

use paperdesk_core::retrieval::{
    reciprocal_rank_fusion, Embedder, FilterSet, HashedEmbedder, Mode, Page, RetrievalQuery,
    SearchIndex, RRF_K,
};
use paperdesk_core::PaperId;
use paperdesk_testkit::oracle::{bm25, cosine_ranking, passes, rrf, same_ranking};
use paperdesk_testkit::random;
use proptest::prelude::*;

const EPS: f64 = 1e-9;

fn build(seed: u64, n: usize) -> (Vec<paperdesk_core::retrieval::Surrogate>, SearchIndex) {
    let mut rng = random::rng(seed);
    let docs = random::surrogates(&mut rng, n);
    let index = SearchIndex::new(Arc::new(HashedEmbedder::default()));
    index.upsert_many(docs.clone());
    (docs, index)
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rankings_match_brute_force(seed in any::<u64>()) {
        let (docs, index) = build(seed, 50);
        let embedder = HashedEmbedder::default();
        let mut rng = random::rng(seed ^ 0xabcd);
        for _ in 0..20 {
            let q = random::query(&mut rng);
            let f = random::filters(&mut rng);
            let lex = bm25(&docs, &q, &f);
            let dense = cosine_ranking(&docs, &embedder, &q, &f);
            prop_assert_eq!(same_ranking(&ranking(&index, Mode::Lexical, &q, &f), &lex, EPS), Ok(()));
            prop_assert_eq!(same_ranking(&ranking(&index, Mode::Dense, &q, &f), &dense, EPS), Ok(()));
            let fused = rrf(&[
                lex.iter().map(|x| x.0.clone()).collect(),
                dense.iter().map(|x| x.0.clone()).collect(),
            ]);
            prop_assert_eq!(same_ranking(&ranking(&index, Mode::Hybrid, &q, &f), &fused, EPS), Ok(()));
        }
    }

    #[test]
    fn filters_are_sound_and_anti_monotone(seed in any::<u64>()) {
        let (docs, index) = build(seed, 50);
        let mut rng = random::rng(seed.rotate_left(7));
        for _ in 0..20 {
            let q = random::query(&mut rng);
            let f = random::filters(&mut rng);
            let g = random::tighten(&mut rng, &f);
            let wide = ranking(&index, Mode::Hybrid, &q, &f);
            let narrow = ranking(&index, Mode::Hybrid, &q, &g);
            for (id, _) in &wide {
                let d = docs.iter().find(|d| &d.paper_id == id).unwrap();
                prop_assert!(passes(d, &f));
            }
            let wide_ids: BTreeSet<_> = wide.iter().map(|x| &x.0).collect();
            prop_assert!(narrow.iter().all(|(id, _)| wide_ids.contains(id)));
        }
    }

    #[test]
    fn pages_concatenate_to_the_full_ordering(seed in any::<u64>(), limit in 1usize..7) {
        let (_, index) = build(seed, 30);
        let q = random::query(&mut random::rng(seed));
        let full = index.search(&RetrievalQuery::new(Mode::Hybrid, q.clone()).with_page(Page::all())).unwrap();
        let mut paged = Vec::new();
        let mut offset = 0;
        loop {
            let page = Page::new(offset, limit).unwrap();
            let r = index.search(&RetrievalQuery::new(Mode::Hybrid, q.clone()).with_page(page)).unwrap();
            prop_assert_eq!(r.total, full.total);
            if r.hits.is_empty() {
                break;
            }
            offset += r.hits.len();
            paged.extend(r.hits);
        }
        prop_assert_eq!(paged, full.hits);
    }
}

#[test]
fn fusion_of_a_c_b_example() {
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
        (c, 1.0 / 63.0 + 1.0 / 61.0),
        (b, 1.0 / 62.0 + 1.0 / 63.0),
    ];
    assert_eq!(fused.len(), 3);
    for ((gi, gs), (wi, ws)) in fused.iter().zip(&want) {
        assert_eq!(gi, wi);
        assert!((gs - ws).abs() < 1e-15);
    }
}

#[test]
fn embedder_vectors_are_unit_or_zero() {
    let e = HashedEmbedder::default();
    for text in ["memory", "global memory retrieval", "", "!!!"] {
        let v = e.embed(text);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12, "{text}: {norm}");
    }
}
