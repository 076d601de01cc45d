//! Random inputs for property and oracle tests.

use paperdesk_core::retrieval::{FilterSet, Surrogate};
use paperdesk_core::{PaperId, Timestamp};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small vocabulary so that random documents share terms and produce ties.
pub const VOCAB: &[&str] = &[
    "memory",
    "retrieval",
    "graph",
    "neural",
    "protein",
    "policy",
    "context",
    "token",
    "attention",
    "sparse",
    "dense",
    "hybrid",
    "ranking",
    "corpus",
    "query",
    "agent",
    "budget",
    "section",
    "summary",
    "citation",
    "benchmark",
    "latency",
    "cache",
    "index",
    "vector",
    "lexical",
    "fusion",
    "filter",
    "venue",
    "author",
];
const CATEGORIES: &[&str] = &["cs.CL", "cs.AI", "cs.LG", "cs.IR", "cs.CV", "stat.ML"];
const AUTHORS: &[&str] = &[
    "Ada Byron",
    "Alan Turing",
    "Grace Hopper",
    "Edsger Dijkstra",
    "Barbara Liskov",
];
const VENUES: &[&str] = &["The Web Conference", "NeurIPS", "ACL", "SIGIR"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn words(rng: &mut impl Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn surrogates(rng: &mut impl Rng, n: usize) -> Vec<Surrogate> {
    (0..n)
        .map(|i| {
            let cats = (0..rng.random_range(1..=2))
                .map(|_| CATEGORIES.choose(rng).unwrap().to_string())
                .collect();
            let authors = (0..rng.random_range(1..=3))
                .map(|_| AUTHORS.choose(rng).unwrap().to_string())
                .collect();
            Surrogate {
                paper_id: PaperId::arxiv(format!("2401.{:05}", 10_000 + i)).unwrap(),
                text: words(rng, 3, 25),
                categories: cats,
                authors,
                publish_at: Timestamp::from_unix(1_672_531_200 + rng.random_range(0..63_072_000)),
                citations: rng.random_bool(0.7).then(|| rng.random_range(0..200)),
                venue: rng
                    .random_bool(0.5)
                    .then(|| VENUES.choose(rng).unwrap().to_string()),
            }
        })
        .collect()
}

pub fn query(rng: &mut impl Rng) -> String {
    words(rng, 1, 4)
}

pub fn filters(rng: &mut impl Rng) -> FilterSet {
    let mut f = FilterSet::default();
    if rng.random_bool(0.4) {
        f.categories = (0..rng.random_range(1..=2))
            .map(|_| CATEGORIES.choose(rng).unwrap().to_string())
            .collect();
    }
    if rng.random_bool(0.3) {
        f.authors = vec![AUTHORS.choose(rng).unwrap().to_lowercase()];
    }
    if rng.random_bool(0.4) {
        let a = 1_672_531_200 + rng.random_range(0..63_072_000);
        let b = a + rng.random_range(0..31_536_000);
        f.publish_from = Some(Timestamp::from_unix(a));
        f.publish_to = Some(Timestamp::from_unix(b));
    }
    if rng.random_bool(0.3) {
        f.min_citations = Some(rng.random_range(0..150));
    }
    if rng.random_bool(0.3) {
        f.venue_contains = Some(VENUES.choose(rng).unwrap()[..3].to_lowercase());
    }
    f
}

/// `f` with one extra clause added.
pub fn tighten(rng: &mut impl Rng, f: &FilterSet) -> FilterSet {
    let mut g = f.clone();
    match rng.random_range(0..4) {
        0 => g.authors.push(AUTHORS.choose(rng).unwrap().to_string()),
        1 => g.min_citations = Some(g.min_citations.unwrap_or(0).max(rng.random_range(0..150))),
        2 => {
            let extra = Timestamp::from_unix(rng.random_range(1_672_531_200..1_735_689_600));
            let mut from = g.publish_from.map_or(extra, |p| p.max(extra));
            if let Some(to) = g.publish_to {
                from = from.min(to);
            }
            g.publish_from = Some(from);
        }
        _ => {
            if g.categories.is_empty() {
                g.categories = vec![CATEGORIES.choose(rng).unwrap().to_string()];
            } else {
                g.categories.truncate(1);
            }
        }
    }
    g
}

const FUZZ_LINES: &[&str] = &[
    "",
    "plain text line",
    "# Heading",
    "## Sub heading ##",
    "####### too deep",
    "#nospace",
    "   ### indented",
    "    # code indent",
    "```",
    "~~~",
    "Setext title",
    "=====",
    "-----",
    "- list item",
    "> quote",
    "| a | b |",
    "1. numbered",
    "text with # inside",
    "#",
    "## ",
    "Ünïcode ✓ line",
    "\t# tab heading",
];

/// Random markdown-like document stressing heading detection.
pub fn heading_fuzz_doc(rng: &mut impl Rng) -> String {
    let n = rng.random_range(0..60);
    let mut lines: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let base = *FUZZ_LINES.choose(rng).unwrap();
        if rng.random_bool(0.2) {
            lines.push(format!("{base} {}", words(rng, 1, 3)));
        } else {
            lines.push(base.to_string());
        }
    }
    let sep = if rng.random_bool(0.2) { "\r\n" } else { "\n" };
    lines.join(sep)
}
