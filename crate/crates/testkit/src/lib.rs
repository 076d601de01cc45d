//! Deterministic synthetic corpus used by tests, the acceptance suite and
//! the committed `fixtures/` directory: 50 markdown arXiv-style papers (a
//! few also rendered as HTML), two PMC papers, a fully enriched demo record,
//! scholarly/social fixture feeds and planted deep-search / deep-research
//! tasks.

mod demo;
mod gen;
pub mod oracle;
pub mod random;
mod sources;

use std::fs;
use std::io;
use std::path::Path;
use std::sync::{Arc, LazyLock};

use paperdesk_core::enrich::{Enricher, FixtureScholarly, FixtureSocial};
use paperdesk_core::ingest::{build_record, AcquireOptions, MetadataEntry, PreconvertedConverter};
use paperdesk_core::retrieval::{SearchIndex, Surrogate};
use paperdesk_core::store::RecordStore;
use paperdesk_core::{Corpus, PaperId, PaperRecord, Timestamp, WordPunctEstimator};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use demo::{demo_record, DEMO_ID};
pub use gen::{render_html, FixturePaper, Topic, METRICS, TOPICS};
pub use sources::{MemoryFetcher, VecFeed};

pub const SEED: u64 = 20_240_909;
pub const PAPER_COUNT: usize = 50;

/// Instant used as "now" whenever fixtures are ingested.
pub fn fixture_now() -> Timestamp {
    "2025-06-30T00:00:00".parse().unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTask {
    pub query: String,
    pub categories: Vec<String>,
    pub publish_from: String,
    pub publish_to: String,
    /// Phrases that must appear in the paper's header fields.
    pub phrases: Vec<String>,
    pub k: usize,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchTask {
    pub question: String,
    pub target: String,
    /// Value that a correct answer contains.
    pub expected: String,
    /// Section holding the value.
    pub section: String,
}

pub struct FixtureCorpus {
    pub papers: Vec<FixturePaper>,
    pub pmc: Vec<FixturePaper>,
    pub demo: PaperRecord,
    pub scholarly: Value,
    pub social: Value,
    pub search_tasks: Vec<SearchTask>,
    pub research_tasks: Vec<ResearchTask>,
}

const PHRASES: &[&str] = &[
    "contrastive lattice pooling",
    "spectral anchor routing",
    "gradient echo buffers",
    "sparse prism attention",
    "recursive ledger memory",
    "latent relay distillation",
    "orbital token mixing",
    "causal mirror sampling",
    "elastic shard replay",
    "phase-locked retrieval",
];

const VENUES: &[(&str, &str)] = &[
    (
        "NeurIPS",
        "Advances in Neural Information Processing Systems",
    ),
    (
        "ACL",
        "Proceedings of the Annual Meeting of the Association for Computational Linguistics",
    ),
    (
        "ICML",
        "Proceedings of the International Conference on Machine Learning",
    ),
    (
        "SIGIR",
        "Proceedings of the International ACM SIGIR Conference",
    ),
    ("Bioinformatics", "Bioinformatics"),
];

fn date(y: i32, m: u32, d: u32) -> Timestamp {
    format!("{y:04}-{m:02}-{d:02}").parse().unwrap()
}

fn month_bounds(t: Timestamp) -> (String, String) {
    let d = t.date().to_string();
    let (y, m): (i32, u32) = (d[..4].parse().unwrap(), d[5..7].parse().unwrap());
    let last = match m {
        2 if y % 4 == 0 => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    };
    (
        format!("{y:04}-{m:02}-01"),
        format!("{y:04}-{m:02}-{last:02}"),
    )
}

fn arxiv_id(publish: Timestamp, serial: usize) -> PaperId {
    let d = publish.date().to_string();
    PaperId::arxiv(format!("{}{}.{:05}", &d[2..4], &d[5..7], 10_000 + serial)).unwrap()
}

struct Plan {
    topic: usize,
    publish: Timestamp,
}

pub fn generate(seed: u64) -> FixtureCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = gen::Names::new();

    let mut plans: Vec<Plan> = (0..PAPER_COUNT)
        .map(|_| Plan {
            topic: rng.random_range(0..TOPICS.len()),
            publish: date(
                rng.random_range(2023..=2025),
                rng.random_range(1..=6),
                rng.random_range(1..=28),
            ),
        })
        .collect();

    // Deep-search plants: target i, distractors 10+i (phrase, other
    // category), 20+i (phrase, same category, a year earlier), 30+i (same
    // category and month, no phrase).
    for i in 0..PHRASES.len() {
        let target_topic = plans[i].topic;
        let cat = TOPICS[target_topic].categories[0];
        let other = (0..TOPICS.len())
            .map(|k| (target_topic + 1 + k) % TOPICS.len())
            .find(|k| !TOPICS[*k].categories.contains(&cat))
            .unwrap();
        let target_day = rng.random_range(3..=20);
        let target = date(2024, rng.random_range(1..=12), target_day);
        plans[i].publish = target;
        plans[10 + i].topic = other;
        plans[20 + i].topic = target_topic;
        plans[20 + i].publish = target.plus_secs(-365 * 86_400);
        plans[30 + i].topic = target_topic;
        plans[30 + i].publish = target.plus_secs(3 * 86_400);
    }

    let mut papers: Vec<FixturePaper> = plans
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let spec = gen::PaperSpec {
                id: arxiv_id(p.publish, i),
                topic: p.topic,
                publish_at: p.publish,
                method: names.method(&mut rng),
                dataset: names.dataset(&mut rng),
            };
            gen::generate_paper(&mut rng, spec)
        })
        .collect();

    let mut search_tasks = Vec::new();
    for (i, phrase) in PHRASES.iter().enumerate() {
        for j in [i, 10 + i, 20 + i] {
            let p = &mut papers[j];
            p.meta
                .abstract_text
                .push_str(&format!(" We introduce {phrase} as the core mechanism."));
            p.planted_phrase = Some(phrase.to_string());
        }
        let t = &papers[i];
        let (from, to) = month_bounds(t.meta.publish_at);
        search_tasks.push(SearchTask {
            query: format!("{phrase} {}", TOPICS[t.topic].name),
            categories: vec![t.meta.categories[0].clone()],
            publish_from: from,
            publish_to: to,
            phrases: vec![phrase.to_string()],
            k: 3,
            target: t.meta.paper_id.as_str().to_string(),
        });
    }

    for (i, p) in papers.iter_mut().enumerate() {
        if i % 10 == 3 {
            p.html = Some(render_html(&p.meta.title, &p.markdown));
        }
    }

    let research_tasks = papers[40..50]
        .iter()
        .map(|p| ResearchTask {
            question: format!(
                "What {} does {} reach on {}?",
                p.metric, p.method, p.dataset
            ),
            target: p.meta.paper_id.as_str().to_string(),
            expected: p.value.clone(),
            section: "5. Results".into(),
        })
        .collect();

    let pmc: Vec<FixturePaper> = [(2usize, 1_000_001u32), (9, 1_000_002)]
        .into_iter()
        .map(|(topic, n)| {
            let spec = gen::PaperSpec {
                id: PaperId::pmc(format!("PMC{n}")).unwrap(),
                topic,
                publish_at: date(2024, 3, 1 + n % 20),
                method: names.method(&mut rng),
                dataset: names.dataset(&mut rng),
            };
            gen::generate_paper(&mut rng, spec)
        })
        .collect();

    let mut scholarly = serde_json::Map::new();
    for p in papers.iter().chain(&pmc) {
        if rng.random_bool(0.8) {
            let mut entry = json!({ "citations": rng.random_range(0..50) });
            if rng.random_bool(0.6) {
                let (venue, journal) = VENUES.choose(&mut rng).unwrap();
                entry["venue"] = json!(venue);
                entry["journal_name"] = json!(journal);
            }
            scholarly.insert(p.meta.paper_id.as_str().to_string(), entry);
        }
    }
    scholarly.insert(
        DEMO_ID.into(),
        json!({
            "citations": 63,
            "venue": "The Web Conference",
            "journal_name": "Proceedings of the ACM on Web Conference 2025"
        }),
    );

    let mut social = vec![
        json!({"text": format!("Global memory for long inputs https://arxiv.org/abs/{DEMO_ID}"), "views": 10, "likes": 2, "reposts": 1}),
        json!({"text": format!("arxiv.org/abs/{DEMO_ID} worth a look"), "views": 5, "likes": 0, "reposts": 0}),
    ];
    for p in &papers {
        if !rng.random_bool(0.3) {
            continue;
        }
        for _ in 0..rng.random_range(1..4) {
            social.push(json!({
                "text": format!("New preprint: {}", p.meta.paper_id.landing_url()),
                "views": rng.random_range(0..500),
                "likes": rng.random_range(0..40),
                "reposts": rng.random_range(0..10),
            }));
        }
    }
    let social = Value::Array(social);

    let demo = demo_record(&FixtureSocial::parse(&social.to_string()).unwrap());

    FixtureCorpus {
        papers,
        pmc,
        demo,
        scholarly: Value::Object(scholarly),
        social,
        search_tasks,
        research_tasks,
    }
}

static CORPUS: LazyLock<FixtureCorpus> = LazyLock::new(|| generate(SEED));

pub fn corpus() -> &'static FixtureCorpus {
    &CORPUS
}

impl FixtureCorpus {
    pub fn all_papers(&self) -> impl Iterator<Item = &FixturePaper> {
        self.papers.iter().chain(&self.pmc)
    }

    pub fn entries(&self) -> Vec<MetadataEntry> {
        self.all_papers().map(|p| p.meta.clone()).collect()
    }

    pub fn paper(&self, id: &str) -> Option<&FixturePaper> {
        self.all_papers().find(|p| p.meta.paper_id.as_str() == id)
    }

    pub fn fetcher(&self) -> MemoryFetcher {
        let mut f = MemoryFetcher::default();
        for p in self.all_papers() {
            f.insert_markdown(&p.meta.paper_id, &p.markdown);
            if let Some(h) = &p.html {
                f.insert_html(&p.meta.paper_id, h);
            }
        }
        f
    }

    /// Enricher wired to the fixture scholarly and social feeds.
    pub fn enricher(&self) -> Enricher {
        Enricher {
            scholarly: Some(Arc::new(
                FixtureScholarly::parse(&self.scholarly.to_string()).unwrap(),
            )),
            social: Some(Arc::new(
                FixtureSocial::parse(&self.social.to_string()).unwrap(),
            )),
            ..Enricher::default()
        }
    }

    /// Every fixture paper ingested and enriched, plus the demo record.
    pub fn records(&self) -> &'static [PaperRecord] {
        &RECORDS
    }

    /// Loads all records into `store` and indexes the arXiv ones.
    pub fn load_into(&self, store: &dyn RecordStore, index: &SearchIndex) {
        for r in self.records() {
            store.put(r.clone()).expect("fixture store write");
        }
        index.upsert_many(
            self.records()
                .iter()
                .filter(|r| r.paper_id().corpus() == Corpus::Arxiv)
                .map(Surrogate::from_record),
        );
    }

    /// Writes the on-disk fixture layout.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        let manifest: String = self
            .all_papers()
            .map(|p| manifest_line(&p.meta) + "\n")
            .collect();
        write(dir, "manifest.jsonl", &manifest)?;
        for p in self.all_papers() {
            let id = &p.meta.paper_id;
            let base = format!("{}/{}", id.corpus(), id.as_str());
            write(dir, &format!("{base}.md"), &p.markdown)?;
            if let Some(h) = &p.html {
                write(dir, &format!("{base}.html"), h)?;
            }
        }
        write(dir, "external/scholarly.json", &pretty(&self.scholarly))?;
        write(dir, "external/social.json", &pretty(&self.social))?;
        write(
            dir,
            &format!("records/{}", self.demo.paper_id().record_path()),
            &pretty(&self.demo.to_json_value()),
        )?;
        write(
            dir,
            "tasks/deep_search.json",
            &pretty(&serde_json::to_value(&self.search_tasks).unwrap()),
        )?;
        write(
            dir,
            "tasks/deep_research.json",
            &pretty(&serde_json::to_value(&self.research_tasks).unwrap()),
        )?;
        Ok(())
    }
}

static RECORDS: LazyLock<Vec<PaperRecord>> = LazyLock::new(|| {
    let c = corpus();
    let fetcher = c.fetcher();
    let enricher = c.enricher();
    let now = fixture_now();
    let mut out: Vec<PaperRecord> = c
        .all_papers()
        .map(|p| {
            let mut r = build_record(
                &p.meta,
                &fetcher,
                &PreconvertedConverter,
                &AcquireOptions::default(),
                &WordPunctEstimator,
                now,
            )
            .unwrap_or_else(|e| panic!("fixture {} failed to ingest: {e}", p.meta.paper_id));
            enricher.enrich(&mut r, None, now);
            r
        })
        .collect();
    out.push(c.demo.clone());
    out
});

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).unwrap() + "\n"
}

fn write(dir: &Path, rel: &str, content: &str) -> io::Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)
}

/// One JSON-lines manifest entry.
pub fn manifest_line(m: &MetadataEntry) -> String {
    json!({
        "corpus": m.paper_id.corpus().as_str(),
        "id": m.paper_id.as_str(),
        "title": m.title,
        "abstract": m.abstract_text,
        "authors": m.authors,
        "categories": m.categories,
        "publish_at": m.publish_at.to_string(),
        "update_at": m.update_at.to_string(),
        "src_url": m.src_url,
    })
    .to_string()
}
