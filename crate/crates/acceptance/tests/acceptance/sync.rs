use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use paperdesk_core::ingest::{
    AcquireOptions, ArtifactSource, IngestError, MetadataEntry, PreconvertedConverter,
};
use paperdesk_core::record::AuthorEntry;
use paperdesk_core::retrieval::{HashedEmbedder, SearchIndex};
use paperdesk_core::store::{MemoryStore, RecordStore};
use paperdesk_core::sync::{SyncReport, SyncState, Syncer};
use paperdesk_core::{FixedClock, PaperId};
use paperdesk_service::{AccessService, ApiRequest};
use paperdesk_testkit::{corpus, fixture_now, MemoryFetcher, VecFeed};

use crate::common::{ensure, settings, tokens};

/// Fixture artifacts that panic on the Nth fetch when armed.
struct CrashingFetcher {
    inner: MemoryFetcher,
    crash_at: AtomicUsize,
    calls: AtomicUsize,
}

impl ArtifactSource for CrashingFetcher {
    fn html(&self, id: &PaperId) -> Result<Option<String>, IngestError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if self.crash_at.load(Ordering::SeqCst) == n {
            panic!("simulated crash at fetch {n}");
        }
        self.inner.html(id)
    }

    fn pdf(&self, id: &PaperId) -> Result<Option<PathBuf>, IngestError> {
        self.inner.pdf(id)
    }

    fn markdown(&self, id: &PaperId) -> Result<Option<String>, IngestError> {
        self.inner.markdown(id)
    }
}

struct Desk {
    feed: VecFeed,
    fetcher: CrashingFetcher,
    store: Arc<MemoryStore>,
    index: Arc<SearchIndex>,
    clock: Arc<FixedClock>,
    state: tempfile::TempDir,
}

impl Desk {
    fn new(fetcher: MemoryFetcher) -> Self {
        let clock = Arc::new(FixedClock::new(fixture_now()));
        Desk {
            feed: VecFeed::new(corpus().entries()),
            fetcher: CrashingFetcher {
                inner: fetcher,
                crash_at: AtomicUsize::new(0),
                calls: AtomicUsize::new(0),
            },
            store: Arc::new(MemoryStore::new()),
            index: Arc::new(SearchIndex::with_clock(
                Arc::new(HashedEmbedder::default()),
                clock.clone(),
            )),
            clock,
            state: tempfile::tempdir().unwrap(),
        }
    }

    fn run(&self) -> Result<SyncReport, String> {
        let enricher = corpus().enricher();
        Syncer {
            feed: &self.feed,
            fetcher: &self.fetcher,
            converter: &PreconvertedConverter,
            store: self.store.as_ref(),
            index: &self.index,
            enricher: &enricher,
            clock: self.clock.as_ref(),
            acquire: AcquireOptions::default(),
            state_dir: self.state.path().to_path_buf(),
            index_dir: None,
        }
        .run()
        .map_err(|e| e.to_string())
    }

    fn contents(&self) -> (BTreeMap<String, String>, Vec<String>) {
        let records = self
            .store
            .ids()
            .unwrap()
            .into_iter()
            .map(|id| {
                (
                    id.to_string(),
                    self.store.get(&id).unwrap().unwrap().to_canonical_json(),
                )
            })
            .collect();
        let mut surrogates: Vec<String> = self
            .index
            .snapshot()
            .surrogates()
            .map(|s| serde_json::to_string(s).unwrap())
            .collect();
        surrogates.sort();
        (records, surrogates)
    }

    fn state_json(&self) -> String {
        let s = SyncState::load(&self.state.path().join("sync-state.json")).unwrap();
        serde_json::to_string(&s.watermark.last_update_at).unwrap()
            + &serde_json::to_string(&s.retry).unwrap()
    }
}

fn counts(r: &SyncReport) -> (usize, usize, usize) {
    (r.new, r.updated, r.failed)
}

pub fn sync_properties() -> Result<String, String> {
    let n = corpus().entries().len();

    // Double run.
    let desk = Desk::new(corpus().fetcher());
    let first = desk.run()?;
    ensure(counts(&first) == (n, 0, 0), || {
        format!("first run {first:?}")
    })?;
    let (contents, state) = (desk.contents(), desk.state_json());
    desk.clock.advance_secs(3_600);
    let second = desk.run()?;
    ensure(
        counts(&second) == (0, 0, 0) && second.unchanged == 0,
        || format!("second run {second:?}"),
    )?;
    ensure(desk.contents() == contents, || {
        "second run changed the store or index".into()
    })?;
    ensure(desk.state_json() == state, || {
        "second run moved the watermark".into()
    })?;

    // Crash at assorted points, then rerun.
    let crash_points = [1, 2, n / 3, n / 2, n - 1, n];
    for at in crash_points {
        let d = Desk::new(corpus().fetcher());
        d.fetcher.crash_at.store(at, Ordering::SeqCst);
        let hook = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let crashed = catch_unwind(AssertUnwindSafe(|| d.run()));
        std::panic::set_hook(hook);
        ensure(crashed.is_err(), || {
            format!("crash point {at} never reached")
        })?;
        d.fetcher.crash_at.store(0, Ordering::SeqCst);
        d.run()?;
        ensure(d.contents() == contents, || {
            format!("crash at fetch {at}: rerun did not converge")
        })?;
        let again = d.run()?;
        ensure(counts(&again) == (0, 0, 0), || {
            format!("crash at fetch {at}: third run {again:?}")
        })?;
    }

    // A paper added upstream is retrievable through the service after one run.
    let id = PaperId::arxiv("2506.00042").unwrap();
    let mut fetcher = corpus().fetcher();
    fetcher.insert_markdown(
        &id,
        "# Quasiperiodic tiling codes\n\n## 1. Introduction\n\nQuasiperiodic tiling codes give erasure \
         resilience.\n\n## 2. Construction\n\nPenrose substitution rules generate the code words.\n",
    );
    let desk = Desk::new(fetcher);
    desk.run()?;
    let svc = AccessService::builder(
        desk.store.clone() as Arc<dyn RecordStore>,
        desk.index.clone(),
    )
    .tokens(tokens())
    .clock(desk.clock.clone())
    .settings(settings())
    .build();
    let search = || {
        svc.handle(&ApiRequest::new(
            "/arxiv",
            &[
                ("type", "retrieve"),
                ("q", "quasiperiodic tiling"),
                ("limit", "1"),
            ],
            Some("alpha"),
        ))
        .json()
    };
    let head = || {
        svc.handle(&ApiRequest::new(
            "/arxiv",
            &[("type", "head"), ("id", id.as_str())],
            Some("alpha"),
        ))
    };
    ensure(
        search()["data"]["hits"][0]["arxiv_id"] != id.as_str(),
        || "paper visible before sync".into(),
    )?;
    ensure(head().status == 404, || "head served before sync".into())?;
    let watermark = SyncState::load(&desk.state.path().join("sync-state.json"))
        .unwrap()
        .watermark
        .last_update_at;
    desk.feed.upsert(MetadataEntry {
        paper_id: id.clone(),
        title: "Quasiperiodic tiling codes".into(),
        abstract_text: "Quasiperiodic tiling codes built from Penrose substitution.".into(),
        authors: vec![AuthorEntry::named("Ada Byron")],
        categories: vec!["cs.IT".into()],
        publish_at: fixture_now(),
        update_at: watermark.plus_secs(60),
        src_url: id.landing_url(),
    });
    desk.clock.advance_secs(86_400);
    let r = desk.run()?;
    ensure(counts(&r) == (1, 0, 0), || format!("freshness run {r:?}"))?;
    let top = search();
    ensure(top["data"]["hits"][0]["arxiv_id"] == id.as_str(), || {
        format!("not retrievable after sync: {top}")
    })?;
    ensure(head().status == 200, || "head not served after sync".into())?;

    Ok(format!(
        "{n} entries, double run no-op, {} crash points converge, new paper retrievable",
        crash_points.len()
    ))
}
