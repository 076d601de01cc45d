//! Immutable index snapshots and the swap-on-write handle around them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::dense::{dot, Embedder};
use super::fusion::{reciprocal_rank_fusion, sort_ranking, RRF_K};
use super::lexical::{idf, term_score, tokenize, TermStats};
use super::query::{FilterSet, Mode, ModeScores, Page, RankedHit, RetrievalQuery, SearchResults};
use super::{RetrievalError, Surrogate};
use crate::fsutil::write_atomic;
use crate::id::PaperId;
use crate::time::{Clock, SystemClock, Timestamp};

pub const INDEX_FORMAT_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug)]
pub struct DocEntry {
    pub surrogate: Surrogate,
    pub terms: TermStats,
    pub vector: Vec<f64>,
}

/// Point-in-time index state. Never mutated once published.
#[derive(Debug, Clone)]
pub struct Snapshot {
    docs: BTreeMap<PaperId, Arc<DocEntry>>,
    df: HashMap<String, usize>,
    total_len: usize,
    embedder_tag: String,
    built_at: Timestamp,
    generation: u64,
}

impl Snapshot {
    fn empty(embedder_tag: String, built_at: Timestamp) -> Self {
        Snapshot {
            docs: BTreeMap::new(),
            df: HashMap::new(),
            total_len: 0,
            embedder_tag,
            built_at,
            generation: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn embedder_tag(&self) -> &str {
        &self.embedder_tag
    }

    pub fn built_at(&self) -> Timestamp {
        self.built_at
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn get(&self, id: &PaperId) -> Option<&Surrogate> {
        self.docs.get(id).map(|d| &d.surrogate)
    }

    /// Surrogates in id order.
    pub fn surrogates(&self) -> impl Iterator<Item = &Surrogate> {
        self.docs.values().map(|d| &d.surrogate)
    }

    pub fn avgdl(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.docs.len() as f64
        }
    }

    fn insert(&mut self, entry: DocEntry) {
        self.remove(&entry.surrogate.paper_id.clone());
        for t in entry.terms.tf.keys() {
            *self.df.entry(t.clone()).or_insert(0) += 1;
        }
        self.total_len += entry.terms.len;
        self.docs
            .insert(entry.surrogate.paper_id.clone(), Arc::new(entry));
    }

    fn remove(&mut self, id: &PaperId) -> bool {
        let Some(old) = self.docs.remove(id) else {
            return false;
        };
        for t in old.terms.tf.keys() {
            if let Some(n) = self.df.get_mut(t) {
                *n -= 1;
                if *n == 0 {
                    self.df.remove(t);
                }
            }
        }
        self.total_len -= old.terms.len;
        true
    }

    fn candidates<'a>(&'a self, filters: &'a FilterSet) -> impl Iterator<Item = &'a DocEntry> + 'a {
        self.docs
            .values()
            .map(Arc::as_ref)
            .filter(move |d| filters.matches(&d.surrogate))
    }

    /// Full BM25 ordering over filtered documents with a positive score.
    /// Document frequencies come from the whole index.
    pub fn lexical_ranking(&self, q: &str, filters: &FilterSet) -> Vec<(PaperId, f64)> {
        let terms: BTreeSet<String> = tokenize(q).into_iter().collect();
        let n = self.docs.len();
        let avgdl = self.avgdl();
        let weighted: Vec<(&String, f64)> = terms
            .iter()
            .filter_map(|t| self.df.get(t).map(|df| (t, idf(n, *df))))
            .collect();
        if weighted.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<(PaperId, f64)> = self
            .candidates(filters)
            .filter_map(|d| {
                let score: f64 = weighted
                    .iter()
                    .map(|(t, w)| {
                        term_score(
                            *w,
                            d.terms.tf.get(*t).copied().unwrap_or(0),
                            d.terms.len,
                            avgdl,
                        )
                    })
                    .sum();
                (score > 0.0).then(|| (d.surrogate.paper_id.clone(), score))
            })
            .collect();
        sort_ranking(&mut out);
        out
    }

    /// Full cosine ordering over filtered documents with positive similarity.
    pub fn dense_ranking(&self, query_vec: &[f64], filters: &FilterSet) -> Vec<(PaperId, f64)> {
        let mut out: Vec<(PaperId, f64)> = self
            .candidates(filters)
            .filter_map(|d| {
                let sim = dot(query_vec, &d.vector);
                (sim > 0.0).then(|| (d.surrogate.paper_id.clone(), sim))
            })
            .collect();
        sort_ranking(&mut out);
        out
    }

    pub fn search(
        &self,
        query: &RetrievalQuery,
        embedder: &dyn Embedder,
    ) -> Result<SearchResults, RetrievalError> {
        if query.q.trim().is_empty() {
            return Err(RetrievalError::InvalidQuery("q must not be empty".into()));
        }
        query.filters.validate()?;
        if query.mode != Mode::Lexical && embedder.tag() != self.embedder_tag {
            return Err(RetrievalError::EmbedderVersionMismatch {
                index: self.embedder_tag.clone(),
                query: embedder.tag().to_string(),
            });
        }
        let lexical = || self.lexical_ranking(&query.q, &query.filters);
        let dense = || self.dense_ranking(&embedder.embed(&query.q), &query.filters);
        let ranked: Vec<(PaperId, f64, ModeScores)> = match query.mode {
            Mode::Lexical => lexical()
                .into_iter()
                .map(|(id, s)| {
                    (
                        id,
                        s,
                        ModeScores {
                            lexical: Some(s),
                            dense: None,
                        },
                    )
                })
                .collect(),
            Mode::Dense => dense()
                .into_iter()
                .map(|(id, s)| {
                    (
                        id,
                        s,
                        ModeScores {
                            lexical: None,
                            dense: Some(s),
                        },
                    )
                })
                .collect(),
            Mode::Hybrid => {
                let lex = lexical();
                let den = dense();
                let lex_ids: Vec<PaperId> = lex.iter().map(|(id, _)| id.clone()).collect();
                let den_ids: Vec<PaperId> = den.iter().map(|(id, _)| id.clone()).collect();
                let lex_scores: HashMap<&PaperId, f64> =
                    lex.iter().map(|(id, s)| (id, *s)).collect();
                let den_scores: HashMap<&PaperId, f64> =
                    den.iter().map(|(id, s)| (id, *s)).collect();
                reciprocal_rank_fusion(&[&lex_ids, &den_ids], RRF_K)
                    .into_iter()
                    .map(|(id, s)| {
                        let ms = ModeScores {
                            lexical: lex_scores.get(&id).copied(),
                            dense: den_scores.get(&id).copied(),
                        };
                        (id, s, ms)
                    })
                    .collect()
            }
        };
        Ok(paginate(ranked, query.page))
    }
}

fn paginate(ranked: Vec<(PaperId, f64, ModeScores)>, page: Page) -> SearchResults {
    let total = ranked.len();
    let hits = ranked
        .into_iter()
        .enumerate()
        .skip(page.offset)
        .take(page.limit)
        .map(|(i, (paper_id, score, mode_scores))| RankedHit {
            paper_id,
            score,
            rank: i + 1,
            mode_scores,
        })
        .collect();
    SearchResults { total, hits }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub corpus_size: usize,
    pub embedder_tag: String,
    pub built_at: Timestamp,
    pub snapshot_file: String,
}

/// Shared handle: readers clone the current `Arc<Snapshot>`; writers build a
/// modified copy and swap it in, so in-flight queries never see a partial
/// update.
pub struct SearchIndex {
    embedder: Arc<dyn Embedder>,
    clock: Arc<dyn Clock>,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl SearchIndex {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self::with_clock(embedder, Arc::new(SystemClock))
    }

    pub fn with_clock(embedder: Arc<dyn Embedder>, clock: Arc<dyn Clock>) -> Self {
        let snap = Snapshot::empty(embedder.tag().to_string(), clock.now());
        SearchIndex {
            embedder,
            clock,
            current: RwLock::new(Arc::new(snap)),
            writer: Mutex::new(()),
        }
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("index lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot().is_empty()
    }

    fn entry(&self, surrogate: Surrogate) -> DocEntry {
        DocEntry {
            terms: TermStats::of(&surrogate.text),
            vector: self.embedder.embed(&surrogate.text),
            surrogate,
        }
    }

    fn modify(&self, f: impl FnOnce(&mut Snapshot) -> bool) -> bool {
        let _guard = self.writer.lock().expect("index writer poisoned");
        let mut next = (*self.snapshot()).clone();
        if !f(&mut next) {
            return false;
        }
        next.generation += 1;
        next.built_at = self.clock.now();
        *self.current.write().expect("index lock poisoned") = Arc::new(next);
        true
    }

    /// Inserts or replaces by paper id.
    pub fn upsert(&self, surrogate: Surrogate) {
        self.upsert_many(std::iter::once(surrogate));
    }

    pub fn upsert_many(&self, surrogates: impl IntoIterator<Item = Surrogate>) {
        let entries: Vec<DocEntry> = surrogates.into_iter().map(|s| self.entry(s)).collect();
        if entries.is_empty() {
            return;
        }
        self.modify(|snap| {
            for e in entries {
                snap.insert(e);
            }
            true
        });
    }

    /// Returns whether the id was present.
    pub fn remove(&self, id: &PaperId) -> bool {
        self.modify(|snap| snap.remove(id))
    }

    pub fn search(&self, query: &RetrievalQuery) -> Result<SearchResults, RetrievalError> {
        self.snapshot().search(query, self.embedder.as_ref())
    }

    /// Searches with a caller-supplied query embedder, which must match the
    /// one the index was built with.
    pub fn search_with(
        &self,
        query: &RetrievalQuery,
        embedder: &dyn Embedder,
    ) -> Result<SearchResults, RetrievalError> {
        self.snapshot().search(query, embedder)
    }

    /// Writes the current snapshot under `dir`: a versioned surrogate file,
    /// then the manifest pointing at it.
    pub fn persist(&self, dir: &Path) -> Result<IndexManifest, RetrievalError> {
        let storage =
            |e: std::io::Error| RetrievalError::Storage(format!("{}: {e}", dir.display()));
        let snap = self.snapshot();
        let surrogates: Vec<&Surrogate> = snap.surrogates().collect();
        let snapshot_file = format!(
            "surrogates-v{INDEX_FORMAT_VERSION}-g{}-{}.json",
            snap.generation,
            snap.built_at.unix()
        );
        let body =
            serde_json::to_vec(&surrogates).map_err(|e| RetrievalError::Storage(e.to_string()))?;
        write_atomic(&dir.join(&snapshot_file), &body).map_err(storage)?;
        let manifest = IndexManifest {
            format_version: INDEX_FORMAT_VERSION,
            corpus_size: snap.len(),
            embedder_tag: snap.embedder_tag.clone(),
            built_at: snap.built_at,
            snapshot_file: snapshot_file.clone(),
        };
        let m = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| RetrievalError::Storage(e.to_string()))?;
        write_atomic(&dir.join(MANIFEST_FILE), &m).map_err(storage)?;
        for entry in fs::read_dir(dir).map_err(storage)?.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with("surrogates-") && name != snapshot_file {
                let _ = fs::remove_file(entry.path());
            }
        }
        Ok(manifest)
    }

    pub fn read_manifest(dir: &Path) -> Result<Option<IndexManifest>, RetrievalError> {
        let path = dir.join(MANIFEST_FILE);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| RetrievalError::Storage(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(RetrievalError::Storage(format!("{}: {e}", path.display()))),
        }
    }

    /// Loads a persisted index. Vectors are recomputed with `embedder`, whose
    /// tag must equal the one recorded in the manifest.
    pub fn load(
        dir: &Path,
        embedder: Arc<dyn Embedder>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, RetrievalError> {
        let manifest = Self::read_manifest(dir)?.ok_or_else(|| {
            RetrievalError::Storage(format!("no index manifest in {}", dir.display()))
        })?;
        if manifest.format_version != INDEX_FORMAT_VERSION {
            return Err(RetrievalError::Storage(format!(
                "unsupported index format {}",
                manifest.format_version
            )));
        }
        if manifest.embedder_tag != embedder.tag() {
            return Err(RetrievalError::EmbedderVersionMismatch {
                index: manifest.embedder_tag,
                query: embedder.tag().to_string(),
            });
        }
        let path = dir.join(&manifest.snapshot_file);
        let bytes = fs::read(&path)
            .map_err(|e| RetrievalError::Storage(format!("{}: {e}", path.display())))?;
        let surrogates: Vec<Surrogate> = serde_json::from_slice(&bytes)
            .map_err(|e| RetrievalError::Storage(format!("{}: {e}", path.display())))?;
        let index = SearchIndex::with_clock(embedder, clock);
        index.upsert_many(surrogates);
        {
            let mut cur = index.current.write().expect("index lock poisoned");
            let mut snap = (**cur).clone();
            snap.built_at = manifest.built_at;
            *cur = Arc::new(snap);
        }
        Ok(index)
    }
}
