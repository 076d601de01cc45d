//! Incremental sync: feed delta → ingest → enrich → store → index, with a
//! persisted watermark and retry list.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, Duration as ChronoDuration, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::enrich::Enricher;
use crate::fsutil::write_atomic;
use crate::id::{Corpus, PaperId};
use crate::ingest::{
    build_record, failed_provenance, metadata_only_record, AcquireOptions, ArtifactSource,
    IngestError, MetadataEntry, MetadataFeed, PdfConverter,
};
use crate::record::{PaperRecord, SourceType};
use crate::retrieval::{RetrievalError, SearchIndex, Surrogate};
use crate::store::{PutOutcome, RecordStore, StoreError};
use crate::time::{Clock, Timestamp};

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("another sync run holds {0}")]
    AlreadyRunning(PathBuf),
    #[error("upstream unavailable: {0}")]
    UpstreamUnavailable(String),
    #[error("sync state {path}: {reason}")]
    State { path: PathBuf, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Index(#[from] RetrievalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncWatermark {
    pub last_update_at: Timestamp,
    pub last_run_at: Option<Timestamp>,
    pub processed_count: u64,
}

impl Default for SyncWatermark {
    fn default() -> Self {
        SyncWatermark {
            last_update_at: Timestamp::EPOCH,
            last_run_at: None,
            processed_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryEntry {
    pub paper_id: PaperId,
    pub update_at: Timestamp,
    pub reason: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncState {
    pub watermark: SyncWatermark,
    #[serde(default)]
    pub retry: Vec<RetryEntry>,
}

impl SyncState {
    pub fn load(path: &Path) -> Result<Self, SyncError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| SyncError::State {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(SyncState::default()),
            Err(e) => Err(SyncError::State {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SyncError> {
        let bytes = serde_json::to_vec_pretty(self).expect("state serializes");
        write_atomic(path, &bytes).map_err(|e| SyncError::State {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncFailure {
    pub paper_id: PaperId,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SyncReport {
    pub new: usize,
    pub updated: usize,
    pub failed: usize,
    /// Entries in the delta whose stored record was already current.
    pub unchanged: usize,
    pub failures: Vec<SyncFailure>,
    pub watermark: Option<Timestamp>,
}

/// Exclusive advisory lock on a file, released on drop or process exit.
struct RunLock {
    _file: File,
}

impl RunLock {
    fn acquire(path: &Path) -> Result<Self, SyncError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| SyncError::State {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(path)
            .map_err(|e| SyncError::State {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        match file.try_lock() {
            Ok(()) => Ok(RunLock { _file: file }),
            Err(fs::TryLockError::WouldBlock) => Err(SyncError::AlreadyRunning(path.to_path_buf())),
            Err(fs::TryLockError::Error(e)) => Err(SyncError::State {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }),
        }
    }
}

pub struct Syncer<'a> {
    pub feed: &'a dyn MetadataFeed,
    pub fetcher: &'a dyn ArtifactSource,
    pub converter: &'a dyn PdfConverter,
    pub store: &'a dyn RecordStore,
    pub index: &'a SearchIndex,
    pub enricher: &'a Enricher,
    pub clock: &'a dyn Clock,
    pub acquire: AcquireOptions,
    /// Directory holding `sync-state.json` and `sync.lock`.
    pub state_dir: PathBuf,
    /// When set, the index snapshot is persisted here after each run.
    pub index_dir: Option<PathBuf>,
}

enum Outcome {
    Stored(PutOutcome),
    Current,
    Failed(String),
}

impl Syncer<'_> {
    pub fn state_path(&self) -> PathBuf {
        self.state_dir.join("sync-state.json")
    }

    pub fn lock_path(&self) -> PathBuf {
        self.state_dir.join("sync.lock")
    }

    pub fn state(&self) -> Result<SyncState, SyncError> {
        SyncState::load(&self.state_path())
    }

    /// One sync pass. The state file is written last, so a run interrupted
    /// at any point is redone from the previous watermark.
    pub fn run(&self) -> Result<SyncReport, SyncError> {
        let _lock = RunLock::acquire(&self.lock_path())?;
        let state_path = self.state_path();
        let state = SyncState::load(&state_path)?;
        let now = self.clock.now();

        let retry_ids: HashMap<&PaperId, &RetryEntry> =
            state.retry.iter().map(|r| (&r.paper_id, r)).collect();
        let mut entries: Vec<MetadataEntry> = self
            .feed
            .entries()
            .map_err(|e| SyncError::UpstreamUnavailable(e.to_string()))?
            .into_iter()
            .filter_map(|item| match item {
                Ok(e) => Some(e),
                Err(bad) => {
                    warn!(line = bad.line, id = ?bad.id, reason = %bad.reason, "skipping malformed feed entry");
                    None
                }
            })
            .filter(|e| e.update_at > state.watermark.last_update_at || retry_ids.contains_key(&e.paper_id))
            .collect();
        entries.sort_by(|a, b| {
            a.update_at
                .cmp(&b.update_at)
                .then_with(|| a.paper_id.cmp(&b.paper_id))
        });

        let mut report = SyncReport::default();
        let mut surrogates = Vec::new();
        let mut retry = Vec::new();
        let mut failed_times: BTreeSet<Timestamp> = BTreeSet::new();
        let mut succeeded = 0u64;

        for entry in &entries {
            let previous = self.store.get(&entry.paper_id)?;
            let outcome = self.process(
                entry,
                previous.as_deref(),
                retry_ids.contains_key(&entry.paper_id),
                now,
            )?;
            match outcome {
                Outcome::Stored(put) => {
                    succeeded += 1;
                    match put {
                        PutOutcome::Inserted => report.new += 1,
                        PutOutcome::Updated => report.updated += 1,
                        PutOutcome::Unchanged => report.unchanged += 1,
                    }
                }
                Outcome::Current => report.unchanged += 1,
                Outcome::Failed(reason) => {
                    warn!(paper = %entry.paper_id, %reason, "sync entry failed");
                    report.failed += 1;
                    failed_times.insert(entry.update_at);
                    let attempts = retry_ids.get(&entry.paper_id).map_or(0, |r| r.attempts) + 1;
                    retry.push(RetryEntry {
                        paper_id: entry.paper_id.clone(),
                        update_at: entry.update_at,
                        reason: reason.clone(),
                        attempts,
                    });
                    report.failures.push(SyncFailure {
                        paper_id: entry.paper_id.clone(),
                        reason,
                    });
                }
            }
            if entry.paper_id.corpus() == Corpus::Arxiv {
                if let Some(rec) = self.store.get(&entry.paper_id)? {
                    surrogates.push(Surrogate::from_record(&rec));
                }
            }
        }

        self.index.upsert_many(surrogates);
        if let Some(dir) = &self.index_dir {
            self.index.persist(dir)?;
        }

        // Advance only over timestamps at or below which nothing failed.
        let first_failure = failed_times.first().copied();
        let prefix_max = entries
            .iter()
            .map(|e| e.update_at)
            .filter(|t| first_failure.is_none_or(|f| *t < f))
            .max();
        let mut watermark = state.watermark.clone();
        if let Some(t) = prefix_max {
            watermark.last_update_at = watermark.last_update_at.max(t);
        }
        watermark.last_run_at = Some(now);
        watermark.processed_count += succeeded;
        report.watermark = Some(watermark.last_update_at);
        SyncState { watermark, retry }.save(&state_path)?;
        info!(
            new = report.new,
            updated = report.updated,
            failed = report.failed,
            "sync finished"
        );
        Ok(report)
    }

    fn process(
        &self,
        entry: &MetadataEntry,
        previous: Option<&PaperRecord>,
        is_retry: bool,
        now: Timestamp,
    ) -> Result<Outcome, SyncError> {
        if let Some(prev) = previous {
            let complete = prev.provenance().source_type != SourceType::MetadataOnly;
            if !is_retry && complete && prev.update_at() == entry.update_at {
                return Ok(Outcome::Current);
            }
        }
        let estimator = self.enricher.estimator.as_ref();
        match build_record(
            entry,
            self.fetcher,
            self.converter,
            &self.acquire,
            estimator,
            now,
        ) {
            Ok(mut record) => {
                self.enricher.enrich(&mut record, previous, now);
                Ok(Outcome::Stored(self.store.put(record)?))
            }
            Err(err) => {
                let keep_previous = previous
                    .is_some_and(|p| p.provenance().source_type != SourceType::MetadataOnly);
                if !keep_previous
                    && matches!(
                        err,
                        IngestError::ConversionFailed { .. } | IngestError::EmptyContent
                    )
                {
                    if let Ok(mut record) =
                        metadata_only_record(entry, failed_provenance(entry, now))
                    {
                        self.enricher.enrich(&mut record, previous, now);
                        self.store.put(record)?;
                    }
                }
                Ok(Outcome::Failed(err.to_string()))
            }
        }
    }
}

/// Weekly run times such as `Mon-Fri 06:00`, `Mon,Wed,Fri 18:30` or
/// `daily 00:15`, in UTC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    days: BTreeSet<u32>,
    at: NaiveTime,
}

fn weekday(s: &str) -> Option<Weekday> {
    s.parse::<Weekday>().ok()
}

impl FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (days_part, time_part) = s
            .trim()
            .split_once(char::is_whitespace)
            .ok_or_else(|| format!("expected '<days> <HH:MM>', got '{s}'"))?;
        let at = NaiveTime::parse_from_str(time_part.trim(), "%H:%M")
            .map_err(|e| format!("bad time '{time_part}': {e}"))?;
        let mut days = BTreeSet::new();
        if days_part.eq_ignore_ascii_case("daily") {
            days.extend(0..7);
        } else {
            for part in days_part.split(',') {
                if let Some((a, b)) = part.split_once('-') {
                    let (a, b) = (
                        weekday(a).ok_or(format!("bad day '{a}'"))?,
                        weekday(b).ok_or(format!("bad day '{b}'"))?,
                    );
                    let (mut d, end) = (a.num_days_from_monday(), b.num_days_from_monday());
                    loop {
                        days.insert(d);
                        if d == end {
                            break;
                        }
                        d = (d + 1) % 7;
                    }
                } else {
                    days.insert(
                        weekday(part)
                            .ok_or(format!("bad day '{part}'"))?
                            .num_days_from_monday(),
                    );
                }
            }
        }
        Ok(Schedule { days, at })
    }
}

impl Schedule {
    /// First scheduled instant strictly after `after`.
    pub fn next_after(&self, after: Timestamp) -> Timestamp {
        let start = after.datetime();
        for offset in 0..8 {
            let date = start.date_naive() + ChronoDuration::days(offset);
            if !self.days.contains(&date.weekday().num_days_from_monday()) {
                continue;
            }
            let candidate = date.and_time(self.at).and_utc();
            if candidate > start {
                return Timestamp::from_datetime(candidate);
            }
        }
        unreachable!("a non-empty weekly schedule fires within eight days")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekday_schedule() {
        let s: Schedule = "Mon-Fri 06:00".parse().unwrap();
        // 2024-09-06 is a Friday
        let fri_noon: Timestamp = "2024-09-06T12:00:00".parse().unwrap();
        assert_eq!(s.next_after(fri_noon).to_string(), "2024-09-09T06:00:00");
        let mon_early: Timestamp = "2024-09-09T05:59:59".parse().unwrap();
        assert_eq!(s.next_after(mon_early).to_string(), "2024-09-09T06:00:00");
        assert_eq!(
            s.next_after(s.next_after(mon_early)).to_string(),
            "2024-09-10T06:00:00"
        );
    }

    #[test]
    fn other_schedules() {
        let s: Schedule = "Sat,Sun 18:30".parse().unwrap();
        let t: Timestamp = "2024-09-09T00:00:00".parse().unwrap();
        assert_eq!(s.next_after(t).to_string(), "2024-09-14T18:30:00");
        let d: Schedule = "daily 00:15".parse().unwrap();
        assert_eq!(d.next_after(t).to_string(), "2024-09-09T00:15:00");
        assert!("Mon-Fri".parse::<Schedule>().is_err());
        assert!("Funday 06:00".parse::<Schedule>().is_err());
    }

    #[test]
    fn lock_rejects_overlap() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sync.lock");
        let held = RunLock::acquire(&p).unwrap();
        assert!(matches!(
            RunLock::acquire(&p),
            Err(SyncError::AlreadyRunning(_))
        ));
        drop(held);
        assert!(RunLock::acquire(&p).is_ok());
    }

    #[test]
    fn state_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        assert_eq!(SyncState::load(&p).unwrap(), SyncState::default());
        let st = SyncState {
            watermark: SyncWatermark {
                last_update_at: Timestamp::from_unix(100),
                last_run_at: Some(Timestamp::from_unix(200)),
                processed_count: 3,
            },
            retry: vec![RetryEntry {
                paper_id: PaperId::arxiv("2401.00001").unwrap(),
                update_at: Timestamp::from_unix(50),
                reason: "x".into(),
                attempts: 2,
            }],
        };
        st.save(&p).unwrap();
        assert_eq!(SyncState::load(&p).unwrap(), st);
    }
}
