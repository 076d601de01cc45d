//! JSON-lines execution traces and their replay.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use paperdesk_core::protocol::retrieval_query_from_params;
use paperdesk_core::{PaperId, ViewKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::api::{data, ApiError, PaperApi};
use crate::cost::EvidenceLink;

/// SHA-256 of the compact JSON serialization of `data`.
pub fn digest(data: &Value) -> String {
    let bytes = serde_json::to_vec(data).expect("JSON values serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Start {
        run_id: String,
        question: String,
        policy: String,
        max_tokens: usize,
        max_escalations: usize,
    },
    Retrieve {
        step: usize,
        params: Vec<(String, String)>,
        cost: usize,
        digest: String,
        spent: usize,
        accepted: bool,
    },
    Read {
        step: usize,
        paper_id: PaperId,
        view: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        section: Option<String>,
        estimate: usize,
        cost: usize,
        digest: String,
        spent: usize,
        accepted: bool,
    },
    Finish {
        status: String,
        complete: bool,
        answer: String,
        evidence: Vec<EvidenceLink>,
        spent: usize,
    },
}

pub struct TraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TraceWriter {
    /// Creates (or truncates) `<dir>/<run_id>.jsonl`.
    pub fn create(dir: &Path, run_id: &str) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{run_id}.jsonl"));
        Ok(TraceWriter {
            out: BufWriter::new(File::create(&path)?),
            path,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, event: &TraceEvent) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, event)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

pub fn read_trace(path: &Path) -> io::Result<Vec<TraceEvent>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub steps: usize,
    /// Steps whose payload digest differs from the recorded one.
    pub mismatches: Vec<usize>,
}

impl ReplayReport {
    pub fn is_faithful(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-issues every recorded read against `api` and compares digests.
pub fn replay(events: &[TraceEvent], api: &dyn PaperApi) -> Result<ReplayReport, ApiError> {
    let mut report = ReplayReport::default();
    for ev in events {
        let (step, recorded, envelope) = match ev {
            TraceEvent::Retrieve {
                step,
                params,
                digest,
                ..
            } => {
                let q = retrieval_query_from_params(
                    params.iter().map(|(k, v)| (k.as_str(), v.as_str())),
                )
                .map_err(|e| ApiError::Malformed(e.to_string()))?;
                (*step, digest, api.retrieve(&q)?)
            }
            TraceEvent::Read {
                step,
                paper_id,
                view,
                section,
                digest,
                ..
            } => {
                let kind = ViewKind::parse(view, section.as_deref())
                    .map_err(|e| ApiError::Malformed(e.to_string()))?;
                (*step, digest, api.view(paper_id, &kind)?)
            }
            _ => continue,
        };
        report.steps += 1;
        if &self::digest(data(&envelope)?) != recorded {
            report.mismatches.push(step);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn digest_is_stable_and_order_sensitive() {
        let a = json!({"x": 1, "y": "z"});
        assert_eq!(digest(&a), digest(&a.clone()));
        assert_ne!(digest(&a), digest(&json!({"y": "z", "x": 1})));
        assert_eq!(digest(&a).len(), 64);
    }

    #[test]
    fn events_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = TraceWriter::create(dir.path(), "run1").unwrap();
        let events = vec![
            TraceEvent::Start {
                run_id: "run1".into(),
                question: "q".into(),
                policy: "scripted".into(),
                max_tokens: 10,
                max_escalations: 2,
            },
            TraceEvent::Read {
                step: 1,
                paper_id: PaperId::arxiv("2401.00001").unwrap(),
                view: "section".into(),
                section: Some("3".into()),
                estimate: 5,
                cost: 4,
                digest: "ab".into(),
                spent: 4,
                accepted: true,
            },
        ];
        for e in &events {
            w.write(e).unwrap();
        }
        assert_eq!(w.path(), dir.path().join("run1.jsonl"));
        assert_eq!(read_trace(&dir.path().join("run1.jsonl")).unwrap(), events);
    }
}
