//! The deep-research loop: a policy proposes actions, the runner pays for
//! them, logs every payload and writes the trace.

use std::path::PathBuf;
use std::sync::Arc;

use paperdesk_core::protocol::retrieval_query_to_params;
use paperdesk_core::{SectionSelector, TokenEstimator, ViewKind, WordPunctEstimator};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::api::{data, ApiError, PaperApi};
use crate::cost::{
    payload_cost, verify_evidence, AgentBudget, CostReport, EvidenceLink, ReadRecord,
};
use crate::policy::{Action, AgentState, AnswerDraft, Candidate, DecisionPolicy};
use crate::trace::{digest, TraceEvent, TraceWriter};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("budget must allow at least one token")]
    EmptyBudget,
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error("trace: {0}")]
    Trace(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Answered,
    /// Stopped because the next read did not fit the budget.
    BudgetExhausted,
    /// Ran out of useful reads without an answer.
    NoAnswer,
}

/// The answer object returned by the CLI and the `/agent/query` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchOutcome {
    pub run_id: String,
    pub question: String,
    pub status: RunStatus,
    pub complete: bool,
    pub answer: String,
    pub evidence: Vec<EvidenceLink>,
    pub cost: CostReport,
}

#[derive(Debug, Clone)]
pub struct ResearchRun {
    pub outcome: ResearchOutcome,
    pub reads: Vec<ReadRecord>,
    pub trace: Vec<TraceEvent>,
    pub trace_path: Option<PathBuf>,
}

#[derive(Clone)]
pub struct ResearchOptions {
    pub estimator: Arc<dyn TokenEstimator>,
    /// Directory for `<run-id>.jsonl` traces; `None` keeps the trace in memory only.
    pub trace_dir: Option<PathBuf>,
    pub seed: u64,
    pub max_steps: usize,
}

impl Default for ResearchOptions {
    fn default() -> Self {
        ResearchOptions {
            estimator: Arc::new(WordPunctEstimator),
            trace_dir: None,
            seed: 0,
            max_steps: 64,
        }
    }
}

/// Deterministic run id for a question, budget and seed.
pub fn run_id(question: &str, max_tokens: usize, seed: u64) -> String {
    let h = Sha256::digest(format!("{question}\n{max_tokens}\n{seed}").as_bytes());
    hex::encode(&h[..8])
}

struct Runner<'a> {
    trace: Vec<TraceEvent>,
    writer: Option<TraceWriter>,
    reads: Vec<ReadRecord>,
    cost: CostReport,
    budget: AgentBudget,
    estimator: &'a dyn TokenEstimator,
}

impl Runner<'_> {
    fn log(&mut self, ev: TraceEvent) -> Result<(), AgentError> {
        if let Some(w) = &mut self.writer {
            w.write(&ev)?;
        }
        self.trace.push(ev);
        Ok(())
    }

    /// Charges `data` to the budget and logs it; returns false (and logs the
    /// refusal) when it does not fit.
    fn consume(
        &mut self,
        record: ReadRecord,
        ev: impl FnOnce(usize, String, usize, bool) -> TraceEvent,
    ) -> Result<bool, AgentError> {
        let accepted = record.cost <= self.budget.remaining();
        let d = digest(&record.data);
        if accepted {
            self.budget.spent_tokens += record.cost;
            self.cost.add(&record.view, record.cost);
        }
        self.log(ev(record.cost, d, self.budget.spent_tokens, accepted))?;
        if accepted {
            self.reads.push(record);
        }
        Ok(accepted)
    }
}

pub fn deep_research(
    api: &dyn PaperApi,
    question: &str,
    budget: AgentBudget,
    policy: &mut dyn DecisionPolicy,
    opts: &ResearchOptions,
) -> Result<ResearchRun, AgentError> {
    if budget.max_tokens == 0 {
        return Err(AgentError::EmptyBudget);
    }
    let run_id = run_id(question, budget.max_tokens, opts.seed);
    let writer = match &opts.trace_dir {
        Some(dir) => Some(TraceWriter::create(dir, &run_id)?),
        None => None,
    };
    let mut run = Runner {
        trace: Vec::new(),
        writer,
        reads: Vec::new(),
        cost: CostReport {
            max_tokens: budget.max_tokens,
            ..CostReport::default()
        },
        budget,
        estimator: opts.estimator.as_ref(),
    };
    run.log(TraceEvent::Start {
        run_id: run_id.clone(),
        question: question.to_string(),
        policy: policy.name().to_string(),
        max_tokens: budget.max_tokens,
        max_escalations: budget.max_escalations,
    })?;

    let mut shortlist: Vec<Candidate> = Vec::new();
    let mut retrieved = false;
    let mut step = 0;
    macro_rules! state {
        () => {
            AgentState {
                question,
                retrieved,
                shortlist: &shortlist,
                reads: &run.reads,
                budget: &run.budget,
                estimator: run.estimator,
            }
        };
    }
    let (status, draft) = loop {
        if step >= opts.max_steps {
            break (RunStatus::NoAnswer, policy.fallback(&state!()));
        }
        let action = policy.next(&state!());
        step += 1;
        match action {
            Action::Retrieve(query) => {
                let envelope = api.retrieve(&query)?;
                let payload = data(&envelope)?.clone();
                let cost = payload_cost(run.estimator, &payload);
                let params = retrieval_query_to_params(&query);
                let record = ReadRecord {
                    step,
                    paper_id: None,
                    view: "retrieve".into(),
                    section: None,
                    cost,
                    data: payload,
                };
                let hits = Candidate::from_hits(&record.data);
                let ok = run.consume(record, |cost, digest, spent, accepted| {
                    TraceEvent::Retrieve {
                        step,
                        params,
                        cost,
                        digest,
                        spent,
                        accepted,
                    }
                })?;
                if !ok {
                    break (RunStatus::BudgetExhausted, policy.fallback(&state!()));
                }
                retrieved = true;
                shortlist = hits;
            }
            Action::Read {
                paper_id,
                view,
                estimate,
            } => {
                if estimate > run.budget.remaining() {
                    break (RunStatus::BudgetExhausted, policy.fallback(&state!()));
                }
                let envelope = api.view(&paper_id, &view)?;
                let payload = data(&envelope)?.clone();
                let cost = payload_cost(run.estimator, &payload);
                let section = match &view {
                    ViewKind::Section(_) => payload
                        .get("idx")
                        .and_then(|v| v.as_u64())
                        .map(|i| i as usize),
                    _ => None,
                };
                let selector = match &view {
                    ViewKind::Section(SectionSelector::Idx(i)) => Some(i.to_string()),
                    ViewKind::Section(SectionSelector::Name(n)) => Some(n.clone()),
                    _ => None,
                };
                let record = ReadRecord {
                    step,
                    paper_id: Some(paper_id.clone()),
                    view: view.name().to_string(),
                    section,
                    cost,
                    data: payload,
                };
                let view_name = view.name().to_string();
                let ok = run.consume(record, |cost, digest, spent, accepted| TraceEvent::Read {
                    step,
                    paper_id,
                    view: view_name,
                    section: selector,
                    estimate,
                    cost,
                    digest,
                    spent,
                    accepted,
                })?;
                if !ok {
                    break (RunStatus::BudgetExhausted, policy.fallback(&state!()));
                }
            }
            Action::Answer(d) => {
                let status = if d.complete {
                    RunStatus::Answered
                } else {
                    RunStatus::NoAnswer
                };
                break (status, d);
            }
            Action::Exhausted(d) => break (RunStatus::BudgetExhausted, d),
        }
    };

    let AnswerDraft {
        text,
        evidence,
        complete,
    } = draft;
    // Unverifiable evidence is dropped; an answer left without any is not complete.
    let evidence: Vec<EvidenceLink> = evidence
        .into_iter()
        .filter(|e| verify_evidence(e, &run.reads))
        .collect();
    let complete = complete && !evidence.is_empty() && status == RunStatus::Answered;
    let status = if status == RunStatus::Answered && !complete {
        RunStatus::NoAnswer
    } else {
        status
    };
    run.log(TraceEvent::Finish {
        status: serde_json::to_value(status)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string(),
        complete,
        answer: text.clone(),
        evidence: evidence.clone(),
        spent: run.budget.spent_tokens,
    })?;
    let trace_path = run.writer.as_ref().map(|w| w.path().to_path_buf());
    Ok(ResearchRun {
        outcome: ResearchOutcome {
            run_id,
            question: question.to_string(),
            status,
            complete,
            answer: text,
            evidence,
            cost: run.cost,
        },
        reads: run.reads,
        trace: run.trace,
        trace_path,
    })
}
