//! Decision policies: what to read next given what has been read.

use std::io::Write;
use std::process::{Command, Stdio};

use paperdesk_core::retrieval::{Mode, Page, RetrievalQuery};
use paperdesk_core::{PaperId, SectionSelector, TokenEstimator, ViewKind};
use serde_json::{json, Value};

use crate::api::section_view;
use crate::cost::{AgentBudget, EvidenceLink, ReadRecord};
use crate::text::{answer_sentence, overlap, salient_terms};

/// A retrieval hit as the agent sees it (brief fields inline).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub paper_id: PaperId,
    pub rank: usize,
    pub score: f64,
    pub title: String,
    pub abstract_text: String,
    pub tldr: Option<String>,
}

impl Candidate {
    /// Parses the `hits` of a retrieval payload.
    pub fn from_hits(data: &Value) -> Vec<Candidate> {
        let hits = data
            .get("hits")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        hits.iter()
            .filter_map(|h| {
                let id = h.get("arxiv_id")?.as_str()?;
                Some(Candidate {
                    paper_id: PaperId::arxiv(id).ok()?,
                    rank: h.get("rank").and_then(Value::as_u64).unwrap_or(0) as usize,
                    score: h.get("score").and_then(Value::as_f64).unwrap_or(0.0),
                    title: str_field(h, "title"),
                    abstract_text: str_field(h, "abstract"),
                    tldr: h.get("tldr").and_then(Value::as_str).map(str::to_string),
                })
            })
            .collect()
    }

    fn brief_text(&self) -> String {
        format!(
            "{} {} {}",
            self.title,
            self.abstract_text,
            self.tldr.as_deref().unwrap_or("")
        )
    }
}

fn str_field(v: &Value, key: &str) -> String {
    v.get(key)
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string()
}

/// Everything a policy may look at.
pub struct AgentState<'a> {
    pub question: &'a str,
    pub retrieved: bool,
    pub shortlist: &'a [Candidate],
    pub reads: &'a [ReadRecord],
    pub budget: &'a AgentBudget,
    pub estimator: &'a dyn TokenEstimator,
}

impl AgentState<'_> {
    pub fn find_read(
        &self,
        id: &PaperId,
        view: &str,
        section: Option<usize>,
    ) -> Option<&ReadRecord> {
        self.reads.iter().find(|r| {
            r.paper_id.as_ref() == Some(id)
                && r.view == view
                && (section.is_none() || r.section == section)
        })
    }

    /// Section and raw reads so far.
    pub fn escalations(&self) -> usize {
        self.reads
            .iter()
            .filter(|r| r.view == "section" || r.view == "raw")
            .count()
    }

    /// Predicted cost of reading `view` of `id` from what is already known.
    pub fn estimate(&self, id: &PaperId, view: &ViewKind) -> usize {
        let est = |s: &str| self.estimator.estimate(s);
        let brief = self
            .shortlist
            .iter()
            .find(|c| &c.paper_id == id)
            .map(|c| est(&c.brief_text()) + 8)
            .unwrap_or(400);
        let head = self.find_read(id, "head", None).map(|r| &r.data);
        let total = head
            .and_then(|h| h.get("token_count"))
            .and_then(Value::as_u64)
            .map(|t| t as usize);
        match view {
            ViewKind::Brief => brief,
            ViewKind::Head => 2 * brief + 200,
            ViewKind::Preview => total.map_or(2_500, |t| t.min(2_500)) + 16,
            ViewKind::Section(sel) => head
                .and_then(|h| section_entry(h, sel))
                .map(|s| {
                    let n = s.get("token_count").and_then(Value::as_u64).unwrap_or(0) as usize;
                    n + est(&str_field(s, "name")) + est(&str_field(s, "tldr")) + 8
                })
                .unwrap_or(5_000),
            ViewKind::Raw | ViewKind::Json => total.map_or(50_000, |t| t + 8),
        }
    }
}

fn section_entry<'v>(head: &'v Value, sel: &SectionSelector) -> Option<&'v Value> {
    let sections = head.get("sections")?.as_array()?;
    match sel {
        SectionSelector::Idx(i) => sections
            .iter()
            .find(|s| s.get("idx").and_then(Value::as_u64) == Some(*i as u64)),
        SectionSelector::Name(n) => sections
            .iter()
            .find(|s| s.get("name").and_then(Value::as_str) == Some(n)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerDraft {
    pub text: String,
    pub evidence: Vec<EvidenceLink>,
    pub complete: bool,
}

impl AnswerDraft {
    pub fn incomplete(text: impl Into<String>) -> Self {
        AnswerDraft {
            text: text.into(),
            evidence: Vec::new(),
            complete: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Retrieve(RetrievalQuery),
    /// Read one view; `estimate` is the policy's predicted cost.
    Read {
        paper_id: PaperId,
        view: ViewKind,
        estimate: usize,
    },
    Answer(AnswerDraft),
    /// The budget cannot pay for the next useful read.
    Exhausted(AnswerDraft),
}

pub trait DecisionPolicy {
    fn name(&self) -> &str;
    fn next(&mut self, state: &AgentState) -> Action;

    /// Best answer available from the reads so far.
    fn fallback(&self, _state: &AgentState) -> AnswerDraft {
        AnswerDraft::incomplete("No answer could be established from the papers read.")
    }
}

/// Which head field a question asks about, if any.
fn head_fact(question: &str) -> Option<&'static str> {
    let q = question.to_lowercase();
    let has = |w: &str| q.contains(w);
    if has("citation") || has("cited") {
        Some("citations")
    } else if has("journal") {
        Some("journal_name")
    } else if has("venue") || has("conference") {
        Some("venue")
    } else if has("github") || has("code") || has("repository") {
        Some("github_url")
    } else if has("keyword") {
        Some("keywords")
    } else if has("categor") {
        Some("categories")
    } else {
        None
    }
}

fn render_scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

/// Deterministic reference policy: retrieve, screen by brief fields, read
/// the head of the best candidate, then the section whose name and TL;DR
/// best match the question, and the full text only if sections do not
/// contain the answer.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    pub shortlist: usize,
}

impl Default for ScriptedPolicy {
    fn default() -> Self {
        ScriptedPolicy { shortlist: 3 }
    }
}

impl ScriptedPolicy {
    fn target<'s>(&self, state: &'s AgentState, terms: &[String]) -> Option<&'s Candidate> {
        // Highest brief-field overlap; retrieval order breaks ties.
        state
            .shortlist
            .iter()
            .enumerate()
            .max_by_key(|(i, c)| (overlap(terms, &c.brief_text()), std::cmp::Reverse(*i)))
            .map(|(_, c)| c)
    }

    fn found(&self, state: &AgentState, terms: &[String], id: &PaperId) -> Option<AnswerDraft> {
        for r in state
            .reads
            .iter()
            .filter(|r| r.paper_id.as_ref() == Some(id))
        {
            if r.view != "section" && r.view != "raw" {
                continue;
            }
            let body = r
                .data
                .get("body")
                .and_then(Value::as_str)
                .unwrap_or_default();
            if let Some(s) = answer_sentence(terms, body) {
                return Some(AnswerDraft {
                    text: s.to_string(),
                    evidence: vec![EvidenceLink {
                        paper_id: id.clone(),
                        view: r.view.clone(),
                        section: r.section,
                        quote: s.to_string(),
                        claim: s.to_string(),
                    }],
                    complete: true,
                });
            }
        }
        None
    }
}

impl DecisionPolicy for ScriptedPolicy {
    fn name(&self) -> &str {
        "scripted"
    }

    fn next(&mut self, state: &AgentState) -> Action {
        if !state.retrieved {
            let page = Page::new(0, self.shortlist.clamp(1, 100)).expect("valid page");
            return Action::Retrieve(
                RetrievalQuery::new(Mode::Hybrid, state.question).with_page(page),
            );
        }
        let terms = salient_terms(state.question);
        let Some(target) = self.target(state, &terms) else {
            return Action::Answer(AnswerDraft::incomplete(
                "No candidate papers matched the question.",
            ));
        };
        let id = &target.paper_id;
        let remaining = state.budget.remaining();

        let Some(head) = state.find_read(id, "head", None) else {
            let estimate = state.estimate(id, &ViewKind::Head);
            if estimate > remaining {
                return Action::Exhausted(self.fallback(state));
            }
            return Action::Read {
                paper_id: id.clone(),
                view: ViewKind::Head,
                estimate,
            };
        };

        if let Some(field) = head_fact(state.question) {
            let values: Vec<String> = match head.data.get(field) {
                Some(Value::Array(a)) => a.iter().filter_map(render_scalar).collect(),
                Some(v) => render_scalar(v).into_iter().collect(),
                None => Vec::new(),
            };
            if let Some(first) = values.first() {
                let title = str_field(&head.data, "title");
                let text = format!(
                    "{title}: {} {}.",
                    field.replace('_', " "),
                    values.join(", ")
                );
                return Action::Answer(AnswerDraft {
                    evidence: vec![EvidenceLink {
                        paper_id: id.clone(),
                        view: "head".into(),
                        section: None,
                        quote: format!("{field}: {first}"),
                        claim: text.clone(),
                    }],
                    text,
                    complete: true,
                });
            }
        }

        if let Some(answer) = self.found(state, &terms, id) {
            return Action::Answer(answer);
        }

        if state.escalations() >= state.budget.max_escalations {
            return Action::Answer(self.fallback(state));
        }
        let sections = head
            .data
            .get("sections")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        let read_any_section = state
            .reads
            .iter()
            .any(|r| r.paper_id.as_ref() == Some(id) && r.view == "section");
        let mut ranked: Vec<(usize, usize)> = sections
            .iter()
            .filter_map(|s| {
                let idx = s.get("idx")?.as_u64()? as usize;
                if state.find_read(id, "section", Some(idx)).is_some() {
                    return None;
                }
                let text = format!("{} {}", str_field(s, "name"), str_field(s, "tldr"));
                Some((overlap(&terms, &text), idx))
            })
            .filter(|(score, _)| *score > 0 || !read_any_section)
            .collect();
        ranked.sort_by_key(|(score, idx)| (std::cmp::Reverse(*score), *idx));
        if let Some((_, idx)) = ranked.first() {
            let view = section_view(*idx);
            let estimate = state.estimate(id, &view);
            if estimate > remaining {
                return Action::Exhausted(self.fallback(state));
            }
            return Action::Read {
                paper_id: id.clone(),
                view,
                estimate,
            };
        }
        if read_any_section && state.find_read(id, "raw", None).is_none() {
            let estimate = state.estimate(id, &ViewKind::Raw);
            if estimate > remaining {
                return Action::Exhausted(self.fallback(state));
            }
            return Action::Read {
                paper_id: id.clone(),
                view: ViewKind::Raw,
                estimate,
            };
        }
        Action::Answer(self.fallback(state))
    }

    fn fallback(&self, state: &AgentState) -> AnswerDraft {
        let terms = salient_terms(state.question);
        let mut partial = None;
        for c in state.shortlist {
            if let Some(mut a) = self.found(state, &terms, &c.paper_id) {
                a.complete = false;
                partial = Some(a);
                break;
            }
        }
        partial.unwrap_or_else(|| {
            AnswerDraft::incomplete("No answer could be established from the papers read.")
        })
    }
}

/// Baseline that reads the full text of every shortlisted paper and answers
/// from whichever body holds the best sentence.
#[derive(Debug, Clone)]
pub struct RawEverythingPolicy {
    pub shortlist: usize,
}

impl Default for RawEverythingPolicy {
    fn default() -> Self {
        RawEverythingPolicy { shortlist: 3 }
    }
}

impl DecisionPolicy for RawEverythingPolicy {
    fn name(&self) -> &str {
        "raw-everything"
    }

    fn next(&mut self, state: &AgentState) -> Action {
        if !state.retrieved {
            let page = Page::new(0, self.shortlist.clamp(1, 100)).expect("valid page");
            return Action::Retrieve(
                RetrievalQuery::new(Mode::Hybrid, state.question).with_page(page),
            );
        }
        for c in state.shortlist {
            if state.find_read(&c.paper_id, "raw", None).is_none() {
                let estimate = state
                    .estimate(&c.paper_id, &ViewKind::Raw)
                    .min(state.budget.remaining());
                return Action::Read {
                    paper_id: c.paper_id.clone(),
                    view: ViewKind::Raw,
                    estimate,
                };
            }
        }
        let terms = salient_terms(state.question);
        let mut best: Option<(f64, AnswerDraft)> = None;
        for r in state.reads.iter().filter(|r| r.view == "raw") {
            let body = r
                .data
                .get("body")
                .and_then(Value::as_str)
                .unwrap_or_default();
            if let (Some(s), Some(id)) = (answer_sentence(&terms, body), &r.paper_id) {
                let c = crate::text::coverage(&terms, s);
                if best.as_ref().is_none_or(|(b, _)| c > *b) {
                    let link = EvidenceLink {
                        paper_id: id.clone(),
                        view: "raw".into(),
                        section: None,
                        quote: s.to_string(),
                        claim: s.to_string(),
                    };
                    best = Some((
                        c,
                        AnswerDraft {
                            text: s.to_string(),
                            evidence: vec![link],
                            complete: true,
                        },
                    ));
                }
            }
        }
        Action::Answer(best.map_or_else(|| self.fallback(state), |(_, a)| a))
    }
}

/// Text completion backend for [`LlmPolicy`].
pub trait Completion {
    fn complete(&self, prompt: &str) -> Result<String, String>;
}

/// Runs a command with the prompt on stdin and reads the completion from
/// stdout.
#[derive(Debug, Clone)]
pub struct CommandCompletion {
    pub program: String,
    pub args: Vec<String>,
}

impl Completion for CommandCompletion {
    fn complete(&self, prompt: &str) -> Result<String, String> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("{}: {e}", self.program))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(prompt.as_bytes())
            .map_err(|e| e.to_string())?;
        let out = child.wait_with_output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} exited with {}", self.program, out.status));
        }
        String::from_utf8(out.stdout).map_err(|e| e.to_string())
    }
}

const LLM_INSTRUCTIONS: &str = "You are a research agent reading papers through a metered API. \
Choose exactly one next action and reply with a single JSON object:\n\
{\"action\":\"retrieve\",\"q\":\"...\"}\n\
{\"action\":\"read\",\"paper_id\":\"...\",\"view\":\"brief|head|preview|section|raw\",\"section\":0}\n\
{\"action\":\"answer\",\"text\":\"...\",\"evidence\":[{\"paper_id\":\"...\",\"view\":\"...\",\"section\":0,\"quote\":\"verbatim text\"}]}\n\
Read cheap views first and only read sections or full text when needed to verify a claim.";

/// Policy driven by a language model. Replies that do not parse, or that
/// ask for a read the budget cannot cover, fall back to `fallback`.
pub struct LlmPolicy<C: Completion> {
    pub completion: C,
    pub fallback: ScriptedPolicy,
    /// Characters of each section/raw body shown in the prompt.
    pub excerpt_chars: usize,
}

impl<C: Completion> LlmPolicy<C> {
    pub fn new(completion: C) -> Self {
        LlmPolicy {
            completion,
            fallback: ScriptedPolicy::default(),
            excerpt_chars: 2_000,
        }
    }

    pub fn prompt(&self, state: &AgentState) -> String {
        let shortlist: Vec<Value> = state
            .shortlist
            .iter()
            .map(|c| json!({"paper_id": c.paper_id.as_str(), "title": c.title, "tldr": c.tldr}))
            .collect();
        let reads: Vec<Value> = state
            .reads
            .iter()
            .filter(|r| r.paper_id.is_some())
            .map(|r| {
                let mut d = r.data.clone();
                if let Some(Value::String(body)) = d.get_mut("body") {
                    *body = body.chars().take(self.excerpt_chars).collect();
                }
                json!({"paper_id": r.paper_id.as_ref().map(PaperId::as_str), "view": r.view, "section": r.section, "data": d})
            })
            .collect();
        let context = json!({
            "question": state.question,
            "remaining_tokens": state.budget.remaining(),
            "retrieved": state.retrieved,
            "shortlist": shortlist,
            "reads": reads,
        });
        format!("{LLM_INSTRUCTIONS}\n\nState:\n{context}\n")
    }

    fn parse(&self, state: &AgentState, reply: &str) -> Option<Action> {
        let start = reply.find('{')?;
        let end = reply.rfind('}')?;
        let v: Value = serde_json::from_str(reply.get(start..=end)?).ok()?;
        match v.get("action")?.as_str()? {
            "retrieve" => {
                let q = v.get("q")?.as_str()?;
                let page = Page::new(0, self.fallback.shortlist.clamp(1, 100)).ok()?;
                Some(Action::Retrieve(
                    RetrievalQuery::new(Mode::Hybrid, q).with_page(page),
                ))
            }
            "read" => {
                let id = PaperId::arxiv(v.get("paper_id")?.as_str()?).ok()?;
                let section = match v.get("section") {
                    Some(Value::Number(n)) => Some(n.to_string()),
                    Some(Value::String(s)) => Some(s.clone()),
                    _ => None,
                };
                let view = ViewKind::parse(v.get("view")?.as_str()?, section.as_deref()).ok()?;
                let estimate = state.estimate(&id, &view);
                if estimate > state.budget.remaining() {
                    return Some(Action::Exhausted(self.fallback.fallback(state)));
                }
                Some(Action::Read {
                    paper_id: id,
                    view,
                    estimate,
                })
            }
            "answer" => {
                let text = v.get("text")?.as_str()?.to_string();
                let evidence = v
                    .get("evidence")
                    .and_then(Value::as_array)
                    .into_iter()
                    .flatten()
                    .filter_map(|e| {
                        Some(EvidenceLink {
                            paper_id: PaperId::arxiv(e.get("paper_id")?.as_str()?).ok()?,
                            view: e.get("view")?.as_str()?.to_string(),
                            section: e.get("section").and_then(Value::as_u64).map(|s| s as usize),
                            quote: e.get("quote")?.as_str()?.to_string(),
                            claim: text.clone(),
                        })
                    })
                    .collect::<Vec<_>>();
                let complete = !evidence.is_empty();
                Some(Action::Answer(AnswerDraft {
                    text,
                    evidence,
                    complete,
                }))
            }
            _ => None,
        }
    }
}

impl<C: Completion> DecisionPolicy for LlmPolicy<C> {
    fn name(&self) -> &str {
        "llm"
    }

    fn next(&mut self, state: &AgentState) -> Action {
        let reply = self.completion.complete(&self.prompt(state));
        match reply.ok().and_then(|r| self.parse(state, &r)) {
            Some(a) => a,
            None => self.fallback.next(state),
        }
    }

    fn fallback(&self, state: &AgentState) -> AnswerDraft {
        self.fallback.fallback(state)
    }
}
