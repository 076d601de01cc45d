use std::cell::RefCell;
use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use paperdesk_agent::cost::{payload_cost, verify_evidence};
use paperdesk_agent::policy::Completion;
use paperdesk_agent::trace::{read_trace, replay, TraceEvent};
use paperdesk_agent::{
    deep_research, deep_search, AgentBudget, LlmPolicy, PaperApi, RawEverythingPolicy,
    ResearchOptions, RunStatus, ScriptedPolicy, SearchConstraints, SearchOptions, StoreApi,
};
use paperdesk_core::retrieval::{FilterSet, HashedEmbedder, SearchIndex};
use paperdesk_core::store::{MemoryStore, RecordStore};
use paperdesk_core::{FixedClock, PaperId, Timestamp, WordPunctEstimator};
use paperdesk_testkit::{corpus, fixture_now, DEMO_ID};

fn api() -> &'static StoreApi {
    static API: OnceLock<StoreApi> = OnceLock::new();
    API.get_or_init(|| {
        let store = Arc::new(MemoryStore::new());
        let clock = Arc::new(FixedClock::new(fixture_now()));
        let index = Arc::new(SearchIndex::with_clock(
            Arc::new(HashedEmbedder::default()),
            clock,
        ));
        corpus().load_into(store.as_ref(), &index);
        StoreApi::new(store as Arc<dyn RecordStore>, index)
    })
}

fn opts() -> ResearchOptions {
    ResearchOptions {
        trace_dir: None,
        ..ResearchOptions::default()
    }
}

fn ts(s: &str) -> Timestamp {
    s.parse().unwrap()
}

#[test]
fn deep_search_finds_the_memory_paper() {
    let constraints = SearchConstraints {
        filters: FilterSet {
            categories: vec!["cs.CL".into()],
            publish_from: Some(ts("2024-09-01T00:00:00")),
            publish_to: Some(Timestamp::parse_end_bound("2024-09-30").unwrap()),
            ..FilterSet::default()
        },
        phrases: vec!["global memory".into()],
    };
    let s = deep_search(
        api(),
        "long context retrieval with global memory",
        &constraints,
        1,
        &SearchOptions::default(),
    )
    .unwrap();
    assert_eq!(s.ids(), [PaperId::arxiv(DEMO_ID).unwrap()]);
    let c = &s.candidates[0];
    assert!(c.matched.iter().all(|m| m.satisfied));
    assert!(c.trending.is_some());
}

#[test]
fn deep_search_recall_at_one_on_planted_tasks() {
    let tasks = &corpus().search_tasks;
    assert!(tasks.len() >= 10);
    for t in tasks {
        let constraints = SearchConstraints {
            filters: FilterSet {
                categories: t.categories.clone(),
                publish_from: Some(ts(&format!("{}T00:00:00", t.publish_from))),
                publish_to: Some(Timestamp::parse_end_bound(&t.publish_to).unwrap()),
                ..FilterSet::default()
            },
            phrases: t.phrases.clone(),
        };
        let s = deep_search(
            api(),
            &t.query,
            &constraints,
            t.k,
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(
            s.ids().first().map(PaperId::as_str),
            Some(t.target.as_str()),
            "task {t:?}"
        );
    }
}

#[test]
fn research_answers_from_one_section() {
    for task in &corpus().research_tasks {
        let mut policy = ScriptedPolicy::default();
        let run = deep_research(
            api(),
            &task.question,
            AgentBudget::new(4_000),
            &mut policy,
            &opts(),
        )
        .unwrap();
        let o = &run.outcome;
        assert_eq!(o.status, RunStatus::Answered, "{}", task.question);
        assert!(o.complete);
        assert!(
            o.answer.contains(&task.expected),
            "{} -> {}",
            task.question,
            o.answer
        );
        assert!(o
            .evidence
            .iter()
            .all(|e| e.paper_id.as_str() == task.target));
        assert!(o.evidence.iter().all(|e| verify_evidence(e, &run.reads)));
        let count = |v: &str| run.reads.iter().filter(|r| r.view == v).count();
        assert_eq!(count("section"), 1, "{:?}", o.cost.by_view);
        assert_eq!(count("raw"), 0);
    }
}

#[test]
fn head_facts_need_no_body_reads() {
    let mut policy = ScriptedPolicy::default();
    let run = deep_research(
        api(),
        "How many citations does the MemoRAG global memory paper have?",
        AgentBudget::new(4_000),
        &mut policy,
        &opts(),
    )
    .unwrap();
    assert_eq!(run.outcome.status, RunStatus::Answered);
    assert!(run.outcome.answer.contains("63"), "{}", run.outcome.answer);
    assert!(run
        .reads
        .iter()
        .all(|r| r.view != "section" && r.view != "raw"));
    assert_eq!(run.outcome.evidence[0].view, "head");
}

#[test]
fn tiny_budget_stops_without_overspending() {
    let task = &corpus().research_tasks[0];
    let mut policy = ScriptedPolicy::default();
    let run = deep_research(
        api(),
        &task.question,
        AgentBudget::new(100),
        &mut policy,
        &opts(),
    )
    .unwrap();
    assert_eq!(run.outcome.status, RunStatus::BudgetExhausted);
    assert!(!run.outcome.complete);
    assert!(run.outcome.cost.spent_tokens <= 100);
}

#[test]
fn spent_tokens_equal_payload_costs() {
    let est = WordPunctEstimator;
    for task in corpus().research_tasks.iter().take(5) {
        let mut policy = ScriptedPolicy::default();
        let run = deep_research(
            api(),
            &task.question,
            AgentBudget::new(4_000),
            &mut policy,
            &opts(),
        )
        .unwrap();
        let sum: usize = run.reads.iter().map(|r| payload_cost(&est, &r.data)).sum();
        assert_eq!(run.outcome.cost.spent_tokens, sum);
        assert!(sum <= 4_000);
        assert_eq!(run.outcome.cost.reads, run.reads.len());
    }
}

#[test]
fn reads_climb_the_view_ladder() {
    let task = &corpus().research_tasks[1];
    let mut policy = ScriptedPolicy::default();
    let run = deep_research(
        api(),
        &task.question,
        AgentBudget::new(4_000),
        &mut policy,
        &opts(),
    )
    .unwrap();
    let target = PaperId::arxiv(&task.target).unwrap();
    let views: Vec<&str> = run
        .reads
        .iter()
        .filter(|r| r.paper_id.as_ref() == Some(&target))
        .map(|r| r.view.as_str())
        .collect();
    assert_eq!(views, ["head", "section"]);
}

#[test]
fn traces_replay_faithfully() {
    let dir = tempfile::tempdir().unwrap();
    let task = &corpus().research_tasks[2];
    let opts = ResearchOptions {
        trace_dir: Some(dir.path().into()),
        seed: 7,
        ..ResearchOptions::default()
    };
    let mut policy = ScriptedPolicy::default();
    let run = deep_research(
        api(),
        &task.question,
        AgentBudget::new(4_000),
        &mut policy,
        &opts,
    )
    .unwrap();
    let path = run.trace_path.clone().unwrap();
    assert_eq!(
        path,
        dir.path().join(format!("{}.jsonl", run.outcome.run_id))
    );
    let events = read_trace(&path).unwrap();
    assert_eq!(events, run.trace);
    assert!(matches!(events.first(), Some(TraceEvent::Start { .. })));
    assert!(matches!(events.last(), Some(TraceEvent::Finish { .. })));
    let report = replay(&events, api()).unwrap();
    assert!(report.steps >= 3);
    assert!(report.is_faithful(), "{report:?}");

    // The same question, budget and seed name the same run.
    let mut policy = ScriptedPolicy::default();
    let again = deep_research(
        api(),
        &task.question,
        AgentBudget::new(4_000),
        &mut policy,
        &opts,
    )
    .unwrap();
    assert_eq!(again.outcome.run_id, run.outcome.run_id);
}

#[test]
fn progressive_reading_costs_a_fraction_of_full_text() {
    let mut progressive = 0;
    let mut baseline = 0;
    for task in &corpus().research_tasks {
        let mut p = ScriptedPolicy::default();
        let run = deep_research(
            api(),
            &task.question,
            AgentBudget::new(4_000),
            &mut p,
            &opts(),
        )
        .unwrap();
        assert!(run.outcome.complete);
        progressive += run.outcome.cost.spent_tokens;
        let mut raw = RawEverythingPolicy::default();
        let run = deep_research(
            api(),
            &task.question,
            AgentBudget::new(1_000_000),
            &mut raw,
            &opts(),
        )
        .unwrap();
        assert!(run.outcome.answer.contains(&task.expected));
        baseline += run.outcome.cost.spent_tokens;
    }
    let ratio = progressive as f64 / baseline as f64;
    assert!(ratio <= 0.30, "progressive/raw = {ratio:.3}");
}

struct Scripted(RefCell<VecDeque<String>>);

impl Completion for Scripted {
    fn complete(&self, prompt: &str) -> Result<String, String> {
        assert!(prompt.contains("remaining_tokens"));
        self.0
            .borrow_mut()
            .pop_front()
            .ok_or_else(|| "out of replies".into())
    }
}

fn llm(replies: &[&str]) -> LlmPolicy<Scripted> {
    LlmPolicy::new(Scripted(RefCell::new(
        replies.iter().map(|s| s.to_string()).collect(),
    )))
}

#[test]
fn model_driven_policy_keeps_only_verified_evidence() {
    let q = "How many citations does MemoRAG have?";
    let mut policy = llm(&[
        r#"{"action": "retrieve", "q": "MemoRAG global memory"}"#,
        &format!(
            r#"Reading the header first. {{"action": "read", "paper_id": "{DEMO_ID}", "view": "head"}}"#
        ),
        &format!(
            r#"{{"action": "answer", "text": "63 citations", "evidence": [
                {{"paper_id": "{DEMO_ID}", "view": "head", "quote": "citations: 63"}},
                {{"paper_id": "{DEMO_ID}", "view": "head", "quote": "citations: 6300"}}]}}"#
        ),
    ]);
    let run = deep_research(api(), q, AgentBudget::new(4_000), &mut policy, &opts()).unwrap();
    assert_eq!(run.outcome.status, RunStatus::Answered);
    assert_eq!(run.outcome.answer, "63 citations");
    assert_eq!(run.outcome.evidence.len(), 1);
    assert!(run.outcome.complete);

    let mut policy = llm(&[&format!(
        r#"{{"action": "answer", "text": "lots", "evidence": [{{"paper_id": "{DEMO_ID}", "view": "head", "quote": "citations: 63"}}]}}"#
    )]);
    let run = deep_research(api(), q, AgentBudget::new(4_000), &mut policy, &opts()).unwrap();
    assert!(run.outcome.evidence.is_empty());
    assert!(!run.outcome.complete);
}

#[test]
fn unparseable_model_replies_fall_back_to_the_script() {
    let task = &corpus().research_tasks[3];
    let mut policy = llm(&["I am not sure.", "{not json"]);
    let run = deep_research(
        api(),
        &task.question,
        AgentBudget::new(4_000),
        &mut policy,
        &opts(),
    )
    .unwrap();
    assert!(run.outcome.complete);
    assert!(run.outcome.answer.contains(&task.expected));
}

#[test]
fn api_errors_surface_as_codes() {
    let err = api()
        .view(
            &PaperId::arxiv("2499.99999").unwrap(),
            &paperdesk_core::ViewKind::Head,
        )
        .unwrap_err();
    assert_eq!(
        err.code(),
        Some(paperdesk_core::protocol::ErrorCode::UnknownPaper)
    );
}
