use std::time::Duration;

use paperdesk_agent::cost::verify_evidence;
use paperdesk_agent::{
    deep_research, deep_search, AgentBudget, RawEverythingPolicy, ResearchOptions, RunStatus,
    ScriptedPolicy, SearchConstraints, SearchOptions,
};
use paperdesk_core::retrieval::FilterSet;
use paperdesk_core::Timestamp;
use paperdesk_service::LocalApi;
use paperdesk_testkit::corpus;

use crate::common::{ensure, fixture_store, service};

pub fn deep_search_recall() -> Result<String, String> {
    let svc = service(fixture_store(Duration::ZERO), true);
    let api = LocalApi(&svc);
    let tasks = &corpus().search_tasks;
    ensure(tasks.len() == 10, || format!("{} tasks", tasks.len()))?;
    let mut hits = 0;
    for t in tasks {
        let from: Timestamp = format!("{}T00:00:00", t.publish_from)
            .parse()
            .map_err(|e| format!("{e:?}"))?;
        let to = Timestamp::parse_end_bound(&t.publish_to).map_err(|e| format!("{e:?}"))?;
        let constraints = SearchConstraints {
            filters: FilterSet {
                categories: t.categories.clone(),
                publish_from: Some(from),
                publish_to: Some(to),
                ..FilterSet::default()
            },
            phrases: t.phrases.clone(),
        };
        let s = deep_search(&api, &t.query, &constraints, t.k, &SearchOptions::default())
            .map_err(|e| e.to_string())?;
        ensure(
            s.reads.iter().all(|(_, v)| v != "raw" && v != "json"),
            || format!("{}: read full text", t.query),
        )?;
        let top = s.candidates.first().map(|c| c.arxiv_id.as_str());
        ensure(top == Some(t.target.as_str()), || {
            format!("{:?}: got {top:?}, want {}", t.query, t.target)
        })?;
        hits += 1;
    }
    Ok(format!("Recall@1 = {hits}/{}", tasks.len()))
}

pub fn progressive_saving() -> Result<String, String> {
    let svc = service(fixture_store(Duration::ZERO), true);
    let api = LocalApi(&svc);
    let opts = ResearchOptions::default();
    let tasks = &corpus().research_tasks;
    ensure(tasks.len() == 10, || format!("{} tasks", tasks.len()))?;
    let (mut progressive, mut baseline) = (0usize, 0usize);
    for t in tasks {
        let mut policy = ScriptedPolicy::default();
        let run = deep_research(
            &api,
            &t.question,
            AgentBudget::new(4_000),
            &mut policy,
            &opts,
        )
        .map_err(|e| e.to_string())?;
        let o = &run.outcome;
        ensure(o.status == RunStatus::Answered && o.complete, || {
            format!("{:?}: {:?}", t.question, o.status)
        })?;
        ensure(o.answer.contains(&t.expected), || {
            format!("{:?}: answer {:?}", t.question, o.answer)
        })?;
        ensure(!o.evidence.is_empty(), || {
            format!("{:?}: no evidence", t.question)
        })?;
        for e in &o.evidence {
            ensure(verify_evidence(e, &run.reads), || {
                format!("{:?}: quote {:?} not in the read log", t.question, e.quote)
            })?;
        }
        progressive += o.cost.spent_tokens;

        let mut raw = RawEverythingPolicy::default();
        let run = deep_research(
            &api,
            &t.question,
            AgentBudget::new(1_000_000),
            &mut raw,
            &opts,
        )
        .map_err(|e| e.to_string())?;
        baseline += run.outcome.cost.spent_tokens;
    }
    let ratio = progressive as f64 / baseline as f64;
    ensure(ratio <= 0.30, || format!("progressive/raw = {ratio:.3}"))?;
    Ok(format!(
        "{progressive} vs {baseline} tokens, ratio {ratio:.3}, all evidence verified"
    ))
}
