//! Budget-aware agent over the paper access protocol: deep search
//! (retrieve, screen heads, shortlist) and deep research (escalate from
//! cheap views to sections and full text only as needed, with verifiable
//! evidence and replayable traces).

pub mod api;
pub mod cost;
pub mod local;
pub mod policy;
pub mod research;
pub mod search;
pub mod text;
pub mod trace;

pub use api::{ApiError, HttpApi, PaperApi};
pub use cost::{AgentBudget, CostReport, EvidenceLink, ReadRecord};
pub use local::StoreApi;
pub use policy::{
    Action, AgentState, DecisionPolicy, LlmPolicy, RawEverythingPolicy, ScriptedPolicy,
};
pub use research::{
    deep_research, AgentError, ResearchOptions, ResearchOutcome, ResearchRun, RunStatus,
};
pub use search::{deep_search, SearchConstraints, SearchOptions, Shortlist};
