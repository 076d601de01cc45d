//! Transport-independent request handling.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use paperdesk_agent::research::{deep_research, AgentError, ResearchOptions, ResearchRun};
use paperdesk_agent::search::{deep_search, SearchConstraints, SearchOptions, Shortlist};
use paperdesk_agent::{AgentBudget, ApiError, DecisionPolicy, PaperApi, ScriptedPolicy};
use paperdesk_core::protocol::{self, retrieval_query_from_params, ErrorBody, ErrorCode};
use paperdesk_core::retrieval::{RetrievalError, RetrievalQuery, SearchIndex};
use paperdesk_core::store::{RecordStore, StoreError};
use paperdesk_core::{
    Clock, Corpus, PaperId, PaperRecord, SystemClock, TokenEstimator, ViewError, ViewKind,
    WordPunctEstimator,
};
use serde_json::{json, Value};

use crate::auth::{ApiToken, TokenRegistry};
use crate::cache::{CacheKey, LruTtlCache, NoCache, ViewCache};
use crate::config::Config;
use crate::ledger::{day_of, UsageLedger};

/// A request stripped of its transport.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApiRequest {
    pub path: String,
    pub params: Vec<(String, String)>,
    /// Value of a `Bearer` authorization header; `Some("")` for a malformed one.
    pub bearer: Option<String>,
}

impl ApiRequest {
    pub fn new(path: &str, params: &[(&str, &str)], bearer: Option<&str>) -> Self {
        ApiRequest {
            path: path.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            bearer: bearer.map(str::to_string),
        }
    }

    fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Bytes,
}

impl ApiResponse {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).expect("service bodies are JSON")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ServiceError {
            code,
            message: message.into(),
        }
    }

    pub(crate) fn response(&self) -> ApiResponse {
        let body = json!({
            "status": "error",
            "error": ErrorBody { code: self.code, message: self.message.clone() },
        });
        ApiResponse {
            status: self.code.status(),
            body: Bytes::from(serde_json::to_vec(&body).unwrap()),
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        ServiceError::new(ErrorCode::UpstreamUnavailable, e.to_string())
    }
}

impl From<ViewError> for ServiceError {
    fn from(e: ViewError) -> Self {
        match e {
            ViewError::SectionNotFound(_) => {
                ServiceError::new(ErrorCode::SectionNotFound, e.to_string())
            }
            ViewError::InvalidView(_) => ServiceError::new(ErrorCode::InvalidView, e.to_string()),
        }
    }
}

impl From<RetrievalError> for ServiceError {
    fn from(e: RetrievalError) -> Self {
        let code = match e {
            RetrievalError::InvalidFilter(_) => ErrorCode::InvalidFilter,
            RetrievalError::InvalidQuery(_) => ErrorCode::InvalidQuery,
            _ => ErrorCode::UpstreamUnavailable,
        };
        ServiceError::new(code, e.to_string())
    }
}

impl From<ApiError> for ServiceError {
    fn from(e: ApiError) -> Self {
        match e {
            ApiError::Service { code, message, .. } => ServiceError::new(code, message),
            other => ServiceError::new(ErrorCode::Internal, other.to_string()),
        }
    }
}

impl From<AgentError> for ServiceError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Api(a) => a.into(),
            AgentError::EmptyBudget => ServiceError::new(ErrorCode::InvalidQuery, e.to_string()),
            AgentError::Trace(_) => ServiceError::new(ErrorCode::Internal, e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, ServiceError>;
/// Returns the reply body and the endpoint name charged to the ledger.
type Endpoint = fn(&AccessService, &ApiRequest) -> Result<(Bytes, String)>;

#[derive(Debug, Clone)]
pub struct ServiceSettings {
    pub preview_len: usize,
    pub allowlist: HashSet<String>,
    pub trace_dir: Option<PathBuf>,
    pub default_budget: usize,
    pub max_escalations: usize,
    pub shortlist: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self::from_config(&Config::default())
    }
}

impl ServiceSettings {
    pub fn from_config(c: &Config) -> Self {
        ServiceSettings {
            preview_len: c.preview_len,
            allowlist: c.allowlist.iter().cloned().collect(),
            trace_dir: c.agent.trace_dir.clone(),
            default_budget: c.agent.default_budget,
            max_escalations: c.agent.max_escalations,
            shortlist: c.agent.shortlist,
        }
    }
}

/// Per-paper write generations; a cache fill is dropped if the paper was
/// written while its payload was being built.
#[derive(Default)]
struct Generations(Mutex<HashMap<PaperId, u64>>);

pub struct AccessService {
    store: Arc<dyn RecordStore>,
    index: Arc<SearchIndex>,
    cache: Arc<dyn ViewCache>,
    generations: Arc<Generations>,
    ledger: UsageLedger,
    tokens: TokenRegistry,
    clock: Arc<dyn Clock>,
    estimator: Arc<dyn TokenEstimator>,
    settings: ServiceSettings,
}

pub struct ServiceBuilder {
    store: Arc<dyn RecordStore>,
    index: Arc<SearchIndex>,
    cache: Option<Arc<dyn ViewCache>>,
    tokens: TokenRegistry,
    clock: Arc<dyn Clock>,
    settings: ServiceSettings,
}

impl ServiceBuilder {
    pub fn cache(mut self, cache: Arc<dyn ViewCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn no_cache(self) -> Self {
        self.cache(Arc::new(NoCache))
    }

    pub fn tokens(mut self, tokens: TokenRegistry) -> Self {
        self.tokens = tokens;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn settings(mut self, settings: ServiceSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn build(self) -> Arc<AccessService> {
        let cache = self.cache.unwrap_or_else(|| {
            Arc::new(LruTtlCache::new(
                10_000,
                Duration::from_secs(3600),
                self.clock.clone(),
            ))
        });
        let generations = Arc::new(Generations::default());
        {
            let cache = cache.clone();
            let generations = generations.clone();
            self.store.subscribe(Arc::new(move |id: &PaperId| {
                let mut g = generations.0.lock().unwrap_or_else(|e| e.into_inner());
                *g.entry(id.clone()).or_default() += 1;
                cache.invalidate_paper(id);
            }));
        }
        Arc::new(AccessService {
            store: self.store,
            index: self.index,
            cache,
            generations,
            ledger: UsageLedger::default(),
            tokens: self.tokens,
            clock: self.clock,
            estimator: Arc::new(WordPunctEstimator),
            settings: self.settings,
        })
    }
}

/// Who is asking.
enum Caller<'a> {
    Token(&'a ApiToken),
    Anonymous,
}

fn to_bytes(v: &Value) -> Bytes {
    Bytes::from(serde_json::to_vec(v).expect("JSON values serialize"))
}

fn envelope(data: Value) -> Bytes {
    to_bytes(&protocol::envelope(data, Value::Null, Value::Null))
}

fn parse_id(corpus: Corpus, raw: Option<&str>) -> Result<PaperId> {
    let raw = raw.ok_or_else(|| ServiceError::new(ErrorCode::InvalidQuery, "missing id"))?;
    PaperId::new(corpus, raw).map_err(|e| ServiceError::new(ErrorCode::UnknownPaper, e.to_string()))
}

impl AccessService {
    pub fn builder(store: Arc<dyn RecordStore>, index: Arc<SearchIndex>) -> ServiceBuilder {
        ServiceBuilder {
            store,
            index,
            cache: None,
            tokens: TokenRegistry::default(),
            clock: Arc::new(SystemClock),
            settings: ServiceSettings::default(),
        }
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    pub fn cache(&self) -> &dyn ViewCache {
        self.cache.as_ref()
    }

    pub fn index(&self) -> &SearchIndex {
        &self.index
    }

    pub fn store(&self) -> &dyn RecordStore {
        self.store.as_ref()
    }

    pub fn settings(&self) -> &ServiceSettings {
        &self.settings
    }

    pub fn handle(&self, req: &ApiRequest) -> ApiResponse {
        match self.route(req) {
            Ok(body) => ApiResponse { status: 200, body },
            Err(e) => e.response(),
        }
    }

    fn route(&self, req: &ApiRequest) -> Result<Bytes> {
        let path = req.path.trim_end_matches('/');
        let id_param = req.param("id");
        // Only per-paper reads of allowlisted ids are open.
        let (open, endpoint): (bool, Endpoint) = match path {
            "/arxiv" => {
                let retrieve = req.param("type") == Some("retrieve");
                (
                    !retrieve && id_param.is_some_and(|i| self.settings.allowlist.contains(i)),
                    Self::arxiv,
                )
            }
            "/arxiv/trending_signal" => (
                id_param.is_some_and(|i| self.settings.allowlist.contains(i)),
                Self::trending,
            ),
            "/pmc" => (false, Self::pmc),
            "/stats/usage" => (false, Self::usage),
            "/agent/query" => (false, Self::agent_query),
            "/agent/search" => (false, Self::agent_search),
            _ => {
                return Err(ServiceError::new(
                    ErrorCode::NotFound,
                    format!("no endpoint {}", req.path),
                ))
            }
        };
        let caller = match req.bearer.as_deref() {
            Some(t) => Caller::Token(
                self.tokens
                    .lookup(t)
                    .ok_or_else(|| ServiceError::new(ErrorCode::Unauthorized, "unknown token"))?,
            ),
            None if open => Caller::Anonymous,
            None => {
                return Err(ServiceError::new(
                    ErrorCode::Unauthorized,
                    "missing bearer token",
                ))
            }
        };
        let Caller::Token(token) = caller else {
            return endpoint(self, req).map(|(b, _)| b);
        };
        let day = day_of(self.clock.now());
        if !self.ledger.try_admit(&token.token, &day, token.quota) {
            return Err(ServiceError::new(
                ErrorCode::QuotaExceeded,
                "daily quota exhausted",
            ));
        }
        let out = if path == "/stats/usage" {
            self.usage_for(req, token)
        } else {
            endpoint(self, req)
        };
        self.ledger.settle(
            &token.token,
            &day,
            out.as_ref().ok().map(|(_, k)| k.as_str()),
        );
        out.map(|(b, _)| b)
    }

    fn arxiv(&self, req: &ApiRequest) -> Result<(Bytes, String)> {
        let kind = req
            .param("type")
            .ok_or_else(|| ServiceError::new(ErrorCode::InvalidView, "missing type"))?;
        if kind == "retrieve" {
            let q = retrieval_query_from_params(req.pairs())?;
            return Ok((self.retrieve(&q)?, "retrieve".into()));
        }
        let view = ViewKind::parse(kind, req.param("section"))?;
        let id = parse_id(Corpus::Arxiv, req.param("id"))?;
        Ok((self.view_bytes(&id, &view)?, view.name().to_string()))
    }

    fn pmc(&self, req: &ApiRequest) -> Result<(Bytes, String)> {
        let kind = req
            .param("type")
            .ok_or_else(|| ServiceError::new(ErrorCode::InvalidView, "missing type"))?;
        let view = match kind {
            "head" => ViewKind::Head,
            "json" => ViewKind::Json,
            "brief" | "preview" | "section" | "raw" | "retrieve" => {
                return Err(ServiceError::new(
                    ErrorCode::UnsupportedView,
                    format!(
                    "type={kind} is not available for PMC papers; only head and json are served"
                ),
                ))
            }
            other => {
                return Err(ServiceError::new(
                    ErrorCode::InvalidView,
                    format!("unknown view type '{other}'"),
                ))
            }
        };
        let id = parse_id(Corpus::Pmc, req.param("id"))?;
        Ok((self.view_bytes(&id, &view)?, format!("pmc.{}", view.name())))
    }

    fn trending(&self, req: &ApiRequest) -> Result<(Bytes, String)> {
        let id = parse_id(Corpus::Arxiv, req.param("id"))?;
        let key = CacheKey {
            endpoint: "trending",
            paper_id: id.clone(),
            view: "trending",
            params: String::new(),
        };
        let bytes = self.cached(key, || {
            Ok(to_bytes(&protocol::trending_envelope(&*self.load(&id)?)))
        })?;
        Ok((bytes, "trending_signal".into()))
    }

    fn usage(&self, _req: &ApiRequest) -> Result<(Bytes, String)> {
        unreachable!("usage is routed through usage_for")
    }

    fn usage_for(&self, req: &ApiRequest, token: &ApiToken) -> Result<(Bytes, String)> {
        let days = match req.param("days") {
            None => 1,
            Some(d) => d.trim().parse::<i64>().map_err(|_| {
                ServiceError::new(ErrorCode::InvalidQuery, "days must be an integer")
            })?,
        };
        if !(1..=3650).contains(&days) {
            return Err(ServiceError::new(
                ErrorCode::InvalidQuery,
                "days must be between 1 and 3650",
            ));
        }
        let now = self.clock.now();
        let s = self.ledger.summary(&token.token, now, days as u32);
        let used_today = self.ledger.used_on(&token.token, &day_of(now));
        let data = json!({
            "label": token.label,
            "days": s.days,
            "from": s.from,
            "to": s.to,
            "by_endpoint": s.by_endpoint,
            "total": s.total,
            "quota": token.quota.map(|q| json!({"limit": q, "used_today": used_today, "remaining_today": q.saturating_sub(used_today)})),
        });
        Ok((envelope(data), "usage".into()))
    }

    fn agent_query(&self, req: &ApiRequest) -> Result<(Bytes, String)> {
        let q = req
            .param("q")
            .ok_or_else(|| ServiceError::new(ErrorCode::InvalidQuery, "missing q"))?;
        let num = |k: &str, default: u64| -> Result<u64> {
            req.param(k).map_or(Ok(default), |v| {
                v.trim().parse().map_err(|_| {
                    ServiceError::new(ErrorCode::InvalidQuery, format!("bad {k} '{v}'"))
                })
            })
        };
        let budget = req
            .param("budget")
            .map(|_| num("budget", 0))
            .transpose()?
            .map(|b| b as usize);
        let mut policy = ScriptedPolicy {
            shortlist: self.settings.shortlist,
        };
        let run = self.research(q, budget, num("seed", 0)?, &mut policy)?;
        let data = serde_json::to_value(&run.outcome).unwrap();
        Ok((envelope(data), "agent.query".into()))
    }

    /// Runs the research agent in process with this service's budget,
    /// escalation and trace settings. `/agent/query` is this call with the
    /// scripted policy.
    pub fn research(
        &self,
        question: &str,
        budget: Option<usize>,
        seed: u64,
        policy: &mut dyn DecisionPolicy,
    ) -> std::result::Result<ResearchRun, AgentError> {
        let mut budget = AgentBudget::new(budget.unwrap_or(self.settings.default_budget));
        budget.max_escalations = self.settings.max_escalations;
        let opts = ResearchOptions {
            estimator: self.estimator.clone(),
            trace_dir: self.settings.trace_dir.clone(),
            seed,
            ..ResearchOptions::default()
        };
        deep_research(&LocalApi(self), question, budget, policy, &opts)
    }

    /// Screened shortlist for `query`; `/agent/search` is this call.
    pub fn find(
        &self,
        query: &RetrievalQuery,
        phrases: Vec<String>,
        k: usize,
    ) -> std::result::Result<Shortlist, ApiError> {
        let constraints = SearchConstraints {
            filters: query.filters.clone(),
            phrases,
        };
        deep_search(
            &LocalApi(self),
            &query.q,
            &constraints,
            k,
            &SearchOptions::default(),
        )
    }

    fn agent_search(&self, req: &ApiRequest) -> Result<(Bytes, String)> {
        let q = retrieval_query_from_params(req.pairs())?;
        let phrases: Vec<String> = req
            .params
            .iter()
            .filter(|(k, _)| k == "phrases" || k == "phrase")
            .flat_map(|(_, v)| v.split(';'))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let k = match req.param("k") {
            None => 5,
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| ServiceError::new(ErrorCode::InvalidQuery, format!("bad k '{v}'")))?,
        };
        let shortlist = self.find(&q, phrases, k)?;
        let data = serde_json::to_value(&shortlist).unwrap();
        Ok((envelope(data), "agent.search".into()))
    }

    fn load(&self, id: &PaperId) -> Result<Arc<PaperRecord>> {
        self.store.get(id)?.ok_or_else(|| {
            ServiceError::new(ErrorCode::UnknownPaper, format!("unknown paper {id}"))
        })
    }

    fn cached(&self, key: CacheKey, build: impl FnOnce() -> Result<Bytes>) -> Result<Bytes> {
        if let Some(b) = self.cache.get(&key) {
            return Ok(b);
        }
        let generation = |s: &Self| -> u64 {
            s.generations
                .0
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .get(&key.paper_id)
                .copied()
                .unwrap_or(0)
        };
        let before = generation(self);
        let bytes = build()?;
        let g = self.generations.0.lock().unwrap_or_else(|e| e.into_inner());
        if g.get(&key.paper_id).copied().unwrap_or(0) == before {
            self.cache.set(key, bytes.clone());
        }
        drop(g);
        Ok(bytes)
    }

    /// Serialized envelope for one view of one paper.
    pub fn view_bytes(&self, id: &PaperId, view: &ViewKind) -> Result<Bytes> {
        let params = match view {
            ViewKind::Section(sel) => sel.to_string(),
            ViewKind::Preview => self.settings.preview_len.to_string(),
            _ => String::new(),
        };
        let endpoint = match id.corpus() {
            Corpus::Arxiv => "arxiv",
            Corpus::Pmc => "pmc",
        };
        let key = CacheKey {
            endpoint,
            paper_id: id.clone(),
            view: view.name(),
            params,
        };
        self.cached(key, || {
            let r = self.load(id)?;
            Ok(to_bytes(&protocol::view_envelope(
                &r,
                view,
                self.settings.preview_len,
            )?))
        })
    }

    /// [`Self::view_bytes`] restricted to the views each corpus serves.
    pub fn paper_view(&self, id: &PaperId, view: &ViewKind) -> Result<Bytes> {
        if id.corpus() == Corpus::Pmc && !matches!(view, ViewKind::Head | ViewKind::Json) {
            return Err(ServiceError::new(
                ErrorCode::UnsupportedView,
                format!(
                    "type={} is not available for PMC papers; only head and json are served",
                    view.name()
                ),
            ));
        }
        self.view_bytes(id, view)
    }

    pub fn retrieve(&self, q: &RetrievalQuery) -> Result<Bytes> {
        Ok(to_bytes(&protocol::retrieve_envelope(
            &self.index,
            self.store.as_ref(),
            q,
        )?))
    }
}

/// The service seen as a [`PaperApi`], for the built-in agent endpoints.
/// Reads go through the cache but bypass authentication and accounting; the
/// agent request itself is what gets counted.
pub struct LocalApi<'a>(pub &'a AccessService);

fn to_value(b: Result<Bytes>) -> std::result::Result<Value, ApiError> {
    match b {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| ApiError::Malformed(e.to_string())),
        Err(e) => Err(ApiError::Service {
            status: e.code.status(),
            code: e.code,
            message: e.message,
        }),
    }
}

impl PaperApi for LocalApi<'_> {
    fn view(&self, id: &PaperId, view: &ViewKind) -> std::result::Result<Value, ApiError> {
        to_value(self.0.paper_view(id, view))
    }

    fn retrieve(&self, query: &RetrievalQuery) -> std::result::Result<Value, ApiError> {
        to_value(self.0.retrieve(query))
    }

    fn trending(&self, id: &PaperId) -> std::result::Result<Value, ApiError> {
        let req = ApiRequest {
            path: "/arxiv/trending_signal".into(),
            params: vec![("id".into(), id.as_str().to_string())],
            bearer: None,
        };
        to_value(self.0.trending(&req).map(|(b, _)| b))
    }
}
