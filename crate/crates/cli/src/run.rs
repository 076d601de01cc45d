use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use paperdesk_agent::api::{error_from_body, view_params, view_path};
use paperdesk_agent::policy::CommandCompletion;
use paperdesk_agent::trace::{read_trace, replay};
use paperdesk_agent::{
    deep_research, AgentBudget, AgentError, ApiError, HttpApi, LlmPolicy, PaperApi, ResearchOptions,
};
use paperdesk_core::enrich::{
    Denylist, Enricher, FixtureScholarly, FixtureSocial, SubprocessGenerator,
};
use paperdesk_core::ingest::{
    AcquireOptions, CommandConverter, FixtureFetcher, JsonLinesFeed, PdfConverter,
    PreconvertedConverter,
};
use paperdesk_core::protocol::{envelope, retrieval_query_from_params};
use paperdesk_core::retrieval::{SearchIndex, Surrogate};
use paperdesk_core::store::{FileStore, PutOutcome, RecordStore};
use paperdesk_core::sync::{Schedule, SyncError, SyncReport, Syncer};
use paperdesk_core::{Clock, Corpus, PaperId, PaperRecord, SystemClock, ViewKind};
use paperdesk_service::{AccessService, Config, LocalApi, ServiceError};
use serde_json::{json, Value};

use crate::{Cli, CliError, Command, SearchArgs};

type Result<T> = std::result::Result<T, CliError>;

fn with_code<E: Display>(code: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::new(code, e.to_string())
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        CliError::new(e.code.as_str(), e.message)
    }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        match e {
            ApiError::Service { code, message, .. } => CliError::new(code.as_str(), message),
            ApiError::Transport(m) => CliError::new("Transport", m),
            ApiError::Malformed(m) => CliError::new("Malformed", m),
        }
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Api(e) => e.into(),
            AgentError::EmptyBudget => CliError::new("InvalidQuery", e.to_string()),
            AgentError::Trace(e) => CliError::new("Io", format!("trace: {e}")),
        }
    }
}

impl From<SyncError> for CliError {
    fn from(e: SyncError) -> Self {
        let code = match &e {
            SyncError::AlreadyRunning(_) => "AlreadyRunning",
            SyncError::UpstreamUnavailable(_) => "UpstreamUnavailable",
            _ => "Sync",
        };
        CliError::new(code, e.to_string())
    }
}

fn print_line(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::new("Io", e.to_string()))
        }
        _ => Ok(()),
    }
}

fn print_json(v: &Value) -> Result<()> {
    print_line(&v.to_string())
}

fn print_bytes(b: &[u8]) -> Result<()> {
    print_line(std::str::from_utf8(b).map_err(with_code("Internal"))?)
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let default = Path::new("paperdesk.toml");
    match path {
        Some(p) => Config::load(p),
        None if default.exists() => Config::load(default),
        None => Ok(Config::default()),
    }
    .map_err(with_code("Config"))
}

/// Accepts `2409.05591`, `PMC1000001` and `corpus:id`.
fn parse_id(raw: &str) -> Result<PaperId> {
    let parsed = if raw.contains(':') {
        raw.parse()
    } else if raw.len() > 3 && raw[..3].eq_ignore_ascii_case("PMC") {
        PaperId::pmc(raw)
    } else {
        PaperId::arxiv(raw)
    };
    parsed.map_err(with_code("UnknownPaper"))
}

struct Local {
    config: Config,
    clock: Arc<dyn Clock>,
    store: Arc<FileStore>,
    index: Arc<SearchIndex>,
}

impl Local {
    fn open(config: Config) -> Result<Self> {
        let clock: Arc<dyn Clock> = Arc::new(SystemClock);
        let (store, index) =
            paperdesk_service::open_data(&config, clock.clone()).map_err(with_code("Storage"))?;
        Ok(Local {
            config,
            clock,
            store,
            index,
        })
    }

    fn service(&self) -> Result<Arc<AccessService>> {
        paperdesk_service::build(
            &self.config,
            self.store.clone(),
            self.index.clone(),
            self.clock.clone(),
        )
        .map_err(with_code("Config"))
    }

    fn persist_index(&self) -> Result<()> {
        self.index
            .persist(&self.config.index_dir())
            .map(|_| ())
            .map_err(with_code("Storage"))
    }
}

/// Where reads go: a remote service, or an in-process one over the data
/// directory (no authentication or accounting).
enum Target {
    Remote(HttpApi),
    Local(Arc<AccessService>),
}

impl Target {
    fn new(cli: &Cli, config: &Config) -> Result<Self> {
        match &cli.endpoint {
            Some(url) => Ok(Target::Remote(HttpApi::new(url.clone(), cli.token.clone()))),
            None => Local::open(config.clone())?.service().map(Target::Local),
        }
    }

    /// GET against the remote service, printing the body of a 2xx reply verbatim.
    fn remote_get(api: &HttpApi, path: &str, params: Vec<(String, String)>) -> Result<()> {
        let (status, body) = api.get_raw(path, &params)?;
        if !(200..300).contains(&status) {
            return Err(error_from_body(status, &body).into());
        }
        print_line(body.trim_end())
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest {
            manifest,
            artifacts,
        } => {
            let local = Local::open(config)?;
            let artifacts = artifacts.clone().unwrap_or_else(|| parent_dir(manifest));
            let report = ingest(&local, manifest, &artifacts)?;
            print_json(&serde_json::to_value(report).map_err(with_code("Internal"))?)
        }
        Command::Import { records } => {
            let local = Local::open(config)?;
            print_json(&import(&local, records)?)
        }
        Command::Sync { watch } => {
            let local = Arc::new(Local::open(config)?);
            if *watch {
                let schedule = schedule(&local.config)?;
                watch_loop(&local, &schedule, |r| {
                    print_json(&serde_json::to_value(r).unwrap_or_default())
                })
            } else {
                let report = sync_once(&local)?;
                print_json(&serde_json::to_value(report).map_err(with_code("Internal"))?)
            }
        }
        Command::Serve { addr, with_sync } => serve(Local::open(config)?, addr.clone(), *with_sync),
        Command::Get { id, view, section } => {
            let id = parse_id(id)?;
            let view = ViewKind::parse(view, section.as_deref()).map_err(ServiceError::from)?;
            match Target::new(&cli, &config)? {
                Target::Remote(api) => {
                    Target::remote_get(&api, view_path(&id), view_params(&id, &view))
                }
                Target::Local(svc) => print_bytes(&svc.paper_view(&id, &view)?),
            }
        }
        Command::Search { q, filters } => {
            let params = filters.params(q);
            let query =
                retrieval_query_from_params(params.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                    .map_err(ServiceError::from)?;
            match Target::new(&cli, &config)? {
                Target::Remote(api) => {
                    let mut p = vec![("type".to_string(), "retrieve".to_string())];
                    p.extend(params);
                    Target::remote_get(&api, "/arxiv", p)
                }
                Target::Local(svc) => print_bytes(&svc.retrieve(&query)?),
            }
        }
        Command::Find {
            q,
            filters,
            phrases,
            k,
        } => find(&cli, &config, q, filters, phrases, *k),
        Command::Agent {
            question,
            budget,
            seed,
            llm_command,
        } => agent(
            &cli,
            &config,
            question,
            *budget,
            *seed,
            llm_command.as_deref(),
        ),
        Command::Stats { days } => match Target::new(&cli, &config)? {
            Target::Remote(api) => Target::remote_get(
                &api,
                "/stats/usage",
                vec![("days".into(), days.to_string())],
            ),
            Target::Local(_) => Err(CliError::new(
                "InvalidQuery",
                "usage is recorded by a running service; pass --endpoint and --token",
            )),
        },
        Command::Replay { trace } => {
            let events = read_trace(trace).map_err(with_code("Io"))?;
            let report = match Target::new(&cli, &config)? {
                Target::Remote(api) => replay(&events, &api)?,
                Target::Local(svc) => replay(&events, &LocalApi(&svc))?,
            };
            let faithful = report.is_faithful();
            print_json(
                &json!({"steps": report.steps, "mismatches": report.mismatches, "faithful": faithful}),
            )?;
            if faithful {
                Ok(())
            } else {
                Err(CliError::new(
                    "ReplayMismatch",
                    format!(
                        "{} read(s) returned different payloads",
                        report.mismatches.len()
                    ),
                ))
            }
        }
    }
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn find(
    cli: &Cli,
    config: &Config,
    q: &str,
    filters: &SearchArgs,
    phrases: &[String],
    k: usize,
) -> Result<()> {
    let mut params = filters.params(q);
    match Target::new(cli, config)? {
        Target::Remote(api) => {
            params.push(("phrases".into(), phrases.join(";")));
            params.push(("k".into(), k.to_string()));
            Target::remote_get(&api, "/agent/search", params)
        }
        Target::Local(svc) => {
            let query =
                retrieval_query_from_params(params.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                    .map_err(ServiceError::from)?;
            let shortlist = svc.find(&query, phrases.to_vec(), k)?;
            print_json(&envelope(
                serde_json::to_value(shortlist).map_err(with_code("Internal"))?,
                Value::Null,
                Value::Null,
            ))
        }
    }
}

fn agent(
    cli: &Cli,
    config: &Config,
    q: &str,
    budget: Option<usize>,
    seed: u64,
    llm: Option<&str>,
) -> Result<()> {
    let llm = match llm {
        Some(line) => {
            let mut parts = line.split_whitespace().map(str::to_string);
            let program = parts
                .next()
                .ok_or_else(|| CliError::new("Usage", "--llm-command is empty"))?;
            let mut policy = LlmPolicy::new(CommandCompletion {
                program,
                args: parts.collect(),
            });
            policy.fallback.shortlist = config.agent.shortlist;
            Some(policy)
        }
        None => None,
    };
    let outcome = match (Target::new(cli, config)?, llm) {
        (Target::Remote(api), None) => {
            let mut p = vec![
                ("q".to_string(), q.to_string()),
                ("seed".to_string(), seed.to_string()),
            ];
            if let Some(b) = budget {
                p.push(("budget".into(), b.to_string()));
            }
            return Target::remote_get(&api, "/agent/query", p);
        }
        (Target::Remote(api), Some(mut policy)) => {
            let mut b = AgentBudget::new(budget.unwrap_or(config.agent.default_budget));
            b.max_escalations = config.agent.max_escalations;
            let opts = ResearchOptions {
                trace_dir: config.agent.trace_dir.clone(),
                seed,
                ..ResearchOptions::default()
            };
            deep_research(&api as &dyn PaperApi, q, b, &mut policy, &opts)?.outcome
        }
        (Target::Local(svc), Some(mut policy)) => {
            svc.research(q, budget, seed, &mut policy)?.outcome
        }
        (Target::Local(svc), None) => {
            let mut policy = paperdesk_agent::ScriptedPolicy {
                shortlist: svc.settings().shortlist,
            };
            svc.research(q, budget, seed, &mut policy)?.outcome
        }
    };
    print_json(&envelope(
        serde_json::to_value(outcome).map_err(with_code("Internal"))?,
        Value::Null,
        Value::Null,
    ))
}

fn converter(config: &Config) -> Result<Box<dyn PdfConverter>> {
    match &config.sync.pdf_converter {
        Some(line) => CommandConverter::from_command_line(line)
            .map(|c| Box::new(c) as Box<dyn PdfConverter>)
            .ok_or_else(|| CliError::new("Config", "sync.pdf_converter is empty")),
        None => Ok(Box::new(PreconvertedConverter)),
    }
}

fn enricher(config: &Config) -> Result<Enricher> {
    let s = &config.sync;
    let mut e = Enricher::default();
    if let Some(line) = &s.generator_command {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| CliError::new("Config", "sync.generator_command is empty"))?;
        let generator = Arc::new(SubprocessGenerator::new(program, parts.collect()));
        e.generator = generator.clone();
        e.validator = generator;
    }
    if let Some(p) = &s.scholarly_fixture {
        e.scholarly = Some(Arc::new(
            FixtureScholarly::load(p).map_err(with_code("Config"))?,
        ));
    }
    if let Some(p) = &s.social_fixture {
        e.social = Some(Arc::new(
            FixtureSocial::load(p).map_err(with_code("Config"))?,
        ));
    }
    if let Some(p) = &s.repo_denylist {
        e.denylist = Denylist::from_file(p)
            .map_err(|err| CliError::new("Config", format!("{}: {err}", p.display())))?;
    }
    Ok(e)
}

fn run_syncer(
    local: &Local,
    manifest: &Path,
    artifacts: &Path,
    state_dir: PathBuf,
) -> Result<SyncReport> {
    let feed = JsonLinesFeed::new(manifest);
    let fetcher = FixtureFetcher::new(artifacts);
    let converter = converter(&local.config)?;
    let enricher = enricher(&local.config)?;
    let syncer = Syncer {
        feed: &feed,
        fetcher: &fetcher,
        converter: converter.as_ref(),
        store: local.store.as_ref(),
        index: &local.index,
        enricher: &enricher,
        clock: local.clock.as_ref(),
        acquire: local
            .config
            .sync
            .html_min_chars
            .map_or_else(AcquireOptions::default, |html_min_chars| AcquireOptions {
                html_min_chars,
            }),
        state_dir,
        index_dir: Some(local.config.index_dir()),
    };
    Ok(syncer.run()?)
}

/// Processes every manifest entry regardless of the sync watermark. Papers
/// whose stored version is already current are left alone.
fn ingest(local: &Local, manifest: &Path, artifacts: &Path) -> Result<SyncReport> {
    if !manifest.is_file() {
        return Err(CliError::new(
            "NotFound",
            format!("no manifest at {}", manifest.display()),
        ));
    }
    let state_dir = local.config.state_dir().join("ingest");
    match std::fs::remove_file(state_dir.join("sync-state.json")) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
            return Err(CliError::new("Io", e.to_string()))
        }
        _ => {}
    }
    run_syncer(local, manifest, artifacts, state_dir)
}

fn sync_once(local: &Local) -> Result<SyncReport> {
    let manifest = local
        .config
        .sync
        .manifest
        .clone()
        .ok_or_else(|| CliError::new("Config", "sync.manifest is not set"))?;
    let artifacts = local
        .config
        .sync
        .artifacts_dir
        .clone()
        .unwrap_or_else(|| parent_dir(&manifest));
    run_syncer(local, &manifest, &artifacts, local.config.state_dir())
}

fn schedule(config: &Config) -> Result<Schedule> {
    let s = config
        .sync
        .schedule
        .as_deref()
        .ok_or_else(|| CliError::new("Config", "sync.schedule is not set"))?;
    s.parse().map_err(|e: String| CliError::new("Config", e))
}

/// Runs a sync at every scheduled instant, forever. A failed run is
/// reported and retried at the next slot.
fn watch_loop(
    local: &Local,
    schedule: &Schedule,
    mut report: impl FnMut(&SyncReport) -> Result<()>,
) -> Result<()> {
    loop {
        let now = local.clock.now();
        let next = schedule.next_after(now);
        tracing::info!(next = %next, "waiting for next sync");
        std::thread::sleep(Duration::from_secs((next.unix() - now.unix()).max(0) as u64));
        match sync_once(local) {
            Ok(r) => report(&r)?,
            Err(e) => {
                tracing::error!(code = %e.code, message = %e.message, "scheduled sync failed")
            }
        }
    }
}

fn import(local: &Local, paths: &[PathBuf]) -> Result<Value> {
    let (mut inserted, mut updated, mut unchanged) = (0, 0, 0);
    let mut surrogates = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::new("Io", format!("{}: {e}", p.display())))?;
        let record = PaperRecord::from_json(&text)
            .map_err(|e| CliError::new("SchemaViolation", format!("{}: {e}", p.display())))?;
        if record.paper_id().corpus() == Corpus::Arxiv {
            surrogates.push(Surrogate::from_record(&record));
        }
        match local.store.put(record).map_err(with_code("Storage"))? {
            PutOutcome::Inserted => inserted += 1,
            PutOutcome::Updated => updated += 1,
            PutOutcome::Unchanged => unchanged += 1,
        }
    }
    local.index.upsert_many(surrogates);
    local.persist_index()?;
    Ok(json!({"inserted": inserted, "updated": updated, "unchanged": unchanged}))
}

fn serve(local: Local, addr: Option<String>, with_sync: bool) -> Result<()> {
    let addr = addr
        .unwrap_or_else(|| format!("{}:{}", local.config.server.bind, local.config.server.port));
    let svc = local.service()?;
    let local = Arc::new(local);
    if with_sync {
        let schedule = schedule(&local.config)?;
        let l = local.clone();
        std::thread::Builder::new()
            .name("sync".into())
            .spawn(move || {
                let _ = watch_loop(&l, &schedule, |r| {
                    tracing::info!(
                        new = r.new,
                        updated = r.updated,
                        failed = r.failed,
                        "scheduled sync done"
                    );
                    Ok(())
                });
            })
            .map_err(with_code("Io"))?;
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(with_code("Io"))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::new("Io", format!("{addr}: {e}")))?;
        let bound = listener.local_addr().map_err(with_code("Io"))?;
        print_json(&json!({"listening": format!("http://{bound}")}))?;
        paperdesk_service::http::serve(listener, svc)
            .await
            .map_err(with_code("Io"))
    })
}
