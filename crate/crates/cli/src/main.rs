//! `paperdesk`: ingest, sync, serve and read papers from the command line.
//!
//! Every command prints one JSON document on stdout. Failures print
//! `{"error":{"code":...,"message":...}}` on stderr and exit nonzero.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "paperdesk",
    version,
    about = "Agent-facing paper access: ingest, sync, serve and read"
)]
struct Cli {
    /// TOML config; `paperdesk.toml` in the working directory is used when present.
    #[arg(long, global = true, env = "PAPERDESK_CONFIG")]
    config: Option<PathBuf>,
    /// Base URL of a running service. Without it, reads go straight to the local data directory.
    #[arg(long, global = true, env = "PAPERDESK_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, global = true, env = "PAPERDESK_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, enrich and index every paper listed in a JSON-lines manifest.
    Ingest {
        manifest: PathBuf,
        /// Root of `<corpus>/<id>.{html,pdf,md}` artifacts; defaults to the manifest's directory.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Store canonical record JSON files as they are.
    Import {
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
    /// Pull what changed in the configured feed since the last run.
    Sync {
        /// Keep running on the configured schedule.
        #[arg(long)]
        watch: bool,
    },
    /// Serve the REST protocol.
    Serve {
        /// Overrides `server.bind`/`server.port`, e.g. `0.0.0.0:9000`.
        #[arg(long)]
        addr: Option<String>,
        /// Also run the scheduled sync in the background.
        #[arg(long)]
        with_sync: bool,
    },
    /// Print one view of a paper.
    Get {
        /// arXiv id, `PMC…` id, or `corpus:id`.
        id: String,
        #[arg(long, default_value = "head")]
        view: String,
        /// Section index or name, for `--view section`.
        #[arg(long)]
        section: Option<String>,
    },
    /// Ranked retrieval over the arXiv index.
    Search {
        q: String,
        #[command(flatten)]
        filters: SearchArgs,
    },
    /// Answer a question by reading papers under a token budget.
    Agent {
        question: String,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Decide each step with this command (prompt on stdin, JSON action on stdout)
        /// instead of the scripted policy.
        #[arg(long)]
        llm_command: Option<String>,
    },
    /// Multi-constraint paper search returning a screened shortlist.
    Find {
        q: String,
        #[command(flatten)]
        filters: SearchArgs,
        /// Phrase that must appear in the title, abstract, keywords or TL;DR; repeatable.
        #[arg(long = "phrase")]
        phrases: Vec<String>,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    /// Usage for the current token over the last `days` days (needs --endpoint).
    Stats {
        #[arg(long, default_value_t = 1)]
        days: u32,
    },
    /// Re-issue the reads of an agent trace and compare payload digests.
    Replay { trace: PathBuf },
}

#[derive(Args, Clone, Default)]
struct SearchArgs {
    #[arg(long)]
    mode: Option<String>,
    /// Comma separated; any may match.
    #[arg(long)]
    categories: Option<String>,
    /// Repeatable; all must match.
    #[arg(long = "author")]
    authors: Vec<String>,
    /// Earliest publish date, `YYYY-MM-DD` or RFC 3339.
    #[arg(long)]
    from: Option<String>,
    /// Latest publish date, inclusive.
    #[arg(long)]
    to: Option<String>,
    #[arg(long)]
    min_citations: Option<String>,
    /// Case-insensitive substring of the venue.
    #[arg(long)]
    venue: Option<String>,
    #[arg(long)]
    offset: Option<String>,
    #[arg(long)]
    limit: Option<String>,
}

impl SearchArgs {
    fn params(&self, q: &str) -> Vec<(String, String)> {
        let mut out = vec![("q".to_string(), q.to_string())];
        let mut push = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        };
        push("mode", &self.mode);
        push("categories", &self.categories);
        push("from", &self.from);
        push("to", &self.to);
        push("min_citations", &self.min_citations);
        push("venue", &self.venue);
        push("offset", &self.offset);
        push("limit", &self.limit);
        out.extend(
            self.authors
                .iter()
                .map(|a| ("authors".to_string(), a.clone())),
        );
        out
    }
}

/// A failure reported as `{"error":{"code","message"}}`.
#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        CliError {
            code: code.into(),
            message: message.into(),
            exit: 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError {
                code: "Usage".into(),
                message: e.render().to_string().trim().to_string(),
                exit: 2,
            };
            return fail(&err);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("PAPERDESK_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    match run::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!(
        "{}",
        json!({"error": {"code": e.code, "message": e.message}})
    );
    ExitCode::from(e.exit)
}
