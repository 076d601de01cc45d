//! Acceptance suite: one PASS/FAIL line per criterion, each with a pinned
//! wall-clock limit. Fixture loading happens before the clocks start.

mod agents;
mod common;
mod data;
mod serving;
mod sync;

use std::process::ExitCode;
use std::time::{Duration, Instant};

type Check = fn() -> Result<String, String>;

const CRITERIA: [(&str, u64, Check); 10] = [
    (
        "schema fidelity of the demo head view",
        1,
        data::schema_fidelity,
    ),
    (
        "segmentation partition on fixtures and heading fuzz",
        10,
        data::segmentation_partition,
    ),
    (
        "preview prefix length and truncation flag",
        1,
        data::preview_contract,
    ),
    (
        "lexical/dense/hybrid rankings equal brute-force oracles",
        30,
        data::retrieval_oracles,
    ),
    (
        "filter soundness and anti-monotonicity",
        30,
        data::filter_properties,
    ),
    (
        "cache: zero store reads when warm, identical bytes, >=2x faster",
        120,
        serving::cache_behavior,
    ),
    (
        "concurrency soak: 16 clients x 10,000 requests",
        300,
        serving::concurrency_soak,
    ),
    (
        "deep search Recall@1 on planted tasks",
        60,
        agents::deep_search_recall,
    ),
    (
        "progressive reading <= 30% of fetch-raw baseline",
        120,
        agents::progressive_saving,
    ),
    (
        "sync idempotence, crash convergence and freshness",
        60,
        sync::sync_properties,
    ),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    common::warm_up();
    let mut failed = 0;
    let mut ran = 0;
    for (name, limit_secs, check) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let limit = Duration::from_secs(limit_secs);
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; over the time limit")),
            other => other,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!(
            "{tag} {name} [{:.2}s / {limit_secs}s] {detail}",
            elapsed.as_secs_f64()
        );
        failed += usize::from(result.is_err());
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
