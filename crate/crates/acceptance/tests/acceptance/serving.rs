use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use paperdesk_agent::HttpApi;
use paperdesk_core::Corpus;
use paperdesk_service::ledger::day_of;
use paperdesk_service::{AccessService, ApiRequest};
use paperdesk_testkit::{corpus, fixture_now, random};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::common::{ensure, fixture_store, service, TOKENS};

fn ids(corpus_kind: Corpus) -> Vec<String> {
    corpus()
        .records()
        .iter()
        .filter(|r| r.paper_id().corpus() == corpus_kind)
        .map(|r| r.paper_id().as_str().to_string())
        .collect()
}

/// Issues `n` preview reads round-robin over `ids` from `threads` threads.
/// Returns the mean latency and the body seen for each id.
fn preview_run(
    svc: &AccessService,
    ids: &[String],
    n: usize,
    threads: usize,
) -> Result<(f64, HashMap<String, Vec<u8>>), String> {
    let next = AtomicUsize::new(0);
    let bodies: Mutex<HashMap<String, Vec<u8>>> = Mutex::default();
    let total = Mutex::new(Duration::ZERO);
    let errors = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let id = &ids[i % ids.len()];
                let req =
                    ApiRequest::new("/arxiv", &[("type", "preview"), ("id", id)], Some("alpha"));
                let start = Instant::now();
                let resp = svc.handle(&req);
                *total.lock().unwrap() += start.elapsed();
                if resp.status != 200 {
                    errors
                        .lock()
                        .unwrap()
                        .push(format!("{id}: status {}", resp.status));
                    continue;
                }
                let mut b = bodies.lock().unwrap();
                let seen = b.entry(id.clone()).or_insert_with(|| resp.body.to_vec());
                if seen[..] != resp.body[..] {
                    errors
                        .lock()
                        .unwrap()
                        .push(format!("{id}: body changed between reads"));
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    ensure(errors.is_empty(), || errors.join("; "))?;
    Ok((
        total.into_inner().unwrap().as_secs_f64() / n as f64,
        bodies.into_inner().unwrap(),
    ))
}

pub fn cache_behavior() -> Result<String, String> {
    let delay = Duration::from_millis(5);
    let arxiv = ids(Corpus::Arxiv);

    let cold_store = fixture_store(delay);
    let cold = service(cold_store.clone(), false);
    let (cold_mean, cold_bodies) = preview_run(&cold, &arxiv, 1_000, 16)?;
    ensure(cold_store.reads() >= 1_000, || {
        format!("uncached run read the store {} times", cold_store.reads())
    })?;

    let warm_store = fixture_store(delay);
    let warm = service(warm_store.clone(), true);
    preview_run(&warm, &arxiv, arxiv.len(), 1)?;
    let before = warm_store.reads();
    let (warm_mean, warm_bodies) = preview_run(&warm, &arxiv, 1_000, 16)?;
    let warm_reads = warm_store.reads() - before;
    ensure(warm_reads == 0, || {
        format!("{warm_reads} store reads on warm hits")
    })?;
    ensure(cold_bodies == warm_bodies, || {
        "warm payloads differ from cold ones".into()
    })?;

    let ratio = cold_mean / warm_mean;
    ensure(ratio >= 2.0, || format!("warm/cold speedup {ratio:.2}x"))?;
    Ok(format!(
        "cold {:.3} ms, warm {:.4} ms, speedup {ratio:.0}x, 0 warm store reads",
        cold_mean * 1e3,
        warm_mean * 1e3
    ))
}

const QUERIES: [&str; 8] = [
    "memory",
    "global memory retrieval",
    "sparse attention",
    "graph neural networks",
    "protein structure",
    "retrieval augmented generation",
    "token budget",
    "reinforcement learning",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Req {
    path: &'static str,
    params: Vec<(String, String)>,
    /// Index into `TOKENS`, or `ANON` / `BAD`.
    token: usize,
}

const ANON: usize = 3;
const BAD: usize = 4;

fn p(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn gen_request(rng: &mut impl Rng, arxiv: &[String], pmc: &[String]) -> Req {
    let token = match rng.random_range(0..100) {
        0..40 => 0,
        40..65 => 1,
        65..85 => 2,
        85..95 => ANON,
        _ => BAD,
    };
    let id = arxiv.choose(rng).unwrap().as_str();
    let roll = rng.random_range(0..100);
    let (path, params) = match roll {
        0..45 => {
            let view = *["brief", "head", "preview", "raw", "json", "section"]
                .choose(rng)
                .unwrap();
            let mut params = p(&[("type", view), ("id", id)]);
            if view == "section" {
                params.push(("section".into(), rng.random_range(0..8).to_string()));
            }
            ("/arxiv", params)
        }
        45..62 => {
            let mode = *["lexical", "dense", "hybrid"].choose(rng).unwrap();
            let mut params = p(&[
                ("type", "retrieve"),
                ("q", QUERIES.choose(rng).unwrap()),
                ("mode", mode),
            ]);
            if rng.random_bool(0.3) {
                params.push(("categories".into(), "cs.CL,cs.LG".into()));
            }
            params.push(("limit".into(), rng.random_range(1..20).to_string()));
            ("/arxiv", params)
        }
        62..72 => ("/arxiv/trending_signal", p(&[("id", id)])),
        72..80 => {
            let view = *["head", "json", "preview"].choose(rng).unwrap();
            (
                "/pmc",
                p(&[("type", view), ("id", pmc.choose(rng).unwrap())]),
            )
        }
        80..85 => (
            "/stats/usage",
            p(&[("days", &rng.random_range(1..4).to_string())]),
        ),
        85..90 => ("/arxiv", p(&[("type", "head"), ("id", "2499.99999")])),
        90..95 => ("/arxiv", p(&[("type", "bogus"), ("id", id)])),
        95..99 => ("/nowhere", vec![]),
        _ => (
            "/agent/search",
            p(&[("q", QUERIES.choose(rng).unwrap()), ("k", "3")]),
        ),
    };
    Req {
        path,
        params,
        token,
    }
}

#[derive(Default)]
struct ClientLog {
    /// First (status, body) seen per request; usage replies and quota
    /// rejections are excluded since they depend on interleaving.
    first: HashMap<Req, (u16, String)>,
    mismatches: Vec<String>,
    server_errors: usize,
    ok_by_token: [u64; 3],
    requests: usize,
}

fn comparable(req: &Req, status: u16) -> bool {
    req.path != "/stats/usage" && status != 429
}

pub fn concurrency_soak() -> Result<String, String> {
    const CLIENTS: usize = 16;
    const PER_CLIENT: usize = 10_000;
    let arxiv = ids(Corpus::Arxiv);
    let pmc = ids(Corpus::Pmc);
    let svc = service(fixture_store(Duration::ZERO), true);
    let server = paperdesk_service::http::spawn(svc.clone(), "127.0.0.1:0".parse().unwrap())
        .map_err(|e| e.to_string())?;
    let base = server.base_url();

    let logs: Vec<ClientLog> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..CLIENTS)
            .map(|c| {
                let (base, arxiv, pmc) = (&base, &arxiv, &pmc);
                s.spawn(move || {
                    let timeout = Duration::from_secs(60);
                    let mut clients: Vec<HttpApi> = TOKENS
                        .iter()
                        .map(|(t, _)| {
                            HttpApi::with_timeout(base.clone(), Some(t.to_string()), timeout)
                        })
                        .collect();
                    clients.push(HttpApi::with_timeout(base.clone(), None, timeout));
                    clients.push(HttpApi::with_timeout(
                        base.clone(),
                        Some("nope".into()),
                        timeout,
                    ));
                    let mut rng = random::rng(0x50a + c as u64);
                    let mut log = ClientLog::default();
                    for _ in 0..PER_CLIENT {
                        let req = gen_request(&mut rng, arxiv, pmc);
                        log.requests += 1;
                        let (status, body) = match clients[req.token].get_raw(req.path, &req.params)
                        {
                            Ok(r) => r,
                            Err(e) => {
                                log.mismatches.push(format!("transport: {e}"));
                                continue;
                            }
                        };
                        if status >= 500 {
                            log.server_errors += 1;
                        }
                        if (200..300).contains(&status) && req.token < 3 {
                            log.ok_by_token[req.token] += 1;
                        }
                        if !comparable(&req, status) {
                            continue;
                        }
                        match log.first.get(&req) {
                            Some((s0, b0)) if (*s0, b0.as_str()) != (status, body.as_str()) => {
                                log.mismatches.push(format!("{req:?}: {s0} vs {status}"));
                            }
                            Some(_) => {}
                            None => {
                                log.first.insert(req, (status, body));
                            }
                        }
                    }
                    log
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    drop(server);

    let requests: usize = logs.iter().map(|l| l.requests).sum();
    let server_errors: usize = logs.iter().map(|l| l.server_errors).sum();
    ensure(requests == CLIENTS * PER_CLIENT, || {
        format!("{requests} requests issued")
    })?;
    ensure(server_errors == 0, || {
        format!("{server_errors} responses were 5xx")
    })?;

    let mut merged: HashMap<Req, (u16, String)> = HashMap::new();
    let mut mismatches: Vec<String> = logs
        .iter()
        .flat_map(|l| l.mismatches.iter().cloned())
        .collect();
    for log in &logs {
        for (req, got) in &log.first {
            match merged.get(req) {
                Some(prev) if prev != got => mismatches.push(format!("{req:?}: clients disagree")),
                Some(_) => {}
                None => {
                    merged.insert(req.clone(), got.clone());
                }
            }
        }
    }

    // Single-threaded replay on a fresh service. Bodies do not depend on
    // which valid token asked, so quota-limited requests replay as alpha.
    let fresh = service(fixture_store(Duration::ZERO), false);
    for (req, (status, body)) in &merged {
        let bearer = match req.token {
            ANON => None,
            BAD => Some("nope"),
            _ => Some("alpha"),
        };
        let params: Vec<(&str, &str)> = req
            .params
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        let resp = fresh.handle(&ApiRequest::new(req.path, &params, bearer));
        if resp.status != *status || resp.body[..] != *body.as_bytes() {
            mismatches.push(format!(
                "{req:?}: concurrent {status}, replay {}",
                resp.status
            ));
        }
    }
    ensure(mismatches.is_empty(), || {
        format!("{} mismatches, first: {}", mismatches.len(), mismatches[0])
    })?;

    let day = day_of(fixture_now());
    let mut counted = 0;
    for (i, (token, quota)) in TOKENS.iter().enumerate() {
        let observed: u64 = logs.iter().map(|l| l.ok_by_token[i]).sum();
        let recorded = svc.ledger().used_on(token, &day);
        ensure(observed == recorded, || {
            format!("{token}: {observed} successful replies, ledger says {recorded}")
        })?;
        if let Some(q) = quota {
            ensure(recorded <= *q, || {
                format!("{token}: {recorded} over quota {q}")
            })?;
        }
        counted += recorded;
    }
    ensure(svc.ledger().grand_total() == counted, || {
        format!("ledger total {} != {counted}", svc.ledger().grand_total())
    })?;
    Ok(format!(
        "{requests} requests, 0 5xx, {} distinct replayed, ledger total {counted}",
        merged.len()
    ))
}
