//! Release acceptance checks. Prints one PASS/FAIL line per check and exits
//! non-zero if any fails.

#[path = "../../server/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use corec_core::context::restriction_violations;
use corec_core::domain::{available_seats, GeoPoint, TransportMode, Vehicle};
use corec_core::plan::ScoreTuple;
use corec_core::recommend::{solve_exact, solve_greedy};
use corec_core::store::{replay, ContextEvent};
use corec_core::travel::{haversine_km, Router, RoutingConfig};
use corec_core::Coordinator;
use corec_sim::{load_scenario, run, RunMetrics};
use rand::Rng;
use serde_json::json;
use support::core::stub::{Behavior, Stub};
use support::core::{fixtures, gen, oracle, props, session};
use support::harness::{Server, DM, FAR, NEAR};

/// Logs produced by the checks, scanned for restriction violations at the end.
type Logs = Vec<(corec_core::domain::WorldState, Vec<ContextEvent>)>;

fn oracle_equivalence() -> Result<String, String> {
    let started = Instant::now();
    let mut r = gen::rng(20_240_601);
    for i in 0..200 {
        let inst = gen::instance(&mut r, 8, 4);
        let (best, mapping) = oracle::brute_force(&inst);
        let plan = solve_exact(&inst).map_err(|e| format!("instance {i}: {e}"))?;
        let want = ScoreTuple::new(best.weighted_coverage, best.total_makespan, best.total_time);
        if plan.score != want {
            return Err(format!("instance {i}: exact {:?} != oracle {want:?}", plan.score));
        }
        let got: Vec<(String, String)> = plan.mapping().into_iter().map(|(u, p)| (u.into(), p.into())).collect();
        if got != mapping {
            return Err(format!("instance {i}: mapping differs from the oracle's smallest optimum"));
        }
    }
    let took = started.elapsed();
    if took >= Duration::from_secs(60) {
        return Err(format!("took {took:.1?}"));
    }
    Ok(format!("200 instances in {took:.1?}"))
}

fn greedy_quality() -> Result<String, String> {
    let mut r = gen::rng(20_240_601);
    let (mut greedy_total, mut exact_total) = (0u64, 0u64);
    for i in 0..200 {
        let inst = gen::instance(&mut r, 8, 4);
        let exact = solve_exact(&inst).map_err(|e| e.to_string())?;
        let greedy = solve_greedy(&inst);
        props::feasible(&greedy, &inst).map_err(|e| format!("instance {i}: {e}"))?;
        let bad = props::priority_violations(&greedy, &inst);
        if !bad.is_empty() {
            return Err(format!("instance {i}: priority property broken by {bad:?}"));
        }
        greedy_total += greedy.score.weighted_coverage;
        exact_total += exact.score.weighted_coverage;
    }
    let ratio = if exact_total == 0 { 1.0 } else { greedy_total as f64 / exact_total as f64 };
    if ratio < 0.85 {
        return Err(format!("greedy reaches {:.1}% of exact coverage", ratio * 100.0));
    }
    Ok(format!("{:.1}% of exact coverage, priority property on 200/200", ratio * 100.0))
}

fn seat_arithmetic() -> Result<String, String> {
    let v = |capacity| Vehicle { id: "v".into(), mode: TransportMode::Road, capacity, special_needs_capable: false };
    let got = (available_seats(&v(9)), available_seats(&v(6)));
    if got != (8, 5) {
        return Err(format!("got {got:?}"));
    }
    Ok("9 -> 8, 6 -> 5".into())
}

fn snapshot_equals_replay(logs: &mut Logs) -> Result<String, String> {
    let mut r = gen::rng(7);
    let mut events = 0;
    for i in 0..1000 {
        let mut c = Coordinator::in_memory(session::initial_world()).map_err(|e| e.to_string())?;
        let steps = r.random_range(0..120);
        session::drive(&mut c, &mut gen::rng(r.random()), steps);
        let replayed = replay(c.initial(), c.log().events());
        if replayed.rejected().count() != 0 {
            return Err(format!("sequence {i}: replay rejected logged events"));
        }
        if replayed.world.canonical_json() != c.world().canonical_json() {
            return Err(format!("sequence {i}: snapshot and replay differ"));
        }
        events += c.log().len();
        logs.push((c.initial().clone(), c.log().events().to_vec()));
    }
    Ok(format!("1000 sequences, {events} events"))
}

fn compiegne(logs: &mut Logs) -> Result<String, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let started = Instant::now();
    let s = load_scenario(dir.join("compiegne.json")).map_err(|e| e.to_string())?;
    let first = run(&s).map_err(|e| e.to_string())?;
    let took = started.elapsed();
    let second = run(&s).map_err(|e| e.to_string())?;
    let world = first.log.snapshot(&s.initial);
    if world.units.len() != 50 || s.initial.shelters.len() != 3 {
        return Err(format!("{} units, {} shelters", world.units.len(), s.initial.shelters.len()));
    }
    if first.log_ndjson() != second.log_ndjson() {
        return Err("two runs wrote different logs".into());
    }
    let golden: RunMetrics =
        serde_json::from_str(&std::fs::read_to_string(dir.join("compiegne.metrics.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    if first.metrics != golden {
        return Err(format!("metrics drifted: {:?}", first.metrics));
    }
    if took >= Duration::from_secs(30) {
        return Err(format!("run took {took:.1?}"));
    }
    logs.push((s.initial.clone(), first.log.events().to_vec()));
    Ok(format!("{} events, digest {}, {took:.1?}", first.log.len(), &first.log_digest()[..12]))
}

fn http_replan(logs: &mut Logs) -> Result<String, String> {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    rt.block_on(async {
        let s = Server::start(fixtures::closure_world()).await;
        let (code, plan) = s.post(Some(DM), "/plans", json!({})).await;
        if code != 201 {
            return Err(format!("propose returned {code}"));
        }
        let id = plan["id"].as_str().unwrap().to_string();
        let severed = plan["assignments"]
            .as_object()
            .unwrap()
            .iter()
            .find(|(_, a)| a["point_id"] == "R1")
            .map(|(u, _)| u.clone())
            .ok_or("nobody assigned to R1")?;
        let token = if severed == "near" { NEAR } else { FAR };
        s.post(Some(DM), &format!("/plans/{id}/dispatch"), json!({"unit_ids": [severed]})).await;
        let closure = json!({"point_id": "R1", "unit_id": severed, "mode": "road"});
        let (code, _) = s
            .post(Some(token), "/reports", json!({"subject": {"type": "closure", "closure": closure}, "claim": {"type": "closure"}}))
            .await;
        if code != 201 {
            return Err(format!("closure report returned {code}"));
        }
        let replanned = s
            .wait_for(Duration::from_secs(5), |c| c.world().current_plan.as_deref().is_some_and(|p| p != id))
            .await;
        if !replanned {
            return Err("no re-plan after the closure".into());
        }
        let (_, world) = s.get(Some(DM), "/world").await;
        let current = world["current_plan"].as_str().unwrap().to_string();
        let (_, next) = s.get(Some(DM), &format!("/plans/{current}")).await;
        if next["released"] != json!([severed]) {
            return Err(format!("released {}", next["released"]));
        }
        if next["per_point"]["R1"]["shortfall"] != 0 {
            return Err("R1 was not reassigned".into());
        }
        let inst = s.state.read().current_instance().map_err(|e| e.to_string())?;
        for (u, a) in next["assignments"].as_object().unwrap() {
            if inst.matrix.get(u, a["point_id"].as_str().unwrap()).is_none() {
                return Err(format!("{u} left on an unreachable point"));
            }
        }
        logs.push((s.initial.clone(), s.events_on_disk()));
        Ok(format!("{current} releases {severed} and covers R1"))
    })
}

fn travel_properties() -> Result<String, String> {
    let mut r = gen::rng(99);
    let mut coord = || GeoPoint::new(r.random_range(-90.0..=90.0), r.random_range(-180.0..=180.0));
    for i in 0..10_000 {
        let (a, b, c) = (coord(), coord(), coord());
        let ab = haversine_km(a, b);
        if !(ab >= 0.0 && ab == haversine_km(b, a) && haversine_km(a, a) == 0.0) {
            return Err(format!("pair {i}: not a symmetric non-negative distance"));
        }
        if ab > haversine_km(a, c) + haversine_km(c, b) + 1e-9 {
            return Err(format!("pair {i}: triangle inequality"));
        }
    }
    let (a, b) = (GeoPoint::new(49.4179, 2.8261), GeoPoint::new(49.4431, 2.8261));
    let timeout_ms = 300;
    for behavior in [Behavior::Status(500), Behavior::Hang(Duration::from_secs(5))] {
        let stub = Stub::start(behavior);
        let router = Router::new(RoutingConfig::external(stub.base_url.clone(), timeout_ms)).map_err(|e| e.to_string())?;
        let started = Instant::now();
        let est = router.travel_seconds(a, b, TransportMode::Road).map_err(|e| e.to_string())?;
        let took = started.elapsed();
        if est.degraded.is_none() || est.seconds != 252 {
            return Err("fallback did not engage".into());
        }
        if took > Duration::from_millis(timeout_ms + 100) {
            return Err(format!("fallback took {took:?}"));
        }
    }
    Ok("10000 pairs; fallback on 500 and timeout".into())
}

fn restriction_scan(logs: &Logs) -> Result<String, String> {
    let mut events = 0;
    for (initial, log) in logs {
        let bad = restriction_violations(initial, log);
        if !bad.is_empty() {
            return Err(format!("events {bad:?} have unregistered authors"));
        }
        events += log.len();
    }
    Ok(format!("{} logs, {events} events, no violations", logs.len()))
}

fn check(name: &str, f: impl FnOnce() -> Result<String, String>) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail}");
            true
        }
        Err(why) => {
            println!("FAIL  {name}: {why}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut logs = Logs::new();
    let results = [
        check("exact solver matches exhaustive search", oracle_equivalence),
        check("greedy coverage and priority order", greedy_quality),
        check("seat arithmetic", seat_arithmetic),
        check("snapshot equals replay", || snapshot_equals_replay(&mut logs)),
        check("Compiegne scenario", || compiegne(&mut logs)),
        check("re-plan on closure over HTTP", || http_replan(&mut logs)),
        check("travel-time properties and fallback", travel_properties),
    ];
    let scan = check("no unregistered authors in any log", || restriction_scan(&logs));
    if results.iter().all(|ok| *ok) && scan {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
