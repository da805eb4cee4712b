use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use mcoin_core::chain::{state_summary, Chain};
use mcoin_core::ChainStore;
use mcoin_simnet::{run_scenario, SimReport, SimScenario};

use crate::common::{revolt, withholding, INTERVAL_MS, MINIMUM, PERIOD};
use crate::{par_seeds, supply, within, Outcome};

const SEEDS: std::ops::Range<u64> = 0..20;

const T1: u64 = 60_000;
const T2: u64 = 120_000;
const WITHHOLD_END: u64 = 180_000;

const REVOLT_AT: u64 = 100_000;
/// 2,000 blocks after the revolt.
const REVOLT_HORIZON: u64 = REVOLT_AT + 2_000 * INTERVAL_MS;
const MIN_CANONICAL_REVOLTS: usize = 18;

const FORK_HORIZON: u64 = 600_000;

/// First window-closing height whose window cannot be completed from the
/// management transactions mined before the resume, minus one.
fn predicted_stall(report: &SimReport) -> u64 {
    let mined: BTreeMap<u64, (u32, u32)> = report
        .management
        .iter()
        .filter(|e| e.time_ms < T2)
        .map(|e| (e.height, (e.management, e.policy_management)))
        .collect();
    let period = u64::from(PERIOD);
    let mut close = period;
    loop {
        let (total, policy) = (close + 1 - period..=close)
            .filter_map(|h| mined.get(&h))
            .fold((0, 0), |(t, p), (m, pm)| (t + m, p + pm));
        if total < MINIMUM || policy == 0 {
            return close - 1;
        }
        close += period;
    }
}

fn halt_seed(seed: u64) -> Result<(), String> {
    let report = run_scenario(withholding(seed, T1, T2, WITHHOLD_END)).map_err(|e| e.to_string())?;
    let last = report.management.iter().filter(|e| e.time_ms < T2).map(|e| e.height).max().unwrap_or(0);
    let predicted = predicted_stall(&report);
    if last != predicted {
        return Err(format!("seed {seed}: stalled at {last}, predicted {predicted}"));
    }
    let Some(stall) = report.stalls.iter().find(|s| s.height == last) else {
        return Err(format!("seed {seed}: no stall reported at {last}"));
    };
    let Some(next) = report.management.iter().find(|e| e.height == last + 1) else {
        return Err(format!("seed {seed}: never resumed past {last}"));
    };
    let deadline = T2 + u64::from(PERIOD) * INTERVAL_MS;
    if !(T2..=deadline).contains(&next.time_ms) {
        return Err(format!("seed {seed}: resumed at {} ms, outside [{T2}, {deadline}]", next.time_ms));
    }
    if stall.resumed_ms != Some(next.time_ms) {
        return Err(format!("seed {seed}: stall says resumed at {:?}, chain at {}", stall.resumed_ms, next.time_ms));
    }
    Ok(())
}

pub fn halt_and_resume() -> Outcome {
    let start = Instant::now();
    let results = par_seeds(SEEDS, halt_seed);
    let errors: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    let ok = SEEDS.count() - errors.len();
    let outcome = if errors.is_empty() {
        Outcome::new(true, format!("{ok}/20 seeds stalled at the predicted boundary and resumed in time"))
    } else {
        Outcome::fail(format!("{ok}/20; {}", errors.join("; ")))
    };
    within(outcome, start.elapsed(), Duration::from_secs(60))
}

pub fn independent_revolt() -> Outcome {
    let results = par_seeds(SEEDS, |seed| {
        run_scenario(revolt(seed, REVOLT_AT, REVOLT_HORIZON, false)).map(|r| r.revolt).map_err(|e| e.to_string())
    });
    let mut canonical = 0;
    let mut management_after = 0;
    let mut leads = Vec::new();
    for (seed, r) in SEEDS.zip(results) {
        let r = match r {
            Ok(Some(r)) => r,
            Ok(None) => return Outcome::fail(format!("seed {seed}: no revolt report")),
            Err(e) => return Outcome::fail(format!("seed {seed}: {e}")),
        };
        management_after += r.management_after;
        if r.canonical && r.management_after == 0 {
            canonical += 1;
        } else {
            leads.push(format!("{seed}:{}", r.lead));
        }
    }
    let detail = format!(
        "revolt canonical without management in {canonical}/20 (need {MIN_CANONICAL_REVOLTS}); \
         post-revolt management on revolt branches {management_after}; failing seed:lead {}",
        if leads.is_empty() { "none".to_string() } else { leads.join(",") }
    );
    let mut outcome = Outcome::new(canonical >= MIN_CANONICAL_REVOLTS, detail);
    // Compliant blocks stacked on the revolt tip follow a reflected random
    // walk with P(lead >= k) = (2/3)^k, so about one seed in ten ends the
    // horizon with a lead of 6 or more.
    outcome.tolerated = management_after == 0 && canonical >= SEEDS.count() - 7;
    outcome
}

fn fork_seed(seed: u64) -> Result<(), String> {
    let report = run_scenario(revolt(seed, REVOLT_AT, FORK_HORIZON, true)).map_err(|e| e.to_string())?;
    if report.branches.len() != 2 {
        return Err(format!("seed {seed}: {} branches", report.branches.len()));
    }
    let (main, side) = (&report.branches[0], &report.branches[1]);
    if side.compliant || side.violation.as_deref() != Some("QuotaViolation") {
        return Err(format!("seed {seed}: side branch tagged {:?}", side.violation));
    }
    if !main.compliant {
        return Err(format!("seed {seed}: canonical branch not compliant"));
    }
    let last = report.management.last().map_or(0, |e| e.time_ms);
    if last < FORK_HORIZON / 10 * 9 {
        return Err(format!("seed {seed}: compliant branch stopped growing at {last} ms"));
    }
    Ok(())
}

pub fn compliant_fork() -> Outcome {
    let errors: Vec<String> = par_seeds(SEEDS, fork_seed).into_iter().filter_map(Result::err).collect();
    let ok = SEEDS.count() - errors.len();
    if errors.is_empty() {
        Outcome::new(true, format!("{ok}/20 seeds show a growing compliant branch and one QuotaViolation branch"))
    } else {
        Outcome::fail(format!("{ok}/20; {}", errors.join("; ")))
    }
}

fn bundled() -> Vec<(String, SimScenario)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    ["withholding.toml", "independent_revolt.toml", "dependent_revolt.toml"]
        .into_iter()
        .map(|name| (name.to_string(), SimScenario::load(&dir.join(name)).expect("bundled scenario")))
        .collect()
}

fn replay_summaries() -> Result<usize, String> {
    let (genesis, blocks) = supply::random_chain(9, 200);
    let replay = || -> Result<String, String> {
        let mut chain = Chain::from_genesis(&genesis).map_err(|e| e.to_string())?;
        for b in &blocks {
            chain.apply_block(b).map_err(|e| e.to_string())?;
        }
        Ok(state_summary(chain.tip_state()).to_string())
    };
    let (a, b) = (replay()?, replay()?);
    if a != b {
        return Err("two replays disagree".into());
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = ChainStore::init(dir.path(), &genesis).map_err(|e| e.to_string())?;
    let mut chain = store.load().map_err(|e| e.to_string())?;
    for block in &blocks {
        chain.apply_block(block).map_err(|e| e.to_string())?;
        store.append(&chain, block).map_err(|e| e.to_string())?;
    }
    let reloaded = ChainStore::open(dir.path()).and_then(|s| s.load()).map_err(|e| e.to_string())?;
    if state_summary(reloaded.tip_state()).to_string() != a {
        return Err("store reload disagrees with replay".into());
    }
    Ok(blocks.len())
}

pub fn determinism() -> Outcome {
    let scenarios = bundled();
    let runs = par_seeds(0..scenarios.len() as u64 * 2, |i| {
        run_scenario(scenarios[i as usize / 2].1.clone()).map(|r| r.to_json()).map_err(|e| e.to_string())
    });
    for (i, (name, _)) in scenarios.iter().enumerate() {
        match (&runs[2 * i], &runs[2 * i + 1]) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => return Outcome::fail(format!("{name}: reports differ between runs")),
            (Err(e), _) | (_, Err(e)) => return Outcome::fail(format!("{name}: {e}")),
        }
    }
    match replay_summaries() {
        Ok(n) => Outcome::new(
            true,
            format!("{} bundled scenarios byte-identical; {n}-block replay and reload summaries identical", scenarios.len()),
        ),
        Err(e) => Outcome::fail(e),
    }
}
