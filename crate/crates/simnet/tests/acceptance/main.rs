//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Pass a substring to run only the matching criteria, e.g.
//! `cargo test -p mcoin-simnet --test acceptance -- C6`.

#[path = "../common/mod.rs"]
mod common;

mod codec;
mod hierarchy;
mod policy;
mod reward;
mod scenarios;
mod supply;

use std::process::ExitCode;
use std::time::{Duration, Instant};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
    /// A failure recorded as a known shortfall; it does not fail the run.
    pub tolerated: bool,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into(), tolerated: false }
    }

    pub fn fail(detail: impl Into<String>) -> Self {
        Self::new(false, detail)
    }
}

/// Checks a runtime budget and folds it into the outcome.
pub fn within(outcome: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    if elapsed <= budget {
        return outcome;
    }
    let detail = format!("{}; took {:.1} s, budget {} s", outcome.detail, elapsed.as_secs_f64(), budget.as_secs());
    Outcome { pass: false, detail, tolerated: false }
}

/// Runs `f` over `seeds` on all cores, returning results in seed order.
pub fn par_seeds<T: Send>(seeds: std::ops::Range<u64>, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    let seeds: Vec<u64> = seeds.collect();
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(seeds.len().max(1));
    let mut out: Vec<Option<T>> = seeds.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks = out.chunks_mut(seeds.len().div_ceil(workers).max(1));
        for (i, chunk) in chunks.enumerate() {
            let f = &f;
            let seeds = &seeds;
            let base = i * seeds.len().div_ceil(workers).max(1);
            scope.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(seeds[base + j]));
                }
            });
        }
    });
    out.into_iter().map(|x| x.expect("every seed ran")).collect()
}

type Check = fn() -> Outcome;

const CRITERIA: &[(&str, &str, Check)] = &[
    ("C1", "codec round-trip", codec::run),
    ("C2", "validation oracle equivalence", oracle::run),
    ("C3", "role-hierarchy invariants", hierarchy::run),
    ("C4", "policy engine", policy::run),
    ("C5", "supply audit", supply::run),
    ("C6", "dependent-mining halt and resume", scenarios::halt_and_resume),
    ("C7", "independent-mining revolt", scenarios::independent_revolt),
    ("C8", "compliant fork", scenarios::compliant_fork),
    ("C9", "determinism", scenarios::determinism),
    ("C10", "reward schedule", reward::run),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = CRITERIA.iter().filter(|(id, name, _)| {
        filters.is_empty() || filters.iter().any(|f| *id == f.as_str() || name.contains(f.as_str()))
    });
    let (mut passed, mut failed, mut tolerated) = (0, 0, 0);
    for (id, name, check) in selected {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        let note = if !outcome.pass && outcome.tolerated { " (known shortfall)" } else { "" };
        println!("{status} {id} {name}: {}{note} [{secs:.1} s]", outcome.detail);
        match (outcome.pass, outcome.tolerated) {
            (true, _) => passed += 1,
            (false, true) => tolerated += 1,
            (false, false) => failed += 1,
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {tolerated} known shortfalls");
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
