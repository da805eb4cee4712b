//! Deterministic discrete-event simulation of miners, an administrator and
//! wallets on a managed chain.
//!
//! Block discovery is an exponential race scaled by hashpower share; blocks
//! and transactions travel over links with seeded latency. A separate
//! auditor receives every block the moment it is found and validates it
//! under the full rules, which is what the report's canonical chain, branch
//! inventory and stall intervals are measured against.
//!
//! Scenario files are TOML; see `docs/scenario.md` and `docs/report.md`.

mod queue;
mod report;
mod rng;
mod scenario;
mod sim;

pub use queue::EventQueue;
pub use report::{BranchReport, CanonicalReport, NodeReport, RevoltReport, SimReport, SupplyReport, TimelineEntry};
pub use rng::stream;
pub use scenario::{
    ActionKind, Behavior, BehaviorParams, Latency, MgmtKind, NodeSpec, ScheduledAction, Share, SimError, SimScenario,
};
pub use sim::{run_scenario, BlockRecord, Simulation, Stall};
