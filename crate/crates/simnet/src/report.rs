use std::collections::{BTreeMap, HashMap};

use mcoin_core::hash::BlockHash;
use serde::Serialize;

use crate::scenario::Behavior;
use crate::sim::{Simulation, Stall};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub duration_ms: u64,
    pub events: u64,
    pub nodes: Vec<NodeReport>,
    pub canonical: CanonicalReport,
    /// The canonical chain first, then side branches at least
    /// `min_branch_len` blocks long, by fork height.
    pub branches: Vec<BranchReport>,
    /// One entry per canonical block after genesis.
    pub management: Vec<TimelineEntry>,
    pub stalls: Vec<Stall>,
    pub revolt: Option<RevoltReport>,
    pub supply: SupplyReport,
}

impl SimReport {
    /// Canonical JSON: sorted keys, two-space indentation, trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    pub fn side_branches(&self) -> &[BranchReport] {
        self.branches.get(1..).unwrap_or(&[])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeReport {
    pub id: String,
    pub behavior: Behavior,
    pub tip: BlockHash,
    pub height: u64,
    pub mined: u64,
    /// Blocks this node found that ended up on the auditor's canonical chain.
    pub canonical_blocks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CanonicalReport {
    pub tip: BlockHash,
    pub height: u64,
    pub work: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchReport {
    /// Height of the last block shared with the canonical chain.
    pub fork_height: u64,
    pub tip: BlockHash,
    pub height: u64,
    /// Blocks from the fork point to the tip.
    pub length: u64,
    /// Blocks in the subtree, including dead ends.
    pub blocks: u64,
    pub compliant: bool,
    /// First rule broken on the path to the tip.
    pub violation: Option<String>,
    pub violation_height: Option<u64>,
    /// Blocks on the path to the tip, by miner.
    pub miners: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimelineEntry {
    pub height: u64,
    pub time_ms: u64,
    pub miner: String,
    pub management: u32,
    pub policy_management: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevoltReport {
    pub start_ms: u64,
    /// Best tip among revolting miners.
    pub tip: BlockHash,
    pub height: u64,
    /// The revolt tip itself lies on the auditor's canonical chain.
    pub on_canonical: bool,
    /// Canonical height minus revolt tip height: blocks other miners have
    /// stacked on, or raced ahead of, the revolt branch.
    pub lead: u64,
    /// The lead is shorter than `min_branch_len`, so the revolt branch holds
    /// every settled canonical block.
    pub canonical: bool,
    /// Height where the revolt branch and the canonical chain part.
    pub common_height: u64,
    /// Management transactions in revolt-branch blocks found after the start.
    pub management_after: u64,
    /// Management transactions in canonical blocks up to `common_height`
    /// found after the start.
    pub shared_management_after: u64,
    /// Canonical blocks found after the start, and how many revolters found.
    pub canonical_blocks_after: u64,
    pub revolt_blocks_after: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupplyReport {
    pub rewards: String,
    pub coinbase: String,
    pub created: String,
    pub fees: String,
    pub utxo_total: String,
    /// UTXO total equals coinbase outputs plus created coin less fees.
    pub consistent: bool,
    pub max_created_per_block: String,
    /// Type-6 limit at the tip; 0 means unlimited.
    pub creation_limit: u64,
}

pub(crate) fn build_report(sim: &Simulation) -> SimReport {
    let audit = &sim.auditor;
    let chain = &audit.chain;
    let canonical = chain.canonical();
    let on_canonical: HashMap<BlockHash, u64> =
        canonical.iter().map(|h| (*h, chain.entry(h).expect("indexed").height)).collect();
    let node_id = |i: usize| sim.nodes[i].id.clone();

    let mut canonical_by_miner = vec![0u64; sim.nodes.len()];
    let mut management = Vec::new();
    let mut max_created = 0u128;
    for h in canonical.iter().skip(1) {
        let r = &audit.records[audit.index[h]];
        canonical_by_miner[r.miner] += 1;
        let summary = chain.entry(h).and_then(|e| e.summary.as_ref()).expect("non-genesis entry");
        max_created = max_created.max(summary.created);
        management.push(TimelineEntry {
            height: r.height,
            time_ms: r.time_ms,
            miner: node_id(r.miner),
            management: summary.management,
            policy_management: summary.policy_management,
        });
    }

    let nodes = sim
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| NodeReport {
            id: n.id.clone(),
            behavior: n.behavior,
            tip: n.chain.tip(),
            height: n.chain.height(),
            mined: n.mined,
            canonical_blocks: canonical_by_miner[i],
        })
        .collect();

    let mut branches = vec![BranchReport {
        fork_height: 0,
        tip: chain.tip(),
        height: chain.height(),
        length: chain.height(),
        blocks: chain.height(),
        compliant: true,
        violation: None,
        violation_height: None,
        miners: count_miners(sim, canonical.iter().skip(1)),
    }];
    branches.extend(side_branches(sim, &on_canonical));

    let revolt = sim.revolt_at.and_then(|start| revolt_report(sim, start, &canonical));

    let state = chain.tip_state();
    let s = state.supply;
    let supply = SupplyReport {
        rewards: s.rewards.to_string(),
        coinbase: s.coinbase.to_string(),
        created: s.created.to_string(),
        fees: s.fees.to_string(),
        utxo_total: state.utxo_total().to_string(),
        consistent: state.utxo_total() == s.expected_utxo_total(),
        max_created_per_block: max_created.to_string(),
        creation_limit: state.policy.snapshot().coin_creation_limit(),
    };

    SimReport {
        seed: sim.scenario.seed,
        duration_ms: sim.scenario.duration_ms,
        events: sim.processed,
        nodes,
        canonical: CanonicalReport { tip: chain.tip(), height: chain.height(), work: chain.tip_work().to_string() },
        branches,
        management,
        stalls: sim.stalls.clone(),
        revolt,
        supply,
    }
}

fn count_miners<'a>(sim: &Simulation, hashes: impl Iterator<Item = &'a BlockHash>) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for h in hashes {
        let r = &sim.auditor.records[sim.auditor.index[h]];
        *out.entry(sim.nodes[r.miner].id.clone()).or_insert(0) += 1;
    }
    out
}

/// Subtrees hanging off the canonical chain, each reduced to its deepest
/// path (earliest-found block wins ties).
fn side_branches(sim: &Simulation, on_canonical: &HashMap<BlockHash, u64>) -> Vec<BranchReport> {
    let records = &sim.auditor.records;
    let index = &sim.auditor.index;
    // Root of the side subtree each off-canonical block belongs to.
    let mut root_of: Vec<Option<usize>> = vec![None; records.len()];
    let mut roots: Vec<usize> = Vec::new();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if on_canonical.contains_key(&r.hash) {
            continue;
        }
        let root = match index.get(&r.parent) {
            Some(&p) if !on_canonical.contains_key(&records[p].hash) => root_of[p].expect("parent found earlier"),
            _ => {
                roots.push(i);
                i
            }
        };
        root_of[i] = Some(root);
        members.entry(root).or_default().push(i);
    }

    let mut out = Vec::new();
    for root in roots {
        let fork_height = records[root].height - 1;
        let group = &members[&root];
        let tip = *group.iter().max_by_key(|&&i| (records[i].height, std::cmp::Reverse(i))).expect("nonempty");
        let length = records[tip].height - fork_height;
        if length < sim.scenario.min_branch_len {
            continue;
        }
        let mut path = vec![tip];
        while path.last() != Some(&root) {
            let r = &records[*path.last().expect("nonempty")];
            path.push(index[&r.parent]);
        }
        path.reverse();
        let first_bad = path.iter().find(|&&i| records[i].violation.is_some());
        out.push(BranchReport {
            fork_height,
            tip: records[tip].hash,
            height: records[tip].height,
            length,
            blocks: group.len() as u64,
            compliant: first_bad.is_none(),
            violation: first_bad.and_then(|&i| records[i].violation.clone()),
            violation_height: first_bad.map(|&i| records[i].height),
            miners: count_miners(sim, path.iter().map(|&i| &records[i].hash)),
        });
    }
    out.sort_by_key(|b| b.fork_height);
    out
}

fn revolt_report(sim: &Simulation, start: u64, canonical: &[BlockHash]) -> Option<RevoltReport> {
    let chain = &sim.auditor.chain;
    let audit = &sim.auditor;
    let revolters: Vec<usize> =
        (0..sim.nodes.len()).filter(|&i| sim.nodes[i].behavior == Behavior::RevoltingMiner).collect();
    let mut best = &sim.nodes[*revolters.first()?].chain;
    for &i in &revolters[1..] {
        if sim.nodes[i].chain.tip_work() > best.tip_work() {
            best = &sim.nodes[i].chain;
        }
    }
    let tip = best.tip();
    let management_after = best
        .branch(&tip)
        .iter()
        .filter_map(|h| {
            let e = best.entry(h)?;
            (u64::from(e.block.header.timestamp) >= start).then(|| e.summary.as_ref().map_or(0, |s| s.management))
        })
        .map(u64::from)
        .sum();
    let after: Vec<usize> = canonical
        .iter()
        .skip(1)
        .map(|h| audit.index[h])
        .filter(|&i| audit.records[i].time_ms >= start)
        .collect();
    let mut common_height = best.height().min(chain.height());
    while common_height > 0 && best.ancestor_at(&tip, common_height) != chain.ancestor_at(&chain.tip(), common_height) {
        common_height -= 1;
    }
    let shared_management_after = canonical[1..=common_height as usize]
        .iter()
        .filter(|h| audit.records[audit.index[*h]].time_ms >= start)
        .map(|h| u64::from(chain.entry(h).and_then(|e| e.summary.as_ref()).map_or(0, |s| s.management)))
        .sum();
    let lead = chain.height().saturating_sub(best.height());
    Some(RevoltReport {
        start_ms: start,
        tip,
        height: best.height(),
        on_canonical: chain.is_ancestor(&tip, &chain.tip()),
        lead,
        canonical: lead < sim.scenario.min_branch_len,
        common_height,
        management_after,
        shared_management_after,
        canonical_blocks_after: after.len() as u64,
        revolt_blocks_after: after.iter().filter(|&&i| revolters.contains(&audit.records[i].miner)).count() as u64,
    })
}
