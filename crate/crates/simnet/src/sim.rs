use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use mcoin_core::builder::TxBuilder;
use mcoin_core::chain::Chain;
use mcoin_core::codec::{Block, OutPoint, Role, RoleSet, Transaction};
use mcoin_core::hash::{BlockHash, Txid};
use mcoin_core::keys::{KeyPair, SignatureCache};
use mcoin_core::params::RuleSet;
use mcoin_core::policy::ptype;
use mcoin_core::validation::ValidationError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::queue::EventQueue;
use crate::report::{build_report, SimReport};
use crate::rng::stream;
use crate::scenario::{ActionKind, Behavior, BehaviorParams, MgmtKind, SimError, SimScenario};

/// Mempool entries older than this many block intervals are dropped.
const MEMPOOL_TTL_BLOCKS: u64 = 50;

#[derive(Clone, Debug)]
enum Message {
    Block { block: Arc<Block>, origin: usize },
    Tx(Arc<Transaction>),
}

#[derive(Clone, Debug)]
enum Event {
    BlockFound(usize),
    Deliver { to: usize, msg: Message },
    Action(usize),
    WalletTick(usize),
}

pub(crate) struct Node {
    pub id: String,
    pub behavior: Behavior,
    pub params: BehaviorParams,
    pub key: KeyPair,
    pub share: f64,
    pub chain: Chain,
    pub mined: u64,
    pub revolting: bool,
    mempool: Vec<(u64, Arc<Transaction>)>,
    mempool_ids: HashSet<Txid>,
    orphans: Vec<(Arc<Block>, usize)>,
    pending_spends: BTreeMap<OutPoint, u64>,
    mine_rng: ChaCha8Rng,
    link_rng: ChaCha8Rng,
    wallet_rng: ChaCha8Rng,
    issued: u32,
}

/// Every block the simulation produced, as the auditor saw it.
#[derive(Clone, Debug)]
pub struct BlockRecord {
    pub hash: BlockHash,
    pub parent: BlockHash,
    pub height: u64,
    /// Index into the scenario's node list.
    pub miner: usize,
    pub time_ms: u64,
    /// First rule the block breaks under full validation, if any.
    pub violation: Option<String>,
    pub block: Arc<Block>,
}

/// A stretch during which miners on the canonical tip could not produce a
/// valid block because the management quota was unmet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stall {
    /// Canonical height that could not be extended.
    pub height: u64,
    /// When the canonical chain reached that height.
    pub since_ms: u64,
    pub first_refusal_ms: u64,
    pub resumed_ms: Option<u64>,
    pub refusals: u64,
}

pub(crate) struct Auditor {
    pub chain: Chain,
    pub records: Vec<BlockRecord>,
    pub index: HashMap<BlockHash, usize>,
    tip_since: u64,
}

pub struct Simulation {
    pub(crate) scenario: SimScenario,
    pub(crate) nodes: Vec<Node>,
    pub(crate) auditor: Auditor,
    pub(crate) stalls: Vec<Stall>,
    pub(crate) revolt_at: Option<u64>,
    pub(crate) processed: u64,
    queue: EventQueue<Event>,
    now: u64,
    withholding: bool,
    trace: Option<Vec<String>>,
}

impl Simulation {
    pub fn new(scenario: SimScenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let sigs = Arc::new(SignatureCache::new());
        let base = Chain::from_genesis(&scenario.genesis)
            .map_err(|e| SimError::BadScenario(format!("genesis: {e}")))?
            .with_signature_cache(sigs);
        let seed = scenario.seed;
        let nodes: Vec<Node> = scenario
            .nodes
            .iter()
            .map(|spec| Node {
                id: spec.id.clone(),
                behavior: spec.behavior,
                params: spec.params.clone(),
                key: spec.key(),
                share: spec.hashpower.as_f64(),
                chain: base.clone(),
                mined: 0,
                revolting: false,
                mempool: Vec::new(),
                mempool_ids: HashSet::new(),
                orphans: Vec::new(),
                pending_spends: BTreeMap::new(),
                mine_rng: stream(seed, &spec.id, "mine"),
                link_rng: stream(seed, &spec.id, "link"),
                wallet_rng: stream(seed, &spec.id, "wallet"),
                issued: 0,
            })
            .collect();
        let auditor = Auditor { chain: base, records: Vec::new(), index: HashMap::new(), tip_since: 0 };
        let mut sim = Simulation {
            scenario,
            nodes,
            auditor,
            stalls: Vec::new(),
            revolt_at: None,
            processed: 0,
            queue: EventQueue::default(),
            now: 0,
            withholding: false,
            trace: None,
        };
        sim.bootstrap()?;
        for i in 0..sim.nodes.len() {
            if sim.nodes[i].share > 0.0 {
                sim.schedule_mining(i);
            }
            if sim.nodes[i].behavior == Behavior::Wallet {
                sim.schedule_wallet(i);
            }
        }
        for (i, a) in sim.scenario.actions.clone().iter().enumerate() {
            sim.queue.push(a.at_ms, Event::Action(i));
        }
        Ok(sim)
    }

    /// Records a one-line description of every processed event.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn scenario(&self) -> &SimScenario {
        &self.scenario
    }

    /// Blocks in creation order, bootstrap block first.
    pub fn blocks(&self) -> &[BlockRecord] {
        &self.auditor.records
    }

    /// The fully validating observer that receives every block as it is found.
    pub fn auditor(&self) -> &Chain {
        &self.auditor.chain
    }

    pub fn node_chain(&self, id: &str) -> Option<&Chain> {
        self.nodes.iter().find(|n| n.id == id).map(|n| &n.chain)
    }

    pub fn stalls(&self) -> &[Stall] {
        &self.stalls
    }

    /// Processes the earliest pending event within the scenario horizon.
    /// Returns false once nothing is left to do.
    pub fn step(&mut self) -> bool {
        match self.queue.peek_time() {
            Some(t) if t <= self.scenario.duration_ms => {}
            _ => return false,
        }
        let (time, event) = self.queue.pop().expect("peeked");
        self.now = time;
        self.processed += 1;
        if let Some(trace) = &mut self.trace {
            trace.push(describe(time, &event, &self.nodes));
        }
        match event {
            Event::BlockFound(i) => self.block_found(i),
            Event::Deliver { to, msg } => self.deliver(to, msg),
            Event::Action(a) => self.action(a),
            Event::WalletTick(i) => self.wallet_tick(i),
        }
        true
    }

    pub fn run(mut self) -> SimReport {
        while self.step() {}
        self.report()
    }

    pub fn run_to_end(&mut self) {
        while self.step() {}
    }

    pub fn report(&self) -> SimReport {
        build_report(self)
    }

    fn bootstrap(&mut self) -> Result<(), SimError> {
        let admin = self.admin_index();
        let root = self.nodes[admin].key.clone();
        let state = self.nodes[admin].chain.tip_state().clone();
        let user = RoleSet::only(Role::User);
        let bad = |e: String| SimError::BadScenario(format!("bootstrap: {e}"));

        let others: Vec<usize> = (0..self.nodes.len()).filter(|&i| i != admin).collect();
        let mut txs = Vec::new();
        if !others.is_empty() {
            let mut b = TxBuilder::new()
                .prove_roles(&state.accounts, &root, RoleSet::only(Role::Manager))
                .map_err(|e| bad(e.to_string()))?
                .lock_time(1);
            for &i in &others {
                b = b.role_change(self.nodes[i].key.public(), true, user);
            }
            let grants = b.build().map_err(|e| bad(e.to_string()))?;
            let grants_txid = grants.txid();
            txs.push(grants);

            let funded: Vec<(usize, usize)> = others
                .iter()
                .enumerate()
                .filter(|(_, &i)| self.nodes[i].behavior == Behavior::Wallet && self.nodes[i].params.initial_balance > 0)
                .map(|(vout, &i)| (vout, i))
                .collect();
            if !funded.is_empty() {
                let mut b = TxBuilder::new()
                    .prove_roles(&state.accounts, &root, RoleSet::only(Role::CentralBanker))
                    .map_err(|e| bad(e.to_string()))?;
                for &(vout, i) in &funded {
                    let node = &self.nodes[i];
                    b = b.prove(OutPoint::new(grants_txid, vout as u32), &node.key);
                    b = b.pay(node.key.public(), node.params.initial_balance);
                }
                txs.push(b.build().map_err(|e| bad(e.to_string()))?);
            }
        }
        txs.push(self.mgmt_tx(admin, MgmtKind::Noop).ok_or_else(|| bad("root cannot issue policy".into()))?);

        let block = self.nodes[admin].chain.mine_block(&txs, &root, 0).map_err(|e| bad(e.to_string()))?;
        let block = Arc::new(block);
        self.auditor_observe(&block, admin);
        for i in 0..self.nodes.len() {
            self.nodes[i].chain.apply_block(&block).map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    fn admin_index(&self) -> usize {
        self.nodes.iter().position(|n| n.behavior == Behavior::Administrator).expect("validated")
    }

    fn schedule_mining(&mut self, i: usize) {
        let rate = self.nodes[i].share / self.scenario.block_interval_ms as f64;
        let wait = Exp::new(rate).expect("positive rate").sample(&mut self.nodes[i].mine_rng);
        self.queue.push(self.now + (wait.ceil() as u64).max(1), Event::BlockFound(i));
    }

    fn schedule_wallet(&mut self, i: usize) {
        let mean = self.nodes[i].params.tx_interval_ms.max(1) as f64;
        let wait = Exp::new(1.0 / mean).expect("positive rate").sample(&mut self.nodes[i].wallet_rng);
        self.queue.push(self.now + (wait.ceil() as u64).max(1), Event::WalletTick(i));
    }

    fn broadcast(&mut self, from: usize, msg: Message) {
        let latency = self.scenario.latency;
        for to in 0..self.nodes.len() {
            if to == from {
                continue;
            }
            let jitter = self.nodes[from].link_rng.gen_range(0..=latency.jitter_ms);
            self.queue.push(self.now + latency.base_ms + jitter, Event::Deliver { to, msg: msg.clone() });
        }
    }

    fn block_found(&mut self, i: usize) {
        self.schedule_mining(i);
        let ttl = MEMPOOL_TTL_BLOCKS * self.scenario.block_interval_ms;
        let now = self.now;
        let node = &mut self.nodes[i];
        let parent = node.chain.tip();
        let state = node.chain.tip_state();
        node.mempool.retain(|(at, tx)| now.saturating_sub(*at) <= ttl && !state.contains_tx(&tx.txid()));
        node.mempool_ids = node.mempool.iter().map(|(_, tx)| tx.txid()).collect();
        let candidates: Vec<Transaction> = node
            .mempool
            .iter()
            .map(|(_, tx)| (**tx).clone())
            .filter(|tx| {
                !node.revolting
                    || node.chain.validate_tx_on(&parent, tx).is_ok_and(|o| !o.classification.is_management)
            })
            .collect();
        let txs = node.chain.select_transactions(&parent, &candidates);
        match node.chain.mine_on(&parent, &txs, &node.key, now as u32) {
            Ok(block) => {
                let block = Arc::new(block);
                let applied = node.chain.apply_block(&block);
                node.mined += 1;
                self.auditor_observe(&block, i);
                if applied.is_ok_and(|a| a.new_tip) {
                    self.on_new_tip(i);
                }
                self.broadcast(i, Message::Block { block, origin: i });
            }
            Err(ValidationError::QuotaViolation) => self.record_refusal(parent),
            Err(_) => {}
        }
    }

    fn record_refusal(&mut self, parent: BlockHash) {
        if parent != self.auditor.chain.tip() {
            return;
        }
        let height = self.auditor.chain.height();
        match self.stalls.last_mut() {
            Some(s) if s.height == height && s.resumed_ms.is_none() => s.refusals += 1,
            _ => self.stalls.push(Stall {
                height,
                since_ms: self.auditor.tip_since,
                first_refusal_ms: self.now,
                resumed_ms: None,
                refusals: 1,
            }),
        }
    }

    fn auditor_observe(&mut self, block: &Arc<Block>, miner: usize) {
        let hash = block.hash();
        if self.auditor.index.contains_key(&hash) {
            return;
        }
        let parent = block.header.prev_block_hash;
        let height = self.auditor.index.get(&parent).map_or(1, |&p| self.auditor.records[p].height + 1);
        let (before, old_tip) = (self.auditor.chain.height(), self.auditor.chain.tip());
        let violation = self.auditor.chain.apply_block(block).err().map(|e| e.code().to_string());
        let after = self.auditor.chain.height();
        if self.auditor.chain.tip() != old_tip {
            self.auditor.tip_since = self.now;
        }
        if after > before {
            for s in self.stalls.iter_mut().filter(|s| s.resumed_ms.is_none() && after > s.height) {
                s.resumed_ms = Some(self.now);
            }
        }
        self.auditor.index.insert(hash, self.auditor.records.len());
        self.auditor.records.push(BlockRecord {
            hash,
            parent,
            height,
            miner,
            time_ms: self.now,
            violation,
            block: block.clone(),
        });
    }

    fn deliver(&mut self, to: usize, msg: Message) {
        match msg {
            Message::Tx(tx) => {
                let node = &mut self.nodes[to];
                if node.mempool_ids.insert(tx.txid()) {
                    node.mempool.push((self.now, tx));
                }
            }
            Message::Block { block, origin } => {
                if !self.accepts(to, &block, origin) {
                    return;
                }
                let mut queue = vec![(block, origin)];
                while let Some((block, origin)) = queue.pop() {
                    let hash = block.hash();
                    match self.nodes[to].chain.apply_block(&block) {
                        Ok(applied) => {
                            if applied.new_tip {
                                self.on_new_tip(to);
                            }
                            let node = &mut self.nodes[to];
                            let (ready, waiting): (Vec<_>, Vec<_>) =
                                node.orphans.drain(..).partition(|(b, _)| b.header.prev_block_hash == hash);
                            node.orphans = waiting;
                            queue.extend(ready);
                        }
                        Err(ValidationError::UnknownParent) => self.nodes[to].orphans.push((block, origin)),
                        Err(_) => {}
                    }
                }
            }
        }
    }

    /// Revolting miners ignore blocks found by anyone else after the revolt.
    fn accepts(&self, to: usize, block: &Block, origin: usize) -> bool {
        let node = &self.nodes[to];
        if !node.revolting {
            return true;
        }
        let started = self.revolt_at.unwrap_or(u64::MAX);
        self.nodes[origin].revolting || u64::from(block.header.timestamp) < started
    }

    fn on_new_tip(&mut self, i: usize) {
        if self.nodes[i].behavior != Behavior::Administrator || self.withholding {
            return;
        }
        for _ in 0..self.nodes[i].params.mgmt_per_block {
            let kind = self.next_kind(i);
            self.issue(i, kind);
        }
    }

    fn next_kind(&self, i: usize) -> MgmtKind {
        let cycle = &self.nodes[i].params.mgmt_cycle;
        cycle[self.nodes[i].issued as usize % cycle.len()]
    }

    fn issue(&mut self, i: usize, kind: MgmtKind) {
        if let Some(tx) = self.mgmt_tx(i, kind) {
            let tx = Arc::new(tx);
            let node = &mut self.nodes[i];
            node.mempool_ids.insert(tx.txid());
            node.mempool.push((self.now, tx.clone()));
            self.broadcast(i, Message::Tx(tx));
        }
    }

    /// A management transaction from the administrator; lock time keeps each
    /// one distinct.
    fn mgmt_tx(&mut self, i: usize, kind: MgmtKind) -> Option<Transaction> {
        let n = self.nodes.len();
        let node = &mut self.nodes[i];
        node.issued += 1;
        let tree = &node.chain.tip_state().accounts;
        let b = TxBuilder::new()
            .prove_roles(tree, &node.key, RoleSet::only(Role::Manager))
            .ok()?
            .lock_time(node.issued);
        let b = match kind {
            MgmtKind::Noop => b.policy(node.key.public(), ptype::NO_OP, 0, false),
            MgmtKind::Grant => {
                let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                if others.is_empty() {
                    return None;
                }
                let target = others[node.issued as usize % others.len()];
                b.role_change(self.nodes[target].key.public(), true, RoleSet::only(Role::User))
            }
        };
        b.build().ok()
    }

    fn action(&mut self, a: usize) {
        match self.scenario.actions[a].action {
            ActionKind::Withhold => self.withholding = true,
            ActionKind::Resume => {
                self.withholding = false;
                let admin = self.admin_index();
                let k = self.nodes[admin].chain.tip_state().policy.snapshot().management_minimum().max(1);
                self.issue(admin, MgmtKind::Noop);
                for _ in 1..k {
                    let kind = self.next_kind(admin);
                    self.issue(admin, kind);
                }
            }
            ActionKind::Revolt => {
                self.revolt_at = Some(self.now);
                for node in self.nodes.iter_mut().filter(|n| n.behavior == Behavior::RevoltingMiner) {
                    node.revolting = true;
                    if node.params.drop_quota {
                        node.chain.set_ruleset(RuleSet::without_quota());
                    }
                }
            }
        }
    }

    fn wallet_tick(&mut self, i: usize) {
        self.schedule_wallet(i);
        if let Some(tx) = self.payment(i) {
            let tx = Arc::new(tx);
            let node = &mut self.nodes[i];
            node.mempool_ids.insert(tx.txid());
            node.mempool.push((self.now, tx.clone()));
            self.broadcast(i, Message::Tx(tx));
        }
    }

    /// A payment to another participant. The simulator holds every key, so
    /// the recipient's role proof stands in for an invoice it signed.
    fn payment(&mut self, i: usize) -> Option<Transaction> {
        let ttl = MEMPOOL_TTL_BLOCKS * self.scenario.block_interval_ms;
        let now = self.now;
        let recipients: Vec<usize> = (0..self.nodes.len()).filter(|&j| j != i).collect();
        if recipients.is_empty() {
            return None;
        }
        let node = &mut self.nodes[i];
        let state = node.chain.tip_state();
        node.pending_spends.retain(|op, at| state.utxo(op).is_some() && now - *at <= ttl);
        let fee = state.policy.snapshot().min_fee();
        let (op, value) = state
            .utxos_of(&node.key.public())
            .find(|(op, u)| !node.pending_spends.contains_key(op) && u.amount > fee)
            .map(|(op, u)| (*op, u.amount))?;
        let amount = node.wallet_rng.gen_range(1..=node.params.payment_max.max(1)).min(value - fee);
        let to = recipients[node.wallet_rng.gen_range(0..recipients.len())];
        let node = &self.nodes[i];
        let tree = &node.chain.tip_state().accounts;
        let recipient = &self.nodes[to].key;
        let user = RoleSet::only(Role::User);
        let mut b = TxBuilder::new().spend(op, &node.key).prove_roles(tree, &node.key, user).ok()?;
        b = b.prove_roles(tree, recipient, user).ok()?.pay(recipient.public(), amount);
        if value > amount + fee {
            b = b.pay(node.key.public(), value - amount - fee);
        }
        let tx = b.build().ok()?;
        self.nodes[i].pending_spends.insert(op, now);
        Some(tx)
    }
}

fn describe(time: u64, event: &Event, nodes: &[Node]) -> String {
    match event {
        Event::BlockFound(i) => format!("{time} found {}", nodes[*i].id),
        Event::Deliver { to, msg: Message::Block { block, origin } } => {
            format!("{time} block {} {}->{}", block.hash(), nodes[*origin].id, nodes[*to].id)
        }
        Event::Deliver { to, msg: Message::Tx(tx) } => format!("{time} tx {} ->{}", tx.txid(), nodes[*to].id),
        Event::Action(a) => format!("{time} action {a}"),
        Event::WalletTick(i) => format!("{time} wallet {}", nodes[*i].id),
    }
}

/// Runs a scenario to its horizon.
pub fn run_scenario(scenario: SimScenario) -> Result<SimReport, SimError> {
    Ok(Simulation::new(scenario)?.run())
}
