//! Block tree, fork choice and mining.
//!
//! Every accepted block keeps the ledger state it produced. States share
//! structure, so a reorganization only moves the tip pointer and the new tip's
//! state is exactly what a fresh replay of its branch would give.

mod genesis;
mod store;

pub use genesis::{GenesisConfig, InitialPolicy};
pub use store::{ChainStore, StoreError};

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::builder::coinbase;
use crate::codec::{merkle_root, Block, BlockHeader, Role, Transaction};
use crate::hash::BlockHash;
use crate::keys::{KeyPair, SignatureCache};
use crate::ledger::LedgerState;
use crate::params::{ChainParams, RuleSet};
use crate::reward::block_reward;
use crate::validation::{
    connect_block, validate_tx, BlockAccumulators, BlockSummary, TxOutcome, ValidationContext, ValidationError,
};

#[derive(Clone, Debug)]
pub struct BlockEntry {
    pub block: Arc<Block>,
    pub parent: Option<BlockHash>,
    pub height: u64,
    /// Cumulative work from genesis through this block.
    pub work: BigUint,
    /// Arrival order, for first-seen tie breaking.
    pub seen: u64,
    pub state: LedgerState,
    pub summary: Option<BlockSummary>,
}

/// Result of handing a block to [`Chain::apply_block`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Applied {
    pub hash: BlockHash,
    pub height: u64,
    pub new_tip: bool,
    /// The new tip does not extend the previous one.
    pub reorg: bool,
    pub already_known: bool,
}

#[derive(Clone, Debug)]
pub struct Chain {
    params: ChainParams,
    ruleset: RuleSet,
    genesis: BlockHash,
    entries: HashMap<BlockHash, BlockEntry>,
    invalid: HashMap<BlockHash, ValidationError>,
    tip: BlockHash,
    arrivals: u64,
    sigs: Arc<SignatureCache>,
}

impl Chain {
    pub fn from_genesis(config: &GenesisConfig) -> Result<Self, ValidationError> {
        let state = config.genesis_state()?;
        let block = config.genesis_block()?;
        let hash = block.hash();
        let entry = BlockEntry {
            block: Arc::new(block),
            parent: None,
            height: 0,
            work: config.target.work(),
            seen: 0,
            state,
            summary: None,
        };
        Ok(Chain {
            params: config.params(),
            ruleset: RuleSet::default(),
            genesis: hash,
            entries: HashMap::from([(hash, entry)]),
            invalid: HashMap::new(),
            tip: hash,
            arrivals: 1,
            sigs: Arc::new(SignatureCache::new()),
        })
    }

    pub fn with_ruleset(mut self, ruleset: RuleSet) -> Self {
        self.ruleset = ruleset;
        self
    }

    pub fn with_signature_cache(mut self, sigs: Arc<SignatureCache>) -> Self {
        self.sigs = sigs;
        self
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn ruleset(&self) -> RuleSet {
        self.ruleset
    }

    /// Switches validation rules for blocks applied from now on.
    pub fn set_ruleset(&mut self, ruleset: RuleSet) {
        self.ruleset = ruleset;
    }

    pub fn genesis_hash(&self) -> BlockHash {
        self.genesis
    }

    pub fn tip(&self) -> BlockHash {
        self.tip
    }

    pub fn height(&self) -> u64 {
        self.entries[&self.tip].height
    }

    pub fn tip_state(&self) -> &LedgerState {
        &self.entries[&self.tip].state
    }

    pub fn tip_work(&self) -> &BigUint {
        &self.entries[&self.tip].work
    }

    pub fn entry(&self, hash: &BlockHash) -> Option<&BlockEntry> {
        self.entries.get(hash)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&BlockHash, &BlockEntry)> {
        self.entries.iter()
    }

    pub fn contains(&self, hash: &BlockHash) -> bool {
        self.entries.contains_key(hash)
    }

    /// Why a block was refused, if it was.
    pub fn rejection(&self, hash: &BlockHash) -> Option<&ValidationError> {
        self.invalid.get(hash)
    }

    /// Hashes from genesis to `hash` inclusive.
    pub fn branch(&self, hash: &BlockHash) -> Vec<BlockHash> {
        let mut out = Vec::new();
        let mut cur = self.entries.get(hash).map(|_| *hash);
        while let Some(h) = cur {
            out.push(h);
            cur = self.entries[&h].parent;
        }
        out.reverse();
        out
    }

    pub fn canonical(&self) -> Vec<BlockHash> {
        self.branch(&self.tip)
    }

    /// Ancestor of `hash` at `height`, if `hash` is that high.
    pub fn ancestor_at(&self, hash: &BlockHash, height: u64) -> Option<BlockHash> {
        let mut cur = *hash;
        loop {
            let e = self.entries.get(&cur)?;
            if e.height == height {
                return Some(cur);
            }
            if e.height < height {
                return None;
            }
            cur = e.parent?;
        }
    }

    pub fn is_ancestor(&self, ancestor: &BlockHash, of: &BlockHash) -> bool {
        match self.entries.get(ancestor) {
            Some(e) => self.ancestor_at(of, e.height) == Some(*ancestor),
            None => false,
        }
    }

    /// Validates and indexes a block, moving the tip if it now has the most
    /// work. Refused blocks leave the chain unchanged apart from being
    /// remembered as invalid.
    pub fn apply_block(&mut self, block: &Block) -> Result<Applied, ValidationError> {
        let hash = block.hash();
        if let Some(e) = self.entries.get(&hash) {
            return Ok(Applied { hash, height: e.height, new_tip: false, reorg: false, already_known: true });
        }
        if let Some(err) = self.invalid.get(&hash) {
            return Err(err.clone());
        }
        let parent_hash = block.header.prev_block_hash;
        if self.invalid.contains_key(&parent_hash) {
            self.invalid.insert(hash, ValidationError::InvalidAncestor);
            return Err(ValidationError::InvalidAncestor);
        }
        let Some(parent) = self.entries.get(&parent_hash) else {
            return Err(ValidationError::UnknownParent);
        };
        let (state, summary) = match connect_block(&parent.state, block, &self.params, self.ruleset, Some(&self.sigs))
        {
            Ok(ok) => ok,
            Err(e) => {
                self.invalid.insert(hash, e.clone());
                return Err(e);
            }
        };
        let work = &parent.work + block.header.target.work();
        let height = parent.height + 1;
        let new_tip = work > self.entries[&self.tip].work;
        let reorg = new_tip && parent_hash != self.tip;
        self.entries.insert(
            hash,
            BlockEntry {
                block: Arc::new(block.clone()),
                parent: Some(parent_hash),
                height,
                work,
                seen: self.arrivals,
                state,
                summary: Some(summary),
            },
        );
        self.arrivals += 1;
        if new_tip {
            self.tip = hash;
        }
        Ok(Applied { hash, height, new_tip, reorg, already_known: false })
    }

    /// Block reward for a child of `parent`.
    pub fn reward_after(&self, parent: &BlockHash) -> Option<u64> {
        let e = self.entries.get(parent)?;
        Some(block_reward(&e.state.policy.snapshot(), &self.params, e.height + 1))
    }

    /// Checks a loose transaction as if it were the first in the next block.
    pub fn validate_tx(&self, tx: &Transaction) -> Result<TxOutcome, ValidationError> {
        self.validate_tx_on(&self.tip, tx)
    }

    pub fn validate_tx_on(&self, parent: &BlockHash, tx: &Transaction) -> Result<TxOutcome, ValidationError> {
        let e = self.entries.get(parent).ok_or(ValidationError::UnknownParent)?;
        let ctx = self.context(e);
        validate_tx(tx, 1, &e.state, &ctx, &BlockAccumulators::default())
    }

    fn context<'a>(&'a self, parent: &BlockEntry) -> ValidationContext<'a> {
        ValidationContext {
            params: &self.params,
            rules: parent.state.policy.snapshot(),
            height: parent.height + 1,
            sigs: Some(&self.sigs),
        }
    }

    /// Keeps, in order, the candidates that remain valid after the ones
    /// already kept, skipping the rest.
    pub fn select_transactions(&self, parent: &BlockHash, candidates: &[Transaction]) -> Vec<Transaction> {
        let Some(e) = self.entries.get(parent) else {
            return Vec::new();
        };
        let ctx = self.context(e);
        let mut state = e.state.clone();
        let mut acc = BlockAccumulators::default();
        let mut kept = Vec::new();
        for tx in candidates {
            if let Ok(outcome) = validate_tx(tx, kept.len() as u32 + 1, &state, &ctx, &acc) {
                acc.absorb(&outcome);
                outcome.apply(&mut state);
                kept.push(tx.clone());
            }
        }
        kept
    }

    pub fn mine_block(&self, txs: &[Transaction], miner: &KeyPair, timestamp: u32) -> Result<Block, ValidationError> {
        self.mine_on(&self.tip, txs, miner, timestamp)
    }

    /// Builds a block on `parent` paying the full reward plus fees to
    /// `miner`, searches nonces, and checks the result under this chain's
    /// rules. Refuses to return a block the chain would reject.
    pub fn mine_on(
        &self,
        parent: &BlockHash,
        txs: &[Transaction],
        miner: &KeyPair,
        timestamp: u32,
    ) -> Result<Block, ValidationError> {
        let e = self.entries.get(parent).ok_or(ValidationError::UnknownParent)?;
        let grant =
            e.state.accounts.active_grant(&miner.public(), Role::User).ok_or(ValidationError::NoURoleForMiner)?;
        let ctx = self.context(e);
        let mut state = e.state.clone();
        let mut acc = BlockAccumulators::default();
        for (i, tx) in txs.iter().enumerate() {
            let outcome = validate_tx(tx, i as u32 + 1, &state, &ctx, &acc)?;
            acc.absorb(&outcome);
            outcome.apply(&mut state);
        }
        let reward = block_reward(&ctx.rules, &self.params, ctx.height);
        let amount = u64::try_from(u128::from(reward) + acc.fees).map_err(|_| ValidationError::ExcessReward)?;
        let mut transactions = vec![coinbase(ctx.height, miner, grant, amount)];
        transactions.extend_from_slice(txs);
        let txids: Vec<_> = transactions.iter().map(Transaction::txid).collect();
        let mut header = BlockHeader {
            prev_block_hash: *parent,
            merkle_root: merkle_root(&txids)?,
            timestamp,
            target: self.params.target,
            nonce: 0,
        };
        while !header.meets_target() {
            header.nonce += 1;
        }
        let block = Block { header, transactions };
        connect_block(&e.state, &block, &self.params, self.ruleset, Some(&self.sigs))?;
        Ok(block)
    }

    pub fn state_summary(&self) -> Value {
        state_summary(self.tip_state())
    }
}

/// Canonical JSON view of a ledger state: accounts, policy, coins, supply
/// and quota progress. Byte-identical for identical states.
pub fn state_summary(state: &LedgerState) -> Value {
    let effective = state.policy.snapshot();
    let utxos: Vec<Value> = state
        .utxos()
        .map(|(op, u)| json!({"outpoint": op, "owner": u.owner, "amount": u.amount, "height": u.height}))
        .collect();
    json!({
        "height": state.height,
        "tip": state.tip,
        "accounts": accounts_json(state),
        "policy": {
            "effective": effective.0.to_vec(),
            "records": state.policy.all_records().collect::<Vec<_>>(),
        },
        "utxos": utxos,
        "supply": supply_json(state),
        "quota": state.quota,
    })
}

pub fn accounts_json(state: &LedgerState) -> Value {
    serde_json::to_value(state.accounts.summary()).expect("serializable")
}

pub fn supply_json(state: &LedgerState) -> Value {
    let s = state.supply;
    json!({
        "rewards": s.rewards.to_string(),
        "coinbase": s.coinbase.to_string(),
        "created": s.created.to_string(),
        "fees": s.fees.to_string(),
        "utxo_total": state.utxo_total().to_string(),
    })
}
