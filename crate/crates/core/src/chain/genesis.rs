use serde::{Deserialize, Serialize};

use crate::accounts::{AccountTree, AuthorityKey, Provenance};
use crate::codec::{merkle_root, Block, BlockHeader, NValueMode, OutPoint, RoleSet, Target, Transaction, TxIn, TxOut, MAX_AMOUNT};
use crate::hash::{sha256d, Hash256};
use crate::keys::{PublicKey, SignatureScheme};
use crate::ledger::{LedgerState, QuotaWindow};
use crate::params::ChainParams;
use crate::policy::{ptype, PolicyDefaults, PolicyRecord, PolicyState};
use crate::validation::ValidationError;

/// A policy record carried by the genesis transaction, issued by the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPolicy {
    pub ptype: u32,
    pub param: u32,
    #[serde(default)]
    pub permanent: bool,
}

fn default_true() -> bool {
    true
}

/// Everything nodes must agree on before the first block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisConfig {
    pub root: PublicKey,
    #[serde(default)]
    pub scheme: SignatureScheme,
    pub target: Target,
    pub initial_reward: u64,
    /// Blocks per reward-decay epoch.
    pub epoch_length: u64,
    #[serde(default)]
    pub timestamp: u32,
    #[serde(default)]
    pub policy: PolicyDefaults,
    #[serde(default = "default_true")]
    pub require_receiver_role_proof: bool,
    #[serde(default)]
    pub initial_policies: Vec<InitialPolicy>,
}

impl GenesisConfig {
    /// Config with a target every hash meets and all numeric policies zero.
    pub fn trivial(root: PublicKey) -> Self {
        GenesisConfig {
            root,
            scheme: SignatureScheme::default(),
            target: Target::MAX,
            initial_reward: 50,
            epoch_length: 100,
            timestamp: 0,
            policy: PolicyDefaults::default(),
            require_receiver_role_proof: true,
            initial_policies: Vec::new(),
        }
    }

    /// JSON with sorted keys and lowercase hex.
    pub fn canonical_json(&self) -> String {
        serde_json::to_value(self).expect("config serializes").to_string()
    }

    /// Chain identity; also the genesis header's previous-block field.
    pub fn config_hash(&self) -> Hash256 {
        sha256d(self.canonical_json().as_bytes())
    }

    pub fn params(&self) -> ChainParams {
        ChainParams {
            scheme: self.scheme,
            target: self.target,
            initial_reward: self.initial_reward,
            epoch_length: self.epoch_length,
            require_receiver_role_proof: self.require_receiver_role_proof,
        }
    }

    /// One null input; output 0 grants every role to the root, the rest
    /// carry the initial policies.
    pub fn genesis_tx(&self) -> Result<Transaction, ValidationError> {
        let mut outputs = vec![TxOut::new(NValueMode::RoleChange { add: true, roles: RoleSet::ALL }, self.root)?];
        for p in &self.initial_policies {
            let mode = NValueMode::PolicyChange { permanent: p.permanent, ptype: p.ptype, param: p.param };
            outputs.push(TxOut::new(mode, self.root)?);
        }
        Ok(Transaction::new(vec![TxIn::new(OutPoint::NULL)], outputs))
    }

    pub fn genesis_block(&self) -> Result<Block, ValidationError> {
        let tx = self.genesis_tx()?;
        let header = BlockHeader {
            prev_block_hash: self.config_hash(),
            merkle_root: merkle_root(&[tx.txid()])?,
            timestamp: self.timestamp,
            target: self.target,
            nonce: 0,
        };
        Ok(Block { header, transactions: vec![tx] })
    }

    /// State after the genesis block, which is accepted without proof of work.
    pub fn genesis_state(&self) -> Result<LedgerState, ValidationError> {
        if self.epoch_length == 0 {
            return Err(ValidationError::BadConfig("epoch_length must be positive".into()));
        }
        if self.initial_reward > MAX_AMOUNT {
            return Err(ValidationError::BadConfig("initial_reward exceeds the coin range".into()));
        }
        let block = self.genesis_block()?;
        let txid = block.transactions[0].txid();
        let tree = AccountTree::with_root(self.root, OutPoint::new(txid, 0), Provenance::new(0, 0, 0));
        let mut policy = PolicyState::new(&self.policy);
        if policy.snapshot().get(ptype::DECAY_RATE) > policy.snapshot().get(ptype::MAX_DECAY_RATE) {
            return Err(ValidationError::BadConfig("decay_rate exceeds max_decay_rate".into()));
        }
        for (i, p) in self.initial_policies.iter().enumerate() {
            let record = PolicyRecord {
                ptype: p.ptype,
                param: p.param,
                permanent: p.permanent,
                issuer: self.root,
                authority: AuthorityKey::ROOT,
                position: Provenance::new(0, 0, i as u32 + 1),
            };
            policy.apply(record).map_err(|e| ValidationError::BadConfig(e.to_string()))?;
        }
        let period = policy.snapshot().management_period();
        let mut state = LedgerState::new(block.hash(), tree, policy);
        state.record_tx(txid);
        state.quota = QuotaWindow { period, anchor: 1, management: 0, policy_management: 0 };
        Ok(state)
    }
}
