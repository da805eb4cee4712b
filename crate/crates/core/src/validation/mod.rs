//! Consensus rules for transactions and blocks.
//!
//! Every transaction in a block is checked against the ledger state left by
//! the transactions before it, under the policy values in force at the parent
//! block. Role and policy outputs take effect for later transactions of the
//! same block; policy values take effect from the next block.

mod block;
mod coinbase;
mod quota;
mod tx;

pub use block::{connect_block, BlockSummary};
pub use coinbase::validate_coinbase;
pub use quota::{advance_quota, check_management_quota};
pub use tx::{validate_tx, TxOutcome};

use serde::Serialize;

use crate::codec::CodecError;
use crate::hash::Hash256;
use crate::keys::{PublicKey, SignatureCache};
use crate::params::ChainParams;
use crate::policy::{EffectivePolicy, PolicyError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("transaction has no inputs, no outputs, or a stray null input")]
    BadTxShape,
    #[error("transaction already in the chain")]
    DuplicateTransaction,
    #[error("input references an unknown output")]
    MissingInput,
    #[error("output already spent or referenced twice")]
    DoubleSpend,
    #[error("input references a role grant that has been removed")]
    RoleRevoked,
    #[error("missing or invalid signature")]
    SignatureInvalid,
    #[error("coin sender or receiver does not prove the U role")]
    MissingURole,
    #[error("coin sender or receiver is frozen")]
    FrozenAccount,
    #[error("no role input covers the target account")]
    NotCovered,
    #[error("no role input holds the roles required")]
    RoleNotHeld,
    #[error("role is disabled by policy")]
    RoleDisabledByPolicy,
    #[error("outputs exceed inputs without a central-banker input")]
    CoinCreationWithoutC,
    #[error("coin creation exceeds the per-block limit")]
    CoinCreationLimitExceeded,
    #[error("fee below the policy minimum")]
    FeeBelowMinimum,
    #[error("law-enforcement action on an account not deeper than the actor")]
    LDepthViolation,
    #[error("role removal targets an unknown account")]
    UnknownTarget,
    #[error("target is frozen; only law enforcement may restore it")]
    FrozenTarget,
    #[error("coinbase destination does not prove the U role")]
    MissingMinerURole,
    #[error("coinbase pays more than reward plus fees")]
    ExcessReward,
    #[error("malformed coinbase")]
    BadCoinbaseShape,
    #[error("header does not meet the chain target")]
    BadPoW,
    #[error("merkle root does not match the transactions")]
    BadMerkleRoot,
    #[error("management quota window not satisfied")]
    QuotaViolation,
    #[error("parent block unknown")]
    UnknownParent,
    #[error("block descends from an invalid block")]
    InvalidAncestor,
    #[error("miner account holds no active U grant")]
    NoURoleForMiner,
    #[error("bad genesis config: {0}")]
    BadConfig(String),
}

impl ValidationError {
    /// Stable identifier printed by tools and used in reports.
    pub fn code(&self) -> &'static str {
        use ValidationError::*;
        match self {
            Codec(e) => e.code(),
            Policy(e) => e.code(),
            BadTxShape => "BadTxShape",
            DuplicateTransaction => "DuplicateTransaction",
            MissingInput => "MissingInput",
            DoubleSpend => "DoubleSpend",
            RoleRevoked => "RoleRevoked",
            SignatureInvalid => "SignatureInvalid",
            MissingURole => "MissingURole",
            FrozenAccount => "FrozenAccount",
            NotCovered => "NotCovered",
            RoleNotHeld => "RoleNotHeld",
            RoleDisabledByPolicy => "RoleDisabledByPolicy",
            CoinCreationWithoutC => "CoinCreationWithoutC",
            CoinCreationLimitExceeded => "CoinCreationLimitExceeded",
            FeeBelowMinimum => "FeeBelowMinimum",
            LDepthViolation => "LDepthViolation",
            UnknownTarget => "UnknownTarget",
            FrozenTarget => "FrozenTarget",
            MissingMinerURole => "MissingMinerURole",
            ExcessReward => "ExcessReward",
            BadCoinbaseShape => "BadCoinbaseShape",
            BadPoW => "BadPoW",
            BadMerkleRoot => "BadMerkleRoot",
            QuotaViolation => "QuotaViolation",
            UnknownParent => "UnknownParent",
            InvalidAncestor => "InvalidAncestor",
            NoURoleForMiner => "NoURoleForMiner",
            BadConfig(_) => "BadConfig",
        }
    }
}

/// What a transaction does, as seen by quota accounting and reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct TxClassification {
    pub has_coin_transfer: bool,
    pub has_role_change: bool,
    pub has_policy_change: bool,
    /// Some input proves the M role.
    pub is_management: bool,
    pub is_coinbase: bool,
}

impl TxClassification {
    /// Counts toward the policy-change part of the management quota.
    pub fn is_policy_management(&self) -> bool {
        self.is_management && self.has_policy_change
    }
}

/// Per-block running totals threaded through transaction validation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BlockAccumulators {
    pub created: u128,
    pub fees: u128,
    pub management: u32,
    pub policy_management: u32,
}

impl BlockAccumulators {
    pub fn absorb(&mut self, outcome: &TxOutcome) {
        self.created += outcome.created;
        self.fees += outcome.fee;
        if outcome.classification.is_management {
            self.management += 1;
        }
        if outcome.classification.is_policy_management() {
            self.policy_management += 1;
        }
    }
}

/// Inputs to validation that do not live in the ledger state.
#[derive(Clone, Copy)]
pub struct ValidationContext<'a> {
    pub params: &'a ChainParams,
    /// Policy in force: the parent block's effective values.
    pub rules: EffectivePolicy,
    /// Height of the block the transaction would be included in.
    pub height: u64,
    pub sigs: Option<&'a SignatureCache>,
}

impl ValidationContext<'_> {
    pub(crate) fn verify(&self, key: &PublicKey, digest: &Hash256, signature: &[u8]) -> bool {
        match self.sigs {
            Some(cache) => cache.verify(self.params.scheme, key, digest, signature),
            None => self.params.scheme.verify(key, digest, signature),
        }
    }
}
