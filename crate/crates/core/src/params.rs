use serde::Serialize;

use crate::codec::Target;
use crate::keys::SignatureScheme;

/// Consensus constants fixed by the genesis config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChainParams {
    pub scheme: SignatureScheme,
    pub target: Target,
    pub initial_reward: u64,
    pub epoch_length: u64,
    /// When false, coin recipients are checked against the registry instead
    /// of having to sign a U-role input.
    pub require_receiver_role_proof: bool,
}

/// Optional rule families a node enforces. Models node software variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RuleSet {
    pub enforce_management_quota: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet { enforce_management_quota: true }
    }
}

impl RuleSet {
    /// Software that ignores management quotas.
    pub fn without_quota() -> Self {
        RuleSet { enforce_management_quota: false }
    }
}
