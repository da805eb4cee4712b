use std::collections::BTreeSet;
use std::path::Path;

use mcoin_core::chain::GenesisConfig;
use mcoin_core::hash::sha256;
use mcoin_core::keys::KeyPair;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::BadScenario(_) => "BadScenario",
            SimError::Io(_) => "IOError",
        }
    }
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::BadScenario(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Behavior {
    CompliantMiner,
    RevoltingMiner,
    Administrator,
    Wallet,
}

/// Management transaction an administrator can emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgmtKind {
    /// Policy type 15, no effect beyond counting toward the quota.
    Noop,
    /// Re-grants U to a participant.
    Grant,
}

/// Hashpower share, written as `"a/b"` or `"a"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share(pub Ratio<u64>);

impl Share {
    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl Serialize for Share {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Share {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let r: Ratio<u64> = s.trim().parse().map_err(|_| serde::de::Error::custom(format!("bad share {s:?}")))?;
        Ok(Share(r))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorParams {
    /// Administrator: management transactions issued per new tip.
    pub mgmt_per_block: u32,
    /// Administrator: kinds issued, in rotation.
    pub mgmt_cycle: Vec<MgmtKind>,
    /// Revolting miner: stop enforcing the management quota when the revolt starts.
    pub drop_quota: bool,
    /// Wallet: mean time between payments.
    pub tx_interval_ms: u64,
    /// Wallet: largest single payment.
    pub payment_max: u64,
    /// Wallet: coin created for it in the bootstrap block.
    pub initial_balance: u64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        BehaviorParams {
            mgmt_per_block: 1,
            mgmt_cycle: vec![MgmtKind::Noop],
            drop_quota: true,
            tx_interval_ms: 5_000,
            payment_max: 10,
            initial_balance: 1_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub behavior: Behavior,
    pub hashpower: Share,
    /// Seed of the node's key pair; derived from `id` when absent.
    #[serde(default)]
    pub key_seed: Option<u64>,
    #[serde(default)]
    pub params: BehaviorParams,
}

impl NodeSpec {
    pub fn key(&self) -> KeyPair {
        KeyPair::from_seed(self.key_seed.unwrap_or_else(|| seed_from_id(&self.id)))
    }
}

fn seed_from_id(id: &str) -> u64 {
    let h = sha256(id.as_bytes());
    u64::from_le_bytes(h.0[..8].try_into().expect("8 bytes"))
}

/// Link delay: `base_ms` plus uniform jitter in `[0, jitter_ms]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Latency {
    pub base_ms: u64,
    pub jitter_ms: u64,
}

impl Default for Latency {
    fn default() -> Self {
        Latency { base_ms: 50, jitter_ms: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// The administrator stops issuing management transactions.
    Withhold,
    /// The administrator issues enough to satisfy the quota, then carries on.
    Resume,
    /// Revolting miners fork off and drop management transactions.
    Revolt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledAction {
    pub at_ms: u64,
    pub action: ActionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub seed: u64,
    pub genesis: GenesisConfig,
    pub duration_ms: u64,
    /// Mean network-wide time between blocks at full hashpower.
    #[serde(default = "default_block_interval")]
    pub block_interval_ms: u64,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub latency: Latency,
    #[serde(default)]
    pub actions: Vec<ScheduledAction>,
    /// Side branches shorter than this are ordinary orphan races and are
    /// left out of the branch inventory.
    #[serde(default = "default_min_branch_len")]
    pub min_branch_len: u64,
}

fn default_block_interval() -> u64 {
    1_000
}

fn default_min_branch_len() -> u64 {
    6
}

impl SimScenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let scenario: SimScenario = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn admin(&self) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.behavior == Behavior::Administrator)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.nodes.is_empty() {
            return Err(bad("no nodes"));
        }
        let mut ids = BTreeSet::new();
        let mut keys = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                return Err(bad(format!("duplicate node id {:?}", n.id)));
            }
            if !keys.insert(n.key().public()) {
                return Err(bad(format!("node {:?} shares a key with another node", n.id)));
            }
            if *n.hashpower.0.denom() == 0 {
                return Err(bad(format!("node {:?} has a zero denominator", n.id)));
            }
            if n.behavior == Behavior::Wallet && !n.hashpower.0.is_zero() {
                return Err(bad(format!("wallet {:?} cannot mine", n.id)));
            }
            if n.params.mgmt_cycle.is_empty() {
                return Err(bad(format!("node {:?} has an empty mgmt_cycle", n.id)));
            }
        }
        let total = self.nodes.iter().fold(Ratio::<u64>::zero(), |acc, n| acc + n.hashpower.0);
        if !total.is_one() {
            return Err(bad(format!("hashpower shares sum to {total}, not 1")));
        }
        let admins = self.nodes.iter().filter(|n| n.behavior == Behavior::Administrator).count();
        if admins != 1 {
            return Err(bad(format!("expected one Administrator, found {admins}")));
        }
        let admin = self.admin().expect("counted");
        if admin.key().public() != self.genesis.root {
            return Err(bad("genesis root is not the administrator's key"));
        }
        if self.block_interval_ms == 0 {
            return Err(bad("block_interval_ms must be positive"));
        }
        if self.duration_ms > u64::from(u32::MAX) {
            return Err(bad("duration_ms must fit block timestamps (32 bits)"));
        }
        self.genesis.genesis_state().map_err(|e| bad(format!("genesis: {e}")))?;
        Ok(())
    }
}
