//! Policy records and their resolution into effective values.
//!
//! Each of the sixteen policy types resolves to the parameter of the record
//! issued by the most authoritative M holder; among that issuer's records the
//! latest wins. Types without records fall back to their defaults.

use serde::{Deserialize, Serialize};

use crate::accounts::{AuthorityKey, Provenance};
use crate::codec::Role;
use crate::keys::PublicKey;

pub const POLICY_TYPES: usize = 16;

/// Policy type numbers.
pub mod ptype {
    pub const M_ENABLED: u32 = 0;
    pub const C_ENABLED: u32 = 1;
    pub const L_ENABLED: u32 = 2;
    pub const U_ENABLED: u32 = 3;
    pub const A_ENABLED: u32 = 4;
    pub const L_MOVES_COIN: u32 = 5;
    pub const C_CREATION_LIMIT: u32 = 6;
    pub const REWARD_MODE: u32 = 7;
    pub const MANUAL_REWARD: u32 = 8;
    pub const MIN_REWARD: u32 = 9;
    pub const DECAY_RATE: u32 = 10;
    pub const MAX_DECAY_RATE: u32 = 11;
    pub const MIN_FEE: u32 = 12;
    pub const MGMT_PERIOD: u32 = 13;
    pub const MGMT_MINIMUM: u32 = 14;
    pub const NO_OP: u32 = 15;
}

/// Type 7 values.
pub const REWARD_MODE_MANUAL: u32 = 0;
pub const REWARD_MODE_SELF_ADJUSTING: u32 = 1;

pub fn is_binary(ptype: u32) -> bool {
    matches!(ptype, 0..=5 | 7)
}

/// Converts a rate in [0, 1) to unsigned Q0.32.
pub fn q32_from_f64(rate: f64) -> u32 {
    (rate.clamp(0.0, 1.0) * 4_294_967_296.0).min(u32::MAX as f64) as u32
}

pub fn q32_to_f64(raw: u32) -> f64 {
    f64::from(raw) / 4_294_967_296.0
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyRecord {
    pub ptype: u32,
    pub param: u32,
    pub permanent: bool,
    pub issuer: PublicKey,
    pub authority: AuthorityKey,
    pub position: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("unknown policy type {0}")]
    UnknownType(u32),
    #[error("parameter {param} is not valid for policy type {ptype}")]
    BadParam { ptype: u32, param: u32 },
    #[error("issuer already set policy type {0} permanently")]
    PermanenceViolation(u32),
    #[error("decay rate would exceed the maximum decay rate")]
    DecayExceedsMax,
}

impl PolicyError {
    pub fn code(&self) -> &'static str {
        match self {
            PolicyError::UnknownType(_) => "UnknownPolicyType",
            PolicyError::BadParam { .. } => "BadParam",
            PolicyError::PermanenceViolation(_) => "PermanenceViolation",
            PolicyError::DecayExceedsMax => "DecayExceedsMax",
        }
    }
}

/// Defaults for the numeric policy types, supplied by the genesis config.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyDefaults {
    /// Type 6; 0 means no limit.
    pub coin_creation_limit: u32,
    /// Type 8.
    pub manual_block_reward: u32,
    /// Type 9.
    pub minimum_block_reward: u32,
    /// Type 10, Q0.32.
    pub decay_rate: u32,
    /// Type 11, Q0.32.
    pub max_decay_rate: u32,
    /// Type 12; 0 means no minimum.
    pub min_fee: u32,
    /// Type 13; 0 disables the management quota.
    pub management_period: u32,
    /// Type 14.
    pub management_minimum: u32,
}

impl PolicyDefaults {
    pub fn table(&self) -> [u32; POLICY_TYPES] {
        let mut t = [0u32; POLICY_TYPES];
        for p in 0..POLICY_TYPES as u32 {
            if is_binary(p) {
                t[p as usize] = 1;
            }
        }
        t[ptype::C_CREATION_LIMIT as usize] = self.coin_creation_limit;
        t[ptype::MANUAL_REWARD as usize] = self.manual_block_reward;
        t[ptype::MIN_REWARD as usize] = self.minimum_block_reward;
        t[ptype::DECAY_RATE as usize] = self.decay_rate;
        t[ptype::MAX_DECAY_RATE as usize] = self.max_decay_rate;
        t[ptype::MIN_FEE as usize] = self.min_fee;
        t[ptype::MGMT_PERIOD as usize] = self.management_period;
        t[ptype::MGMT_MINIMUM as usize] = self.management_minimum;
        t
    }
}

/// Snapshot of every effective value, as consulted during validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EffectivePolicy(pub [u32; POLICY_TYPES]);

impl EffectivePolicy {
    pub fn get(&self, ptype: u32) -> u32 {
        self.0[ptype as usize]
    }

    pub fn role_enabled(&self, role: Role) -> bool {
        self.get(role.enable_policy_type()) != 0
    }

    pub fn law_moves_coin(&self) -> bool {
        self.get(ptype::L_MOVES_COIN) != 0
    }

    pub fn coin_creation_limit(&self) -> u64 {
        u64::from(self.get(ptype::C_CREATION_LIMIT))
    }

    pub fn min_fee(&self) -> u64 {
        u64::from(self.get(ptype::MIN_FEE))
    }

    pub fn management_period(&self) -> u32 {
        self.get(ptype::MGMT_PERIOD)
    }

    pub fn management_minimum(&self) -> u32 {
        self.get(ptype::MGMT_MINIMUM)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyState {
    defaults: [u32; POLICY_TYPES],
    records: [im::Vector<PolicyRecord>; POLICY_TYPES],
    effective: [u32; POLICY_TYPES],
}

impl PolicyState {
    pub fn new(defaults: &PolicyDefaults) -> Self {
        let table = defaults.table();
        PolicyState { defaults: table, records: Default::default(), effective: table }
    }

    pub fn effective(&self, ptype: u32) -> Result<u32, PolicyError> {
        self.effective.get(ptype as usize).copied().ok_or(PolicyError::UnknownType(ptype))
    }

    pub fn snapshot(&self) -> EffectivePolicy {
        EffectivePolicy(self.effective)
    }

    pub fn records(&self, ptype: u32) -> impl Iterator<Item = &PolicyRecord> {
        self.records.get(ptype as usize).into_iter().flatten()
    }

    pub fn all_records(&self) -> impl Iterator<Item = &PolicyRecord> {
        self.records.iter().flatten()
    }

    pub fn is_permanent(&self, issuer: &PublicKey, ptype: u32) -> bool {
        self.records(ptype).any(|r| r.permanent && r.issuer == *issuer)
    }

    /// Appends a record and recomputes the affected effective value. The
    /// caller has checked that the issuer holds M.
    pub fn apply(&mut self, record: PolicyRecord) -> Result<(), PolicyError> {
        let p = record.ptype;
        if p as usize >= POLICY_TYPES {
            return Err(PolicyError::UnknownType(p));
        }
        let param_ok = if is_binary(p) {
            record.param <= 1
        } else if p == ptype::NO_OP {
            record.param == 0
        } else {
            true
        };
        if !param_ok {
            return Err(PolicyError::BadParam { ptype: p, param: record.param });
        }
        if p == ptype::NO_OP {
            return Ok(());
        }
        if self.is_permanent(&record.issuer, p) {
            return Err(PolicyError::PermanenceViolation(p));
        }
        if p == ptype::DECAY_RATE && record.param > self.effective[ptype::MAX_DECAY_RATE as usize] {
            return Err(PolicyError::DecayExceedsMax);
        }
        let mut records = self.records[p as usize].clone();
        records.push_back(record);
        let value = resolve(&records).unwrap_or(self.defaults[p as usize]);
        let mut effective = self.effective;
        effective[p as usize] = value;
        if effective[ptype::DECAY_RATE as usize] > effective[ptype::MAX_DECAY_RATE as usize] {
            return Err(PolicyError::DecayExceedsMax);
        }
        self.records[p as usize] = records;
        self.effective = effective;
        Ok(())
    }
}

/// Most authoritative issuer's latest record. Records are kept in chain order.
fn resolve(records: &im::Vector<PolicyRecord>) -> Option<u32> {
    let best = records.iter().map(|r| r.authority).min()?;
    records.iter().rev().find(|r| r.authority == best).map(|r| r.param)
}
