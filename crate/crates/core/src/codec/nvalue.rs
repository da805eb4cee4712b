//! The three modes packed into a 64-bit output value.
//!
//! Bits are numbered from 1 at the most significant end.
//!
//! ```text
//! coin transfer   0 | amount (63)
//! role change     1 0 | add | M C L U A | 0 (56)
//! policy change   1 1 | permanent | 0 0 | type (27) | parameter (32)
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CodecError;

/// One of the five account roles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Currency manager: role grants and policy.
    Manager,
    /// Central banker: coin creation.
    CentralBanker,
    /// Law enforcement: forced moves, freeze and restore.
    LawEnforcement,
    /// User: send and receive coin.
    User,
    /// Account manager: grant and remove U on descendants.
    AccountManager,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Manager,
        Role::CentralBanker,
        Role::LawEnforcement,
        Role::User,
        Role::AccountManager,
    ];

    pub fn letter(self) -> char {
        match self {
            Role::Manager => 'M',
            Role::CentralBanker => 'C',
            Role::LawEnforcement => 'L',
            Role::User => 'U',
            Role::AccountManager => 'A',
        }
    }

    pub fn from_letter(c: char) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.letter() == c.to_ascii_uppercase())
    }

    /// Flag within the 5-bit group; M is the most significant.
    fn flag(self) -> u8 {
        match self {
            Role::Manager => 0b10000,
            Role::CentralBanker => 0b01000,
            Role::LawEnforcement => 0b00100,
            Role::User => 0b00010,
            Role::AccountManager => 0b00001,
        }
    }

    /// Policy type that switches this role on or off globally.
    pub fn enable_policy_type(self) -> u32 {
        match self {
            Role::Manager => 0,
            Role::CentralBanker => 1,
            Role::LawEnforcement => 2,
            Role::User => 3,
            Role::AccountManager => 4,
        }
    }
}

/// A subset of `MCLUA`, stored as the 5-bit flag group used on the wire.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoleSet(u8);

impl RoleSet {
    pub const EMPTY: RoleSet = RoleSet(0);
    pub const ALL: RoleSet = RoleSet(0b11111);

    pub fn from_bits(bits: u8) -> Option<RoleSet> {
        (bits <= 0b11111).then_some(RoleSet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn only(role: Role) -> RoleSet {
        RoleSet(role.flag())
    }

    pub fn contains(self, role: Role) -> bool {
        self.0 & role.flag() != 0
    }

    pub fn with(self, role: Role) -> RoleSet {
        RoleSet(self.0 | role.flag())
    }

    pub fn without(self, role: Role) -> RoleSet {
        RoleSet(self.0 & !role.flag())
    }

    pub fn union(self, other: RoleSet) -> RoleSet {
        RoleSet(self.0 | other.0)
    }

    pub fn intersection(self, other: RoleSet) -> RoleSet {
        RoleSet(self.0 & other.0)
    }

    pub fn difference(self, other: RoleSet) -> RoleSet {
        RoleSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: RoleSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Role> {
        Role::ALL.into_iter().filter(move |r| self.contains(*r))
    }

    /// All 32 subsets, in flag order.
    pub fn all_subsets() -> impl Iterator<Item = RoleSet> {
        (0u8..32).map(RoleSet)
    }
}

impl FromIterator<Role> for RoleSet {
    fn from_iter<I: IntoIterator<Item = Role>>(iter: I) -> Self {
        iter.into_iter().fold(RoleSet::EMPTY, RoleSet::with)
    }
}

impl fmt::Display for RoleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.iter().try_for_each(|r| write!(f, "{}", r.letter()))
    }
}

impl fmt::Debug for RoleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RoleSet({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid role letters {0:?}")]
pub struct BadRoleLetters(pub String);

impl FromStr for RoleSet {
    type Err = BadRoleLetters;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| Role::from_letter(c).ok_or_else(|| BadRoleLetters(s.to_string())))
            .collect()
    }
}

impl Serialize for RoleSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RoleSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub const MAX_AMOUNT: u64 = (1 << 63) - 1;
pub const MAX_POLICY_TYPE: u32 = (1 << 27) - 1;

const MODE_ROLE: u64 = 0b10 << 62;
const MODE_POLICY: u64 = 0b11 << 62;
const FLAG_THIRD_BIT: u64 = 1 << 61;
const ROLE_SHIFT: u32 = 56;
const ROLE_RESERVED_MASK: u64 = (1 << ROLE_SHIFT) - 1;
const POLICY_GAP_MASK: u64 = 0b11 << 59;
const POLICY_TYPE_SHIFT: u32 = 32;

/// Decoded meaning of an output's 64-bit value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NValueMode {
    CoinTransfer { amount: u64 },
    RoleChange { add: bool, roles: RoleSet },
    PolicyChange { permanent: bool, ptype: u32, param: u32 },
}

impl NValueMode {
    pub fn encode(&self) -> Result<u64, CodecError> {
        encode_nvalue(self)
    }

    pub fn is_coin(&self) -> bool {
        matches!(self, NValueMode::CoinTransfer { .. })
    }
}

pub fn encode_nvalue(mode: &NValueMode) -> Result<u64, CodecError> {
    match *mode {
        NValueMode::CoinTransfer { amount } => {
            if amount > MAX_AMOUNT {
                return Err(CodecError::AmountOverflow);
            }
            Ok(amount)
        }
        NValueMode::RoleChange { add, roles } => {
            if roles.is_empty() {
                return Err(CodecError::EmptyRoleSet);
            }
            let add_bit = if add { FLAG_THIRD_BIT } else { 0 };
            Ok(MODE_ROLE | add_bit | (u64::from(roles.bits()) << ROLE_SHIFT))
        }
        NValueMode::PolicyChange { permanent, ptype, param } => {
            if ptype > MAX_POLICY_TYPE {
                return Err(CodecError::TypeOverflow);
            }
            let perm_bit = if permanent { FLAG_THIRD_BIT } else { 0 };
            Ok(MODE_POLICY | perm_bit | (u64::from(ptype) << POLICY_TYPE_SHIFT) | u64::from(param))
        }
    }
}

pub fn decode_nvalue(value: u64) -> Result<NValueMode, CodecError> {
    if value >> 63 == 0 {
        return Ok(NValueMode::CoinTransfer { amount: value });
    }
    let third = value & FLAG_THIRD_BIT != 0;
    if value & MODE_POLICY == MODE_ROLE {
        if value & ROLE_RESERVED_MASK != 0 {
            return Err(CodecError::NonzeroReservedBits);
        }
        let roles = RoleSet(((value >> ROLE_SHIFT) & 0b11111) as u8);
        if roles.is_empty() {
            return Err(CodecError::EmptyRoleSet);
        }
        Ok(NValueMode::RoleChange { add: third, roles })
    } else {
        if value & POLICY_GAP_MASK != 0 {
            return Err(CodecError::NonzeroReservedBits);
        }
        Ok(NValueMode::PolicyChange {
            permanent: third,
            ptype: ((value >> POLICY_TYPE_SHIFT) as u32) & MAX_POLICY_TYPE,
            param: value as u32,
        })
    }
}
