//! Byte-exact wire format for transactions and blocks.
//!
//! The layout follows Bitcoin's legacy serialization: little-endian integers,
//! CompactSize list counts, length-prefixed scripts. Output values are
//! reinterpreted as one of three modes (see [`nvalue`]).

mod block;
pub mod nvalue;
mod tx;
pub mod wire;

pub use block::{deserialize_block, merkle_root, serialize_block, Block, BlockHeader, Target, HEADER_LEN};
pub use nvalue::{decode_nvalue, encode_nvalue, NValueMode, Role, RoleSet, MAX_AMOUNT, MAX_POLICY_TYPE};
pub use tx::{
    deserialize_tx, serialize_tx, tx_digest, OutPoint, ScriptSig, Transaction, TxIn, TxOut, TX_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("input ended early")]
    Truncated,
    #[error("unsupported transaction version {0}")]
    BadVersion(u32),
    #[error("length prefix too large")]
    VarIntOverflow,
    #[error("non-minimal length prefix")]
    NonCanonicalVarInt,
    #[error("bytes left over after decoding")]
    TrailingBytes,
    #[error("script is not a supported pay-to-pubkey form")]
    BadScript,
    #[error("coin amount does not fit in 63 bits")]
    AmountOverflow,
    #[error("policy type does not fit in 27 bits")]
    TypeOverflow,
    #[error("role change names no roles")]
    EmptyRoleSet,
    #[error("reserved bits are set")]
    NonzeroReservedBits,
    #[error("empty list")]
    EmptyList,
    #[error("malformed hex")]
    BadHex,
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::Truncated => "Truncated",
            CodecError::BadVersion(_) => "BadVersion",
            CodecError::VarIntOverflow => "VarIntOverflow",
            CodecError::NonCanonicalVarInt => "NonCanonicalVarInt",
            CodecError::TrailingBytes => "TrailingBytes",
            CodecError::BadScript => "BadScript",
            CodecError::AmountOverflow => "AmountOverflow",
            CodecError::TypeOverflow => "TypeOverflow",
            CodecError::EmptyRoleSet => "EmptyRoleSet",
            CodecError::NonzeroReservedBits => "NonzeroReservedBits",
            CodecError::EmptyList => "EmptyList",
            CodecError::BadHex => "BadHex",
        }
    }
}
