//! Protocol library for a managed, role-governed UTXO cryptocurrency.
//!
//! Transactions keep the Bitcoin legacy layout under version 1944 and reuse
//! each output's 64-bit value as a mode tag: coin transfer, role change or
//! policy change. Roles live in an account tree rooted at the account named
//! by the genesis transaction; policies resolve by issuer authority.

pub mod accounts;
pub mod builder;
pub mod chain;
pub mod codec;
pub mod hash;
pub mod keys;
pub mod ledger;
pub mod params;
pub mod policy;
pub mod reward;
pub mod validation;

pub use accounts::{AccountTree, AuthorityKey, Provenance};
pub use builder::TxBuilder;
pub use chain::{Chain, ChainStore, GenesisConfig};
pub use codec::{Block, BlockHeader, NValueMode, OutPoint, Role, RoleSet, Target, Transaction, TxIn, TxOut};
pub use hash::{BlockHash, Hash256, Txid};
pub use keys::{KeyPair, PublicKey, SignatureCache, SignatureScheme};
pub use ledger::LedgerState;
pub use params::{ChainParams, RuleSet};
pub use policy::{EffectivePolicy, PolicyDefaults, PolicyState};
pub use validation::{TxClassification, ValidationError};
