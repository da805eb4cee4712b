//! Assembling and signing transactions.

use crate::accounts::AccountTree;
use crate::codec::{CodecError, NValueMode, OutPoint, Role, RoleSet, ScriptSig, Transaction, TxIn, TxOut};
use crate::keys::{KeyPair, PublicKey};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("{account} holds no active grant for role {role:?}")]
    MissingGrant { account: PublicKey, role: Role },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Collects inputs and outputs, then signs every keyed input over the
/// transaction digest.
#[derive(Clone, Debug, Default)]
pub struct TxBuilder {
    inputs: Vec<(OutPoint, Option<KeyPair>)>,
    outputs: Vec<(NValueMode, PublicKey)>,
    lock_time: u32,
}

impl TxBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Spends a coin output with its owner's signature.
    pub fn spend(mut self, outpoint: OutPoint, owner: &KeyPair) -> Self {
        self.inputs.push((outpoint, Some(owner.clone())));
        self
    }

    /// Spends a coin output without a signature, as law enforcement may.
    pub fn spend_unsigned(mut self, outpoint: OutPoint) -> Self {
        self.inputs.push((outpoint, None));
        self
    }

    /// References a role grant, signed by the grantee.
    pub fn prove(self, grant: OutPoint, holder: &KeyPair) -> Self {
        self.spend(grant, holder)
    }

    /// Adds one input per distinct grant backing `roles` for `holder`.
    pub fn prove_roles(mut self, tree: &AccountTree, holder: &KeyPair, roles: RoleSet) -> Result<Self, BuildError> {
        let account = holder.public();
        for role in roles.iter() {
            let grant = tree.active_grant(&account, role).ok_or(BuildError::MissingGrant { account, role })?;
            if !self.inputs.iter().any(|(op, _)| *op == grant) {
                self = self.prove(grant, holder);
            }
        }
        Ok(self)
    }

    pub fn pay(mut self, to: PublicKey, amount: u64) -> Self {
        self.outputs.push((NValueMode::CoinTransfer { amount }, to));
        self
    }

    pub fn role_change(mut self, target: PublicKey, add: bool, roles: RoleSet) -> Self {
        self.outputs.push((NValueMode::RoleChange { add, roles }, target));
        self
    }

    pub fn policy(mut self, issuer: PublicKey, ptype: u32, param: u32, permanent: bool) -> Self {
        self.outputs.push((NValueMode::PolicyChange { permanent, ptype, param }, issuer));
        self
    }

    pub fn lock_time(mut self, lock_time: u32) -> Self {
        self.lock_time = lock_time;
        self
    }

    pub fn build(self) -> Result<Transaction, BuildError> {
        let outputs =
            self.outputs.into_iter().map(|(mode, pk)| TxOut::new(mode, pk)).collect::<Result<Vec<_>, _>>()?;
        let inputs = self.inputs.iter().map(|(op, _)| TxIn::new(*op)).collect();
        let mut tx = Transaction::new(inputs, outputs);
        tx.lock_time = self.lock_time;
        sign_inputs(&mut tx, self.inputs.iter().map(|(_, k)| k.as_ref()));
        Ok(tx)
    }
}

/// Fills the script of every input paired with a key.
pub fn sign_inputs<'a>(tx: &mut Transaction, keys: impl IntoIterator<Item = Option<&'a KeyPair>>) {
    let digest = tx.digest();
    for (input, key) in tx.inputs.iter_mut().zip(keys) {
        if let Some(key) = key {
            input.script_sig = Some(ScriptSig { signature: key.sign(&digest), public_key: key.public() });
        }
    }
}

/// Coinbase paying `amount` to `miner`, proving U through `grant`.
pub fn coinbase(height: u64, miner: &KeyPair, grant: OutPoint, amount: u64) -> Transaction {
    let mut tx = Transaction::new(
        vec![TxIn::new(OutPoint::NULL), TxIn::new(grant)],
        vec![TxOut::new(NValueMode::CoinTransfer { amount }, miner.public()).expect("amount fits")],
    );
    tx.lock_time = height as u32;
    sign_inputs(&mut tx, [None, Some(miner)]);
    tx
}
