#![allow(dead_code)]

use mcoin_core::builder::TxBuilder;
use mcoin_core::chain::{Chain, GenesisConfig};
use mcoin_core::codec::{Block, OutPoint, Role, RoleSet, Transaction};
use mcoin_core::keys::{KeyPair, PublicKey};
use mcoin_core::ledger::LedgerState;
use mcoin_core::validation::ValidationError;

pub fn key(seed: u64) -> KeyPair {
    KeyPair::from_seed(seed)
}

pub fn roles(s: &str) -> RoleSet {
    s.parse().unwrap()
}

/// A chain whose root also mines every block.
pub struct Net {
    pub chain: Chain,
    pub root: KeyPair,
    pub time: u32,
}

impl Net {
    pub fn new() -> Net {
        Self::with_config(|_| {})
    }

    pub fn with_config(edit: impl FnOnce(&mut GenesisConfig)) -> Net {
        let root = key(0);
        let mut cfg = GenesisConfig::trivial(root.public());
        edit(&mut cfg);
        Net { chain: Chain::from_genesis(&cfg).unwrap(), root, time: 0 }
    }

    pub fn state(&self) -> &LedgerState {
        self.chain.tip_state()
    }

    pub fn try_mine(&mut self, txs: Vec<Transaction>) -> Result<Block, ValidationError> {
        self.time += 1;
        let block = self.chain.mine_block(&txs, &self.root, self.time)?;
        self.chain.apply_block(&block)?;
        Ok(block)
    }

    pub fn mine(&mut self, txs: Vec<Transaction>) -> Block {
        self.try_mine(txs).unwrap()
    }

    /// Proves `needed` for `holder` from the tip state.
    pub fn prove(&self, b: TxBuilder, holder: &KeyPair, needed: &str) -> TxBuilder {
        b.prove_roles(&self.state().accounts, holder, roles(needed)).unwrap()
    }

    pub fn grant_tx(&self, by: &KeyPair, with: &str, to: &PublicKey, add: bool, changed: &str) -> Transaction {
        // Lock time keeps repeated identical changes from sharing a txid.
        let b = self.prove(TxBuilder::new(), by, with).lock_time(self.chain.height() as u32 + 1);
        b.role_change(*to, add, roles(changed)).build().unwrap()
    }

    pub fn coins(&self, owner: &PublicKey) -> Vec<(OutPoint, u64)> {
        self.state().utxos_of(owner).map(|(op, u)| (*op, u.amount)).collect()
    }

    pub fn grant_of(&self, owner: &PublicKey, role: Role) -> OutPoint {
        self.state().accounts.active_grant(owner, role).unwrap()
    }

    /// Pays `amount` from `from`'s first coin, returning change, both sides proving U.
    pub fn pay_tx(&self, from: &KeyPair, to: &KeyPair, amount: u64, fee: u64) -> Transaction {
        let (op, value) = self.coins(&from.public())[0];
        let mut b = TxBuilder::new().spend(op, from);
        b = self.prove(b, from, "U");
        if to.public() != from.public() {
            b = self.prove(b, to, "U");
        }
        b = b.pay(to.public(), amount);
        if value > amount + fee {
            b = b.pay(from.public(), value - amount - fee);
        }
        b.build().unwrap()
    }
}
