//! Post-block ledger state: unspent coins, the account tree, policy, the
//! management-quota window and supply counters.
//!
//! All collections are persistent maps, so cloning a state to validate a
//! competing block is cheap and every block can keep its own snapshot.

use im::{OrdMap, OrdSet};
use serde::Serialize;

use crate::accounts::AccountTree;
use crate::codec::OutPoint;
use crate::hash::{BlockHash, Txid};
use crate::keys::PublicKey;
use crate::policy::PolicyState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Utxo {
    pub owner: PublicKey,
    pub amount: u64,
    pub height: u64,
}

/// Progress through the current management-quota window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QuotaWindow {
    /// Period the window was opened under; 0 when the quota is off.
    pub period: u32,
    /// First height counted in the window.
    pub anchor: u64,
    pub management: u32,
    pub policy_management: u32,
}

/// Coin issuance counters along the chain leading to this state.
///
/// The UTXO total always equals `coinbase + created - fees`; when every miner
/// claims its full allowance that is `rewards + created`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Supply {
    /// Block rewards in force at each height.
    pub rewards: u128,
    /// Sum of coinbase outputs.
    pub coinbase: u128,
    /// Coin created under central-banker authority.
    pub created: u128,
    pub fees: u128,
}

impl Supply {
    /// Value the UTXO set must hold.
    pub fn expected_utxo_total(&self) -> u128 {
        self.coinbase + self.created - self.fees
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerState {
    pub height: u64,
    pub tip: BlockHash,
    pub accounts: AccountTree,
    pub policy: PolicyState,
    pub quota: QuotaWindow,
    pub supply: Supply,
    utxos: OrdMap<OutPoint, Utxo>,
    spent: OrdSet<OutPoint>,
    txids: OrdSet<Txid>,
}

impl LedgerState {
    pub fn new(tip: BlockHash, accounts: AccountTree, policy: PolicyState) -> Self {
        LedgerState {
            height: 0,
            tip,
            accounts,
            policy,
            quota: QuotaWindow::default(),
            supply: Supply::default(),
            utxos: OrdMap::new(),
            spent: OrdSet::new(),
            txids: OrdSet::new(),
        }
    }

    pub fn utxo(&self, outpoint: &OutPoint) -> Option<&Utxo> {
        self.utxos.get(outpoint)
    }

    pub fn utxos(&self) -> impl Iterator<Item = (&OutPoint, &Utxo)> {
        self.utxos.iter()
    }

    pub fn utxos_of<'a>(&'a self, owner: &'a PublicKey) -> impl Iterator<Item = (&'a OutPoint, &'a Utxo)> + 'a {
        self.utxos.iter().filter(move |(_, u)| u.owner == *owner)
    }

    pub fn balance(&self, owner: &PublicKey) -> u128 {
        self.utxos_of(owner).map(|(_, u)| u128::from(u.amount)).sum()
    }

    pub fn utxo_total(&self) -> u128 {
        self.utxos.values().map(|u| u128::from(u.amount)).sum()
    }

    pub fn is_spent(&self, outpoint: &OutPoint) -> bool {
        self.spent.contains(outpoint)
    }

    pub fn contains_tx(&self, txid: &Txid) -> bool {
        self.txids.contains(txid)
    }

    pub fn txids(&self) -> impl Iterator<Item = &Txid> {
        self.txids.iter()
    }

    pub(crate) fn record_tx(&mut self, txid: Txid) {
        self.txids.insert(txid);
    }

    pub(crate) fn spend(&mut self, outpoint: &OutPoint) -> Option<Utxo> {
        let utxo = self.utxos.remove(outpoint)?;
        self.spent.insert(*outpoint);
        Some(utxo)
    }

    pub(crate) fn add_utxo(&mut self, outpoint: OutPoint, utxo: Utxo) {
        self.utxos.insert(outpoint, utxo);
    }
}
