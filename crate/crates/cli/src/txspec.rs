//! Declarative transaction descriptions and their compilation against a
//! chain's tip state.
//!
//! Names used in a spec resolve first to `keys` (key files, which can sign),
//! then to `accounts` (public keys only), then as literal public-key hex.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mcoin_core::{Chain, KeyPair, LedgerState, OutPoint, PublicKey, Role, RoleSet, Transaction, TxBuilder};
use serde::Deserialize;

use crate::error::CliError;
use crate::keyfile::KeyFile;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxSpec {
    /// Name to key-file path, relative to the spec file.
    pub keys: BTreeMap<String, PathBuf>,
    /// Name to public key, for parties that do not sign.
    pub accounts: BTreeMap<String, PublicKey>,
    pub sends: Vec<Send>,
    pub creations: Vec<Creation>,
    pub role_changes: Vec<RoleChangeSpec>,
    pub policy_changes: Vec<PolicyChangeSpec>,
    /// Explicit inputs, spent before any selected coins.
    pub inputs: Vec<InputSpec>,
    /// Outputs not funded by coin selection; pair with `inputs`.
    pub payments: Vec<Payment>,
    /// Taken from the first sender.
    pub fee: u64,
    pub lock_time: u32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Send {
    pub from: String,
    pub to: String,
    pub amount: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Creation {
    pub creator: String,
    pub to: String,
    pub amount: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleChangeSpec {
    pub coverer: String,
    pub target: String,
    pub add: bool,
    pub roles: RoleSet,
    /// Coverer roles to prove; defaults to whichever of M, A and L it holds.
    #[serde(default)]
    pub via: Option<RoleSet>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyChangeSpec {
    pub issuer: String,
    pub ptype: u32,
    pub param: u32,
    #[serde(default)]
    pub permanent: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub txid: mcoin_core::Txid,
    pub vout: u32,
    /// Omitted for coins moved under law-enforcement authority.
    #[serde(default)]
    pub signer: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payment {
    pub to: String,
    pub amount: u64,
}

impl TxSpec {
    pub fn load(path: &Path) -> Result<(TxSpec, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let spec = serde_json::from_str(&text).map_err(|e| CliError::BadInput(format!("tx spec: {e}")))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((spec, base))
    }

    /// Compiles to one signed transaction. Role proofs are attached only where
    /// a grant exists; a missing role is left for validation to report.
    pub fn compile(&self, base: &Path, chain: &Chain) -> Result<Transaction, CliError> {
        let names = Names::load(self, base)?;
        let state = chain.tip_state();
        let receiver_proofs = chain.params().require_receiver_role_proof;
        let mut b = TxBuilder::new().lock_time(self.lock_time);
        let mut used: Vec<OutPoint> = Vec::new();

        for input in &self.inputs {
            let op = OutPoint::new(input.txid, input.vout);
            used.push(op);
            b = match &input.signer {
                Some(name) => b.spend(op, names.signer(name)?),
                None => b.spend_unsigned(op),
            };
        }

        // Per sender, in order of first appearance: amount owed.
        let mut owed: Vec<(String, u128)> = Vec::new();
        for (i, s) in self.sends.iter().enumerate() {
            let extra = if i == 0 { u128::from(self.fee) } else { 0 };
            match owed.iter_mut().find(|(n, _)| *n == s.from) {
                Some((_, total)) => *total += u128::from(s.amount) + extra,
                None => owed.push((s.from.clone(), u128::from(s.amount) + extra)),
            }
        }
        let mut change = Vec::new();
        for (name, total) in &owed {
            let key = names.signer(name)?;
            let (coins, sum) = select_coins(state, &key.public(), *total, &used)
                .ok_or_else(|| CliError::Unresolvable(format!("coins: {name} holds less than {total}")))?;
            for op in coins {
                used.push(op);
                b = b.spend(op, key);
            }
            if sum > *total {
                change.push((key.public(), u64::try_from(sum - total).expect("bounded by a coin sum")));
            }
        }

        let mut provers: Vec<(&KeyPair, RoleSet)> = Vec::new();
        for (name, _) in &owed {
            need(&mut provers, names.signer(name)?, RoleSet::only(Role::User));
        }
        for c in &self.creations {
            need(&mut provers, names.signer(&c.creator)?, RoleSet::only(Role::CentralBanker));
        }
        for r in &self.role_changes {
            let key = names.signer(&r.coverer)?;
            let via = r.via.unwrap_or_else(|| {
                let management: RoleSet = [Role::Manager, Role::AccountManager, Role::LawEnforcement].into_iter().collect();
                state.accounts.active_roles(&key.public()).intersection(management)
            });
            need(&mut provers, key, via);
        }
        for p in &self.policy_changes {
            need(&mut provers, names.signer(&p.issuer)?, RoleSet::only(Role::Manager));
        }
        if receiver_proofs {
            let receivers = self
                .sends
                .iter()
                .map(|s| &s.to)
                .chain(self.creations.iter().map(|c| &c.to))
                .chain(self.payments.iter().map(|p| &p.to));
            for name in receivers {
                let pk = names.public(name)?;
                if let Some((_, r)) = provers.iter_mut().find(|(k, _)| k.public() == pk) {
                    *r = r.with(Role::User);
                    continue;
                }
                let key = names
                    .keys
                    .values()
                    .find(|k| k.public() == pk)
                    .ok_or_else(|| CliError::SigningKeyMissing(format!("{name} (receiver role proof)")))?;
                provers.push((key, RoleSet::only(Role::User)));
            }
        }
        for (key, roles) in provers {
            for role in roles.iter() {
                if state.accounts.active_grant(&key.public(), role).is_some() {
                    b = b.prove_roles(&state.accounts, key, RoleSet::only(role)).expect("grant checked");
                }
            }
        }

        for c in &self.creations {
            b = b.pay(names.public(&c.to)?, c.amount);
        }
        for s in &self.sends {
            b = b.pay(names.public(&s.to)?, s.amount);
        }
        for (pk, amount) in change {
            b = b.pay(pk, amount);
        }
        for p in &self.payments {
            b = b.pay(names.public(&p.to)?, p.amount);
        }
        for r in &self.role_changes {
            b = b.role_change(names.public(&r.target)?, r.add, r.roles);
        }
        for p in &self.policy_changes {
            b = b.policy(names.public(&p.issuer)?, p.ptype, p.param, p.permanent);
        }
        b.build().map_err(|e| match e {
            mcoin_core::builder::BuildError::Codec(c) => CliError::Codec(c),
            other => CliError::Unresolvable(other.to_string()),
        })
    }
}

fn need<'k>(provers: &mut Vec<(&'k KeyPair, RoleSet)>, key: &'k KeyPair, roles: RoleSet) {
    match provers.iter_mut().find(|(k, _)| k.public() == key.public()) {
        Some((_, r)) => *r = r.union(roles),
        None => provers.push((key, roles)),
    }
}

/// Smallest-first selection over the owner's unspent coins.
fn select_coins(state: &LedgerState, owner: &PublicKey, total: u128, used: &[OutPoint]) -> Option<(Vec<OutPoint>, u128)> {
    let mut coins: Vec<_> = state.utxos_of(owner).filter(|(op, _)| !used.contains(op)).collect();
    coins.sort_by_key(|(op, u)| (u.amount, **op));
    let mut picked = Vec::new();
    let mut sum = 0u128;
    for (op, u) in coins {
        if sum >= total && !picked.is_empty() {
            break;
        }
        picked.push(*op);
        sum += u128::from(u.amount);
    }
    (sum >= total && (total > 0 || !picked.is_empty())).then_some((picked, sum))
}

struct Names<'a> {
    keys: BTreeMap<&'a str, KeyPair>,
    accounts: &'a BTreeMap<String, PublicKey>,
}

impl<'a> Names<'a> {
    fn load(spec: &'a TxSpec, base: &Path) -> Result<Self, CliError> {
        let mut keys = BTreeMap::new();
        for (name, path) in &spec.keys {
            keys.insert(name.as_str(), KeyFile::load(&base.join(path))?);
        }
        Ok(Names { keys, accounts: &spec.accounts })
    }

    fn signer(&self, name: &str) -> Result<&KeyPair, CliError> {
        if let Some(k) = self.keys.get(name) {
            return Ok(k);
        }
        self.public(name)?;
        Err(CliError::SigningKeyMissing(name.to_string()))
    }

    fn public(&self, name: &str) -> Result<PublicKey, CliError> {
        if let Some(k) = self.keys.get(name) {
            return Ok(k.public());
        }
        if let Some(pk) = self.accounts.get(name) {
            return Ok(*pk);
        }
        name.parse().map_err(|_| CliError::Unresolvable(format!("name {name:?}")))
    }
}
