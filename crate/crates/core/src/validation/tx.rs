use std::collections::{BTreeMap, BTreeSet};

use super::{BlockAccumulators, TxClassification, ValidationContext, ValidationError};
use crate::accounts::{AccountError, AccountTree, CoverMode, Provenance, RoleChange};
use crate::codec::{NValueMode, OutPoint, Role, RoleSet, Transaction, TX_VERSION};
use crate::hash::Txid;
use crate::keys::PublicKey;
use crate::ledger::{LedgerState, Utxo};
use crate::policy::{EffectivePolicy, PolicyRecord, PolicyState};

/// Effects of an accepted transaction, ready to apply.
#[derive(Clone, Debug)]
pub struct TxOutcome {
    pub txid: Txid,
    pub classification: TxClassification,
    pub fee: u128,
    pub created: u128,
    spent: Vec<OutPoint>,
    coins: Vec<(OutPoint, Utxo)>,
    accounts: AccountTree,
    policy: PolicyState,
}

impl TxOutcome {
    pub fn apply(self, state: &mut LedgerState) {
        for outpoint in &self.spent {
            state.spend(outpoint);
        }
        for (outpoint, utxo) in self.coins {
            state.add_utxo(outpoint, utxo);
        }
        state.accounts = self.accounts;
        state.policy = self.policy;
        state.supply.created += self.created;
        state.supply.fees += self.fee;
        state.record_tx(self.txid);
    }
}

struct CoinVin {
    outpoint: OutPoint,
    utxo: Utxo,
}

/// Roles proven by the role inputs, aggregated per account in input order.
struct Proofs {
    order: Vec<PublicKey>,
    roles: BTreeMap<PublicKey, RoleSet>,
}

impl Proofs {
    fn of(&self, account: &PublicKey) -> RoleSet {
        self.roles.get(account).copied().unwrap_or(RoleSet::EMPTY)
    }

    fn any(&self, role: Role) -> bool {
        self.roles.values().any(|r| r.contains(role))
    }

    fn coverers(&self) -> impl Iterator<Item = (PublicKey, RoleSet)> + '_ {
        self.order.iter().map(|a| (*a, self.roles[a]))
    }
}

/// Validates a non-coinbase transaction at position `tx_index` of a block.
///
/// `state` reflects every earlier transaction of the block; `acc` carries the
/// block's running coin-creation total.
pub fn validate_tx(
    tx: &Transaction,
    tx_index: u32,
    state: &LedgerState,
    ctx: &ValidationContext<'_>,
    acc: &BlockAccumulators,
) -> Result<TxOutcome, ValidationError> {
    if tx.version != TX_VERSION {
        return Err(crate::codec::CodecError::BadVersion(tx.version).into());
    }
    if tx.inputs.is_empty() || tx.outputs.is_empty() || tx.has_null_input() {
        return Err(ValidationError::BadTxShape);
    }
    let txid = tx.txid();
    if state.contains_tx(&txid) {
        return Err(ValidationError::DuplicateTransaction);
    }
    let digest = tx.digest();
    let tree = &state.accounts;
    let rules = &ctx.rules;

    let mut seen = BTreeSet::new();
    let mut coin_vins = Vec::new();
    let mut proofs = Proofs { order: Vec::new(), roles: BTreeMap::new() };
    for input in &tx.inputs {
        let outpoint = input.prev_out;
        if !seen.insert(outpoint) || state.is_spent(&outpoint) {
            return Err(ValidationError::DoubleSpend);
        }
        if let Some(utxo) = state.utxo(&outpoint) {
            coin_vins.push((CoinVin { outpoint, utxo: *utxo }, input.script_sig.as_ref()));
        } else if let Some(grant) = tree.grant_record(&outpoint) {
            let proven = grant.active.intersection(tree.active_roles(&grant.account));
            if proven.is_empty() {
                return Err(ValidationError::RoleRevoked);
            }
            match &input.script_sig {
                Some(s) if s.public_key == grant.account && ctx.verify(&grant.account, &digest, &s.signature) => {}
                _ => return Err(ValidationError::SignatureInvalid),
            }
            let entry = proofs.roles.entry(grant.account).or_insert_with(|| {
                proofs.order.push(grant.account);
                RoleSet::EMPTY
            });
            *entry = entry.union(proven);
        } else {
            return Err(ValidationError::MissingInput);
        }
    }

    let law_provers: Vec<PublicKey> =
        proofs.coverers().filter(|(_, r)| r.contains(Role::LawEnforcement)).map(|(a, _)| a).collect();
    let mut senders = Vec::new();
    let mut forced = Vec::new();
    for (vin, sig) in &coin_vins {
        match sig {
            Some(s) => {
                if s.public_key != vin.utxo.owner || !ctx.verify(&vin.utxo.owner, &digest, &s.signature) {
                    return Err(ValidationError::SignatureInvalid);
                }
                senders.push(vin.utxo.owner);
            }
            None if !law_provers.is_empty() => forced.push(vin.utxo.owner),
            None => return Err(ValidationError::SignatureInvalid),
        }
    }

    let modes = tx.outputs.iter().map(|o| o.mode()).collect::<Result<Vec<_>, _>>()?;
    let receivers: Vec<PublicKey> =
        tx.outputs.iter().zip(&modes).filter(|(_, m)| m.is_coin()).map(|(o, _)| o.pubkey).collect();

    if !forced.is_empty() {
        if !rules.role_enabled(Role::LawEnforcement) || !rules.law_moves_coin() {
            return Err(ValidationError::RoleDisabledByPolicy);
        }
        let actor_depth = law_provers.iter().filter_map(|a| tree.depth(a).ok()).min().unwrap_or(0);
        for owner in &forced {
            match tree.depth(owner) {
                Ok(d) if d > actor_depth => {}
                _ => return Err(ValidationError::LDepthViolation),
            }
        }
    }

    if !coin_vins.is_empty() || !receivers.is_empty() {
        if forced.is_empty() && !rules.role_enabled(Role::User) {
            return Err(ValidationError::RoleDisabledByPolicy);
        }
        if senders.iter().chain(&receivers).any(|a| tree.is_frozen(a)) {
            return Err(ValidationError::FrozenAccount);
        }
        if senders.iter().any(|s| !proofs.of(s).contains(Role::User)) {
            return Err(ValidationError::MissingURole);
        }
        let receiver_ok = |r: &PublicKey| {
            if ctx.params.require_receiver_role_proof {
                proofs.of(r).contains(Role::User)
            } else {
                tree.active_roles(r).contains(Role::User)
            }
        };
        if !receivers.iter().all(receiver_ok) {
            return Err(ValidationError::MissingURole);
        }
    }

    let sum_in: u128 = coin_vins.iter().map(|(v, _)| u128::from(v.utxo.amount)).sum();
    let sum_out: u128 = modes
        .iter()
        .map(|m| match m {
            NValueMode::CoinTransfer { amount } => u128::from(*amount),
            _ => 0,
        })
        .sum();
    let (fee, created) = if sum_out > sum_in {
        if !proofs.any(Role::CentralBanker) {
            return Err(ValidationError::CoinCreationWithoutC);
        }
        if !rules.role_enabled(Role::CentralBanker) {
            return Err(ValidationError::RoleDisabledByPolicy);
        }
        let created = sum_out - sum_in;
        let limit = u128::from(rules.coin_creation_limit());
        if limit > 0 && acc.created + created > limit {
            return Err(ValidationError::CoinCreationLimitExceeded);
        }
        (0, created)
    } else {
        let fee = sum_in - sum_out;
        if !coin_vins.is_empty() && fee < u128::from(rules.min_fee()) {
            return Err(ValidationError::FeeBelowMinimum);
        }
        (fee, 0)
    };

    let mut accounts = tree.clone();
    let mut policy = state.policy.clone();
    let mut coins = Vec::new();
    for (i, (out, mode)) in tx.outputs.iter().zip(&modes).enumerate() {
        let outpoint = OutPoint::new(txid, i as u32);
        let provenance = Provenance::new(ctx.height, tx_index, i as u32);
        match *mode {
            NValueMode::CoinTransfer { amount } => {
                coins.push((outpoint, Utxo { owner: out.pubkey, amount, height: ctx.height }));
            }
            NValueMode::RoleChange { add, roles } => {
                let (coverer, mode) = authorize_role_change(tree, rules, &proofs, &out.pubkey, add, roles)?;
                let change = RoleChange { coverer, mode, target: out.pubkey, add, roles, outpoint, provenance };
                accounts.apply_role_change(&change).map_err(|e| match e {
                    AccountError::UnknownTarget(_) => ValidationError::UnknownTarget,
                    AccountError::FrozenTarget(_) => ValidationError::FrozenTarget,
                    AccountError::UnknownAccount(_) | AccountError::WouldCycle(_) => ValidationError::NotCovered,
                })?;
            }
            NValueMode::PolicyChange { permanent, ptype, param } => {
                let issuer = out.pubkey;
                if !proofs.of(&issuer).contains(Role::Manager) {
                    return Err(ValidationError::RoleNotHeld);
                }
                if !rules.role_enabled(Role::Manager) {
                    return Err(ValidationError::RoleDisabledByPolicy);
                }
                let authority =
                    tree.node(&issuer).and_then(|n| n.authority).ok_or(ValidationError::RoleNotHeld)?;
                policy.apply(PolicyRecord { ptype, param, permanent, issuer, authority, position: provenance })?;
            }
        }
    }

    let classification = TxClassification {
        has_coin_transfer: !receivers.is_empty(),
        has_role_change: modes.iter().any(|m| matches!(m, NValueMode::RoleChange { .. })),
        has_policy_change: modes.iter().any(|m| matches!(m, NValueMode::PolicyChange { .. })),
        is_management: proofs.any(Role::Manager),
        is_coinbase: false,
    };
    Ok(TxOutcome {
        txid,
        classification,
        fee,
        created,
        spent: coin_vins.iter().map(|(v, _)| v.outpoint).collect(),
        coins,
        accounts,
        policy,
    })
}

/// Order in which a coverer's proven roles are tried. L comes first so that
/// an account holding both L and M freezes when it removes U.
const MODE_ORDER: [CoverMode; 3] = [CoverMode::LawEnforcement, CoverMode::Manager, CoverMode::AccountManager];

/// Picks the first (coverer, mode) pair, in input order and then
/// [`MODE_ORDER`], that authorizes the change. Fails with the first refusal.
fn authorize_role_change(
    tree: &AccountTree,
    rules: &EffectivePolicy,
    proofs: &Proofs,
    target: &PublicKey,
    add: bool,
    roles: RoleSet,
) -> Result<(PublicKey, CoverMode), ValidationError> {
    let mut first_refusal = None;
    for (coverer, proven) in proofs.coverers() {
        for mode in MODE_ORDER {
            if !proven.contains(mode.role()) {
                continue;
            }
            match check_cover(tree, rules, &coverer, mode, target, add, roles) {
                Ok(()) => return Ok((coverer, mode)),
                Err(e) => {
                    first_refusal.get_or_insert(e);
                }
            }
        }
    }
    Err(first_refusal.unwrap_or(ValidationError::RoleNotHeld))
}

fn check_cover(
    tree: &AccountTree,
    rules: &EffectivePolicy,
    coverer: &PublicKey,
    mode: CoverMode,
    target: &PublicKey,
    add: bool,
    roles: RoleSet,
) -> Result<(), ValidationError> {
    if !rules.role_enabled(mode.role()) {
        return Err(ValidationError::RoleDisabledByPolicy);
    }
    let exists = tree.contains(target);
    if !add && !exists {
        return Err(ValidationError::UnknownTarget);
    }
    let user_only = roles == RoleSet::only(Role::User);
    match mode {
        CoverMode::Manager => {
            if !roles.is_subset(tree.active_roles(coverer)) {
                return Err(ValidationError::RoleNotHeld);
            }
            if !tree.covers(coverer, target).unwrap_or(false) {
                return Err(ValidationError::NotCovered);
            }
            if add && roles.contains(Role::User) && tree.is_frozen(target) {
                return Err(ValidationError::FrozenTarget);
            }
            Ok(())
        }
        CoverMode::AccountManager => {
            if !user_only {
                return Err(ValidationError::RoleNotHeld);
            }
            if !exists {
                return Ok(());
            }
            if add && tree.is_frozen(target) {
                return Err(ValidationError::FrozenTarget);
            }
            if tree.is_strict_descendant(target, coverer) {
                return Ok(());
            }
            // An account stripped of every role may be adopted by another A node.
            let released = tree.active_roles(target).is_empty() && !tree.path_to_root(coverer).any(|a| a == *target);
            if add && released {
                return Ok(());
            }
            Err(ValidationError::NotCovered)
        }
        CoverMode::LawEnforcement => {
            if !user_only {
                return Err(ValidationError::RoleNotHeld);
            }
            if !exists {
                return Err(ValidationError::UnknownTarget);
            }
            let (Ok(t), Ok(c)) = (tree.depth(target), tree.depth(coverer)) else {
                return Err(ValidationError::NotCovered);
            };
            if t <= c {
                return Err(ValidationError::LDepthViolation);
            }
            Ok(())
        }
    }
}
