use super::{ValidationContext, ValidationError};
use crate::codec::{NValueMode, Role, Transaction, TX_VERSION};
use crate::keys::PublicKey;
use crate::ledger::LedgerState;

/// Checks the first transaction of a block against the parent state.
///
/// Shape: a null input without script, a second input proving U for the
/// payee, one coin output, and a lock time equal to the block height so
/// coinbase ids never repeat. Returns the payee and amount.
pub fn validate_coinbase(
    tx: &Transaction,
    parent: &LedgerState,
    ctx: &ValidationContext<'_>,
    fees_total: u128,
    reward: u64,
) -> Result<(PublicKey, u64), ValidationError> {
    let shape_ok = tx.version == TX_VERSION
        && tx.inputs.len() == 2
        && tx.outputs.len() == 1
        && tx.inputs[0].prev_out.is_null()
        && tx.inputs[0].script_sig.is_none()
        && !tx.inputs[1].prev_out.is_null()
        && u64::from(tx.lock_time) == ctx.height;
    if !shape_ok {
        return Err(ValidationError::BadCoinbaseShape);
    }
    let payee = tx.outputs[0].pubkey;
    let NValueMode::CoinTransfer { amount } = tx.outputs[0].mode()? else {
        return Err(ValidationError::BadCoinbaseShape);
    };
    if parent.contains_tx(&tx.txid()) {
        return Err(ValidationError::DuplicateTransaction);
    }

    let tree = &parent.accounts;
    let proves_user = tree.grant_record(&tx.inputs[1].prev_out).is_some_and(|g| {
        g.account == payee && g.active.intersection(tree.active_roles(&payee)).contains(Role::User)
    });
    // The U switch is not consulted: a chain that cannot mine could never re-enable it.
    if !proves_user {
        return Err(ValidationError::MissingMinerURole);
    }
    match &tx.inputs[1].script_sig {
        Some(s) if s.public_key == payee && ctx.verify(&payee, &tx.digest(), &s.signature) => {}
        _ => return Err(ValidationError::SignatureInvalid),
    }

    if u128::from(amount) > u128::from(reward) + fees_total {
        return Err(ValidationError::ExcessReward);
    }
    Ok((payee, amount))
}
