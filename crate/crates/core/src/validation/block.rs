use serde::Serialize;

use super::{
    advance_quota, validate_coinbase, validate_tx, BlockAccumulators, TxClassification, ValidationContext,
    ValidationError,
};
use crate::codec::{Block, OutPoint};
use crate::hash::{BlockHash, Txid};
use crate::keys::SignatureCache;
use crate::ledger::{LedgerState, Utxo};
use crate::params::{ChainParams, RuleSet};
use crate::reward::block_reward;

/// What a connected block did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockSummary {
    pub hash: BlockHash,
    pub height: u64,
    pub reward: u64,
    pub coinbase: u64,
    pub fees: u128,
    pub created: u128,
    pub management: u32,
    pub policy_management: u32,
    pub transactions: Vec<(Txid, TxClassification)>,
}

/// Validates `block` on top of `parent` and returns the child state.
pub fn connect_block(
    parent: &LedgerState,
    block: &Block,
    params: &ChainParams,
    ruleset: RuleSet,
    sigs: Option<&SignatureCache>,
) -> Result<(LedgerState, BlockSummary), ValidationError> {
    let header = &block.header;
    if header.prev_block_hash != parent.tip {
        return Err(ValidationError::UnknownParent);
    }
    if header.target != params.target || !header.meets_target() {
        return Err(ValidationError::BadPoW);
    }
    let Some((coinbase, rest)) = block.transactions.split_first() else {
        return Err(ValidationError::BadCoinbaseShape);
    };
    if block.compute_merkle_root()? != header.merkle_root {
        return Err(ValidationError::BadMerkleRoot);
    }

    let height = parent.height + 1;
    let rules = parent.policy.snapshot();
    let ctx = ValidationContext { params, rules, height, sigs };
    let mut state = parent.clone();
    let mut acc = BlockAccumulators::default();
    let mut transactions = Vec::with_capacity(block.transactions.len());
    let coinbase_id = coinbase.txid();
    transactions.push((
        coinbase_id,
        TxClassification { has_coin_transfer: true, is_coinbase: true, ..Default::default() },
    ));
    for (i, tx) in rest.iter().enumerate() {
        let outcome = validate_tx(tx, i as u32 + 1, &state, &ctx, &acc)?;
        acc.absorb(&outcome);
        transactions.push((outcome.txid, outcome.classification));
        outcome.apply(&mut state);
    }

    let reward = block_reward(&rules, params, height);
    let (payee, amount) = validate_coinbase(coinbase, parent, &ctx, acc.fees, reward)?;
    if state.contains_tx(&coinbase_id) {
        return Err(ValidationError::DuplicateTransaction);
    }
    state.add_utxo(OutPoint::new(coinbase_id, 0), Utxo { owner: payee, amount, height });
    state.record_tx(coinbase_id);
    advance_quota(&mut state.quota, &rules, height, &acc, ruleset.enforce_management_quota)?;

    state.supply.rewards += u128::from(reward);
    state.supply.coinbase += u128::from(amount);
    state.height = height;
    state.tip = block.hash();
    let summary = BlockSummary {
        hash: state.tip,
        height,
        reward,
        coinbase: amount,
        fees: acc.fees,
        created: acc.created,
        management: acc.management,
        policy_management: acc.policy_management,
        transactions,
    };
    Ok((state, summary))
}
