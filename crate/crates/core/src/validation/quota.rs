use super::{BlockAccumulators, TxClassification, ValidationError};
use crate::ledger::QuotaWindow;
use crate::policy::EffectivePolicy;

/// Folds one block's management counts into the quota window.
///
/// Windows are anchored at the height where the governing period took
/// effect and restart whenever it changes. The block completing a window must
/// leave at least `k` management transactions in it, one of them a policy
/// change; `enforce = false` tracks windows without failing.
pub fn advance_quota(
    window: &mut QuotaWindow,
    rules: &EffectivePolicy,
    height: u64,
    acc: &BlockAccumulators,
    enforce: bool,
) -> Result<(), ValidationError> {
    let period = rules.management_period();
    if window.period != period {
        *window = QuotaWindow { period, anchor: height, management: 0, policy_management: 0 };
    }
    if period == 0 {
        return Ok(());
    }
    window.management = window.management.saturating_add(acc.management);
    window.policy_management = window.policy_management.saturating_add(acc.policy_management);
    if height + 1 - window.anchor == u64::from(period) {
        let satisfied = window.management >= rules.management_minimum() && window.policy_management >= 1;
        if enforce && !satisfied {
            return Err(ValidationError::QuotaViolation);
        }
        *window = QuotaWindow { period, anchor: height + 1, management: 0, policy_management: 0 };
    }
    Ok(())
}

/// Checks consecutive windows of `n` blocks, given each block's transaction
/// classifications. A trailing partial window is not judged.
pub fn check_management_quota(blocks: &[Vec<TxClassification>], n: u32, k: u32) -> Result<(), ValidationError> {
    if n == 0 {
        return Ok(());
    }
    for window in blocks.chunks_exact(n as usize) {
        let txs = window.iter().flatten();
        let management = txs.clone().filter(|c| c.is_management).count();
        let policy = txs.filter(|c| c.is_policy_management()).count();
        if management < k as usize || policy == 0 {
            return Err(ValidationError::QuotaViolation);
        }
    }
    Ok(())
}
