//! Block reward schedule.
//!
//! Manual mode pays `max(type 8, type 9)`. Self-adjusting mode pays
//! `floor(initial * (1 - d)^floor(height / E))` with `d` the type-10 rate in
//! Q0.32, evaluated exactly in integer arithmetic.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::params::ChainParams;
use crate::policy::{ptype, EffectivePolicy, REWARD_MODE_MANUAL};

/// Reward for the block at `height`, under the policy in force at its parent.
pub fn block_reward(policy: &EffectivePolicy, params: &ChainParams, height: u64) -> u64 {
    if policy.get(ptype::REWARD_MODE) == REWARD_MODE_MANUAL {
        u64::from(policy.get(ptype::MANUAL_REWARD).max(policy.get(ptype::MIN_REWARD)))
    } else {
        decayed_reward(params.initial_reward, policy.get(ptype::DECAY_RATE), height / params.epoch_length.max(1))
    }
}

/// `floor(initial * (1 - decay / 2^32)^epochs)`, exact.
///
/// The power is bracketed with truncated fixed-point arithmetic, widening the
/// precision until both brackets floor to the same integer.
pub fn decayed_reward(initial: u64, decay_q32: u32, epochs: u64) -> u64 {
    if initial == 0 || decay_q32 == 0 || epochs == 0 {
        return initial;
    }
    let factor = (1u64 << 32) - u64::from(decay_q32);
    let log2_value = (initial as f64).log2() + epochs as f64 * ((factor as f64) / 4_294_967_296.0).log2();
    if log2_value < -4.0 {
        return 0;
    }

    let exact_bits = 32u64.saturating_mul(epochs);
    let mut precision: u64 = 128;
    while precision < exact_bits {
        let (lo, hi) = bracket_power(factor, epochs, precision);
        let lo = (BigUint::from(initial) * lo) >> precision;
        let hi = (BigUint::from(initial) * hi) >> precision;
        if lo == hi {
            return lo.to_u64().expect("bounded by initial");
        }
        precision *= 2;
    }
    let exact = (BigUint::from(initial) * BigUint::from(factor).pow(epochs as u32)) >> exact_bits;
    exact.to_u64().expect("bounded by initial")
}

/// Lower and upper bounds of `(factor / 2^32)^epochs`, scaled by `2^precision`.
fn bracket_power(factor: u64, mut epochs: u64, precision: u64) -> (BigUint, BigUint) {
    let one = BigUint::one() << precision;
    let mask = &one - BigUint::one();
    let mul_floor = |a: &BigUint, b: &BigUint| (a * b) >> precision;
    let mul_ceil = |a: &BigUint, b: &BigUint| {
        let p = a * b;
        let rounded_up = !(&p & &mask).is_zero();
        (p >> precision) + if rounded_up { BigUint::one() } else { BigUint::zero() }
    };
    let base = BigUint::from(factor) << (precision - 32);
    let (mut base_lo, mut base_hi) = (base.clone(), base);
    let (mut acc_lo, mut acc_hi) = (one.clone(), one);
    while epochs > 0 {
        if epochs & 1 == 1 {
            acc_lo = mul_floor(&acc_lo, &base_lo);
            acc_hi = mul_ceil(&acc_hi, &base_hi);
        }
        epochs >>= 1;
        if epochs > 0 {
            base_lo = mul_floor(&base_lo, &base_lo);
            base_hi = mul_ceil(&base_hi, &base_hi);
        }
    }
    (acc_lo, acc_hi)
}
