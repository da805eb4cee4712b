use mcoin_core::accounts::{AuthorityKey, Provenance};
use mcoin_core::builder::TxBuilder;
use mcoin_core::codec::Target;
use mcoin_core::keys::{KeyPair, SignatureScheme};
use mcoin_core::policy::{ptype, PolicyDefaults, PolicyError, PolicyRecord, PolicyState};
use mcoin_core::reward::block_reward;
use mcoin_core::{ChainParams, EffectivePolicy};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{roles, Net};
use crate::Outcome;

const TUPLES: usize = 1_000;
const MAX_EPOCHS: u64 = 5_000;

struct Tuple {
    reward: u32,
    floor: u32,
    d: u32,
    epoch: u64,
    height: u64,
}

fn random_tuple(rng: &mut impl Rng) -> Tuple {
    let d = match rng.gen_range(0..4) {
        0 => 0,
        1 => rng.gen_range(0..1 << 16),
        2 => rng.gen_range(0..1 << 28),
        _ => rng.gen(),
    };
    let epoch = rng.gen_range(1..=1_000);
    Tuple { reward: rng.gen(), floor: rng.gen(), d, epoch, height: rng.gen_range(0..epoch * MAX_EPOCHS) }
}

/// floor(reward * (2^32 - d)^k / 2^(32 k)), evaluated on the full-width integers.
fn geometric(initial: u64, d: u32, k: u64) -> BigUint {
    let factor = BigUint::from((1u64 << 32) - u64::from(d));
    (BigUint::from(initial) * factor.pow(k as u32)) >> (32 * k as usize)
}

fn table(mode: u32, t: &Tuple) -> EffectivePolicy {
    let mut table = PolicyDefaults::default().table();
    table[ptype::REWARD_MODE as usize] = mode;
    table[ptype::MANUAL_REWARD as usize] = t.reward;
    table[ptype::MIN_REWARD as usize] = t.floor;
    table[ptype::DECAY_RATE as usize] = t.d;
    table[ptype::MAX_DECAY_RATE as usize] = u32::MAX;
    EffectivePolicy(table)
}

fn schedule() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..TUPLES {
        let t = random_tuple(&mut rng);
        let params = ChainParams {
            scheme: SignatureScheme::default(),
            target: Target::MAX,
            initial_reward: u64::from(t.reward),
            epoch_length: t.epoch,
            require_receiver_role_proof: true,
        };
        let manual = block_reward(&table(0, &t), &params, t.height);
        if manual != u64::from(t.reward.max(t.floor)) {
            return Err(format!("tuple {i}: manual reward {manual}"));
        }
        let adjusting = block_reward(&table(1, &t), &params, t.height);
        let want = geometric(u64::from(t.reward), t.d, t.height / t.epoch);
        if BigUint::from(adjusting) != want {
            return Err(format!("tuple {i}: self-adjusting reward {adjusting}, expected {want}"));
        }
    }
    Ok(())
}

fn record(ptype: u32, param: u32, at: u64) -> PolicyRecord {
    PolicyRecord {
        ptype,
        param,
        permanent: false,
        issuer: KeyPair::from_seed(0).public(),
        authority: AuthorityKey::ROOT,
        position: Provenance::new(at, 1, 0),
    }
}

/// Random decay and maximum updates against a tracked (d, d_max) pair.
fn decay_limit() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rejected = 0;
    for i in 0..TUPLES {
        let max = rng.gen();
        let mut state = PolicyState::new(&PolicyDefaults { max_decay_rate: max, ..Default::default() });
        let (mut d, mut d_max) = (0u32, max);
        for step in 0..4 {
            let set_max = rng.gen_bool(0.3);
            let param = if rng.gen() { rng.gen_range(0..=d_max) } else { rng.gen() };
            let p = if set_max { ptype::MAX_DECAY_RATE } else { ptype::DECAY_RATE };
            let result = state.apply(record(p, param, step + 1));
            let breaks = if set_max { param < d } else { param > d_max };
            match (breaks, result) {
                (true, Err(PolicyError::DecayExceedsMax)) => rejected += 1,
                (false, Ok(())) if set_max => d_max = param,
                (false, Ok(())) => d = param,
                (_, other) => return Err(format!("case {i}: d={d} d_max={d_max}, type {p}={param} gave {other:?}")),
            }
        }
    }
    Ok(rejected)
}

/// A policy transaction above the maximum fails validation with the same code.
fn decay_limit_on_chain() -> Result<(), String> {
    let net = Net::new(|g| g.policy.max_decay_rate = 1 << 20);
    let root = net.root.clone();
    let build = |param| {
        let b = net.prove(TxBuilder::new(), &root, roles("M"));
        b.policy(root.public(), ptype::DECAY_RATE, param, false).build().expect("builds")
    };
    net.chain.validate_tx(&build(1 << 20)).map_err(|e| format!("d = d_max refused: {e}"))?;
    match net.chain.validate_tx(&build((1 << 20) + 1)) {
        Err(e) if e.code() == "DecayExceedsMax" => Ok(()),
        other => Err(format!("d > d_max gave {:?}", other.map(|o| o.txid))),
    }
}

pub fn run() -> Outcome {
    let result = schedule().and_then(|()| decay_limit()).and_then(|n| decay_limit_on_chain().map(|()| n));
    match result {
        Ok(rejected) => Outcome::new(
            true,
            format!("{TUPLES} tuples match both formulas; {rejected} over-maximum decay records rejected"),
        ),
        Err(e) => Outcome::fail(e),
    }
}
