use std::time::{Duration, Instant};

use mcoin_core::codec::{
    decode_nvalue, deserialize_tx, encode_nvalue, serialize_tx, NValueMode, OutPoint, RoleSet, ScriptSig, Transaction,
    TxIn, TxOut, MAX_AMOUNT, MAX_POLICY_TYPE,
};
use mcoin_core::hash::Hash256;
use mcoin_core::keys::{KeyPair, PublicKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{within, Outcome};

const CASES: usize = 10_000;

fn random_mode(rng: &mut impl Rng) -> NValueMode {
    match rng.gen_range(0..3) {
        0 => NValueMode::CoinTransfer { amount: rng.gen_range(0..=MAX_AMOUNT) },
        1 => NValueMode::RoleChange {
            add: rng.gen(),
            roles: RoleSet::from_bits(rng.gen_range(1..32)).expect("five bits"),
        },
        _ => NValueMode::PolicyChange { permanent: rng.gen(), ptype: rng.gen_range(0..=MAX_POLICY_TYPE), param: rng.gen() },
    }
}

fn random_tx(rng: &mut impl Rng, keys: &[PublicKey]) -> Transaction {
    let inputs = (0..rng.gen_range(1..5))
        .map(|_| {
            let script_sig = rng.gen_bool(0.8).then(|| ScriptSig {
                signature: (0..rng.gen_range(1..=75)).map(|_| rng.gen()).collect(),
                public_key: keys[rng.gen_range(0..keys.len())],
            });
            TxIn { prev_out: OutPoint::new(Hash256(rng.gen()), rng.gen()), script_sig, sequence: rng.gen() }
        })
        .collect();
    let outputs = (0..rng.gen_range(1..5))
        .map(|_| TxOut::new(random_mode(rng), keys[rng.gen_range(0..keys.len())]).expect("in range"))
        .collect();
    let mut tx = Transaction::new(inputs, outputs);
    tx.lock_time = rng.gen();
    tx
}

/// The layout assembled field by field: two mode bits, a flag bit, then
/// either five role bits in M C L U A order or a 27-bit type and 32-bit param.
fn assemble(mode: &NValueMode) -> u64 {
    match *mode {
        NValueMode::CoinTransfer { amount } => amount,
        NValueMode::RoleChange { add, roles } => {
            let letters = ['M', 'C', 'L', 'U', 'A'];
            let bits = letters.iter().fold(0u64, |acc, l| (acc << 1) | u64::from(roles.to_string().contains(*l)));
            (0b10 << 62) | (u64::from(add) << 61) | (bits << 56)
        }
        NValueMode::PolicyChange { permanent, ptype, param } => {
            (0b11 << 62) | (u64::from(permanent) << 61) | (u64::from(ptype) << 32) | u64::from(param)
        }
    }
}

fn goldens() -> Result<(), String> {
    let u: RoleSet = "U".parse().expect("letters");
    let cases = [
        (0xA200000000000000u64, NValueMode::RoleChange { add: true, roles: u }),
        (0x8200000000000000, NValueMode::RoleChange { add: false, roles: u }),
        (0xC000000D00000005, NValueMode::PolicyChange { permanent: false, ptype: 13, param: 5 }),
        (0xE000000000000000, NValueMode::PolicyChange { permanent: true, ptype: 0, param: 0 }),
    ];
    for (value, mode) in cases {
        if decode_nvalue(value) != Ok(mode) || assemble(&mode) != value {
            return Err(format!("golden {value:#018x} decodes to {:?}", decode_nvalue(value)));
        }
    }
    Ok(())
}

fn round_trips() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1944);
    let keys: Vec<PublicKey> = (0..16).map(|s| KeyPair::from_seed(s).public()).collect();
    for i in 0..CASES {
        let tx = random_tx(&mut rng, &keys);
        let bytes = serialize_tx(&tx);
        match deserialize_tx(&bytes) {
            Ok(back) if back == tx && serialize_tx(&back) == bytes => {}
            other => return Err(format!("tx {i} failed to round-trip: {other:?}")),
        }
    }
    for i in 0..CASES {
        let mode = random_mode(&mut rng);
        let value = encode_nvalue(&mode).map_err(|e| format!("nValue {i}: {e}"))?;
        if value != assemble(&mode) || decode_nvalue(value) != Ok(mode) {
            return Err(format!("nValue {i} {mode:?} -> {value:#018x}"));
        }
    }
    Ok(())
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let outcome = match goldens().and_then(|()| round_trips()) {
        Ok(()) => Outcome::new(true, format!("{CASES} transactions and {CASES} nValues round-trip; 4 goldens decode")),
        Err(e) => Outcome::fail(e),
    };
    within(outcome, start.elapsed(), Duration::from_secs(10))
}
