use std::cmp::Ordering;

use mcoin_core::accounts::{compare_authority, AuthorityKey};
use mcoin_core::builder::TxBuilder;
use mcoin_core::keys::KeyPair;
use mcoin_core::policy::{is_binary, PolicyDefaults};
use mcoin_core::Transaction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{key, roles, Net};
use crate::{par_seeds, Outcome};

const CHAINS: u64 = 40;
const ISSUES: usize = 30;
const TYPES: [u32; 6] = [1, 5, 6, 8, 9, 12];

fn examples() -> Result<(), String> {
    let pairs = [((0, 0, 0), (1, 5, 0)), ((1, 5, 0), (1, 9, 0)), ((1, 5, 0), (1, 5, 2))];
    for (a, b) in pairs {
        let (ka, kb) = (AuthorityKey::new(a.0, a.1, a.2), AuthorityKey::new(b.0, b.1, b.2));
        if compare_authority(&ka, &kb) != Ordering::Less || compare_authority(&kb, &ka) != Ordering::Greater {
            return Err(format!("{a:?} is not more authoritative than {b:?}"));
        }
    }
    Ok(())
}

/// Root, a depth-1 manager and a depth-2 manager below it.
fn issuers() -> (Net, [KeyPair; 3]) {
    let mut net = Net::new(|g| g.policy = PolicyDefaults { min_fee: 1, coin_creation_limit: 7, ..Default::default() });
    let root = net.root.clone();
    let (m1, m2) = (key(1), key(2));
    let tx = net.change_roles(&root, "M", &m1.public(), true, roles("M"));
    net.mine(&[tx]);
    let tx = net.change_roles(&m1, "M", &m2.public(), true, roles("M"));
    net.mine(&[tx]);
    (net, [root, m1, m2])
}

fn issue(net: &Net, by: &KeyPair, ptype: u32, param: u32, permanent: bool) -> Transaction {
    let b = net.prove(TxBuilder::new().lock_time(net.lock()), by, roles("M"));
    b.policy(by.public(), ptype, param, permanent).build().expect("builds")
}

/// Tie inside one block: the manager granted first outranks the second.
fn same_block_tie() -> Result<(), String> {
    let mut net = Net::new(|_| {});
    let root = net.root.clone();
    let (a, b) = (key(1), key(2));
    let grants = [
        net.change_roles(&root, "M", &a.public(), true, roles("M")),
        net.change_roles(&root, "M", &b.public(), true, roles("M")),
    ];
    net.mine(&grants);
    let txs = [issue(&net, &b, 12, 3, false), issue(&net, &a, 12, 10, false)];
    net.mine(&txs);
    let txs = [issue(&net, &b, 12, 4, false)];
    net.mine(&txs);
    match net.state().policy.effective(12) {
        Ok(10) => Ok(()),
        other => Err(format!("same-block tie resolved to {other:?}")),
    }
}

/// Depth-1 "12=10" against depth-2 "12=3", in both orders.
fn depth_dominance() -> Result<(), String> {
    for first_deep in [false, true] {
        let (mut net, [_, m1, m2]) = issuers();
        let (shallow, deep) = (issue(&net, &m1, 12, 10, false), issue(&net, &m2, 12, 3, false));
        let order = if first_deep { [deep, shallow] } else { [shallow, deep] };
        for tx in order {
            net.mine(&[tx]);
        }
        if net.state().policy.effective(12) != Ok(10) {
            return Err(format!("depth-1 record lost to depth-2 (depth-2 first: {first_deep})"));
        }
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Accepted {
    rank: usize,
    ptype: u32,
    param: u32,
    permanent: bool,
}

fn expected(history: &[Accepted], ptype: u32, default: u32) -> u32 {
    let mine = history.iter().filter(|r| r.ptype == ptype);
    match mine.clone().map(|r| r.rank).min() {
        None => default,
        Some(best) => mine.filter(|r| r.rank == best).last().expect("nonempty").param,
    }
}

fn random_chain(seed: u64) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut net, issuers) = issuers();
    let defaults = net.genesis.policy.table();
    let mut history: Vec<Accepted> = Vec::new();
    let mut rejected = 0;
    for step in 0..ISSUES {
        let rank = rng.gen_range(0..3);
        let ptype = TYPES[rng.gen_range(0..TYPES.len())];
        let param = if is_binary(ptype) { rng.gen_range(0..2) } else { rng.gen_range(0..100) };
        let permanent = rng.gen_bool(0.2);
        let locked = history.iter().any(|r| r.rank == rank && r.ptype == ptype && r.permanent);
        let before: Vec<u32> = TYPES.iter().map(|&p| net.state().policy.effective(p).expect("known")).collect();
        let prior = history.len();
        let tx = issue(&net, &issuers[rank], ptype, param, permanent);
        match (locked, net.chain.validate_tx(&tx)) {
            (true, Err(e)) if e.code() == "PermanenceViolation" => {
                rejected += 1;
                net.mine(&[]);
            }
            (false, Ok(_)) => {
                net.mine(&[tx]);
                history.push(Accepted { rank, ptype, param, permanent });
            }
            (locked, r) => {
                return Err(format!("step {step}: permanent={locked} but validation gave {:?}", r.map(|o| o.txid)))
            }
        }
        for (i, &p) in TYPES.iter().enumerate() {
            let now = net.state().policy.effective(p).expect("known");
            if now != expected(&history, p, defaults[p as usize]) {
                return Err(format!("step {step}: type {p} is {now}, oracle says otherwise"));
            }
            let outranked = history[..prior].iter().any(|r| r.ptype == p && r.rank < rank);
            if p == ptype && outranked && now != before[i] {
                return Err(format!("step {step}: lower-authority record moved type {p}"));
            }
            let root_locked = history[..prior].iter().any(|r| r.rank == 0 && r.ptype == p && r.permanent);
            if root_locked && now != before[i] {
                return Err(format!("step {step}: root-permanent type {p} changed"));
            }
        }
    }
    Ok((history.len(), rejected))
}

pub fn run() -> Outcome {
    if let Err(e) = examples().and_then(|()| same_block_tie()).and_then(|()| depth_dominance()) {
        return Outcome::fail(e);
    }
    let mut accepted = 0;
    let mut rejected = 0;
    for (seed, r) in par_seeds(0..CHAINS, random_chain).into_iter().enumerate() {
        match r {
            Ok((a, r)) => {
                accepted += a;
                rejected += r;
            }
            Err(e) => return Outcome::fail(format!("chain {seed}: {e}")),
        }
    }
    Outcome::new(
        true,
        format!(
            "3 authority examples exact; {CHAINS} three-issuer chains: {accepted} records resolved as predicted, \
             {rejected} permanence violations refused"
        ),
    )
}
