use std::collections::BTreeMap;

use mcoin_core::builder::TxBuilder;
use mcoin_core::chain::GenesisConfig;
use mcoin_core::codec::{Block, NValueMode, OutPoint};
use mcoin_core::policy::{q32_from_f64, PolicyDefaults};
use mcoin_core::{Chain, Transaction};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{key, roles, Net};
use crate::{par_seeds, Outcome};

const USERS: u64 = 5;
const BLOCKS: usize = 200;
const CHAINS: u64 = 6;

/// A random single-miner chain with payments, coin creation by two C
/// holders and root policy changes to the reward and creation limit.
pub fn random_chain(seed: u64, blocks: usize) -> (GenesisConfig, Vec<Block>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Net::new(|g| {
        g.epoch_length = 10;
        g.policy = PolicyDefaults {
            coin_creation_limit: 500,
            manual_block_reward: 40,
            minimum_block_reward: 10,
            max_decay_rate: q32_from_f64(0.25),
            ..Default::default()
        };
    });
    let root = net.root.clone();
    let grants: Vec<Transaction> =
        (1..=USERS).map(|u| net.change_roles(&root, "M", &key(u).public(), true, roles("U"))).collect();
    net.mine(&grants);
    let banker = net.change_roles(&root, "M", &key(1).public(), true, roles("C"));
    net.mine(&[banker]);

    while net.blocks.len() < blocks {
        let mut candidates = Vec::new();
        for _ in 0..rng.gen_range(0..4) {
            let min_fee = net.state().policy.snapshot().min_fee();
            let tx = match rng.gen_range(0..10) {
                0..=4 => {
                    let from = key(rng.gen_range(0..=USERS));
                    let to = key(rng.gen_range(1..=USERS)).public();
                    net.pay(&from, &to, rng.gen_range(1..30), min_fee + rng.gen_range(0..3))
                }
                5..=7 => {
                    let banker = if rng.gen_bool(0.5) { root.clone() } else { key(1) };
                    let to = key(rng.gen_range(1..=USERS));
                    let b = net.prove(TxBuilder::new().lock_time(rng.gen()), &banker, roles("C"));
                    net.prove(b, &to, roles("U")).pay(to.public(), rng.gen_range(1..400)).build().ok()
                }
                _ => {
                    let (p, v) = match rng.gen_range(0..6) {
                        0 => (6, rng.gen_range(100..1000)),
                        1 => (7, rng.gen_range(0..2)),
                        2 => (8, rng.gen_range(0..100)),
                        3 => (9, rng.gen_range(0..100)),
                        4 => (10, rng.gen_range(0..q32_from_f64(0.3))),
                        _ => (12, rng.gen_range(0..3)),
                    };
                    let b = net.prove(TxBuilder::new().lock_time(rng.gen()), &root, roles("M"));
                    b.policy(root.public(), p, v, false).build().ok()
                }
            };
            candidates.extend(tx);
        }
        net.mine_valid(&candidates);
    }
    (net.genesis.clone(), net.blocks)
}

/// Ledger rebuilt from block contents alone.
struct Audit {
    initial_reward: u64,
    epoch_length: u64,
    policy: [u32; 16],
    utxos: BTreeMap<OutPoint, u64>,
    rewards: u128,
    created: u128,
}

impl Audit {
    fn new(genesis: &GenesisConfig) -> Self {
        let d = &genesis.policy;
        let mut policy = [1u32; 16];
        for (p, v) in [
            (6, d.coin_creation_limit),
            (8, d.manual_block_reward),
            (9, d.minimum_block_reward),
            (10, d.decay_rate),
            (11, d.max_decay_rate),
            (12, d.min_fee),
            (13, d.management_period),
            (14, d.management_minimum),
            (15, 0),
        ] {
            policy[p] = v;
        }
        Audit {
            initial_reward: genesis.initial_reward,
            epoch_length: genesis.epoch_length,
            policy,
            utxos: BTreeMap::new(),
            rewards: 0,
            created: 0,
        }
    }

    fn reward(&self, height: u64) -> u64 {
        if self.policy[7] == 0 {
            return u64::from(self.policy[8].max(self.policy[9]));
        }
        let k = (height / self.epoch_length) as u32;
        let factor = BigUint::from((1u64 << 32) - u64::from(self.policy[10]));
        let exact = (BigUint::from(self.initial_reward) * factor.pow(k)) >> (32 * k as usize);
        u64::try_from(exact).expect("below initial")
    }

    fn coin_outputs(tx: &Transaction) -> Vec<(u32, u64)> {
        let modes = tx.outputs.iter().enumerate().map(|(i, o)| (i as u32, o.mode().expect("valid block")));
        modes.filter_map(|(i, m)| if let NValueMode::CoinTransfer { amount } = m { Some((i, amount)) } else { None }).collect()
    }

    fn block(&mut self, height: u64, block: &Block) -> Result<(), String> {
        let limit = u128::from(self.policy[6]);
        let reward = self.reward(height);
        let mut fees = 0u128;
        let mut created = 0u128;
        let mut next_policy = self.policy;
        for tx in &block.transactions[1..] {
            let spent: u128 = tx.inputs.iter().filter_map(|i| self.utxos.remove(&i.prev_out)).map(u128::from).sum();
            let outs = Self::coin_outputs(tx);
            let paid: u128 = outs.iter().map(|(_, a)| u128::from(*a)).sum();
            if paid > spent {
                created += paid - spent;
            } else {
                fees += spent - paid;
            }
            for (vout, amount) in outs {
                self.utxos.insert(OutPoint::new(tx.txid(), vout), amount);
            }
            for out in &tx.outputs {
                if let Ok(NValueMode::PolicyChange { ptype, param, .. }) = out.mode() {
                    next_policy[ptype as usize] = param;
                }
            }
        }
        let coinbase = &block.transactions[0];
        let paid: u128 = Self::coin_outputs(coinbase).iter().map(|(_, a)| u128::from(*a)).sum();
        if paid != u128::from(reward) + fees {
            return Err(format!("height {height}: coinbase {paid}, expected reward {reward} + fees {fees}"));
        }
        if limit > 0 && created > limit {
            return Err(format!("height {height}: created {created} over limit {limit}"));
        }
        for (vout, amount) in Self::coin_outputs(coinbase) {
            self.utxos.insert(OutPoint::new(coinbase.txid(), vout), amount);
        }
        self.rewards += u128::from(reward);
        self.created += created;
        self.policy = next_policy;
        Ok(())
    }
}

/// Replays `blocks`, auditing supply; returns (rewards, created) on success.
fn audit(genesis: &GenesisConfig, blocks: &[Block]) -> Result<(u128, u128), String> {
    let mut chain = Chain::from_genesis(genesis).map_err(|e| e.to_string())?;
    if chain.tip_state().utxo_total() != 0 {
        return Err("genesis holds coins".into());
    }
    let mut audit = Audit::new(genesis);
    for (i, block) in blocks.iter().enumerate() {
        chain.apply_block(block).map_err(|e| format!("block {}: {e}", i + 1))?;
        audit.block(i as u64 + 1, block)?;
    }
    let state = chain.tip_state();
    let total = state.utxo_total();
    if total != audit.rewards + audit.created {
        return Err(format!("UTXO total {total} != rewards {} + created {}", audit.rewards, audit.created));
    }
    let chain_utxos: BTreeMap<OutPoint, u64> = state.utxos().map(|(op, u)| (*op, u.amount)).collect();
    if chain_utxos != audit.utxos {
        return Err("UTXO set differs from the audit's".into());
    }
    Ok((audit.rewards, audit.created))
}

pub fn run() -> Outcome {
    let results = par_seeds(0..CHAINS, |seed| {
        let (genesis, blocks) = random_chain(seed, BLOCKS);
        audit(&genesis, &blocks)
    });
    let mut rewards = 0;
    let mut created = 0;
    for (seed, r) in results.into_iter().enumerate() {
        match r {
            Ok((r, c)) => {
                rewards += r;
                created += c;
            }
            Err(e) => return Outcome::fail(format!("chain {seed}: {e}")),
        }
    }
    Outcome::new(
        true,
        format!("{CHAINS} chains of {BLOCKS} blocks: UTXO totals match rewards {rewards} + created {created}; per-block creation within limit"),
    )
}
