use mcoin_core::accounts::AccountTree;
use mcoin_core::builder::TxBuilder;
use mcoin_core::codec::{NValueMode, Role, RoleSet};
use mcoin_core::keys::{KeyPair, PublicKey};
use mcoin_core::Transaction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{key, Net};
use crate::{par_seeds, Outcome};

const SEQUENCES: u64 = 1_000;
const ACCEPTED_PER_SEQUENCE: usize = 10;
const ATTEMPTS_PER_SEQUENCE: usize = 60;
const ACCOUNTS: u64 = 8;

fn management() -> RoleSet {
    [Role::Manager, Role::AccountManager, Role::LawEnforcement].into_iter().collect()
}

fn random_subset(rng: &mut impl Rng, within: RoleSet) -> RoleSet {
    within.iter().filter(|_| rng.gen()).collect()
}

/// One role-change transaction from a random manager, or None when nobody
/// can prove a management role.
fn candidate(rng: &mut impl Rng, net: &Net) -> Option<(Transaction, KeyPair, RoleSet)> {
    let tree = &net.state().accounts;
    let managers: Vec<KeyPair> =
        (0..=ACCOUNTS).map(key).filter(|k| !tree.active_roles(&k.public()).intersection(management()).is_empty()).collect();
    let coverer = managers.get(rng.gen_range(0..managers.len().max(1)))?.clone();
    let held = tree.active_roles(&coverer.public()).intersection(management());
    let mut via = random_subset(rng, held);
    if via.is_empty() {
        via = held;
    }
    let roles = match rng.gen_range(0..3) {
        0 => RoleSet::only(Role::User),
        1 => random_subset(rng, tree.active_roles(&coverer.public())),
        _ => RoleSet::from_bits(rng.gen_range(1..32)).expect("five bits"),
    };
    if roles.is_empty() {
        return None;
    }
    let target = key(rng.gen_range(1..=ACCOUNTS)).public();
    let b = net.prove(TxBuilder::new().lock_time(rng.gen()), &coverer, via);
    let tx = b.role_change(target, rng.gen_bool(0.65), roles).build().ok()?;
    // A grant input proves every role still live on it, not just the ones asked for.
    let proven = tx
        .inputs
        .iter()
        .filter_map(|i| tree.grant_record(&i.prev_out))
        .fold(RoleSet::EMPTY, |acc, g| acc.union(g.active.intersection(tree.active_roles(&g.account))));
    Some((tx, coverer, proven))
}

/// Whether some proven mode admits the change under the adopted reading of
/// the authorized-subset and path-covering properties.
fn admitted(pre: &AccountTree, coverer: &PublicKey, via: RoleSet, target: &PublicKey, add: bool, roles: RoleSet) -> bool {
    let held = pre.active_roles(coverer);
    let fresh = !pre.contains(target);
    let on_path = fresh || pre.path_to_root(target).any(|a| a == *coverer);
    let user_only = roles == RoleSet::only(Role::User);
    let by_manager = via.contains(Role::Manager) && held.contains(Role::Manager) && roles.is_subset(held) && on_path;
    let descendant = pre.path_to_root(target).skip(1).any(|a| a == *coverer);
    let released = add && !fresh && pre.active_roles(target).is_empty() && !pre.path_to_root(coverer).any(|a| a == *target);
    let by_account_manager = via.contains(Role::AccountManager)
        && held.contains(Role::AccountManager)
        && user_only
        && (fresh || descendant || released);
    let deeper = match (pre.depth(target), pre.depth(coverer)) {
        (Ok(t), Ok(c)) => t > c,
        _ => false,
    };
    let by_law = via.contains(Role::LawEnforcement) && held.contains(Role::LawEnforcement) && user_only && deeper;
    by_manager || by_account_manager || by_law
}

fn structure(tree: &AccountTree) -> Result<(), String> {
    let roots: Vec<_> = tree.accounts().filter(|(_, n)| n.parent.is_none()).collect();
    if roots.len() != 1 || *roots[0].0 != tree.root() {
        return Err(format!("{} parentless nodes", roots.len()));
    }
    for (account, node) in tree.accounts() {
        let mut cur = node.parent;
        let mut steps = 0;
        while let Some(p) = cur {
            steps += 1;
            if p == *account || steps > tree.len() {
                return Err("parent links form a cycle".into());
            }
            cur = tree.node(&p).and_then(|n| n.parent);
        }
        if node.frozen && tree.active_roles(account).contains(Role::User) {
            return Err("frozen account holds U".into());
        }
    }
    tree.check_invariants()
}

#[derive(Default)]
struct Tally {
    accepted: usize,
    freezes: usize,
    restores: usize,
    adoptions: usize,
}

fn check(pre: &AccountTree, post: &AccountTree, tx: &Transaction, coverer: &KeyPair, via: RoleSet, tally: &mut Tally) -> Result<(), String> {
    let mut law_touched = Vec::new();
    for out in &tx.outputs {
        let Ok(NValueMode::RoleChange { add, roles }) = out.mode() else {
            continue;
        };
        let target = out.pubkey;
        if !admitted(pre, &coverer.public(), via, &target, add, roles) {
            return Err(format!("accepted change {}{roles} on a target the coverer cannot reach", if add { "+" } else { "-" }));
        }
        let law = via.contains(Role::LawEnforcement)
            && roles == RoleSet::only(Role::User)
            && matches!((pre.depth(&target), pre.depth(&coverer.public())), (Ok(t), Ok(c)) if t > c);
        if law {
            law_touched.push((target, add));
        }
        if add && pre.contains(&target) && post.node(&target).and_then(|n| n.parent) != pre.node(&target).and_then(|n| n.parent) {
            tally.adoptions += 1;
        }
    }
    for (account, node) in post.accounts() {
        let was = pre.is_frozen(account);
        if node.frozen == was {
            continue;
        }
        if !law_touched.contains(&(*account, !node.frozen)) {
            return Err(format!("frozen flag moved to {} without a law-enforcement U change", node.frozen));
        }
        if node.frozen {
            tally.freezes += 1;
        } else {
            tally.restores += 1;
        }
    }
    structure(post)
}

fn sequence(seed: u64, tally: &mut Tally) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Net::new(|_| {});
    let mut accepted = 0;
    for _ in 0..ATTEMPTS_PER_SEQUENCE {
        if accepted == ACCEPTED_PER_SEQUENCE {
            break;
        }
        let Some((tx, coverer, via)) = candidate(&mut rng, &net) else {
            continue;
        };
        if net.chain.validate_tx(&tx).is_err() {
            continue;
        }
        let pre = net.state().accounts.clone();
        net.mine(&[tx.clone()]);
        check(&pre, &net.state().accounts, &tx, &coverer, via, tally).map_err(|e| format!("seed {seed}: {e}"))?;
        accepted += 1;
    }
    tally.accepted += accepted;
    Ok(())
}

pub fn run() -> Outcome {
    let runs = par_seeds(0..SEQUENCES, |seed| {
        let mut t = Tally::default();
        sequence(seed, &mut t).map(|()| t)
    });
    let mut tally = Tally::default();
    for run in runs {
        match run {
            Ok(t) => {
                tally.accepted += t.accepted;
                tally.freezes += t.freezes;
                tally.restores += t.restores;
                tally.adoptions += t.adoptions;
            }
            Err(e) => return Outcome::fail(e),
        }
    }
    Outcome::new(
        true,
        format!(
            "{SEQUENCES} sequences, {} accepted role changes ({} freezes, {} restores, {} adoptions): \
             authorized-subset, path-covering, freeze-exclusivity, single-root and acyclicity hold",
            tally.accepted, tally.freezes, tally.restores, tally.adoptions
        ),
    )
}
