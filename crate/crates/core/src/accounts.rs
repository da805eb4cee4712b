//! The account hierarchy and role registry.
//!
//! Every labeled account is a node in a tree rooted at the account created by
//! the genesis transaction. Role grants are recorded per granting output so
//! that later transactions can bring a role in by referencing the output,
//! and removals deactivate those records.

use std::cmp::Ordering;

use im::OrdMap;
use serde::Serialize;

use crate::codec::{OutPoint, Role, RoleSet};
use crate::keys::PublicKey;

/// Where in the chain an output was created.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Provenance {
    pub height: u64,
    pub tx_index: u32,
    pub vout: u32,
}

impl Provenance {
    pub fn new(height: u64, tx_index: u32, vout: u32) -> Self {
        Provenance { height, tx_index, vout }
    }
}

/// Policy authority of an M holder, fixed when M is first granted.
/// Smaller keys are more authoritative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AuthorityKey {
    /// Distance from the root when M was granted.
    pub depth: u32,
    /// Height of the block carrying the grant.
    pub height: u64,
    /// Position of the grant within its block.
    pub position: u64,
}

impl AuthorityKey {
    pub const ROOT: AuthorityKey = AuthorityKey { depth: 0, height: 0, position: 0 };

    pub fn new(depth: u32, height: u64, position: u64) -> Self {
        AuthorityKey { depth, height, position }
    }

    pub fn at(depth: u32, provenance: Provenance) -> Self {
        AuthorityKey {
            depth,
            height: provenance.height,
            position: (u64::from(provenance.tx_index) << 32) | u64::from(provenance.vout),
        }
    }
}

/// Lexicographic on (depth, grant height, grant position).
pub fn compare_authority(a: &AuthorityKey, b: &AuthorityKey) -> Ordering {
    a.cmp(b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AccountNode {
    pub parent: Option<PublicKey>,
    pub roles: RoleSet,
    pub frozen: bool,
    pub grant_provenance: Option<Provenance>,
    pub authority: Option<AuthorityKey>,
}

/// A role-change output and what is still live from it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoleGrant {
    pub account: PublicKey,
    pub granted: RoleSet,
    pub active: RoleSet,
    pub provenance: Provenance,
}

/// Which role of the covering account authorizes a role change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CoverMode {
    Manager,
    AccountManager,
    LawEnforcement,
}

impl CoverMode {
    pub const ALL: [CoverMode; 3] = [CoverMode::Manager, CoverMode::AccountManager, CoverMode::LawEnforcement];

    pub fn role(self) -> Role {
        match self {
            CoverMode::Manager => Role::Manager,
            CoverMode::AccountManager => Role::AccountManager,
            CoverMode::LawEnforcement => Role::LawEnforcement,
        }
    }
}

/// An authorized role-change output, ready to apply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleChange {
    pub coverer: PublicKey,
    pub mode: CoverMode,
    pub target: PublicKey,
    pub add: bool,
    pub roles: RoleSet,
    pub outpoint: OutPoint,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AccountError {
    #[error("unknown account {0:?}")]
    UnknownAccount(PublicKey),
    #[error("cannot remove roles from unknown account {0:?}")]
    UnknownTarget(PublicKey),
    #[error("account {0:?} is frozen; only law enforcement may restore it")]
    FrozenTarget(PublicKey),
    #[error("re-parenting {0:?} would create a cycle")]
    WouldCycle(PublicKey),
}

/// Row of the inspection dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AccountSummary {
    pub account: PublicKey,
    pub parent: Option<PublicKey>,
    pub depth: u32,
    pub roles: RoleSet,
    pub frozen: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccountTree {
    root: PublicKey,
    nodes: OrdMap<PublicKey, AccountNode>,
    grants: OrdMap<OutPoint, RoleGrant>,
    active_grant: OrdMap<(PublicKey, Role), OutPoint>,
}

impl AccountTree {
    /// Tree holding only the root, labeled `MCLUA` by the genesis grant.
    pub fn with_root(root: PublicKey, grant: OutPoint, provenance: Provenance) -> Self {
        let mut tree = AccountTree {
            root,
            nodes: OrdMap::new(),
            grants: OrdMap::new(),
            active_grant: OrdMap::new(),
        };
        tree.nodes.insert(
            root,
            AccountNode {
                parent: None,
                roles: RoleSet::EMPTY,
                frozen: false,
                grant_provenance: None,
                authority: None,
            },
        );
        tree.grant(root, RoleSet::ALL, grant, provenance);
        tree
    }

    pub fn root(&self) -> PublicKey {
        self.root
    }

    pub fn contains(&self, account: &PublicKey) -> bool {
        self.nodes.contains_key(account)
    }

    pub fn node(&self, account: &PublicKey) -> Option<&AccountNode> {
        self.nodes.get(account)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&PublicKey, &AccountNode)> {
        self.nodes.iter()
    }

    pub fn grant_record(&self, outpoint: &OutPoint) -> Option<&RoleGrant> {
        self.grants.get(outpoint)
    }

    pub fn grants(&self) -> impl Iterator<Item = (&OutPoint, &RoleGrant)> {
        self.grants.iter()
    }

    /// Output whose grant currently backs `role` for `account`.
    pub fn active_grant(&self, account: &PublicKey, role: Role) -> Option<OutPoint> {
        self.active_grant.get(&(*account, role)).copied()
    }

    pub fn is_frozen(&self, account: &PublicKey) -> bool {
        self.nodes.get(account).is_some_and(|n| n.frozen)
    }

    /// Current roles; empty for unknown accounts, never U while frozen.
    pub fn active_roles(&self, account: &PublicKey) -> RoleSet {
        match self.nodes.get(account) {
            Some(n) if n.frozen => n.roles.without(Role::User),
            Some(n) => n.roles,
            None => RoleSet::EMPTY,
        }
    }

    /// Iterates `account`, its parent, and so on up to the root.
    pub fn path_to_root<'a>(&'a self, account: &PublicKey) -> impl Iterator<Item = PublicKey> + 'a {
        let mut next = self.nodes.contains_key(account).then_some(*account);
        std::iter::from_fn(move || {
            let current = next?;
            next = self.nodes.get(&current).and_then(|n| n.parent);
            Some(current)
        })
    }

    pub fn depth(&self, account: &PublicKey) -> Result<u32, AccountError> {
        if !self.contains(account) {
            return Err(AccountError::UnknownAccount(*account));
        }
        Ok(self.path_to_root(account).count() as u32 - 1)
    }

    /// Whether `coverer` lies on the path from the root to `target`
    /// (inclusive). Accounts not yet in the tree are covered by anyone, since
    /// they attach under the coverer.
    pub fn covers(&self, coverer: &PublicKey, target: &PublicKey) -> Result<bool, AccountError> {
        if !self.contains(coverer) {
            return Err(AccountError::UnknownAccount(*coverer));
        }
        if !self.contains(target) {
            return Ok(true);
        }
        Ok(self.path_to_root(target).any(|a| a == *coverer))
    }

    /// `target` sits strictly above `ancestor` in the tree.
    pub fn is_strict_descendant(&self, target: &PublicKey, ancestor: &PublicKey) -> bool {
        target != ancestor && self.contains(target) && self.path_to_root(target).any(|a| a == *ancestor)
    }

    pub fn apply_role_change(&mut self, change: &RoleChange) -> Result<(), AccountError> {
        if !self.contains(&change.coverer) {
            return Err(AccountError::UnknownAccount(change.coverer));
        }
        let Some(node) = self.nodes.get(&change.target).cloned() else {
            if !change.add {
                return Err(AccountError::UnknownTarget(change.target));
            }
            self.nodes.insert(
                change.target,
                AccountNode {
                    parent: Some(change.coverer),
                    roles: RoleSet::EMPTY,
                    frozen: false,
                    grant_provenance: None,
                    authority: None,
                },
            );
            self.grant(change.target, change.roles, change.outpoint, change.provenance);
            return Ok(());
        };

        let touches_user = change.roles.contains(Role::User);
        let by_law = change.mode == CoverMode::LawEnforcement;
        if change.add {
            if touches_user && node.frozen && !by_law {
                return Err(AccountError::FrozenTarget(change.target));
            }
            if change.mode == CoverMode::AccountManager && !self.is_strict_descendant(&change.target, &change.coverer) {
                if self.path_to_root(&change.coverer).any(|a| a == change.target) {
                    return Err(AccountError::WouldCycle(change.target));
                }
                self.nodes.get_mut(&change.target).expect("exists").parent = Some(change.coverer);
            }
            if touches_user && by_law {
                self.nodes.get_mut(&change.target).expect("exists").frozen = false;
            }
            self.grant(change.target, change.roles, change.outpoint, change.provenance);
        } else {
            for role in change.roles.iter() {
                self.revoke(&change.target, role);
            }
            if touches_user && by_law {
                self.nodes.get_mut(&change.target).expect("exists").frozen = true;
            }
        }
        Ok(())
    }

    fn grant(&mut self, account: PublicKey, roles: RoleSet, outpoint: OutPoint, provenance: Provenance) {
        let held = self.nodes[&account].roles;
        let fresh = roles.difference(held);
        for role in fresh.iter() {
            self.active_grant.insert((account, role), outpoint);
        }
        self.grants.insert(outpoint, RoleGrant { account, granted: roles, active: fresh, provenance });
        if fresh.is_empty() {
            return;
        }
        let depth = self.depth(&account).expect("account exists");
        let node = self.nodes.get_mut(&account).expect("account exists");
        node.roles = node.roles.union(fresh);
        node.grant_provenance = Some(provenance);
        if fresh.contains(Role::Manager) && node.authority.is_none() {
            node.authority = Some(AuthorityKey::at(depth, provenance));
        }
    }

    fn revoke(&mut self, account: &PublicKey, role: Role) {
        let Some(outpoint) = self.active_grant.remove(&(*account, role)) else {
            return;
        };
        if let Some(grant) = self.grants.get_mut(&outpoint) {
            grant.active = grant.active.without(role);
        }
        if let Some(node) = self.nodes.get_mut(account) {
            node.roles = node.roles.without(role);
        }
    }

    pub fn summary(&self) -> Vec<AccountSummary> {
        self.nodes
            .iter()
            .map(|(account, node)| AccountSummary {
                account: *account,
                parent: node.parent,
                depth: self.depth(account).expect("account exists"),
                roles: self.active_roles(account),
                frozen: node.frozen,
            })
            .collect()
    }

    /// Structural invariants: one parentless node (the root), every parent
    /// known, no cycles, registry consistent with node labels.
    pub fn check_invariants(&self) -> Result<(), String> {
        let roots: Vec<_> = self.nodes.iter().filter(|(_, n)| n.parent.is_none()).map(|(k, _)| *k).collect();
        if roots != [self.root] {
            return Err(format!("expected single root {:?}, found {roots:?}", self.root));
        }
        for (account, node) in &self.nodes {
            if let Some(parent) = &node.parent {
                if !self.nodes.contains_key(parent) {
                    return Err(format!("{account:?} has unknown parent {parent:?}"));
                }
            }
            let mut steps = 0usize;
            let mut cur = node.parent;
            while let Some(p) = cur {
                steps += 1;
                if p == *account || steps > self.nodes.len() {
                    return Err(format!("cycle through {account:?}"));
                }
                cur = self.nodes[&p].parent;
            }
            if node.frozen && node.roles.contains(Role::User) {
                return Err(format!("frozen {account:?} still holds U"));
            }
            let indexed: RoleSet =
                Role::ALL.into_iter().filter(|r| self.active_grant.contains_key(&(*account, *r))).collect();
            if indexed != node.roles {
                return Err(format!("{account:?} labels {} but registry has {}", node.roles, indexed));
            }
        }
        for ((account, role), outpoint) in &self.active_grant {
            let grant = self.grants.get(outpoint).ok_or("dangling grant index")?;
            if grant.account != *account || !grant.active.contains(*role) {
                return Err(format!("grant index mismatch at {outpoint:?}"));
            }
        }
        Ok(())
    }
}
