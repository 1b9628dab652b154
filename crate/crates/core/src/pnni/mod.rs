//! Mobile PNNI handoff over a peer-group hierarchy.
//!
//! Logical nodes (LNs) are the leaves of a dotted-name tree (`A.1.2`);
//! every proper prefix names a peer group (PG). A handoff is confined to
//! the smallest PG containing both the old and the new LN: a second branch
//! is set up from the PG's border LN to the new LN, and after the handoff
//! the old branch is released without signaling leaving the PG.

mod branch;
mod random;
mod tree;

pub use branch::{
    is_strictly_increasing, prepare_handoff, replay_cells, scoped_call_abort, ActiveVc,
    BranchStatus, CellSchedule, HandoffPlan, Release, SignalRecord, VcBranch, VcTree, VciUsage,
    FIRST_DYNAMIC_VCI,
};
pub use random::{random_hierarchy, RandomHierarchy};
pub use tree::{handoff_scope, NodePath, PeerGroupTree};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PnniError {
    #[error("invalid node name {0:?}")]
    BadName(String),
    #[error("{0} is not a logical node of this hierarchy")]
    UnknownNode(NodePath),
    #[error("{0} is already a peer group")]
    NodeIsGroup(NodePath),
    #[error("{a} and {b} share no peer group")]
    Disjoint { a: NodePath, b: NodePath },
    #[error("no path from {root} to {to} inside {scope} with at least {min_hops} hops")]
    NoAdmissiblePath {
        root: NodePath,
        to: NodePath,
        scope: NodePath,
        min_hops: usize,
    },
    #[error("hop {from}-{to} lies outside scope {scope}")]
    OutsideScope {
        from: NodePath,
        to: NodePath,
        scope: NodePath,
    },
    #[error("branch is {0:?}, expected active")]
    NotActive(BranchStatus),
    #[error("no free VCI at {0}")]
    VciExhausted(NodePath),
}
