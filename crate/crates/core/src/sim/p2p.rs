use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use super::channel::DropTable;
use super::queue::NodeId;
use crate::domain::{PacketKind, SimTime};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum P2pError {
    #[error("no point-to-point link between {0} and {1}")]
    LinkAbsent(NodeId, NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P2pSend {
    /// When the packet leaves the sender's radio.
    pub departure: SimTime,
    /// `None` when the NCP-level drop coin fired.
    pub delivery: Option<SimTime>,
}

/// Reliable point-to-point orderwire links. Each sender's radio emits one
/// packet per `spacing`; delivery is FIFO per directed link.
#[derive(Debug, Clone)]
pub struct P2pNetwork {
    links: BTreeSet<(NodeId, NodeId)>,
    last_delivery: BTreeMap<(NodeId, NodeId), SimTime>,
    radio_free: BTreeMap<NodeId, SimTime>,
    spacing: SimTime,
    drop: DropTable,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl P2pNetwork {
    pub fn new(spacing: SimTime, drop: DropTable) -> Self {
        P2pNetwork {
            links: BTreeSet::new(),
            last_delivery: BTreeMap::new(),
            radio_free: BTreeMap::new(),
            spacing,
            drop,
        }
    }

    pub fn open(&mut self, a: NodeId, b: NodeId) -> bool {
        self.links.insert(key(a, b))
    }

    pub fn close(&mut self, a: NodeId, b: NodeId) -> bool {
        self.links.remove(&key(a, b))
    }

    /// Tears down every link touching `n`.
    pub fn detach(&mut self, n: NodeId) {
        self.links.retain(|&(a, b)| a != n && b != n);
    }

    pub fn is_open(&self, a: NodeId, b: NodeId) -> bool {
        self.links.contains(&key(a, b))
    }

    pub fn send<R: Rng + ?Sized>(
        &mut self,
        now: SimTime,
        src: NodeId,
        dst: NodeId,
        kind: PacketKind,
        latency: SimTime,
        rng: &mut R,
    ) -> Result<P2pSend, P2pError> {
        if !self.is_open(src, dst) {
            return Err(P2pError::LinkAbsent(src, dst));
        }
        let free = self.radio_free.entry(src).or_insert(SimTime::ZERO);
        let departure = now.max(*free);
        *free = departure + self.spacing;
        if self.drop.drops(kind, rng) {
            return Ok(P2pSend {
                departure,
                delivery: None,
            });
        }
        let last = self
            .last_delivery
            .entry((src, dst))
            .or_insert(SimTime::ZERO);
        let delivery = (departure + latency).max(*last);
        *last = delivery;
        Ok(P2pSend {
            departure,
            delivery: Some(delivery),
        })
    }
}
