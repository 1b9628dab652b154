use rand::Rng;
use thiserror::Error;

use super::queue::NodeId;
use crate::domain::{PacketKind, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("drop probability {0} for {1} is outside [0, 1]")]
    Probability(f64, PacketKind),
    #[error("bandwidth must be positive")]
    Bandwidth,
}

/// Per-kind loss probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DropTable([f64; PacketKind::ALL.len()]);

impl DropTable {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn get(&self, kind: PacketKind) -> f64 {
        self.0[kind.tag() as usize - 1]
    }

    pub fn set(&mut self, kind: PacketKind, p: f64) -> Result<(), ChannelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ChannelError::Probability(p, kind));
        }
        self.0[kind.tag() as usize - 1] = p;
        Ok(())
    }

    pub fn with(mut self, kind: PacketKind, p: f64) -> Result<Self, ChannelError> {
        self.set(kind, p)?;
        Ok(self)
    }

    /// Draws the drop coin. Probability 0 and 1 consume no randomness.
    pub fn drops<R: Rng + ?Sized>(&self, kind: PacketKind, rng: &mut R) -> bool {
        let p = self.get(kind);
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            rng.random::<f64>() < p
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub bandwidth_bps: u32,
    pub drop: DropTable,
    pub collisions: bool,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            bandwidth_bps: 19_200,
            drop: DropTable::none(),
            collisions: true,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.bandwidth_bps == 0 {
            return Err(ChannelError::Bandwidth);
        }
        Ok(())
    }

    /// Serialization time of `bits`, rounded up to the millisecond.
    pub fn airtime(&self, bits: usize) -> SimTime {
        let bw = self.bandwidth_bps as u64;
        SimTime::from_millis((bits as u64 * 1000).div_ceil(bw))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub u64);

#[derive(Debug, Clone)]
struct Transmission {
    id: TxId,
    start: SimTime,
    end: SimTime,
    resolved: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastOutcome {
    pub tx: TxId,
    pub start: SimTime,
    pub end: SimTime,
    pub delivery: SimTime,
    /// Listeners whose drop coin did not fire. Whether the transmission
    /// collided is only known at `delivery`; see [`BroadcastChannel::collided`].
    pub receivers: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub transmissions: u64,
    pub collided: u64,
    pub dropped_receptions: u64,
}

/// Shared pure-Aloha medium. A transmission occupies `[start, end)`; any
/// two occupancies that intersect destroy each other.
#[derive(Debug, Clone)]
pub struct BroadcastChannel {
    model: ChannelModel,
    log: Vec<Transmission>,
    next_id: u64,
    stats: ChannelStats,
}

impl BroadcastChannel {
    pub fn new(model: ChannelModel) -> Self {
        BroadcastChannel {
            model,
            log: Vec::new(),
            next_id: 0,
            stats: ChannelStats::default(),
        }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn stats(&self) -> ChannelStats {
        self.stats
    }

    /// Registers a transmission starting at `start` and draws one drop coin
    /// per listener. Delivery happens at `start + latency`, or at the end of
    /// the airtime if that is later.
    #[allow(clippy::too_many_arguments)]
    pub fn transmit<R: Rng + ?Sized>(
        &mut self,
        src: NodeId,
        start: SimTime,
        bits: usize,
        kind: PacketKind,
        latency: SimTime,
        listeners: &[NodeId],
        rng: &mut R,
    ) -> BroadcastOutcome {
        let end = start + self.model.airtime(bits);
        let id = TxId(self.next_id);
        self.next_id += 1;
        self.log.push(Transmission {
            id,
            start,
            end,
            resolved: None,
        });
        self.stats.transmissions += 1;
        let mut receivers = Vec::with_capacity(listeners.len());
        for &l in listeners {
            if l == src {
                continue;
            }
            if self.model.drop.drops(kind, rng) {
                self.stats.dropped_receptions += 1;
            } else {
                receivers.push(l);
            }
        }
        BroadcastOutcome {
            tx: id,
            start,
            end,
            delivery: (start + latency).max(end),
            receivers,
        }
    }

    /// Registers channel occupancy that nobody decodes, such as a virtual
    /// twin that only contends for airtime.
    pub fn occupy(&mut self, start: SimTime, bits: usize) -> (TxId, SimTime) {
        let end = start + self.model.airtime(bits);
        let id = TxId(self.next_id);
        self.next_id += 1;
        self.log.push(Transmission {
            id,
            start,
            end,
            resolved: None,
        });
        self.stats.transmissions += 1;
        (id, end)
    }

    /// Whether `tx` overlapped any other transmission. Valid once the
    /// clock has reached the end of `tx`: every transmission that can
    /// overlap it has been registered by then.
    pub fn collided(&mut self, tx: TxId) -> bool {
        if !self.model.collisions {
            return false;
        }
        let Some(i) = self.log.iter().position(|t| t.id == tx) else {
            return false;
        };
        if let Some(r) = self.log[i].resolved {
            return r;
        }
        let (s, e) = (self.log[i].start, self.log[i].end);
        let hit = self
            .log
            .iter()
            .any(|t| t.id != tx && t.start < e && s < t.end);
        self.log[i].resolved = Some(hit);
        if hit {
            self.stats.collided += 1;
        }
        hit
    }

    /// Forgets transmissions that ended before `t`. Callers must have
    /// resolved every transmission that could still overlap them.
    pub fn prune(&mut self, t: SimTime) {
        self.log.retain(|x| x.end >= t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    const NODES: [NodeId; 3] = [NodeId(0), NodeId(1), NodeId(2)];

    #[test]
    fn lone_transmission_reaches_everyone() {
        let mut ch = BroadcastChannel::new(ChannelModel::default());
        let out = ch.transmit(
            NodeId(0),
            SimTime::ZERO,
            104,
            PacketKind::MyCall,
            SimTime::from_millis(492),
            &NODES,
            &mut rng(),
        );
        assert_eq!(out.receivers, vec![NodeId(1), NodeId(2)]);
        assert_eq!(out.delivery, SimTime::from_millis(492));
        assert!(!ch.collided(out.tx));
    }

    #[test]
    fn overlapping_transmissions_both_collide() {
        let mut ch = BroadcastChannel::new(ChannelModel::default());
        let mut r = rng();
        let a = ch.transmit(
            NodeId(0),
            SimTime::ZERO,
            400,
            PacketKind::UserPos,
            SimTime::ZERO,
            &NODES,
            &mut r,
        );
        let b = ch.transmit(
            NodeId(1),
            SimTime::from_millis(10),
            400,
            PacketKind::UserPos,
            SimTime::ZERO,
            &NODES,
            &mut r,
        );
        assert!(ch.collided(a.tx));
        assert!(ch.collided(b.tx));
        assert_eq!(ch.stats().collided, 2);
    }

    #[test]
    fn collisions_can_be_switched_off() {
        let model = ChannelModel {
            collisions: false,
            ..ChannelModel::default()
        };
        let mut ch = BroadcastChannel::new(model);
        let mut r = rng();
        let a = ch.transmit(
            NodeId(0),
            SimTime::ZERO,
            400,
            PacketKind::UserPos,
            SimTime::ZERO,
            &NODES,
            &mut r,
        );
        ch.transmit(
            NodeId(1),
            SimTime::ZERO,
            400,
            PacketKind::UserPos,
            SimTime::ZERO,
            &NODES,
            &mut r,
        );
        assert!(!ch.collided(a.tx));
    }

    #[test]
    fn certain_drop_delivers_nothing() {
        let model = ChannelModel {
            drop: DropTable::none().with(PacketKind::MyCall, 1.0).unwrap(),
            ..Default::default()
        };
        let mut ch = BroadcastChannel::new(model);
        let mut r = rng();
        for i in 0..20 {
            let out = ch.transmit(
                NodeId(0),
                SimTime::from_secs(i),
                104,
                PacketKind::MyCall,
                SimTime::ZERO,
                &NODES,
                &mut r,
            );
            assert!(out.receivers.is_empty());
        }
    }

    #[test]
    fn airtime_at_19200() {
        let m = ChannelModel::default();
        assert_eq!(m.airtime(19_200), SimTime::from_secs(1));
        assert_eq!(m.airtime(168), SimTime::from_millis(9));
    }

    #[test]
    fn drop_probability_is_validated() {
        assert!(DropTable::none().with(PacketKind::Topology, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn collide_iff_intervals_overlap(s1 in 0u64..200, s2 in 0u64..200, b1 in 8usize..2000, b2 in 8usize..2000) {
            let mut ch = BroadcastChannel::new(ChannelModel::default());
            let mut r = rng();
            let a = ch.transmit(NodeId(0), SimTime::from_millis(s1), b1, PacketKind::UserPos, SimTime::ZERO, &NODES, &mut r);
            let b = ch.transmit(NodeId(1), SimTime::from_millis(s2), b2, PacketKind::UserPos, SimTime::ZERO, &NODES, &mut r);
            let overlap = a.start < b.end && b.start < a.end;
            prop_assert_eq!(ch.collided(a.tx), overlap);
            prop_assert_eq!(ch.collided(b.tx), overlap);
            if !overlap {
                prop_assert_eq!(a.receivers.len(), 2);
                prop_assert_eq!(b.receivers.len(), 2);
            }
        }
    }
}
