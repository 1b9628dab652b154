use std::collections::BTreeMap;
use std::fmt::Debug;

use thiserror::Error;

use super::MessageId;
use crate::domain::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LpId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Anti,
}

/// A Time Warp message. `dst = None` marks an external output: recorded
/// for verification against real time, never delivered.
#[derive(Debug, Clone, PartialEq)]
pub struct TwMessage<P> {
    pub id: MessageId,
    pub src: LpId,
    pub dst: Option<LpId>,
    pub send_time: SimTime,
    pub recv_time: SimTime,
    pub sign: Sign,
    pub payload: P,
}

impl<P: Clone + PartialEq> TwMessage<P> {
    pub fn key(&self) -> (SimTime, MessageId) {
        (self.recv_time, self.id)
    }

    pub fn anti(&self) -> Self {
        TwMessage {
            sign: Sign::Anti,
            ..self.clone()
        }
    }

    pub fn is_anti(&self) -> bool {
        self.sign == Sign::Anti
    }

    /// Same message with the opposite sign.
    pub fn is_twin_of(&self, other: &Self) -> bool {
        self.sign != other.sign
            && self.id == other.id
            && self.src == other.src
            && self.dst == other.dst
            && self.send_time == other.send_time
            && self.recv_time == other.recv_time
            && self.payload == other.payload
    }
}

pub struct Emit<P> {
    pub dst: Option<LpId>,
    /// Must be at least 1 ms.
    pub delay: SimTime,
    pub payload: P,
}

/// Event handler shared by every LP of a system. Must be a pure function
/// of its arguments.
pub trait Model {
    type State: Clone + PartialEq + Debug;
    type Payload: Clone + PartialEq + Debug;

    fn handle(
        &self,
        lp: LpId,
        now: SimTime,
        state: &mut Self::State,
        payload: &Self::Payload,
    ) -> Vec<Emit<Self::Payload>>;
}

#[derive(Debug, Clone, PartialEq)]
struct Processed<S, P> {
    msg: TwMessage<P>,
    before: S,
    outputs: Vec<TwMessage<P>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LpStats {
    pub processed: u64,
    pub rollbacks: u64,
    pub undone: u64,
    pub antimessages: u64,
    pub annihilated: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RollbackError {
    #[error("rollback to {target:?} is below the fossil horizon {horizon:?}")]
    BelowHorizon { target: SimTime, horizon: SimTime },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollbackReport<P> {
    pub from_lvt: SimTime,
    pub to: SimTime,
    pub undone: usize,
    /// Cancellations for every output of the undone events, external
    /// outputs included.
    pub antimessages: Vec<TwMessage<P>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Receipt<P> {
    pub rollback: Option<RollbackReport<P>>,
    pub annihilated: bool,
}

pub struct LogicalProcess<M: Model> {
    id: LpId,
    state: M::State,
    pending: BTreeMap<(SimTime, MessageId, u64), TwMessage<M::Payload>>,
    processed: Vec<Processed<M::State, M::Payload>>,
    /// Antimessages that arrived before their positive twin.
    orphans: Vec<TwMessage<M::Payload>>,
    horizon: SimTime,
    horizon_lvt: SimTime,
    arrivals: u64,
    stats: LpStats,
}

impl<M: Model> Clone for LogicalProcess<M> {
    fn clone(&self) -> Self {
        LogicalProcess {
            id: self.id,
            state: self.state.clone(),
            pending: self.pending.clone(),
            processed: self.processed.clone(),
            orphans: self.orphans.clone(),
            horizon: self.horizon,
            horizon_lvt: self.horizon_lvt,
            arrivals: self.arrivals,
            stats: self.stats,
        }
    }
}

impl<M: Model> Debug for LogicalProcess<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogicalProcess")
            .field("id", &self.id)
            .field("lvt", &self.lvt())
            .field("state", &self.state)
            .field("pending", &self.pending.len())
            .field("processed", &self.processed.len())
            .finish()
    }
}

impl<M: Model> LogicalProcess<M> {
    pub fn new(id: LpId, state: M::State) -> Self {
        LogicalProcess {
            id,
            state,
            pending: BTreeMap::new(),
            processed: Vec::new(),
            orphans: Vec::new(),
            horizon: SimTime::ZERO,
            horizon_lvt: SimTime::ZERO,
            arrivals: 0,
            stats: LpStats::default(),
        }
    }

    pub fn id(&self) -> LpId {
        self.id
    }

    pub fn state(&self) -> &M::State {
        &self.state
    }

    pub fn stats(&self) -> LpStats {
        self.stats
    }

    /// Receive time of the last processed message.
    pub fn lvt(&self) -> SimTime {
        self.processed
            .last()
            .map_or(self.horizon_lvt, |p| p.msg.recv_time)
    }

    pub fn horizon(&self) -> SimTime {
        self.horizon
    }

    pub fn next_pending_time(&self) -> Option<SimTime> {
        self.pending.keys().next().map(|k| k.0)
    }

    pub fn pending(&self) -> impl Iterator<Item = &TwMessage<M::Payload>> {
        self.pending.values()
    }

    pub fn orphans(&self) -> &[TwMessage<M::Payload>] {
        &self.orphans
    }

    /// Snapshot times still held, oldest first.
    pub fn snapshot_times(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.processed.iter().map(|p| p.msg.recv_time)
    }

    /// Outputs of processed events still subject to rollback.
    pub fn outputs(&self) -> impl Iterator<Item = &TwMessage<M::Payload>> {
        self.processed.iter().flat_map(|p| p.outputs.iter())
    }

    fn enqueue(&mut self, m: TwMessage<M::Payload>) {
        self.arrivals += 1;
        self.pending.insert((m.recv_time, m.id, self.arrivals), m);
    }

    fn last_key(&self) -> Option<(SimTime, MessageId)> {
        self.processed.last().map(|p| p.msg.key())
    }

    /// Undoes every processed event for which `undo` holds, newest first,
    /// stopping at the first that does not.
    fn undo_while(
        &mut self,
        to: SimTime,
        undo: impl Fn(&TwMessage<M::Payload>) -> bool,
    ) -> Result<RollbackReport<M::Payload>, RollbackError> {
        let from_lvt = self.lvt();
        if to < self.horizon {
            return Err(RollbackError::BelowHorizon {
                target: to,
                horizon: self.horizon,
            });
        }
        let mut antimessages = Vec::new();
        let mut undone = 0;
        while self.processed.last().is_some_and(|p| undo(&p.msg)) {
            let p = self.processed.pop().expect("checked");
            if p.msg.recv_time < self.horizon {
                return Err(RollbackError::BelowHorizon {
                    target: p.msg.recv_time,
                    horizon: self.horizon,
                });
            }
            self.state = p.before;
            antimessages.extend(p.outputs.iter().rev().map(|o| o.anti()));
            self.enqueue(p.msg);
            undone += 1;
        }
        antimessages.reverse();
        if undone > 0 {
            self.stats.rollbacks += 1;
            self.stats.undone += undone as u64;
            self.stats.antimessages += antimessages.len() as u64;
        }
        Ok(RollbackReport {
            from_lvt,
            to,
            undone,
            antimessages,
        })
    }

    /// Restores the state before every event received after `to`.
    pub fn rollback(&mut self, to: SimTime) -> Result<RollbackReport<M::Payload>, RollbackError> {
        self.undo_while(to, |m| m.recv_time > to)
    }

    /// Accepts a message or antimessage addressed to this LP.
    pub fn receive(
        &mut self,
        m: TwMessage<M::Payload>,
    ) -> Result<Receipt<M::Payload>, RollbackError> {
        debug_assert_eq!(m.dst, Some(self.id));
        if m.recv_time < self.horizon {
            return Err(RollbackError::BelowHorizon {
                target: m.recv_time,
                horizon: self.horizon,
            });
        }
        if !m.is_anti() {
            if let Some(i) = self.orphans.iter().position(|o| o.is_twin_of(&m)) {
                self.orphans.remove(i);
                self.stats.annihilated += 1;
                return Ok(Receipt {
                    rollback: None,
                    annihilated: true,
                });
            }
            let key = m.key();
            let rollback = match self.last_key() {
                Some(last) if key < last => Some(self.undo_while(m.recv_time, |p| p.key() > key)?),
                _ => None,
            };
            self.enqueue(m);
            return Ok(Receipt {
                rollback,
                annihilated: false,
            });
        }
        if let Some(k) = self
            .pending
            .iter()
            .find(|(_, p)| p.is_twin_of(&m))
            .map(|(k, _)| *k)
        {
            self.pending.remove(&k);
            self.stats.annihilated += 1;
            return Ok(Receipt {
                rollback: None,
                annihilated: true,
            });
        }
        if self.processed.iter().any(|p| p.msg.is_twin_of(&m)) {
            let key = m.key();
            let to = m
                .recv_time
                .saturating_sub(SimTime::from_millis(1))
                .max(self.horizon);
            let report = self.undo_while(to, |p| p.key() >= key)?;
            let k = self
                .pending
                .iter()
                .find(|(_, p)| p.is_twin_of(&m))
                .map(|(k, _)| *k)
                .expect("re-enqueued twin");
            self.pending.remove(&k);
            self.stats.annihilated += 1;
            return Ok(Receipt {
                rollback: Some(report),
                annihilated: true,
            });
        }
        self.orphans.push(m);
        Ok(Receipt {
            rollback: None,
            annihilated: false,
        })
    }

    /// Processes the earliest pending message, if any, returning its outputs.
    pub fn process_next(&mut self, model: &M) -> Option<Vec<TwMessage<M::Payload>>> {
        let (_, msg) = self.pending.pop_first()?;
        let before = self.state.clone();
        let now = msg.recv_time;
        let emits = model.handle(self.id, now, &mut self.state, &msg.payload);
        let outputs: Vec<_> = emits
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                assert!(
                    e.delay >= SimTime::from_millis(1),
                    "outputs must be delayed by at least 1 ms"
                );
                TwMessage {
                    id: msg.id.child(i as u32),
                    src: self.id,
                    dst: e.dst,
                    send_time: now,
                    recv_time: now + e.delay,
                    sign: Sign::Positive,
                    payload: e.payload,
                }
            })
            .collect();
        self.stats.processed += 1;
        self.processed.push(Processed {
            msg,
            before,
            outputs: outputs.clone(),
        });
        Some(outputs)
    }

    /// Processes pending messages with receive time up to `limit`.
    pub fn process_until(&mut self, model: &M, limit: SimTime) -> Vec<TwMessage<M::Payload>> {
        let mut out = Vec::new();
        while self.next_pending_time().is_some_and(|t| t <= limit) {
            out.extend(self.process_next(model).expect("pending"));
        }
        out
    }

    /// Frees history older than `horizon`; events before it become
    /// confirmed and can no longer be rolled back.
    pub fn fossil_collect(&mut self, horizon: SimTime) {
        if horizon <= self.horizon {
            return;
        }
        let keep = self
            .processed
            .partition_point(|p| p.msg.recv_time < horizon);
        if keep > 0 {
            self.horizon_lvt = self.processed[keep - 1].msg.recv_time;
            self.processed.drain(..keep);
        }
        self.horizon = horizon;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Appends every payload to a list.
    struct Recorder;

    impl Model for Recorder {
        type State = Vec<u32>;
        type Payload = u32;

        fn handle(&self, _: LpId, _: SimTime, s: &mut Vec<u32>, p: &u32) -> Vec<Emit<u32>> {
            s.push(*p);
            vec![Emit {
                dst: Some(LpId(1)),
                delay: SimTime::from_millis(5),
                payload: *p,
            }]
        }
    }

    fn msg(n: u64, t: u64, p: u32) -> TwMessage<u32> {
        TwMessage {
            id: MessageId::root(n),
            src: LpId(9),
            dst: Some(LpId(0)),
            send_time: SimTime::ZERO,
            recv_time: SimTime::from_millis(t),
            sign: Sign::Positive,
            payload: p,
        }
    }

    fn lp() -> LogicalProcess<Recorder> {
        LogicalProcess::new(LpId(0), Vec::new())
    }

    #[test]
    fn message_at_lvt_with_later_key_does_not_roll_back() {
        let mut l = lp();
        let a = msg(1, 10, 1);
        l.receive(a.clone()).unwrap();
        l.process_next(&Recorder);
        let b = (2..)
            .map(|n| msg(n, 10, 2))
            .find(|b| b.key() > a.key())
            .unwrap();
        let r = l.receive(b).unwrap();
        assert!(r.rollback.is_none());
        assert_eq!(l.lvt(), SimTime::from_millis(10));
    }

    #[test]
    fn straggler_rolls_back_past_later_events() {
        let mut l = lp();
        l.receive(msg(1, 10, 1)).unwrap();
        l.receive(msg(2, 20, 2)).unwrap();
        l.process_until(&Recorder, SimTime::MAX);
        assert_eq!(l.state(), &vec![1, 2]);
        let r = l.receive(msg(3, 15, 3)).unwrap();
        let rep = r.rollback.unwrap();
        assert_eq!(rep.undone, 1);
        assert_eq!(rep.antimessages.len(), 1);
        assert_eq!(rep.antimessages[0].recv_time, SimTime::from_millis(25));
        l.process_until(&Recorder, SimTime::MAX);
        assert_eq!(l.state(), &vec![1, 3, 2]);
    }

    #[test]
    fn rollback_counts_one_antimessage_per_output() {
        let mut l = lp();
        for (n, t) in [(1, 10), (2, 20), (3, 30)] {
            l.receive(msg(n, t, n as u32)).unwrap();
        }
        l.process_until(&Recorder, SimTime::MAX);
        let rep = l.rollback(SimTime::from_millis(10)).unwrap();
        assert_eq!(rep.antimessages.len(), 2);
        assert!(rep
            .antimessages
            .iter()
            .all(|a| a.is_anti() && a.send_time > SimTime::from_millis(10)));
        assert_eq!(l.state(), &vec![1]);
        assert_eq!(l.rollback(l.lvt()).unwrap().undone, 0);
    }

    #[test]
    fn antimessage_annihilates_unprocessed_twin() {
        let mut l = lp();
        l.receive(msg(1, 10, 1)).unwrap();
        let before = l.clone();
        let m = msg(2, 20, 2);
        l.receive(m.clone()).unwrap();
        let r = l.receive(m.anti()).unwrap();
        assert!(r.annihilated && r.rollback.is_none());
        assert_eq!(
            l.pending().collect::<Vec<_>>(),
            before.pending().collect::<Vec<_>>()
        );
    }

    #[test]
    fn antimessage_for_processed_twin_rolls_back() {
        let mut l = lp();
        let m = msg(1, 10, 1);
        l.receive(m.clone()).unwrap();
        l.receive(msg(2, 20, 2)).unwrap();
        l.process_until(&Recorder, SimTime::MAX);
        let r = l.receive(m.anti()).unwrap();
        assert_eq!(r.rollback.unwrap().undone, 2);
        l.process_until(&Recorder, SimTime::MAX);
        assert_eq!(l.state(), &vec![2]);
    }

    #[test]
    fn early_antimessage_waits_for_its_twin() {
        let mut l = lp();
        let m = msg(1, 10, 1);
        l.receive(m.anti()).unwrap();
        assert_eq!(l.orphans().len(), 1);
        assert!(l.receive(m).unwrap().annihilated);
        assert!(l.orphans().is_empty());
        assert_eq!(l.pending().count(), 0);
    }

    #[test]
    fn fossil_collection_keeps_rollbacks_above_horizon() {
        let mut l = lp();
        for (n, t) in [(1, 10), (2, 20), (3, 30)] {
            l.receive(msg(n, t, n as u32)).unwrap();
        }
        l.process_until(&Recorder, SimTime::MAX);
        l.fossil_collect(SimTime::from_millis(20));
        assert_eq!(
            l.snapshot_times().collect::<Vec<_>>(),
            vec![SimTime::from_millis(20), SimTime::from_millis(30)]
        );
        assert!(l.rollback(SimTime::from_millis(10)).is_err());
        assert_eq!(l.rollback(SimTime::from_millis(20)).unwrap().undone, 1);
        assert_eq!(l.rollback(SimTime::from_millis(20)).unwrap().undone, 0);
        l.rollback(SimTime::from_millis(25)).unwrap();
        assert_eq!(l.state(), &vec![1, 2]);
    }
}
