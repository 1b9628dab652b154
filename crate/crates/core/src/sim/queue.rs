use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::domain::SimTime;

/// Index of a simulated node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Event<A> {
    pub time: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub action: A,
}

// Heap entries are ordered by (time, seq) only, reversed for a min-heap.
struct Entry<A>(Event<A>);

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        (self.0.time, self.0.seq) == (other.0.time, other.0.seq)
    }
}
impl<A> Eq for Entry<A> {}
impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<A> Ord for Entry<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.time, other.0.seq).cmp(&(self.0.time, self.0.seq))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("event scheduled at {at} but the clock is already at {now}")]
pub struct ScheduleInPast {
    pub at: SimTime,
    pub now: SimTime,
}

/// Deterministic event queue. Events dispatch in (time, seq) order where
/// `seq` is assigned at schedule time, so equal-time events keep schedule
/// order.
pub struct EventQueue<A> {
    heap: BinaryHeap<Entry<A>>,
    now: SimTime,
    next_seq: u64,
    dispatched: u64,
}

impl<A> Default for EventQueue<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> EventQueue<A> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn schedule(
        &mut self,
        time: SimTime,
        target: NodeId,
        action: A,
    ) -> Result<u64, ScheduleInPast> {
        if time < self.now {
            return Err(ScheduleInPast {
                at: time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event {
            time,
            seq,
            target,
            action,
        }));
        Ok(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, target: NodeId, action: A) -> u64 {
        let at = self.now + delay;
        self.schedule(at, target, action)
            .expect("a non-negative delay is never in the past")
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0.time)
    }

    /// Removes the next event if it is due at or before `limit`.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<Event<A>> {
        if self.peek_time()? > limit {
            return None;
        }
        let Entry(ev) = self.heap.pop()?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        self.dispatched += 1;
        Some(ev)
    }

    /// Dispatches every event with time ≤ `limit`, letting the handler
    /// schedule more. Returns the number dispatched; afterwards the clock
    /// reads `limit` unless it was already past it.
    pub fn run_until<F>(&mut self, limit: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, Event<A>),
    {
        let mut n = 0;
        while let Some(ev) = self.pop_until(limit) {
            handler(self, ev);
            n += 1;
        }
        if self.now < limit {
            self.now = limit;
        }
        n
    }
}
