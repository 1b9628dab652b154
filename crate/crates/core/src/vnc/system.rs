use std::collections::BTreeMap;
use std::fmt::{self, Debug};

use super::gvt::{update_gvt, GvtState};
use super::lp::{LogicalProcess, LpId, Model, RollbackError, RollbackReport, Sign, TwMessage};
use super::tolerance::Tolerance;
use super::MessageId;
use crate::domain::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollbackRecord {
    pub lp: LpId,
    pub from_lvt: SimTime,
    pub to: SimTime,
    pub antimessages: usize,
}

impl fmt::Display for RollbackRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ROLLBACK lp{} {} {} antimessages={}",
            self.lp.0,
            self.from_lvt.as_millis(),
            self.to.as_millis(),
            self.antimessages
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verification {
    /// No external output is due at this real time.
    NoPrediction,
    Confirmed,
    RolledBack(RollbackRecord),
}

/// A set of LPs sharing one model, with an explicit in-flight pool so
/// callers control delivery order.
#[derive(Debug, Clone)]
pub struct TimeWarp<M: Model> {
    model: M,
    lps: Vec<LogicalProcess<M>>,
    in_flight: Vec<TwMessage<M::Payload>>,
    gvt: GvtState,
    injected: u64,
    rollbacks: Vec<RollbackRecord>,
}

impl<M: Model> TimeWarp<M> {
    pub fn new(model: M, states: impl IntoIterator<Item = M::State>) -> Self {
        let lps = states
            .into_iter()
            .enumerate()
            .map(|(i, s)| LogicalProcess::new(LpId(i as u32), s))
            .collect();
        TimeWarp {
            model,
            lps,
            in_flight: Vec::new(),
            gvt: GvtState::default(),
            injected: 0,
            rollbacks: Vec::new(),
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn lp(&self, id: LpId) -> &LogicalProcess<M> {
        &self.lps[id.0 as usize]
    }

    pub fn lps(&self) -> &[LogicalProcess<M>] {
        &self.lps
    }

    pub fn in_flight(&self) -> &[TwMessage<M::Payload>] {
        &self.in_flight
    }

    pub fn gvt(&self) -> &GvtState {
        &self.gvt
    }

    pub fn rollbacks(&self) -> &[RollbackRecord] {
        &self.rollbacks
    }

    /// Adds an external message for `dst`, received at `at`.
    pub fn inject(&mut self, dst: LpId, at: SimTime, payload: M::Payload) -> MessageId {
        let id = MessageId::root(self.injected);
        self.injected += 1;
        self.in_flight.push(TwMessage {
            id,
            src: dst,
            dst: Some(dst),
            send_time: at,
            recv_time: at,
            sign: Sign::Positive,
            payload,
        });
        id
    }

    fn record(&mut self, lp: LpId, r: RollbackReport<M::Payload>) -> RollbackRecord {
        let rec = RollbackRecord {
            lp,
            from_lvt: r.from_lvt,
            to: r.to,
            antimessages: r.antimessages.len(),
        };
        self.rollbacks.push(rec);
        self.in_flight
            .extend(r.antimessages.into_iter().filter(|a| a.dst.is_some()));
        rec
    }

    /// Delivers the `i`th in-flight message.
    pub fn deliver(&mut self, i: usize) -> Result<(), RollbackError> {
        let m = self.in_flight.remove(i);
        let dst = m.dst.expect("only addressed messages fly");
        let receipt = self.lps[dst.0 as usize].receive(m)?;
        if let Some(r) = receipt.rollback {
            if r.undone > 0 {
                self.record(dst, r);
            }
        }
        Ok(())
    }

    /// Processes pending messages of `lp` up to `limit`.
    pub fn process(&mut self, lp: LpId, limit: SimTime) {
        let out = self.lps[lp.0 as usize].process_until(&self.model, limit);
        self.in_flight
            .extend(out.into_iter().filter(|m| m.dst.is_some()));
    }

    /// Delivers in FIFO order and processes every LP up to `limit` until
    /// nothing more can happen below it.
    pub fn run_until(&mut self, limit: SimTime) -> Result<(), RollbackError> {
        loop {
            while !self.in_flight.is_empty() {
                self.deliver(0)?;
            }
            for i in 0..self.lps.len() {
                self.process(LpId(i as u32), limit);
            }
            if self.in_flight.is_empty() {
                return Ok(());
            }
        }
    }

    pub fn is_quiescent(&self) -> bool {
        self.in_flight.is_empty() && self.lps.iter().all(|l| l.next_pending_time().is_none())
    }

    /// Antimessages still waiting for their twin, in flight or parked.
    pub fn unmatched_antimessages(&self) -> usize {
        self.in_flight.iter().filter(|m| m.is_anti()).count()
            + self.lps.iter().map(|l| l.orphans().len()).sum::<usize>()
    }

    /// Recomputes GVT and fossil-collects. History back to the send time
    /// of every external output not yet due is retained so that
    /// [`TimeWarp::verify_real`] can always roll back.
    pub fn update_gvt(&mut self, real_time: SimTime) -> SimTime {
        let reports: BTreeMap<u32, SimTime> = self
            .lps
            .iter()
            .map(|l| (l.id().0, l.next_pending_time().unwrap_or(SimTime::MAX)))
            .collect();
        self.gvt = update_gvt(
            &self.gvt,
            &reports,
            self.in_flight.iter().map(|m| m.recv_time),
            real_time,
        );
        let gvt = self.gvt.gvt;
        for l in &mut self.lps {
            let keep = l
                .outputs()
                .filter(|o| o.dst.is_none() && o.recv_time >= real_time)
                .map(|o| o.send_time)
                .min()
                .unwrap_or(SimTime::MAX);
            l.fossil_collect(gvt.min(keep));
        }
        gvt
    }

    /// Checks the external outputs of `lp` due at `real_time` against an
    /// observation. A mismatch rolls the LP back to the send time of the
    /// earliest wrong prediction.
    pub fn verify_real<V, T: Tolerance<V>>(
        &mut self,
        lp: LpId,
        real_time: SimTime,
        tolerance: &T,
        actual: &V,
        extract: impl Fn(&M::Payload) -> Option<V>,
    ) -> Result<Verification, RollbackError> {
        let l = &self.lps[lp.0 as usize];
        let due: Vec<(SimTime, V)> = l
            .outputs()
            .filter(|o| o.dst.is_none() && o.recv_time == real_time)
            .filter_map(|o| extract(&o.payload).map(|v| (o.send_time, v)))
            .collect();
        if due.is_empty() {
            return Ok(Verification::NoPrediction);
        }
        let Some(to) = due
            .iter()
            .filter(|(_, v)| !tolerance.accepts(v, actual))
            .map(|(t, _)| *t)
            .min()
        else {
            return Ok(Verification::Confirmed);
        };
        let r = self.lps[lp.0 as usize].rollback(to)?;
        Ok(Verification::RolledBack(self.record(lp, r)))
    }
}

impl<M: Model> TimeWarp<M>
where
    M::State: Debug,
{
    /// Canonical description of the whole system, for state-space search.
    pub fn fingerprint(&self) -> String {
        let mut flying: Vec<String> = self.in_flight.iter().map(|m| format!("{m:?}")).collect();
        flying.sort();
        let lps: Vec<String> = self
            .lps
            .iter()
            .map(|l| {
                let mut pend: Vec<String> = l.pending().map(|m| format!("{m:?}")).collect();
                pend.sort();
                let mut orph: Vec<String> = l.orphans().iter().map(|m| format!("{m:?}")).collect();
                orph.sort();
                format!(
                    "{:?}|{:?}|{pend:?}|{orph:?}|{:?}",
                    l.state(),
                    l.snapshot_times().collect::<Vec<_>>(),
                    l.horizon()
                )
            })
            .collect();
        format!("{lps:?}#{flying:?}#{:?}", self.gvt.gvt)
    }
}

impl<A, B, VA, VB> Tolerance<(VA, VB)> for (A, B)
where
    A: Tolerance<VA>,
    B: Tolerance<VB>,
{
    fn accepts(&self, predicted: &(VA, VB), actual: &(VA, VB)) -> bool {
        self.0.accepts(&predicted.0, &actual.0) && self.1.accepts(&predicted.1, &actual.1)
    }
}
