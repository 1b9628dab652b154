use std::collections::{BTreeMap, BTreeSet};

use super::election::{elect_master, handoff_check, mycall_backoff};
use super::{Action, Ctx, Note, TimerKind, Via};
use crate::domain::{
    Callsign, FrequencyId, GeoPosition, HandoffPayload, Payload, SimTime, SlotId,
    SwitchPositionTable, TopologyLink, UserPositionTable,
};
use crate::topology::{
    allocate_beams, nearest_neighbor_topology, solve_topology, BeamPlan, TopologySolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EsPhase {
    Booting,
    AwaitingPeers,
    Master,
    Slave,
    Configured,
}

impl EsPhase {
    pub fn name(self) -> &'static str {
        match self {
            EsPhase::Booting => "Booting",
            EsPhase::AwaitingPeers => "AwaitingPeers",
            EsPhase::Master => "Master",
            EsPhase::Slave => "Slave",
            EsPhase::Configured => "Configured",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EsEvent {
    Boot {
        position: GeoPosition,
    },
    Timer(TimerKind),
    Received {
        from: Callsign,
        via: Via,
        payload: Payload,
    },
    PositionFix(GeoPosition),
    MasterFailed(Callsign),
}

impl EsEvent {
    pub fn name(&self) -> String {
        match self {
            EsEvent::Boot { .. } => "boot".into(),
            EsEvent::Timer(t) => format!("timer:{t}"),
            EsEvent::Received { payload, .. } => format!("rx:{}", payload.kind()),
            EsEvent::PositionFix(_) => "gps".into(),
            EsEvent::MasterFailed(_) => "master_failed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsState {
    pub callsign: Callsign,
    pub phase: EsPhase,
    pub startup_time: SimTime,
    pub position: GeoPosition,
    /// Position last reported to the master (or used in the switch table).
    pub announced: GeoPosition,
    /// Current MYCALL timer T.
    pub mycall_timer: SimTime,
    alone_rounds: u8,
    /// Startup times of every ES whose MYCALL was heard.
    pub mycall_seen: BTreeMap<Callsign, SimTime>,
    pub master: Option<Callsign>,
    pub switch_table: SwitchPositionTable,
    pub user_table: UserPositionTable,
    pub topology: Option<TopologySolution>,
    pub beam_plan: Option<BeamPlan>,
    pub assignments: BTreeMap<Callsign, (FrequencyId, SlotId)>,
    /// Master: ESs that owe a SWITCHPOS.
    pub awaiting: BTreeSet<Callsign>,
    /// Master: discovery window still open.
    pub window_open: bool,
    computing: bool,
    dirty: bool,
    /// Master: a configuration round is in progress.
    pub reconfiguring: bool,
    /// Slave: NEWSWITCH received from the current master.
    pub got_newswitch: bool,
}

impl EsState {
    pub fn new(callsign: Callsign, mycall_timer: SimTime) -> Self {
        EsState {
            callsign,
            phase: EsPhase::Booting,
            startup_time: SimTime::ZERO,
            position: GeoPosition::ORIGIN,
            announced: GeoPosition::ORIGIN,
            mycall_timer,
            alone_rounds: 0,
            mycall_seen: BTreeMap::new(),
            master: None,
            switch_table: SwitchPositionTable::new(),
            user_table: UserPositionTable::new(),
            topology: None,
            beam_plan: None,
            assignments: BTreeMap::new(),
            awaiting: BTreeSet::new(),
            window_open: false,
            computing: false,
            dirty: false,
            reconfiguring: false,
            got_newswitch: false,
        }
    }

    fn older_than_me(&self, startup: SimTime, callsign: &Callsign) -> bool {
        (startup, callsign) < (self.startup_time, &self.callsign)
    }

    fn master_startup(&self) -> Option<SimTime> {
        self.master
            .as_ref()
            .and_then(|m| self.mycall_seen.get(m).copied())
    }
}

struct Step<'c, 'p> {
    s: EsState,
    out: Vec<Action>,
    ctx: &'c Ctx<'p>,
}

/// Advances one ES by one event.
pub fn step_es(s: EsState, ev: &EsEvent, ctx: &Ctx<'_>) -> (EsState, Vec<Action>) {
    let mut st = Step {
        s,
        out: Vec::new(),
        ctx,
    };
    st.dispatch(ev);
    (st.s, st.out)
}

impl Step<'_, '_> {
    fn now(&self) -> SimTime {
        self.ctx.now
    }

    fn arm(&mut self, timer: TimerKind, after: SimTime) {
        self.out.push(Action::Arm { timer, after });
    }

    fn cancel(&mut self, timer: TimerKind) {
        self.out.push(Action::Cancel(timer));
    }

    fn note(&mut self, n: Note) {
        self.out.push(Action::Note(n));
    }

    fn send(&mut self, to: &Callsign, payload: Payload) {
        self.out.push(Action::Send {
            to: to.clone(),
            payload,
        });
    }

    fn mycall(&self) -> Payload {
        Payload::MyCall {
            callsign: self.s.callsign.clone(),
            startup: self.s.startup_time,
        }
    }

    fn broadcast_mycall(&mut self) {
        let p = self.mycall();
        self.out.push(Action::Broadcast(p));
    }

    fn dispatch(&mut self, ev: &EsEvent) {
        match ev {
            EsEvent::Boot { position } => self.boot(*position),
            EsEvent::Timer(t) => self.timer(t),
            EsEvent::Received { from, via, payload } => self.received(from, *via, payload),
            EsEvent::PositionFix(p) => self.position_fix(*p),
            EsEvent::MasterFailed(m) => self.master_failed(m),
        }
    }

    fn boot(&mut self, position: GeoPosition) {
        if self.s.phase != EsPhase::Booting {
            self.note(Note::Ignored("already_booted"));
            return;
        }
        self.s.phase = EsPhase::AwaitingPeers;
        self.s.startup_time = self.now();
        self.s.position = position;
        self.s.announced = position;
        self.broadcast_mycall();
        let t = self.s.mycall_timer;
        self.arm(TimerKind::MyCall, t);
    }

    fn timer(&mut self, t: &TimerKind) {
        match t {
            TimerKind::MyCall => self.mycall_timer(),
            TimerKind::Beacon => {
                if self.s.phase == EsPhase::Master {
                    self.broadcast_mycall();
                    let base = self.ctx.params.mycall_timer;
                    self.arm(TimerKind::Beacon, base);
                }
            }
            TimerKind::NewswitchRetry(c) => {
                if self.ctx.params.fixes
                    && self.s.phase == EsPhase::Master
                    && self.s.awaiting.contains(c)
                {
                    self.send(c, Payload::NewSwitch);
                    let retry = self.ctx.params.newswitch_retry;
                    self.arm(TimerKind::NewswitchRetry(c.clone()), retry);
                }
            }
            TimerKind::TopologyWait => {
                if matches!(self.s.phase, EsPhase::Slave | EsPhase::Configured)
                    && self.s.topology.is_none()
                {
                    if let Some(m) = self.s.master.clone() {
                        self.send_switchpos(&m);
                    }
                }
            }
            TimerKind::TopologyDone => self.topology_done(),
            TimerKind::RnRetry | TimerKind::PosUpdate => self.note(Note::Ignored("rn_timer")),
        }
    }

    fn mycall_timer(&mut self) {
        match self.s.phase {
            EsPhase::AwaitingPeers => {
                if self.s.mycall_seen.is_empty() {
                    self.s.alone_rounds += 1;
                    if self.s.alone_rounds < 2 {
                        self.broadcast_mycall();
                        let t = self.s.mycall_timer;
                        self.arm(TimerKind::MyCall, t);
                    } else {
                        self.become_master();
                    }
                    return;
                }
                let mut cands = self.s.mycall_seen.clone();
                cands.insert(self.s.callsign.clone(), self.s.startup_time);
                let winner = elect_master(&cands).expect("non-empty");
                if winner == self.s.callsign {
                    self.become_master();
                } else {
                    self.become_slave(winner);
                }
            }
            EsPhase::Slave if !self.s.got_newswitch => {
                self.broadcast_mycall();
                let t = self.s.mycall_timer;
                self.arm(TimerKind::MyCall, t);
            }
            EsPhase::Master => {
                self.s.window_open = false;
                self.maybe_start_topology();
            }
            _ => {}
        }
    }

    fn become_master(&mut self) {
        self.s.phase = EsPhase::Master;
        self.s.master = Some(self.s.callsign.clone());
        self.s.switch_table.clear();
        let (me, pos, now) = (self.s.callsign.clone(), self.s.position, self.now());
        self.s.switch_table.insert(me, pos, now);
        self.s.announced = pos;
        self.s.window_open = false;
        self.s.reconfiguring = true;
        self.s.topology = None;
        self.note(Note::BecameMaster);
        let base = self.ctx.params.mycall_timer;
        self.arm(TimerKind::Beacon, base);
        let peers: Vec<Callsign> = self.s.mycall_seen.keys().cloned().collect();
        for p in peers {
            self.invite(&p);
        }
        self.maybe_start_topology();
    }

    /// Opens a link to `c` and asks for its position.
    fn invite(&mut self, c: &Callsign) {
        self.s.awaiting.insert(c.clone());
        self.out.push(Action::OpenLink(c.clone()));
        self.send(c, Payload::NewSwitch);
        if self.ctx.params.fixes {
            let retry = self.ctx.params.newswitch_retry;
            self.arm(TimerKind::NewswitchRetry(c.clone()), retry);
        }
        if self.s.computing {
            self.s.dirty = true;
        }
    }

    fn become_slave(&mut self, master: Callsign) {
        self.s.phase = EsPhase::Slave;
        self.s.master = Some(master.clone());
        self.s.got_newswitch = false;
        self.s.topology = None;
        self.s.switch_table.clear();
        let (me, pos, now) = (self.s.callsign.clone(), self.s.position, self.now());
        self.s.switch_table.insert(me, pos, now);
        self.note(Note::BecameSlave { master });
        let t = self.s.mycall_timer;
        self.arm(TimerKind::MyCall, t);
    }

    /// Leaves the master role for an older ES.
    fn demote(&mut self, by: Callsign) {
        for c in std::mem::take(&mut self.s.awaiting) {
            self.cancel(TimerKind::NewswitchRetry(c));
        }
        self.cancel(TimerKind::Beacon);
        self.cancel(TimerKind::TopologyDone);
        self.s.computing = false;
        self.s.window_open = false;
        self.s.reconfiguring = false;
        self.note(Note::Demoted { by: by.clone() });
        self.become_slave(by);
        self.broadcast_mycall();
    }

    /// Starts (or restarts) a configuration round at the master.
    fn start_reconfiguration(&mut self) {
        let params = self.ctx.params;
        if !self.s.window_open {
            // The change arrived after the window closed: back off.
            let cap = params.mycall_timer * params.backoff_cap as u64;
            self.s.mycall_timer =
                mycall_backoff(self.s.mycall_timer, params.backoff_factor).min(cap);
        }
        let overlapping = self.s.reconfiguring;
        self.s.reconfiguring = true;
        self.s.window_open = true;
        if self.s.computing {
            self.s.dirty = true;
        }
        let t = self.s.mycall_timer;
        self.note(Note::ReconfigStart {
            overlapping,
            mycall_timer: t,
        });
        self.arm(TimerKind::MyCall, t);
    }

    fn maybe_start_topology(&mut self) {
        if self.s.phase != EsPhase::Master
            || self.s.window_open
            || !self.s.awaiting.is_empty()
            || self.s.computing
        {
            return;
        }
        let params = self.ctx.params;
        let n = self.s.switch_table.len();
        let r = candidate_links(&self.s.switch_table, params.constraints.rlink);
        let cost = params.topology_cost(n, r);
        if cost == SimTime::ZERO {
            self.finish_topology();
        } else {
            self.s.computing = true;
            self.s.dirty = false;
            self.arm(TimerKind::TopologyDone, cost);
        }
    }

    fn topology_done(&mut self) {
        if self.s.phase != EsPhase::Master || !self.s.computing {
            return;
        }
        self.s.computing = false;
        if self.s.dirty || self.s.window_open || !self.s.awaiting.is_empty() {
            self.s.dirty = false;
            self.maybe_start_topology();
            return;
        }
        self.finish_topology();
    }

    fn finish_topology(&mut self) {
        let c = &self.ctx.params.constraints;
        let solved = if self.ctx.params.use_real_topology {
            solve_topology(&self.s.switch_table, c).map(|(s, _)| s)
        } else {
            nearest_neighbor_topology(&self.s.switch_table, c)
        };
        let sol = match solved {
            Ok(sol) => sol,
            Err(e) => {
                self.note(Note::TopologyInfeasible(e.to_string()));
                let nodes = self
                    .s
                    .switch_table
                    .iter()
                    .map(|(c, e)| (c.clone(), e.position))
                    .collect();
                TopologySolution {
                    nodes,
                    links: Vec::new(),
                }
            }
        };
        let payload = topology_payload(&sol);
        let slaves: Vec<Callsign> = self
            .s
            .switch_table
            .callsigns()
            .filter(|c| **c != self.s.callsign)
            .cloned()
            .collect();
        for c in &slaves {
            self.send(c, payload.clone());
        }
        let links = sol.links.len();
        self.s.topology = Some(sol);
        self.s.reconfiguring = false;
        self.note(Note::ConfigComplete { links });
    }

    fn send_switchpos(&mut self, master: &Callsign) {
        self.s.announced = self.s.position;
        let p = Payload::SwitchPos {
            time: self.now(),
            position: self.s.position,
        };
        self.send(master, p);
        if self.ctx.params.fixes {
            let n = self.s.mycall_seen.len() + 1;
            let params = self.ctx.params;
            let wait = params.topology_cost(n, n * (n - 1) / 2) + SimTime::from_secs(1);
            self.arm(TimerKind::TopologyWait, wait);
        }
    }

    fn received(&mut self, from: &Callsign, via: Via, payload: &Payload) {
        match payload {
            Payload::MyCall { callsign, startup } => self.on_mycall(callsign, *startup),
            Payload::NewSwitch => self.on_newswitch(from),
            Payload::SwitchPos { position, .. } => self.on_switchpos(from, *position),
            Payload::Topology { nodes, links } => self.on_topology(from, nodes, links),
            Payload::UserPos {
                callsign, position, ..
            } => self.on_user_pos(callsign, via, *position),
            Payload::Handoff(_) => self.note(Note::Ignored("handoff_at_es")),
            Payload::GvtUpdate { .. } => {}
        }
    }

    fn on_mycall(&mut self, c: &Callsign, startup: SimTime) {
        if *c == self.s.callsign {
            return;
        }
        match self.s.phase {
            EsPhase::Booting => {}
            EsPhase::AwaitingPeers => {
                self.s.mycall_seen.insert(c.clone(), startup);
            }
            EsPhase::Master => {
                self.s.mycall_seen.insert(c.clone(), startup);
                if self.s.older_than_me(startup, c) {
                    self.demote(c.clone());
                    return;
                }
                if self.s.awaiting.contains(c) {
                    // NEWSWITCH already outstanding; only the retry timer resends.
                    return;
                }
                self.start_reconfiguration();
                self.invite(c);
            }
            EsPhase::Slave | EsPhase::Configured => {
                self.s.mycall_seen.insert(c.clone(), startup);
                // An unknown master startup is bounded only by our own.
                let master_older = match (self.s.master.as_ref(), self.s.master_startup()) {
                    (Some(m), Some(ms)) => (startup, c) < (ms, m),
                    (Some(m), None) => m != c && self.s.older_than_me(startup, c),
                    (None, _) => false,
                };
                if master_older {
                    // An older ES is reachable; follow it.
                    self.become_slave(c.clone());
                    self.broadcast_mycall();
                }
            }
        }
    }

    fn on_newswitch(&mut self, from: &Callsign) {
        match self.s.phase {
            EsPhase::Booting => self.note(Note::Ignored("newswitch_before_boot")),
            EsPhase::Master => {
                // Another master only invites ESs it considers younger.
                self.demote(from.clone());
                self.accept_newswitch(from);
            }
            EsPhase::AwaitingPeers => {
                self.cancel(TimerKind::MyCall);
                self.s.phase = EsPhase::Slave;
                self.s.master = Some(from.clone());
                self.s.switch_table.clear();
                let (me, pos, now) = (self.s.callsign.clone(), self.s.position, self.now());
                self.s.switch_table.insert(me, pos, now);
                self.note(Note::BecameSlave {
                    master: from.clone(),
                });
                self.accept_newswitch(from);
            }
            EsPhase::Slave | EsPhase::Configured => {
                if self.s.master.as_ref() != Some(from) {
                    let newer = self.s.mycall_seen.get(from).copied();
                    let known_younger =
                        match (newer, self.s.master_startup(), self.s.master.as_ref()) {
                            (Some(n), Some(c), Some(m)) => (c, m) < (n, from),
                            _ => false,
                        };
                    if known_younger {
                        // The current master is older; the younger one is demoted by its beacon.
                        self.note(Note::Ignored("newswitch_from_younger_master"));
                        return;
                    }
                    self.s.master = Some(from.clone());
                    self.s.topology = None;
                    self.s.phase = EsPhase::Slave;
                }
                self.accept_newswitch(from);
            }
        }
    }

    fn accept_newswitch(&mut self, from: &Callsign) {
        self.s.got_newswitch = true;
        self.send_switchpos(from);
    }

    fn on_switchpos(&mut self, from: &Callsign, position: GeoPosition) {
        if self.s.phase != EsPhase::Master {
            self.note(Note::Ignored("switchpos_at_non_master"));
            return;
        }
        let now = self.now();
        if self.s.awaiting.remove(from) {
            self.cancel(TimerKind::NewswitchRetry(from.clone()));
            self.s.switch_table.insert(from.clone(), position, now);
            if self.s.computing {
                self.s.dirty = true;
            }
            self.maybe_start_topology();
            return;
        }
        let unchanged = self.s.switch_table.position(from) == Some(position);
        if unchanged {
            // A slave that missed TOPOLOGY asks again.
            if let (Some(sol), false) = (&self.s.topology, self.s.reconfiguring) {
                let p = topology_payload(sol);
                self.send(from, p);
            }
            return;
        }
        self.s.switch_table.insert(from.clone(), position, now);
        self.start_reconfiguration();
    }

    fn on_topology(
        &mut self,
        from: &Callsign,
        nodes: &[(Callsign, GeoPosition)],
        links: &[TopologyLink],
    ) {
        let from_master = self.s.master.as_ref() == Some(from);
        if !matches!(self.s.phase, EsPhase::Slave | EsPhase::Configured) || !from_master {
            self.note(Note::Ignored("unexpected_topology"));
            return;
        }
        let now = self.now();
        self.s.switch_table.clear();
        for (c, p) in nodes {
            self.s.switch_table.insert(c.clone(), *p, now);
        }
        let (me, pos) = (self.s.callsign.clone(), self.s.position);
        self.s.switch_table.insert(me, pos, now);
        self.s.topology = Some(TopologySolution {
            nodes: nodes.to_vec(),
            links: links.to_vec(),
        });
        self.s.phase = EsPhase::Configured;
        self.cancel(TimerKind::TopologyWait);
        self.note(Note::TopologyReceived);
    }

    fn on_user_pos(&mut self, rn: &Callsign, via: Via, position: GeoPosition) {
        if matches!(self.s.phase, EsPhase::Booting | EsPhase::AwaitingPeers) {
            return;
        }
        if self.ctx.params.fixes && self.s.topology.is_none() {
            if !self.s.user_table.contains(rn) {
                self.note(Note::Refused { rn: rn.clone() });
            }
            return;
        }
        let now = self.now();
        if self.s.user_table.contains(rn) {
            self.s.user_table.insert(rn.clone(), position, now);
            let me = self.s.callsign.clone();
            if let Some(next) = handoff_check(
                &me,
                &self.s.switch_table,
                position,
                self.ctx.params.tolerance,
            ) {
                self.s.user_table.remove(rn);
                self.s.assignments.remove(rn);
                self.send(
                    rn,
                    Payload::Handoff(HandoffPayload::Redirect {
                        callsign: next.clone(),
                    }),
                );
                self.note(Note::HandoffInitiated {
                    rn: rn.clone(),
                    to: next,
                });
            }
            self.replan(None);
            return;
        }
        if via == Via::Broadcast {
            let nearest = self
                .s
                .switch_table
                .by_distance_from(position)
                .into_iter()
                .next()
                .map(|(c, _)| c);
            if nearest.as_ref() != Some(&self.s.callsign) {
                return;
            }
        }
        self.try_associate(rn, position);
    }

    fn try_associate(&mut self, rn: &Callsign, position: GeoPosition) {
        let mut tentative = self.s.user_table.clone();
        tentative.insert(rn.clone(), position, self.now());
        let p = self.ctx.params;
        match allocate_beams(
            self.s.position,
            &tentative,
            &p.constraints,
            p.max_beams,
            p.slots_per_beam,
        ) {
            Ok(plan) => {
                self.s.user_table = tentative;
                self.out.push(Action::OpenLink(rn.clone()));
                let has_topology = self.s.topology.is_some();
                self.note(Note::Associated {
                    rn: rn.clone(),
                    has_topology,
                });
                self.apply_plan(plan, None);
            }
            Err(_) => {
                let me = self.s.callsign.clone();
                let next = self
                    .s
                    .switch_table
                    .by_distance_from(position)
                    .into_iter()
                    .map(|(c, _)| c)
                    .find(|c| *c != me);
                match next {
                    Some(next) => {
                        self.out.push(Action::OpenLink(rn.clone()));
                        self.send(
                            rn,
                            Payload::Handoff(HandoffPayload::Redirect {
                                callsign: next.clone(),
                            }),
                        );
                        self.note(Note::Redirected {
                            rn: rn.clone(),
                            to: next,
                        });
                    }
                    None => self.note(Note::Rejected { rn: rn.clone() }),
                }
            }
        }
    }

    /// Recomputes the beam plan for the current user table. RNs that no
    /// longer fit are redirected.
    fn replan(&mut self, force_notify: Option<()>) {
        let p = self.ctx.params;
        match allocate_beams(
            self.s.position,
            &self.s.user_table,
            &p.constraints,
            p.max_beams,
            p.slots_per_beam,
        ) {
            Ok(plan) => self.apply_plan(plan, force_notify),
            Err(_) => {
                // Shed RNs farthest first until the rest fit.
                let me = self.s.callsign.clone();
                let mut by_dist = self.s.user_table.by_distance_from(self.s.position);
                while let Some((rn, _)) = by_dist.pop() {
                    let pos = self.s.user_table.position(&rn).expect("listed");
                    self.s.user_table.remove(&rn);
                    self.s.assignments.remove(&rn);
                    if let Some(next) = self
                        .s
                        .switch_table
                        .by_distance_from(pos)
                        .into_iter()
                        .map(|(c, _)| c)
                        .find(|c| *c != me)
                    {
                        self.send(
                            &rn,
                            Payload::Handoff(HandoffPayload::Redirect {
                                callsign: next.clone(),
                            }),
                        );
                        self.note(Note::Redirected { rn, to: next });
                    }
                    if let Ok(plan) = allocate_beams(
                        self.s.position,
                        &self.s.user_table,
                        &p.constraints,
                        p.max_beams,
                        p.slots_per_beam,
                    ) {
                        self.apply_plan(plan, force_notify);
                        return;
                    }
                }
            }
        }
    }

    /// Installs `plan` and sends HANDOFF to every RN whose (frequency,
    /// slot) changed, or to all when `force_notify` is set.
    fn apply_plan(&mut self, plan: BeamPlan, force_notify: Option<()>) {
        let mut next = BTreeMap::new();
        for (beam, slot, rn) in plan.links() {
            next.insert(rn.clone(), (plan.beams[beam].frequency, slot));
        }
        for (rn, fs) in &next {
            if force_notify.is_some() || self.s.assignments.get(rn) != Some(fs) {
                let p = Payload::Handoff(HandoffPayload::Assign {
                    frequency: fs.0,
                    slot: fs.1,
                    es_position: self.s.position,
                    replacement_vcis: Vec::new(),
                });
                self.send(rn, p);
            }
        }
        self.s.assignments = next;
        self.s.beam_plan = Some(plan);
    }

    fn position_fix(&mut self, p: GeoPosition) {
        self.s.position = p;
        let moved = p.distance_to(&self.s.announced);
        if moved <= self.ctx.params.tolerance || moved == 0.0 {
            return;
        }
        match self.s.phase {
            EsPhase::Master => {
                self.s.announced = p;
                let (me, now) = (self.s.callsign.clone(), self.now());
                self.s.switch_table.insert(me, p, now);
                self.start_reconfiguration();
                self.replan(Some(()));
            }
            EsPhase::Slave | EsPhase::Configured => {
                self.s.announced = p;
                let (me, now) = (self.s.callsign.clone(), self.now());
                self.s.switch_table.insert(me, p, now);
                self.broadcast_mycall();
                self.replan(Some(()));
            }
            EsPhase::Booting | EsPhase::AwaitingPeers => {
                self.s.announced = p;
            }
        }
    }

    fn master_failed(&mut self, m: &Callsign) {
        let affected = match self.s.phase {
            EsPhase::Slave | EsPhase::Configured => self.s.master.as_ref() == Some(m),
            EsPhase::AwaitingPeers => true,
            _ => false,
        };
        self.s.mycall_seen.remove(m);
        if !affected {
            return;
        }
        self.cancel(TimerKind::TopologyWait);
        self.s.phase = EsPhase::AwaitingPeers;
        self.s.master = None;
        self.s.mycall_seen.clear();
        self.s.alone_rounds = 0;
        self.s.switch_table.clear();
        self.s.topology = None;
        self.s.got_newswitch = false;
        self.note(Note::MasterLost { master: m.clone() });
        self.broadcast_mycall();
        let t = self.s.mycall_timer;
        self.arm(TimerKind::MyCall, t);
    }
}

fn candidate_links(table: &SwitchPositionTable, rlink: f64) -> usize {
    let pts: Vec<GeoPosition> = table.iter().map(|(_, e)| e.position).collect();
    let mut r = 0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[i].distance_to(&pts[j]) <= rlink {
                r += 1;
            }
        }
    }
    r
}

pub(crate) fn topology_payload(sol: &TopologySolution) -> Payload {
    Payload::Topology {
        nodes: sol.nodes.clone(),
        links: sol.links.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncp::NcpParams;

    fn cs(s: &str) -> Callsign {
        Callsign::new(s).unwrap()
    }

    fn run(s: EsState, ev: EsEvent, now: u64, p: &NcpParams) -> (EsState, Vec<Action>) {
        step_es(
            s,
            &ev,
            &Ctx {
                now: SimTime::from_millis(now),
                params: p,
            },
        )
    }

    fn booted(name: &str, at: u64, p: &NcpParams) -> EsState {
        run(
            EsState::new(cs(name), p.mycall_timer),
            EsEvent::Boot {
                position: GeoPosition::ORIGIN,
            },
            at,
            p,
        )
        .0
    }

    fn sends(actions: &[Action], kind: &str) -> Vec<Callsign> {
        actions
            .iter()
            .filter_map(|a| match a {
                Action::Send { to, payload } if payload.kind().name() == kind => Some(to.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn lone_es_becomes_master_after_two_timer_periods() {
        let p = NcpParams::default();
        let s = booted("ES1", 0, &p);
        assert_eq!(s.phase, EsPhase::AwaitingPeers);
        let (s, a) = run(s, EsEvent::Timer(TimerKind::MyCall), 20_000, &p);
        assert_eq!(s.phase, EsPhase::AwaitingPeers);
        assert!(a
            .iter()
            .any(|a| matches!(a, Action::Broadcast(Payload::MyCall { .. }))));
        let (s, _) = run(s, EsEvent::Timer(TimerKind::MyCall), 40_000, &p);
        assert_eq!(s.phase, EsPhase::Master);
    }

    #[test]
    fn master_distributes_topology_to_every_es() {
        let p = NcpParams {
            k_top: 0.0,
            ..NcpParams::default()
        };
        let mut s = booted("ES1", 0, &p);
        for (c, t) in [("ES2", 100), ("ES3", 200)] {
            let ev = EsEvent::Received {
                from: cs(c),
                via: Via::Broadcast,
                payload: Payload::MyCall {
                    callsign: cs(c),
                    startup: SimTime::from_millis(t),
                },
            };
            s = run(s, ev, 500, &p).0;
        }
        let (s, a) = run(s, EsEvent::Timer(TimerKind::MyCall), 20_000, &p);
        assert_eq!(s.phase, EsPhase::Master);
        assert_eq!(sends(&a, "NEWSWITCH"), vec![cs("ES2"), cs("ES3")]);
        let sp = |x: f64| Payload::SwitchPos {
            time: SimTime::ZERO,
            position: GeoPosition::new(x, 0.0),
        };
        let (s, a) = run(
            s,
            EsEvent::Received {
                from: cs("ES2"),
                via: Via::P2p,
                payload: sp(20.0),
            },
            21_000,
            &p,
        );
        assert!(sends(&a, "TOPOLOGY").is_empty());
        let (s, a) = run(
            s,
            EsEvent::Received {
                from: cs("ES3"),
                via: Via::P2p,
                payload: sp(40.0),
            },
            21_100,
            &p,
        );
        assert_eq!(sends(&a, "TOPOLOGY"), vec![cs("ES2"), cs("ES3")]);
        assert!(s.topology.is_some());
    }

    #[test]
    fn slave_without_topology_refuses_rns_under_fixes() {
        let p = NcpParams {
            fixes: true,
            ..NcpParams::default()
        };
        let s = booted("ES2", 100, &p);
        let (s, a) = run(
            s,
            EsEvent::Received {
                from: cs("ES1"),
                via: Via::P2p,
                payload: Payload::NewSwitch,
            },
            20_500,
            &p,
        );
        assert_eq!(s.phase, EsPhase::Slave);
        assert_eq!(sends(&a, "SWITCHPOS"), vec![cs("ES1")]);
        assert!(a.iter().any(|a| matches!(
            a,
            Action::Arm {
                timer: TimerKind::TopologyWait,
                ..
            }
        )));
        let up = Payload::UserPos {
            callsign: cs("RN1"),
            time: SimTime::ZERO,
            position: GeoPosition::new(1.0, 1.0),
        };
        let (_, a) = run(
            s,
            EsEvent::Received {
                from: cs("RN1"),
                via: Via::Broadcast,
                payload: up,
            },
            21_000,
            &p,
        );
        assert!(sends(&a, "HANDOFF").is_empty());
    }

    #[test]
    fn deprived_slave_answers_user_pos_without_fixes() {
        let p = NcpParams::default();
        let s = booted("ES2", 100, &p);
        let (s, _) = run(
            s,
            EsEvent::Received {
                from: cs("ES1"),
                via: Via::P2p,
                payload: Payload::NewSwitch,
            },
            20_500,
            &p,
        );
        let up = Payload::UserPos {
            callsign: cs("RN1"),
            time: SimTime::ZERO,
            position: GeoPosition::new(1.0, 1.0),
        };
        let (s, a) = run(
            s,
            EsEvent::Received {
                from: cs("RN1"),
                via: Via::Broadcast,
                payload: up,
            },
            21_000,
            &p,
        );
        assert_eq!(sends(&a, "HANDOFF"), vec![cs("RN1")]);
        assert!(a.contains(&Action::Note(Note::Associated {
            rn: cs("RN1"),
            has_topology: false
        })));
        assert!(s.user_table.contains(&cs("RN1")));
    }

    #[test]
    fn late_mycall_backs_off_and_reopens_the_window() {
        let p = NcpParams::default();
        let s = booted("ES1", 0, &p);
        let (s, _) = run(s, EsEvent::Timer(TimerKind::MyCall), 20_000, &p);
        let (s, _) = run(s, EsEvent::Timer(TimerKind::MyCall), 40_000, &p);
        assert_eq!(s.phase, EsPhase::Master);
        let late = Payload::MyCall {
            callsign: cs("ES9"),
            startup: SimTime::from_secs(50),
        };
        let (s, a) = run(
            s,
            EsEvent::Received {
                from: cs("ES9"),
                via: Via::Broadcast,
                payload: late,
            },
            51_000,
            &p,
        );
        assert_eq!(s.mycall_timer, SimTime::from_secs(40));
        assert!(s.window_open);
        assert_eq!(sends(&a, "NEWSWITCH"), vec![cs("ES9")]);
        assert!(a.contains(&Action::Arm {
            timer: TimerKind::MyCall,
            after: SimTime::from_secs(40)
        }));
    }

    #[test]
    fn master_hearing_an_older_es_steps_down() {
        let p = NcpParams::default();
        let s = booted("ES5", 5_000, &p);
        let (s, _) = run(s, EsEvent::Timer(TimerKind::MyCall), 25_000, &p);
        let (s, _) = run(s, EsEvent::Timer(TimerKind::MyCall), 45_000, &p);
        assert_eq!(s.phase, EsPhase::Master);
        let older = Payload::MyCall {
            callsign: cs("ES1"),
            startup: SimTime::ZERO,
        };
        let (s, _) = run(
            s,
            EsEvent::Received {
                from: cs("ES1"),
                via: Via::Broadcast,
                payload: older,
            },
            46_000,
            &p,
        );
        assert_eq!(s.phase, EsPhase::Slave);
        assert_eq!(s.master, Some(cs("ES1")));
    }

    #[test]
    fn newswitch_retry_only_with_fixes() {
        for fixes in [false, true] {
            let p = NcpParams {
                fixes,
                ..NcpParams::default()
            };
            let mut s = booted("ES1", 0, &p);
            let mc = Payload::MyCall {
                callsign: cs("ES2"),
                startup: SimTime::from_secs(1),
            };
            s = run(
                s,
                EsEvent::Received {
                    from: cs("ES2"),
                    via: Via::Broadcast,
                    payload: mc,
                },
                1_500,
                &p,
            )
            .0;
            let (s, _) = run(s, EsEvent::Timer(TimerKind::MyCall), 20_000, &p);
            let (_, a) = run(
                s,
                EsEvent::Timer(TimerKind::NewswitchRetry(cs("ES2"))),
                22_236,
                &p,
            );
            assert_eq!(sends(&a, "NEWSWITCH").len(), fixes as usize);
        }
    }
}
