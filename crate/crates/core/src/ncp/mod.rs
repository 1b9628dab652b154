//! Network Control Protocol state machines.
//!
//! Both machines are pure step functions: `(state, event, ctx) -> (state,
//! actions)`. The caller owns time, delivery and timers; actions name the
//! packets to emit and the timers to arm or cancel.
//!
//! State names are reconstructed from the protocol narrative:
//!
//! * ES: `Booting → AwaitingPeers → {Master | Slave}`, `Slave → Configured`
//!   on TOPOLOGY. A master failure sends survivors back to `AwaitingPeers`.
//! * RN: `Booting → AwaitingHandoff ⇄ Connected`.

mod election;
mod es;
mod log;
mod rn;

pub use election::{elect_master, handoff_check, mycall_backoff};
pub use es::{step_es, EsEvent, EsPhase, EsState};
pub use log::{parse_transition, FsmTransition, ParseTransitionError, Role, ES_STATES, RN_STATES};
pub use rn::{step_rn, RnEvent, RnPhase, RnState};

use std::fmt;

use crate::domain::{Callsign, Payload, SimTime};
use crate::topology::BeamConstraints;

/// How a packet arrived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Via {
    Broadcast,
    P2p,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimerKind {
    /// ES discovery window / MYCALL rebroadcast.
    MyCall,
    /// Master MYCALL beacon.
    Beacon,
    NewswitchRetry(Callsign),
    TopologyWait,
    /// End of the simulated topology computation.
    TopologyDone,
    RnRetry,
    PosUpdate,
}

impl fmt::Display for TimerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimerKind::MyCall => f.write_str("MYCALL"),
            TimerKind::Beacon => f.write_str("BEACON"),
            TimerKind::NewswitchRetry(c) => write!(f, "NEWSWITCH_RETRY/{c}"),
            TimerKind::TopologyWait => f.write_str("TOPOLOGY_WAIT"),
            TimerKind::TopologyDone => f.write_str("TOPOLOGY_DONE"),
            TimerKind::RnRetry => f.write_str("RN_RETRY"),
            TimerKind::PosUpdate => f.write_str("POS_UPDATE"),
        }
    }
}

/// Observations emitted for metrics and diagnosis; they have no effect on
/// the protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Note {
    BecameMaster,
    BecameSlave {
        master: Callsign,
    },
    Demoted {
        by: Callsign,
    },
    /// A configuration round began; `overlapping` when the previous one had
    /// not finished.
    ReconfigStart {
        overlapping: bool,
        mycall_timer: SimTime,
    },
    /// The master distributed TOPOLOGY.
    ConfigComplete {
        links: usize,
    },
    TopologyInfeasible(String),
    TopologyReceived,
    Associated {
        rn: Callsign,
        has_topology: bool,
    },
    Redirected {
        rn: Callsign,
        to: Callsign,
    },
    HandoffInitiated {
        rn: Callsign,
        to: Callsign,
    },
    Rejected {
        rn: Callsign,
    },
    Refused {
        rn: Callsign,
    },
    MasterLost {
        master: Callsign,
    },
    Connected {
        es: Callsign,
    },
    HandoffComplete {
        from: Callsign,
        to: Callsign,
    },
    Ignored(&'static str),
}

impl fmt::Display for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Note::BecameMaster => f.write_str("master"),
            Note::BecameSlave { master } => write!(f, "slave_of/{master}"),
            Note::Demoted { by } => write!(f, "demoted_by/{by}"),
            Note::ReconfigStart {
                overlapping,
                mycall_timer,
            } => {
                write!(
                    f,
                    "reconfig_start/T={}{}",
                    mycall_timer.as_millis(),
                    if *overlapping { "/overlap" } else { "" }
                )
            }
            Note::ConfigComplete { links } => write!(f, "config_complete/links={links}"),
            Note::TopologyInfeasible(r) => write!(f, "topology_infeasible/{}", r.replace(' ', "_")),
            Note::TopologyReceived => f.write_str("topology_received"),
            Note::Associated { rn, has_topology } => {
                write!(
                    f,
                    "associated/{rn}{}",
                    if *has_topology { "" } else { "/no_topology" }
                )
            }
            Note::Redirected { rn, to } => write!(f, "redirected/{rn}>{to}"),
            Note::HandoffInitiated { rn, to } => write!(f, "handoff/{rn}>{to}"),
            Note::Rejected { rn } => write!(f, "rejected/{rn}"),
            Note::Refused { rn } => write!(f, "refused/{rn}"),
            Note::MasterLost { master } => write!(f, "master_lost/{master}"),
            Note::Connected { es } => write!(f, "connected/{es}"),
            Note::HandoffComplete { from, to } => write!(f, "handoff_complete/{from}>{to}"),
            Note::Ignored(why) => write!(f, "ignored/{why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Broadcast(Payload),
    Send { to: Callsign, payload: Payload },
    OpenLink(Callsign),
    Arm { timer: TimerKind, after: SimTime },
    Cancel(TimerKind),
    Note(Note),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Broadcast(p) => write!(f, "bcast:{}", p.kind()),
            Action::Send { to, payload } => write!(f, "send:{}>{to}", payload.kind()),
            Action::OpenLink(c) => write!(f, "open>{c}"),
            Action::Arm { timer, after } => write!(f, "arm:{timer}+{}", after.as_millis()),
            Action::Cancel(t) => write!(f, "cancel:{t}"),
            Action::Note(n) => write!(f, "note:{n}"),
        }
    }
}

/// Protocol parameters shared by every node of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct NcpParams {
    /// Base MYCALL timer T.
    pub mycall_timer: SimTime,
    pub backoff_factor: u32,
    /// Upper bound on T as a multiple of the base value.
    pub backoff_cap: u32,
    /// Both robustness fixes: NEWSWITCH retry and TOPOLOGY wait.
    pub fixes: bool,
    pub newswitch_retry: SimTime,
    /// Seconds per labeling step of the simulated topology search.
    pub k_top: f64,
    pub constraints: BeamConstraints,
    pub max_beams: usize,
    pub slots_per_beam: u8,
    /// Movement tolerance and handoff hysteresis ε, meters.
    pub tolerance: f64,
    pub rn_retry: SimTime,
    pub pos_update: SimTime,
    pub use_real_topology: bool,
}

impl Default for NcpParams {
    fn default() -> Self {
        NcpParams {
            mycall_timer: SimTime::from_secs(20),
            backoff_factor: 2,
            backoff_cap: 16,
            fixes: false,
            // twice the NEWSWITCH + SWITCHPOS round trip
            newswitch_retry: SimTime::from_millis(2 * (439 + 679)),
            k_top: 1e-9,
            constraints: BeamConstraints::default(),
            max_beams: 4,
            slots_per_beam: 4,
            tolerance: 0.0,
            rn_retry: SimTime::from_secs(3),
            pos_update: SimTime::from_secs(2),
            use_real_topology: true,
        }
    }
}

impl NcpParams {
    /// Simulated cost K_top · [N² + (L+1)^R] of searching `n` nodes with
    /// `r` candidate links.
    pub fn topology_cost(&self, n: usize, r: usize) -> SimTime {
        let l = self.constraints.fmax as f64;
        SimTime::from_secs_f64(self.k_top * ((n * n) as f64 + (l + 1.0).powf(r as f64)))
    }
}

pub struct Ctx<'a> {
    pub now: SimTime,
    pub params: &'a NcpParams,
}
