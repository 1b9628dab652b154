use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::Action;
use crate::domain::{Callsign, SimTime};

pub const ES_STATES: [&str; 6] = [
    "Booting",
    "AwaitingPeers",
    "Master",
    "Slave",
    "Configured",
    "Dead",
];
pub const RN_STATES: [&str; 4] = ["Booting", "AwaitingHandoff", "Connected", "Dead"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Es,
    Rn,
}

impl Role {
    pub fn states(self) -> &'static [&'static str] {
        match self {
            Role::Es => &ES_STATES,
            Role::Rn => &RN_STATES,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Es => "ES",
            Role::Rn => "RN",
        })
    }
}

/// One line of `transitions.log`:
/// `time_ms callsign role from event to [action action ...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmTransition {
    pub time: SimTime,
    pub node: String,
    pub role: Role,
    pub from: String,
    pub event: String,
    pub to: String,
    pub actions: Vec<String>,
}

impl FsmTransition {
    pub fn new(
        time: SimTime,
        node: &Callsign,
        role: Role,
        from: &str,
        event: String,
        to: &str,
        actions: &[Action],
    ) -> Self {
        FsmTransition {
            time,
            node: node.to_string(),
            role,
            from: from.to_string(),
            event,
            to: to.to_string(),
            actions: actions.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for FsmTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} [{}]",
            self.time.as_millis(),
            self.node,
            self.role,
            self.from,
            self.event,
            self.to,
            self.actions.join(" ")
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseTransitionError {
    #[error("missing field {0}")]
    Missing(&'static str),
    #[error("bad time {0:?}")]
    Time(String),
    #[error("unknown role {0:?}")]
    Role(String),
    #[error("state {0:?} is not a {1} state")]
    State(String, Role),
    #[error("action list must be bracketed")]
    Actions,
}

pub fn parse_transition(line: &str) -> Result<FsmTransition, ParseTransitionError> {
    use ParseTransitionError as E;
    let (head, tail) = line.split_once('[').ok_or(E::Actions)?;
    let tail = tail.trim_end().strip_suffix(']').ok_or(E::Actions)?;
    let mut it = head.split_whitespace();
    let time_s = it.next().ok_or(E::Missing("time"))?;
    let time = u64::from_str(time_s)
        .map(SimTime::from_millis)
        .map_err(|_| E::Time(time_s.into()))?;
    let node = it.next().ok_or(E::Missing("node"))?.to_string();
    let role = match it.next().ok_or(E::Missing("role"))? {
        "ES" => Role::Es,
        "RN" => Role::Rn,
        r => return Err(E::Role(r.into())),
    };
    let from = it.next().ok_or(E::Missing("from"))?.to_string();
    let event = it.next().ok_or(E::Missing("event"))?.to_string();
    let to = it.next().ok_or(E::Missing("to"))?.to_string();
    for s in [&from, &to] {
        if !role.states().contains(&s.as_str()) {
            return Err(E::State(s.clone(), role));
        }
    }
    let actions = tail.split_whitespace().map(str::to_string).collect();
    Ok(FsmTransition {
        time,
        node,
        role,
        from,
        event,
        to,
        actions,
    })
}
