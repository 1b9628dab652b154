use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::geo::GeoPosition;
use super::time::SimTime;

/// Longest callsign that fits the 48-bit encoded field.
pub const CALLSIGN_MAX_LEN: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CallsignError {
    #[error("callsign must not be empty")]
    Empty,
    #[error("callsign {0:?} is longer than {CALLSIGN_MAX_LEN} characters")]
    TooLong(String),
    #[error("callsign {0:?} contains characters outside [A-Za-z0-9-]")]
    InvalidChar(String),
}

/// Operator identifier of a radio node. Ordering is lexicographic, which is
/// also the tie-break order for master election.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Callsign(String);

impl Callsign {
    pub fn new(s: impl Into<String>) -> Result<Self, CallsignError> {
        let s = s.into();
        if s.is_empty() {
            return Err(CallsignError::Empty);
        }
        if s.len() > CALLSIGN_MAX_LEN {
            return Err(CallsignError::TooLong(s));
        }
        if !s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
            return Err(CallsignError::InvalidChar(s));
        }
        Ok(Callsign(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Callsign {
    type Err = CallsignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Callsign::new(s)
    }
}

impl fmt::Display for Callsign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Non-interfering frequency (pair) identifier, `1..=fmax`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrequencyId(pub u8);

impl fmt::Display for FrequencyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// TDMA slot within a beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotId(pub u8);

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// ATM virtual channel identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vci(pub u16);

impl fmt::Display for Vci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vci{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    MyCall,
    NewSwitch,
    SwitchPos,
    Topology,
    UserPos,
    Handoff,
    GvtUpdate,
}

impl PacketKind {
    pub const ALL: [PacketKind; 7] = [
        PacketKind::MyCall,
        PacketKind::NewSwitch,
        PacketKind::SwitchPos,
        PacketKind::Topology,
        PacketKind::UserPos,
        PacketKind::Handoff,
        PacketKind::GvtUpdate,
    ];

    /// Wire tag (low seven bits of the kind byte).
    pub const fn tag(self) -> u8 {
        match self {
            PacketKind::MyCall => 1,
            PacketKind::NewSwitch => 2,
            PacketKind::SwitchPos => 3,
            PacketKind::Topology => 4,
            PacketKind::UserPos => 5,
            PacketKind::Handoff => 6,
            PacketKind::GvtUpdate => 7,
        }
    }

    pub fn from_tag(tag: u8) -> Option<PacketKind> {
        PacketKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub const fn name(self) -> &'static str {
        match self {
            PacketKind::MyCall => "MYCALL",
            PacketKind::NewSwitch => "NEWSWITCH",
            PacketKind::SwitchPos => "SWITCHPOS",
            PacketKind::Topology => "TOPOLOGY",
            PacketKind::UserPos => "USER_POS",
            PacketKind::Handoff => "HANDOFF",
            PacketKind::GvtUpdate => "GVT_UPDATE",
        }
    }

    /// Measured time to packetize, transmit, receive and depacketize one
    /// packet of this kind on the prototype radios, in milliseconds.
    /// GVT_UPDATE was never measured; it is sized like MYCALL and reuses
    /// its figure.
    pub const fn measured_latency_ms(self) -> u64 {
        match self {
            PacketKind::UserPos => 677,
            PacketKind::NewSwitch => 439,
            PacketKind::Handoff => 473,
            PacketKind::MyCall => 492,
            PacketKind::SwitchPos => 679,
            PacketKind::Topology => 664,
            PacketKind::GvtUpdate => 492,
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PacketKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PacketKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown packet kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyLink {
    pub a: Callsign,
    pub b: Callsign,
    pub frequency: FrequencyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VciReplacement {
    pub original: Vci,
    pub replacement: Vci,
}

/// HANDOFF carries either a link assignment or a redirect, never both.
#[derive(Debug, Clone, PartialEq)]
pub enum HandoffPayload {
    Assign {
        frequency: FrequencyId,
        slot: SlotId,
        es_position: GeoPosition,
        replacement_vcis: Vec<VciReplacement>,
    },
    Redirect {
        callsign: Callsign,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    MyCall {
        callsign: Callsign,
        startup: SimTime,
    },
    NewSwitch,
    SwitchPos {
        time: SimTime,
        position: GeoPosition,
    },
    Topology {
        nodes: Vec<(Callsign, GeoPosition)>,
        links: Vec<TopologyLink>,
    },
    UserPos {
        callsign: Callsign,
        time: SimTime,
        position: GeoPosition,
    },
    Handoff(HandoffPayload),
    GvtUpdate {
        reporter: Callsign,
        lvt: SimTime,
    },
}

impl Payload {
    pub fn kind(&self) -> PacketKind {
        match self {
            Payload::MyCall { .. } => PacketKind::MyCall,
            Payload::NewSwitch => PacketKind::NewSwitch,
            Payload::SwitchPos { .. } => PacketKind::SwitchPos,
            Payload::Topology { .. } => PacketKind::Topology,
            Payload::UserPos { .. } => PacketKind::UserPos,
            Payload::Handoff(_) => PacketKind::Handoff,
            Payload::GvtUpdate { .. } => PacketKind::GvtUpdate,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("receive time {receive} precedes send time {send}")]
pub struct VncHeaderError {
    pub send: SimTime,
    pub receive: SimTime,
}

/// Fields added to every orderwire message when predictive configuration
/// is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VncHeader {
    antimessage: bool,
    send_time: SimTime,
    receive_time: SimTime,
}

impl VncHeader {
    pub fn new(
        antimessage: bool,
        send_time: SimTime,
        receive_time: SimTime,
    ) -> Result<Self, VncHeaderError> {
        if receive_time < send_time {
            return Err(VncHeaderError {
                send: send_time,
                receive: receive_time,
            });
        }
        Ok(VncHeader {
            antimessage,
            send_time,
            receive_time,
        })
    }

    pub fn antimessage(&self) -> bool {
        self.antimessage
    }

    pub fn send_time(&self) -> SimTime {
        self.send_time
    }

    pub fn receive_time(&self) -> SimTime {
        self.receive_time
    }

    /// The cancelling twin of this header.
    pub fn negated(&self) -> VncHeader {
        VncHeader {
            antimessage: !self.antimessage,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderwirePacket {
    pub payload: Payload,
    pub vnc: Option<VncHeader>,
}

impl OrderwirePacket {
    pub fn real(payload: Payload) -> Self {
        OrderwirePacket { payload, vnc: None }
    }

    pub fn virtual_twin(payload: Payload, header: VncHeader) -> Self {
        OrderwirePacket {
            payload,
            vnc: Some(header),
        }
    }

    pub fn kind(&self) -> PacketKind {
        self.payload.kind()
    }
}

impl From<Payload> for OrderwirePacket {
    fn from(payload: Payload) -> Self {
        OrderwirePacket::real(payload)
    }
}
