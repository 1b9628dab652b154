//! Value types shared by every subsystem: identities, positions, time,
//! orderwire packets and position tables.

mod codec;
mod geo;
mod packet;
mod tables;
mod time;

pub use codec::{
    decode, encode, packet_size_bits, Bits, DecodeError, EncodeError, VNC_HEADER_BITS,
};
pub use geo::{angle_between, distance, normalize_degrees, GeoPosition};
pub use packet::{
    Callsign, CallsignError, FrequencyId, HandoffPayload, OrderwirePacket, PacketKind, Payload,
    SlotId, TopologyLink, Vci, VciReplacement, VncHeader, VncHeaderError, CALLSIGN_MAX_LEN,
};
pub use tables::{PositionEntry, PositionTable, SwitchPositionTable, UserPositionTable};
pub use time::SimTime;

/// Field widths of the canonical encoding.
pub mod widths {
    pub use super::codec::{
        CALLSIGN_BITS, COORD_BITS, COUNT_BITS, FREQUENCY_BITS, HANDOFF_MODE_BITS, KIND_BITS,
        POSITION_BITS, SLOT_BITS, TIME_BITS, VCI_BITS, VNC_TIME_BITS,
    };
}
