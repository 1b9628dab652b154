//! Canonical bit-level encoding of orderwire packets.
//!
//! Field widths: kind tag 8, callsign 48, time 48, coordinate 32 (signed
//! millimeters), frequency 8, slot 8, VCI 16. List lengths and the HANDOFF
//! mode are one byte each. A packet carrying a VNC header sets the high bit
//! of the kind byte and places the 65-bit header (1 + 32 + 32) right after
//! it.

use bitvec::prelude::*;
use thiserror::Error;

use super::geo::GeoPosition;
use super::packet::*;
use super::time::SimTime;

pub const KIND_BITS: usize = 8;
pub const CALLSIGN_BITS: usize = 48;
pub const TIME_BITS: usize = 48;
pub const COORD_BITS: usize = 32;
pub const POSITION_BITS: usize = 2 * COORD_BITS;
pub const FREQUENCY_BITS: usize = 8;
pub const SLOT_BITS: usize = 8;
pub const VCI_BITS: usize = 16;
pub const COUNT_BITS: usize = 8;
pub const HANDOFF_MODE_BITS: usize = 8;
pub const VNC_TIME_BITS: usize = 32;
pub const VNC_HEADER_BITS: usize = 1 + 2 * VNC_TIME_BITS;

const VNC_FLAG: u8 = 0x80;
const MODE_ASSIGN: u64 = 0;
const MODE_REDIRECT: u64 = 1;

pub type Bits = BitVec<u8, Msb0>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("coordinate {0} m does not fit a signed 32-bit millimeter field")]
    CoordinateRange(String),
    #[error("time {0} does not fit a {1}-bit millisecond field")]
    TimeRange(SimTime, usize),
    #[error("{0} list has {1} entries; at most 255 fit")]
    ListTooLong(&'static str, usize),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated packet: needed {needed} bits at offset {offset}, have {len}")]
    Truncated {
        offset: usize,
        needed: usize,
        len: usize,
    },
    #[error("unknown packet kind tag {0}")]
    UnknownKind(u8),
    #[error("unknown HANDOFF mode {0}")]
    UnknownHandoffMode(u64),
    #[error("invalid callsign in packet: {0}")]
    Callsign(#[from] CallsignError),
    #[error("invalid VNC header: {0}")]
    Header(#[from] VncHeaderError),
    #[error("{0} trailing bits after packet")]
    Trailing(usize),
}

/// Size in bits of the canonical encoding; equals `encode(p)?.len()`.
pub fn packet_size_bits(p: &OrderwirePacket) -> usize {
    let vnc = if p.vnc.is_some() { VNC_HEADER_BITS } else { 0 };
    KIND_BITS + vnc + payload_bits(&p.payload)
}

fn payload_bits(p: &Payload) -> usize {
    match p {
        Payload::MyCall { .. } => CALLSIGN_BITS + TIME_BITS,
        Payload::NewSwitch => 0,
        Payload::SwitchPos { .. } => TIME_BITS + POSITION_BITS,
        Payload::Topology { nodes, links } => {
            COUNT_BITS
                + nodes.len() * (CALLSIGN_BITS + POSITION_BITS)
                + COUNT_BITS
                + links.len() * (2 * CALLSIGN_BITS + FREQUENCY_BITS)
        }
        Payload::UserPos { .. } => CALLSIGN_BITS + TIME_BITS + POSITION_BITS,
        Payload::Handoff(HandoffPayload::Assign {
            replacement_vcis, ..
        }) => {
            HANDOFF_MODE_BITS
                + FREQUENCY_BITS
                + SLOT_BITS
                + POSITION_BITS
                + COUNT_BITS
                + replacement_vcis.len() * 2 * VCI_BITS
        }
        Payload::Handoff(HandoffPayload::Redirect { .. }) => HANDOFF_MODE_BITS + CALLSIGN_BITS,
        Payload::GvtUpdate { .. } => CALLSIGN_BITS + TIME_BITS,
    }
}

struct Writer {
    bits: Bits,
}

impl Writer {
    fn put(&mut self, value: u64, width: usize) {
        for i in (0..width).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    fn callsign(&mut self, c: &Callsign) {
        let mut raw = [b' '; CALLSIGN_MAX_LEN];
        raw[..c.as_str().len()].copy_from_slice(c.as_str().as_bytes());
        for b in raw {
            self.put(b as u64, 8);
        }
    }

    fn time(&mut self, t: SimTime, width: usize) -> Result<(), EncodeError> {
        if width < 64 && t.as_millis() >> width != 0 {
            return Err(EncodeError::TimeRange(t, width));
        }
        self.put(t.as_millis(), width);
        Ok(())
    }

    fn coord(&mut self, v: f64) -> Result<(), EncodeError> {
        let mm = (v * 1000.0).round();
        if !mm.is_finite() || mm < i32::MIN as f64 || mm > i32::MAX as f64 {
            return Err(EncodeError::CoordinateRange(v.to_string()));
        }
        self.put(mm as i32 as u32 as u64, COORD_BITS);
        Ok(())
    }

    fn position(&mut self, p: &GeoPosition) -> Result<(), EncodeError> {
        self.coord(p.x)?;
        self.coord(p.y)
    }

    fn count(&mut self, what: &'static str, n: usize) -> Result<(), EncodeError> {
        if n > u8::MAX as usize {
            return Err(EncodeError::ListTooLong(what, n));
        }
        self.put(n as u64, COUNT_BITS);
        Ok(())
    }
}

pub fn encode(p: &OrderwirePacket) -> Result<Bits, EncodeError> {
    let mut w = Writer {
        bits: Bits::with_capacity(packet_size_bits(p)),
    };
    let mut tag = p.kind().tag();
    if p.vnc.is_some() {
        tag |= VNC_FLAG;
    }
    w.put(tag as u64, KIND_BITS);
    if let Some(h) = &p.vnc {
        w.put(h.antimessage() as u64, 1);
        w.time(h.send_time(), VNC_TIME_BITS)?;
        w.time(h.receive_time(), VNC_TIME_BITS)?;
    }
    match &p.payload {
        Payload::MyCall { callsign, startup } => {
            w.callsign(callsign);
            w.time(*startup, TIME_BITS)?;
        }
        Payload::NewSwitch => {}
        Payload::SwitchPos { time, position } => {
            w.time(*time, TIME_BITS)?;
            w.position(position)?;
        }
        Payload::Topology { nodes, links } => {
            w.count("node", nodes.len())?;
            for (c, pos) in nodes {
                w.callsign(c);
                w.position(pos)?;
            }
            w.count("link", links.len())?;
            for l in links {
                w.callsign(&l.a);
                w.callsign(&l.b);
                w.put(l.frequency.0 as u64, FREQUENCY_BITS);
            }
        }
        Payload::UserPos {
            callsign,
            time,
            position,
        } => {
            w.callsign(callsign);
            w.time(*time, TIME_BITS)?;
            w.position(position)?;
        }
        Payload::Handoff(HandoffPayload::Assign {
            frequency,
            slot,
            es_position,
            replacement_vcis,
        }) => {
            w.put(MODE_ASSIGN, HANDOFF_MODE_BITS);
            w.put(frequency.0 as u64, FREQUENCY_BITS);
            w.put(slot.0 as u64, SLOT_BITS);
            w.position(es_position)?;
            w.count("replacement VCI", replacement_vcis.len())?;
            for r in replacement_vcis {
                w.put(r.original.0 as u64, VCI_BITS);
                w.put(r.replacement.0 as u64, VCI_BITS);
            }
        }
        Payload::Handoff(HandoffPayload::Redirect { callsign }) => {
            w.put(MODE_REDIRECT, HANDOFF_MODE_BITS);
            w.callsign(callsign);
        }
        Payload::GvtUpdate { reporter, lvt } => {
            w.callsign(reporter);
            w.time(*lvt, TIME_BITS)?;
        }
    }
    debug_assert_eq!(w.bits.len(), packet_size_bits(p));
    Ok(w.bits)
}

struct Reader<'a> {
    bits: &'a BitSlice<u8, Msb0>,
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, width: usize) -> Result<u64, DecodeError> {
        if self.pos + width > self.bits.len() {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: width,
                len: self.bits.len(),
            });
        }
        let v = self.bits[self.pos..self.pos + width]
            .iter()
            .fold(0u64, |acc, b| (acc << 1) | (*b as u64));
        self.pos += width;
        Ok(v)
    }

    fn callsign(&mut self) -> Result<Callsign, DecodeError> {
        let mut raw = Vec::with_capacity(CALLSIGN_MAX_LEN);
        for _ in 0..CALLSIGN_MAX_LEN {
            raw.push(self.take(8)? as u8);
        }
        let s = String::from_utf8_lossy(&raw)
            .trim_end_matches(' ')
            .to_string();
        Ok(Callsign::new(s)?)
    }

    fn time(&mut self, width: usize) -> Result<SimTime, DecodeError> {
        Ok(SimTime::from_millis(self.take(width)?))
    }

    fn coord(&mut self) -> Result<f64, DecodeError> {
        let mm = self.take(COORD_BITS)? as u32 as i32;
        Ok(mm as f64 / 1000.0)
    }

    fn position(&mut self) -> Result<GeoPosition, DecodeError> {
        let x = self.coord()?;
        let y = self.coord()?;
        Ok(GeoPosition::new(x, y))
    }
}

pub fn decode(bits: &BitSlice<u8, Msb0>) -> Result<OrderwirePacket, DecodeError> {
    let mut r = Reader { bits, pos: 0 };
    let tag = r.take(KIND_BITS)? as u8;
    let kind =
        PacketKind::from_tag(tag & !VNC_FLAG).ok_or(DecodeError::UnknownKind(tag & !VNC_FLAG))?;
    let vnc = if tag & VNC_FLAG != 0 {
        let anti = r.take(1)? == 1;
        let send = r.time(VNC_TIME_BITS)?;
        let recv = r.time(VNC_TIME_BITS)?;
        Some(VncHeader::new(anti, send, recv)?)
    } else {
        None
    };
    let payload = match kind {
        PacketKind::MyCall => Payload::MyCall {
            callsign: r.callsign()?,
            startup: r.time(TIME_BITS)?,
        },
        PacketKind::NewSwitch => Payload::NewSwitch,
        PacketKind::SwitchPos => Payload::SwitchPos {
            time: r.time(TIME_BITS)?,
            position: r.position()?,
        },
        PacketKind::Topology => {
            let n = r.take(COUNT_BITS)? as usize;
            let mut nodes = Vec::with_capacity(n);
            for _ in 0..n {
                nodes.push((r.callsign()?, r.position()?));
            }
            let m = r.take(COUNT_BITS)? as usize;
            let mut links = Vec::with_capacity(m);
            for _ in 0..m {
                let a = r.callsign()?;
                let b = r.callsign()?;
                let frequency = FrequencyId(r.take(FREQUENCY_BITS)? as u8);
                links.push(TopologyLink { a, b, frequency });
            }
            Payload::Topology { nodes, links }
        }
        PacketKind::UserPos => Payload::UserPos {
            callsign: r.callsign()?,
            time: r.time(TIME_BITS)?,
            position: r.position()?,
        },
        PacketKind::Handoff => match r.take(HANDOFF_MODE_BITS)? {
            MODE_ASSIGN => {
                let frequency = FrequencyId(r.take(FREQUENCY_BITS)? as u8);
                let slot = SlotId(r.take(SLOT_BITS)? as u8);
                let es_position = r.position()?;
                let k = r.take(COUNT_BITS)? as usize;
                let mut replacement_vcis = Vec::with_capacity(k);
                for _ in 0..k {
                    let original = Vci(r.take(VCI_BITS)? as u16);
                    let replacement = Vci(r.take(VCI_BITS)? as u16);
                    replacement_vcis.push(VciReplacement {
                        original,
                        replacement,
                    });
                }
                Payload::Handoff(HandoffPayload::Assign {
                    frequency,
                    slot,
                    es_position,
                    replacement_vcis,
                })
            }
            MODE_REDIRECT => Payload::Handoff(HandoffPayload::Redirect {
                callsign: r.callsign()?,
            }),
            other => return Err(DecodeError::UnknownHandoffMode(other)),
        },
        PacketKind::GvtUpdate => Payload::GvtUpdate {
            reporter: r.callsign()?,
            lvt: r.time(TIME_BITS)?,
        },
    };
    if r.pos != bits.len() {
        return Err(DecodeError::Trailing(bits.len() - r.pos));
    }
    Ok(OrderwirePacket { payload, vnc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cs(s: &str) -> Callsign {
        Callsign::new(s).unwrap()
    }

    #[test]
    fn newswitch_is_header_only() {
        let p = OrderwirePacket::real(Payload::NewSwitch);
        assert_eq!(packet_size_bits(&p), 8);
        assert_eq!(encode(&p).unwrap().len(), 8);
    }

    #[test]
    fn user_pos_size_is_sum_of_field_widths() {
        // tag 8 + callsign 48 + time 48 + two coordinates 2*32
        let expected = 8 + 48 + 48 + 32 + 32;
        assert_eq!(expected, 168);
        let p = OrderwirePacket::real(Payload::UserPos {
            callsign: cs("RN1"),
            time: SimTime::from_secs(3),
            position: GeoPosition::new(1.5, -2.25),
        });
        assert_eq!(packet_size_bits(&p), expected);
    }

    #[test]
    fn fixed_sizes_by_kind() {
        let my = OrderwirePacket::real(Payload::MyCall {
            callsign: cs("ES1"),
            startup: SimTime::ZERO,
        });
        assert_eq!(packet_size_bits(&my), 8 + 48 + 48);
        let sp = OrderwirePacket::real(Payload::SwitchPos {
            time: SimTime::ZERO,
            position: GeoPosition::ORIGIN,
        });
        assert_eq!(packet_size_bits(&sp), 8 + 48 + 64);
        let redirect = OrderwirePacket::real(Payload::Handoff(HandoffPayload::Redirect {
            callsign: cs("ES2"),
        }));
        assert_eq!(packet_size_bits(&redirect), 8 + 8 + 48);
        let topo = OrderwirePacket::real(Payload::Topology {
            nodes: vec![
                (cs("ES1"), GeoPosition::ORIGIN),
                (cs("ES2"), GeoPosition::new(20.0, 0.0)),
            ],
            links: vec![TopologyLink {
                a: cs("ES1"),
                b: cs("ES2"),
                frequency: FrequencyId(1),
            }],
        });
        assert_eq!(
            packet_size_bits(&topo),
            8 + 8 + 2 * (48 + 64) + 8 + (48 + 48 + 8)
        );
    }

    #[test]
    fn vnc_header_adds_65_bits() {
        let h = VncHeader::new(true, SimTime::from_secs(1), SimTime::from_secs(9)).unwrap();
        let p = OrderwirePacket::virtual_twin(Payload::NewSwitch, h);
        assert_eq!(packet_size_bits(&p), 8 + 65);
        let back = decode(&encode(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn vnc_times_past_32_bits_are_rejected() {
        let big = SimTime::from_millis(1 << 33);
        let h = VncHeader::new(false, big, big).unwrap();
        let p = OrderwirePacket::virtual_twin(Payload::NewSwitch, h);
        assert!(matches!(encode(&p), Err(EncodeError::TimeRange(_, 32))));
    }

    #[test]
    fn decode_errors() {
        let mut bits = Bits::new();
        for _ in 0..8 {
            bits.push(false);
        }
        assert_eq!(decode(&bits), Err(DecodeError::UnknownKind(0)));
        let p = OrderwirePacket::real(Payload::MyCall {
            callsign: cs("ES1"),
            startup: SimTime::ZERO,
        });
        let enc = encode(&p).unwrap();
        assert!(matches!(
            decode(&enc[..50]),
            Err(DecodeError::Truncated { .. })
        ));
        let mut extra = enc.clone();
        extra.push(true);
        assert_eq!(decode(&extra), Err(DecodeError::Trailing(1)));
    }

    fn callsign() -> impl Strategy<Value = Callsign> {
        "[A-Z0-9-]{1,6}".prop_map(|s| Callsign::new(s).unwrap())
    }

    fn time() -> impl Strategy<Value = SimTime> {
        (0u64..1 << 40).prop_map(SimTime::from_millis)
    }

    // Coordinates on the millimeter grid the encoding carries exactly.
    fn position() -> impl Strategy<Value = GeoPosition> {
        (
            -2_000_000_000i64..2_000_000_000,
            -2_000_000_000i64..2_000_000_000,
        )
            .prop_map(|(x, y)| GeoPosition::new(x as f64 / 1000.0, y as f64 / 1000.0))
    }

    fn payload() -> impl Strategy<Value = Payload> {
        let link = (callsign(), callsign(), 1u8..=8).prop_map(|(a, b, f)| TopologyLink {
            a,
            b,
            frequency: FrequencyId(f),
        });
        let vcis = prop::collection::vec((any::<u16>(), any::<u16>()), 0..4).prop_map(|v| {
            v.into_iter()
                .map(|(o, r)| VciReplacement {
                    original: Vci(o),
                    replacement: Vci(r),
                })
                .collect::<Vec<_>>()
        });
        prop_oneof![
            (callsign(), time())
                .prop_map(|(callsign, startup)| Payload::MyCall { callsign, startup }),
            Just(Payload::NewSwitch),
            (time(), position()).prop_map(|(time, position)| Payload::SwitchPos { time, position }),
            (
                prop::collection::vec((callsign(), position()), 0..5),
                prop::collection::vec(link, 0..5)
            )
                .prop_map(|(nodes, links)| Payload::Topology { nodes, links }),
            (callsign(), time(), position()).prop_map(|(callsign, time, position)| {
                Payload::UserPos {
                    callsign,
                    time,
                    position,
                }
            }),
            (any::<u8>(), any::<u8>(), position(), vcis).prop_map(
                |(f, s, es_position, replacement_vcis)| {
                    Payload::Handoff(HandoffPayload::Assign {
                        frequency: FrequencyId(f),
                        slot: SlotId(s),
                        es_position,
                        replacement_vcis,
                    })
                }
            ),
            callsign().prop_map(|callsign| Payload::Handoff(HandoffPayload::Redirect { callsign })),
            (callsign(), time()).prop_map(|(reporter, lvt)| Payload::GvtUpdate { reporter, lvt }),
        ]
    }

    fn header() -> impl Strategy<Value = Option<VncHeader>> {
        prop::option::of(
            (any::<bool>(), 0u64..1 << 31, 0u64..1 << 31).prop_map(|(a, s, d)| {
                VncHeader::new(a, SimTime::from_millis(s), SimTime::from_millis(s + d)).unwrap()
            }),
        )
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(payload in payload(), vnc in header()) {
            let p = OrderwirePacket { payload, vnc };
            let bits = encode(&p).unwrap();
            prop_assert_eq!(bits.len(), packet_size_bits(&p));
            prop_assert_eq!(decode(&bits).unwrap(), p);
        }

        #[test]
        fn vnc_delta_is_65_for_every_kind(payload in payload(), s in 0u64..1000, d in 0u64..1000) {
            let real = OrderwirePacket::real(payload.clone());
            let h = VncHeader::new(false, SimTime::from_millis(s), SimTime::from_millis(s + d)).unwrap();
            let virt = OrderwirePacket::virtual_twin(payload, h);
            prop_assert_eq!(packet_size_bits(&virt) - packet_size_bits(&real), 65);
        }
    }
}
