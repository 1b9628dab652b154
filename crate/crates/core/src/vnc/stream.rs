use crate::domain::{Callsign, OrderwirePacket, Payload, SimTime, VncHeader};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamItem {
    pub time: SimTime,
    pub source: Callsign,
    pub packet: OrderwirePacket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VncStreamConfig {
    /// How far virtual messages run ahead of their real twins.
    pub lookahead: SimTime,
    pub gvt_interval: SimTime,
    /// Nodes that report their LVT on every GVT interval.
    pub reporters: Vec<Callsign>,
    pub end: SimTime,
}

/// Adds one virtual twin per real packet and the periodic GVT reports.
/// Without a configuration the stream is returned unchanged.
pub fn vnc_packet_stream(real: &[StreamItem], cfg: Option<&VncStreamConfig>) -> Vec<StreamItem> {
    let Some(cfg) = cfg else {
        return real.to_vec();
    };
    let mut out = Vec::with_capacity(real.len() * 2);
    for item in real {
        out.push(item.clone());
        let send = item.time + cfg.lookahead;
        let recv = send + SimTime::from_millis(item.packet.kind().measured_latency_ms());
        let header = VncHeader::new(false, send, recv).expect("receive follows send");
        out.push(StreamItem {
            time: item.time,
            source: item.source.clone(),
            packet: OrderwirePacket::virtual_twin(item.packet.payload.clone(), header),
        });
    }
    if cfg.gvt_interval > SimTime::ZERO {
        let mut t = cfg.gvt_interval;
        while t <= cfg.end {
            for r in &cfg.reporters {
                let payload = Payload::GvtUpdate {
                    reporter: r.clone(),
                    lvt: t + cfg.lookahead,
                };
                out.push(StreamItem {
                    time: t,
                    source: r.clone(),
                    packet: OrderwirePacket::real(payload),
                });
            }
            t += cfg.gvt_interval;
        }
    }
    out.sort_by_key(|i| i.time);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{packet_size_bits, GeoPosition, PacketKind};

    fn cs(s: &str) -> Callsign {
        Callsign::new(s).unwrap()
    }

    fn real(n: u64) -> Vec<StreamItem> {
        (0..n)
            .map(|i| StreamItem {
                time: SimTime::from_millis(i * 100),
                source: cs("RN1"),
                packet: OrderwirePacket::real(Payload::UserPos {
                    callsign: cs("RN1"),
                    time: SimTime::from_millis(i * 100),
                    position: GeoPosition::new(i as f64, 0.0),
                }),
            })
            .collect()
    }

    #[test]
    fn disabled_is_identity() {
        let r = real(5);
        assert_eq!(vnc_packet_stream(&r, None), r);
    }

    #[test]
    fn one_virtual_per_real_and_more_than_double_load() {
        let r = real(100);
        let cfg = VncStreamConfig {
            lookahead: SimTime::from_secs(3),
            gvt_interval: SimTime::ZERO,
            reporters: vec![],
            end: SimTime::ZERO,
        };
        let v = vnc_packet_stream(&r, Some(&cfg));
        assert_eq!(v.iter().filter(|i| i.packet.vnc.is_some()).count(), 100);
        assert_eq!(v.len(), 200);
        let bits = |s: &[StreamItem]| s.iter().map(|i| packet_size_bits(&i.packet)).sum::<usize>();
        assert!(bits(&v) > 2 * bits(&r));
    }

    #[test]
    fn gvt_reports_every_interval() {
        let cfg = VncStreamConfig {
            lookahead: SimTime::from_secs(1),
            gvt_interval: SimTime::from_secs(1),
            reporters: vec![cs("RN1"), cs("RN2")],
            end: SimTime::from_secs(10),
        };
        let v = vnc_packet_stream(&[], Some(&cfg));
        assert_eq!(v.len(), 20);
        assert!(v.iter().all(|i| i.packet.kind() == PacketKind::GvtUpdate));
    }
}
