//! Closed-form timing and capacity models of the orderwire control plane.
//!
//! All times are in seconds. The per-packet constants default to the
//! measured prototype latencies and are shared with the simulator so that
//! model and simulation can be cross-checked.

mod csv;

pub use csv::{aloha_csv, p1_csv, p23_csv};

use thiserror::Error;

use crate::domain::{PacketKind, VNC_HEADER_BITS};

#[derive(Debug, Error, PartialEq)]
pub enum PerfError {
    #[error("{0} must be at least {1}")]
    TooSmall(&'static str, u64),
    #[error("{what} overflows for {value}")]
    Overflow { what: &'static str, value: u64 },
    #[error("{0} must be positive and finite")]
    NotPositive(&'static str),
    #[error("efficiency {0} must lie strictly between 0 and 1")]
    Efficiency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConstants {
    pub user_pos: f64,
    pub newswitch: f64,
    pub handoff: f64,
    pub mycall: f64,
    pub switchpos: f64,
    pub topology: f64,
    /// Extra distribution time per additional ES.
    pub topology_per_es: f64,
    /// Topology search cost per labeling step.
    pub k_top: f64,
    /// Beamforming cost per RN.
    pub k_bf: f64,
    /// Weight-table cost per table entry; multiplied by 2^(m·b).
    pub k_el: f64,
    pub m: u32,
    pub b: u32,
}

impl Default for TimingConstants {
    /// K_bf = 7.5 s / 4 RNs and K_el·2^(M·B) = 2 s for QPSK (M = 2) with
    /// 4 beams.
    fn default() -> Self {
        let ms = |k: PacketKind| k.measured_latency_ms() as f64 / 1000.0;
        TimingConstants {
            user_pos: ms(PacketKind::UserPos),
            newswitch: ms(PacketKind::NewSwitch),
            handoff: ms(PacketKind::Handoff),
            mycall: ms(PacketKind::MyCall),
            switchpos: ms(PacketKind::SwitchPos),
            topology: ms(PacketKind::Topology),
            topology_per_es: 0.1,
            k_top: 1e-9,
            k_bf: 7.5 / 4.0,
            k_el: 2.0 / 256.0,
            m: 2,
            b: 4,
        }
    }
}

impl TimingConstants {
    pub fn with_k_top(self, k_top: f64) -> Self {
        TimingConstants { k_top, ..self }
    }

    /// K_el · 2^(M·B): time to build one set of weight tables.
    pub fn table_time(&self) -> f64 {
        self.k_el * 2f64.powi((self.m * self.b) as i32)
    }

    /// K_top · [N² + (L+1)^R].
    pub fn topology_search_time(&self, n: u64, l: u64, r: u64) -> f64 {
        self.k_top * ((n * n) as f64 + ((l + 1) as f64).powf(r as f64))
    }

    pub fn validate(&self) -> Result<(), PerfError> {
        let fields = [
            ("user_pos", self.user_pos),
            ("newswitch", self.newswitch),
            ("handoff", self.handoff),
            ("mycall", self.mycall),
            ("switchpos", self.switchpos),
            ("topology", self.topology),
            ("topology_per_es", self.topology_per_es),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(PerfError::NotPositive(name));
            }
        }
        for (name, v) in [
            ("k_top", self.k_top),
            ("k_bf", self.k_bf),
            ("k_el", self.k_el),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PerfError::NotPositive(name));
            }
        }
        Ok(())
    }
}

/// Phase I (ES configuration) time for `n` edge switches, MYCALL timer
/// `t`, `l` frequency pairs and `r` constrained links.
pub fn phase1_time(n: u64, t: f64, l: u64, r: u64, tc: &TimingConstants) -> Result<f64, PerfError> {
    if n < 1 {
        return Err(PerfError::TooSmall("n", 1));
    }
    let peers = (n - 1) as f64;
    let discovery = t.max(tc.newswitch * peers + tc.mycall * peers);
    let search = tc.topology_search_time(n, l, r);
    if !search.is_finite() {
        return Err(PerfError::Overflow {
            what: "topology search term",
            value: r,
        });
    }
    Ok(discovery + search + tc.topology + tc.topology_per_es * peers)
}

/// Phase II (RN configuration) time for `u` RNs at one ES. The beamform and
/// table step repeats for every non-empty subset of transmitting RNs.
pub fn phase2_time(u: u64, tc: &TimingConstants) -> Result<f64, PerfError> {
    let table = tc.table_time();
    let mut sum = 0.0;
    let mut binom = 1.0f64;
    for r in 1..=u {
        binom = binom * (u - r + 1) as f64 / r as f64;
        sum += binom * (tc.k_bf * r as f64 + table);
    }
    let total = tc.user_pos * u as f64 + sum;
    if !total.is_finite() {
        return Err(PerfError::Overflow {
            what: "phase II binomial sum",
            value: u,
        });
    }
    Ok(total)
}

/// Phase III (handoff) time when the new ES already serves `u` RNs.
pub fn phase3_time(u: u64, tc: &TimingConstants) -> Result<f64, PerfError> {
    Ok(tc.handoff + phase2_time(u + 1, tc)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlohaModel {
    pub bandwidth_bps: f64,
    pub efficiency: f64,
    pub packet_bits: u64,
    pub vnc_enabled: bool,
}

impl Default for AlohaModel {
    fn default() -> Self {
        AlohaModel {
            bandwidth_bps: 19_200.0,
            efficiency: 0.18,
            packet_bits: 400,
            vnc_enabled: false,
        }
    }
}

/// Orderwire bit-load multiplier of predictive configuration: every real
/// packet gains a virtual twin that is `VNC_HEADER_BITS` longer.
pub fn vnc_load_factor(packet_bits: u64) -> f64 {
    (2 * packet_bits + VNC_HEADER_BITS as u64) as f64 / packet_bits as f64
}

impl AlohaModel {
    pub fn validate(&self) -> Result<(), PerfError> {
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            return Err(PerfError::Efficiency(self.efficiency));
        }
        if !(self.bandwidth_bps.is_finite() && self.bandwidth_bps > 0.0) {
            return Err(PerfError::NotPositive("bandwidth_bps"));
        }
        if self.packet_bits == 0 {
            return Err(PerfError::TooSmall("packet_bits", 1));
        }
        Ok(())
    }

    /// Bits on the channel per real update.
    pub fn effective_packet_bits(&self) -> f64 {
        if self.vnc_enabled {
            self.packet_bits as f64 * vnc_load_factor(self.packet_bits)
        } else {
            self.packet_bits as f64
        }
    }

    /// Offered channel load in bits/s when each of `num_rn` RNs sends
    /// `rate_per_min` updates per minute plus `handoff_fraction` extra
    /// packets per update.
    pub fn offered_load_bps(&self, num_rn: u64, rate_per_min: f64, handoff_fraction: f64) -> f64 {
        rate_per_min / 60.0
            * self.effective_packet_bits()
            * num_rn as f64
            * (1.0 + handoff_fraction)
    }
}

/// Highest per-RN position-update rate (updates/minute) the Aloha channel
/// sustains at its maximum efficiency.
pub fn aloha_max_update_rate(
    num_rn: u64,
    a: &AlohaModel,
    handoff_fraction: f64,
) -> Result<f64, PerfError> {
    a.validate()?;
    if num_rn < 1 {
        return Err(PerfError::TooSmall("num_rn", 1));
    }
    if !(handoff_fraction.is_finite() && handoff_fraction >= 0.0) {
        return Err(PerfError::NotPositive("handoff_fraction"));
    }
    let usable = a.efficiency * a.bandwidth_bps;
    Ok(usable / (a.effective_packet_bits() * num_rn as f64 * (1.0 + handoff_fraction)) * 60.0)
}
