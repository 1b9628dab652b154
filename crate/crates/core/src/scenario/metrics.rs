use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::domain::PacketKind;

/// Measurements of one run, or of a merged batch. Times are seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub runs: u32,
    /// First time every live ES held the master's topology. For a batch,
    /// the mean over runs that completed.
    pub config_complete: Option<f64>,
    pub completed_runs: u32,
    /// Every time the system became fully configured.
    pub config_completions: Vec<f64>,
    /// First time some ES had heard MYCALL from every other ES.
    pub all_mycall_heard: Option<f64>,
    pub reconfig_starts: Vec<f64>,
    /// Reconfigurations that began before the previous one completed.
    pub overlapping_reconfigs: u64,
    /// Links in use (distinct RN (beam, slot) assignments) → samples.
    pub link_samples: BTreeMap<usize, u64>,
    /// (beam index, slot) → samples in which it carried an RN.
    pub beam_slot_usage: BTreeMap<(usize, u8), u64>,
    pub handoff_latencies: Vec<f64>,
    pub rollback_depths: Vec<f64>,
    pub transmissions: u64,
    pub collisions: u64,
    pub dropped_packets: u64,
    pub partition: bool,
    pub deadlock: bool,
    pub diagnosed_runs: u32,
    /// Associations granted by an ES that had no TOPOLOGY yet.
    pub deprived_associations: u64,
    pub refused_associations: u64,
    pub calls_offered: u64,
    pub calls_accepted: u64,
    pub calls_blocked: u64,
    pub packets_sent: BTreeMap<PacketKind, u64>,
    pub orderwire_bits: u64,
    /// Extra bits spent on virtual twins and GVT updates.
    pub vnc_bits: u64,
    pub pnni_signals: u64,
    pub pnni_reroutes: u64,
    pub link_absent: u64,
}

/// Scalar rows of `metrics.csv`, in order.
pub const CSV_SCALARS: [&str; 25] = [
    "seed",
    "runs",
    "config_complete_s",
    "completed_runs",
    "all_mycall_heard_s",
    "reconfigurations",
    "overlapping_reconfigurations",
    "handoffs",
    "handoff_latency_mean_s",
    "rollbacks",
    "rollback_depth_mean_s",
    "transmissions",
    "collisions",
    "collision_rate",
    "dropped_packets",
    "partition",
    "deadlock",
    "diagnosed_runs",
    "deprived_associations",
    "refused_associations",
    "calls_offered",
    "calls_accepted",
    "calls_blocked",
    "orderwire_bits",
    "vnc_bits",
];

/// Series rows of `metrics.csv`, in order after the scalars.
pub const CSV_SERIES: [&str; 9] = [
    "pnni_signals",
    "pnni_reroutes",
    "link_absent",
    "packets_sent",
    "config_completion_s",
    "reconfig_start_s",
    "link_usage_count",
    "link_usage_cdf",
    "beam_slot_usage",
];

pub const CSV_HEADER: &str = "metric,key,value";

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn secs(x: Option<f64>) -> String {
    x.map(|x| format!("{x:.3}")).unwrap_or_default()
}

impl RunMetrics {
    pub fn handoffs(&self) -> usize {
        self.handoff_latencies.len()
    }

    pub fn rollbacks(&self) -> usize {
        self.rollback_depths.len()
    }

    pub fn reconfigurations(&self) -> usize {
        self.reconfig_starts.len()
    }

    pub fn collision_rate(&self) -> f64 {
        if self.transmissions == 0 {
            0.0
        } else {
            self.collisions as f64 / self.transmissions as f64
        }
    }

    /// Empirical CDF of the number of links in use: `(links, P[X ≤ links])`.
    pub fn link_usage_cdf(&self) -> Vec<(usize, f64)> {
        let total: u64 = self.link_samples.values().sum();
        if total == 0 {
            return Vec::new();
        }
        let mut acc = 0;
        self.link_samples
            .iter()
            .map(|(k, n)| {
                acc += n;
                (
                    *k,
                    if acc == total {
                        1.0
                    } else {
                        acc as f64 / total as f64
                    },
                )
            })
            .collect()
    }

    /// `metric,key,value` rows: the scalars of [`CSV_SCALARS`], then the
    /// series of [`CSV_SERIES`].
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CSV_HEADER}");
        let b = |x: bool| u8::from(x).to_string();
        let scalars: [String; 25] = [
            self.seed.to_string(),
            self.runs.to_string(),
            secs(self.config_complete),
            self.completed_runs.to_string(),
            secs(self.all_mycall_heard),
            self.reconfigurations().to_string(),
            self.overlapping_reconfigs.to_string(),
            self.handoffs().to_string(),
            secs(mean(&self.handoff_latencies)),
            self.rollbacks().to_string(),
            secs(mean(&self.rollback_depths)),
            self.transmissions.to_string(),
            self.collisions.to_string(),
            format!("{:.6}", self.collision_rate()),
            self.dropped_packets.to_string(),
            b(self.partition),
            b(self.deadlock),
            self.diagnosed_runs.to_string(),
            self.deprived_associations.to_string(),
            self.refused_associations.to_string(),
            self.calls_offered.to_string(),
            self.calls_accepted.to_string(),
            self.calls_blocked.to_string(),
            self.orderwire_bits.to_string(),
            self.vnc_bits.to_string(),
        ];
        for (name, v) in CSV_SCALARS.iter().zip(scalars) {
            let _ = writeln!(s, "{name},,{v}");
        }
        let _ = writeln!(s, "pnni_signals,,{}", self.pnni_signals);
        let _ = writeln!(s, "pnni_reroutes,,{}", self.pnni_reroutes);
        let _ = writeln!(s, "link_absent,,{}", self.link_absent);
        for (k, n) in &self.packets_sent {
            let _ = writeln!(s, "packets_sent,{k},{n}");
        }
        for (i, t) in self.config_completions.iter().enumerate() {
            let _ = writeln!(s, "config_completion_s,{i},{t:.3}");
        }
        for (i, t) in self.reconfig_starts.iter().enumerate() {
            let _ = writeln!(s, "reconfig_start_s,{i},{t:.3}");
        }
        for (k, n) in &self.link_samples {
            let _ = writeln!(s, "link_usage_count,{k},{n}");
        }
        for (k, p) in self.link_usage_cdf() {
            let _ = writeln!(s, "link_usage_cdf,{k},{p:.6}");
        }
        for ((beam, slot), n) in &self.beam_slot_usage {
            let _ = writeln!(s, "beam_slot_usage,b{beam}s{slot},{n}");
        }
        s
    }

    /// Pools independent runs: counts and histograms add, series
    /// concatenate, flags are set when any run set them.
    pub fn merge<'a>(runs: impl IntoIterator<Item = &'a RunMetrics>) -> RunMetrics {
        let mut out = RunMetrics::default();
        let mut completes = Vec::new();
        let mut heard = Vec::new();
        for (i, r) in runs.into_iter().enumerate() {
            if i == 0 {
                out.seed = r.seed;
            }
            out.runs += r.runs.max(1);
            completes.extend(r.config_complete);
            heard.extend(r.all_mycall_heard);
            out.completed_runs += r.completed_runs;
            out.config_completions.extend(&r.config_completions);
            out.reconfig_starts.extend(&r.reconfig_starts);
            out.overlapping_reconfigs += r.overlapping_reconfigs;
            for (k, n) in &r.link_samples {
                *out.link_samples.entry(*k).or_default() += n;
            }
            for (k, n) in &r.beam_slot_usage {
                *out.beam_slot_usage.entry(*k).or_default() += n;
            }
            out.handoff_latencies.extend(&r.handoff_latencies);
            out.rollback_depths.extend(&r.rollback_depths);
            out.transmissions += r.transmissions;
            out.collisions += r.collisions;
            out.dropped_packets += r.dropped_packets;
            out.partition |= r.partition;
            out.deadlock |= r.deadlock;
            out.diagnosed_runs += r.diagnosed_runs;
            out.deprived_associations += r.deprived_associations;
            out.refused_associations += r.refused_associations;
            out.calls_offered += r.calls_offered;
            out.calls_accepted += r.calls_accepted;
            out.calls_blocked += r.calls_blocked;
            for (k, n) in &r.packets_sent {
                *out.packets_sent.entry(*k).or_default() += n;
            }
            out.orderwire_bits += r.orderwire_bits;
            out.vnc_bits += r.vnc_bits;
            out.pnni_signals += r.pnni_signals;
            out.pnni_reroutes += r.pnni_reroutes;
            out.link_absent += r.link_absent;
        }
        out.config_complete = mean(&completes);
        out.all_mycall_heard = mean(&heard);
        out
    }

    /// Human-readable digest for `summary.txt`.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let opt = |x: Option<f64>| {
            x.map(|x| format!("{x:.3} s"))
                .unwrap_or_else(|| "never".into())
        };
        let _ = writeln!(s, "seed                  {}", self.seed);
        if self.runs > 1 {
            let _ = writeln!(
                s,
                "runs                  {} ({} completed)",
                self.runs, self.completed_runs
            );
        }
        let _ = writeln!(s, "configuration         {}", opt(self.config_complete));
        let _ = writeln!(s, "all MYCALLs heard     {}", opt(self.all_mycall_heard));
        let _ = writeln!(
            s,
            "reconfigurations      {} ({} overlapping)",
            self.reconfigurations(),
            self.overlapping_reconfigs
        );
        let lat = mean(&self.handoff_latencies)
            .map(|x| format!(", mean latency {x:.3} s"))
            .unwrap_or_default();
        let _ = writeln!(s, "handoffs              {}{lat}", self.handoffs());
        let depth = mean(&self.rollback_depths)
            .map(|x| format!(", mean depth {x:.3} s"))
            .unwrap_or_default();
        let _ = writeln!(s, "rollbacks             {}{depth}", self.rollbacks());
        let _ = writeln!(
            s,
            "broadcasts            {} ({} collided, rate {:.4})",
            self.transmissions,
            self.collisions,
            self.collision_rate()
        );
        let _ = writeln!(s, "dropped packets       {}", self.dropped_packets);
        let _ = writeln!(
            s,
            "calls                 {} offered, {} accepted, {} blocked",
            self.calls_offered, self.calls_accepted, self.calls_blocked
        );
        let _ = writeln!(
            s,
            "associations          {} without topology, {} refused",
            self.deprived_associations, self.refused_associations
        );
        let _ = writeln!(
            s,
            "orderwire bits        {} (+{} virtual)",
            self.orderwire_bits, self.vnc_bits
        );
        if self.pnni_signals > 0 || self.pnni_reroutes > 0 {
            let _ = writeln!(
                s,
                "pnni signals          {} ({} reroutes)",
                self.pnni_signals, self.pnni_reroutes
            );
        }
        let cdf = self.link_usage_cdf();
        if !cdf.is_empty() {
            let row: Vec<String> = cdf.iter().map(|(k, p)| format!("{k}:{p:.3}")).collect();
            let _ = writeln!(s, "link usage CDF        {}", row.join(" "));
        }
        let _ = writeln!(
            s,
            "partition             {}",
            if self.partition { "yes" } else { "no" }
        );
        let _ = writeln!(
            s,
            "deadlock              {}",
            if self.deadlock { "yes" } else { "no" }
        );
        s
    }
}
