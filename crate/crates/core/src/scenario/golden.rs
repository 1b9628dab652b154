use std::collections::BTreeMap;
use std::fmt;

use crate::ncp::{parse_transition, FsmTransition};

/// Group for log lines that are not FSM transitions (rollbacks, PNNI
/// signals, faults, diagnosis).
pub const OTHER_STREAM: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Line {
    Fsm(FsmTransition),
    Other { time: Option<u64>, text: String },
}

impl Line {
    fn parse(raw: &str) -> Line {
        if let Ok(t) = parse_transition(raw) {
            return Line::Fsm(t);
        }
        let (time, text) = match raw.split_once(' ') {
            Some((t, rest)) if t.parse::<u64>().is_ok() => (t.parse().ok(), rest.to_string()),
            _ => (None, raw.to_string()),
        };
        Line::Other { time, text }
    }

    fn stream(&self) -> &str {
        match self {
            Line::Fsm(t) => &t.node,
            Line::Other { .. } => OTHER_STREAM,
        }
    }

    fn time(&self) -> Option<u64> {
        match self {
            Line::Fsm(t) => Some(t.time.as_millis()),
            Line::Other { time, .. } => *time,
        }
    }

    /// Everything but the timestamp.
    fn shape(&self) -> String {
        match self {
            Line::Fsm(t) => format!(
                "{} {} {} {} [{}]",
                t.role,
                t.from,
                t.event,
                t.to,
                t.actions.join(" ")
            ),
            Line::Other { text, .. } => text.clone(),
        }
    }
}

/// First point where one node's transition sequence departs from the
/// golden one. `None` on a side means that side ended first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub stream: String,
    /// Position within the stream.
    pub index: usize,
    pub golden: Option<String>,
    pub actual: Option<String>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &Option<String>| s.clone().unwrap_or_else(|| "<end>".into());
        write!(
            f,
            "{} #{}: golden {} | actual {}",
            self.stream,
            self.index,
            show(&self.golden),
            show(&self.actual)
        )
    }
}

/// Structural comparison of two transition logs. Lines are grouped per
/// node and compared in order; timestamps are compared separately.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffReport {
    pub divergences: Vec<Divergence>,
    /// Lines identical except for their timestamp.
    pub retimed: usize,
    pub compared: usize,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.divergences.is_empty() && self.retimed == 0
    }

    /// Whether the per-node tuple sequences agree, ignoring time.
    pub fn structurally_equal(&self) -> bool {
        self.divergences.is_empty()
    }

    pub fn diverging_streams(&self) -> impl Iterator<Item = &str> {
        self.divergences.iter().map(|d| d.stream.as_str())
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "identical ({} lines)", self.compared);
        }
        for d in &self.divergences {
            writeln!(f, "{d}")?;
        }
        writeln!(
            f,
            "{} diverging streams, {} retimed lines, {} lines compared",
            self.divergences.len(),
            self.retimed,
            self.compared
        )
    }
}

fn streams(text: &str) -> BTreeMap<String, Vec<Line>> {
    let mut out: BTreeMap<String, Vec<Line>> = BTreeMap::new();
    for raw in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let l = Line::parse(raw);
        out.entry(l.stream().to_string()).or_default().push(l);
    }
    out
}

pub fn compare_golden(actual: &str, golden: &str) -> DiffReport {
    let (a, g) = (streams(actual), streams(golden));
    let mut report = DiffReport::default();
    let names: Vec<&String> = {
        let mut v: Vec<&String> = a.keys().chain(g.keys()).collect();
        v.sort();
        v.dedup();
        v
    };
    let empty = Vec::new();
    for name in names {
        let (la, lg) = (a.get(name).unwrap_or(&empty), g.get(name).unwrap_or(&empty));
        let n = la.len().max(lg.len());
        for i in 0..n {
            report.compared += 1;
            match (lg.get(i), la.get(i)) {
                (Some(x), Some(y)) if x.shape() == y.shape() => {
                    if x.time() != y.time() {
                        report.retimed += 1;
                    }
                }
                (x, y) => {
                    report.divergences.push(Divergence {
                        stream: name.clone(),
                        index: i,
                        golden: x.map(|l| format!("{:?} {}", l.time(), l.shape())),
                        actual: y.map(|l| format!("{:?} {}", l.time(), l.shape())),
                    });
                    break;
                }
            }
        }
    }
    report
}
