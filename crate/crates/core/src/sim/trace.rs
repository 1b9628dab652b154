use std::fmt;

use crate::domain::SimTime;

/// One kernel trace line: `time_ms node kind detail`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub node: String,
    pub kind: &'static str,
    pub detail: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.time.as_millis(), self.node, self.kind)?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    enabled: bool,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Trace {
            enabled,
            records: Vec::new(),
        }
    }

    pub fn record(
        &mut self,
        time: SimTime,
        node: impl fmt::Display,
        kind: &'static str,
        detail: impl Into<String>,
    ) {
        if self.enabled {
            self.records.push(TraceRecord {
                time,
                node: node.to_string(),
                kind,
                detail: detail.into(),
            });
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}
