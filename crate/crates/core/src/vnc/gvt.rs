use std::collections::BTreeMap;

use crate::domain::SimTime;

/// Centralized GVT estimate held by the master.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GvtState {
    pub reported_lvts: BTreeMap<u32, SimTime>,
    pub gvt: SimTime,
    pub real_time: SimTime,
    /// Updates whose raw minimum fell below the previous estimate.
    pub regressions: u32,
}

impl GvtState {
    /// Λ = GVT − real time, zero while GVT trails real time.
    pub fn lookahead(&self) -> SimTime {
        self.gvt.saturating_sub(self.real_time)
    }
}

/// New estimate: the minimum over reported times and the receive times
/// of messages still in flight, never below the previous estimate.
pub fn update_gvt(
    g: &GvtState,
    reports: &BTreeMap<u32, SimTime>,
    in_flight: impl IntoIterator<Item = SimTime>,
    real_time: SimTime,
) -> GvtState {
    let mut reported = g.reported_lvts.clone();
    reported.extend(reports.iter().map(|(k, v)| (*k, *v)));
    let raw = reported
        .values()
        .copied()
        .chain(in_flight)
        .min()
        .unwrap_or(SimTime::MAX);
    let regressions = g.regressions + u32::from(raw < g.gvt);
    GvtState {
        reported_lvts: reported,
        gvt: raw.max(g.gvt),
        real_time: real_time.max(g.real_time),
        regressions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reports(v: &[(u32, u64)]) -> BTreeMap<u32, SimTime> {
        v.iter()
            .map(|(k, t)| (*k, SimTime::from_millis(*t)))
            .collect()
    }

    #[test]
    fn equal_reports() {
        let g = update_gvt(
            &GvtState::default(),
            &reports(&[(0, 7), (1, 7)]),
            [],
            SimTime::ZERO,
        );
        assert_eq!(g.gvt, SimTime::from_millis(7));
    }

    #[test]
    fn minimum_rule_and_in_flight() {
        let g = update_gvt(
            &GvtState::default(),
            &reports(&[(0, 10), (1, 50), (2, 30)]),
            [],
            SimTime::ZERO,
        );
        assert_eq!(g.gvt, SimTime::from_millis(10));
        let g = update_gvt(
            &g,
            &reports(&[(0, 60)]),
            [SimTime::from_millis(25)],
            SimTime::ZERO,
        );
        assert_eq!(g.gvt, SimTime::from_millis(25));
    }

    #[test]
    fn never_decreases() {
        let g = update_gvt(
            &GvtState::default(),
            &reports(&[(0, 40)]),
            [],
            SimTime::from_millis(5),
        );
        let g = update_gvt(&g, &reports(&[(0, 30)]), [], SimTime::from_millis(6));
        assert_eq!(g.gvt, SimTime::from_millis(40));
        assert_eq!(g.regressions, 1);
        assert_eq!(g.lookahead(), SimTime::from_millis(34));
    }
}
