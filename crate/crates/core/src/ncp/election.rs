use std::collections::BTreeMap;

use crate::domain::{Callsign, GeoPosition, SimTime, SwitchPositionTable};

/// Oldest startup time wins; equal times go to the smallest callsign.
pub fn elect_master(candidates: &BTreeMap<Callsign, SimTime>) -> Option<Callsign> {
    candidates
        .iter()
        .min_by(|a, b| a.1.cmp(b.1).then_with(|| a.0.cmp(b.0)))
        .map(|(c, _)| c.clone())
}

/// Next MYCALL timer after a MYCALL arrived late.
pub fn mycall_backoff(t_current: SimTime, factor: u32) -> SimTime {
    t_current * factor as u64
}

/// The ES an RN at `pos` should move to, if one is nearer than `current`
/// by more than `epsilon` meters.
pub fn handoff_check(
    current: &Callsign,
    table: &SwitchPositionTable,
    pos: GeoPosition,
    epsilon: f64,
) -> Option<Callsign> {
    let here = pos.distance_to(&table.position(current)?);
    let (best, d) = table
        .by_distance_from(pos)
        .into_iter()
        .find(|(c, _)| c != current)?;
    (d < here - epsilon).then_some(best)
}
