use std::collections::BTreeMap;

use super::geo::{distance, GeoPosition};
use super::packet::Callsign;
use super::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEntry {
    pub position: GeoPosition,
    pub time: SimTime,
}

/// Callsign-keyed table of last known positions. One entry per node;
/// inserting an existing callsign replaces its entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositionTable {
    entries: BTreeMap<Callsign, PositionEntry>,
}

/// ES positions known to a switch.
pub type SwitchPositionTable = PositionTable;
/// Positions of RNs associated with a switch.
pub type UserPositionTable = PositionTable;

impl PositionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        callsign: Callsign,
        position: GeoPosition,
        time: SimTime,
    ) -> Option<PositionEntry> {
        self.entries
            .insert(callsign, PositionEntry { position, time })
    }

    pub fn remove(&mut self, callsign: &Callsign) -> Option<PositionEntry> {
        self.entries.remove(callsign)
    }

    pub fn get(&self, callsign: &Callsign) -> Option<&PositionEntry> {
        self.entries.get(callsign)
    }

    pub fn position(&self, callsign: &Callsign) -> Option<GeoPosition> {
        self.entries.get(callsign).map(|e| e.position)
    }

    pub fn contains(&self, callsign: &Callsign) -> bool {
        self.entries.contains_key(callsign)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Callsign, &PositionEntry)> {
        self.entries.iter()
    }

    pub fn callsigns(&self) -> impl Iterator<Item = &Callsign> {
        self.entries.keys()
    }

    /// Entries ordered by distance from `pos`, ties broken by callsign.
    pub fn by_distance_from(&self, pos: GeoPosition) -> Vec<(Callsign, f64)> {
        let mut v: Vec<(Callsign, f64)> = self
            .entries
            .iter()
            .map(|(c, e)| (c.clone(), distance(pos, e.position)))
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

impl FromIterator<(Callsign, GeoPosition, SimTime)> for PositionTable {
    fn from_iter<I: IntoIterator<Item = (Callsign, GeoPosition, SimTime)>>(iter: I) -> Self {
        let mut t = PositionTable::new();
        for (c, p, s) in iter {
            t.insert(c, p, s);
        }
        t
    }
}
