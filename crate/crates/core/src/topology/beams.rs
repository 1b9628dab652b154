use std::collections::BTreeMap;

use thiserror::Error;

use super::BeamConstraints;
use crate::domain::{
    angle_between, normalize_degrees, Callsign, FrequencyId, GeoPosition, SlotId, UserPositionTable,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    /// Compass bearing of the beam axis.
    pub center: f64,
    pub width: f64,
    pub frequency: FrequencyId,
    pub slots: BTreeMap<SlotId, Callsign>,
}

impl Beam {
    pub fn covers(&self, bearing: f64) -> bool {
        angle_between(self.center, bearing) <= self.width / 2.0 + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeamPlan {
    pub beams: Vec<Beam>,
    pub slots_per_beam: u8,
}

impl BeamPlan {
    /// (beam index, frequency, slot) serving `rn`.
    pub fn assignment(&self, rn: &Callsign) -> Option<(usize, FrequencyId, SlotId)> {
        self.beams.iter().enumerate().find_map(|(i, b)| {
            b.slots
                .iter()
                .find(|(_, c)| *c == rn)
                .map(|(s, _)| (i, b.frequency, *s))
        })
    }

    pub fn rn_count(&self) -> usize {
        self.beams.iter().map(|b| b.slots.len()).sum()
    }

    /// Every occupied (beam, slot) pair.
    pub fn links(&self) -> impl Iterator<Item = (usize, SlotId, &Callsign)> {
        self.beams
            .iter()
            .enumerate()
            .flat_map(|(i, b)| b.slots.iter().map(move |(s, c)| (i, *s, c)))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("{0} is beyond the maximum beam distance")]
    OutOfRange(Callsign),
    #[error("{needed} beams needed but only {max} available")]
    TooManyBeams { needed: usize, max: usize },
    #[error("overlapping beams need more than {0} frequencies")]
    FrequencyExhausted(u8),
    #[error("beams need at least one slot")]
    NoSlots,
}

/// Greedy angular clustering of the RNs around one ES.
///
/// RNs are visited in bearing order; a beam absorbs consecutive RNs while
/// the angular extent stays within `twidth` and a slot is free. Every
/// rotation of the circular order is tried and the fewest beams kept,
/// which is optimal for arcs of fixed width and capacity.
pub fn allocate_beams(
    es: GeoPosition,
    rns: &UserPositionTable,
    c: &BeamConstraints,
    max_beams: usize,
    slots_per_beam: u8,
) -> Result<BeamPlan, BeamError> {
    if slots_per_beam == 0 {
        return Err(BeamError::NoSlots);
    }
    let mut items: Vec<(f64, Callsign)> = Vec::with_capacity(rns.len());
    for (cs, e) in rns.iter() {
        if es.distance_to(&e.position) > c.rlink {
            return Err(BeamError::OutOfRange(cs.clone()));
        }
        items.push((es.bearing_to(&e.position), cs.clone()));
    }
    if items.is_empty() {
        return Ok(BeamPlan {
            beams: Vec::new(),
            slots_per_beam,
        });
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let n = items.len();
    let mut best: Option<Vec<(usize, usize)>> = None;
    for start in 0..n {
        let clusters = sweep(&items, start, c.twidth, slots_per_beam as usize);
        if best.as_ref().is_none_or(|b| clusters.len() < b.len()) {
            best = Some(clusters);
        }
    }
    let clusters = best.expect("at least one rotation");
    if clusters.len() > max_beams {
        return Err(BeamError::TooManyBeams {
            needed: clusters.len(),
            max: max_beams,
        });
    }

    let mut beams: Vec<Beam> = Vec::with_capacity(clusters.len());
    for (first, len) in clusters {
        let lo = items[first % n].0;
        let hi = items[(first + len - 1) % n].0;
        let extent = normalize_degrees(hi - lo);
        let center = normalize_degrees(lo + extent / 2.0);
        let frequency = (1..=c.fmax)
            .map(FrequencyId)
            .find(|f| {
                beams
                    .iter()
                    .all(|b| b.frequency != *f || angle_between(b.center, center) >= c.twidth)
            })
            .ok_or(BeamError::FrequencyExhausted(c.fmax))?;
        let slots = (0..len)
            .map(|k| (SlotId(k as u8), items[(first + k) % n].1.clone()))
            .collect();
        beams.push(Beam {
            center,
            width: c.twidth,
            frequency,
            slots,
        });
    }
    Ok(BeamPlan {
        beams,
        slots_per_beam,
    })
}

// Clusters as (first index, length) over the circular order from `start`.
fn sweep(items: &[(f64, Callsign)], start: usize, width: f64, cap: usize) -> Vec<(usize, usize)> {
    let n = items.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let first = start + i;
        let lo = items[first % n].0;
        let mut len = 1;
        while i + len < n && len < cap {
            let b = items[(first + len) % n].0;
            if normalize_degrees(b - lo) > width + 1e-9 {
                break;
            }
            len += 1;
        }
        out.push((first, len));
        i += len;
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableSizeError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("2^({m}·{b}) table entries overflow")]
    Overflow { m: u32, b: u32 },
}

/// Weight-table sizing: `k_el` tables of 2^(m·b) entries.
pub fn weight_table_entries(k_el: u64, m: u32, b: u32) -> Result<(u64, u64), TableSizeError> {
    if k_el == 0 {
        return Err(TableSizeError::Zero("k_el"));
    }
    if m == 0 {
        return Err(TableSizeError::Zero("m"));
    }
    if b == 0 {
        return Err(TableSizeError::Zero("b"));
    }
    let exp = m
        .checked_mul(b)
        .filter(|e| *e < 64)
        .ok_or(TableSizeError::Overflow { m, b })?;
    Ok((k_el, 1u64 << exp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SimTime;
    use proptest::prelude::*;

    fn rns_at_bearings(bearings: &[f64], dist: f64) -> UserPositionTable {
        bearings
            .iter()
            .enumerate()
            .map(|(i, b)| {
                (
                    Callsign::new(format!("RN{i}")).unwrap(),
                    GeoPosition::ORIGIN.offset(*b, dist),
                    SimTime::ZERO,
                )
            })
            .collect()
    }

    /// Whether a group of bearings fits one arc of `width`: the largest
    /// circular gap between consecutive members must leave at most
    /// `width` uncovered.
    fn fits_arc(mut bs: Vec<f64>, width: f64) -> bool {
        if bs.len() <= 1 {
            return true;
        }
        bs.sort_by(f64::total_cmp);
        let mut max_gap = 360.0 - (bs[bs.len() - 1] - bs[0]);
        for w in bs.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        360.0 - max_gap <= width + 1e-9
    }

    /// Exhaustive oracle: can the bearings be split into at most `k`
    /// groups that each fit an arc and a beam's slots?
    fn oracle_feasible(bs: &[f64], width: f64, k: usize, cap: usize) -> bool {
        let n = bs.len();
        if n == 0 {
            return true;
        }
        let total = (k as u64).pow(n as u32);
        (0..total).any(|code| {
            let mut groups = vec![Vec::new(); k];
            let mut v = code;
            for b in bs {
                groups[(v % k as u64) as usize].push(*b);
                v /= k as u64;
            }
            groups
                .into_iter()
                .all(|g| g.len() <= cap && fits_arc(g, width))
        })
    }

    fn c(tw: f64) -> BeamConstraints {
        BeamConstraints {
            twidth: tw,
            rwidth: tw,
            fmax: 4,
            ..Default::default()
        }
    }

    #[test]
    fn no_rns_no_beams() {
        let plan = allocate_beams(
            GeoPosition::ORIGIN,
            &UserPositionTable::new(),
            &c(10.0),
            4,
            4,
        )
        .unwrap();
        assert!(plan.beams.is_empty());
    }

    #[test]
    fn two_close_rns_share_a_45_degree_beam() {
        let plan = allocate_beams(
            GeoPosition::ORIGIN,
            &rns_at_bearings(&[30.0, 33.0], 50.0),
            &c(45.0),
            4,
            4,
        )
        .unwrap();
        assert_eq!(plan.beams.len(), 1);
        assert_eq!(plan.beams[0].slots.len(), 2);
    }

    #[test]
    fn five_spread_rns_exceed_four_narrow_beams() {
        let bs = [0.0, 72.0, 144.0, 216.0, 288.0];
        let r = allocate_beams(
            GeoPosition::ORIGIN,
            &rns_at_bearings(&bs, 50.0),
            &c(10.0),
            4,
            4,
        );
        assert_eq!(r, Err(BeamError::TooManyBeams { needed: 5, max: 4 }));
        assert!(!oracle_feasible(&bs, 10.0, 4, 4));
    }

    #[test]
    fn neighbors_across_north_share_a_beam() {
        let bs = [0.0, 90.0, 180.0, 270.0, 359.0];
        let plan = allocate_beams(
            GeoPosition::ORIGIN,
            &rns_at_bearings(&bs, 50.0),
            &c(10.0),
            4,
            4,
        )
        .unwrap();
        assert_eq!(plan.beams.len(), 4);
        assert!(oracle_feasible(&bs, 10.0, 4, 4));
    }

    #[test]
    fn out_of_range_rn_is_rejected() {
        let cons = BeamConstraints {
            rlink: 10.0,
            ..c(10.0)
        };
        let r = allocate_beams(
            GeoPosition::ORIGIN,
            &rns_at_bearings(&[0.0], 50.0),
            &cons,
            4,
            4,
        );
        assert!(matches!(r, Err(BeamError::OutOfRange(_))));
    }

    #[test]
    fn weight_tables() {
        assert_eq!(weight_table_entries(8, 2, 4), Ok((8, 256)));
        assert_eq!(weight_table_entries(1, 1, 1), Ok((1, 2)));
        assert_eq!(weight_table_entries(8, 2, 1), Ok((8, 4)));
        assert_eq!(
            weight_table_entries(1, 8, 8),
            Err(TableSizeError::Overflow { m: 8, b: 8 })
        );
        assert!(weight_table_entries(0, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn plans_are_exclusive_and_contained(
            pts in prop::collection::vec((0.0f64..360.0, 1.0f64..100.0), 0..10),
            tw in prop::sample::select(vec![10.0, 30.0, 45.0, 90.0]),
            slots in 1u8..5,
        ) {
            let rns: UserPositionTable = pts
                .iter()
                .enumerate()
                .map(|(i, (b, d))| (Callsign::new(format!("R{i}")).unwrap(), GeoPosition::ORIGIN.offset(*b, *d), SimTime::ZERO))
                .collect();
            if let Ok(plan) = allocate_beams(GeoPosition::ORIGIN, &rns, &c(tw), 16, slots) {
                let mut seen = std::collections::BTreeSet::new();
                for (beam, slot, rn) in plan.links() {
                    prop_assert!(seen.insert(rn.clone()), "{} assigned twice", rn);
                    prop_assert!(slot.0 < slots);
                    let bearing = GeoPosition::ORIGIN.bearing_to(&rns.position(rn).unwrap());
                    prop_assert!(plan.beams[beam].covers(bearing));
                }
                prop_assert_eq!(seen.len(), rns.len());
                for i in 0..plan.beams.len() {
                    for j in i + 1..plan.beams.len() {
                        let (a, b) = (&plan.beams[i], &plan.beams[j]);
                        if angle_between(a.center, b.center) < tw {
                            prop_assert_ne!(a.frequency, b.frequency);
                        }
                    }
                }
            }
        }

        #[test]
        fn feasibility_matches_exhaustive_grouping(
            bs in prop::collection::vec(0.0f64..360.0, 0..7),
            tw in prop::sample::select(vec![10.0, 45.0, 100.0]),
            k in 1usize..4,
            cap in 1u8..4,
        ) {
            let rns = rns_at_bearings(&bs, 50.0);
            let cons = BeamConstraints { fmax: 8, ..c(tw) };
            let got = allocate_beams(GeoPosition::ORIGIN, &rns, &cons, k, cap).is_ok();
            // Bearings are recomputed from positions, so feed the oracle the same values.
            let actual: Vec<f64> = rns.iter().map(|(_, e)| GeoPosition::ORIGIN.bearing_to(&e.position)).collect();
            prop_assert_eq!(got, oracle_feasible(&actual, tw, k, cap as usize));
        }
    }
}
