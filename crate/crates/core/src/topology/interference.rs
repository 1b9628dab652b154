use super::BeamConstraints;
use crate::domain::{angle_between, GeoPosition};

/// A directed link: `tx` beams toward `rx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub tx: GeoPosition,
    pub rx: GeoPosition,
}

impl LinkGeometry {
    pub fn new(tx: GeoPosition, rx: GeoPosition) -> Self {
        LinkGeometry { tx, rx }
    }

    pub fn length(&self) -> f64 {
        self.tx.distance_to(&self.rx)
    }

    pub fn reversed(&self) -> Self {
        LinkGeometry {
            tx: self.rx,
            rx: self.tx,
        }
    }
}

const EPS: f64 = 1e-9;

/// Whether `l1`'s transmission disturbs `l2`'s receiver: the receiver lies
/// within `imult · |l1|` of `l1`'s transmitter and inside its transmit
/// sector. Directional; a receiver co-located with the transmitter is
/// not counted.
pub fn links_interfere(l1: &LinkGeometry, l2: &LinkGeometry, c: &BeamConstraints) -> bool {
    let radius = c.imult * l1.length();
    let d = l1.tx.distance_to(&l2.rx);
    if d <= EPS || d > radius + EPS {
        return false;
    }
    let axis = l1.tx.bearing_to(&l1.rx);
    let toward = l1.tx.bearing_to(&l2.rx);
    angle_between(axis, toward) <= c.twidth / 2.0 + EPS
}

/// Conflict between two bidirectional links: any direction of either
/// disturbs any direction of the other.
pub fn links_conflict(
    a: (GeoPosition, GeoPosition),
    b: (GeoPosition, GeoPosition),
    c: &BeamConstraints,
) -> bool {
    let la = LinkGeometry::new(a.0, a.1);
    let lb = LinkGeometry::new(b.0, b.1);
    for x in [la, la.reversed()] {
        for y in [lb, lb.reversed()] {
            if links_interfere(&x, &y, c) || links_interfere(&y, &x, c) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> GeoPosition {
        GeoPosition::new(x, y)
    }

    #[test]
    fn zero_multiplier_never_interferes() {
        let c = BeamConstraints {
            imult: 0.0,
            ..Default::default()
        };
        let l1 = LinkGeometry::new(p(0.0, 0.0), p(0.0, 20.0));
        let l2 = LinkGeometry::new(p(5.0, 10.0), p(0.0, 10.0));
        assert!(!links_interfere(&l1, &l2, &c));
    }

    #[test]
    fn receiver_halfway_along_the_axis_interferes() {
        // |l1| = 20, receiver of l2 at 10 m straight ahead of l1's transmitter.
        let c = BeamConstraints::default();
        let l1 = LinkGeometry::new(p(0.0, 0.0), p(0.0, 20.0));
        let l2 = LinkGeometry::new(p(30.0, 10.0), p(0.0, 10.0));
        assert!(links_interfere(&l1, &l2, &c));
    }

    #[test]
    fn receiver_off_sector_is_safe_at_any_distance() {
        let c = BeamConstraints {
            imult: 1000.0,
            ..Default::default()
        };
        let l1 = LinkGeometry::new(p(0.0, 0.0), p(0.0, 20.0));
        for d in [1.0, 10.0, 500.0] {
            let l2 = LinkGeometry::new(p(d, 5.0), p(d, 0.0));
            assert!(!links_interfere(&l1, &l2, &c));
        }
    }

    #[test]
    fn direction_matters() {
        let c = BeamConstraints::default();
        let l1 = LinkGeometry::new(p(0.0, 0.0), p(0.0, 20.0));
        let l2 = LinkGeometry::new(p(30.0, 10.0), p(0.0, 10.0));
        assert!(links_interfere(&l1, &l2, &c));
        assert!(!links_interfere(&l2, &l1, &c));
    }

    proptest! {
        #[test]
        fn conflict_is_the_symmetric_closure(
            a in prop::array::uniform4(-50.0f64..50.0),
            b in prop::array::uniform4(-50.0f64..50.0),
            imult in 0.0f64..3.0,
            tw in 1.0f64..360.0,
        ) {
            let c = BeamConstraints { imult, twidth: tw, ..Default::default() };
            let la = (p(a[0], a[1]), p(a[2], a[3]));
            let lb = (p(b[0], b[1]), p(b[2], b[3]));
            let dirs = |l: (GeoPosition, GeoPosition)| [LinkGeometry::new(l.0, l.1), LinkGeometry::new(l.1, l.0)];
            let mut expected = false;
            for x in dirs(la) {
                for y in dirs(lb) {
                    expected |= links_interfere(&x, &y, &c) || links_interfere(&y, &x, &c);
                }
            }
            prop_assert_eq!(links_conflict(la, lb, &c), expected);
            prop_assert_eq!(links_conflict(la, lb, &c), links_conflict(lb, la, &c));
        }
    }
}
