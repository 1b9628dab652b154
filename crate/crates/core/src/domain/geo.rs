use std::fmt;

/// Position on a local east/north plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeoPosition {
    pub x: f64,
    pub y: f64,
}

impl GeoPosition {
    pub const ORIGIN: GeoPosition = GeoPosition { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        GeoPosition { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_to(&self, other: &GeoPosition) -> f64 {
        distance(*self, *other)
    }

    /// Compass bearing from `self` to `other`: 0° is north (+y), 90° is
    /// east (+x). Returns 0 for coincident points.
    pub fn bearing_to(&self, other: &GeoPosition) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        if dx == 0.0 && dy == 0.0 {
            return 0.0;
        }
        normalize_degrees(dx.atan2(dy).to_degrees())
    }

    /// The point `dist` meters away along compass direction `deg`.
    pub fn offset(&self, deg: f64, dist: f64) -> GeoPosition {
        let r = deg.to_radians();
        GeoPosition::new(self.x + dist * r.sin(), self.y + dist * r.cos())
    }
}

impl fmt::Display for GeoPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3},{:.3})", self.x, self.y)
    }
}

/// Euclidean distance on the local plane.
pub fn distance(a: GeoPosition, b: GeoPosition) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Maps any angle into `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Smallest absolute difference between two angles, in `[0, 180]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = normalize_degrees(a - b);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let o = GeoPosition::ORIGIN;
        assert_eq!(distance(o, o), 0.0);
        assert_eq!(distance(o, GeoPosition::new(3.0, 4.0)), 5.0);
        // adjacent grid switches
        assert_eq!(
            distance(GeoPosition::new(20.0, 0.0), GeoPosition::new(40.0, 0.0)),
            20.0
        );
    }

    #[test]
    fn bearings_follow_compass_convention() {
        let o = GeoPosition::ORIGIN;
        assert_eq!(o.bearing_to(&GeoPosition::new(0.0, 5.0)), 0.0);
        assert!((o.bearing_to(&GeoPosition::new(5.0, 0.0)) - 90.0).abs() < 1e-12);
        assert!((o.bearing_to(&GeoPosition::new(0.0, -5.0)) - 180.0).abs() < 1e-12);
        assert!((o.bearing_to(&GeoPosition::new(-5.0, 0.0)) - 270.0).abs() < 1e-12);
        let p = o.offset(90.0, 10.0);
        assert!((p.x - 10.0).abs() < 1e-12 && p.y.abs() < 1e-12);
    }

    #[test]
    fn angle_between_wraps() {
        assert_eq!(angle_between(359.0, 1.0), 2.0);
        assert_eq!(angle_between(0.0, 180.0), 180.0);
        assert_eq!(normalize_degrees(-10.0), 350.0);
    }

    fn pos() -> impl Strategy<Value = GeoPosition> {
        (-1e4..1e4f64, -1e4..1e4f64).prop_map(|(x, y)| GeoPosition::new(x, y))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in pos(), b in pos(), c in pos()) {
            prop_assert_eq!(distance(a, b), distance(b, a));
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
            prop_assert_eq!(distance(a, a), 0.0);
            if a != b {
                prop_assert!(distance(a, b) > 0.0);
            }
        }
    }
}
