use rand::Rng;

use crate::domain::{normalize_degrees, GeoPosition};

/// Straight-line motion at constant speed and compass direction
/// (0° = north, 90° = east).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub position: GeoPosition,
    pub speed: f64,
    pub direction: f64,
    pub max_speed: f64,
}

impl MobilityState {
    pub fn stationary(position: GeoPosition) -> Self {
        MobilityState {
            position,
            speed: 0.0,
            direction: 0.0,
            max_speed: 0.0,
        }
    }

    pub fn velocity(&self) -> (f64, f64) {
        let r = self.direction.to_radians();
        (self.speed * r.sin(), self.speed * r.cos())
    }
}

pub fn mobility_step(m: &MobilityState, dt_secs: f64) -> MobilityState {
    debug_assert!(dt_secs >= 0.0);
    MobilityState {
        position: m.position.offset(m.direction, m.speed * dt_secs),
        ..*m
    }
}

/// New speed ~ U(0, max_speed) and direction ~ U(0°, 360°), drawn after a
/// handoff completes.
pub fn resample<R: Rng + ?Sized>(m: &MobilityState, rng: &mut R) -> MobilityState {
    let speed = if m.max_speed > 0.0 {
        rng.random_range(0.0..m.max_speed)
    } else {
        0.0
    };
    let direction = rng.random_range(0.0..360.0);
    MobilityState {
        speed,
        direction,
        ..*m
    }
}

/// Axis-aligned area that mobile nodes reflect off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaBounds {
    pub min: GeoPosition,
    pub max: GeoPosition,
}

impl AreaBounds {
    pub fn around(points: impl IntoIterator<Item = GeoPosition>, margin: f64) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo = GeoPosition::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = GeoPosition::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        Some(AreaBounds {
            min: GeoPosition::new(lo.x - margin, lo.y - margin),
            max: GeoPosition::new(hi.x + margin, hi.y + margin),
        })
    }

    pub fn contains(&self, p: GeoPosition) -> bool {
        (self.min.x..=self.max.x).contains(&p.x) && (self.min.y..=self.max.y).contains(&p.y)
    }

    /// Folds a position that left the area back inside, mirroring the
    /// heading on each axis that was crossed. Returns whether a
    /// reflection happened.
    pub fn reflect(&self, m: &MobilityState) -> (MobilityState, bool) {
        let (mut x, mut y) = (m.position.x, m.position.y);
        let (mut flip_x, mut flip_y) = (false, false);
        fold(&mut x, self.min.x, self.max.x, &mut flip_x);
        fold(&mut y, self.min.y, self.max.y, &mut flip_y);
        let mut direction = m.direction;
        if flip_x {
            direction = 360.0 - direction;
        }
        if flip_y {
            direction = 180.0 - direction;
        }
        let out = MobilityState {
            position: GeoPosition::new(x, y),
            direction: normalize_degrees(direction),
            ..*m
        };
        (out, flip_x || flip_y)
    }
}

// Reflects `v` into [lo, hi]; `flipped` records an odd number of bounces.
fn fold(v: &mut f64, lo: f64, hi: f64, flipped: &mut bool) {
    let w = hi - lo;
    if w <= 0.0 {
        *v = lo;
        return;
    }
    if (lo..=hi).contains(v) {
        return;
    }
    let r = (*v - lo).rem_euclid(2.0 * w);
    *flipped = r > w;
    *v = if r <= w { lo + r } else { hi - (r - w) };
}
