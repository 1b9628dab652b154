use crate::domain::GeoPosition;

/// Whether an observed value confirms a prediction.
pub trait Tolerance<V: ?Sized> {
    fn accepts(&self, predicted: &V, actual: &V) -> bool;
}

/// Positions agree when within this many meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionTolerance(pub f64);

impl Tolerance<GeoPosition> for PositionTolerance {
    fn accepts(&self, predicted: &GeoPosition, actual: &GeoPosition) -> bool {
        predicted.distance_to(actual) <= self.0
    }
}

/// Exact equality, for decisions such as a handoff target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Categorical;

impl<V: PartialEq + ?Sized> Tolerance<V> for Categorical {
    fn accepts(&self, predicted: &V, actual: &V) -> bool {
        predicted == actual
    }
}
