//! Inter-ES topology search and per-ES beam allocation.
//!
//! Topology search treats each ES pair within beam range as a variable
//! labeled either "no link" or one of `fmax` frequencies, rejects labelings
//! where two interfering links share a frequency, and keeps the first
//! connected labeling in preference order (fewest links, then the
//! lexicographically smallest label vector).
//!
//! Interference is modeled geometrically: a directed link's transmitter
//! covers a disk of radius `imult` × its length, clipped to the transmit
//! sector. The receive width is carried for completeness; filtering
//! interference through the receive sector as well is a possible
//! refinement that is not applied.

mod beams;
mod interference;
mod solver;

pub use beams::{allocate_beams, weight_table_entries, Beam, BeamError, BeamPlan, TableSizeError};
pub use interference::{links_conflict, links_interfere, LinkGeometry};
pub use solver::{
    nearest_neighbor_topology, solve_topology, Infeasible, SolveStats, TopologyError,
    TopologySolution, Violation,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("invalid beam constraint: {0}")]
pub struct ConstraintError(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConstraints {
    /// Longest usable link, meters.
    pub rlink: f64,
    /// Number of non-interfering frequency pairs.
    pub fmax: u8,
    /// Interference radius as a multiple of link length.
    pub imult: f64,
    /// Transmit beam width, degrees.
    pub twidth: f64,
    /// Receive beam width, degrees.
    pub rwidth: f64,
}

impl Default for BeamConstraints {
    fn default() -> Self {
        BeamConstraints {
            rlink: 1000.0,
            fmax: 3,
            imult: 1.0,
            twidth: 10.0,
            rwidth: 10.0,
        }
    }
}

impl BeamConstraints {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if !(self.rlink.is_finite() && self.rlink > 0.0) {
            return Err(ConstraintError("rlink must be positive"));
        }
        if self.fmax < 1 {
            return Err(ConstraintError("fmax must be at least 1"));
        }
        if !(self.imult.is_finite() && self.imult >= 0.0) {
            return Err(ConstraintError("imult must be non-negative"));
        }
        let width_ok = |w: f64| w > 0.0 && w <= 360.0;
        if !width_ok(self.twidth) {
            return Err(ConstraintError("twidth must lie in (0, 360]"));
        }
        if !width_ok(self.rwidth) {
            return Err(ConstraintError("rwidth must lie in (0, 360]"));
        }
        Ok(())
    }
}
