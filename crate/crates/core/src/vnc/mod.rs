//! Optimistic configuration ahead of real time (Time Warp).
//!
//! Logical processes execute messages in `(receive_time, id)` order,
//! snapshot state before every event and roll back on stragglers or
//! antimessages. Message ids derive from the parent id and output index,
//! so re-execution after a rollback regenerates identical ids and the
//! final confirmed state is independent of delivery order.

mod gvt;
mod handoff;
mod lp;
mod predictor;
mod stream;
mod system;
mod tolerance;

pub use gvt::{update_gvt, GvtState};
pub use handoff::{run_handoff_scenario, HandoffRecord, HandoffReport, HandoffScenario, Leg};
pub use lp::{
    Emit, LogicalProcess, LpId, LpStats, Model, Receipt, RollbackError, RollbackReport, Sign,
    TwMessage,
};
pub use predictor::{MobilityPredictor, Prediction, PredictorMsg, PredictorState};
pub use stream::{vnc_packet_stream, StreamItem, VncStreamConfig};
pub use system::{RollbackRecord, TimeWarp, Verification};
pub use tolerance::{Categorical, PositionTolerance, Tolerance};

use std::fmt;

/// Deterministic message identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId(pub u64);

impl MessageId {
    /// Id of the `n`th externally injected message.
    pub fn root(n: u64) -> Self {
        MessageId(splitmix64(n ^ 0x5EED_0000_0000_0000))
    }

    /// Id of output `index` emitted while processing `self`.
    pub fn child(self, index: u32) -> Self {
        MessageId(splitmix64(self.0 ^ splitmix64(index as u64 + 1)))
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
