//! Discrete-event kernel: ordered event queue, the shared Aloha broadcast
//! medium, reliable point-to-point links, mobility, and call traffic.

mod channel;
mod mobility;
mod p2p;
mod queue;
mod rng;
mod trace;
mod traffic;

pub use channel::{
    BroadcastChannel, BroadcastOutcome, ChannelError, ChannelModel, ChannelStats, DropTable, TxId,
};
pub use mobility::{mobility_step, resample, AreaBounds, MobilityState};
pub use p2p::{P2pError, P2pNetwork, P2pSend};
pub use queue::{Event, EventQueue, NodeId, ScheduleInPast};
pub use rng::{RngStreams, Substream};
pub use trace::{Trace, TraceRecord};
pub use traffic::{Call, PoissonCallSource, TrafficError, TrafficModel};
