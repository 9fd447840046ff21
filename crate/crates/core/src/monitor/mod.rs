//! Graph monitor: representative selection, global proxy broadcast, and
//! robot-side synchronization.

mod broadcast;
mod representatives;
mod sync;

pub use broadcast::{
    connected_components, make_broadcast, make_broadcast_with, reduction_keep_set, Broadcast,
    BroadcastPayload, FillIn, MonitorConfig,
};
pub use representatives::{select_representatives, select_representatives_with, RepresentativeRule};
pub use sync::{synchronize, Correspondence, DEFAULT_SYNC_TOLERANCE_NS};

use thiserror::Error;

use crate::proxy::ProxyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("server graph is empty")]
    EmptyGraph,
    #[error("no server node could be matched to a robot node")]
    NoOverlap,
    #[error("auxiliary arrays cover {auxiliary} nodes but the proxy graph has {nodes}")]
    AuxiliaryMismatch { nodes: usize, auxiliary: usize },
    #[error(transparent)]
    Proxy(ProxyError),
}
