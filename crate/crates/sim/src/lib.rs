//! Deterministic simulated Zab cluster. Each node runs a message handler,
//! a sync (log) processor and a commit processor as cooperatively scheduled
//! tasks; nothing happens unless an explicit [`SimEvent`] is applied.

pub mod cluster;
pub mod drive;
pub mod node;
pub mod observe;
pub mod scenario;
pub mod types;

pub use cluster::{Cluster, ImplFault, SimError, StepOutcome};
pub use mgcheck_zab::BugFlags;
pub use node::{Disk, Learner, LearnerPhase, SimNode};
pub use observe::{observe, ChannelView, LearnerView, NodeView, ObservableState, SyncView};
pub use scenario::Scenario;
pub use types::*;
