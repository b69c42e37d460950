//! Dense identifiers for network and engine entities.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident, $inner:ty) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name(pub $inner);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

dense_id!(
    /// Position of a node in [`RoadNetwork::nodes`](crate::network::RoadNetwork::nodes).
    NodeIx,
    u32
);
dense_id!(
    /// Position of an edge in [`RoadNetwork::edges`](crate::network::RoadNetwork::edges).
    EdgeIx,
    u32
);
dense_id!(SegmentId, u32);
dense_id!(StarId, u32);
dense_id!(
    /// Opaque digest of `(user_id, issue_time)`.
    QueryId,
    u64
);
dense_id!(UserId, u64);
dense_id!(
    /// Cloaking-graph vertex; allocated in creation order.
    CloakNodeId,
    u64
);
dense_id!(RegionId, u64);
