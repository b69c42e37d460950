use std::collections::{BTreeMap, BTreeSet};

use super::{RoadNetwork, Segments};
use crate::ids::{EdgeIx, NodeIx, SegmentId};

/// A set of segments viewed as a subgraph of the road network.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subgraph {
    pub segments: BTreeSet<SegmentId>,
}

impl Subgraph {
    pub fn new(segments: impl IntoIterator<Item = SegmentId>) -> Self {
        Subgraph {
            segments: segments.into_iter().collect(),
        }
    }

    pub fn nodes(&self, segs: &Segments) -> BTreeSet<NodeIx> {
        self.segments
            .iter()
            .flat_map(|&s| segs.get(s).nodes.iter().copied())
            .collect()
    }

    pub fn edges(&self, segs: &Segments) -> BTreeSet<EdgeIx> {
        self.segments
            .iter()
            .flat_map(|&s| segs.get(s).edges.iter().copied())
            .collect()
    }

    pub fn border_nodes(&self, net: &RoadNetwork, segs: &Segments) -> Vec<NodeIx> {
        let mut inner: BTreeMap<NodeIx, usize> = BTreeMap::new();
        for e in self.edges(segs) {
            let edge = net.edge(e);
            *inner.entry(edge.a).or_default() += 1;
            *inner.entry(edge.b).or_default() += 1;
        }
        inner
            .into_iter()
            .filter(|&(v, d)| net.degree(v) > d)
            .map(|(v, _)| v)
            .collect()
    }
}

/// Nodes of the subgraph with at least one incident edge outside it, sorted.
pub fn border_nodes(net: &RoadNetwork, segs: &Segments, segments: &[SegmentId]) -> Vec<NodeIx> {
    Subgraph::new(segments.iter().copied()).border_nodes(net, segs)
}
