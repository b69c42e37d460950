use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{RoadNetwork, Segments};
use crate::ids::{EdgeIx, NodeIx, SegmentId};

/// A point on the network: segment plus distance from its first node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub segment: SegmentId,
    pub offset: f64,
}

impl Position {
    /// The edge under this position and the distance from that edge's `a` endpoint.
    pub fn edge_point(&self, net: &RoadNetwork, segs: &Segments) -> (EdgeIx, f64) {
        let seg = segs.get(self.segment);
        let (slot, along) = seg.edge_at(self.offset);
        let e = seg.edges[slot];
        let edge = net.edge(e);
        if seg.nodes[slot] == edge.a {
            (e, along)
        } else {
            (e, (edge.length - along).max(0.0))
        }
    }
}

#[derive(PartialEq)]
struct Item(f64, NodeIx);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Incremental Dijkstra; `next` settles nodes in nondecreasing distance.
pub struct Dijkstra<'a> {
    net: &'a RoadNetwork,
    dist: Vec<f64>,
    done: Vec<bool>,
    heap: BinaryHeap<Item>,
}

impl<'a> Dijkstra<'a> {
    pub fn new(net: &'a RoadNetwork, sources: &[(NodeIx, f64)]) -> Self {
        let mut d = Dijkstra {
            net,
            dist: vec![f64::INFINITY; net.node_count()],
            done: vec![false; net.node_count()],
            heap: BinaryHeap::new(),
        };
        for &(v, x) in sources {
            if x < d.dist[v.index()] {
                d.dist[v.index()] = x;
                d.heap.push(Item(x, v));
            }
        }
        d
    }

    pub fn dist(&self, v: NodeIx) -> f64 {
        self.dist[v.index()]
    }

    pub fn into_distances(mut self) -> Vec<f64> {
        while self.next().is_some() {}
        self.dist
    }
}

impl Iterator for Dijkstra<'_> {
    type Item = (NodeIx, f64);

    fn next(&mut self) -> Option<(NodeIx, f64)> {
        while let Some(Item(d, v)) = self.heap.pop() {
            if self.done[v.index()] {
                continue;
            }
            self.done[v.index()] = true;
            for &(e, w) in self.net.neighbors(v) {
                let nd = d + self.net.edge(e).length;
                if nd < self.dist[w.index()] {
                    self.dist[w.index()] = nd;
                    self.heap.push(Item(nd, w));
                }
            }
            return Some((v, d));
        }
        None
    }
}

/// Complete single-source network distances from a node or a point on an edge.
#[derive(Debug, Clone)]
pub struct DistanceField {
    dist: Vec<f64>,
    source: Option<(EdgeIx, f64)>,
}

impl DistanceField {
    pub fn from_node(net: &RoadNetwork, v: NodeIx) -> Self {
        DistanceField {
            dist: Dijkstra::new(net, &[(v, 0.0)]).into_distances(),
            source: None,
        }
    }

    /// `x` is measured from the edge's `a` endpoint.
    pub fn from_edge_point(net: &RoadNetwork, e: EdgeIx, x: f64) -> Self {
        let edge = net.edge(e);
        let sources = [(edge.a, x), (edge.b, (edge.length - x).max(0.0))];
        DistanceField {
            dist: Dijkstra::new(net, &sources).into_distances(),
            source: Some((e, x)),
        }
    }

    pub fn from_position(net: &RoadNetwork, segs: &Segments, pos: Position) -> Self {
        let (e, x) = pos.edge_point(net, segs);
        Self::from_edge_point(net, e, x)
    }

    pub fn node(&self, v: NodeIx) -> f64 {
        self.dist[v.index()]
    }

    pub fn to_edge_point(&self, net: &RoadNetwork, e: EdgeIx, x: f64) -> f64 {
        let edge = net.edge(e);
        let via = (self.dist[edge.a.index()] + x).min(self.dist[edge.b.index()] + edge.length - x);
        match self.source {
            Some((se, sx)) if se == e => via.min((sx - x).abs()),
            _ => via,
        }
    }

    pub fn to_position(&self, net: &RoadNetwork, segs: &Segments, pos: Position) -> f64 {
        let (e, x) = pos.edge_point(net, segs);
        self.to_edge_point(net, e, x)
    }
}
