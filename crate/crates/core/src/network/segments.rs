use serde::{Deserialize, Serialize};

use super::RoadNetwork;
use crate::ids::{EdgeIx, NodeIx, SegmentId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum End {
    Start,
    End,
}

/// Maximal chain of edges whose interior nodes all have degree 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    /// `v_0 .. v_L`; `nodes.len() == edges.len() + 1`.
    pub nodes: Vec<NodeIx>,
    pub edges: Vec<EdgeIx>,
    /// Distance from `v_0` to each entry of `nodes`.
    pub cum: Vec<f64>,
    pub length: f64,
}

impl Segment {
    pub fn start(&self) -> NodeIx {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeIx {
        *self.nodes.last().unwrap()
    }

    pub fn terminal(&self, end: End) -> NodeIx {
        match end {
            End::Start => self.start(),
            End::End => self.end(),
        }
    }

    pub fn terminals(&self) -> [NodeIx; 2] {
        [self.start(), self.end()]
    }

    pub fn interior(&self) -> &[NodeIx] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn is_cycle(&self) -> bool {
        self.start() == self.end()
    }

    /// Edge slot containing `offset` and the distance along it from `nodes[slot]`.
    pub fn edge_at(&self, offset: f64) -> (usize, f64) {
        let offset = offset.clamp(0.0, self.length);
        let n = self.edges.len();
        let slot = self.cum[1..n].partition_point(|&c| c <= offset);
        (slot, offset - self.cum[slot])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Segments {
    list: Vec<Segment>,
    edge_slot: Vec<(SegmentId, u32)>,
    terminal_ends: Vec<Vec<(SegmentId, End)>>,
}

impl Segments {
    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn get(&self, id: SegmentId) -> &Segment {
        &self.list[id.index()]
    }

    pub fn try_get(&self, id: SegmentId) -> Option<&Segment> {
        self.list.get(id.index())
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Segment> {
        self.list.iter()
    }

    /// Segment containing `e` and the edge's slot within it.
    pub fn of_edge(&self, e: EdgeIx) -> (SegmentId, usize) {
        let (s, slot) = self.edge_slot[e.index()];
        (s, slot as usize)
    }

    /// Segments having `v` as a terminal. A cycle segment appears twice.
    pub fn at_terminal(&self, v: NodeIx) -> &[(SegmentId, End)] {
        &self.terminal_ends[v.index()]
    }
}

fn walk(
    net: &RoadNetwork,
    start: NodeIx,
    first: EdgeIx,
    used: &mut [bool],
) -> (Vec<NodeIx>, Vec<EdgeIx>) {
    let mut nodes = vec![start];
    let mut edges = Vec::new();
    let mut e = first;
    let mut cur = start;
    loop {
        used[e.index()] = true;
        edges.push(e);
        cur = net.edge(e).other(cur);
        nodes.push(cur);
        if cur == start || net.degree(cur) != 2 {
            break;
        }
        let nb = net.neighbors(cur);
        let next = if nb[0].0 == e { nb[1].0 } else { nb[0].0 };
        if used[next.index()] {
            break;
        }
        e = next;
    }
    (nodes, edges)
}

pub fn build_segments(net: &RoadNetwork) -> Segments {
    let mut used = vec![false; net.edge_count()];
    let mut chains = Vec::new();
    for i in 0..net.node_count() {
        let v = NodeIx(i as u32);
        match net.degree(v) {
            0 => log::warn!("isolated node {} ignored", net.node(v).id),
            2 => {}
            _ => {
                for &(e, _) in net.neighbors(v) {
                    if !used[e.index()] {
                        chains.push(walk(net, v, e, &mut used));
                    }
                }
            }
        }
    }
    let mut by_id: Vec<NodeIx> = (0..net.node_count() as u32)
        .map(NodeIx)
        .filter(|&v| net.degree(v) == 2)
        .collect();
    by_id.sort_by_key(|&v| net.node(v).id);
    for v in by_id {
        let (e, _) = net.neighbors(v)[0];
        if !used[e.index()] {
            log::warn!(
                "cycle without intersection split at node {}",
                net.node(v).id
            );
            chains.push(walk(net, v, e, &mut used));
        }
    }

    let mut edge_slot = vec![(SegmentId(0), 0); net.edge_count()];
    let mut terminal_ends = vec![Vec::new(); net.node_count()];
    let list = chains
        .into_iter()
        .enumerate()
        .map(|(i, (nodes, edges))| {
            let id = SegmentId(i as u32);
            let mut cum = Vec::with_capacity(nodes.len());
            cum.push(0.0);
            for (slot, &e) in edges.iter().enumerate() {
                edge_slot[e.index()] = (id, slot as u32);
                cum.push(cum[slot] + net.edge(e).length);
            }
            let seg = Segment {
                id,
                length: *cum.last().unwrap(),
                nodes,
                edges,
                cum,
            };
            terminal_ends[seg.start().index()].push((id, End::Start));
            terminal_ends[seg.end().index()].push((id, End::End));
            seg
        })
        .collect();
    Segments {
        list,
        edge_slot,
        terminal_ends,
    }
}
