//! Road network substrate: junction graph, degree-2-collapsed segments, stars,
//! the star graph, border nodes and point location.

mod border;
mod paths;
mod segments;
mod spatial;
mod stars;
pub mod synthetic;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{EdgeIx, NodeIx, SegmentId};

pub use border::{border_nodes, Subgraph};
pub use paths::{Dijkstra, DistanceField, Position};
pub use segments::{build_segments, End, Segment, Segments};
pub use spatial::{GeoPoint, SpatialIndex, DEFAULT_CELL_M, DEFAULT_MARGIN_M};
pub use stars::{build_star_graph, build_stars, Star, StarBallCache, StarGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u64,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: u64,
    pub a: NodeIx,
    pub b: NodeIx,
    /// Meters.
    pub length: f64,
}

impl Edge {
    pub fn other(&self, v: NodeIx) -> NodeIx {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Edge record as it appears in an edge file, before endpoint resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEdge {
    pub id: u64,
    pub a: u64,
    pub b: u64,
    pub length: f64,
}

/// Undirected road graph. Immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(EdgeIx, NodeIx)>>,
    #[serde(skip)]
    lookup: HashMap<u64, NodeIx>,
}

impl PartialEq for RoadNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.adjacency == other.adjacency
    }
}

impl RoadNetwork {
    /// Builds a network from node records and edges that reference node ids.
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<RawEdge>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if lookup.insert(n.id, NodeIx(i as u32)).is_some() {
                return Err(Error::Integrity(format!("duplicate node id {}", n.id)));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut resolved = Vec::with_capacity(edges.len());
        let mut seen_edge_ids = HashMap::with_capacity(edges.len());
        for raw in edges {
            if seen_edge_ids.insert(raw.id, ()).is_some() {
                return Err(Error::Integrity(format!("duplicate edge id {}", raw.id)));
            }
            let a = *lookup.get(&raw.a).ok_or_else(|| {
                Error::Integrity(format!("edge {} references missing node {}", raw.id, raw.a))
            })?;
            let b = *lookup.get(&raw.b).ok_or_else(|| {
                Error::Integrity(format!("edge {} references missing node {}", raw.id, raw.b))
            })?;
            if a == b {
                return Err(Error::Integrity(format!("edge {} is a self-loop", raw.id)));
            }
            if !(raw.length.is_finite() && raw.length >= 0.0) {
                return Err(Error::Integrity(format!(
                    "edge {} has invalid length {}",
                    raw.id, raw.length
                )));
            }
            let ix = EdgeIx(resolved.len() as u32);
            adjacency[a.index()].push((ix, b));
            adjacency[b.index()].push((ix, a));
            resolved.push(Edge {
                id: raw.id,
                a,
                b,
                length: raw.length,
            });
        }
        Ok(RoadNetwork {
            nodes,
            edges: resolved,
            adjacency,
            lookup,
        })
    }

    /// Parses node and edge file contents. `labels` name the sources in errors.
    pub fn parse(nodes_src: &str, edges_src: &str, labels: (&Path, &Path)) -> Result<Self> {
        let nodes = parse_lines(nodes_src, labels.0, |f| {
            if f.len() < 3 {
                return Err("expected `node_id longitude latitude`".into());
            }
            Ok(Node {
                id: parse_field(f[0], "node_id")?,
                lon: parse_field(f[1], "longitude")?,
                lat: parse_field(f[2], "latitude")?,
            })
        })?;
        let edges = parse_lines(edges_src, labels.1, |f| {
            if f.len() < 4 {
                return Err("expected `edge_id node_id_a node_id_b length`".into());
            }
            Ok(RawEdge {
                id: parse_field(f[0], "edge_id")?,
                a: parse_field(f[1], "node_id_a")?,
                b: parse_field(f[2], "node_id_b")?,
                length: parse_field(f[3], "length")?,
            })
        })?;
        Self::from_parts(nodes, edges)
    }

    pub fn load(nodes_path: impl AsRef<Path>, edges_path: impl AsRef<Path>) -> Result<Self> {
        let (np, ep) = (nodes_path.as_ref(), edges_path.as_ref());
        let nodes = fs::read_to_string(np).map_err(|e| Error::io(np, e))?;
        let edges = fs::read_to_string(ep).map_err(|e| Error::io(ep, e))?;
        let net = Self::parse(&nodes, &edges, (np, ep))?;
        log::info!(
            "loaded network: {} nodes, {} edges",
            net.node_count(),
            net.edge_count()
        );
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, v: NodeIx) -> &Node {
        &self.nodes[v.index()]
    }

    pub fn edge(&self, e: EdgeIx) -> &Edge {
        &self.edges[e.index()]
    }

    pub fn degree(&self, v: NodeIx) -> usize {
        self.adjacency[v.index()].len()
    }

    pub fn neighbors(&self, v: NodeIx) -> &[(EdgeIx, NodeIx)] {
        &self.adjacency[v.index()]
    }

    pub fn node_by_id(&self, id: u64) -> Option<NodeIx> {
        self.lookup.get(&id).copied()
    }

    pub(crate) fn rebuild_lookup(&mut self) {
        self.lookup = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, NodeIx(i as u32)))
            .collect();
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
    s.parse()
        .map_err(|_| format!("invalid {what} `{s}`"))
}

fn parse_lines<T>(
    src: &str,
    path: &Path,
    mut f: impl FnMut(&[&str]) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let item = f(&fields).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        out.push(item);
    }
    Ok(out)
}

/// A network together with every structure derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoadMap {
    pub network: RoadNetwork,
    pub segments: Segments,
    pub stars: StarGraph,
    pub spatial: SpatialIndex,
}

impl RoadMap {
    pub fn build(network: RoadNetwork) -> Self {
        Self::build_with(network, DEFAULT_CELL_M, DEFAULT_MARGIN_M)
    }

    pub fn build_with(network: RoadNetwork, cell_m: f64, margin_m: f64) -> Self {
        let segments = build_segments(&network);
        let stars = build_star_graph(build_stars(&network, &segments));
        let spatial = SpatialIndex::build(&network, &segments, cell_m, margin_m);
        RoadMap {
            network,
            segments,
            stars,
            spatial,
        }
    }

    pub(crate) fn after_deserialize(&mut self) {
        self.network.rebuild_lookup();
    }

    pub fn segment(&self, id: SegmentId) -> &Segment {
        self.segments.get(id)
    }

    pub fn locate(&self, point: GeoPoint) -> Result<Position> {
        self.spatial.locate(&self.network, &self.segments, point)
    }

    /// Longitude/latitude of a position, interpolated along its edge.
    pub fn point_at(&self, pos: Position) -> GeoPoint {
        let seg = self.segments.get(pos.segment);
        let (edge_pos, along) = seg.edge_at(pos.offset);
        let from = self.network.node(seg.nodes[edge_pos]);
        let to = self.network.node(seg.nodes[edge_pos + 1]);
        let len = self.network.edge(seg.edges[edge_pos]).length;
        let t = if len > 0.0 { (along / len).clamp(0.0, 1.0) } else { 0.0 };
        GeoPoint {
            lon: from.lon + t * (to.lon - from.lon),
            lat: from.lat + t * (to.lat - from.lat),
        }
    }

    /// Border nodes of the subgraph made of `segments`.
    pub fn border_nodes(&self, segments: &[SegmentId]) -> Vec<NodeIx> {
        border_nodes(&self.network, &self.segments, segments)
    }

    /// Total number of road edges covered by `segments`.
    pub fn edge_total(&self, segments: &[SegmentId]) -> usize {
        segments
            .iter()
            .map(|&s| self.segments.get(s).edges.len())
            .sum()
    }
}
