//! Jittered grid road networks for tests and desk-scale experiments.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Node, RawEdge, RoadNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub cols: usize,
    pub rows: usize,
    pub spacing_m: f64,
    /// Node displacement as a fraction of the spacing.
    pub jitter: f64,
    /// Fraction of grid edges removed, never dropping a node below degree 2.
    pub drop_fraction: f64,
    /// Fraction of edges split by one or two degree-2 nodes.
    pub subdivide_fraction: f64,
    /// Fraction of nodes that receive a dead-end spur.
    pub spur_fraction: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cols: 20,
            rows: 20,
            spacing_m: 250.0,
            jitter: 0.2,
            drop_fraction: 0.12,
            subdivide_fraction: 0.15,
            spur_fraction: 0.03,
            origin_lon: -84.39,
            origin_lat: 33.75,
            seed: 7,
        }
    }
}

const M_PER_DEG: f64 = 6_371_008.8 * std::f64::consts::PI / 180.0;

pub fn grid_network(spec: &GridSpec) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let kx = M_PER_DEG * spec.origin_lat.to_radians().cos();
    let mut xy: Vec<(f64, f64)> = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let jx = rng.random_range(-1.0..=1.0) * spec.jitter * spec.spacing_m;
            let jy = rng.random_range(-1.0..=1.0) * spec.jitter * spec.spacing_m;
            xy.push((c as f64 * spec.spacing_m + jx, r as f64 * spec.spacing_m + jy));
        }
    }
    let at = |r: usize, c: usize| r * spec.cols + c;
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if c + 1 < spec.cols {
                edges.insert((at(r, c), at(r, c + 1)));
            }
            if r + 1 < spec.rows {
                edges.insert((at(r, c), at(r + 1, c)));
            }
        }
    }
    let mut degree = vec![0usize; xy.len()];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let candidates: Vec<(usize, usize)> = edges.iter().copied().collect();
    for (a, b) in candidates {
        if rng.random::<f64>() < spec.drop_fraction && degree[a] > 2 && degree[b] > 2 {
            edges.remove(&(a, b));
            degree[a] -= 1;
            degree[b] -= 1;
        }
    }
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for &(a, b) in &edges {
        if rng.random::<f64>() < spec.subdivide_fraction {
            let pieces = rng.random_range(2..=3);
            let (pa, pb) = (xy[a], xy[b]);
            let mut chain = vec![a];
            for i in 1..pieces {
                let t = i as f64 / pieces as f64;
                let wobble = rng.random_range(-0.08..=0.08) * spec.spacing_m;
                let (dx, dy) = (pb.0 - pa.0, pb.1 - pa.1);
                let norm = (dx * dx + dy * dy).sqrt().max(1e-9);
                xy.push((
                    pa.0 + t * dx - dy / norm * wobble,
                    pa.1 + t * dy + dx / norm * wobble,
                ));
                chain.push(xy.len() - 1);
            }
            chain.push(b);
            chains.push(chain);
        } else {
            chains.push(vec![a, b]);
        }
    }
    let grid_nodes = spec.rows * spec.cols;
    for v in 0..grid_nodes {
        if rng.random::<f64>() < spec.spur_fraction {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let len = spec.spacing_m * 0.35;
            xy.push((xy[v].0 + len * angle.cos(), xy[v].1 + len * angle.sin()));
            chains.push(vec![v, xy.len() - 1]);
        }
    }

    let nodes: Vec<Node> = xy
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Node {
            id: i as u64 + 1,
            lon: spec.origin_lon + x / kx,
            lat: spec.origin_lat + y / M_PER_DEG,
        })
        .collect();
    let mut raw = Vec::new();
    for chain in chains {
        for w in chain.windows(2) {
            let (pa, pb) = (xy[w[0]], xy[w[1]]);
            raw.push(RawEdge {
                id: raw.len() as u64 + 1,
                a: w[0] as u64 + 1,
                b: w[1] as u64 + 1,
                length: ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt(),
            });
        }
    }
    RoadNetwork::from_parts(nodes, raw).expect("generated grid is well formed")
}

/// Writes a network in the node/edge text formats.
pub fn to_files(net: &RoadNetwork) -> (String, String) {
    use std::fmt::Write;
    let mut nodes = String::from("# node_id longitude latitude\n");
    for n in net.nodes() {
        writeln!(nodes, "{} {:.9} {:.9}", n.id, n.lon, n.lat).unwrap();
    }
    let mut edges = String::from("# edge_id node_id_a node_id_b length\n");
    for e in net.edges() {
        writeln!(
            edges,
            "{} {} {} {:.6}",
            e.id,
            net.node(e.a).id,
            net.node(e.b).id,
            e.length
        )
        .unwrap();
    }
    (nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_desk_scale() {
        let net = grid_network(&GridSpec::default());
        assert!(net.node_count() >= 450 && net.node_count() <= 650, "{}", net.node_count());
        let same = grid_network(&GridSpec::default());
        assert_eq!(net, same);
    }
}
