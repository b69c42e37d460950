use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starcloak::ids::{EdgeIx, NodeIx, SegmentId, StarId};
use starcloak::network::{Node, RawEdge, RoadMap, RoadNetwork};

pub fn random_network(rng: &mut ChaCha8Rng) -> RoadNetwork {
    let n = rng.random_range(2..=50u64);
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: i * 3 + 1,
            lon: -84.0 + rng.random::<f64>() * 0.01,
            lat: 33.0 + rng.random::<f64>() * 0.01,
        })
        .collect();
    let density = rng.random_range(0.5..2.5);
    let m = ((n as f64) * density) as usize;
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for _ in 0..m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        edges.push(RawEdge {
            id: edges.len() as u64 + 100,
            a: nodes[a as usize].id,
            b: nodes[b as usize].id,
            length: rng.random_range(10.0..500.0),
        });
    }
    RoadNetwork::from_parts(nodes, edges).unwrap()
}

fn find(p: &mut [usize], x: usize) -> usize {
    if p[x] != x {
        let r = find(p, p[x]);
        p[x] = r;
    }
    p[x]
}

/// Edges joined whenever they meet at a degree-2 node.
pub fn oracle_segments(net: &RoadNetwork) -> BTreeSet<BTreeSet<EdgeIx>> {
    let mut p: Vec<usize> = (0..net.edge_count()).collect();
    for v in 0..net.node_count() {
        let nb = net.neighbors(NodeIx(v as u32));
        if nb.len() == 2 {
            let (a, b) = (find(&mut p, nb[0].0.index()), find(&mut p, nb[1].0.index()));
            p[a] = b;
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<EdgeIx>> = BTreeMap::new();
    for e in 0..net.edge_count() {
        let r = find(&mut p, e);
        groups.entry(r).or_default().insert(EdgeIx(e as u32));
    }
    groups.into_values().collect()
}

pub fn oracle_border(net: &RoadNetwork, edges: &BTreeSet<EdgeIx>) -> Vec<NodeIx> {
    let nodes: BTreeSet<NodeIx> = edges
        .iter()
        .flat_map(|&e| [net.edge(e).a, net.edge(e).b])
        .collect();
    nodes
        .into_iter()
        .filter(|&v| net.neighbors(v).iter().any(|(e, _)| !edges.contains(e)))
        .collect()
}

pub fn oracle_hops(adj: &BTreeMap<StarId, BTreeSet<StarId>>, a: StarId) -> BTreeMap<StarId, u32> {
    let mut dist = BTreeMap::from([(a, 0)]);
    let mut q = VecDeque::from([a]);
    while let Some(x) = q.pop_front() {
        let d = dist[&x];
        for &y in &adj[&x] {
            if !dist.contains_key(&y) {
                dist.insert(y, d + 1);
                q.push_back(y);
            }
        }
    }
    dist
}

pub fn check(map: &RoadMap, rng: &mut ChaCha8Rng) {
    let net = &map.network;
    let built: BTreeSet<BTreeSet<EdgeIx>> = map
        .segments
        .iter()
        .map(|s| s.edges.iter().copied().collect())
        .collect();
    assert_eq!(built, oracle_segments(net), "segment partition");

    for s in map.segments.iter() {
        assert_eq!(s.nodes.len(), s.edges.len() + 1);
        for (i, &e) in s.edges.iter().enumerate() {
            let edge = net.edge(e);
            let ends = [s.nodes[i], s.nodes[i + 1]];
            assert!(ends.contains(&edge.a) && ends.contains(&edge.b), "chain order");
        }
        for &v in s.interior() {
            assert_eq!(net.degree(v), 2, "interior degree");
        }
        if !s.is_cycle() {
            for v in s.terminals() {
                assert_ne!(net.degree(v), 2, "terminal degree");
            }
        }
    }

    let mut adj: BTreeMap<StarId, BTreeSet<StarId>> = BTreeMap::new();
    let anchors: Vec<NodeIx> = (0..net.node_count())
        .map(|i| NodeIx(i as u32))
        .filter(|&v| net.degree(v) >= 3)
        .collect();
    assert_eq!(map.stars.len(), anchors.len(), "star census");
    for star in map.stars.stars() {
        assert!(net.degree(star.anchor) >= 3);
        let expect: BTreeSet<SegmentId> = net
            .neighbors(star.anchor)
            .iter()
            .map(|&(e, _)| map.segments.of_edge(e).0)
            .collect();
        assert_eq!(star.segments.iter().copied().collect::<BTreeSet<_>>(), expect);
        adj.insert(star.id, BTreeSet::new());
    }
    for a in map.stars.stars() {
        for b in map.stars.stars() {
            if a.id != b.id && a.segments.iter().any(|s| b.segments.contains(s)) {
                adj.get_mut(&a.id).unwrap().insert(b.id);
            }
        }
    }
    for star in map.stars.stars() {
        let got: BTreeSet<StarId> = map.stars.neighbors(star.id).iter().copied().collect();
        assert_eq!(got, adj[&star.id], "star adjacency");
    }
    if let Some(first) = map.stars.stars().first() {
        let hops = oracle_hops(&adj, first.id);
        for other in map.stars.stars() {
            let got = map.stars.hop_distance(first.id, other.id, u32::MAX).unwrap();
            assert_eq!(got, hops.get(&other.id).copied(), "hop distance");
        }
    }

    let n = map.segments.len();
    if n > 0 {
        for _ in 0..5 {
            let pick: Vec<SegmentId> = (0..n)
                .filter(|_| rng.random_bool(0.3))
                .map(|i| SegmentId(i as u32))
                .collect();
            let edges: BTreeSet<EdgeIx> = pick
                .iter()
                .flat_map(|&s| map.segment(s).edges.iter().copied())
                .collect();
            assert_eq!(map.border_nodes(&pick), oracle_border(net, &edges), "border nodes");
        }
    }
}

/// Builds `count` random networks and checks each against the oracles.
pub fn check_random_networks(count: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let map = RoadMap::build(random_network(&mut rng));
        check(&map, &mut rng);
    }
}
