use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starcloak::baseline::{expansion_order, network_expansion, random_sampling, sigma_ball, Occupancy};
use starcloak::engine::Reach;
use starcloak::ids::{NodeIx, SegmentId, UserId};
use starcloak::network::{synthetic, Node, Position, RawEdge, RoadMap, RoadNetwork};

/// Spine of `n` 100 m edges with a 1 km tooth hanging off every inner spine node.
fn comb(n: u64) -> RoadMap {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for i in 0..=n {
        nodes.push(Node {
            id: i,
            lon: -84.0 + i as f64 * 0.001,
            lat: 33.0,
        });
        if i > 0 {
            edges.push(RawEdge {
                id: i,
                a: i - 1,
                b: i,
                length: 100.0,
            });
        }
        if i > 0 && i < n {
            nodes.push(Node {
                id: 1000 + i,
                lon: -84.0 + i as f64 * 0.001,
                lat: 33.01,
            });
            edges.push(RawEdge {
                id: 1000 + i,
                a: i,
                b: 1000 + i,
                length: 1000.0,
            });
        }
    }
    RoadMap::build(RoadNetwork::from_parts(nodes, edges).unwrap())
}

fn spine_segment(map: &RoadMap, a: u64, b: u64) -> SegmentId {
    let (na, nb) = (map.network.node_by_id(a).unwrap(), map.network.node_by_id(b).unwrap());
    map.segments
        .iter()
        .find(|s| s.terminals() == [na, nb] || s.terminals() == [nb, na])
        .unwrap()
        .id
}

fn mid(map: &RoadMap, s: SegmentId) -> Position {
    Position {
        segment: s,
        offset: map.segment(s).length / 2.0,
    }
}

fn alone(seg: SegmentId) -> Occupancy {
    Occupancy::from([(seg, BTreeSet::from([UserId(1)]))])
}

#[test]
fn trivial_requirements_keep_the_seed() {
    let map = comb(8);
    let seed = spine_segment(&map, 4, 5);
    let ball = sigma_ball(&map, Reach::Hops, seed, 2);
    let occ = alone(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(random_sampling(seed, 1, 1, &ball, &occ, &mut rng), Some(vec![seed]));
    assert_eq!(network_expansion(&map, mid(&map, seed), 1, 1, &ball, &occ), Some(vec![seed]));
}

#[test]
fn exhausted_ball_drops() {
    let map = comb(8);
    let seed = spine_segment(&map, 4, 5);
    let ball = sigma_ball(&map, Reach::Hops, seed, 1);
    let occ = alone(seed);
    let too_many = ball.len() as u32 + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(random_sampling(seed, 1, too_many, &ball, &occ, &mut rng), None);
    assert_eq!(network_expansion(&map, mid(&map, seed), 1, too_many, &ball, &occ), None);
    assert_eq!(random_sampling(seed, 2, 1, &ball, &occ, &mut rng), None);
}

#[test]
fn chain_expansion_takes_both_neighbors() {
    let map = comb(8);
    let seed = spine_segment(&map, 4, 5);
    let ball = sigma_ball(&map, Reach::Hops, seed, 3);
    let got = network_expansion(&map, mid(&map, seed), 1, 3, &ball, &alone(seed)).unwrap();
    let want: BTreeSet<SegmentId> = [seed, spine_segment(&map, 3, 4), spine_segment(&map, 5, 6)].into();
    assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), want);
}

/// Critical value of a chi-square distribution at upper tail 0.01
/// (Wilson-Hilferty approximation).
fn chi2_crit_001(df: f64) -> f64 {
    let z = 2.326_348;
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

#[test]
fn random_sampling_is_uniform_over_the_ball() {
    let map = RoadMap::build(synthetic::grid_network(&Default::default()));
    let seed = map.stars.get(starcloak::ids::StarId(150)).segments[0];
    let ball = sigma_ball(&map, Reach::Hops, seed, 2);
    let occ = alone(seed);
    let others: Vec<SegmentId> = ball.iter().copied().filter(|&s| s != seed).collect();
    let mut counts: BTreeMap<SegmentId, usize> = others.iter().map(|&s| (s, 0)).collect();
    let runs = 1000;
    for r in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(r);
        let region = random_sampling(seed, 1, 4, &ball, &occ, &mut rng).unwrap();
        assert_eq!(region.len(), 4);
        assert!(region.contains(&seed));
        for s in region {
            if s != seed {
                *counts.get_mut(&s).expect("sample outside the ball") += 1;
            }
        }
    }
    let m = others.len() as f64;
    let expected = runs as f64 * 3.0 / m;
    let stat: f64 = counts
        .values()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    assert!(stat < chi2_crit_001(m - 1.0), "chi-square {stat} over {m} segments");
}

/// Reference midpoint distances by plain Dijkstra from the seed's chain nodes.
fn oracle_midpoints(map: &RoadMap, seed: SegmentId) -> BTreeMap<SegmentId, f64> {
    let net = &map.network;
    let seg = map.segment(seed);
    let half = seg.length / 2.0;
    let mut dist = vec![f64::INFINITY; net.node_count()];
    for (i, &v) in seg.nodes.iter().enumerate() {
        dist[v.index()] = dist[v.index()].min((seg.cum[i] - half).abs());
    }
    let mut done = vec![false; net.node_count()];
    loop {
        let Some(v) = (0..net.node_count())
            .filter(|&v| !done[v] && dist[v].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        done[v] = true;
        for &(e, w) in net.neighbors(NodeIx(v as u32)) {
            let nd = dist[v] + net.edge(e).length;
            if nd < dist[w.index()] {
                dist[w.index()] = nd;
            }
        }
    }
    map.segments
        .iter()
        .map(|s| {
            let d = if s.id == seed {
                0.0
            } else {
                s.terminals()
                    .iter()
                    .map(|t| dist[t.index()] + s.length / 2.0)
                    .fold(f64::INFINITY, f64::min)
            };
            (s.id, d)
        })
        .collect()
}

fn touches(map: &RoadMap, a: SegmentId, b: SegmentId) -> bool {
    let ta = map.segment(a).terminals();
    map.segment(b).terminals().iter().any(|t| ta.contains(t))
}

#[test]
fn expansion_follows_reference_midpoint_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..40 {
        let spec = synthetic::GridSpec {
            cols: 8,
            rows: 8,
            seed: trial,
            ..Default::default()
        };
        let map = RoadMap::build(synthetic::grid_network(&spec));
        let seed = SegmentId(rng.random_range(0..map.segments.len() as u32));
        let ball = sigma_ball(&map, Reach::Hops, seed, 2);
        let reference = oracle_midpoints(&map, seed);

        let mut want = vec![seed];
        while let Some(next) = ball
            .iter()
            .copied()
            .filter(|s| !want.contains(s))
            .filter(|&s| want.iter().any(|&r| touches(&map, r, s)))
            .min_by(|a, b| reference[a].total_cmp(&reference[b]).then(a.cmp(b)))
        {
            want.push(next);
        }

        let origin = mid(&map, seed);
        let none = Occupancy::new();
        let got = expansion_order(&map, origin, &ball, |n, _| n == want.len(), &none);
        assert_eq!(got.as_ref(), Some(&want), "trial {trial}");
        assert_eq!(expansion_order(&map, origin, &ball, |n, _| n > want.len(), &none), None);
    }
}
