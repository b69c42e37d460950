use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starcloak::engine::{prune, search_basic, CloakingGraph, NeighborRule, Reach, UniformPicker};
use starcloak::ids::{CloakNodeId, QueryId, StarId};
use starcloak::network::{synthetic, RoadMap};
use starcloak::query::QueryProfile;

mod support;

use support::engine::{candidate, check_seeded_prunings, check_select_star, check_walkthrough, walkthrough_graph};

#[test]
fn select_star_within_twice_optimal() {
    check_select_star(300, 200, 11);
}

#[test]
fn pruning_walkthrough_is_reproduced_exactly() {
    check_walkthrough();
}

#[test]
fn tight_candidate_is_returned_whole() {
    let graph = walkthrough_graph();
    let theta = candidate(&[5, 6, 7, 9, 10, 11, 12, 13, 15], &[6, 11, 12], 11);
    let mut picker = UniformPicker(ChaCha8Rng::seed_from_u64(3));
    let t = prune(&theta, &graph, &mut picker);
    assert!(t.removed.is_empty());
    assert!(t.restored.is_some());
    assert_eq!(t.stars, theta.stars);
    assert_eq!(t.segments.len(), 11);
}

#[test]
fn seeded_prunings_keep_contract() {
    check_seeded_prunings(500);
}

fn profile(rng: &mut ChaCha8Rng) -> QueryProfile {
    QueryProfile {
        delta_k: rng.random_range(1..=4),
        delta_l: rng.random_range(1..=12),
        sigma_s: rng.random_range(1..=3),
        sigma_t: 10.0,
    }
}

fn is_clique(g: &CloakingGraph, ns: &[CloakNodeId]) -> bool {
    ns.iter().enumerate().all(|(i, a)| {
        ns[i + 1..]
            .iter()
            .all(|b| g.node(*a).is_some_and(|n| n.neighbors.contains(b)))
    })
}

#[test]
fn basic_search_finds_a_set_whenever_one_exists() {
    let spec = synthetic::GridSpec {
        cols: 6,
        rows: 6,
        ..Default::default()
    };
    let map = RoadMap::build(synthetic::grid_network(&spec));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut found = 0;
    for trial in 0..400u64 {
        let mut g = CloakingGraph::new(NeighborRule::SharedSegments, Reach::Hops);
        let n = rng.random_range(1..=6);
        let center = rng.random_range(0..map.stars.len() as u32);
        let near = map.stars.stars_within(StarId(center), 2).unwrap();
        let mut last = None;
        for j in 0..n {
            let star = near[rng.random_range(0..near.len())];
            let p = profile(&mut rng);
            last = Some(g.add_query(&map, QueryId(trial * 10 + j), p, star));
        }
        let u = last.unwrap();
        let others: Vec<CloakNodeId> = g.nodes().map(|v| v.id).filter(|&v| v != u).collect();
        let mut exists = false;
        for mask in 0u32..(1 << others.len()) {
            let mut ns = vec![u];
            ns.extend((0..others.len()).filter(|i| mask & (1 << i) != 0).map(|i| others[i]));
            if is_clique(&g, &ns) && g.check_reqs(&map, &ns).is_some() {
                exists = true;
                break;
            }
        }
        let got = search_basic(&g, &map, Reach::Hops, u, 1 << 12);
        assert_eq!(got.is_some(), exists, "trial {trial}");
        if let Some(c) = got {
            found += 1;
            assert!(c.nodes.contains(&u));
            assert!(is_clique(&g, &c.nodes));
            assert_eq!(g.check_reqs(&map, &c.nodes), Some(c));
        }
    }
    assert!(found > 20, "only {found} satisfiable instances");
}
