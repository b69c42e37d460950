use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starcloak::engine::{prune, prune_rng, ActiveIndex, CandidateStarSet, ScriptedPicker, UniformPicker};
use starcloak::ids::{SegmentId, StarId};
use starcloak::network::{synthetic, RoadMap, Star, StarGraph};

pub fn star_graph(segments: &[Vec<u32>]) -> StarGraph {
    let stars = segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut segs: Vec<SegmentId> = s.iter().map(|&x| SegmentId(x)).collect();
            segs.sort_unstable();
            segs.dedup();
            Star {
                id: StarId(i as u32),
                anchor: starcloak::ids::NodeIx(i as u32),
                segments: segs,
            }
        })
        .collect();
    StarGraph::from_stars(stars)
}

/// Minimum number of stars touching every segment.
pub fn min_cover(graph: &StarGraph, segs: &[SegmentId]) -> usize {
    let n = graph.len();
    let mut best = usize::MAX;
    for mask in 0u32..(1 << n) {
        let k = mask.count_ones() as usize;
        if k >= best {
            continue;
        }
        let ok = segs
            .iter()
            .all(|&s| graph.stars_of_segment(s).iter().any(|st| mask & (1 << st.0) != 0));
        if ok {
            best = k;
        }
    }
    best
}

/// Mean randomized cover over `runs` seeds against the brute-force optimum,
/// on `instances` random star graphs.
pub fn check_select_star(instances: usize, runs: u64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..instances {
        let n = rng.random_range(2..=10usize);
        let m = rng.random_range(1..=15u32);
        let mut per_star: Vec<Vec<u32>> = vec![Vec::new(); n];
        for seg in 0..m {
            let a = rng.random_range(0..n);
            per_star[a].push(seg);
            if rng.random_bool(0.85) {
                let b = (a + rng.random_range(1..n)) % n;
                per_star[b].push(seg);
            }
        }
        let graph = star_graph(&per_star);
        let mut order: Vec<SegmentId> = (0..m).map(SegmentId).collect();
        order.shuffle(&mut rng);
        let opt = min_cover(&graph, &order) as f64;
        let mut total = 0.0;
        for run in 0..runs {
            let mut r = ChaCha8Rng::seed_from_u64(run);
            let mut active = ActiveIndex::new();
            for &s in &order {
                active.select_star(&graph, s, |_| 1.0, &mut r).unwrap();
            }
            total += active.active_stars().count() as f64;
        }
        let mean = total / runs as f64;
        assert!(mean >= opt, "a cover below the optimum");
        assert!(mean <= 2.05 * opt, "mean {mean} vs optimum {opt}");
    }
}

pub fn candidate(stars: &[u32], fixed: &[u32], l_max: u32) -> CandidateStarSet {
    CandidateStarSet {
        id: 0,
        stars: stars.iter().map(|&s| StarId(s)).collect(),
        nodes: Vec::new(),
        queries: Vec::new(),
        l_max,
        fixed: fixed.iter().map(|&s| StarId(s)).collect(),
    }
}

pub fn ids(xs: &[u32]) -> Vec<StarId> {
    xs.iter().map(|&x| StarId(x)).collect()
}

/// Star i is the star labelled i in the walkthrough; segments are numbered by
/// the pair of stars they join.
pub fn walkthrough_graph() -> StarGraph {
    let joins: [(u32, u32, u32); 11] = [
        (1, 5, 1),
        (2, 5, 10),
        (3, 5, 6),
        (4, 7, 2),
        (5, 7, 12),
        (6, 9, 3),
        (7, 9, 11),
        (8, 9, 15),
        (9, 13, 4),
        (10, 13, 11),
        (13, 12, 11),
    ];
    let mut per_star: Vec<Vec<u32>> = vec![Vec::new(); 16];
    for (seg, a, b) in joins {
        per_star[a as usize].push(seg);
        per_star[b as usize].push(seg);
    }
    for (i, s) in per_star.iter_mut().enumerate() {
        if s.is_empty() {
            s.push(100 + i as u32);
        }
    }
    star_graph(&per_star)
}

pub fn check_walkthrough() {
    let graph = walkthrough_graph();
    let theta = candidate(&[5, 6, 7, 9, 10, 11, 12, 13, 15], &[6, 11, 12], 9);
    let mut picker = ScriptedPicker(VecDeque::from(ids(&[5, 7, 9])));
    let trace = prune(&theta, &graph, &mut picker);
    assert!(picker.0.is_empty());

    let fixed: BTreeSet<StarId> = theta.fixed.iter().copied().collect();
    let removable: Vec<Vec<StarId>> = trace
        .boundaries
        .iter()
        .map(|b| b.iter().copied().filter(|s| !fixed.contains(s)).collect())
        .collect();
    assert_eq!(removable, vec![ids(&[5, 7, 9, 13]), ids(&[7, 9, 10, 13]), ids(&[9, 10, 13])]);
    assert_eq!(trace.removed, ids(&[5, 7]));
    assert_eq!(trace.restored, Some(StarId(9)));
    assert_eq!(trace.stars, ids(&[6, 9, 10, 11, 12, 13, 15]));
    let segs: Vec<SegmentId> = [2, 3, 5, 6, 7, 8, 9, 10, 13].into_iter().map(SegmentId).collect();
    assert_eq!(trace.segments, segs);

    for last in [10, 13] {
        let mut picker = ScriptedPicker(VecDeque::from(ids(&[5, 7, last])));
        let t = prune(&theta, &graph, &mut picker);
        assert_eq!(t.restored, Some(StarId(last)));
        assert_eq!(t.stars, trace.stars);
    }
}

pub fn check_seeded_prunings(count: u64) {
    let map = RoadMap::build(synthetic::grid_network(&Default::default()));
    let graph = &map.stars;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..count {
        let center = StarId(rng.random_range(0..graph.len() as u32));
        let radius = rng.random_range(1..=4);
        let stars = graph.stars_within(center, radius).unwrap();
        let fixed: Vec<StarId> = stars.iter().copied().filter(|_| rng.random_bool(0.2)).collect();
        let total = graph.segments_of(&stars).len() as u32;
        let floor = graph.segments_of(&fixed).len() as u32;
        let l_max = rng.random_range(floor.max(1)..=total);
        let theta = CandidateStarSet {
            id: i,
            stars: stars.clone(),
            nodes: Vec::new(),
            queries: Vec::new(),
            l_max,
            fixed: fixed.clone(),
        };
        let mut picker = UniformPicker(prune_rng(7, i));
        let t = prune(&theta, graph, &mut picker);

        let out: BTreeSet<StarId> = t.stars.iter().copied().collect();
        assert!(fixed.iter().all(|f| out.contains(f)), "fixed star lost");
        assert!(t.segments.len() >= l_max as usize, "segment bound");
        assert_eq!(t.segments, graph.segments_of(&t.stars));
        for r in &t.removed {
            assert!(!out.contains(r) && !fixed.contains(r));
        }
        match t.restored {
            Some(r) => {
                assert!(out.contains(&r) && !fixed.contains(&r));
                let without: Vec<StarId> = t.stars.iter().copied().filter(|&s| s != r).collect();
                assert!(graph.segments_of(&without).len() < l_max as usize);
            }
            None => {
                let bs = starcloak::engine::boundary(graph, &out);
                assert!(bs.iter().all(|s| fixed.contains(s)));
            }
        }
    }
}
