use std::collections::{BTreeMap, HashMap, VecDeque};

use super::graph::{CandidateStarSet, CloakingGraph, Reach};
use crate::ids::{CloakNodeId, StarId};
use crate::network::RoadMap;

pub const DEFAULT_COMBINATION_CAP: usize = 256;

/// Unbounded candidate star-set search starting at `u`.
pub fn search_basic(
    g: &CloakingGraph,
    map: &RoadMap,
    reach: Reach,
    u: CloakNodeId,
    cap: usize,
) -> Option<CandidateStarSet> {
    search_levels(g, map, reach, u, None, cap)
}

/// Level-by-level search with compactness factor `lambda`.
pub fn search_bounded(
    g: &CloakingGraph,
    map: &RoadMap,
    reach: Reach,
    u: CloakNodeId,
    lambda: u32,
    cap: usize,
) -> Option<CandidateStarSet> {
    search_levels(g, map, reach, u, Some(lambda.max(1)), cap)
}

/// Neighbors of `u` ordered by star hop distance, then creation order.
pub fn ordered_neighbors(
    g: &CloakingGraph,
    map: &RoadMap,
    reach: Reach,
    u: CloakNodeId,
) -> Vec<(u32, CloakNodeId)> {
    let Some(un) = g.node(u) else {
        return Vec::new();
    };
    let radius = match reach {
        Reach::Hops => un.sigma_s,
        Reach::Meters => map.stars.len() as u32,
    };
    let dist: BTreeMap<StarId, u32> = map
        .stars
        .distances_within(un.star, radius)
        .unwrap_or_default()
        .into_iter()
        .collect();
    let mut out: Vec<(u32, CloakNodeId)> = un
        .neighbors
        .iter()
        .filter_map(|&v| {
            let star = g.node(v)?.star;
            Some((dist.get(&star).copied().unwrap_or(u32::MAX), v))
        })
        .collect();
    out.sort_unstable();
    out
}

struct Proximity<'a> {
    map: &'a RoadMap,
    limit: u32,
    memo: HashMap<(StarId, StarId), bool>,
}

impl Proximity<'_> {
    fn near(&mut self, a: StarId, b: StarId) -> bool {
        let key = if a <= b { (a, b) } else { (b, a) };
        let (map, limit) = (self.map, self.limit);
        *self.memo.entry(key).or_insert_with(|| {
            matches!(map.stars.hop_distance(a, b, limit), Ok(Some(_)))
        })
    }
}

fn search_levels(
    g: &CloakingGraph,
    map: &RoadMap,
    reach: Reach,
    u: CloakNodeId,
    lambda: Option<u32>,
    cap: usize,
) -> Option<CandidateStarSet> {
    let u_star = g.node(u)?.star;
    if let Some(c) = g.check_reqs(map, &[u]) {
        return Some(c);
    }
    let neighbors = ordered_neighbors(g, map, reach, u);
    let mut levels: BTreeMap<u32, Vec<CloakNodeId>> = BTreeMap::new();
    for (d, v) in neighbors {
        let level = lambda.map_or(0, |l| d / l);
        levels.entry(level).or_default().push(v);
    }
    let mut prox = lambda.map(|l| Proximity {
        map,
        limit: 2 * l - 1,
        memo: HashMap::new(),
    });
    let cap = cap.max(1);
    let last = levels.keys().next_back().copied().unwrap_or(0);
    let mut pinned_empty = true;
    let mut carried: VecDeque<Vec<CloakNodeId>> = VecDeque::new();
    for level in 0..=last {
        let members = levels.remove(&level).unwrap_or_default();
        if members.is_empty() && level > 0 {
            return None;
        }
        let mut combos = std::mem::take(&mut carried);
        let mut generated: VecDeque<Vec<CloakNodeId>> = VecDeque::new();
        for v in members {
            let vn = g.node(v)?;
            let snapshot: Vec<Vec<CloakNodeId>> = pinned_empty
                .then(Vec::new)
                .into_iter()
                .chain(combos.iter().cloned())
                .chain(generated.iter().cloned())
                .collect();
            for clique in snapshot {
                if !clique.iter().all(|c| vn.neighbors.contains(c)) {
                    continue;
                }
                if let Some(p) = prox.as_mut() {
                    let anchored = std::iter::once(u_star)
                        .chain(clique.iter().filter_map(|c| g.node(*c).map(|n| n.star)))
                        .any(|s| p.near(vn.star, s));
                    if !anchored {
                        continue;
                    }
                }
                let mut ns = Vec::with_capacity(clique.len() + 2);
                ns.push(u);
                ns.extend_from_slice(&clique);
                ns.push(v);
                if let Some(c) = g.check_reqs(map, &ns) {
                    return Some(c);
                }
                let mut grown = clique;
                grown.push(v);
                generated.push_back(grown);
                while combos.len() + generated.len() + usize::from(pinned_empty) > cap {
                    if combos.pop_front().is_none() {
                        generated.pop_front();
                    }
                }
            }
        }
        if level == 0 {
            combos.extend(generated);
            carried = combos;
        } else {
            pinned_empty = false;
            carried = generated;
        }
        if carried.is_empty() && !pinned_empty {
            return None;
        }
    }
    None
}
