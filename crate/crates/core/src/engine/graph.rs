use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{CloakNodeId, QueryId, StarId};
use crate::network::{Dijkstra, RoadMap};
use crate::query::QueryProfile;

/// How two cloaking nodes' shared coverage is measured for adjacency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborRule {
    #[default]
    SharedSegments,
    SharedStars,
}

/// Unit of the spatial tolerance radius.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reach {
    #[default]
    Hops,
    Meters,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ball {
    /// Sorted.
    pub stars: Vec<StarId>,
    pub segments: usize,
}

impl Ball {
    pub fn contains(&self, s: StarId) -> bool {
        self.stars.binary_search(&s).is_ok()
    }
}

/// Memoized covered star-sets.
#[derive(Debug, Clone, Default)]
pub struct Coverage {
    reach: Reach,
    cache: HashMap<(StarId, u32), Arc<Ball>>,
}

impl Coverage {
    pub fn new(reach: Reach) -> Self {
        Coverage {
            reach,
            cache: HashMap::new(),
        }
    }

    pub fn reach(&self) -> Reach {
        self.reach
    }

    pub fn ball(&mut self, map: &RoadMap, star: StarId, radius: u32) -> Arc<Ball> {
        let reach = self.reach;
        self.cache
            .entry((star, radius))
            .or_insert_with(|| Arc::new(compute_ball(map, reach, star, radius)))
            .clone()
    }
}

pub fn compute_ball(map: &RoadMap, reach: Reach, star: StarId, radius: u32) -> Ball {
    let stars = match reach {
        Reach::Hops => map.stars.stars_within(star, radius).unwrap_or_default(),
        Reach::Meters => {
            let anchor = map.stars.get(star).anchor;
            let mut found: Vec<StarId> = Dijkstra::new(&map.network, &[(anchor, 0.0)])
                .take_while(|&(_, d)| d <= radius as f64)
                .filter_map(|(v, _)| map.stars.star_at(v))
                .collect();
            found.sort_unstable();
            found
        }
    };
    let segments = map.stars.segments_of(&stars).len();
    Ball { stars, segments }
}

/// Max δk, max δl, min σs over the profiles.
pub fn combine<'a>(profiles: impl IntoIterator<Item = &'a QueryProfile>) -> (u32, u32, u32) {
    profiles
        .into_iter()
        .fold((0, 0, u32::MAX), |(k, l, s), p| {
            (k.max(p.delta_k), l.max(p.delta_l), s.min(p.sigma_s))
        })
}

#[derive(Debug, Clone)]
pub struct CloakNode {
    pub id: CloakNodeId,
    pub star: StarId,
    pub queries: BTreeMap<QueryId, QueryProfile>,
    pub delta_k: u32,
    pub delta_l: u32,
    pub sigma_s: u32,
    pub theta: Arc<Ball>,
    pub neighbors: BTreeSet<CloakNodeId>,
}

impl CloakNode {
    pub fn sc(&self) -> usize {
        self.theta.segments
    }
}

/// Stars shared by a set of cloaking nodes and the queries they would serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStarSet {
    pub id: u64,
    /// Sorted.
    pub stars: Vec<StarId>,
    pub nodes: Vec<CloakNodeId>,
    pub queries: Vec<QueryId>,
    pub l_max: u32,
    /// Sorted, deduplicated stars of the contributing nodes.
    pub fixed: Vec<StarId>,
}

pub fn intersect_sorted(a: &[StarId], b: &[StarId]) -> Vec<StarId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct CloakingGraph {
    nodes: BTreeMap<CloakNodeId, CloakNode>,
    by_star: BTreeMap<StarId, Vec<CloakNodeId>>,
    by_query: HashMap<QueryId, CloakNodeId>,
    next_id: u64,
    version: u64,
    rule: NeighborRule,
    coverage: Coverage,
}

impl CloakingGraph {
    pub fn new(rule: NeighborRule, reach: Reach) -> Self {
        CloakingGraph {
            rule,
            coverage: Coverage::new(reach),
            ..Default::default()
        }
    }

    /// Bumped on every structural change.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: CloakNodeId) -> Option<&CloakNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CloakNode> {
        self.nodes.values()
    }

    pub fn node_of(&self, q: QueryId) -> Option<CloakNodeId> {
        self.by_query.get(&q).copied()
    }

    pub fn nodes_at(&self, star: StarId) -> &[CloakNodeId] {
        self.by_star.get(&star).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn query_count(&self) -> usize {
        self.by_query.len()
    }

    pub fn ball(&mut self, map: &RoadMap, star: StarId, radius: u32) -> Arc<Ball> {
        self.coverage.ball(map, star, radius)
    }

    fn shared(&self, map: &RoadMap, a: &Ball, b: &Ball) -> usize {
        let common = intersect_sorted(&a.stars, &b.stars);
        match self.rule {
            NeighborRule::SharedSegments => map.stars.segments_of(&common).len(),
            NeighborRule::SharedStars => common.len(),
        }
    }

    fn neighborly(&self, map: &RoadMap, a: &CloakNode, b: &CloakNode) -> bool {
        a.theta.contains(b.star)
            && b.theta.contains(a.star)
            && self.shared(map, &a.theta, &b.theta) >= a.delta_l.max(b.delta_l) as usize
    }

    fn refresh_neighbors(&mut self, map: &RoadMap, id: CloakNodeId) {
        let old = std::mem::take(&mut self.nodes.get_mut(&id).unwrap().neighbors);
        for n in old {
            if let Some(node) = self.nodes.get_mut(&n) {
                node.neighbors.remove(&id);
            }
        }
        let me = &self.nodes[&id];
        let mut found = BTreeSet::new();
        for &s in &me.theta.stars {
            for &other in self.nodes_at(s) {
                if other != id && self.neighborly(map, me, &self.nodes[&other]) {
                    found.insert(other);
                }
            }
        }
        for &n in &found {
            self.nodes.get_mut(&n).unwrap().neighbors.insert(id);
        }
        self.nodes.get_mut(&id).unwrap().neighbors = found;
    }

    /// Places a query on the first compatible node of `star`, or a new node.
    pub fn add_query(
        &mut self,
        map: &RoadMap,
        q: QueryId,
        profile: QueryProfile,
        star: StarId,
    ) -> CloakNodeId {
        self.version += 1;
        let mut target = None;
        let existing: Vec<(CloakNodeId, u32, u32, usize)> = self
            .nodes_at(star)
            .iter()
            .map(|id| {
                let v = &self.nodes[id];
                (*id, v.sigma_s, v.delta_l, v.sc())
            })
            .collect();
        for (vid, sigma_s, delta_l, sc) in existing {
            let fits = if profile.sigma_s < sigma_s {
                let sc = self.coverage.ball(map, star, profile.sigma_s).segments;
                sc >= profile.delta_l.max(delta_l) as usize
            } else {
                sc >= profile.delta_l as usize
            };
            if fits {
                target = Some(vid);
                break;
            }
        }
        let id = match target {
            Some(vid) => {
                let v = self.nodes.get_mut(&vid).unwrap();
                v.queries.insert(q, profile);
                let (k, l, s) = combine(v.queries.values());
                let (old_l, old_s) = (v.delta_l, v.sigma_s);
                v.delta_k = k;
                v.delta_l = l;
                v.sigma_s = s;
                if s != old_s {
                    let theta = self.coverage.ball(map, star, s);
                    self.nodes.get_mut(&vid).unwrap().theta = theta;
                }
                if s != old_s || l != old_l {
                    self.refresh_neighbors(map, vid);
                }
                vid
            }
            None => {
                let id = CloakNodeId(self.next_id);
                self.next_id += 1;
                let theta = self.coverage.ball(map, star, profile.sigma_s);
                self.nodes.insert(
                    id,
                    CloakNode {
                        id,
                        star,
                        queries: BTreeMap::from([(q, profile)]),
                        delta_k: profile.delta_k,
                        delta_l: profile.delta_l,
                        sigma_s: profile.sigma_s,
                        theta,
                        neighbors: BTreeSet::new(),
                    },
                );
                self.by_star.entry(star).or_default().push(id);
                self.refresh_neighbors(map, id);
                id
            }
        };
        self.by_query.insert(q, id);
        id
    }

    /// Removes a query; returns its node unless the node dissolved.
    pub fn remove_query(&mut self, map: &RoadMap, q: QueryId) -> Result<Option<CloakNodeId>> {
        let vid = self.by_query.remove(&q).ok_or(Error::UnknownQuery(q))?;
        self.version += 1;
        let v = self.nodes.get_mut(&vid).unwrap();
        v.queries.remove(&q);
        if v.queries.is_empty() {
            self.drop_node(vid);
            return Ok(None);
        }
        let (k, l, s) = combine(v.queries.values());
        let (old_l, old_s) = (v.delta_l, v.sigma_s);
        v.delta_k = k;
        v.delta_l = l;
        v.sigma_s = s;
        let star = v.star;
        if s != old_s {
            let theta = self.coverage.ball(map, star, s);
            self.nodes.get_mut(&vid).unwrap().theta = theta;
        }
        if s != old_s || l != old_l {
            self.refresh_neighbors(map, vid);
        }
        Ok(Some(vid))
    }

    fn drop_node(&mut self, vid: CloakNodeId) -> Option<CloakNode> {
        let node = self.nodes.remove(&vid)?;
        for n in &node.neighbors {
            if let Some(other) = self.nodes.get_mut(n) {
                other.neighbors.remove(&vid);
            }
        }
        if let Some(list) = self.by_star.get_mut(&node.star) {
            list.retain(|&x| x != vid);
            if list.is_empty() {
                self.by_star.remove(&node.star);
            }
        }
        Some(node)
    }

    /// Deletes a node and every query it holds.
    pub fn remove_node(&mut self, vid: CloakNodeId) -> Vec<QueryId> {
        self.version += 1;
        match self.drop_node(vid) {
            Some(node) => {
                for q in node.queries.keys() {
                    self.by_query.remove(q);
                }
                node.queries.into_keys().collect()
            }
            None => Vec::new(),
        }
    }

    /// Privacy check over a node set; returns the shared star-set when it passes.
    pub fn check_reqs(&self, map: &RoadMap, ns: &[CloakNodeId]) -> Option<CandidateStarSet> {
        let first = self.nodes.get(ns.first()?)?;
        let mut stars = first.theta.stars.clone();
        let mut total = 0usize;
        for id in ns {
            let v = self.nodes.get(id)?;
            if !std::ptr::eq(v, first) {
                stars = intersect_sorted(&stars, &v.theta.stars);
            }
            total += v.queries.len();
        }
        let seg_count = map.stars.segments_of(&stars).len();
        let mut l_max = 0;
        for id in ns {
            let v = &self.nodes[id];
            if v.delta_k as usize > total || v.delta_l as usize > seg_count {
                return None;
            }
            l_max = l_max.max(v.delta_l);
        }
        let mut fixed: Vec<StarId> = ns.iter().map(|id| self.nodes[id].star).collect();
        fixed.sort_unstable();
        fixed.dedup();
        Some(CandidateStarSet {
            id: 0,
            stars,
            nodes: ns.to_vec(),
            queries: ns
                .iter()
                .flat_map(|id| self.nodes[id].queries.keys().copied())
                .collect(),
            l_max,
            fixed,
        })
    }

    /// Full scan of the maps, neighbor symmetry and combined requirements.
    pub fn check_consistency(&self, map: &RoadMap) -> std::result::Result<(), String> {
        let mut housed = 0;
        for (id, v) in &self.nodes {
            if v.queries.is_empty() {
                return Err(format!("node {id} is empty"));
            }
            if !self.nodes_at(v.star).contains(id) {
                return Err(format!("node {id} missing from star map"));
            }
            for q in v.queries.keys() {
                if self.by_query.get(q) != Some(id) {
                    return Err(format!("query {q} not mapped to node {id}"));
                }
            }
            housed += v.queries.len();
            if combine(v.queries.values()) != (v.delta_k, v.delta_l, v.sigma_s) {
                return Err(format!("node {id} requirements stale"));
            }
            let ball = compute_ball(map, self.coverage.reach(), v.star, v.sigma_s);
            if *v.theta != ball {
                return Err(format!("node {id} covered star-set stale"));
            }
            for n in &v.neighbors {
                let other = self
                    .nodes
                    .get(n)
                    .ok_or_else(|| format!("node {id} links to missing {n}"))?;
                if !other.neighbors.contains(id) {
                    return Err(format!("asymmetric link {id}-{n}"));
                }
            }
            for other in self.nodes.values() {
                if other.id == *id {
                    continue;
                }
                let linked = v.neighbors.contains(&other.id);
                let near = v.theta.contains(other.star) && other.theta.contains(v.star);
                if (linked && !near) || (near && linked != self.neighborly(map, v, other)) {
                    return Err(format!("link {id}-{} disagrees with rule", other.id));
                }
            }
        }
        if housed != self.by_query.len() {
            return Err(format!(
                "{} mapped queries but {housed} housed",
                self.by_query.len()
            ));
        }
        for (star, list) in &self.by_star {
            for id in list {
                if self.nodes.get(id).map(|v| v.star) != Some(*star) {
                    return Err(format!("star map entry {star}->{id} stale"));
                }
            }
        }
        Ok(())
    }
}
