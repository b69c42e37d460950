//! Random-sampling and network-expansion cloakers.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{compute_ball, CloakedRegion, DropReason, EngineEvent, Reach, ServedQuery};
use crate::error::{Error, Result};
use crate::ids::{QueryId, RegionId, SegmentId, UserId};
use crate::network::{DistanceField, Position, RoadMap};
use crate::query::{Intake, QueryProfile, RawQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    RandomSampling,
    NetworkExpansion,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::RandomSampling => "random",
            BaselineKind::NetworkExpansion => "expansion",
        }
    }
}

/// Distinct active users per segment.
pub type Occupancy = BTreeMap<SegmentId, BTreeSet<UserId>>;

/// Segments of every star within `sigma_s` of either terminal star of `seg`, plus `seg`.
pub fn sigma_ball(map: &RoadMap, reach: Reach, seg: SegmentId, sigma_s: u32) -> BTreeSet<SegmentId> {
    let mut stars = BTreeSet::new();
    for &s in map.stars.stars_of_segment(seg) {
        stars.extend(compute_ball(map, reach, s, sigma_s).stars);
    }
    let mut out: BTreeSet<SegmentId> = map.stars.segments_of(&stars).into_iter().collect();
    out.insert(seg);
    out
}

fn users_in<'a>(occupancy: &'a Occupancy, seg: SegmentId) -> impl Iterator<Item = UserId> + 'a {
    occupancy.get(&seg).into_iter().flatten().copied()
}

/// Grows a region from `seg` by uniform sampling without replacement from `ball`.
pub fn random_sampling<R: Rng + ?Sized>(
    seg: SegmentId,
    delta_k: u32,
    delta_l: u32,
    ball: &BTreeSet<SegmentId>,
    occupancy: &Occupancy,
    rng: &mut R,
) -> Option<Vec<SegmentId>> {
    let mut region = BTreeSet::from([seg]);
    let mut users: BTreeSet<UserId> = users_in(occupancy, seg).collect();
    let mut pool: Vec<SegmentId> = ball.iter().copied().filter(|&s| s != seg).collect();
    loop {
        if region.len() >= delta_l as usize && users.len() >= delta_k as usize {
            return Some(region.into_iter().collect());
        }
        if pool.is_empty() {
            return None;
        }
        let s = pool.swap_remove(rng.random_range(0..pool.len()));
        region.insert(s);
        users.extend(users_in(occupancy, s));
    }
}

/// Network distance from `origin` to the midpoint of every segment in `ball`.
pub fn midpoint_distances(
    map: &RoadMap,
    origin: Position,
    ball: &BTreeSet<SegmentId>,
) -> BTreeMap<SegmentId, f64> {
    let field = DistanceField::from_position(&map.network, &map.segments, origin);
    ball.iter()
        .map(|&s| {
            let mid = Position {
                segment: s,
                offset: map.segments.get(s).length / 2.0,
            };
            (s, field.to_position(&map.network, &map.segments, mid))
        })
        .collect()
}

/// Adds the adjacent segment with the nearest midpoint until the requirements hold.
pub fn network_expansion(
    map: &RoadMap,
    origin: Position,
    delta_k: u32,
    delta_l: u32,
    ball: &BTreeSet<SegmentId>,
    occupancy: &Occupancy,
) -> Option<Vec<SegmentId>> {
    expansion_order(map, origin, ball, |region, users| {
        region >= delta_l as usize && users >= delta_k as usize
    }, occupancy)
}

/// Expansion sequence starting at the origin's segment, stopping when `done` holds.
pub fn expansion_order(
    map: &RoadMap,
    origin: Position,
    ball: &BTreeSet<SegmentId>,
    mut done: impl FnMut(usize, usize) -> bool,
    occupancy: &Occupancy,
) -> Option<Vec<SegmentId>> {
    let dist = midpoint_distances(map, origin, ball);
    let seed = origin.segment;
    let mut order = vec![seed];
    let mut region = BTreeSet::from([seed]);
    let mut users: BTreeSet<UserId> = users_in(occupancy, seed).collect();
    let mut frontier: BTreeSet<SegmentId> = BTreeSet::new();
    let expand = |s: SegmentId, region: &BTreeSet<SegmentId>, frontier: &mut BTreeSet<SegmentId>| {
        for v in map.segments.get(s).terminals() {
            for &(n, _) in map.segments.at_terminal(v) {
                if ball.contains(&n) && !region.contains(&n) {
                    frontier.insert(n);
                }
            }
        }
    };
    expand(seed, &region, &mut frontier);
    loop {
        if done(region.len(), users.len()) {
            return Some(order);
        }
        let next = frontier
            .iter()
            .copied()
            .min_by(|a, b| dist[a].total_cmp(&dist[b]).then(a.cmp(b)))?;
        frontier.remove(&next);
        region.insert(next);
        order.push(next);
        users.extend(users_in(occupancy, next));
        expand(next, &region, &mut frontier);
    }
}

/// Checks a baseline region against its query's requirements.
pub fn verify_baseline_region(
    map: &RoadMap,
    reach: Reach,
    region: &CloakedRegion,
    occupancy: &Occupancy,
) -> std::result::Result<(), String> {
    for s in &region.served {
        let q = &s.query;
        if !region.segments.contains(&q.position.segment) {
            return Err(format!("region {} misses the true segment", region.id));
        }
        let users: BTreeSet<UserId> = region
            .segments
            .iter()
            .flat_map(|&seg| users_in(occupancy, seg))
            .collect();
        if users.len() < q.profile.delta_k as usize {
            return Err(format!("region {} covers {} users", region.id, users.len()));
        }
        if region.segments.len() < q.profile.delta_l as usize {
            return Err(format!("region {} too small", region.id));
        }
        let ball = sigma_ball(map, reach, q.position.segment, q.profile.sigma_s);
        if region.segments.iter().any(|s| !ball.contains(s)) {
            return Err(format!("region {} leaves the tolerance ball", region.id));
        }
        if region.time > q.t_exp {
            return Err(format!("region {} emitted after expiry", region.id));
        }
    }
    Ok(())
}

/// Per-query baseline anonymizer with the engine's event interface.
pub struct BaselineEngine {
    map: Arc<RoadMap>,
    kind: BaselineKind,
    reach: Reach,
    intake: Intake,
    pending: Vec<QueryId>,
    served_active: BTreeMap<QueryId, (UserId, SegmentId, f64)>,
    rng: ChaCha8Rng,
    next_region: u64,
    verify: bool,
}

impl BaselineEngine {
    pub fn new(map: Arc<RoadMap>, kind: BaselineKind, reach: Reach, seed: u64) -> Self {
        BaselineEngine {
            map,
            kind,
            reach,
            intake: Intake::new(),
            pending: Vec::new(),
            served_active: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_region: 0,
            verify: cfg!(debug_assertions),
        }
    }

    pub fn set_verify(&mut self, on: bool) {
        self.verify = on;
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn is_idle(&self) -> bool {
        self.intake.live_count() == 0
    }

    pub fn submit(&mut self, raw: &RawQuery) -> Result<QueryId> {
        self.intake.preprocess(raw, &self.map)
    }

    pub fn submit_at(&mut self, raw: &RawQuery, position: Position) -> Result<QueryId> {
        if self.map.segments.try_get(position.segment).is_none() {
            return Err(Error::UnknownSegment(position.segment));
        }
        self.intake.admit(raw, position)
    }

    fn occupancy(&self) -> Occupancy {
        let mut occ = Occupancy::new();
        for q in self.intake.live() {
            occ.entry(q.position.segment).or_default().insert(q.user);
        }
        for &(user, seg, _) in self.served_active.values() {
            occ.entry(seg).or_default().insert(user);
        }
        occ
    }

    pub fn cloak_one(
        &mut self,
        seg: SegmentId,
        position: Position,
        profile: QueryProfile,
        occupancy: &Occupancy,
    ) -> Option<Vec<SegmentId>> {
        let ball = sigma_ball(&self.map, self.reach, seg, profile.sigma_s);
        match self.kind {
            BaselineKind::RandomSampling => random_sampling(
                seg,
                profile.delta_k,
                profile.delta_l,
                &ball,
                occupancy,
                &mut self.rng,
            ),
            BaselineKind::NetworkExpansion => network_expansion(
                &self.map,
                position,
                profile.delta_k,
                profile.delta_l,
                &ball,
                occupancy,
            ),
        }
    }

    pub fn step(&mut self, now: f64) -> Vec<EngineEvent> {
        let mut events = Vec::new();
        self.served_active.retain(|_, &mut (_, _, t_exp)| t_exp > now);
        for q in self.intake.pop_expired(now) {
            events.push(EngineEvent::Dropped {
                query: q,
                time: now,
                reason: DropReason::Expired,
            });
        }
        while let Some(id) = self.intake.pop_next() {
            self.pending.push(id);
        }
        let occupancy = self.occupancy();
        let pending = std::mem::take(&mut self.pending);
        for id in pending {
            let Some(q) = self.intake.get(id).cloned() else {
                continue;
            };
            if map_has_no_star(&self.map, q.position.segment) {
                self.intake.remove(id);
                events.push(EngineEvent::Dropped {
                    query: q,
                    time: now,
                    reason: DropReason::Unanonymizable,
                });
                continue;
            }
            match self.cloak_one(q.position.segment, q.position, q.profile, &occupancy) {
                Some(segments) => {
                    self.intake.remove(id);
                    self.served_active
                        .insert(id, (q.user, q.position.segment, q.t_exp));
                    let border = self.map.border_nodes(&segments);
                    let co_located = segments
                        .iter()
                        .flat_map(|&seg| {
                            users_in(&occupancy, seg)
                                .filter(move |&u| u != q.user)
                                .map(move |_| seg)
                        })
                        .collect();
                    let region = CloakedRegion {
                        id: RegionId(self.next_region),
                        time: now,
                        stars: Vec::new(),
                        fixed: Vec::new(),
                        segments,
                        border,
                        l_max: q.profile.delta_l,
                        served: vec![ServedQuery {
                            star: map_first_star(&self.map, q.position.segment),
                            query: q,
                        }],
                        co_located,
                    };
                    self.next_region += 1;
                    if self.verify {
                        if let Err(e) = verify_baseline_region(&self.map, self.reach, &region, &occupancy) {
                            panic!("baseline privacy check failed: {e}");
                        }
                    }
                    events.push(EngineEvent::Served(region));
                }
                None => self.pending.push(id),
            }
        }
        events
    }
}

fn map_has_no_star(map: &RoadMap, seg: SegmentId) -> bool {
    map.stars.stars_of_segment(seg).is_empty()
}

fn map_first_star(map: &RoadMap, seg: SegmentId) -> crate::ids::StarId {
    map.stars.stars_of_segment(seg)[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Node, RawEdge, RoadNetwork};

    /// Straight chain of equal segments separated by degree-3 nodes with short spurs.
    fn comb(n: u64) -> RoadMap {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for i in 0..=n {
            nodes.push(Node { id: i, lon: i as f64 * 0.001, lat: 0.0 });
            nodes.push(Node { id: 1000 + i, lon: i as f64 * 0.001, lat: 0.0005 });
            edges.push(RawEdge { id: 1000 + i, a: i, b: 1000 + i, length: 50.0 });
            if i > 0 {
                edges.push(RawEdge { id: i, a: i - 1, b: i, length: 100.0 });
            }
        }
        RoadMap::build(RoadNetwork::from_parts(nodes, edges).unwrap())
    }

    #[test]
    fn trivial_requirements_return_seed() {
        let map = comb(4);
        let seg = map.segments.iter().find(|s| s.length == 100.0).unwrap().id;
        let ball = sigma_ball(&map, Reach::Hops, seg, 2);
        let occ = Occupancy::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_sampling(seg, 0, 1, &ball, &occ, &mut rng), Some(vec![seg]));
        let origin = Position { segment: seg, offset: 50.0 };
        assert_eq!(network_expansion(&map, origin, 0, 1, &ball, &occ), Some(vec![seg]));
    }

    #[test]
    fn exhausted_ball_drops() {
        let map = comb(3);
        let seg = map.segments.iter().find(|s| s.length == 100.0).unwrap().id;
        let ball = sigma_ball(&map, Reach::Hops, seg, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let occ = Occupancy::new();
        assert_eq!(random_sampling(seg, 0, 99, &ball, &occ, &mut rng), None);
    }
}
