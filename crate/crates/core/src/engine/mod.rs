//! The cloaking engine: star selection, cloaking-graph maintenance, candidate
//! star-set search, pruning, and the bounded and hybrid variants.

mod active;
mod graph;
mod pool;
mod prune;
mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use active::{pick_probability, ActiveIndex};
pub use graph::{
    combine, compute_ball, intersect_sorted, Ball, CandidateStarSet, CloakNode, CloakingGraph,
    Coverage, NeighborRule, Reach,
};
pub use pool::PrunePool;
pub use prune::{boundary, prune, prune_rng, PruneTrace, ScriptedPicker, StarPicker, UniformPicker};
pub use search::{ordered_neighbors, search_basic, search_bounded, DEFAULT_COMBINATION_CAP};

use crate::cost::{CostParams, StarCostTable};
use crate::error::{Error, Result};
use crate::ids::{CloakNodeId, NodeIx, QueryId, RegionId, SegmentId, StarId};
use crate::network::{Position, RoadMap};
use crate::query::{Intake, Query, RawQuery};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mode {
    Basic,
    Bounded { lambda: u32 },
    Hybrid { lambda: u32, alpha: f64 },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Basic => "basic",
            Mode::Bounded { .. } => "bounded",
            Mode::Hybrid { .. } => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub seed: u64,
    pub cost: CostParams,
    pub combination_cap: usize,
    pub neighbor_rule: NeighborRule,
    pub reach: Reach,
    /// 0 prunes inline on the engine thread.
    pub prune_workers: usize,
    /// Full consistency scan after every step.
    pub verify: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Basic,
            seed: 0,
            cost: CostParams::default(),
            combination_cap: DEFAULT_COMBINATION_CAP,
            neighbor_rule: NeighborRule::default(),
            reach: Reach::default(),
            prune_workers: 0,
            verify: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedQuery {
    pub query: Query,
    /// Star the query was assigned to.
    pub star: StarId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloakedRegion {
    pub id: RegionId,
    pub time: f64,
    pub stars: Vec<StarId>,
    pub fixed: Vec<StarId>,
    pub segments: Vec<SegmentId>,
    pub border: Vec<NodeIx>,
    pub l_max: u32,
    pub served: Vec<ServedQuery>,
    /// True segments of other active users counted inside a baseline region.
    #[serde(default)]
    pub co_located: Vec<SegmentId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    Expired,
    Unanonymizable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineEvent {
    Served(CloakedRegion),
    Dropped {
        query: Query,
        time: f64,
        reason: DropReason,
    },
}

/// Checks every served query's requirements against the region it received.
pub fn verify_region(map: &RoadMap, reach: Reach, region: &CloakedRegion) -> std::result::Result<(), String> {
    let expected = map.stars.segments_of(&region.stars);
    if expected != region.segments {
        return Err(format!("region {} segments differ from its stars", region.id));
    }
    let cohort = region.served.len();
    for s in &region.served {
        let q = &s.query;
        if (q.profile.delta_k as usize) > cohort {
            return Err(format!("query {} wants k={} but cohort is {cohort}", q.id, q.profile.delta_k));
        }
        if (q.profile.delta_l as usize) > region.segments.len() {
            return Err(format!(
                "query {} wants l={} but region has {} segments",
                q.id,
                q.profile.delta_l,
                region.segments.len()
            ));
        }
        let ball = compute_ball(map, reach, s.star, q.profile.sigma_s);
        if let Some(far) = region.stars.iter().find(|x| !ball.contains(**x)) {
            return Err(format!("star {far} outside tolerance of query {}", q.id));
        }
        if !map.segments.get(q.position.segment).terminals().iter().any(|&v| {
            map.stars.star_at(v) == Some(s.star)
        }) {
            return Err(format!("query {} assigned to a star off its segment", q.id));
        }
        if region.time > q.t_exp {
            return Err(format!("query {} served after expiry", q.id));
        }
    }
    Ok(())
}

pub struct Engine {
    map: Arc<RoadMap>,
    cfg: EngineConfig,
    intake: Intake,
    graph: CloakingGraph,
    active: ActiveIndex,
    costs: StarCostTable,
    rng: ChaCha8Rng,
    pool: Option<PrunePool>,
    next_candidate: u64,
    hybrid_seen: BTreeMap<CloakNodeId, u64>,
    assigned: BTreeMap<QueryId, StarId>,
}

impl Engine {
    pub fn new(map: Arc<RoadMap>, cfg: EngineConfig) -> Result<Self> {
        cfg.cost.validate()?;
        if let Mode::Bounded { lambda } | Mode::Hybrid { lambda, .. } = cfg.mode {
            if lambda < 1 {
                return Err(Error::Config("lambda must be at least 1".into()));
            }
        }
        if let Mode::Hybrid { alpha, .. } = cfg.mode {
            if !(alpha >= 0.0) {
                return Err(Error::Config("alpha must be nonnegative".into()));
            }
        }
        let costs = StarCostTable::new(&map);
        let pool = (cfg.prune_workers > 0)
            .then(|| PrunePool::new(map.clone(), cfg.seed, cfg.prune_workers));
        Ok(Engine {
            graph: CloakingGraph::new(cfg.neighbor_rule, cfg.reach),
            intake: Intake::new(),
            active: ActiveIndex::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            costs,
            pool,
            next_candidate: 0,
            hybrid_seen: BTreeMap::new(),
            assigned: BTreeMap::new(),
            map,
            cfg,
        })
    }

    pub fn map(&self) -> &Arc<RoadMap> {
        &self.map
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn intake(&self) -> &Intake {
        &self.intake
    }

    pub fn graph(&self) -> &CloakingGraph {
        &self.graph
    }

    pub fn active(&self) -> &ActiveIndex {
        &self.active
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

    fn search(&self, v: CloakNodeId, basic: bool) -> Option<CandidateStarSet> {
        let cap = self.cfg.combination_cap;
        match self.cfg.mode {
            Mode::Bounded { lambda } | Mode::Hybrid { lambda, .. } if !basic => {
                search_bounded(&self.graph, &self.map, self.cfg.reach, v, lambda, cap)
            }
            _ => search_basic(&self.graph, &self.map, self.cfg.reach, v, cap),
        }
    }

    fn take_cohort(
        &mut self,
        mut cand: CandidateStarSet,
        out: &mut Vec<(CandidateStarSet, Vec<ServedQuery>)>,
    ) {
        cand.id = self.next_candidate;
        self.next_candidate += 1;
        let mut served = Vec::new();
        for &node in &cand.nodes {
            for q in self.graph.remove_node(node) {
                if let Some(query) = self.intake.remove(q) {
                    self.active.detach(query.position.segment);
                    let star = self.assigned.remove(&q).expect("assigned star");
                    served.push(ServedQuery { query, star });
                }
            }
            self.hybrid_seen.remove(&node);
        }
        out.push((cand, served));
    }

    /// Advances the engine to virtual time `now`.
    pub fn step(&mut self, now: f64) -> Vec<EngineEvent> {
        let mut events = Vec::new();
        let mut found = Vec::new();

        let mut updated = Vec::new();
        for q in self.intake.pop_expired(now) {
            if self.graph.node_of(q.id).is_some() {
                if let Ok(Some(v)) = self.graph.remove_query(&self.map, q.id) {
                    updated.push(v);
                }
                self.active.detach(q.position.segment);
                self.assigned.remove(&q.id);
            }
            events.push(EngineEvent::Dropped {
                query: q,
                time: now,
                reason: DropReason::Expired,
            });
        }
        let mut seen = BTreeSet::new();
        for v in updated {
            if seen.insert(v) && self.graph.node(v).is_some() {
                if let Some(c) = self.search(v, false) {
                    self.take_cohort(c, &mut found);
                }
            }
        }

        if let Mode::Hybrid { alpha, .. } = self.cfg.mode {
            let due = self.intake.heap.due_within(now + alpha);
            let mut nodes = Vec::new();
            let mut seen = BTreeSet::new();
            for (_, q) in due {
                if let Some(v) = self.graph.node_of(q) {
                    if seen.insert(v) {
                        nodes.push(v);
                    }
                }
            }
            for v in nodes {
                if self.graph.node(v).is_none() {
                    continue;
                }
                let version = self.graph.version();
                if self.hybrid_seen.get(&v) == Some(&version) {
                    continue;
                }
                self.hybrid_seen.insert(v, version);
                if let Some(c) = self.search(v, true) {
                    self.take_cohort(c, &mut found);
                }
            }
        }

        while let Some(id) = self.intake.pop_next() {
            let q = self.intake.get(id).expect("queued query is live").clone();
            let seg = q.position.segment;
            let (costs, params, res) = (&self.costs, &self.cfg.cost, q.knn_k as f64);
            let pick = self.active.select_star(
                &self.map.stars,
                seg,
                |s| costs.cost(params, res, s),
                &mut self.rng,
            );
            match pick {
                Err(_) => {
                    let query = self.intake.remove(id).expect("live");
                    events.push(EngineEvent::Dropped {
                        query,
                        time: now,
                        reason: DropReason::Unanonymizable,
                    });
                }
                Ok(star) => {
                    self.active.attach(seg);
                    self.assigned.insert(id, star);
                    let v = self.graph.add_query(&self.map, id, q.profile, star);
                    if let Some(c) = self.search(v, false) {
                        self.take_cohort(c, &mut found);
                    }
                }
            }
        }

        let pruned: Vec<(CandidateStarSet, PruneTrace, Vec<ServedQuery>)> = match &self.pool {
            Some(pool) => {
                let mut served: BTreeMap<u64, Vec<ServedQuery>> = BTreeMap::new();
                let mut batch = Vec::new();
                for (c, s) in found {
                    served.insert(c.id, s);
                    batch.push(c);
                }
                pool.prune_all(batch)
                    .into_iter()
                    .map(|(c, t)| {
                        let s = served.remove(&c.id).unwrap();
                        (c, t, s)
                    })
                    .collect()
            }
            None => found
                .into_iter()
                .map(|(c, s)| {
                    let mut picker = UniformPicker(prune_rng(self.cfg.seed, c.id));
                    let t = prune(&c, &self.map.stars, &mut picker);
                    (c, t, s)
                })
                .collect(),
        };
        for (cand, trace, served) in pruned {
            let border = self.map.border_nodes(&trace.segments);
            let region = CloakedRegion {
                id: RegionId(cand.id),
                time: now,
                stars: trace.stars,
                fixed: cand.fixed,
                segments: trace.segments,
                border,
                l_max: cand.l_max,
                served,
                co_located: Vec::new(),
            };
            if self.cfg.verify {
                if let Err(e) = verify_region(&self.map, self.cfg.reach, &region) {
                    panic!("privacy check failed: {e}");
                }
            }
            events.push(EngineEvent::Served(region));
        }

        if self.cfg.verify {
            if let Err(e) = self.check_consistency() {
                panic!("engine state inconsistent at t={now}: {e}");
            }
        }
        events
    }

    /// Cross-structure consistency scan.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        self.intake.check_consistency()?;
        self.graph.check_consistency(&self.map)?;
        self.active.check_consistency()?;
        let mut per_segment: BTreeMap<SegmentId, usize> = BTreeMap::new();
        let mut in_graph = 0;
        for q in self.intake.live() {
            let queued = self.intake.queue.contains(q.id);
            match (queued, self.graph.node_of(q.id)) {
                (true, Some(_)) => return Err(format!("query {} both queued and placed", q.id)),
                (false, None) => return Err(format!("query {} neither queued nor placed", q.id)),
                (false, Some(v)) => {
                    in_graph += 1;
                    *per_segment.entry(q.position.segment).or_default() += 1;
                    let star = self.graph.node(v).unwrap().star;
                    if self.active.assigned(q.position.segment) != Some(star) {
                        return Err(format!("query {} node star disagrees with assignment", q.id));
                    }
                    if self.assigned.get(&q.id) != Some(&star) {
                        return Err(format!("query {} star record stale", q.id));
                    }
                }
                (true, None) => {}
            }
        }
        if in_graph != self.graph.query_count() {
            return Err(format!(
                "cloaking graph holds {} queries, {in_graph} live",
                self.graph.query_count()
            ));
        }
        for (seg, n) in per_segment {
            if self.active.live_count(seg) != n {
                return Err(format!("segment {seg} live count {} != {n}", self.active.live_count(seg)));
            }
        }
        if self.assigned.len() != in_graph {
            return Err("assigned-star records out of sync".into());
        }
        Ok(())
    }
}
