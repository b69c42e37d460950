//! Replayable anonymizers used by the adversary.

use std::cell::RefCell;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::baseline::{network_expansion, random_sampling, sigma_ball, BaselineKind, Occupancy};
use crate::cost::{CostParams, StarCostTable};
use crate::engine::{intersect_sorted, prune, ActiveIndex, CandidateStarSet, Coverage, Reach, UniformPicker};
use crate::ids::SegmentId;
use crate::network::{Position, RoadMap};

/// Anonymizer the adversary can re-run under a hypothesized placement.
pub trait ReplayAnonymizer {
    /// Region produced with the victim on `victim` and co-users on `co_users`;
    /// `None` when the anonymizer would not emit one.
    fn replay(&self, victim: SegmentId, co_users: &[SegmentId], rng: &mut ChaCha8Rng) -> Option<Vec<SegmentId>>;

    /// False when the output never depends on where co-users are.
    fn uses_co_users(&self) -> bool {
        true
    }
}

/// Star selection and pruning of one cohort treated as a single clique.
pub struct StarCloakReplay<'a> {
    map: &'a RoadMap,
    costs: &'a StarCostTable,
    params: CostParams,
    res: f64,
    sigma_s: u32,
    l_max: u32,
    coverage: RefCell<Coverage>,
}

impl<'a> StarCloakReplay<'a> {
    pub fn new(
        map: &'a RoadMap,
        costs: &'a StarCostTable,
        params: CostParams,
        reach: Reach,
        res: f64,
        sigma_s: u32,
        l_max: u32,
    ) -> Self {
        StarCloakReplay {
            map,
            costs,
            params,
            res,
            sigma_s,
            l_max,
            coverage: RefCell::new(Coverage::new(reach)),
        }
    }
}

impl ReplayAnonymizer for StarCloakReplay<'_> {
    fn replay(&self, victim: SegmentId, co_users: &[SegmentId], rng: &mut ChaCha8Rng) -> Option<Vec<SegmentId>> {
        let mut order: Vec<SegmentId> = co_users.to_vec();
        order.push(victim);
        order.shuffle(rng);
        let mut active = ActiveIndex::new();
        let mut fixed = BTreeSet::new();
        for seg in order {
            let star = active
                .select_star(
                    &self.map.stars,
                    seg,
                    |s| self.costs.cost(&self.params, self.res, s),
                    rng,
                )
                .ok()?;
            fixed.insert(star);
        }
        let mut coverage = self.coverage.borrow_mut();
        let mut theta: Option<Vec<_>> = None;
        for &f in &fixed {
            let ball = coverage.ball(self.map, f, self.sigma_s);
            theta = Some(match theta {
                None => ball.stars.clone(),
                Some(t) => intersect_sorted(&t, &ball.stars),
            });
        }
        let theta = theta?;
        if fixed.iter().any(|f| theta.binary_search(f).is_err()) {
            return None;
        }
        if self.map.stars.segments_of(&theta).len() < self.l_max as usize {
            return None;
        }
        let cand = CandidateStarSet {
            id: 0,
            stars: theta,
            nodes: Vec::new(),
            queries: Vec::new(),
            l_max: self.l_max,
            fixed: fixed.into_iter().collect(),
        };
        Some(prune(&cand, &self.map.stars, &mut UniformPicker(&mut *rng)).segments)
    }
}

/// Baseline grown from the hypothesized segment to the observed region size.
pub struct BaselineReplay<'a> {
    map: &'a RoadMap,
    kind: BaselineKind,
    reach: Reach,
    sigma_s: u32,
    target: u32,
}

impl<'a> BaselineReplay<'a> {
    pub fn new(map: &'a RoadMap, kind: BaselineKind, reach: Reach, sigma_s: u32, target: u32) -> Self {
        BaselineReplay {
            map,
            kind,
            reach,
            sigma_s,
            target,
        }
    }
}

impl ReplayAnonymizer for BaselineReplay<'_> {
    fn replay(&self, victim: SegmentId, _co_users: &[SegmentId], rng: &mut ChaCha8Rng) -> Option<Vec<SegmentId>> {
        let ball = sigma_ball(self.map, self.reach, victim, self.sigma_s);
        let none = Occupancy::new();
        match self.kind {
            BaselineKind::RandomSampling => random_sampling(victim, 0, self.target, &ball, &none, rng),
            BaselineKind::NetworkExpansion => {
                let origin = Position {
                    segment: victim,
                    offset: self.map.segments.get(victim).length / 2.0,
                };
                network_expansion(self.map, origin, 0, self.target, &ball, &none)
            }
        }
    }

    fn uses_co_users(&self) -> bool {
        false
    }
}
