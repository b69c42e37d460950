use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::ids::{SegmentId, StarId};
use crate::network::StarGraph;

/// Active stars and the segment-to-star assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActiveIndex {
    assignment: BTreeMap<SegmentId, StarId>,
    live: BTreeMap<SegmentId, usize>,
    active: BTreeMap<StarId, BTreeSet<SegmentId>>,
}

/// P(first) when choosing between two stars with the given costs.
pub fn pick_probability(cost_a: f64, cost_b: f64) -> f64 {
    let total = cost_a + cost_b;
    if total > 0.0 {
        cost_b / total
    } else {
        0.5
    }
}

impl ActiveIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_active(&self, star: StarId) -> bool {
        self.active.contains_key(&star)
    }

    pub fn assigned(&self, seg: SegmentId) -> Option<StarId> {
        self.assignment.get(&seg).copied()
    }

    pub fn active_stars(&self) -> impl Iterator<Item = StarId> + '_ {
        self.active.keys().copied()
    }

    pub fn live_count(&self, seg: SegmentId) -> usize {
        self.live.get(&seg).copied().unwrap_or(0)
    }

    /// Picks the star that will host a query on `seg` and records the assignment.
    pub fn select_star<R: Rng + ?Sized>(
        &mut self,
        stars: &StarGraph,
        seg: SegmentId,
        cost: impl Fn(StarId) -> f64,
        rng: &mut R,
    ) -> Result<StarId> {
        if let Some(s) = self.assigned(seg) {
            return Ok(s);
        }
        let chosen = match *stars.stars_of_segment(seg) {
            [] => return Err(Error::Unanonymizable(seg)),
            [only] => only,
            [a, b, ..] => match (self.is_active(a), self.is_active(b)) {
                (true, false) => a,
                (false, true) => b,
                _ => {
                    if rng.random::<f64>() < pick_probability(cost(a), cost(b)) {
                        a
                    } else {
                        b
                    }
                }
            },
        };
        self.assignment.insert(seg, chosen);
        self.active.entry(chosen).or_default().insert(seg);
        Ok(chosen)
    }

    /// A query on `seg` became live in the cloaking graph.
    pub fn attach(&mut self, seg: SegmentId) {
        *self.live.entry(seg).or_default() += 1;
    }

    /// A query on `seg` left; clears the assignment once no live query remains.
    pub fn detach(&mut self, seg: SegmentId) {
        let Some(n) = self.live.get_mut(&seg) else {
            return;
        };
        *n -= 1;
        if *n > 0 {
            return;
        }
        self.live.remove(&seg);
        if let Some(star) = self.assignment.remove(&seg) {
            if let Some(set) = self.active.get_mut(&star) {
                set.remove(&seg);
                if set.is_empty() {
                    self.active.remove(&star);
                }
            }
        }
    }

    /// Drops an assignment made by `select_star` that never received a live query.
    pub fn release_if_idle(&mut self, seg: SegmentId) {
        if self.live_count(seg) == 0 {
            self.live.insert(seg, 1);
            self.detach(seg);
        }
    }

    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        for (seg, star) in &self.assignment {
            if self.live_count(*seg) == 0 {
                return Err(format!("segment {seg} assigned without live queries"));
            }
            if !self.active.get(star).is_some_and(|s| s.contains(seg)) {
                return Err(format!("segment {seg} assigned to inactive star {star}"));
            }
        }
        for (star, segs) in &self.active {
            if segs.is_empty() {
                return Err(format!("active star {star} has no segments"));
            }
            for s in segs {
                if self.assignment.get(s) != Some(star) {
                    return Err(format!("star {star} lists unassigned segment {s}"));
                }
            }
        }
        for seg in self.live.keys() {
            if !self.assignment.contains_key(seg) {
                return Err(format!("live segment {seg} has no assignment"));
            }
        }
        Ok(())
    }
}
