use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{RoadNetwork, Segments};
use crate::error::{Error, Result};
use crate::ids::{NodeIx, SegmentId, StarId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Star {
    pub id: StarId,
    pub anchor: NodeIx,
    /// Sorted, deduplicated.
    pub segments: Vec<SegmentId>,
}

/// One star per node of degree at least 3, in node order.
pub fn build_stars(net: &RoadNetwork, segs: &Segments) -> Vec<Star> {
    let mut out = Vec::new();
    for i in 0..net.node_count() {
        let v = NodeIx(i as u32);
        if net.degree(v) < 3 {
            continue;
        }
        let mut segments: Vec<SegmentId> = segs.at_terminal(v).iter().map(|&(s, _)| s).collect();
        segments.sort_unstable();
        segments.dedup();
        out.push(Star {
            id: StarId(out.len() as u32),
            anchor: v,
            segments,
        });
    }
    out
}

pub fn build_star_graph(stars: Vec<Star>) -> StarGraph {
    StarGraph::from_stars(stars)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarGraph {
    stars: Vec<Star>,
    adjacency: Vec<Vec<StarId>>,
    segment_stars: Vec<Vec<StarId>>,
    by_anchor: BTreeMap<NodeIx, StarId>,
}

impl StarGraph {
    /// Star ids must be `0..n` in order.
    pub fn from_stars(stars: Vec<Star>) -> Self {
        let seg_count = stars
            .iter()
            .flat_map(|s| s.segments.iter())
            .map(|s| s.index() + 1)
            .max()
            .unwrap_or(0);
        let mut segment_stars = vec![Vec::new(); seg_count];
        for (i, st) in stars.iter().enumerate() {
            debug_assert_eq!(st.id.index(), i);
            for &s in &st.segments {
                segment_stars[s.index()].push(st.id);
            }
        }
        let mut adjacency = vec![BTreeSet::new(); stars.len()];
        for owners in &segment_stars {
            for &a in owners {
                for &b in owners {
                    if a != b {
                        adjacency[a.index()].insert(b);
                    }
                }
            }
        }
        let by_anchor = stars.iter().map(|s| (s.anchor, s.id)).collect();
        StarGraph {
            stars,
            adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
            segment_stars,
            by_anchor,
        }
    }

    pub fn len(&self) -> usize {
        self.stars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stars.is_empty()
    }

    pub fn stars(&self) -> &[Star] {
        &self.stars
    }

    pub fn ids(&self) -> impl Iterator<Item = StarId> {
        (0..self.stars.len() as u32).map(StarId)
    }

    pub fn star(&self, id: StarId) -> Result<&Star> {
        self.stars.get(id.index()).ok_or(Error::UnknownStar(id))
    }

    pub fn get(&self, id: StarId) -> &Star {
        &self.stars[id.index()]
    }

    pub fn neighbors(&self, id: StarId) -> &[StarId] {
        &self.adjacency[id.index()]
    }

    pub fn star_at(&self, anchor: NodeIx) -> Option<StarId> {
        self.by_anchor.get(&anchor).copied()
    }

    /// Stars having `seg` among their segments (at most two).
    pub fn stars_of_segment(&self, seg: SegmentId) -> &[StarId] {
        self.segment_stars
            .get(seg.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Breadth-first hop count, or `None` when farther than `cap`.
    pub fn hop_distance(&self, a: StarId, b: StarId, cap: u32) -> Result<Option<u32>> {
        self.star(a)?;
        self.star(b)?;
        if a == b {
            return Ok(Some(0));
        }
        let mut dist = HashMap::new();
        dist.insert(a, 0u32);
        let mut queue = VecDeque::from([a]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            if d >= cap {
                continue;
            }
            for &y in self.neighbors(x) {
                if dist.contains_key(&y) {
                    continue;
                }
                if y == b {
                    return Ok(Some(d + 1));
                }
                dist.insert(y, d + 1);
                queue.push_back(y);
            }
        }
        Ok(None)
    }

    /// Hop distances from `a` to every star within `radius`, sorted by star id.
    pub fn distances_within(&self, a: StarId, radius: u32) -> Result<Vec<(StarId, u32)>> {
        self.star(a)?;
        let mut dist = BTreeMap::new();
        dist.insert(a, 0u32);
        let mut queue = VecDeque::from([a]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            if d >= radius {
                continue;
            }
            for &y in self.neighbors(x) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(y) {
                    e.insert(d + 1);
                    queue.push_back(y);
                }
            }
        }
        Ok(dist.into_iter().collect())
    }

    /// All stars within `radius` hops of `a`, including `a`, sorted.
    pub fn stars_within(&self, a: StarId, radius: u32) -> Result<Vec<StarId>> {
        Ok(self
            .distances_within(a, radius)?
            .into_iter()
            .map(|(s, _)| s)
            .collect())
    }

    /// Union of the segments of `stars`, sorted.
    pub fn segments_of<'a>(&self, stars: impl IntoIterator<Item = &'a StarId>) -> Vec<SegmentId> {
        let set: BTreeSet<SegmentId> = stars
            .into_iter()
            .flat_map(|s| self.get(*s).segments.iter().copied())
            .collect();
        set.into_iter().collect()
    }
}

/// Memoized `stars_within` lookups.
#[derive(Debug, Default, Clone)]
pub struct StarBallCache {
    balls: HashMap<(StarId, u32), Vec<StarId>>,
}

impl StarBallCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, graph: &StarGraph, star: StarId, radius: u32) -> &[StarId] {
        self.balls
            .entry((star, radius))
            .or_insert_with(|| graph.stars_within(star, radius).unwrap_or_default())
    }
}
