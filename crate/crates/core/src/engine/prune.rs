use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::CandidateStarSet;
use crate::ids::{SegmentId, StarId};
use crate::network::StarGraph;

/// Chooses which removable boundary star to try next.
pub trait StarPicker {
    /// `choices` is sorted and nonempty.
    fn pick(&mut self, choices: &[StarId]) -> StarId;
}

/// Uniform choice.
pub struct UniformPicker<R>(pub R);

impl<R: Rng> StarPicker for UniformPicker<R> {
    fn pick(&mut self, choices: &[StarId]) -> StarId {
        choices[self.0.random_range(0..choices.len())]
    }
}

/// Replays a fixed sequence; panics when the next star is not a valid choice.
pub struct ScriptedPicker(pub VecDeque<StarId>);

impl StarPicker for ScriptedPicker {
    fn pick(&mut self, choices: &[StarId]) -> StarId {
        let next = self.0.pop_front().expect("scripted picker exhausted");
        assert!(
            choices.binary_search(&next).is_ok(),
            "scripted star {next} not among {choices:?}"
        );
        next
    }
}

/// Independent stream for one candidate star-set.
pub fn prune_rng(seed: u64, candidate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(candidate);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneTrace {
    pub stars: Vec<StarId>,
    pub segments: Vec<SegmentId>,
    pub removed: Vec<StarId>,
    /// The sampled star whose removal would have broken the segment bound.
    pub restored: Option<StarId>,
    /// Boundary set before each sample.
    pub boundaries: Vec<Vec<StarId>>,
}

/// Stars of `stars` with at least one star-graph neighbor outside it.
pub fn boundary(graph: &StarGraph, stars: &BTreeSet<StarId>) -> BTreeSet<StarId> {
    stars
        .iter()
        .copied()
        .filter(|&s| graph.neighbors(s).iter().any(|n| !stars.contains(n)))
        .collect()
}

pub fn prune(
    candidate: &CandidateStarSet,
    graph: &StarGraph,
    picker: &mut dyn StarPicker,
) -> PruneTrace {
    let mut theta: BTreeSet<StarId> = candidate.stars.iter().copied().collect();
    let fixed: BTreeSet<StarId> = candidate.fixed.iter().copied().collect();
    let mut multiplicity: BTreeMap<SegmentId, usize> = BTreeMap::new();
    for &s in &theta {
        for &seg in &graph.get(s).segments {
            *multiplicity.entry(seg).or_default() += 1;
        }
    }
    let l_max = candidate.l_max as usize;
    let mut bs = boundary(graph, &theta);
    let mut removed = Vec::new();
    let mut boundaries = Vec::new();
    let mut restored = None;
    loop {
        let choices: Vec<StarId> = bs.difference(&fixed).copied().collect();
        boundaries.push(bs.iter().copied().collect());
        if choices.is_empty() {
            break;
        }
        let r = picker.pick(&choices);
        let segs = &graph.get(r).segments;
        let lost = segs.iter().filter(|s| multiplicity[s] == 1).count();
        if multiplicity.len() - lost < l_max {
            restored = Some(r);
            break;
        }
        for seg in segs {
            let m = multiplicity.get_mut(seg).unwrap();
            *m -= 1;
            if *m == 0 {
                multiplicity.remove(seg);
            }
        }
        theta.remove(&r);
        bs.remove(&r);
        for n in graph.neighbors(r) {
            if theta.contains(n) {
                bs.insert(*n);
            }
        }
        removed.push(r);
    }
    PruneTrace {
        stars: theta.into_iter().collect(),
        segments: multiplicity.into_keys().collect(),
        removed,
        restored,
        boundaries,
    }
}
