//! Inference attacks on cloaked regions: replay and correlation likelihoods,
//! query injection, linkability and segment entropy.

mod placement;
mod replay;

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use placement::{
    apply_injection, contains_multiset, enumerate_multisets, merge, multiset_count, placement_weight,
    MultisetSampler, Placement,
};
pub use replay::{BaselineReplay, ReplayAnonymizer, StarCloakReplay};

use crate::algorithm::Algorithm;
use crate::cost::{CostParams, StarCostTable};
use crate::engine::{CloakedRegion, Reach};
use crate::error::{Error, Result};
use crate::ids::SegmentId;
use crate::network::RoadMap;

pub const DEFAULT_REPLAYS: usize = 32;
pub const DEFAULT_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackKnowledge {
    /// Per-segment prior; uniform when absent. Renormalized over the region.
    pub prior: Option<BTreeMap<SegmentId, f64>>,
    /// True segments of adversary-injected co-users.
    pub injected: Vec<SegmentId>,
    pub replays: usize,
    /// Largest placement count enumerated exactly.
    pub budget: usize,
    /// Cohort size including the victim.
    pub cohort: Option<usize>,
    pub seed: u64,
}

impl Default for AttackKnowledge {
    fn default() -> Self {
        AttackKnowledge {
            prior: None,
            injected: Vec::new(),
            replays: DEFAULT_REPLAYS,
            budget: DEFAULT_BUDGET,
            cohort: None,
            seed: 0,
        }
    }
}

impl AttackKnowledge {
    pub fn validate(&self) -> Result<()> {
        if self.replays == 0 || self.budget == 0 {
            return Err(Error::Config("replay count and placement budget must be at least 1".into()));
        }
        if let Some(p) = &self.prior {
            if p.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::Config("segment prior must be finite and non-negative".into()));
            }
        }
        if self.cohort == Some(0) {
            return Err(Error::Config("cohort size must be at least 1".into()));
        }
        Ok(())
    }

    /// Prior over `region`, summing to 1.
    pub fn region_prior(&self, region: &[SegmentId]) -> Vec<f64> {
        let raw: Vec<f64> = match &self.prior {
            None => vec![1.0; region.len()],
            Some(p) => region.iter().map(|s| p.get(s).copied().unwrap_or(0.0)).collect(),
        };
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / region.len() as f64; region.len()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkabilityProfile {
    pub segments: Vec<SegmentId>,
    pub link: Vec<f64>,
    pub entropy: f64,
    pub normalized_entropy: f64,
}

impl LinkabilityProfile {
    /// Normalizes likelihoods; a zero total falls back to uniform.
    pub fn from_likelihoods(segments: &[SegmentId], likes: &[f64]) -> Self {
        let total: f64 = likes.iter().sum();
        let link: Vec<f64> = if total > 0.0 && total.is_finite() {
            likes.iter().map(|l| l / total).collect()
        } else {
            vec![1.0 / segments.len() as f64; segments.len()]
        };
        let (h, hn) = entropy(&link);
        LinkabilityProfile {
            segments: segments.to_vec(),
            link,
            entropy: h,
            normalized_entropy: hn,
        }
    }

    pub fn max_linkability(&self) -> f64 {
        self.link.iter().copied().fold(0.0, f64::max)
    }
}

/// Shannon entropy in bits and its ratio to log2 of the support size.
pub fn entropy(link: &[f64]) -> (f64, f64) {
    let h: f64 = link
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    let h = h.max(0.0);
    let norm = if link.len() <= 1 {
        0.0
    } else {
        (h / (link.len() as f64).log2()).clamp(0.0, 1.0)
    };
    (h, norm)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_of(seed: u64, parts: impl IntoIterator<Item = u64>) -> u64 {
    parts.into_iter().fold(mix(seed), |acc, p| mix(acc ^ p))
}

fn overlap(region: &[SegmentId], out: &[SegmentId]) -> f64 {
    let hits = out.iter().filter(|s| region.binary_search(s).is_ok()).count();
    hits as f64 / region.len() as f64
}

/// How the placement sum is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Method {
    /// Exact when the placement count fits the budget, sampled otherwise.
    #[default]
    Auto,
    Exact,
    /// `budget` placements drawn from the prior, one replay each.
    Sampled,
}

/// Memoizing evaluator for one region and one anonymizer.
pub struct Evaluator<'a> {
    region: Vec<SegmentId>,
    anon: &'a dyn ReplayAnonymizer,
    memo: HashMap<(usize, Placement), f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(region: &[SegmentId], anon: &'a dyn ReplayAnonymizer) -> Self {
        let mut region = region.to_vec();
        region.sort_unstable();
        region.dedup();
        Evaluator {
            region,
            anon,
            memo: HashMap::new(),
        }
    }

    pub fn region(&self) -> &[SegmentId] {
        &self.region
    }

    fn index(&self, s: SegmentId) -> Option<usize> {
        self.region.binary_search(&s).ok()
    }

    fn one_replay(&self, victim: usize, placement: &[usize], rng: &mut ChaCha8Rng) -> f64 {
        let co: Vec<SegmentId> = placement.iter().map(|&i| self.region[i]).collect();
        match self.anon.replay(self.region[victim], &co, rng) {
            Some(out) => overlap(&self.region, &out),
            None => 0.0,
        }
    }

    /// Mean overlap over `replays` seeded runs for a fixed placement.
    fn like(&mut self, victim: usize, placement: &[usize], k: &AttackKnowledge) -> f64 {
        let key = (victim, placement.to_vec());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let base = key_of(
            k.seed,
            std::iter::once(victim as u64).chain(placement.iter().map(|&i| i as u64 + 1 + (1 << 32))),
        );
        let mut acc = 0.0;
        for r in 0..k.replays {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(r as u64);
            acc += self.one_replay(victim, placement, &mut rng);
        }
        let v = acc / k.replays as f64;
        self.memo.insert(key, v);
        v
    }

    /// Replay likelihood of the victim alone on `s`.
    pub fn replay_likelihood(&mut self, s: SegmentId, k: &AttackKnowledge) -> f64 {
        match self.index(s) {
            Some(i) => self.like(i, &[], k),
            None => 0.0,
        }
    }

    /// Prior-weighted likelihood summed over co-user placements consistent with the injections.
    pub fn correlation_likelihood(&mut self, s: SegmentId, k: &AttackKnowledge) -> Result<f64> {
        self.correlation_likelihood_with(s, k, Method::Auto)
    }

    pub fn correlation_likelihood_with(&mut self, s: SegmentId, k: &AttackKnowledge, method: Method) -> Result<f64> {
        k.validate()?;
        let cohort = k
            .cohort
            .ok_or_else(|| Error::Config("cohort size unknown and not configured".into()))?;
        let Some(victim) = self.index(s) else {
            return Ok(0.0);
        };
        let prior = k.region_prior(&self.region);
        let mut injected = Vec::with_capacity(k.injected.len());
        for seg in &k.injected {
            match self.index(*seg) {
                Some(i) => injected.push(i),
                None => return Ok(0.0),
            }
        }
        injected.sort_unstable();
        let slots = cohort - 1;
        if injected.len() > slots {
            return Ok(0.0);
        }
        let free = slots - injected.len();
        let pr_s = prior[victim];
        let pr_i = placement_weight(&injected, &prior);
        let sampler = MultisetSampler::new(&prior, free);
        let z = sampler.total();
        if pr_s == 0.0 || pr_i == 0.0 || z == 0.0 {
            return Ok(0.0);
        }
        if !self.anon.uses_co_users() {
            return Ok(pr_s * pr_i * z * self.like(victim, &[], k));
        }
        let n = self.region.len();
        let exact = match method {
            Method::Auto => multiset_count(n, free) <= k.budget as f64,
            Method::Exact => true,
            Method::Sampled => false,
        };
        if exact {
            let mut sum = 0.0;
            for rest in enumerate_multisets(n, free) {
                let w = placement_weight(&rest, &prior);
                if w == 0.0 {
                    continue;
                }
                let m = merge(&injected, &rest);
                sum += w * self.like(victim, &m, k);
            }
            return Ok(pr_s * pr_i * sum);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key_of(k.seed, [victim as u64, u64::MAX]));
        let mut acc = 0.0;
        for b in 0..k.budget {
            let rest = sampler.sample(&mut rng);
            let m = merge(&injected, &rest);
            let mut replay_rng = ChaCha8Rng::seed_from_u64(key_of(k.seed, [victim as u64, b as u64, 7]));
            acc += self.one_replay(victim, &m, &mut replay_rng);
        }
        Ok(pr_s * pr_i * z * acc / k.budget as f64)
    }

    pub fn linkability(&mut self, k: &AttackKnowledge) -> Result<LinkabilityProfile> {
        let region = self.region.clone();
        let likes = region
            .iter()
            .map(|&s| self.correlation_likelihood(s, k))
            .collect::<Result<Vec<f64>>>()?;
        Ok(LinkabilityProfile::from_likelihoods(&region, &likes))
    }
}

pub fn replay_likelihood(region: &[SegmentId], s: SegmentId, anon: &dyn ReplayAnonymizer, k: &AttackKnowledge) -> f64 {
    Evaluator::new(region, anon).replay_likelihood(s, k)
}

pub fn correlation_likelihood(
    region: &[SegmentId],
    s: SegmentId,
    anon: &dyn ReplayAnonymizer,
    k: &AttackKnowledge,
) -> Result<f64> {
    Evaluator::new(region, anon).correlation_likelihood(s, k)
}

pub fn linkability(region: &[SegmentId], anon: &dyn ReplayAnonymizer, k: &AttackKnowledge) -> Result<LinkabilityProfile> {
    if region.is_empty() {
        return Err(Error::Config("cannot attack an empty region".into()));
    }
    Evaluator::new(region, anon).linkability(k)
}

/// One line of the attack report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub region_id: u64,
    pub algorithm: Algorithm,
    pub size: usize,
    pub k: usize,
    pub injections: usize,
    pub entropy: f64,
    pub normalized_entropy: f64,
    pub max_linkability: f64,
}

/// What the adversary needs to replay a region beyond the region itself.
pub struct ReplayContext<'a> {
    pub map: &'a RoadMap,
    pub costs: &'a StarCostTable,
    pub params: CostParams,
    pub reach: Reach,
}

/// Cohort size and the true segments of the victim's co-users.
pub fn cohort_of(region: &CloakedRegion) -> (usize, Vec<SegmentId>) {
    let co: Vec<SegmentId> = region
        .served
        .iter()
        .skip(1)
        .map(|s| s.query.position.segment)
        .chain(region.co_located.iter().copied())
        .collect();
    (co.len() + 1, co)
}

pub fn replay_for<'a>(
    ctx: &ReplayContext<'a>,
    algorithm: Algorithm,
    region: &CloakedRegion,
) -> Option<Box<dyn ReplayAnonymizer + 'a>> {
    let victim = region.served.first()?;
    let sigma_s = region.served.iter().map(|s| s.query.profile.sigma_s).min()?;
    Some(match algorithm.baseline() {
        Some(kind) => Box::new(BaselineReplay::new(
            ctx.map,
            kind,
            ctx.reach,
            victim.query.profile.sigma_s,
            region.segments.len() as u32,
        )),
        None => Box::new(StarCloakReplay::new(
            ctx.map,
            ctx.costs,
            ctx.params,
            ctx.reach,
            victim.query.knn_k as f64,
            sigma_s,
            region.l_max,
        )),
    })
}

/// Linkability of the first served query for each injection count in `levels`.
pub fn evaluate_region(
    ctx: &ReplayContext<'_>,
    algorithm: Algorithm,
    region: &CloakedRegion,
    base: &AttackKnowledge,
    levels: &[usize],
) -> Result<Vec<AttackRow>> {
    let anon = replay_for(ctx, algorithm, region)
        .ok_or_else(|| Error::Config(format!("region {} has no served query", region.id)))?;
    let (cohort, co) = cohort_of(region);
    let mut eval = Evaluator::new(&region.segments, anon.as_ref());
    let mut rows = Vec::with_capacity(levels.len());
    for &j in levels {
        let j = j.min(co.len());
        let knowledge = AttackKnowledge {
            injected: co[..j].to_vec(),
            cohort: Some(base.cohort.unwrap_or(cohort)),
            seed: key_of(base.seed, [region.id.0]),
            ..base.clone()
        };
        let p = eval.linkability(&knowledge)?;
        rows.push(AttackRow {
            region_id: region.id.0,
            algorithm,
            size: p.segments.len(),
            k: cohort,
            injections: j,
            entropy: p.entropy,
            normalized_entropy: p.normalized_entropy,
            max_linkability: p.max_linkability(),
        });
    }
    Ok(rows)
}

/// Evaluates many regions in parallel; regions without geometry or a served
/// query are skipped with a warning.
pub fn evaluate_regions(
    ctx: &ReplayContext<'_>,
    algorithm: Algorithm,
    regions: &[CloakedRegion],
    base: &AttackKnowledge,
    levels: &[usize],
) -> Vec<AttackRow> {
    let per: Vec<Vec<AttackRow>> = regions
        .par_iter()
        .map(|r| {
            if r.segments.is_empty() {
                log::warn!("region {} has no segments; skipped", r.id);
                return Vec::new();
            }
            evaluate_region(ctx, algorithm, r, base, levels).unwrap_or_else(|e| {
                log::warn!("region {} skipped: {e}", r.id);
                Vec::new()
            })
        })
        .collect();
    per.into_iter().flatten().collect()
}
