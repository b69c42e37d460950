use rand::Rng;
use rand_chacha::ChaCha8Rng;
use starcloak::attack::{AttackKnowledge, Evaluator, Method, ReplayAnonymizer};
use starcloak::ids::SegmentId;

pub fn segs(xs: &[u32]) -> Vec<SegmentId> {
    xs.iter().map(|&x| SegmentId(x)).collect()
}

pub fn knowledge(cohort: usize) -> AttackKnowledge {
    AttackKnowledge {
        cohort: Some(cohort),
        replays: 8,
        ..Default::default()
    }
}

/// Victim plus co-user segments.
pub struct Closure;

impl ReplayAnonymizer for Closure {
    fn replay(&self, victim: SegmentId, co: &[SegmentId], _: &mut ChaCha8Rng) -> Option<Vec<SegmentId>> {
        let mut out = co.to_vec();
        out.push(victim);
        out.sort_unstable();
        out.dedup();
        Some(out)
    }
}

/// Victim and co-users, plus one random extra segment out of `pool`.
pub struct Noisy(pub Vec<SegmentId>);

impl ReplayAnonymizer for Noisy {
    fn replay(&self, victim: SegmentId, co: &[SegmentId], rng: &mut ChaCha8Rng) -> Option<Vec<SegmentId>> {
        if rng.random_bool(0.1) {
            return None;
        }
        let mut out = co.to_vec();
        out.push(victim);
        out.push(self.0[rng.random_range(0..self.0.len())]);
        out.sort_unstable();
        out.dedup();
        Some(out)
    }
}

/// Exact enumeration against B = 1e5 sampled placements; returns the exact sum.
pub fn compare_methods(region: &[SegmentId], anon: &dyn ReplayAnonymizer, cohort: usize) -> f64 {
    let exact_k = AttackKnowledge {
        cohort: Some(cohort),
        replays: 256,
        seed: 5,
        ..Default::default()
    };
    let sampled_k = AttackKnowledge {
        budget: 100_000,
        ..exact_k.clone()
    };
    let mut eval = Evaluator::new(region, anon);
    let mut exact = Vec::new();
    let mut sampled = Vec::new();
    for &s in region {
        exact.push(eval.correlation_likelihood_with(s, &exact_k, Method::Exact).unwrap());
        sampled.push(eval.correlation_likelihood_with(s, &sampled_k, Method::Sampled).unwrap());
    }
    for (e, m) in exact.iter().zip(&sampled) {
        assert!((e - m).abs() <= 0.02, "exact {e} sampled {m}");
    }
    exact.iter().sum()
}
