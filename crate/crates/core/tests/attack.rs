use rand_chacha::ChaCha8Rng;
use starcloak::attack::{
    apply_injection, correlation_likelihood, enumerate_multisets, linkability, replay_likelihood, AttackKnowledge,
    ReplayAnonymizer, StarCloakReplay,
};
use starcloak::cost::{CostParams, StarCostTable};
use starcloak::engine::Reach;
use starcloak::ids::SegmentId;
use starcloak::network::{synthetic, RoadMap};

mod support;

use support::attack::{compare_methods, knowledge, segs, Closure, Noisy};

/// Output depends only on the victim's segment.
struct PerVictim(Vec<(SegmentId, Vec<SegmentId>)>);

impl ReplayAnonymizer for PerVictim {
    fn replay(&self, victim: SegmentId, _: &[SegmentId], _: &mut ChaCha8Rng) -> Option<Vec<SegmentId>> {
        self.0.iter().find(|(v, _)| *v == victim).map(|(_, out)| out.clone())
    }
}

#[test]
fn replay_likelihood_overlap() {
    let s = segs(&[1, 2, 3, 4]);
    let full = PerVictim(s.iter().map(|&v| (v, s.clone())).collect());
    let k = knowledge(1);
    assert_eq!(replay_likelihood(&s, s[0], &full, &k), 1.0);
    let disjoint = PerVictim(vec![(s[0], segs(&[9, 10]))]);
    assert_eq!(replay_likelihood(&s, s[0], &disjoint, &k), 0.0);
    let half = PerVictim(vec![(s[0], segs(&[1, 3]))]);
    assert_eq!(replay_likelihood(&s, s[0], &half, &k), 0.5);
    assert_eq!(replay_likelihood(&s, s[1], &half, &k), 0.0);
}

#[test]
fn hand_normalized_linkability() {
    let s = segs(&[1, 2, 3]);
    let anon = PerVictim(vec![(s[0], segs(&[1])), (s[1], segs(&[1, 2])), (s[2], segs(&[3]))]);
    let p = linkability(&s, &anon, &knowledge(1)).unwrap();
    for (got, want) in p.link.iter().zip([0.25, 0.5, 0.25]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((p.entropy - 1.5).abs() < 1e-12);
    assert!((p.normalized_entropy - 0.9464).abs() < 1e-4);
}

#[test]
fn single_cohort_reduces_to_prior_times_replay() {
    let s = segs(&[1, 2, 3, 4]);
    let anon = PerVictim(vec![(s[1], segs(&[1, 2, 7]))]);
    let k = knowledge(1);
    let like = correlation_likelihood(&s, s[1], &anon, &k).unwrap();
    assert!((like - 0.25 * replay_likelihood(&s, s[1], &anon, &k)).abs() < 1e-12);
}

#[test]
fn symmetric_pair_is_even() {
    let s = segs(&[4, 8]);
    let k = knowledge(2);
    let a = correlation_likelihood(&s, s[0], &Closure, &k).unwrap();
    let b = correlation_likelihood(&s, s[1], &Closure, &k).unwrap();
    assert!((a - b).abs() < 1e-12);
    let p = linkability(&s, &Closure, &k).unwrap();
    assert!((p.link[0] - 0.5).abs() < 1e-12 && (p.normalized_entropy - 1.0).abs() < 1e-12);
}

#[test]
fn single_segment_is_fully_linked() {
    let s = segs(&[5]);
    let p = linkability(&s, &Closure, &knowledge(3)).unwrap();
    assert_eq!(p.link, vec![1.0]);
    assert_eq!(p.normalized_entropy, 0.0);
}

#[test]
fn exact_sum_matches_six_placements() {
    let s = segs(&[1, 2, 3]);
    let placements = enumerate_multisets(3, 2);
    assert_eq!(placements.len(), 6);
    let prior = 1.0 / 3.0;
    for (vi, &victim) in s.iter().enumerate() {
        let mut want = 0.0;
        for (a, b) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
            let mut covered = [false; 3];
            covered[vi] = true;
            covered[a] = true;
            covered[b] = true;
            let overlap = covered.iter().filter(|c| **c).count() as f64 / 3.0;
            want += prior * prior * prior * overlap;
        }
        let got = correlation_likelihood(&s, victim, &Closure, &knowledge(3)).unwrap();
        assert!((got - want).abs() < 1e-12, "segment {victim}: {got} vs {want}");
    }
}

#[test]
fn injection_zeroes_inconsistent_placements() {
    let placements: Vec<(Vec<usize>, f64)> = enumerate_multisets(3, 2).into_iter().map(|m| (m, 1.0)).collect();
    assert_eq!(apply_injection(&placements, &[]), placements);
    let kept = apply_injection(&placements, &[2]);
    let alive: Vec<Vec<usize>> = kept.iter().filter(|(_, w)| *w > 0.0).map(|(m, _)| m.clone()).collect();
    assert_eq!(alive, vec![vec![0, 2], vec![1, 2], vec![2, 2]]);
}

/// Two intersections v5 and v6 joined by v5v6; v5 also ends v4v5 and v5v10,
/// v6 also ends v6v7 and v2v6. Each user lands on a star holding its segment,
/// and v5v6 goes to v6 when another user already sits there.
struct TwoStars;

const V4V5: u32 = 0;
const V5V10: u32 = 1;
const V5V6: u32 = 2;
const V6V7: u32 = 3;
const V2V6: u32 = 4;

impl ReplayAnonymizer for TwoStars {
    fn replay(&self, victim: SegmentId, co: &[SegmentId], _: &mut ChaCha8Rng) -> Option<Vec<SegmentId>> {
        let phi5 = segs(&[V4V5, V5V10, V5V6]);
        let phi6 = segs(&[V5V6, V6V7, V2V6]);
        let users: Vec<SegmentId> = co.iter().copied().chain([victim]).collect();
        let six_busy = users.iter().any(|u| u.0 == V6V7 || u.0 == V2V6);
        let mut use5 = false;
        let mut use6 = false;
        for u in &users {
            match u.0 {
                V4V5 | V5V10 => use5 = true,
                V5V6 if six_busy => use6 = true,
                V5V6 => use5 = true,
                _ => use6 = true,
            }
        }
        let mut out = Vec::new();
        if use5 {
            out.extend(&phi5);
        }
        if use6 {
            out.extend(&phi6);
        }
        out.sort_unstable();
        out.dedup();
        Some(out)
    }
}

#[test]
fn injected_queries_confine_the_victim() {
    let s = segs(&[V4V5, V5V10, V5V6, V6V7, V2V6]);
    let without = linkability(&s, &TwoStars, &knowledge(3)).unwrap();
    let k = AttackKnowledge {
        injected: segs(&[V6V7, V2V6]),
        ..knowledge(3)
    };
    let with = linkability(&s, &TwoStars, &k).unwrap();
    let top = with.max_linkability();
    let argmax: Vec<SegmentId> = s
        .iter()
        .zip(&with.link)
        .filter(|(_, l)| (**l - top).abs() < 1e-12)
        .map(|(s, _)| *s)
        .collect();
    assert_eq!(argmax, segs(&[V4V5, V5V10]));
    assert!(with.normalized_entropy < without.normalized_entropy);
    let sum: f64 = with.link.iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
}

#[test]
fn injection_outside_region_rules_everything_out() {
    let s = segs(&[1, 2, 3]);
    let k = AttackKnowledge {
        injected: segs(&[40]),
        ..knowledge(2)
    };
    for &seg in &s {
        assert_eq!(correlation_likelihood(&s, seg, &Closure, &k).unwrap(), 0.0);
    }
    let p = linkability(&s, &Closure, &k).unwrap();
    assert!(p.link.iter().all(|l| (l - 1.0 / 3.0).abs() < 1e-12));
}

#[test]
fn sampled_placements_match_enumeration() {
    let region = segs(&[1, 2, 3, 4, 5, 6]);
    for cohort in 1..=4 {
        assert!(compare_methods(&region[..4], &Noisy(segs(&[1, 2, 3, 4, 9])), cohort) > 0.0);
        assert!(compare_methods(&region, &Noisy(region.clone()), cohort) > 0.0);
    }
}

#[test]
fn sampled_star_replays_match_enumeration() {
    let map = RoadMap::build(synthetic::grid_network(&Default::default()));
    let costs = StarCostTable::new(&map);
    let star = map
        .stars
        .stars()
        .iter()
        .find(|s| s.segments.len() == 4)
        .expect("a four-way intersection");
    let mut region = star.segments.clone();
    let extra = map.stars.neighbors(star.id)[0];
    region.extend(map.stars.get(extra).segments.iter().copied());
    region.sort_unstable();
    region.dedup();
    region.truncate(6);
    let anon = StarCloakReplay::new(&map, &costs, CostParams::default(), Reach::Hops, 5.0, 2, 4);
    for cohort in [2, 4] {
        assert!(compare_methods(&region, &anon, cohort) > 0.05);
    }
}
