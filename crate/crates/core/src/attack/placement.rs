//! Co-user placements: multisets of segment slots with product priors.

use rand::Rng;

/// Sorted multiset of indices into the cloaked segment list.
pub type Placement = Vec<usize>;

/// Number of multisets of size `r` over `n` items.
pub fn multiset_count(n: usize, r: usize) -> f64 {
    if n == 0 {
        return if r == 0 { 1.0 } else { 0.0 };
    }
    // C(n + r - 1, r)
    let mut c = 1.0f64;
    for i in 0..r {
        c = c * (n + i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// All multisets of size `r` over `0..n` in lexicographic order.
pub fn enumerate_multisets(n: usize, r: usize) -> Vec<Placement> {
    let mut out = Vec::new();
    if n == 0 && r > 0 {
        return out;
    }
    let mut cur = vec![0usize; r];
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..r).rev().find(|&i| cur[i] + 1 < n) else {
            break;
        };
        let v = cur[pos] + 1;
        for x in &mut cur[pos..] {
            *x = v;
        }
    }
    out
}

/// Whether sorted multiset `sub` is contained in sorted multiset `m`.
pub fn contains_multiset(m: &[usize], sub: &[usize]) -> bool {
    let mut it = m.iter();
    'outer: for x in sub {
        for y in it.by_ref() {
            if y == x {
                continue 'outer;
            }
            if y > x {
                return false;
            }
        }
        return false;
    }
    true
}

/// Multiset union of two sorted multisets.
pub fn merge(a: &[usize], b: &[usize]) -> Placement {
    let mut out: Placement = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out
}

/// Product of per-slot weights.
pub fn placement_weight(m: &[usize], weights: &[f64]) -> f64 {
    m.iter().map(|&i| weights[i]).product()
}

/// Zeroes the weight of placements that cannot host every injected query.
pub fn apply_injection(placements: &[(Placement, f64)], injected: &[usize]) -> Vec<(Placement, f64)> {
    let mut inj = injected.to_vec();
    inj.sort_unstable();
    placements
        .iter()
        .map(|(m, w)| {
            let keep = contains_multiset(m, &inj);
            (m.clone(), if keep { *w } else { 0.0 })
        })
        .collect()
}

/// Exact sampler for multisets with probability proportional to the product of slot weights.
#[derive(Debug, Clone)]
pub struct MultisetSampler {
    weights: Vec<f64>,
    size: usize,
    /// `z[i][j]`: total weight of size-`j` multisets over slots `i..`.
    z: Vec<Vec<f64>>,
}

impl MultisetSampler {
    pub fn new(weights: &[f64], size: usize) -> Self {
        let n = weights.len();
        let mut z = vec![vec![0.0; size + 1]; n + 1];
        z[n][0] = 1.0;
        for i in (0..n).rev() {
            for j in 0..=size {
                let mut acc = 0.0;
                let mut wp = 1.0;
                for c in 0..=j {
                    acc += wp * z[i + 1][j - c];
                    wp *= weights[i];
                }
                z[i][j] = acc;
            }
        }
        MultisetSampler {
            weights: weights.to_vec(),
            size,
            z,
        }
    }

    /// Sum of product weights over all multisets.
    pub fn total(&self) -> f64 {
        self.z[0][self.size]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Placement {
        let mut out = Vec::with_capacity(self.size);
        let mut left = self.size;
        for i in 0..self.weights.len() {
            if left == 0 {
                break;
            }
            let mut u = rng.random::<f64>() * self.z[i][left];
            let mut wp = 1.0;
            let mut take = left;
            for c in 0..=left {
                let mass = wp * self.z[i + 1][left - c];
                if u < mass {
                    take = c;
                    break;
                }
                u -= mass;
                wp *= self.weights[i];
            }
            out.extend(std::iter::repeat_n(i, take));
            left -= take;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn counts_match_enumeration() {
        for n in 1..6 {
            for r in 0..5 {
                assert_eq!(enumerate_multisets(n, r).len() as f64, multiset_count(n, r));
            }
        }
        assert_eq!(enumerate_multisets(3, 2).len(), 6);
    }

    #[test]
    fn containment() {
        assert!(contains_multiset(&[0, 1, 1, 3], &[1, 1]));
        assert!(!contains_multiset(&[0, 1, 3], &[1, 1]));
        assert!(contains_multiset(&[2], &[]));
        assert!(!contains_multiset(&[0, 1], &[2]));
    }

    #[test]
    fn sampler_matches_product_weights() {
        let w = [0.2, 0.5, 0.3];
        let s = MultisetSampler::new(&w, 2);
        let all = enumerate_multisets(3, 2);
        let total: f64 = all.iter().map(|m| placement_weight(m, &w)).sum();
        assert!((s.total() - total).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits: HashMap<Placement, usize> = HashMap::new();
        let n = 200_000;
        for _ in 0..n {
            *hits.entry(s.sample(&mut rng)).or_default() += 1;
        }
        for m in all {
            let want = placement_weight(&m, &w) / total;
            let got = hits.get(&m).copied().unwrap_or(0) as f64 / n as f64;
            assert!((want - got).abs() < 0.005, "{m:?}: {want} vs {got}");
        }
    }
}
