//! Credibility distributions and hard hint selection.

use alloc::vec::Vec;

use rand::Rng;

use crate::config::SelectionMode;
use crate::graph::TupleId;

/// `p(k | (u, V))` over a tuple pool, sorted by descending probability with
/// ascending tuple index breaking ties.
#[derive(Debug, Clone, PartialEq)]
pub struct CredibilityDistribution {
    entries: Vec<(TupleId, f64)>,
}

impl CredibilityDistribution {
    /// Sorts `entries` into canonical order. Probabilities are taken as
    /// given.
    pub fn new(mut entries: Vec<(TupleId, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self { entries }
    }

    /// Equal mass on every tuple of `pool`.
    pub fn uniform(pool: &[TupleId]) -> Self {
        let p = 1.0 / pool.len() as f64;
        Self::new(pool.iter().map(|&k| (k, p)).collect())
    }

    pub fn entries(&self) -> &[(TupleId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn probability(&self, k: TupleId) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == k).map(|e| e.1)
    }
}

/// m = min(S, max(1, round(α·|pool|))) when α > 0 and the pool is
/// nonempty, else 0.
pub fn hint_count(alpha: f64, pool: usize, cap: usize) -> usize {
    if alpha <= 0.0 || pool == 0 {
        return 0;
    }
    let m = libm::round(alpha * pool as f64) as usize;
    m.max(1).min(cap).min(pool)
}

/// Hard selection of `hint_count(α, |pool|, S)` tuples. Each selected tuple
/// keeps its original probability. The result is in descending-probability
/// order regardless of draw order.
pub fn select_hints<R: Rng + ?Sized>(
    dist: &CredibilityDistribution,
    alpha: f64,
    cap: usize,
    mode: SelectionMode,
    rng: &mut R,
) -> Vec<(TupleId, f64)> {
    let m = hint_count(alpha, dist.len(), cap);
    let entries = dist.entries();
    let picked: Vec<usize> = match mode {
        SelectionMode::TopK => (0..m).collect(),
        SelectionMode::WeightedSample => weighted_without_replacement(entries, m, rng),
    };
    let mut out: Vec<(TupleId, f64)> = picked.into_iter().map(|i| entries[i]).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Sequential draws, each proportional to the mass not yet drawn.
fn weighted_without_replacement<R: Rng + ?Sized>(entries: &[(TupleId, f64)], m: usize, rng: &mut R) -> Vec<usize> {
    let mut taken = alloc::vec![false; entries.len()];
    let mut remaining: f64 = entries.iter().map(|e| e.1).sum();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut r = rng.random::<f64>() * remaining;
        let mut choice = None;
        for (i, e) in entries.iter().enumerate() {
            if taken[i] {
                continue;
            }
            choice = Some(i);
            if r < e.1 {
                break;
            }
            r -= e.1;
        }
        // rounding can leave r just above the last mass; `choice` then holds
        // the last untaken entry
        let i = choice.expect("m never exceeds the pool size");
        taken[i] = true;
        remaining -= entries[i].1;
        out.push(i);
    }
    out
}

/// Uniform selection of `m` distinct positions out of `n`, in draw order.
pub fn uniform_without_replacement<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, n, m).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist(ps: &[f64]) -> CredibilityDistribution {
        CredibilityDistribution::new(ps.iter().enumerate().map(|(i, &p)| (TupleId(i as u32), p)).collect())
    }

    #[test]
    fn canonical_order_breaks_ties_by_index() {
        let d = CredibilityDistribution::new(vec![(TupleId(3), 0.25), (TupleId(1), 0.25), (TupleId(2), 0.5)]);
        let ids: Vec<u32> = d.entries().iter().map(|e| e.0 .0).collect();
        assert_eq!(ids, vec![2, 1, 3]);
    }

    #[test]
    fn count_formula() {
        assert_eq!(hint_count(0.0, 10, 5), 0);
        assert_eq!(hint_count(0.5, 0, 5), 0);
        assert_eq!(hint_count(0.01, 10, 5), 1);
        assert_eq!(hint_count(0.3, 5, 8), 2); // round(1.5) = 2
        assert_eq!(hint_count(0.6, 5, 8), 3);
        assert_eq!(hint_count(1.0, 40, 16), 16);
    }

    #[test]
    fn full_pool_when_alpha_is_one() {
        let d = dist(&[0.1, 0.2, 0.3, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [SelectionMode::TopK, SelectionMode::WeightedSample] {
            let s = select_hints(&d, 1.0, 10, mode, &mut rng);
            assert_eq!(s.len(), 4);
            assert_eq!(s, d.entries().to_vec());
        }
    }

    #[test]
    fn top_k_of_ten_is_argmax() {
        let d = dist(&[0.05, 0.05, 0.3, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = select_hints(&d, 0.1, 16, SelectionMode::TopK, &mut rng);
        assert_eq!(s, vec![(TupleId(2), 0.3)]);
    }
}
