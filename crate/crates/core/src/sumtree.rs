//! Complete binary tree of non-negative weights supporting point updates and
//! sampling proportional to weight in `O(log n)`.
//!
//! Internal nodes store exact sums of their children recomputed on every
//! update, so the total never accumulates drift from repeated add/subtract.

#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: usize) -> Self {
        let cap = leaves.next_power_of_two().max(1);
        Self { leaves: cap, nodes: vec![0.0; 2 * cap] }
    }

    pub fn from_weights(weights: &[f64]) -> Self {
        let mut t = Self::new(weights.len());
        t.nodes[t.leaves..t.leaves + weights.len()].copy_from_slice(weights);
        for i in (1..t.leaves).rev() {
            t.nodes[i] = t.nodes[2 * i] + t.nodes[2 * i + 1];
        }
        t
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, w: f64) {
        debug_assert!(w >= 0.0 && w.is_finite(), "weight {w}");
        let mut k = self.leaves + i;
        self.nodes[k] = w;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf `i` such that the prefix sum before `i` is `<= u < ` prefix sum
    /// through `i`, for `u` in `[0, total)`. Zero-weight subtrees are never
    /// entered, even when rounding pushes `u` to the boundary.
    pub fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            let right = self.nodes[2 * k + 1];
            if (u < left && left > 0.0) || right <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_proportional_leaf() {
        let t = SumTree::from_weights(&[1.0, 0.0, 2.0, 0.5]);
        assert_eq!(t.total(), 3.5);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.99), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(3.5), 3);
    }

    #[test]
    fn skips_zero_leaves_at_boundary() {
        let t = SumTree::from_weights(&[1.0, 0.0, 0.0]);
        assert_eq!(t.find(1.0), 0);
    }

    proptest! {
        #[test]
        fn total_matches_sum_after_updates(
            init in prop::collection::vec(0.0f64..10.0, 1..40),
            updates in prop::collection::vec((0usize..40, 0.0f64..10.0), 0..60),
        ) {
            let mut w = init.clone();
            let mut t = SumTree::from_weights(&init);
            for (i, v) in updates {
                let i = i % w.len();
                w[i] = v;
                t.set(i, v);
            }
            let direct: f64 = w.iter().sum();
            prop_assert!((t.total() - direct).abs() <= 1e-9 * direct.max(1.0));
            if t.total() > 0.0 {
                let mut acc = 0.0;
                for (i, &wi) in w.iter().enumerate() {
                    if wi > 0.0 {
                        prop_assert_eq!(t.find(acc + 0.5 * wi), i);
                    }
                    acc += wi;
                }
            }
        }
    }
}
