/// Complete binary tree of partial sums over nonnegative leaf weights.
///
/// Internal nodes are always recomputed as the sum of their two children, so
/// the root is a deterministic function of the current leaves and never
/// accumulates update drift.
#[derive(Clone, Debug)]
pub(crate) struct SumTree {
    len: usize,
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub(crate) fn new(weights: &[f64]) -> Self {
        let len = weights.len();
        let capacity = len.max(1).next_power_of_two();
        let mut nodes = vec![0.0; 2 * capacity];
        nodes[capacity..capacity + len].copy_from_slice(weights);
        for node in (1..capacity).rev() {
            nodes[node] = nodes[2 * node] + nodes[2 * node + 1];
        }
        Self {
            len,
            capacity,
            nodes,
        }
    }

    #[inline]
    pub(crate) fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub(crate) fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity + leaf]
    }

    pub(crate) fn leaves(&self) -> &[f64] {
        &self.nodes[self.capacity..self.capacity + self.len]
    }

    #[inline]
    pub(crate) fn set(&mut self, leaf: usize, weight: f64) {
        debug_assert!(leaf < self.len);
        let mut node = self.capacity + leaf;
        self.nodes[node] = weight;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf selected by a uniform variate `u` in `[0, 1)`, with probability
    /// proportional to its weight.
    #[inline]
    pub(crate) fn sample(&self, u: f64) -> usize {
        let mut target = u * self.total();
        let mut node = 1;
        while node < self.capacity {
            let left = 2 * node;
            let left_sum = self.nodes[left];
            if target < left_sum || self.nodes[left + 1] <= 0.0 {
                node = left;
            } else {
                target -= left_sum;
                node = left + 1;
            }
        }
        // Rounding can land on an empty padding leaf at the right edge.
        let mut leaf = node - self.capacity;
        while leaf >= self.len || (self.get(leaf) <= 0.0 && leaf > 0) {
            leaf -= 1;
        }
        leaf
    }
}
