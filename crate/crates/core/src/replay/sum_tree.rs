/// Binary tree over `capacity` leaf priorities; each internal node stores the
/// sum of its children so prefix-sum search is `O(log n)`.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    /// Leaves occupy `[leaves, 2 * leaves)`; node 1 is the root.
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "sum tree capacity must be positive");
        let leaves = capacity.next_power_of_two();
        Self { capacity, leaves, nodes: vec![0.0; 2 * leaves] }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.leaves + leaf]
    }

    /// Sets a leaf and recomputes every ancestor from its children.
    pub fn set(&mut self, leaf: usize, priority: f64) {
        assert!(leaf < self.capacity, "leaf {leaf} out of range");
        assert!(priority >= 0.0, "priorities must be non-negative");
        let mut node = self.leaves + leaf;
        self.nodes[node] = priority;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative interval `[c_{i-1}, c_i)` contains `value`.
    /// Values at or beyond the total land on the last positive leaf.
    pub fn find(&self, mut value: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = 2 * node;
            if value < self.nodes[left] || self.nodes[left + 1] <= 0.0 {
                node = left;
            } else {
                value -= self.nodes[left];
                node = left + 1;
            }
        }
        node - self.leaves
    }

    /// Sum of the leaves, recomputed from scratch.
    pub fn leaf_sum(&self) -> f64 {
        self.nodes[self.leaves..self.leaves + self.capacity].iter().sum()
    }
}
