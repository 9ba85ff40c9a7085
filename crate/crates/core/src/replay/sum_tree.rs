//! Array-backed sum/max tree over a fixed number of leaves.

/// Binary tree whose internal nodes hold the sum and max of their subtree.
///
/// Leaves live at `[size, 2 * size)` with `size` the next power of two of the
/// capacity; unused leaves stay at zero.
#[derive(Debug, Clone)]
pub struct PriorityTree {
    size: usize,
    capacity: usize,
    sum: Vec<f64>,
    max: Vec<f64>,
}

impl PriorityTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "tree capacity must be positive");
        let size = capacity.next_power_of_two();
        Self { size, capacity, sum: vec![0.0; 2 * size], max: vec![0.0; 2 * size] }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.sum[1]
    }

    pub fn max(&self) -> f64 {
        self.max[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.sum[self.size + index]
    }

    /// Sets leaf `index` to `value` (sum tree) and `max_key` (max tree).
    pub fn set(&mut self, index: usize, value: f64, max_key: f64) {
        assert!(index < self.capacity, "leaf {index} out of range");
        debug_assert!(value >= 0.0 && max_key >= 0.0);
        let mut node = self.size + index;
        self.sum[node] = value;
        self.max[node] = max_key;
        while node > 1 {
            node /= 2;
            let (l, r) = (2 * node, 2 * node + 1);
            self.sum[node] = self.sum[l] + self.sum[r];
            self.max[node] = self.max[l].max(self.max[r]);
        }
    }

    /// Leaf whose cumulative interval contains `mass` (clamped into `[0, total)`).
    pub fn find_prefix(&self, mass: f64) -> usize {
        let mut mass = mass.clamp(0.0, self.total());
        let mut node = 1;
        while node < self.size {
            let left = 2 * node;
            if mass < self.sum[left] || self.sum[left + 1] <= 0.0 {
                node = left;
            } else {
                mass -= self.sum[left];
                node = left + 1;
            }
        }
        // Round-off can walk into an empty leaf; fall back to the last live one.
        let mut index = node - self.size;
        while index > 0 && (index >= self.capacity || self.sum[self.size + index] <= 0.0) {
            index -= 1;
        }
        index
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for node in (1..self.size).rev() {
            let (l, r) = (2 * node, 2 * node + 1);
            self.sum[node] = self.sum[l] + self.sum[r];
            self.max[node] = self.max[l].max(self.max[r]);
        }
    }
}
