//! Binary max-heap of variables keyed by activity.
//!
//! Ties go to the lower tie-break key. Keys default to the variable index, so
//! with all activities equal the heap yields variables in ascending order
//! (the default branching order). An injected order replaces the keys with
//! ranks, which keeps it intact even where activities underflow to equal values.

#[derive(Debug, Clone, Default)]
pub struct ActivityHeap {
    heap: Vec<u32>,
    /// Position in `heap` per variable, `None` when absent.
    position: Vec<Option<usize>>,
    tiebreak: Vec<u32>,
}

impl ActivityHeap {
    pub fn new(num_vars: usize) -> ActivityHeap {
        ActivityHeap {
            heap: Vec::with_capacity(num_vars),
            position: vec![None; num_vars],
            tiebreak: (0..num_vars as u32).collect(),
        }
    }

    /// Replaces the tie-break keys; call [`ActivityHeap::rebuild`] afterwards.
    pub fn set_tiebreak(&mut self, keys: Vec<u32>) {
        assert_eq!(keys.len(), self.position.len());
        self.tiebreak = keys;
    }

    #[inline]
    fn before(&self, activity: &[f64], a: u32, b: u32) -> bool {
        let (x, y) = (activity[a as usize], activity[b as usize]);
        x > y || (x == y && self.tiebreak[a as usize] < self.tiebreak[b as usize])
    }

    pub fn contains(&self, var: u32) -> bool {
        self.position[var as usize].is_some()
    }

    #[cfg(test)]
    pub fn peek(&self) -> Option<u32> {
        self.heap.first().copied()
    }

    pub fn insert(&mut self, var: u32, activity: &[f64]) {
        if self.contains(var) {
            return;
        }
        let pos = self.heap.len();
        self.heap.push(var);
        self.position[var as usize] = Some(pos);
        self.sift_up(pos, activity);
    }

    pub fn pop(&mut self, activity: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.position[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = Some(0);
            self.sift_down(0, activity);
        }
        Some(top)
    }

    /// Restores heap order after the activity of `var` increased.
    pub fn increased(&mut self, var: u32, activity: &[f64]) {
        if let Some(pos) = self.position[var as usize] {
            self.sift_up(pos, activity);
        }
    }

    /// Re-establishes heap order after arbitrary activity changes.
    pub fn rebuild(&mut self, activity: &[f64]) {
        for i in (0..self.heap.len() / 2).rev() {
            self.sift_down(i, activity);
        }
    }

    fn sift_up(&mut self, mut pos: usize, activity: &[f64]) {
        let var = self.heap[pos];
        while pos > 0 {
            let parent = (pos - 1) / 2;
            let pvar = self.heap[parent];
            if !self.before(activity, var, pvar) {
                break;
            }
            self.heap[pos] = pvar;
            self.position[pvar as usize] = Some(pos);
            pos = parent;
        }
        self.heap[pos] = var;
        self.position[var as usize] = Some(pos);
    }

    fn sift_down(&mut self, mut pos: usize, activity: &[f64]) {
        let var = self.heap[pos];
        let len = self.heap.len();
        loop {
            let left = 2 * pos + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let child = if right < len && self.before(activity, self.heap[right], self.heap[left]) {
                right
            } else {
                left
            };
            let cvar = self.heap[child];
            if !self.before(activity, cvar, var) {
                break;
            }
            self.heap[pos] = cvar;
            self.position[cvar as usize] = Some(pos);
            pos = child;
        }
        self.heap[pos] = var;
        self.position[var as usize] = Some(pos);
    }
}
