//! Variable move-to-front queue.
//!
//! Variables sit in a doubly linked list ordered by bump stamp, the most
//! recently bumped at the head. Decisions take the first unassigned variable
//! from the head. A search cursor skips the assigned prefix: every variable
//! with a higher stamp than the cursor is assigned.

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct VmtfQueue {
    prev: Vec<u32>,
    next: Vec<u32>,
    stamp: Vec<u64>,
    head: u32,
    tail: u32,
    cursor: u32,
    next_stamp: u64,
}

impl VmtfQueue {
    /// Queue whose head-to-tail order is `order` (0-based variables).
    pub fn new(order: &[u32]) -> VmtfQueue {
        let n = order.len();
        let mut q = VmtfQueue {
            prev: vec![NIL; n],
            next: vec![NIL; n],
            stamp: vec![0; n],
            head: NIL,
            tail: NIL,
            cursor: NIL,
            next_stamp: 1,
        };
        q.reset(order);
        q
    }

    /// Relinks the whole queue in the given head-to-tail order.
    pub fn reset(&mut self, order: &[u32]) {
        let n = order.len() as u64;
        for (i, &v) in order.iter().enumerate() {
            let v = v as usize;
            self.prev[v] = if i == 0 { NIL } else { order[i - 1] };
            self.next[v] = order.get(i + 1).copied().unwrap_or(NIL);
            self.stamp[v] = self.next_stamp + n - i as u64;
        }
        self.next_stamp += n + 1;
        self.head = order.first().copied().unwrap_or(NIL);
        self.tail = order.last().copied().unwrap_or(NIL);
        self.cursor = self.head;
    }

    /// Head-to-tail listing, for inspection.
    pub fn order(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.prev.len());
        let mut v = self.head;
        while v != NIL {
            out.push(v);
            v = self.next[v as usize];
        }
        out
    }

    pub fn stamp(&self, var: u32) -> u64 {
        self.stamp[var as usize]
    }

    fn unlink(&mut self, var: u32) {
        let (p, n) = (self.prev[var as usize], self.next[var as usize]);
        if p == NIL {
            self.head = n;
        } else {
            self.next[p as usize] = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            self.prev[n as usize] = p;
        }
    }

    fn push_front(&mut self, var: u32) {
        self.prev[var as usize] = NIL;
        self.next[var as usize] = self.head;
        if self.head != NIL {
            self.prev[self.head as usize] = var;
        } else {
            self.tail = var;
        }
        self.head = var;
    }

    /// Moves the variables to the head. `vars` must already be sorted by
    /// ascending stamp so their relative order is preserved.
    pub fn bump(&mut self, vars: &[u32], assigned: impl Fn(u32) -> bool) {
        for &v in vars {
            if self.cursor == v {
                // Keep the cursor on a variable still inside the assigned prefix.
                self.cursor = if self.prev[v as usize] != NIL {
                    self.prev[v as usize]
                } else {
                    self.next[v as usize]
                };
            }
            self.unlink(v);
            self.push_front(v);
            self.stamp[v as usize] = self.next_stamp;
            self.next_stamp += 1;
            if !assigned(v) || self.cursor == NIL {
                self.cursor = v;
            }
        }
    }

    /// Called when `var` becomes unassigned.
    pub fn on_unassign(&mut self, var: u32) {
        if self.cursor == NIL || self.stamp[var as usize] > self.stamp[self.cursor as usize] {
            self.cursor = var;
        }
    }

    /// First unassigned variable from the head, if any.
    pub fn next_decision(&mut self, assigned: impl Fn(u32) -> bool) -> Option<u32> {
        let mut v = self.cursor;
        while v != NIL && assigned(v) {
            v = self.next[v as usize];
        }
        if v == NIL {
            // Everything assigned; park on the tail so unassigns can move us back.
            self.cursor = self.tail;
            None
        } else {
            self.cursor = v;
            Some(v)
        }
    }
}
