/// Term `x` (0-based) of the Luby sequence scaled by powers of `y`, as in MiniSat.
pub fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0i32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

/// Luby restart schedule counted in conflicts.
#[derive(Debug, Clone)]
pub struct LubyRestarts {
    base: u64,
    restarts: u64,
    conflicts_since: u64,
}

impl LubyRestarts {
    pub fn new(base: u64) -> LubyRestarts {
        LubyRestarts {
            base: base.max(1),
            restarts: 0,
            conflicts_since: 0,
        }
    }

    pub fn current_interval(&self) -> u64 {
        (luby(2.0, self.restarts) * self.base as f64) as u64
    }

    pub fn on_conflict(&mut self) {
        self.conflicts_since += 1;
    }

    pub fn should_restart(&self) -> bool {
        self.conflicts_since >= self.current_interval()
    }

    /// Advances the schedule and returns the conflicts spent in the finished run.
    pub fn restart(&mut self) -> u64 {
        let spent = self.conflicts_since;
        self.restarts += 1;
        self.conflicts_since = 0;
        spent
    }
}
