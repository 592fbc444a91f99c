use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng as _;

use super::heap::ActivityHeap;
use super::luby::LubyRestarts;
use super::vmtf::VmtfQueue;
use super::{
    Heuristic, PhaseDefault, RemindMode, SolveResult, SolveStats, SolverConfig, SolverError,
    VariableOrder,
};
use crate::cnf::Formula;
use crate::seed::{rng_from_seed, Rng};

const RESCALE_LIMIT: f64 = 1e100;

/// Internal literal: `var << 1 | negated`, variables 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Lit(u32);

impl Lit {
    #[inline]
    fn new(var: u32, negated: bool) -> Lit {
        Lit(var << 1 | negated as u32)
    }
    #[inline]
    fn var(self) -> u32 {
        self.0 >> 1
    }
    #[inline]
    fn negated(self) -> bool {
        self.0 & 1 == 1
    }
    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
    #[inline]
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[inline]
fn lit_value(assigns: &[Option<bool>], lit: Lit) -> Option<bool> {
    assigns[lit.var() as usize].map(|b| b != lit.negated())
}

#[derive(Debug, Clone)]
struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: Lit,
}

/// A single CDCL search over one formula. Not reusable after [`Solver::solve`].
pub struct Solver {
    num_vars: usize,
    config: SolverConfig,

    clauses: Vec<ClauseData>,
    /// `watches[l]`: clauses currently watching literal `l`.
    watches: Vec<Vec<Watcher>>,
    units: Vec<Lit>,
    /// An empty clause (after normalisation) was given.
    trivially_unsat: bool,
    num_learnts: usize,

    assigns: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    saved_phase: Vec<bool>,

    activity: Vec<f64>,
    var_inc: f64,
    heap: ActivityHeap,
    vmtf: VmtfQueue,
    remind_order: Option<VariableOrder>,

    seen: Vec<bool>,
    touched: Vec<u64>,
    conflict_stamp: u64,
    conflict_count: Vec<u64>,

    restarts: LubyRestarts,
    rng: Rng,
    started: bool,

    propagations: u64,
    conflicts: u64,
    decisions: u64,
    restart_count: u64,
    conflicts_per_restart: Vec<u64>,
    first_decision: Option<u32>,
}

impl Solver {
    pub fn new(formula: &Formula, config: &SolverConfig) -> Result<Solver, SolverError> {
        config.validate()?;
        let n = formula.num_vars() as usize;
        if let Some(order) = &config.injected_order {
            if order.len() != n {
                return Err(SolverError::OrderSizeMismatch {
                    expected: n,
                    got: order.len(),
                });
            }
        }

        let identity: Vec<u32> = (0..n as u32).collect();
        let mut solver = Solver {
            num_vars: n,
            config: config.clone(),
            clauses: Vec::with_capacity(formula.num_clauses()),
            watches: vec![Vec::new(); 2 * n],
            units: Vec::new(),
            trivially_unsat: false,
            num_learnts: 0,
            assigns: vec![None; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            saved_phase: vec![false; n],
            activity: vec![0.0; n],
            var_inc: 1.0,
            heap: ActivityHeap::new(n),
            vmtf: VmtfQueue::new(&identity),
            remind_order: config.injected_order.clone(),
            seen: vec![false; n],
            touched: vec![0; n],
            conflict_stamp: 0,
            conflict_count: vec![0; n],
            restarts: LubyRestarts::new(config.restart_base),
            rng: rng_from_seed(config.seed),
            started: false,
            propagations: 0,
            conflicts: 0,
            decisions: 0,
            restart_count: 0,
            conflicts_per_restart: Vec::new(),
            first_decision: None,
        };
        for v in 0..n as u32 {
            solver.heap.insert(v, &solver.activity);
        }

        let mut scratch: Vec<Lit> = Vec::new();
        'clauses: for clause in formula.clauses() {
            scratch.clear();
            for lit in clause {
                let l = Lit::new(lit.var() - 1, !lit.is_positive());
                if scratch.contains(&l.not()) {
                    continue 'clauses;
                }
                if !scratch.contains(&l) {
                    scratch.push(l);
                }
            }
            match scratch.len() {
                0 => solver.trivially_unsat = true,
                1 => solver.units.push(scratch[0]),
                _ => {
                    solver.attach(scratch.clone(), false);
                }
            }
        }
        Ok(solver)
    }

    /// Seeds the decision heuristic with `order`. VSIDS activities become
    /// `var_decay^(rank - 1)`; the VMTF queue is relinked in order.
    pub fn inject_order(&mut self, order: &VariableOrder) -> Result<(), SolverError> {
        if self.started {
            return Err(SolverError::SearchStarted);
        }
        if order.len() != self.num_vars {
            return Err(SolverError::OrderSizeMismatch {
                expected: self.num_vars,
                got: order.len(),
            });
        }
        let g = self.config.var_decay;
        for (i, &v) in order.as_slice().iter().enumerate() {
            self.activity[v as usize - 1] = g.powi(i as i32);
        }
        self.heap
            .set_tiebreak(order.ranks().iter().map(|r| r - 1).collect());
        self.heap.rebuild(&self.activity);
        let zero_based: Vec<u32> = order.as_slice().iter().map(|v| v - 1).collect();
        self.vmtf.reset(&zero_based);
        self.remind_order = Some(order.clone());
        Ok(())
    }

    /// Re-applies a suggested order to the VSIDS activities.
    pub fn remind(
        &mut self,
        order: &VariableOrder,
        factor: f64,
        decay: f64,
        mode: RemindMode,
    ) -> Result<(), SolverError> {
        if !(factor >= 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "remind factor must be >= 0, got {factor}"
            )));
        }
        if order.len() != self.num_vars {
            return Err(SolverError::OrderSizeMismatch {
                expected: self.num_vars,
                got: order.len(),
            });
        }
        if factor == 0.0 {
            return Ok(());
        }
        let max = self.activity.iter().copied().fold(0.0, f64::max);
        for (i, a) in self.activity.iter_mut().enumerate() {
            let rank = order.rank(i as u32 + 1) as i32;
            match mode {
                RemindMode::Additive => *a += factor * max * decay.powi(rank - 1),
                RemindMode::Literal => *a = factor * max * decay.powi(-rank),
            }
        }
        if self.activity.iter().any(|&a| a > RESCALE_LIMIT) {
            self.rescale();
        }
        self.heap.rebuild(&self.activity);
        Ok(())
    }

    pub fn activities(&self) -> &[f64] {
        &self.activity
    }

    /// The VMTF queue from head to tail, 1-based.
    pub fn vmtf_order(&self) -> Vec<u32> {
        self.vmtf.order().into_iter().map(|v| v + 1).collect()
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        debug_assert!(lits.len() >= 2);
        let cref = self.clauses.len() as u32;
        self.watches[lits[0].idx()].push(Watcher {
            cref,
            blocker: lits[1],
        });
        self.watches[lits[1].idx()].push(Watcher {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(ClauseData {
            lits,
            learnt,
            deleted: false,
        });
        if learnt {
            self.num_learnts += 1;
        }
        cref
    }

    #[inline]
    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, lit: Lit, reason: Option<u32>, implied: bool) {
        let v = lit.var() as usize;
        debug_assert!(self.assigns[v].is_none());
        self.assigns[v] = Some(!lit.negated());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
        if implied {
            self.propagations += 1;
        }
    }

    /// Unit propagation over the watch lists. Returns a conflicting clause.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() && conflict.is_none() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p.not();
            let mut ws = std::mem::take(&mut self.watches[false_lit.idx()]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if lit_value(&self.assigns, w.blocker) == Some(true) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let lits = &mut self.clauses[w.cref as usize].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let kept = Watcher {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && lit_value(&self.assigns, first) == Some(true) {
                    ws[j] = kept;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    if lit_value(&self.assigns, lits[k]) != Some(false) {
                        lits.swap(1, k);
                        self.watches[lits[1].idx()].push(kept);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = kept;
                j += 1;
                if lit_value(&self.assigns, first) == Some(false) {
                    conflict = Some(w.cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        i += 1;
                        j += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref), true);
                }
            }
            ws.truncate(j);
            self.watches[false_lit.idx()] = ws;
        }
        if conflict.is_some() {
            self.qhead = self.trail.len();
        }
        conflict
    }

    fn touch(&mut self, var: u32) {
        let v = var as usize;
        if self.touched[v] != self.conflict_stamp {
            self.touched[v] = self.conflict_stamp;
            self.conflict_count[v] += 1;
        }
    }

    fn bump_activity(&mut self, var: u32) {
        let v = var as usize;
        self.activity[v] += self.var_inc;
        if self.activity[v] > RESCALE_LIMIT {
            self.rescale();
        }
        self.heap.increased(var, &self.activity);
    }

    fn rescale(&mut self) {
        for a in &mut self.activity {
            *a *= 1.0 / RESCALE_LIMIT;
        }
        self.var_inc *= 1.0 / RESCALE_LIMIT;
    }

    /// Records participation for a conflict that needs no analysis (level 0).
    fn record_root_conflict(&mut self, vars: &[u32]) {
        self.conflict_stamp += 1;
        for &v in vars {
            self.touch(v);
        }
    }

    /// First-UIP analysis. Returns the learned clause (asserting literal first,
    /// highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        self.conflict_stamp += 1;
        let current = self.decision_level();
        let mut learnt: Vec<Lit> = vec![Lit(0)];
        let mut bumped: Vec<u32> = Vec::new();
        let mut pending = 0usize;
        let mut pivot: Option<Lit> = None;
        let mut index = self.trail.len();

        loop {
            let skip = usize::from(pivot.is_some());
            let len = self.clauses[confl as usize].lits.len();
            for k in 0..len {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var();
                self.touch(v);
                if k < skip {
                    continue;
                }
                let vi = v as usize;
                if !self.seen[vi] && self.level[vi] > 0 {
                    self.seen[vi] = true;
                    bumped.push(v);
                    if self.level[vi] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var() as usize] {
                    break;
                }
            }
            let p = self.trail[index];
            self.seen[p.var() as usize] = false;
            pending -= 1;
            pivot = Some(p);
            if pending == 0 {
                break;
            }
            confl = self.reason[p.var() as usize].expect("implied literal has a reason");
        }
        learnt[0] = pivot.expect("analysis visits the conflict level").not();

        for l in &learnt[1..] {
            self.seen[l.var() as usize] = false;
        }

        let bt_level = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var() as usize] > self.level[learnt[max_i].var() as usize]
                {
                    max_i = k;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var() as usize]
        };

        match self.config.heuristic {
            Heuristic::Vsids => {
                for &v in &bumped {
                    self.bump_activity(v);
                }
            }
            Heuristic::Vmtf => {
                bumped.sort_by_key(|&v| self.vmtf.stamp(v));
                let assigns = &self.assigns;
                self.vmtf.bump(&bumped, |v| assigns[v as usize].is_some());
            }
        }
        (learnt, bt_level)
    }

    fn backtrack(&mut self, target: u32) {
        if self.decision_level() <= target {
            return;
        }
        let start = self.trail_lim[target as usize];
        for i in (start..self.trail.len()).rev() {
            let lit = self.trail[i];
            let v = lit.var();
            self.assigns[v as usize] = None;
            self.reason[v as usize] = None;
            self.saved_phase[v as usize] = !lit.negated();
            match self.config.heuristic {
                Heuristic::Vsids => self.heap.insert(v, &self.activity),
                Heuristic::Vmtf => self.vmtf.on_unassign(v),
            }
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(target as usize);
        self.qhead = self.trail.len();
    }

    fn pick_branch_var(&mut self) -> Option<u32> {
        if self.config.random_decision_freq > 0.0
            && self.num_vars > 0
            && self.rng.gen_bool(self.config.random_decision_freq)
        {
            let v = self.rng.gen_range(0..self.num_vars as u32);
            if self.assigns[v as usize].is_none() {
                return Some(v);
            }
        }
        match self.config.heuristic {
            Heuristic::Vsids => loop {
                let v = self.heap.pop(&self.activity)?;
                if self.assigns[v as usize].is_none() {
                    return Some(v);
                }
            },
            Heuristic::Vmtf => {
                let assigns = &self.assigns;
                self.vmtf.next_decision(|v| assigns[v as usize].is_some())
            }
        }
    }

    fn budget_exceeded(&self) -> bool {
        self.config
            .propagation_limit
            .is_some_and(|l| self.propagations > l)
            || self.config.conflict_limit.is_some_and(|l| self.conflicts > l)
    }

    /// Halves the learned clause database, longest clauses first. Only called
    /// at decision level 0, where no reason clause is needed for analysis.
    fn reduce_learnts(&mut self) {
        let Some(max) = self.config.max_learnts else {
            return;
        };
        if self.num_learnts <= max {
            return;
        }
        let mut learnts: Vec<u32> = (0..self.clauses.len() as u32)
            .filter(|&c| {
                let c = &self.clauses[c as usize];
                c.learnt && !c.deleted
            })
            .collect();
        learnts.sort_by_key(|&c| (std::cmp::Reverse(self.clauses[c as usize].lits.len()), c));
        let remove = learnts.len() - max / 2;
        for &c in &learnts[..remove] {
            let clause = &mut self.clauses[c as usize];
            clause.deleted = true;
            clause.lits = Vec::new();
        }
        self.num_learnts -= remove;
        for v in 0..self.num_vars {
            if self.reason[v].is_some_and(|c| self.clauses[c as usize].deleted) {
                self.reason[v] = None;
            }
        }
        for ws in &mut self.watches {
            ws.clear();
        }
        for (cref, clause) in self.clauses.iter().enumerate() {
            if clause.deleted {
                continue;
            }
            let (a, b) = (clause.lits[0], clause.lits[1]);
            self.watches[a.idx()].push(Watcher {
                cref: cref as u32,
                blocker: b,
            });
            self.watches[b.idx()].push(Watcher {
                cref: cref as u32,
                blocker: a,
            });
        }
    }

    fn on_restart(&mut self) {
        let spent = self.restarts.restart();
        self.conflicts_per_restart.push(spent);
        self.restart_count += 1;
        self.backtrack(0);
        self.reduce_learnts();
        if self.config.remind_factor > 0.0 {
            if let Some(order) = self.remind_order.clone() {
                self.remind(
                    &order,
                    self.config.remind_factor,
                    self.config.remind_decay,
                    self.config.remind_mode,
                )
                .expect("validated remind parameters");
            }
        }
    }

    fn phase_for(&self, var: u32) -> bool {
        match self.config.phase_default {
            PhaseDefault::False => false,
            PhaseDefault::True => true,
            PhaseDefault::Saved => self.saved_phase[var as usize],
        }
    }

    fn finish(&self, result: SolveResult, start: Instant) -> SolveStats {
        let model = (result == SolveResult::Sat).then(|| {
            self.assigns
                .iter()
                .map(|a| a.expect("complete assignment"))
                .collect()
        });
        let per_var_conflicts: BTreeMap<u32, u64> = self
            .conflict_count
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v as u32 + 1, c))
            .collect();
        SolveStats {
            result,
            model,
            propagations: self.propagations,
            conflicts: self.conflicts,
            decisions: self.decisions,
            restarts: self.restart_count,
            per_var_conflicts,
            conflicts_per_restart: self.conflicts_per_restart.clone(),
            first_decision: self.first_decision,
            wall_time: start.elapsed(),
        }
    }

    pub fn solve(mut self) -> SolveStats {
        let start = Instant::now();
        self.started = true;
        if self.trivially_unsat {
            return self.finish(SolveResult::Unsat, start);
        }

        let units = std::mem::take(&mut self.units);
        for lit in units {
            match lit_value(&self.assigns, lit) {
                None => self.enqueue(lit, None, true),
                Some(true) => {}
                Some(false) => {
                    self.conflicts += 1;
                    self.record_root_conflict(&[lit.var()]);
                    return self.finish(SolveResult::Unsat, start);
                }
            }
        }

        loop {
            let conflict = self.propagate();
            if self.budget_exceeded() {
                return self.finish(SolveResult::BudgetExceeded, start);
            }
            if let Some(confl) = conflict {
                self.conflicts += 1;
                if self.decision_level() == 0 {
                    let vars: Vec<u32> = self.clauses[confl as usize]
                        .lits
                        .iter()
                        .map(|l| l.var())
                        .collect();
                    self.record_root_conflict(&vars);
                    return self.finish(SolveResult::Unsat, start);
                }
                let (learnt, bt_level) = self.analyze(confl);
                self.backtrack(bt_level);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None, true);
                } else {
                    let asserting = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.enqueue(asserting, Some(cref), true);
                }
                if self.config.heuristic == Heuristic::Vsids {
                    self.var_inc *= 1.0 / self.config.var_decay;
                }
                self.restarts.on_conflict();
                if self.budget_exceeded() {
                    return self.finish(SolveResult::BudgetExceeded, start);
                }
                continue;
            }

            if self.restarts.should_restart() {
                self.on_restart();
                continue;
            }

            let Some(var) = self.pick_branch_var() else {
                return self.finish(SolveResult::Sat, start);
            };
            self.decisions += 1;
            self.first_decision.get_or_insert(var + 1);
            self.trail_lim.push(self.trail.len());
            let negated = !self.phase_for(var);
            self.enqueue(Lit::new(var, negated), None, false);
        }
    }
}
