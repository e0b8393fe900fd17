//! Admissible heuristics over the delete relaxation.
//!
//! Negative preconditions and negative goal literals are ignored by the
//! relaxation, which only makes the estimates smaller and keeps them
//! admissible.

use serde::{Deserialize, Serialize};

use super::state::BitState;
use crate::ground::GroundTask;

pub const INF: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Blind,
    Hmax,
    #[default]
    Lmcut,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Blind => "blind",
            HeuristicKind::Hmax => "hmax",
            HeuristicKind::Lmcut => "lmcut",
        }
    }
}

impl std::str::FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "blind" => Ok(HeuristicKind::Blind),
            "hmax" => Ok(HeuristicKind::Hmax),
            "lmcut" => Ok(HeuristicKind::Lmcut),
            other => Err(format!("unknown heuristic `{other}` (expected blind, hmax or lmcut)")),
        }
    }
}

/// A state evaluator. `INF` marks relaxed dead ends.
pub trait Heuristic {
    fn eval(&mut self, state: &BitState) -> u32;
}

pub fn make(kind: HeuristicKind, task: &GroundTask) -> Box<dyn Heuristic + '_> {
    match kind {
        HeuristicKind::Blind => Box::new(Blind::new(task)),
        HeuristicKind::Hmax => Box::new(Hmax::new(task)),
        HeuristicKind::Lmcut => Box::new(LmCut::new(task)),
    }
}

/// Zero at goal states, the cheapest action cost elsewhere.
pub struct Blind<'t> {
    task: &'t GroundTask,
    min_cost: u32,
}

impl<'t> Blind<'t> {
    pub fn new(task: &'t GroundTask) -> Self {
        let min_cost = task.actions.iter().map(|a| a.cost).min().unwrap_or(0);
        Blind { task, min_cost }
    }
}

impl Heuristic for Blind<'_> {
    fn eval(&mut self, state: &BitState) -> u32 {
        if state.is_goal(self.task) {
            0
        } else {
            self.min_cost
        }
    }
}

/// Compressed adjacency lists.
struct Csr {
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl Csr {
    fn from_lists(lists: &[Vec<u32>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for l in lists {
            items.extend_from_slice(l);
            offsets.push(items.len() as u32);
        }
        Csr { offsets, items }
    }

    #[inline]
    fn get(&self, i: usize) -> &[u32] {
        &self.items[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// Delete-relaxed task with an artificial start fact (precondition of
/// actions without preconditions) and an artificial goal fact reached by a
/// zero-cost goal action.
struct Relaxed {
    num_facts: usize,
    start_fact: u32,
    goal_fact: u32,
    pre: Csr,
    eff: Csr,
    cost: Vec<u32>,
    pre_of: Csr,
    achievers: Csr,
}

impl Relaxed {
    fn new(task: &GroundTask) -> Self {
        let n = task.num_facts();
        let start_fact = n as u32;
        let goal_fact = n as u32 + 1;
        let num_facts = n + 2;
        let non_empty = |v: &[u32]| if v.is_empty() { vec![start_fact] } else { v.to_vec() };
        let mut pre: Vec<Vec<u32>> = task.actions.iter().map(|a| non_empty(&a.pre)).collect();
        let mut eff: Vec<Vec<u32>> = task.actions.iter().map(|a| a.add.clone()).collect();
        let mut cost: Vec<u32> = task.actions.iter().map(|a| a.cost).collect();
        pre.push(non_empty(&task.goal_pos));
        eff.push(vec![goal_fact]);
        cost.push(0);
        let mut pre_of = vec![Vec::new(); num_facts];
        let mut achievers = vec![Vec::new(); num_facts];
        for (a, (p, e)) in pre.iter().zip(&eff).enumerate() {
            for &f in p {
                pre_of[f as usize].push(a as u32);
            }
            for &f in e {
                achievers[f as usize].push(a as u32);
            }
        }
        Relaxed {
            num_facts,
            start_fact,
            goal_fact,
            pre: Csr::from_lists(&pre),
            eff: Csr::from_lists(&eff),
            cost,
            pre_of: Csr::from_lists(&pre_of),
            achievers: Csr::from_lists(&achievers),
        }
    }

    fn num_actions(&self) -> usize {
        self.cost.len()
    }
}

/// Monotone priority queue over small integer keys. Memory grows with the
/// largest key pushed, which is bounded by the largest finite h-max value.
#[derive(Default)]
struct Buckets {
    buckets: Vec<Vec<u32>>,
    cur: usize,
    len: usize,
}

impl Buckets {
    fn clear(&mut self) {
        for b in &mut self.buckets {
            b.clear();
        }
        self.cur = 0;
        self.len = 0;
    }

    #[inline]
    fn push(&mut self, key: u32, item: u32) {
        let k = key as usize;
        if k >= self.buckets.len() {
            self.buckets.resize_with(k + 1, Vec::new);
        }
        if k < self.cur {
            self.cur = k;
        }
        self.buckets[k].push(item);
        self.len += 1;
    }

    #[inline]
    fn pop(&mut self) -> Option<(u32, u32)> {
        if self.len == 0 {
            return None;
        }
        loop {
            if let Some(item) = self.buckets[self.cur].pop() {
                self.len -= 1;
                return Some((self.cur as u32, item));
            }
            self.cur += 1;
        }
    }
}

/// Scratch space for repeated h-max passes.
struct HmaxPass {
    fact_cost: Vec<u32>,
    unsat: Vec<u32>,
    /// A precondition of maximal cost, NONE while unreachable.
    supporter: Vec<u32>,
    queue: Buckets,
}

impl HmaxPass {
    fn new(r: &Relaxed) -> Self {
        HmaxPass {
            fact_cost: vec![INF; r.num_facts],
            unsat: vec![0; r.num_actions()],
            supporter: vec![NONE; r.num_actions()],
            queue: Buckets::default(),
        }
    }

    #[inline]
    fn relax_effects(&mut self, r: &Relaxed, a: usize, target: u32) {
        for &e in r.eff.get(a) {
            if target < self.fact_cost[e as usize] {
                self.fact_cost[e as usize] = target;
                self.queue.push(target, e);
            }
        }
    }

    /// Generalized Dijkstra. With `stop_at_goal` unset every reachable
    /// fact gets its final cost, which [`Self::update`] relies on.
    fn run(&mut self, r: &Relaxed, state: &BitState, cost: &[u32], stop_at_goal: bool) -> u32 {
        self.fact_cost.fill(INF);
        self.supporter.fill(NONE);
        for a in 0..r.num_actions() {
            self.unsat[a] = r.pre.get(a).len() as u32;
        }
        self.queue.clear();
        for f in state.facts().chain([r.start_fact]) {
            self.fact_cost[f as usize] = 0;
            self.queue.push(0, f);
        }
        while let Some((c, f)) = self.queue.pop() {
            let fi = f as usize;
            if c > self.fact_cost[fi] {
                continue;
            }
            if stop_at_goal && f == r.goal_fact {
                break;
            }
            for &a in r.pre_of.get(fi) {
                let ai = a as usize;
                self.unsat[ai] -= 1;
                if self.unsat[ai] == 0 {
                    self.supporter[ai] = f;
                    self.relax_effects(r, ai, c + cost[ai]);
                }
            }
        }
        self.fact_cost[r.goal_fact as usize]
    }

    /// Restores h-max values after the costs of `changed` actions dropped.
    /// Costs only decrease, so an action's value can only fall when its
    /// supporter's cost falls; its supporter is then re-chosen.
    fn update(&mut self, r: &Relaxed, cost: &[u32], changed: &[u32]) -> u32 {
        self.queue.clear();
        for &a in changed {
            let ai = a as usize;
            let sup = self.supporter[ai];
            self.relax_effects(r, ai, self.fact_cost[sup as usize] + cost[ai]);
        }
        while let Some((c, f)) = self.queue.pop() {
            let fi = f as usize;
            if c > self.fact_cost[fi] {
                continue;
            }
            for &a in r.pre_of.get(fi) {
                let ai = a as usize;
                if self.supporter[ai] != f {
                    continue;
                }
                let mut best = f;
                let mut best_cost = c;
                for &p in r.pre.get(ai) {
                    let pc = self.fact_cost[p as usize];
                    if pc > best_cost {
                        best = p;
                        best_cost = pc;
                    }
                }
                self.supporter[ai] = best;
                if best == f {
                    self.relax_effects(r, ai, c + cost[ai]);
                }
            }
        }
        self.fact_cost[r.goal_fact as usize]
    }
}

pub struct Hmax {
    relaxed: Relaxed,
    pass: HmaxPass,
}

impl Hmax {
    pub fn new(task: &GroundTask) -> Self {
        let relaxed = Relaxed::new(task);
        let pass = HmaxPass::new(&relaxed);
        Hmax { relaxed, pass }
    }
}

impl Heuristic for Hmax {
    fn eval(&mut self, state: &BitState) -> u32 {
        self.pass.run(&self.relaxed, state, &self.relaxed.cost, true)
    }
}

/// Landmark-cut heuristic.
pub struct LmCut {
    relaxed: Relaxed,
    pass: HmaxPass,
    cost: Vec<u32>,
    in_zone: Vec<bool>,
    reached: Vec<bool>,
    in_cut: Vec<bool>,
    stack: Vec<u32>,
    cut: Vec<u32>,
}

impl LmCut {
    pub fn new(task: &GroundTask) -> Self {
        let relaxed = Relaxed::new(task);
        let pass = HmaxPass::new(&relaxed);
        LmCut {
            cost: relaxed.cost.clone(),
            in_zone: vec![false; relaxed.num_facts],
            reached: vec![false; relaxed.num_facts],
            in_cut: vec![false; relaxed.num_actions()],
            stack: Vec::new(),
            cut: Vec::new(),
            relaxed,
            pass,
        }
    }
}

impl Heuristic for LmCut {
    fn eval(&mut self, state: &BitState) -> u32 {
        let r = &self.relaxed;
        self.cost.copy_from_slice(&r.cost);
        let mut h = 0u32;
        let mut goal_cost = self.pass.run(r, state, &self.cost, false);
        if goal_cost == INF {
            return INF;
        }
        while goal_cost != 0 {
            // Facts from which the goal is reachable through zero-cost
            // supporter edges.
            self.in_zone.fill(false);
            self.in_zone[r.goal_fact as usize] = true;
            self.stack.clear();
            self.stack.push(r.goal_fact);
            while let Some(f) = self.stack.pop() {
                for &a in r.achievers.get(f as usize) {
                    let ai = a as usize;
                    let sup = self.pass.supporter[ai];
                    if sup != NONE && self.cost[ai] == 0 && !self.in_zone[sup as usize] {
                        self.in_zone[sup as usize] = true;
                        self.stack.push(sup);
                    }
                }
            }

            // Forward from the state without entering the zone; actions
            // crossing into it form the cut.
            self.reached.fill(false);
            self.stack.clear();
            for f in state.facts().chain([r.start_fact]) {
                self.reached[f as usize] = true;
                self.stack.push(f);
            }
            self.cut.clear();
            while let Some(f) = self.stack.pop() {
                for &a in r.pre_of.get(f as usize) {
                    let ai = a as usize;
                    if self.pass.supporter[ai] != f {
                        continue;
                    }
                    for &e in r.eff.get(ai) {
                        let ei = e as usize;
                        if self.in_zone[ei] {
                            if !self.in_cut[ai] {
                                self.in_cut[ai] = true;
                                self.cut.push(a);
                            }
                        } else if !self.reached[ei] {
                            self.reached[ei] = true;
                            self.stack.push(e);
                        }
                    }
                }
            }

            let m = self
                .cut
                .iter()
                .map(|&a| self.cost[a as usize])
                .min()
                .expect("nonempty cut");
            debug_assert!(m > 0);
            h += m;
            for &a in &self.cut {
                self.cost[a as usize] -= m;
                self.in_cut[a as usize] = false;
            }
            goal_cost = self.pass.update(r, &self.cost, &self.cut);
        }
        h
    }
}

fn as_option(h: u32) -> Option<u32> {
    (h != INF).then_some(h)
}

/// h-max of `state`; `None` when the goal is relaxed-unreachable.
pub fn hmax(task: &GroundTask, state: &BitState) -> Option<u32> {
    as_option(Hmax::new(task).eval(state))
}

/// LM-cut of `state`; `None` when the goal is relaxed-unreachable.
pub fn lmcut(task: &GroundTask, state: &BitState) -> Option<u32> {
    as_option(LmCut::new(task).eval(state))
}
