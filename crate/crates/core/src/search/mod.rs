//! Optimal forward search over grounded tasks.
//!
//! A* with an admissible heuristic. Equal-f nodes are ordered by lower h,
//! then by insertion order; successors are generated in the grounder's
//! action order, so expansion counts are reproducible bit for bit.

mod heuristic;
mod state;
mod symmetry;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use indexmap::IndexSet;
use rustc_hash::FxBuildHasher;
use serde::{Deserialize, Serialize};

pub use heuristic::{hmax, lmcut, Blind, Heuristic, HeuristicKind, Hmax, LmCut, INF};
pub use state::BitState;
pub use symmetry::ObjectSymmetry;

use crate::exec::{Plan, PlanStep};
use crate::ground::GroundTask;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Lower h first, then oldest node.
    #[default]
    LowHFifo,
    /// Lower h first, then newest node.
    LowHLifo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    pub heuristic: HeuristicKind,
    pub timeout: Duration,
    pub tie_break: TieBreak,
    /// Keep one state per orbit of interchangeable objects.
    pub symmetry: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            heuristic: HeuristicKind::Lmcut,
            timeout: DEFAULT_TIMEOUT,
            tie_break: TieBreak::LowHFifo,
            symmetry: false,
        }
    }
}

impl SearchConfig {
    pub fn with_heuristic(heuristic: HeuristicKind) -> Self {
        SearchConfig {
            heuristic,
            ..Default::default()
        }
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        assert!(!timeout.is_zero(), "timeout must be positive");
        self.timeout = timeout;
        self
    }

    pub fn symmetry(mut self, on: bool) -> Self {
        self.symmetry = on;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SearchStatus {
    Solved,
    Unsolvable,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub status: SearchStatus,
    pub plan: Option<Plan>,
    /// Indices into the task's action list, parallel to `plan`.
    pub actions: Vec<usize>,
    pub expanded: u64,
    pub generated: u64,
    pub evaluated: u64,
    /// Wall-clock seconds.
    pub time: f64,
}

impl SearchResult {
    pub fn is_solved(&self) -> bool {
        self.status == SearchStatus::Solved
    }

    pub fn plan_len(&self) -> Option<usize> {
        self.plan.as_ref().map(Plan::len)
    }
}

struct Node {
    g: u32,
    h: u32,
    parent: u32,
    action: u32,
    closed: bool,
}

const NO_PARENT: u32 = u32::MAX;

/// `(f, h, insertion order, g, state id)`, popped smallest first.
type OpenEntry = Reverse<(u32, u32, u64, u32, u32)>;

/// For every fact, the actions whose most selective precondition it is.
/// Actions without preconditions are kept separately.
struct SuccessorGenerator {
    keyed: Vec<Vec<u32>>,
    unconditional: Vec<u32>,
}

impl SuccessorGenerator {
    fn new(task: &GroundTask) -> Self {
        let mut uses = vec![0u32; task.num_facts()];
        for a in &task.actions {
            for &f in &a.pre {
                uses[f as usize] += 1;
            }
        }
        let mut keyed = vec![Vec::new(); task.num_facts()];
        let mut unconditional = Vec::new();
        for (i, a) in task.actions.iter().enumerate() {
            match a.pre.iter().min_by_key(|&&f| (uses[f as usize], f)) {
                Some(&f) => keyed[f as usize].push(i as u32),
                None => unconditional.push(i as u32),
            }
        }
        SuccessorGenerator { keyed, unconditional }
    }

    fn applicable(&self, task: &GroundTask, state: &BitState, out: &mut Vec<u32>) {
        out.clear();
        out.extend(self.unconditional.iter().copied());
        for f in state.facts() {
            out.extend(self.keyed[f as usize].iter().copied());
        }
        out.retain(|&a| state.applicable(&task.actions[a as usize]));
        out.sort_unstable();
    }
}

/// Steps of `actions` in the plan text vocabulary.
pub fn to_plan(task: &GroundTask, actions: &[usize]) -> Plan {
    Plan::new(
        actions
            .iter()
            .map(|&i| {
                let a = &task.actions[i];
                PlanStep::new(a.name.clone(), a.args.iter().cloned())
            })
            .collect(),
    )
}

pub fn solve(task: &GroundTask, cfg: &SearchConfig) -> SearchResult {
    let mut h = heuristic::make(cfg.heuristic, task);
    solve_with(task, cfg, h.as_mut())
}

/// A* with a caller-supplied heuristic; `cfg.heuristic` is ignored.
pub fn solve_with(task: &GroundTask, cfg: &SearchConfig, h: &mut dyn Heuristic) -> SearchResult {
    let start = Instant::now();
    let n = task.num_facts();
    let succ_gen = SuccessorGenerator::new(task);
    let sym = if cfg.symmetry {
        ObjectSymmetry::detect(task)
    } else {
        ObjectSymmetry::default()
    };
    let mut states: IndexSet<BitState, FxBuildHasher> = IndexSet::default();
    let mut nodes: Vec<Node> = Vec::new();
    let mut open: BinaryHeap<OpenEntry> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |open: &mut BinaryHeap<_>, g: u32, hv: u32, id: u32| {
        let order = match cfg.tie_break {
            TieBreak::LowHFifo => seq,
            TieBreak::LowHLifo => u64::MAX - seq,
        };
        seq += 1;
        open.push(Reverse((g.saturating_add(hv), hv, order, g, id)));
    };

    let mut result = SearchResult {
        status: SearchStatus::Unsolvable,
        plan: None,
        actions: Vec::new(),
        expanded: 0,
        generated: 1,
        evaluated: 1,
        time: 0.0,
    };
    let finish = |mut r: SearchResult| {
        r.time = start.elapsed().as_secs_f64();
        r
    };

    let init = sym.canonical(&BitState::from_facts(n, task.init.iter().copied()));
    let h0 = h.eval(&init);
    states.insert(init);
    nodes.push(Node {
        g: 0,
        h: h0,
        parent: NO_PARENT,
        action: 0,
        closed: false,
    });
    if h0 == INF {
        return finish(result);
    }
    push(&mut open, 0, h0, 0);

    let mut applicable = Vec::new();
    while let Some(Reverse((_, _, _, g, id))) = open.pop() {
        if start.elapsed() >= cfg.timeout {
            result.status = SearchStatus::Timeout;
            return finish(result);
        }
        let node = &nodes[id as usize];
        if node.closed || g > node.g {
            continue;
        }
        result.expanded += 1;
        let state = states.get_index(id as usize).expect("known state").clone();
        if state.is_goal(task) {
            let mut path = Vec::new();
            let mut trace = vec![id];
            let mut cur = id;
            while nodes[cur as usize].parent != NO_PARENT {
                path.push(nodes[cur as usize].action as usize);
                cur = nodes[cur as usize].parent;
                trace.push(cur);
            }
            path.reverse();
            trace.reverse();
            if !sym.is_trivial() {
                let canon: Vec<&BitState> = trace
                    .iter()
                    .map(|&i| states.get_index(i as usize).expect("known state"))
                    .collect();
                path = unfold(task, &succ_gen, &sym, &canon, &path);
            }
            result.status = SearchStatus::Solved;
            result.plan = Some(to_plan(task, &path));
            result.actions = path;
            return finish(result);
        }
        nodes[id as usize].closed = true;

        succ_gen.applicable(task, &state, &mut applicable);
        for &ai in &applicable {
            let action = &task.actions[ai as usize];
            let next = sym.canonical(&state.successor(action));
            result.generated += 1;
            let ng = g + action.cost;
            match states.get_index_of(&next) {
                Some(sid) => {
                    let node = &mut nodes[sid];
                    if ng < node.g && node.h != INF {
                        node.g = ng;
                        node.parent = id;
                        node.action = ai;
                        node.closed = false;
                        let hv = node.h;
                        push(&mut open, ng, hv, sid as u32);
                    }
                }
                None => {
                    if start.elapsed() >= cfg.timeout {
                        result.status = SearchStatus::Timeout;
                        return finish(result);
                    }
                    let hv = h.eval(&next);
                    result.evaluated += 1;
                    let (sid, _) = states.insert_full(next);
                    nodes.push(Node {
                        g: ng,
                        h: hv,
                        parent: id,
                        action: ai,
                        closed: false,
                    });
                    if hv != INF {
                        push(&mut open, ng, hv, sid as u32);
                    }
                }
            }
        }
    }
    finish(result)
}

/// Turns a path of orbit representatives into actions applicable from the
/// real initial state: each step takes the first action whose successor
/// has the next representative.
fn unfold(
    task: &GroundTask,
    succ_gen: &SuccessorGenerator,
    sym: &ObjectSymmetry,
    canon: &[&BitState],
    steps: &[usize],
) -> Vec<usize> {
    let mut state = BitState::from_facts(task.num_facts(), task.init.iter().copied());
    let mut applicable = Vec::new();
    let mut path = Vec::with_capacity(canon.len().saturating_sub(1));
    for (pair, &step) in canon.windows(2).zip(steps) {
        let cost = task.actions[step].cost;
        succ_gen.applicable(task, &state, &mut applicable);
        let (ai, next) = applicable
            .iter()
            .filter(|&&ai| task.actions[ai as usize].cost == cost)
            .find_map(|&ai| {
                let next = state.successor(&task.actions[ai as usize]);
                (sym.canonical(&next) == *pair[1]).then_some((ai as usize, next))
            })
            .expect("every orbit step has a concrete counterpart");
        path.push(ai);
        state = next;
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::ground;
    use crate::pddl::{parse_domain, parse_problem};

    const DOMAIN: &str = "
    (define (domain fetch)
        (:requirements :strips :typing)
        (:types agent room item)
        (:predicates
            (agent_at ?a - agent ?r - room)
            (neighbor ?r1 - room ?r2 - room)
            (item_at ?i - item ?r - room)
            (agent_has_item ?a - agent ?i - item)
            (agent_hand_free ?a - agent))
        (:action go_to_room
            :parameters (?a - agent ?r1 - room ?r2 - room)
            :precondition (and (agent_at ?a ?r1) (neighbor ?r1 ?r2))
            :effect (and (agent_at ?a ?r2) (not (agent_at ?a ?r1))))
        (:action pick_item
            :parameters (?a - agent ?i - item ?r - room)
            :precondition (and (agent_at ?a ?r) (item_at ?i ?r) (agent_hand_free ?a))
            :effect (and (agent_has_item ?a ?i) (not (item_at ?i ?r)) (not (agent_hand_free ?a))))
        (:action place_item
            :parameters (?a - agent ?i - item ?r - room)
            :precondition (and (agent_at ?a ?r) (agent_has_item ?a ?i))
            :effect (and (item_at ?i ?r) (agent_hand_free ?a) (not (agent_has_item ?a ?i)))))";

    fn problem(goal: &str) -> String {
        format!(
            "(define (problem corridor) (:domain fetch)
                (:objects robot - agent box - item r1 r2 r3 - room)
                (:init (agent_at robot r2) (item_at box r1) (agent_hand_free robot)
                       (neighbor r1 r2) (neighbor r2 r1) (neighbor r2 r3) (neighbor r3 r2))
                (:goal {goal}))"
        )
    }

    fn run(goal: &str, kind: HeuristicKind) -> SearchResult {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(&problem(goal), &d).unwrap();
        let t = ground(&d, &p).unwrap();
        solve(&t, &SearchConfig::with_heuristic(kind))
    }

    #[test]
    fn goal_at_init_expands_only_init() {
        for k in [HeuristicKind::Blind, HeuristicKind::Hmax, HeuristicKind::Lmcut] {
            let r = run("(and (item_at box r1))", k);
            assert_eq!(r.status, SearchStatus::Solved);
            assert_eq!(r.plan_len(), Some(0));
            assert_eq!(r.expanded, 1);
        }
    }

    #[test]
    fn corridor_fetch_and_carry() {
        for k in [HeuristicKind::Blind, HeuristicKind::Hmax, HeuristicKind::Lmcut] {
            let r = run("(and (item_at box r2))", k);
            assert_eq!(r.plan_len(), Some(4), "{k:?}");
            let r = run("(and (item_at box r3))", k);
            assert_eq!(r.plan_len(), Some(5), "{k:?}");
            let text = r.plan.unwrap().to_text();
            assert!(text.starts_with("(go_to_room robot r2 r1)\n(pick_item robot box r1)\n"));
        }
    }

    #[test]
    fn unreachable_goal_is_unsolvable() {
        for k in [HeuristicKind::Blind, HeuristicKind::Hmax, HeuristicKind::Lmcut] {
            let r = run(
                "(and (agent_at robot r1) (item_at box r2) (agent_has_item robot box))",
                k,
            );
            assert_eq!(r.status, SearchStatus::Unsolvable, "{k:?}");
            assert!(r.plan.is_none());
        }
    }

    #[test]
    fn search_is_deterministic() {
        let a = run("(and (item_at box r3))", HeuristicKind::Lmcut);
        let b = run("(and (item_at box r3))", HeuristicKind::Lmcut);
        assert_eq!((a.plan, a.expanded, a.generated), (b.plan, b.expanded, b.generated));
    }
}
