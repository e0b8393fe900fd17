//! Exhaustive breadth-first search used as a test oracle.
//!
//! Written against the parsed problem only: every type-consistent binding
//! of every schema is instantiated, with no reachability analysis, so it
//! shares no logic with the grounder or the heuristic search.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rustc_hash::{FxHashMap, FxHashSet};
use sgtp_core::pddl::{Atom, DomainAst, ProblemAst};
use sgtp_core::PlanStep;

/// Fully instantiated action over interned fluent atoms.
#[derive(Clone, Debug)]
pub struct NaiveAction {
    pub label: String,
    pre: Vec<u32>,
    pre_neg: Vec<u32>,
    add: Vec<u32>,
    del: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Optimal plan length and one optimal plan.
    Optimal {
        length: usize,
        plan: Vec<String>,
    },
    Unsolvable,
    /// The state space exceeded the limit.
    TooLarge,
}

impl Outcome {
    pub fn length(&self) -> Option<usize> {
        match self {
            Outcome::Optimal { length, .. } => Some(*length),
            _ => None,
        }
    }
}

/// Interned problem: static atoms are resolved at instantiation time and
/// states hold only fluent atoms, as sorted id vectors.
pub struct Oracle {
    atoms: Vec<Atom>,
    ids: FxHashMap<Atom, u32>,
    pub actions: Vec<NaiveAction>,
    init: Vec<u32>,
    goal_pos: Vec<u32>,
    goal_neg: Vec<u32>,
    /// A goal literal over a static predicate that is false.
    goal_impossible: bool,
}

pub type NaiveState = Vec<u32>;

fn bindings(domain: &DomainAst, problem: &ProblemAst, params: &[(String, String)]) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for (_, ty) in params {
        let objs: Vec<&str> = problem
            .objects
            .iter()
            .filter(|o| domain.is_subtype(&o.ty, ty))
            .map(|o| o.name.as_str())
            .collect();
        let mut next = Vec::with_capacity(out.len() * objs.len());
        for prefix in &out {
            for o in &objs {
                let mut b = prefix.clone();
                b.push(o.to_string());
                next.push(b);
            }
        }
        out = next;
    }
    out
}

impl Oracle {
    pub fn new(domain: &DomainAst, problem: &ProblemAst) -> Self {
        // A predicate is fluent if some schema mentions it in an effect.
        let fluent: BTreeSet<&str> = domain
            .actions
            .iter()
            .flat_map(|a| a.add_effects.iter().chain(&a.del_effects))
            .map(|a| a.predicate.as_str())
            .collect();
        let init_set: BTreeSet<&Atom> = problem.init.iter().collect();
        let mut o = Oracle {
            atoms: Vec::new(),
            ids: FxHashMap::default(),
            actions: Vec::new(),
            init: Vec::new(),
            goal_pos: Vec::new(),
            goal_neg: Vec::new(),
            goal_impossible: false,
        };
        for schema in &domain.actions {
            let params: Vec<(String, String)> = schema.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
            'binding: for args in bindings(domain, problem, &params) {
                let map: BTreeMap<&str, &str> = params
                    .iter()
                    .zip(&args)
                    .map(|((v, _), a)| (v.as_str(), a.as_str()))
                    .collect();
                let mut act = NaiveAction {
                    label: PlanStep::new(schema.name.clone(), args.iter().cloned()).to_string(),
                    pre: vec![],
                    pre_neg: vec![],
                    add: vec![],
                    del: vec![],
                };
                for lit in &schema.precondition {
                    let atom = lit.atom.substitute(&map);
                    if fluent.contains(atom.predicate.as_str()) {
                        let id = o.intern(atom);
                        if lit.positive {
                            act.pre.push(id)
                        } else {
                            act.pre_neg.push(id)
                        }
                    } else if init_set.contains(&atom) != lit.positive {
                        continue 'binding;
                    }
                }
                for e in &schema.add_effects {
                    let id = o.intern(e.substitute(&map));
                    act.add.push(id);
                }
                for e in &schema.del_effects {
                    let id = o.intern(e.substitute(&map));
                    act.del.push(id);
                }
                o.actions.push(act);
            }
        }
        let mut init: Vec<u32> = problem
            .init
            .iter()
            .filter(|a| fluent.contains(a.predicate.as_str()))
            .map(|a| o.intern(a.clone()))
            .collect();
        init.sort_unstable();
        init.dedup();
        o.init = init;
        for lit in &problem.goal.literals {
            if fluent.contains(lit.atom.predicate.as_str()) {
                let id = o.intern(lit.atom.clone());
                if lit.positive {
                    o.goal_pos.push(id)
                } else {
                    o.goal_neg.push(id)
                }
            } else if init_set.contains(&lit.atom) != lit.positive {
                o.goal_impossible = true;
            }
        }
        o
    }

    fn intern(&mut self, atom: Atom) -> u32 {
        if let Some(&id) = self.ids.get(&atom) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.ids.insert(atom.clone(), id);
        self.atoms.push(atom);
        id
    }

    pub fn initial_state(&self) -> NaiveState {
        self.init.clone()
    }

    /// Converts a set of atoms to a naive state. Static atoms, and fluent
    /// atoms that no action or goal mentions, are dropped.
    pub fn state_from_atoms<'a>(&self, atoms: impl IntoIterator<Item = &'a Atom>) -> NaiveState {
        let mut s: Vec<u32> = atoms.into_iter().filter_map(|a| self.ids.get(a).copied()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn atoms_of(&self, s: &NaiveState) -> Vec<Atom> {
        s.iter().map(|&i| self.atoms[i as usize].clone()).collect()
    }

    fn holds(s: &NaiveState, f: u32) -> bool {
        s.binary_search(&f).is_ok()
    }

    pub fn is_goal(&self, s: &NaiveState) -> bool {
        !self.goal_impossible
            && self.goal_pos.iter().all(|&f| Self::holds(s, f))
            && !self.goal_neg.iter().any(|&f| Self::holds(s, f))
    }

    pub fn successors<'a>(&'a self, s: &'a NaiveState) -> impl Iterator<Item = (usize, NaiveState)> + 'a {
        self.actions.iter().enumerate().filter_map(move |(i, a)| {
            if !a.pre.iter().all(|&f| Self::holds(s, f)) || a.pre_neg.iter().any(|&f| Self::holds(s, f)) {
                return None;
            }
            let mut next: Vec<u32> = s.iter().copied().filter(|f| !a.del.contains(f)).collect();
            next.extend(a.add.iter().copied());
            next.sort_unstable();
            next.dedup();
            Some((i, next))
        })
    }

    /// Breadth-first search from `start`, visiting at most `limit` states.
    pub fn bfs_from(&self, start: NaiveState, limit: usize) -> Outcome {
        let mut index: FxHashMap<NaiveState, usize> = FxHashMap::default();
        let mut parent: Vec<(usize, usize)> = Vec::new();
        let mut states: Vec<NaiveState> = Vec::new();
        let mut queue = VecDeque::new();
        index.insert(start.clone(), 0);
        states.push(start);
        parent.push((usize::MAX, usize::MAX));
        queue.push_back(0usize);
        while let Some(id) = queue.pop_front() {
            if self.is_goal(&states[id]) {
                let mut plan = Vec::new();
                let mut cur = id;
                while parent[cur].0 != usize::MAX {
                    plan.push(self.actions[parent[cur].1].label.clone());
                    cur = parent[cur].0;
                }
                plan.reverse();
                return Outcome::Optimal {
                    length: plan.len(),
                    plan,
                };
            }
            let succ: Vec<(usize, NaiveState)> = self.successors(&states[id]).collect();
            for (a, next) in succ {
                if index.contains_key(&next) {
                    continue;
                }
                if states.len() >= limit {
                    return Outcome::TooLarge;
                }
                index.insert(next.clone(), states.len());
                states.push(next);
                parent.push((id, a));
                queue.push_back(states.len() - 1);
            }
        }
        Outcome::Unsolvable
    }

    pub fn bfs(&self, limit: usize) -> Outcome {
        self.bfs_from(self.initial_state(), limit)
    }

    /// Replays steps given as `(name arg ...)` labels from the initial
    /// state. `None` when a step is unknown or not applicable.
    pub fn simulate<'a>(&self, steps: impl IntoIterator<Item = &'a str>) -> Option<NaiveState> {
        let by_label: FxHashMap<&str, &NaiveAction> = self.actions.iter().map(|a| (a.label.as_str(), a)).collect();
        let mut s = self.initial_state();
        for label in steps {
            let a = by_label.get(label)?;
            if !a.pre.iter().all(|&f| Self::holds(&s, f)) || a.pre_neg.iter().any(|&f| Self::holds(&s, f)) {
                return None;
            }
            s.retain(|f| !a.del.contains(f));
            s.extend(a.add.iter().copied());
            s.sort_unstable();
            s.dedup();
        }
        Some(s)
    }

    /// All states reachable from init, or `None` beyond `limit`.
    pub fn reachable_states(&self, limit: usize) -> Option<Vec<NaiveState>> {
        let mut seen: FxHashSet<NaiveState> = FxHashSet::default();
        let mut order = vec![self.initial_state()];
        seen.insert(self.initial_state());
        let mut i = 0;
        while i < order.len() {
            let succ: Vec<NaiveState> = self.successors(&order[i]).map(|(_, s)| s).collect();
            for s in succ {
                if seen.insert(s.clone()) {
                    if order.len() >= limit {
                        return None;
                    }
                    order.push(s);
                }
            }
            i += 1;
        }
        Some(order)
    }
}

/// Optimal plan length from the problem's initial state.
pub fn optimal_length(domain: &DomainAst, problem: &ProblemAst, limit: usize) -> Outcome {
    Oracle::new(domain, problem).bfs(limit)
}
