//! Grounding of action schemas into a fact-indexed task.
//!
//! Instantiation is driven by delete-relaxed reachability: a binding is only
//! produced once all of its positive non-static preconditions are reachable
//! from the initial state, so unreachable facts and actions never appear.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::pddl::{Atom, DomainAst, ProblemAst};

pub const DEFAULT_INSTANTIATION_CAP: usize = 5_000_000;

pub type FactId = u32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("grounding aborted: more than {cap} instantiations")]
    TooManyInstantiations { cap: usize },
}

/// Bijection between atoms and dense ids, sorted by atom.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactIndex {
    atoms: Vec<Atom>,
    ids: FxHashMap<Atom, FactId>,
}

impl FactIndex {
    fn from_sorted(atoms: Vec<Atom>) -> Self {
        let ids = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i as FactId))
            .collect();
        FactIndex { atoms, ids }
    }

    /// Index over nullary atoms `(f0)`, `(f1)`, ...
    #[cfg(test)]
    pub(crate) fn synthetic(n: usize) -> Self {
        let atoms = (0..n)
            .map(|i| Atom::new(format!("f{i}"), Vec::<String>::new()))
            .collect();
        Self::from_sorted(atoms)
    }

    pub fn id(&self, atom: &Atom) -> Option<FactId> {
        self.ids.get(atom).copied()
    }

    pub fn atom(&self, id: FactId) -> &Atom {
        &self.atoms[id as usize]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre: Vec<FactId>,
    pub pre_neg: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
    pub cost: u32,
}

impl GroundAction {
    /// `(name arg1 arg2 ...)`
    pub fn label(&self) -> String {
        let mut s = format!("({}", self.name);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTask {
    pub facts: FactIndex,
    pub actions: Vec<GroundAction>,
    pub init: Vec<FactId>,
    pub goal_pos: Vec<FactId>,
    pub goal_neg: Vec<FactId>,
}

impl GroundTask {
    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    /// Finds the ground action with the given name and arguments.
    pub fn find_action(&self, name: &str, args: &[String]) -> Option<usize> {
        self.actions
            .binary_search_by(|a| (a.name.as_str(), a.args.as_slice()).cmp(&(name, args)))
            .ok()
    }

    /// One action per line, then init and goal.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "; {} facts, {} actions", self.facts.len(), self.actions.len());
        for a in &self.actions {
            let show = |ids: &[FactId]| {
                ids.iter()
                    .map(|&f| self.facts.atom(f).to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let _ = writeln!(
                out,
                "{} pre[{}] pre_neg[{}] add[{}] del[{}]",
                a.label(),
                show(&a.pre),
                show(&a.pre_neg),
                show(&a.add),
                show(&a.del)
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GroundConfig {
    pub max_instantiations: usize,
}

impl Default for GroundConfig {
    fn default() -> Self {
        GroundConfig {
            max_instantiations: DEFAULT_INSTANTIATION_CAP,
        }
    }
}

/// Number of type-consistent instantiations of each schema, before any
/// reachability filtering.
pub fn count_instantiations(domain: &DomainAst, problem: &ProblemAst) -> Vec<(String, u128)> {
    domain
        .actions
        .iter()
        .map(|a| {
            let n = a
                .params
                .iter()
                .map(|p| problem.objects_of_type(domain, &p.ty).count() as u128)
                .product();
            (a.name.clone(), n)
        })
        .collect()
}

pub fn ground(domain: &DomainAst, problem: &ProblemAst) -> Result<GroundTask, GroundError> {
    ground_with(domain, problem, GroundConfig::default())
}

struct Schema<'a> {
    params: Vec<&'a str>,
    candidates: Vec<Vec<&'a str>>,
    allowed: Vec<FxHashSet<&'a str>>,
    /// Positive preconditions as (predicate, parameter index per argument).
    pos: Vec<(&'a str, Vec<usize>)>,
    /// Negative preconditions over static predicates.
    neg_static: Vec<(&'a str, Vec<usize>)>,
    adds: Vec<(&'a str, Vec<usize>)>,
}

fn compile<'a>(domain: &'a DomainAst, problem: &'a ProblemAst, statics: &BTreeSet<&str>) -> Vec<Schema<'a>> {
    domain
        .actions
        .iter()
        .map(|a| {
            let params: Vec<&str> = a.params.iter().map(|p| p.name.as_str()).collect();
            let idx = |atom: &'a Atom| -> (&'a str, Vec<usize>) {
                let slots = atom
                    .args
                    .iter()
                    .map(|v| params.iter().position(|p| p == v).expect("checked by parser"))
                    .collect();
                (atom.predicate.as_str(), slots)
            };
            let candidates: Vec<Vec<&str>> = a
                .params
                .iter()
                .map(|p| problem.objects_of_type(domain, &p.ty).collect())
                .collect();
            let allowed = candidates.iter().map(|c| c.iter().copied().collect()).collect();
            Schema {
                pos: a
                    .precondition
                    .iter()
                    .filter(|l| l.positive)
                    .map(|l| idx(&l.atom))
                    .collect(),
                neg_static: a
                    .precondition
                    .iter()
                    .filter(|l| !l.positive && statics.contains(l.atom.predicate.as_str()))
                    .map(|l| idx(&l.atom))
                    .collect(),
                adds: a.add_effects.iter().map(idx).collect(),
                params,
                candidates,
                allowed,
            }
        })
        .collect()
}

struct Reach<'a> {
    facts: FxHashSet<Atom>,
    by_pred: FxHashMap<&'a str, Vec<Atom>>,
}

impl<'a> Reach<'a> {
    fn insert(&mut self, pred: &'a str, atom: Atom) -> bool {
        if self.facts.contains(&atom) {
            return false;
        }
        self.facts.insert(atom.clone());
        self.by_pred.entry(pred).or_default().push(atom);
        true
    }
}

struct Enumerator<'s, 'a> {
    schema: &'s Schema<'a>,
    order: Vec<usize>,
    reach: &'s Reach<'a>,
    init: &'s FxHashSet<Atom>,
    budget: &'s mut usize,
    out: &'s mut Vec<Vec<String>>,
}

impl Enumerator<'_, '_> {
    fn run(&mut self, depth: usize, binding: &mut Vec<Option<String>>) -> Result<(), ()> {
        if depth == self.order.len() {
            return self.fill_free(0, binding);
        }
        let (pred, slots) = &self.schema.pos[self.order[depth]];
        let Some(cands) = self.reach.by_pred.get(pred) else {
            return Ok(());
        };
        for atom in cands {
            let mut bound_here = Vec::new();
            let mut ok = true;
            for (arg, &slot) in atom.args.iter().zip(slots) {
                match &binding[slot] {
                    Some(v) if v != arg => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        if !self.schema.allowed[slot].contains(arg.as_str()) {
                            ok = false;
                            break;
                        }
                        binding[slot] = Some(arg.clone());
                        bound_here.push(slot);
                    }
                }
            }
            if ok {
                self.run(depth + 1, binding)?;
            }
            for s in bound_here {
                binding[s] = None;
            }
        }
        Ok(())
    }

    fn fill_free(&mut self, from: usize, binding: &mut Vec<Option<String>>) -> Result<(), ()> {
        let Some(slot) = (from..binding.len()).find(|&i| binding[i].is_none()) else {
            if *self.budget == 0 {
                return Err(());
            }
            *self.budget -= 1;
            let args: Vec<String> = binding.iter().map(|b| b.clone().unwrap()).collect();
            let blocked = self.schema.neg_static.iter().any(|(pred, slots)| {
                let atom = Atom::new(*pred, slots.iter().map(|&s| args[s].clone()));
                self.init.contains(&atom)
            });
            if !blocked {
                self.out.push(args);
            }
            return Ok(());
        };
        for &obj in &self.schema.candidates[slot] {
            binding[slot] = Some(obj.to_string());
            self.fill_free(slot + 1, binding)?;
        }
        binding[slot] = None;
        Ok(())
    }
}

pub fn ground_with(domain: &DomainAst, problem: &ProblemAst, cfg: GroundConfig) -> Result<GroundTask, GroundError> {
    let statics = domain.static_predicates();
    let schemas = compile(domain, problem, &statics);
    let init: FxHashSet<Atom> = problem.init.iter().cloned().collect();
    let mut reach = Reach {
        facts: FxHashSet::default(),
        by_pred: FxHashMap::default(),
    };
    for a in &problem.init {
        let pred = domain
            .predicate(&a.predicate)
            .map_or(a.predicate.as_str(), |p| p.name.as_str());
        reach.insert(pred, a.clone());
    }

    let cap = cfg.max_instantiations;
    let mut found: Vec<FxHashSet<Vec<String>>> = vec![FxHashSet::default(); schemas.len()];
    let mut total = 0usize;
    loop {
        let mut new_facts: Vec<(&str, Atom)> = Vec::new();
        for (si, schema) in schemas.iter().enumerate() {
            let mut order: Vec<usize> = (0..schema.pos.len()).collect();
            order.sort_by_key(|&i| reach.by_pred.get(schema.pos[i].0).map_or(0, Vec::len));
            let mut budget = cap.saturating_sub(total).max(1);
            let mut out = Vec::new();
            let mut en = Enumerator {
                schema,
                order,
                reach: &reach,
                init: &init,
                budget: &mut budget,
                out: &mut out,
            };
            let mut binding = vec![None; schema.params.len()];
            if en.run(0, &mut binding).is_err() {
                return Err(GroundError::TooManyInstantiations { cap });
            }
            for args in out {
                if found[si].contains(&args) {
                    continue;
                }
                for (pred, slots) in &schema.adds {
                    let atom = Atom::new(*pred, slots.iter().map(|&s| args[s].clone()));
                    if !reach.facts.contains(&atom) {
                        new_facts.push((pred, atom));
                    }
                }
                found[si].insert(args);
                total += 1;
                if total > cap {
                    return Err(GroundError::TooManyInstantiations { cap });
                }
            }
        }
        let mut changed = false;
        for (pred, atom) in new_facts {
            changed |= reach.insert(pred, atom);
        }
        if !changed {
            break;
        }
    }

    // Fact index: everything reachable plus positive goal atoms, sorted.
    let mut atoms: BTreeSet<Atom> = reach.facts.iter().cloned().collect();
    atoms.extend(problem.goal.positive().cloned());
    let facts = FactIndex::from_sorted(atoms.into_iter().collect());

    let mut actions = Vec::with_capacity(total);
    for (schema_ast, bindings) in domain.actions.iter().zip(&found) {
        for args in bindings {
            let binding: BTreeMap<&str, &str> = schema_ast
                .params
                .iter()
                .zip(args)
                .map(|(p, a)| (p.name.as_str(), a.as_str()))
                .collect();
            let mut pre = Vec::new();
            let mut pre_neg = Vec::new();
            let mut applicable = true;
            for lit in &schema_ast.precondition {
                let atom = lit.atom.substitute(&binding);
                let is_static = statics.contains(atom.predicate.as_str());
                match (lit.positive, is_static) {
                    (true, true) => {}
                    (true, false) => pre.push(facts.id(&atom).expect("reachable precondition")),
                    (false, true) => applicable &= !init.contains(&atom),
                    (false, false) => {
                        if let Some(id) = facts.id(&atom) {
                            pre_neg.push(id);
                        }
                    }
                }
            }
            if !applicable {
                continue;
            }
            let add: Vec<FactId> = schema_ast
                .add_effects
                .iter()
                .map(|e| facts.id(&e.substitute(&binding)).expect("effects are reachable"))
                .collect();
            let del: Vec<FactId> = schema_ast
                .del_effects
                .iter()
                .filter_map(|e| facts.id(&e.substitute(&binding)))
                .filter(|f| !add.contains(f))
                .collect();
            let norm = |mut v: Vec<FactId>| {
                v.sort_unstable();
                v.dedup();
                v
            };
            actions.push(GroundAction {
                name: schema_ast.name.clone(),
                args: args.clone(),
                pre: norm(pre),
                pre_neg: norm(pre_neg),
                add: norm(add),
                del: norm(del),
                cost: 1,
            });
        }
    }
    actions.sort_by(|a, b| (&a.name, &a.args).cmp(&(&b.name, &b.args)));

    let mut init_ids: Vec<FactId> = problem.init.iter().filter_map(|a| facts.id(a)).collect();
    init_ids.sort_unstable();
    init_ids.dedup();
    let mut goal_pos: Vec<FactId> = problem.goal.positive().filter_map(|a| facts.id(a)).collect();
    goal_pos.sort_unstable();
    goal_pos.dedup();
    let mut goal_neg: Vec<FactId> = problem.goal.negative().filter_map(|a| facts.id(a)).collect();
    goal_neg.sort_unstable();
    goal_neg.dedup();

    Ok(GroundTask {
        facts,
        actions,
        init: init_ids,
        goal_pos,
        goal_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    const DOMAIN: &str = "
    (define (domain cleaning)
        (:requirements :strips :typing :negative-preconditions)
        (:types agent room item)
        (:predicates
            (agent_at ?a - agent ?r - room)
            (neighbor ?r1 - room ?r2 - room)
            (item_at ?i - item ?r - room)
            (item_is_mop ?i - item)
            (item_pickable ?i - item)
            (agent_has_item ?a - agent ?i - item)
            (mop_clean ?i - item)
            (floor_clean ?r - room)
            (battery_full ?a - agent)
        )
        (:action go
            :parameters (?a - agent ?from - room ?to - room)
            :precondition (and (agent_at ?a ?from) (neighbor ?from ?to))
            :effect (and (agent_at ?a ?to) (not (agent_at ?a ?from))))
        (:action pick
            :parameters (?a - agent ?i - item ?r - room)
            :precondition (and (agent_at ?a ?r) (item_at ?i ?r) (item_pickable ?i))
            :effect (and (agent_has_item ?a ?i) (not (item_at ?i ?r))))
        (:action mop_floor
            :parameters (?a - agent ?i - item ?r - room)
            :precondition (and
                (agent_at ?a ?r)
                (item_is_mop ?i)
                (item_pickable ?i)
                (agent_has_item ?a ?i)
                (mop_clean ?i)
                (not (floor_clean ?r)))
            :effect (and (floor_clean ?r) (not (mop_clean ?i)) (not (battery_full ?a))))
    )";

    const PROBLEM: &str = "
    (define (problem p)
        (:domain cleaning)
        (:objects robot - agent mop bucket - item kitchen hall bath - room)
        (:init (agent_at robot hall) (neighbor hall kitchen) (neighbor kitchen hall)
               (neighbor hall bath) (neighbor bath hall)
               (item_at mop bath) (item_at bucket kitchen)
               (item_is_mop mop) (item_pickable mop) (item_pickable bucket)
               (mop_clean mop) (battery_full robot))
        (:goal (and (floor_clean kitchen))))";

    fn task() -> (DomainAst, ProblemAst, GroundTask) {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(PROBLEM, &d).unwrap();
        let t = ground(&d, &p).unwrap();
        (d, p, t)
    }

    #[test]
    fn mop_floor_instantiations_are_filtered_to_mops() {
        let (d, p, t) = task();
        let counts: BTreeMap<String, u128> = count_instantiations(&d, &p).into_iter().collect();
        // 1 agent x 2 items x 3 rooms
        assert_eq!(counts["mop_floor"], 6);
        let mops: Vec<&GroundAction> = t.actions.iter().filter(|a| a.name == "mop_floor").collect();
        assert!(!mops.is_empty() && mops.len() <= 6);
        assert!(mops.iter().all(|a| a.args[1] == "mop"));
        assert_eq!(mops.len(), 3);
    }

    #[test]
    fn unreachable_bindings_are_dropped() {
        let (_, _, t) = task();
        // go needs a neighbor fact: kitchen->bath is not adjacent
        assert!(t
            .find_action("go", &["robot".into(), "kitchen".into(), "bath".into()])
            .is_none());
        assert!(t
            .find_action("go", &["robot".into(), "hall".into(), "bath".into()])
            .is_some());
    }

    #[test]
    fn static_preconditions_are_stripped() {
        let (_, _, t) = task();
        let i = t
            .find_action("mop_floor", &["robot".into(), "mop".into(), "kitchen".into()])
            .unwrap();
        let a = &t.actions[i];
        let pre: Vec<String> = a.pre.iter().map(|&f| t.facts.atom(f).to_string()).collect();
        assert_eq!(
            pre,
            [
                "(agent_at robot kitchen)",
                "(agent_has_item robot mop)",
                "(mop_clean mop)"
            ]
        );
        assert_eq!(a.pre_neg.len(), 1);
        assert_eq!(t.facts.atom(a.pre_neg[0]).to_string(), "(floor_clean kitchen)");
        assert!(a.add.iter().all(|f| !a.del.contains(f)));
    }

    #[test]
    fn ordering_is_deterministic() {
        let (d, p, t) = task();
        let again = ground(&d, &p).unwrap();
        assert_eq!(t, again);
        let labels: Vec<String> = t.actions.iter().map(GroundAction::label).collect();
        let mut sorted = t.actions.clone();
        sorted.sort_by(|a, b| (&a.name, &a.args).cmp(&(&b.name, &b.args)));
        assert_eq!(labels, sorted.iter().map(GroundAction::label).collect::<Vec<_>>());
    }

    #[test]
    fn goal_in_init_is_satisfied_at_init() {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(&PROBLEM.replace("(floor_clean kitchen)", "(mop_clean mop)"), &d).unwrap();
        let t = ground(&d, &p).unwrap();
        assert!(t.goal_pos.iter().all(|g| t.init.contains(g)));
    }

    #[test]
    fn object_without_matching_parameter_type_adds_nothing() {
        let d = parse_domain(&DOMAIN.replace("(:types agent room item)", "(:types agent room item gadget)")).unwrap();
        let p = parse_problem(&PROBLEM.replace("bucket - item", "bucket - item drone - gadget"), &d).unwrap();
        let t = ground(&d, &p).unwrap();
        assert!(t.actions.iter().all(|a| !a.args.iter().any(|x| x == "drone")));
        let base = ground(&d, &parse_problem(PROBLEM, &d).unwrap()).unwrap();
        assert_eq!(t.actions.len(), base.actions.len());
    }

    #[test]
    fn cap_aborts_grounding() {
        let (d, p, _) = task();
        let e = ground_with(&d, &p, GroundConfig { max_instantiations: 3 }).unwrap_err();
        assert_eq!(e, GroundError::TooManyInstantiations { cap: 3 });
    }

    #[test]
    fn unreachable_goal_atom_is_indexed() {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(&PROBLEM.replace("(floor_clean kitchen)", "(item_at mop kitchen)"), &d).unwrap();
        let t = ground(&d, &p).unwrap();
        assert_eq!(t.goal_pos.len(), 1);
        assert!(t.actions.iter().all(|a| !a.add.contains(&t.goal_pos[0])));
    }
}
