//! Interchangeable objects and canonical states.
//!
//! Two objects are interchangeable when swapping them maps the action set
//! onto itself and leaves the goal untouched. Every permutation within a
//! class of such objects is then an automorphism of the state space, so
//! states that differ only by such a permutation have the same distance to
//! the goal and search needs to keep one representative per orbit.
//!
//! Classes are restricted so that no fact or action mentions two objects of
//! any class. Under that restriction each object's role in a state is the
//! set of its facts, and sorting objects by role gives a canonical form.

use rustc_hash::{FxHashMap, FxHashSet};

use super::state::BitState;
use crate::ground::{FactId, GroundTask};
use crate::pddl::Atom;

const NONE: u32 = u32::MAX;

/// Orbit representatives under permutations of interchangeable objects.
#[derive(Debug, Clone, Default)]
pub struct ObjectSymmetry {
    classes: Vec<Vec<String>>,
    /// Per fact: `(class, member)` of the class object it mentions.
    member_of: Vec<(u32, u32)>,
    /// Per fact mentioning a class member: the same fact about each member
    /// of that class, indexed by member.
    images: FxHashMap<FactId, Vec<FactId>>,
}

fn swapped(args: &[String], a: &str, b: &str) -> Vec<String> {
    args.iter()
        .map(|x| {
            if x == a {
                b.to_string()
            } else if x == b {
                a.to_string()
            } else {
                x.clone()
            }
        })
        .collect()
}

fn renamed(atom: &Atom, from: &str, to: &str) -> Atom {
    Atom::new(atom.predicate.clone(), swapped(&atom.args, from, to))
}

/// Whether swapping `a` and `b` is an automorphism of `task`.
fn interchangeable(task: &GroundTask, mentions: &FxHashMap<&str, (Vec<FactId>, Vec<usize>)>, a: &str, b: &str) -> bool {
    let map_fact = |f: FactId| task.facts.id(&renamed(task.facts.atom(f), a, b));
    let map_all = |fs: &[FactId]| -> Option<Vec<FactId>> {
        let mut out = fs.iter().map(|&f| map_fact(f)).collect::<Option<Vec<_>>>()?;
        out.sort_unstable();
        Some(out)
    };
    let sorted = |fs: &[FactId]| {
        let mut v = fs.to_vec();
        v.sort_unstable();
        v
    };
    for o in [a, b] {
        let (facts, actions) = &mentions[o];
        if facts.iter().any(|&f| map_fact(f).is_none()) {
            return false;
        }
        for &ai in actions {
            let act = &task.actions[ai];
            let Some(bi) = task.find_action(&act.name, &swapped(&act.args, a, b)) else {
                return false;
            };
            let img = &task.actions[bi];
            let same = |x: &[FactId], y: &[FactId]| map_all(x).is_some_and(|m| m == sorted(y));
            if act.cost != img.cost
                || !same(&act.pre, &img.pre)
                || !same(&act.pre_neg, &img.pre_neg)
                || !same(&act.add, &img.add)
                || !same(&act.del, &img.del)
            {
                return false;
            }
        }
    }
    true
}

impl ObjectSymmetry {
    /// Finds classes of interchangeable objects not mentioned by the goal.
    pub fn detect(task: &GroundTask) -> Self {
        let mut mentions: FxHashMap<&str, (Vec<FactId>, Vec<usize>)> = FxHashMap::default();
        for (f, atom) in task.facts.atoms().iter().enumerate() {
            for o in &atom.args {
                let e = mentions.entry(o.as_str()).or_default();
                if e.0.last() != Some(&(f as FactId)) {
                    e.0.push(f as FactId);
                }
            }
        }
        for (i, act) in task.actions.iter().enumerate() {
            for o in &act.args {
                let e = mentions.entry(o.as_str()).or_default();
                if e.1.last() != Some(&i) {
                    e.1.push(i);
                }
            }
        }
        let in_goal: FxHashSet<&str> = task
            .goal_pos
            .iter()
            .chain(&task.goal_neg)
            .flat_map(|&f| task.facts.atom(f).args.iter().map(String::as_str))
            .collect();

        // Cheap necessary condition: same predicates and action names at the
        // same argument positions.
        let mut by_signature: FxHashMap<Vec<(String, usize, bool)>, Vec<&str>> = FxHashMap::default();
        let mut objects: Vec<&str> = mentions.keys().copied().filter(|o| !in_goal.contains(o)).collect();
        objects.sort_unstable();
        for o in objects {
            let (facts, actions) = &mentions[o];
            let mut sig: Vec<(String, usize, bool)> = Vec::new();
            for &f in facts {
                let atom = task.facts.atom(f);
                sig.extend(
                    atom.args
                        .iter()
                        .enumerate()
                        .filter(|(_, x)| *x == o)
                        .map(|(p, _)| (atom.predicate.clone(), p, false)),
                );
            }
            for &ai in actions {
                let act = &task.actions[ai];
                sig.extend(
                    act.args
                        .iter()
                        .enumerate()
                        .filter(|(_, x)| *x == o)
                        .map(|(p, _)| (act.name.clone(), p, true)),
                );
            }
            sig.sort();
            by_signature.entry(sig).or_default().push(o);
        }

        let mut candidates: Vec<Vec<&str>> = Vec::new();
        let mut groups: Vec<Vec<&str>> = by_signature.into_values().filter(|g| g.len() > 1).collect();
        groups.sort();
        for group in groups {
            let mut rest = group;
            while rest.len() > 1 {
                let rep = rest[0];
                let (class, others): (Vec<&str>, Vec<&str>) = rest
                    .iter()
                    .skip(1)
                    .partition(|o| interchangeable(task, &mentions, rep, o));
                if !class.is_empty() {
                    candidates.push(std::iter::once(rep).chain(class).collect());
                }
                rest = others;
            }
        }

        // Keep classes whose members never share a fact or action with a
        // member of the same or an already kept class.
        candidates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        let mut owner: FxHashMap<&str, usize> = FxHashMap::default();
        let mut classes: Vec<Vec<&str>> = Vec::new();
        'next: for class in candidates {
            let members: FxHashSet<&str> = class.iter().copied().collect();
            for o in &class {
                let (facts, actions) = &mentions[o];
                let arg_lists = facts
                    .iter()
                    .map(|&f| &task.facts.atom(f).args)
                    .chain(actions.iter().map(|&ai| &task.actions[ai].args));
                for args in arg_lists {
                    let own = args.iter().filter(|x| members.contains(x.as_str())).count();
                    if own > 1 || args.iter().any(|x| owner.contains_key(x.as_str())) {
                        continue 'next;
                    }
                }
            }
            for o in &class {
                owner.insert(o, classes.len());
            }
            classes.push(class);
        }

        let mut member_of = vec![(NONE, NONE); task.num_facts()];
        let mut images: FxHashMap<FactId, Vec<FactId>> = FxHashMap::default();
        for (c, class) in classes.iter().enumerate() {
            for (m, o) in class.iter().enumerate() {
                for &f in &mentions[o].0 {
                    member_of[f as usize] = (c as u32, m as u32);
                    let atom = task.facts.atom(f);
                    let row = class
                        .iter()
                        .map(|other| {
                            task.facts
                                .id(&renamed(atom, o, other))
                                .expect("checked by interchangeable")
                        })
                        .collect();
                    images.insert(f, row);
                }
            }
        }
        ObjectSymmetry {
            classes: classes
                .into_iter()
                .map(|c| c.into_iter().map(String::from).collect())
                .collect(),
            member_of,
            images,
        }
    }

    pub fn classes(&self) -> &[Vec<String>] {
        &self.classes
    }

    pub fn is_trivial(&self) -> bool {
        self.classes.is_empty()
    }

    /// The orbit representative of `s`. Members of a class are reassigned
    /// so that their roles appear in sorted order.
    pub fn canonical(&self, s: &BitState) -> BitState {
        if self.is_trivial() {
            return s.clone();
        }
        // roles[c][m]: facts of member m, written about member 0.
        let mut roles: Vec<Vec<Vec<FactId>>> = self.classes.iter().map(|c| vec![Vec::new(); c.len()]).collect();
        let mut moved: Vec<FactId> = Vec::new();
        for f in s.facts() {
            let (c, m) = self.member_of[f as usize];
            if c != NONE {
                roles[c as usize][m as usize].push(self.images[&f][0]);
                moved.push(f);
            }
        }
        let mut target: Vec<Vec<u32>> = Vec::with_capacity(roles.len());
        for class_roles in &mut roles {
            for r in class_roles.iter_mut() {
                r.sort_unstable();
            }
            let mut order: Vec<u32> = (0..class_roles.len() as u32).collect();
            order.sort_by(|&a, &b| class_roles[a as usize].cmp(&class_roles[b as usize]).then(a.cmp(&b)));
            let mut to = vec![0u32; order.len()];
            for (slot, &m) in order.iter().enumerate() {
                to[m as usize] = slot as u32;
            }
            target.push(to);
        }
        let mut out = s.clone();
        for &f in &moved {
            out.remove(f);
        }
        for &f in &moved {
            let (c, m) = self.member_of[f as usize];
            out.insert(self.images[&f][target[c as usize][m as usize] as usize]);
        }
        out
    }
}
