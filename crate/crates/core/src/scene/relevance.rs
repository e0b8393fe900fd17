//! Backward relevance analysis selecting the items a goal can depend on.

use std::collections::BTreeSet;

use super::{build_problem, EncodingConfig, SceneError, SceneGraph};
use crate::ground::{ground, FactId, GroundTask};
use crate::pddl::{Atom, DomainAst, ErrorKind, GoalFormula, TypedName, OBJECT_TYPE};

/// Everything besides the scene needed to build the analysed problem.
#[derive(Debug, Clone, Default)]
pub struct RelevanceContext {
    pub encoding: EncodingConfig,
    /// Agent objects. When empty, one placeholder object is created for
    /// every declared type the scene does not populate.
    pub agents: Vec<TypedName>,
    pub agent_facts: Vec<Atom>,
}

/// Relevance under the default encoding, with placeholder agents and no
/// agent facts. Goals that depend on agent state need
/// [`relevance_prune_with`].
pub fn relevance_prune(sg: &SceneGraph, d: &DomainAst, goal: &GoalFormula) -> Result<BTreeSet<String>, SceneError> {
    relevance_prune_with(sg, d, goal, &RelevanceContext::default())
}

fn placeholders(d: &DomainAst, enc: &EncodingConfig) -> Vec<TypedName> {
    d.types
        .iter()
        .filter(|t| {
            t.name != OBJECT_TYPE
                && !d.is_subtype(&enc.room_type, &t.name)
                && !d.is_subtype(&enc.item_type, &t.name)
                && !d.is_subtype(&t.name, &enc.room_type)
                && !d.is_subtype(&t.name, &enc.item_type)
        })
        .map(|t| TypedName::new(format!("placeholder_{}", t.name), t.name.clone()))
        .collect()
}

/// Items occurring in any fact or action relevant to `goal`.
///
/// Goal atoms are relevant; every action achieving a relevant atom is
/// relevant, and so are its preconditions. One refinement keeps the
/// analysis from treating every pickable item as relevant: an achiever of
/// an initially true fact `f` is skipped when one of its preconditions can
/// only be achieved by actions that require and consume `f` themselves,
/// since such a detour can never make `f` true when it was not already.
pub fn relevance_prune_with(
    sg: &SceneGraph,
    d: &DomainAst,
    goal: &GoalFormula,
    ctx: &RelevanceContext,
) -> Result<BTreeSet<String>, SceneError> {
    for l in &goal.literals {
        if d.predicate(&l.atom.predicate).is_none() {
            return Err(SceneError::Planning(
                ErrorKind::UndeclaredPredicate(l.atom.predicate.clone()).into(),
            ));
        }
    }
    if goal.is_empty() {
        return Ok(BTreeSet::new());
    }
    let agents = if ctx.agents.is_empty() {
        placeholders(d, &ctx.encoding)
    } else {
        ctx.agents.clone()
    };
    let problem = build_problem(
        "relevance",
        sg,
        d,
        &ctx.encoding,
        &agents,
        &ctx.agent_facts,
        goal.clone(),
    )?;
    let task = ground(d, &problem)?;
    let (facts, actions) = relevant(&task);

    let items: BTreeSet<&str> = sg.items.iter().map(|i| i.id.as_str()).collect();
    let mut out = BTreeSet::new();
    let mut collect = |args: &[String]| {
        for a in args {
            if items.contains(a.as_str()) {
                out.insert(a.clone());
            }
        }
    };
    for f in facts {
        collect(&task.facts.atom(f).args);
    }
    for a in actions {
        collect(&task.actions[a].args);
    }
    Ok(out)
}

/// Relevant fact ids and action indices of a grounded task.
fn relevant(task: &GroundTask) -> (BTreeSet<FactId>, BTreeSet<usize>) {
    let n = task.num_facts();
    let mut achievers = vec![Vec::new(); n];
    let mut deleters = vec![Vec::new(); n];
    for (i, a) in task.actions.iter().enumerate() {
        for &f in &a.add {
            achievers[f as usize].push(i);
        }
        for &f in &a.del {
            deleters[f as usize].push(i);
        }
    }
    let mut in_init = vec![false; n];
    for &f in &task.init {
        in_init[f as usize] = true;
    }
    // p is only reachable through actions that require and delete f.
    let consumes = |p: FactId, f: FactId| {
        let ach = &achievers[p as usize];
        !ach.is_empty()
            && ach.iter().all(|&b| {
                let b = &task.actions[b];
                b.pre.binary_search(&f).is_ok() && b.del.binary_search(&f).is_ok()
            })
    };

    let mut pos = vec![false; n];
    let mut neg = vec![false; n];
    let mut acts = BTreeSet::new();
    let mut queue: Vec<(FactId, bool)> = Vec::new();
    for &g in &task.goal_pos {
        pos[g as usize] = true;
        queue.push((g, true));
    }
    for &g in &task.goal_neg {
        neg[g as usize] = true;
        queue.push((g, false));
    }
    while let Some((f, positive)) = queue.pop() {
        let candidates = if positive {
            &achievers[f as usize]
        } else {
            &deleters[f as usize]
        };
        for &ai in candidates {
            let a = &task.actions[ai];
            if positive && in_init[f as usize] && a.pre.iter().any(|&p| !in_init[p as usize] && consumes(p, f)) {
                continue;
            }
            if !acts.insert(ai) {
                continue;
            }
            for &p in &a.pre {
                if !pos[p as usize] {
                    pos[p as usize] = true;
                    queue.push((p, true));
                }
            }
            for &p in &a.pre_neg {
                if !neg[p as usize] {
                    neg[p as usize] = true;
                    queue.push((p, false));
                }
            }
        }
    }
    let facts = (0..n as FactId)
        .filter(|&f| pos[f as usize] || neg[f as usize])
        .collect();
    (facts, acts)
}
