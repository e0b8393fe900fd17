//! Translation of scene topology and item attributes into planning facts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{list_items, SceneError, SceneGraph, StateValue};
use crate::pddl::{check_ground_atom, Atom, DomainAst, GoalFormula, ProblemAst, TypedName};

/// What an item must have for a rule to fire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTrigger {
    Affordance(String),
    State { key: String, value: StateValue },
}

/// Emits `(predicate item)` for every item matching `when`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactRule {
    pub when: RuleTrigger,
    pub predicate: String,
}

impl FactRule {
    pub fn affordance(label: &str, predicate: &str) -> Self {
        FactRule {
            when: RuleTrigger::Affordance(label.to_string()),
            predicate: predicate.to_string(),
        }
    }

    pub fn state(key: &str, value: StateValue, predicate: &str) -> Self {
        FactRule {
            when: RuleTrigger::State {
                key: key.to_string(),
                value,
            },
            predicate: predicate.to_string(),
        }
    }
}

/// Predicate and type names used when encoding a scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    pub room_type: String,
    pub item_type: String,
    pub neighbor: String,
    pub item_at: String,
    pub item_accessible: String,
    /// Binary item/room predicate recording each item's initial room;
    /// emitted only if the domain declares it.
    pub item_home: String,
    pub rules: Vec<FactRule>,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            room_type: "room".into(),
            item_type: "item".into(),
            neighbor: "neighbor".into(),
            item_at: "item_at".into(),
            item_accessible: "item_accessible".into(),
            item_home: "item_home".into(),
            rules: Vec::new(),
        }
    }
}

fn require(d: &DomainAst, name: &str, arity: usize) -> Result<(), SceneError> {
    match d.predicate(name) {
        Some(p) if p.params.len() == arity => Ok(()),
        _ => Err(SceneError::MissingPredicate(format!("{name}/{arity}"))),
    }
}

fn declared(d: &DomainAst, name: &str, arity: usize) -> bool {
    d.predicate(name).is_some_and(|p| p.params.len() == arity)
}

pub fn encode_scene_facts(sg: &SceneGraph, d: &DomainAst) -> Result<Vec<Atom>, SceneError> {
    encode_scene_facts_with(sg, d, &EncodingConfig::default())
}

/// Adjacency in both directions, sorted; then, per item in id order, its
/// location, accessibility, home room and rule-derived facts.
pub fn encode_scene_facts_with(sg: &SceneGraph, d: &DomainAst, cfg: &EncodingConfig) -> Result<Vec<Atom>, SceneError> {
    require(d, &cfg.neighbor, 2)?;
    require(d, &cfg.item_at, 2)?;
    require(d, &cfg.item_accessible, 1)?;
    let mut out = Vec::new();
    let mut directed: Vec<(&str, &str)> = sg
        .adjacent_pairs()
        .into_iter()
        .flat_map(|(a, b)| [(a, b), (b, a)])
        .collect();
    directed.sort_unstable();
    for (a, b) in directed {
        out.push(Atom::new(cfg.neighbor.as_str(), [a, b]));
    }
    let home = declared(d, &cfg.item_home, 2);
    for item in list_items(sg) {
        out.push(Atom::new(cfg.item_at.as_str(), [item.id.as_str(), item.room.as_str()]));
        if item.accessible {
            out.push(Atom::new(cfg.item_accessible.as_str(), [item.id.as_str()]));
        }
        if home {
            out.push(Atom::new(
                cfg.item_home.as_str(),
                [item.id.as_str(), item.room.as_str()],
            ));
        }
        let mut emitted = BTreeSet::new();
        for rule in &cfg.rules {
            let fires = match &rule.when {
                RuleTrigger::Affordance(a) => item.affordances.contains(a),
                RuleTrigger::State { key, value } => item.states.get(key) == Some(value),
            };
            if fires && declared(d, &rule.predicate, 1) && emitted.insert(rule.predicate.as_str()) {
                out.push(Atom::new(rule.predicate.as_str(), [item.id.as_str()]));
            }
        }
    }
    Ok(out)
}

/// Problem over the scene's rooms and items plus the given agent objects.
/// Init is `agent_facts` followed by the encoded scene facts.
pub fn build_problem(
    name: &str,
    sg: &SceneGraph,
    d: &DomainAst,
    cfg: &EncodingConfig,
    agents: &[TypedName],
    agent_facts: &[Atom],
    goal: GoalFormula,
) -> Result<ProblemAst, SceneError> {
    let mut objects: Vec<TypedName> = agents.to_vec();
    objects.extend(
        sg.rooms
            .iter()
            .map(|r| TypedName::new(r.id.clone(), cfg.room_type.clone())),
    );
    objects.extend(
        list_items(sg)
            .into_iter()
            .map(|i| TypedName::new(i.id.clone(), cfg.item_type.clone())),
    );
    let mut init: Vec<Atom> = agent_facts.to_vec();
    init.extend(encode_scene_facts_with(sg, d, cfg)?);
    let problem = ProblemAst {
        name: name.to_string(),
        domain_name: d.name.clone(),
        objects,
        init: Vec::new(),
        goal: GoalFormula::default(),
    };
    let table = problem.object_types();
    for atom in init.iter().chain(goal.literals.iter().map(|l| &l.atom)) {
        check_ground_atom(d, &table, atom)?;
    }
    Ok(ProblemAst { init, goal, ..problem })
}
