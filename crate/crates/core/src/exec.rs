//! Lifted plan execution and validation under closed-world semantics.
//!
//! This module deliberately works on the parsed problem rather than on a
//! grounded task: every plan step is instantiated from its schema, so the
//! validator shares no code with the grounder or the search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pddl::sexp::{read_all, Sexp};
use crate::pddl::{Atom, DomainAst, ErrorKind, GoalFormula, Literal, PddlError, ProblemAst};

/// Set of true ground atoms. Anything absent is false.
pub type State = BTreeSet<Atom>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanStep {
    pub name: String,
    pub args: Vec<String>,
}

impl PlanStep {
    pub fn new<I, S>(name: impl Into<String>, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PlanStep {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn extend(&mut self, other: &Plan) {
        self.steps.extend(other.steps.iter().cloned());
    }

    /// One step per line, lower case, newline terminated.
    pub fn to_text(&self) -> String {
        self.steps.iter().map(|s| format!("{s}\n")).collect()
    }
}

/// Reads the plan text format. Lines starting with `;` are comments.
pub fn parse_plan(text: &str) -> Result<Plan, PddlError> {
    let mut steps = Vec::new();
    for item in read_all(text)? {
        match &item {
            Sexp::List { items, loc } => {
                let mut names = Vec::with_capacity(items.len());
                for it in items {
                    match it.symbol() {
                        Some(s) => names.push(s.to_string()),
                        None => {
                            return Err(PddlError::new(
                                ErrorKind::Syntax("nested list in plan step".into()),
                                Some(*loc),
                            ))
                        }
                    }
                }
                let Some((name, args)) = names.split_first() else {
                    return Err(PddlError::new(ErrorKind::Syntax("empty plan step".into()), Some(*loc)));
                };
                steps.push(PlanStep::new(name.clone(), args.iter().cloned()));
            }
            Sexp::Symbol { text, loc } => {
                return Err(PddlError::new(
                    ErrorKind::Syntax(format!("expected a plan step, found `{text}`")),
                    Some(*loc),
                ))
            }
        }
    }
    Ok(Plan { steps })
}

/// A schema bound to concrete objects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstantiatedAction {
    pub step: PlanStep,
    pub precondition: Vec<Literal>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("step {step}: no ground action {action}")]
    UnknownAction { step: usize, action: String },
    #[error("step {step}: {action} requires {literal}")]
    PreconditionViolated {
        step: usize,
        action: String,
        literal: Literal,
    },
}

impl ExecError {
    pub fn step(&self) -> usize {
        match self {
            ExecError::UnknownAction { step, .. } | ExecError::PreconditionViolated { step, .. } => *step,
        }
    }
}

/// Binds `step` to its schema. Fails if the schema is missing, the arity is
/// wrong, or an argument is not an object of a compatible type.
pub fn instantiate(domain: &DomainAst, problem: &ProblemAst, step: &PlanStep) -> Option<InstantiatedAction> {
    let schema = domain.action(&step.name)?;
    if schema.params.len() != step.args.len() {
        return None;
    }
    let mut binding = BTreeMap::new();
    for (param, arg) in schema.params.iter().zip(&step.args) {
        let ty = problem.object_type(arg)?;
        if !domain.is_subtype(ty, &param.ty) {
            return None;
        }
        binding.insert(param.name.as_str(), arg.as_str());
    }
    Some(InstantiatedAction {
        step: step.clone(),
        precondition: schema
            .precondition
            .iter()
            .map(|l| Literal {
                atom: l.atom.substitute(&binding),
                positive: l.positive,
            })
            .collect(),
        add: schema.add_effects.iter().map(|a| a.substitute(&binding)).collect(),
        del: schema.del_effects.iter().map(|a| a.substitute(&binding)).collect(),
    })
}

/// First precondition literal that does not hold in `state`.
pub fn first_unsatisfied<'a>(state: &State, action: &'a InstantiatedAction) -> Option<&'a Literal> {
    action
        .precondition
        .iter()
        .find(|l| state.contains(&l.atom) != l.positive)
}

/// `(s \ del) ∪ add`, or the first violated precondition literal.
pub fn apply(state: &State, action: &InstantiatedAction) -> Result<State, Literal> {
    if let Some(l) = first_unsatisfied(state, action) {
        return Err(l.clone());
    }
    let mut next = state.clone();
    for d in &action.del {
        next.remove(d);
    }
    for a in &action.add {
        next.insert(a.clone());
    }
    Ok(next)
}

pub fn initial_state(problem: &ProblemAst) -> State {
    problem.init.iter().cloned().collect()
}

pub fn goal_holds(state: &State, goal: &GoalFormula) -> bool {
    goal.literals.iter().all(|l| state.contains(&l.atom) == l.positive)
}

/// Executes `plan` from `from` and returns the final state.
pub fn simulate_from(domain: &DomainAst, problem: &ProblemAst, from: State, plan: &Plan) -> Result<State, ExecError> {
    let mut state = from;
    for (i, step) in plan.steps.iter().enumerate() {
        let action = instantiate(domain, problem, step).ok_or_else(|| ExecError::UnknownAction {
            step: i,
            action: step.to_string(),
        })?;
        state = apply(&state, &action).map_err(|literal| ExecError::PreconditionViolated {
            step: i,
            action: step.to_string(),
            literal,
        })?;
    }
    Ok(state)
}

/// Executes `plan` from the problem's initial state.
pub fn simulate(domain: &DomainAst, problem: &ProblemAst, plan: &Plan) -> Result<State, ExecError> {
    simulate_from(domain, problem, initial_state(problem), plan)
}

/// The state reached by an executable plan, goal satisfaction aside.
pub fn final_state(domain: &DomainAst, problem: &ProblemAst, plan: &Plan) -> Result<State, ExecError> {
    simulate(domain, problem, plan)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvalidReason {
    PreconditionViolated,
    GoalUnsatisfied,
    UnknownAction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub failing_step: Option<usize>,
    pub reason: Option<InvalidReason>,
    pub detail: String,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }

    fn valid() -> Self {
        ValidationReport {
            verdict: Verdict::Valid,
            failing_step: None,
            reason: None,
            detail: String::new(),
        }
    }
}

pub fn validate(domain: &DomainAst, problem: &ProblemAst, plan: &Plan) -> ValidationReport {
    match simulate(domain, problem, plan) {
        Err(e) => ValidationReport {
            verdict: Verdict::Invalid,
            failing_step: Some(e.step()),
            reason: Some(match e {
                ExecError::UnknownAction { .. } => InvalidReason::UnknownAction,
                ExecError::PreconditionViolated { .. } => InvalidReason::PreconditionViolated,
            }),
            detail: e.to_string(),
        },
        Ok(state) => match problem
            .goal
            .literals
            .iter()
            .find(|l| state.contains(&l.atom) != l.positive)
        {
            None => ValidationReport::valid(),
            Some(l) => ValidationReport {
                verdict: Verdict::Invalid,
                failing_step: None,
                reason: Some(InvalidReason::GoalUnsatisfied),
                detail: format!("goal literal {l} does not hold"),
            },
        },
    }
}
