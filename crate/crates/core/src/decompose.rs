//! Autoregressive solving of a sub-goal sequence.
//!
//! Each sub-problem reuses the original objects, starts from the state the
//! previous sub-plan ended in, and has one sub-goal as its goal. The final
//! plan is the concatenation of the sub-plans. Earlier sub-goals may be
//! undone later; only validation against the original goal decides success.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::exec::{initial_state, simulate_from, validate, ExecError, Plan, State, ValidationReport};
use crate::ground::{ground, GroundError};
use crate::pddl::sexp::read_all;
use crate::pddl::{
    goal_from_sexp_or_wrapper, print_goal, print_problem, replace_init_goal, DomainAst, GoalFormula, PddlError,
    ProblemAst,
};
use crate::search::{solve, SearchConfig, SearchResult, SearchStatus};

/// Ordered, nonempty list of conjunctive sub-goals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubGoalSequence {
    goals: Vec<GoalFormula>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubGoalError {
    #[error("sub-goal sequence is empty")]
    Empty,
    #[error("sub-goal {index}: {source}")]
    Invalid { index: usize, source: PddlError },
}

impl SubGoalSequence {
    /// Checks every literal against the domain and `problem`'s objects.
    pub fn new(goals: Vec<GoalFormula>, domain: &DomainAst, problem: &ProblemAst) -> Result<Self, SubGoalError> {
        if goals.is_empty() {
            return Err(SubGoalError::Empty);
        }
        let table = problem.object_types();
        for (index, g) in goals.iter().enumerate() {
            for l in &g.literals {
                crate::pddl::check_ground_atom(domain, &table, &l.atom)
                    .map_err(|source| SubGoalError::Invalid { index, source })?;
            }
        }
        Ok(SubGoalSequence { goals })
    }

    /// Reads one goal per top-level expression: `(and ...)`, a single
    /// literal, or a `(:goal ...)` wrapper.
    pub fn parse(text: &str, domain: &DomainAst, problem: &ProblemAst) -> Result<Self, SubGoalError> {
        let items = read_all(text).map_err(|source| SubGoalError::Invalid { index: 0, source })?;
        let goals = items
            .iter()
            .enumerate()
            .map(|(index, s)| {
                goal_from_sexp_or_wrapper(s, domain, problem).map_err(|source| SubGoalError::Invalid { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(goals, domain, problem)
    }

    pub fn goals(&self) -> &[GoalFormula] {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn has_negative(&self) -> bool {
        self.goals.iter().any(GoalFormula::has_negative)
    }

    /// One goal per line block, in the format [`SubGoalSequence::parse`] reads.
    pub fn to_text(&self) -> String {
        self.goals.iter().map(|g| print_goal(g, 0)).collect()
    }
}

/// Anything that can produce a plan for a problem.
pub trait Planner {
    fn plan(&self, domain: &DomainAst, problem: &ProblemAst, cfg: &SearchConfig) -> Result<SearchResult, GroundError>;
}

/// Grounds the problem and runs A*.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardSearchPlanner;

impl Planner for ForwardSearchPlanner {
    fn plan(&self, domain: &DomainAst, problem: &ProblemAst, cfg: &SearchConfig) -> Result<SearchResult, GroundError> {
        let start = Instant::now();
        let task = ground(domain, problem)?;
        let mut result = solve(&task, cfg);
        result.time = start.elapsed().as_secs_f64();
        Ok(result)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SubFailure {
    Unsolvable,
    Timeout,
    GroundingAborted(String),
    /// The sub-plan did not execute from the sub-problem's init.
    NotExecutable(String),
    IllTyped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunStatus {
    Solved,
    Failed { index: usize, failure: SubFailure },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubRun {
    pub goal: GoalFormula,
    pub problem: ProblemAst,
    /// Absent when grounding aborted.
    pub result: Option<SearchResult>,
    pub plan: Plan,
    pub final_state: Option<State>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRun {
    pub subs: Vec<SubRun>,
    pub concat_plan: Plan,
    pub status: RunStatus,
    pub uses_negative_goals: bool,
}

impl DecompositionRun {
    pub fn is_solved(&self) -> bool {
        self.status == RunStatus::Solved
    }

    pub fn total_expanded(&self) -> u64 {
        self.subs
            .iter()
            .filter_map(|s| s.result.as_ref())
            .map(|r| r.expanded)
            .sum()
    }

    pub fn total_time(&self) -> f64 {
        self.subs.iter().filter_map(|s| s.result.as_ref()).map(|r| r.time).sum()
    }
}

/// Solves `goals` in order, feeding each sub-plan's final state into the
/// next sub-problem. Stops at the first sub-problem that fails.
pub fn autoregressive_solve(
    planner: &dyn Planner,
    domain: &DomainAst,
    p0: &ProblemAst,
    goals: &SubGoalSequence,
    cfg: &SearchConfig,
) -> DecompositionRun {
    let mut run = DecompositionRun {
        subs: Vec::with_capacity(goals.len()),
        concat_plan: Plan::default(),
        status: RunStatus::Solved,
        uses_negative_goals: goals.has_negative(),
    };
    let mut state = initial_state(p0);
    for (index, goal) in goals.goals().iter().enumerate() {
        let problem = match replace_init_goal(domain, p0, state.iter().cloned(), goal.clone()) {
            Ok(p) => ProblemAst {
                name: format!("{}_sub{}", p0.name, index + 1),
                ..p
            },
            Err(e) => {
                run.status = RunStatus::Failed {
                    index,
                    failure: SubFailure::IllTyped(e.to_string()),
                };
                return run;
            }
        };
        let mut sub = SubRun {
            goal: goal.clone(),
            problem,
            result: None,
            plan: Plan::default(),
            final_state: None,
        };
        let failure = match planner.plan(domain, &sub.problem, cfg) {
            Err(e) => Some(SubFailure::GroundingAborted(e.to_string())),
            Ok(result) => {
                let failure = match result.status {
                    SearchStatus::Unsolvable => Some(SubFailure::Unsolvable),
                    SearchStatus::Timeout => Some(SubFailure::Timeout),
                    SearchStatus::Solved => {
                        sub.plan = result.plan.clone().unwrap_or_default();
                        match simulate_from(domain, &sub.problem, state.clone(), &sub.plan) {
                            Ok(next) => {
                                sub.final_state = Some(next);
                                None
                            }
                            Err(e) => Some(SubFailure::NotExecutable(e.to_string())),
                        }
                    }
                };
                sub.result = Some(result);
                failure
            }
        };
        if let Some(failure) = failure {
            run.subs.push(sub);
            run.status = RunStatus::Failed { index, failure };
            return run;
        }
        run.concat_plan.extend(&sub.plan);
        state = sub.final_state.clone().expect("set on success");
        run.subs.push(sub);
    }
    run
}

/// Validates the concatenated plan against the original problem's goal.
pub fn verify_against_original(domain: &DomainAst, p0: &ProblemAst, run: &DecompositionRun) -> ValidationReport {
    validate(domain, p0, &run.concat_plan)
}

/// Re-executes every sub-plan from its sub-problem's init and checks that it
/// ends in the next sub-problem's init.
pub fn check_chaining(domain: &DomainAst, run: &DecompositionRun) -> Result<(), String> {
    for (i, pair) in run.subs.windows(2).enumerate() {
        let end = simulate_from(domain, &pair[0].problem, initial_state(&pair[0].problem), &pair[0].plan)
            .map_err(|e: ExecError| format!("sub-problem {i}: {e}"))?;
        if end != initial_state(&pair[1].problem) {
            return Err(format!(
                "sub-problem {i} does not end in the init of sub-problem {}",
                i + 1
            ));
        }
    }
    Ok(())
}

/// Audit record of a run: every sub-problem file, sub-plan and metric.
/// Wall-clock times are included only on request so that manifests of
/// deterministic runs compare equal byte for byte.
pub fn manifest(domain: &DomainAst, p0: &ProblemAst, run: &DecompositionRun, with_timing: bool) -> Value {
    let subs: Vec<Value> = run
        .subs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut v = json!({
                "index": i,
                "goal": print_goal(&s.goal, 0),
                "negative_literals": s.goal.has_negative(),
                "problem": print_problem(&s.problem),
                "status": s.result.as_ref().map(|r| format!("{:?}", r.status)),
                "plan": s.plan.to_text(),
                "plan_length": s.plan.len(),
                "expanded": s.result.as_ref().map(|r| r.expanded),
                "generated": s.result.as_ref().map(|r| r.generated),
            });
            if with_timing {
                v["time_s"] = json!(s.result.as_ref().map(|r| r.time));
            }
            v
        })
        .collect();
    let status = match &run.status {
        RunStatus::Solved => json!("solved"),
        RunStatus::Failed { index, failure } => json!({ "failed_at": index, "failure": failure }),
    };
    json!({
        "domain": domain.name,
        "problem": p0.name,
        "status": status,
        "negative_subgoals": run.uses_negative_goals,
        "sub_problems": subs,
        "plan": run.concat_plan.to_text(),
        "plan_length": run.concat_plan.len(),
        "expanded_total": run.total_expanded(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{goal_holds, simulate, InvalidReason};
    use crate::pddl::{parse_domain, parse_problem};

    const DOMAIN: &str = "
    (define (domain chores)
        (:requirements :strips :typing :negative-preconditions)
        (:types agent room item)
        (:predicates
            (agent_at ?a - agent ?r - room)
            (neighbor ?r1 - room ?r2 - room)
            (item_at ?i - item ?r - room)
            (item_is_mop ?i - item)
            (agent_has_item ?a - agent ?i - item)
            (agent_hand_free ?a - agent)
            (mop_clean ?i - item)
            (floor_clean ?r - room)
            (item_is_sink ?i - item))
        (:action go_to_room
            :parameters (?a - agent ?r1 - room ?r2 - room)
            :precondition (and (agent_at ?a ?r1) (neighbor ?r1 ?r2))
            :effect (and (agent_at ?a ?r2) (not (agent_at ?a ?r1))))
        (:action pick_item
            :parameters (?a - agent ?i - item ?r - room)
            :precondition (and (agent_at ?a ?r) (item_at ?i ?r) (agent_hand_free ?a) (item_is_mop ?i))
            :effect (and (agent_has_item ?a ?i) (not (item_at ?i ?r)) (not (agent_hand_free ?a))))
        (:action mop_floor
            :parameters (?a - agent ?i - item ?r - room)
            :precondition (and (agent_at ?a ?r) (agent_has_item ?a ?i) (mop_clean ?i) (not (floor_clean ?r)))
            :effect (and (floor_clean ?r) (not (mop_clean ?i))))
        (:action clean_mop
            :parameters (?a - agent ?i - item ?s - item ?r - room)
            :precondition (and (agent_at ?a ?r) (agent_has_item ?a ?i) (item_is_sink ?s) (item_at ?s ?r) (not (mop_clean ?i)))
            :effect (and (mop_clean ?i))))";

    const PROBLEM: &str = "
    (define (problem chores)
        (:domain chores)
        (:objects robot - agent mop sink - item kitchen hall bath - room)
        (:init (agent_at robot hall) (agent_hand_free robot)
               (neighbor hall kitchen) (neighbor kitchen hall) (neighbor hall bath) (neighbor bath hall)
               (item_at mop hall) (item_is_mop mop) (mop_clean mop)
               (item_at sink bath) (item_is_sink sink))
        (:goal (and (floor_clean kitchen) (floor_clean bath) (mop_clean mop))))";

    fn dp() -> (DomainAst, ProblemAst) {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(PROBLEM, &d).unwrap();
        (d, p)
    }

    fn seq(text: &str) -> SubGoalSequence {
        let (d, p) = dp();
        SubGoalSequence::parse(text, &d, &p).unwrap()
    }

    fn direct_len(d: &DomainAst, p: &ProblemAst) -> usize {
        ForwardSearchPlanner
            .plan(d, p, &SearchConfig::default())
            .unwrap()
            .plan_len()
            .unwrap()
    }

    #[test]
    fn single_subgoal_matches_direct_solve() {
        let (d, p) = dp();
        let g = SubGoalSequence::new(vec![p.goal.clone()], &d, &p).unwrap();
        let run = autoregressive_solve(&ForwardSearchPlanner, &d, &p, &g, &SearchConfig::default());
        assert!(run.is_solved());
        assert_eq!(run.concat_plan.len(), direct_len(&d, &p));
        assert!(verify_against_original(&d, &p, &run).is_valid());
    }

    #[test]
    fn chained_sequence_validates() {
        let (d, p) = dp();
        let g = seq("(and (floor_clean kitchen)) (mop_clean mop) (floor_clean bath) (and (mop_clean mop))");
        let run = autoregressive_solve(&ForwardSearchPlanner, &d, &p, &g, &SearchConfig::default());
        assert_eq!(run.status, RunStatus::Solved);
        assert_eq!(run.subs.len(), 4);
        check_chaining(&d, &run).unwrap();
        for pair in run.subs.windows(2) {
            assert_eq!(pair[0].final_state.as_ref().unwrap(), &initial_state(&pair[1].problem));
        }
        assert!(verify_against_original(&d, &p, &run).is_valid());
        assert!(run.concat_plan.len() >= direct_len(&d, &p));
        let end = simulate(&d, &p, &run.concat_plan).unwrap();
        assert!(goal_holds(&end, &p.goal));
    }

    #[test]
    fn omitting_final_cleaning_is_goal_unsatisfied() {
        let (d, p) = dp();
        let g = seq("(floor_clean kitchen) (mop_clean mop) (floor_clean bath)");
        let run = autoregressive_solve(&ForwardSearchPlanner, &d, &p, &g, &SearchConfig::default());
        assert!(run.is_solved());
        let r = verify_against_original(&d, &p, &run);
        assert_eq!(r.reason, Some(InvalidReason::GoalUnsatisfied));
    }

    #[test]
    fn unsolvable_subproblem_is_reported_with_index() {
        let (d, p) = dp();
        // the sink cannot be moved, so it never reaches the kitchen
        let g = seq("(floor_clean kitchen) (item_at sink kitchen)");
        let run = autoregressive_solve(&ForwardSearchPlanner, &d, &p, &g, &SearchConfig::default());
        assert_eq!(
            run.status,
            RunStatus::Failed {
                index: 1,
                failure: SubFailure::Unsolvable
            }
        );
        assert_eq!(run.subs.len(), 2);
    }

    #[test]
    fn negative_subgoals_are_flagged() {
        let (d, p) = dp();
        let g = seq("(and (floor_clean kitchen) (not (mop_clean mop))) (mop_clean mop)");
        let run = autoregressive_solve(&ForwardSearchPlanner, &d, &p, &g, &SearchConfig::default());
        assert!(run.is_solved() && run.uses_negative_goals);
        let m = manifest(&d, &p, &run, false);
        assert_eq!(m["negative_subgoals"], json!(true));
        assert_eq!(m["sub_problems"].as_array().unwrap().len(), 2);
        assert!(m["sub_problems"][0].get("time_s").is_none());
        assert!(manifest(&d, &p, &run, true)["sub_problems"][0].get("time_s").is_some());
    }

    #[test]
    fn bad_sequences_are_rejected() {
        let (d, p) = dp();
        assert_eq!(SubGoalSequence::new(vec![], &d, &p).unwrap_err(), SubGoalError::Empty);
        assert!(matches!(
            SubGoalSequence::parse("(floor_clean attic)", &d, &p),
            Err(SubGoalError::Invalid { index: 0, .. })
        ));
        assert!(SubGoalSequence::parse("(floor_clean kitchen) (or", &d, &p).is_err());
        let s = seq("(floor_clean kitchen) (and (mop_clean mop) (floor_clean bath))");
        assert_eq!(SubGoalSequence::parse(&s.to_text(), &d, &p).unwrap(), s);
    }
}
