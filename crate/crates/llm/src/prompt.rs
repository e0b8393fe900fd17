//! One-shot prompt templates for domain, pruning, problem and sub-goal
//! generation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use sgtp_core::pddl::{print_domain, print_goal, print_problem, DomainAst, GoalFormula, PredicateDecl, ProblemAst};
use sgtp_core::scene::{list_items, Item, SceneGraph};
use thiserror::Error;

use crate::request::Message;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt part `{0}` is empty")]
    EmptyPart(&'static str),
    #[error("example is incomplete: {0}")]
    IncompleteExample(&'static str),
    #[error("query natural-language text is empty")]
    EmptyQuery,
    #[error("item list is empty")]
    EmptyItemList,
    #[error("example keeps `{0}`, which is not in the example item list")]
    KeptNotListed(String),
    #[error("domain `{0}` declares no predicates")]
    NoPredicates(String),
    #[error("problem `{0}` has an empty goal")]
    EmptyGoal(String),
}

/// A prompt in three parts, rendered in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    role: String,
    example: String,
    instruction: String,
}

impl PromptTemplate {
    pub fn new(
        role: impl Into<String>,
        example: impl Into<String>,
        instruction: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let t = PromptTemplate {
            role: role.into(),
            example: example.into(),
            instruction: instruction.into(),
        };
        for (name, part) in [
            ("role", &t.role),
            ("example", &t.example),
            ("instruction", &t.instruction),
        ] {
            if part.trim().is_empty() {
                return Err(PromptError::EmptyPart(name));
            }
        }
        Ok(t)
    }

    pub fn role(&self) -> &str {
        &self.role
    }

    pub fn example(&self) -> &str {
        &self.example
    }

    pub fn instruction(&self) -> &str {
        &self.instruction
    }

    /// Role, example and instruction separated by blank lines.
    pub fn render(&self) -> String {
        format!("{}\n\n{}\n\n{}", self.role, self.example, self.instruction)
    }

    /// The role as system message; example and instruction as one user
    /// message.
    pub fn to_messages(&self) -> Vec<Message> {
        vec![
            Message::system(self.role.clone()),
            Message::user(format!("{}\n\n{}", self.example, self.instruction)),
        ]
    }
}

/// Natural-language action knowledge with its domain file.
#[derive(Debug, Clone)]
pub struct DomainExample {
    pub actions_nl: String,
    pub domain: DomainAst,
}

/// A scene, a goal, and the items relevant to that goal.
#[derive(Debug, Clone)]
pub struct PruningExample {
    pub scene: SceneGraph,
    pub goal_nl: String,
    pub kept: Vec<String>,
}

/// A scene and goal with the problem file written for them.
#[derive(Debug, Clone)]
pub struct ProblemExample {
    pub scene: SceneGraph,
    pub goal_nl: String,
    pub domain: DomainAst,
    pub problem: ProblemAst,
}

/// A problem and the sub-goal sequence its goal splits into.
#[derive(Debug, Clone)]
pub struct DecompositionExample {
    pub domain: DomainAst,
    pub problem: ProblemAst,
    pub subgoals_nl: Vec<String>,
    pub subgoals: Vec<GoalFormula>,
}

fn fenced(body: &str) -> String {
    format!("```pddl\n{}\n```", body.trim_end())
}

fn nonempty(text: &str) -> Result<&str, PromptError> {
    match text.trim() {
        "" => Err(PromptError::EmptyQuery),
        t => Ok(t),
    }
}

pub fn build_domain_prompt(example: &DomainExample, query_nl: &str) -> Result<PromptTemplate, PromptError> {
    if example.actions_nl.trim().is_empty() {
        return Err(PromptError::IncompleteExample("action knowledge text"));
    }
    if example.domain.actions.is_empty() {
        return Err(PromptError::IncompleteExample("domain without actions"));
    }
    let query = nonempty(query_nl)?;
    let role = "You are an excellent PDDL domain file generator. Given a description of action knowledge in natural language, you can generate a PDDL domain file.";
    let example_text = format!(
        "A robot in a household environment can perform the following actions with pre-conditions and effects:\n{}\n\nThe corresponding action definitions in a PDDL domain file look like:\n{}",
        example.actions_nl.trim(),
        fenced(&print_domain(&example.domain))
    );
    let instruction = format!(
        "A new domain includes the following new object types and actions:\n{query}\n\nPlease generate a corresponding new PDDL domain file. Reply with the complete domain file in a single ```pddl code block."
    );
    PromptTemplate::new(role, example_text, instruction)
}

fn item_line(item: &Item) -> String {
    let mut line = format!("- {} ({}) in {}", item.id, item.name, item.room);
    if !item.accessible {
        line.push_str(", not accessible");
    }
    if !item.states.is_empty() {
        let states: Vec<String> = item
            .states
            .iter()
            .map(|(k, v)| format!("{k}={}", serde_json::to_string(v).unwrap_or_default()))
            .collect();
        let _ = write!(line, ", states: {}", states.join(" "));
    }
    if !item.affordances.is_empty() {
        let affs: Vec<&str> = item.affordances.iter().map(String::as_str).collect();
        let _ = write!(line, ", affordances: {}", affs.join(" "));
    }
    line
}

fn item_block(items: &[&Item]) -> String {
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.iter().map(|i| item_line(i)).collect::<Vec<_>>().join("\n")
}

pub fn build_pruning_prompt(
    items: &[&Item],
    goal_nl: &str,
    example: &PruningExample,
) -> Result<PromptTemplate, PromptError> {
    if items.is_empty() {
        return Err(PromptError::EmptyItemList);
    }
    let goal = nonempty(goal_nl)?;
    let ex_items = list_items(&example.scene);
    if ex_items.is_empty() || example.goal_nl.trim().is_empty() {
        return Err(PromptError::IncompleteExample("item list and goal"));
    }
    let listed: BTreeSet<&str> = ex_items.iter().map(|i| i.id.as_str()).collect();
    if let Some(k) = example.kept.iter().find(|k| !listed.contains(k.as_str())) {
        return Err(PromptError::KeptNotListed(k.clone()));
    }
    let role = "You are an excellent assistant in selecting relevant items. Given a list of items in a scene and a goal description, you can select the items needed to accomplish the goal.";
    let mut kept = example.kept.clone();
    kept.sort();
    let example_text = format!(
        "Here is an example list of items from a scene:\n{}\n\nGiven the goal: {}\nthe relevant items are:\n```\n{}\n```",
        item_block(&ex_items),
        example.goal_nl.trim(),
        kept.join("\n")
    );
    let instruction = format!(
        "Now given the following list of items:\n{}\n\nand the goal: {goal}\nplease select the relevant items. Reply with their ids, one per line, in a single code block.",
        item_block(items)
    );
    PromptTemplate::new(role, example_text, instruction)
}

fn predicate_decls(d: &DomainAst) -> String {
    d.predicates.iter().map(predicate_line).collect::<Vec<_>>().join("\n")
}

fn predicate_line(p: &PredicateDecl) -> String {
    let params: Vec<String> = p.params.iter().map(|t| format!("{} - {}", t.name, t.ty)).collect();
    if params.is_empty() {
        format!("({})", p.name)
    } else {
        format!("({} {})", p.name, params.join(" "))
    }
}

pub fn build_problem_prompt(
    sg: &SceneGraph,
    goal_nl: &str,
    d: &DomainAst,
    example: &ProblemExample,
) -> Result<PromptTemplate, PromptError> {
    if d.predicates.is_empty() {
        return Err(PromptError::NoPredicates(d.name.clone()));
    }
    let goal = nonempty(goal_nl)?;
    if example.goal_nl.trim().is_empty() || example.problem.goal.is_empty() {
        return Err(PromptError::IncompleteExample("goal description and problem"));
    }
    let role = "You are an excellent PDDL problem file generator. Given a scene graph representation and a goal description, you can generate a PDDL problem file.";
    let example_text = format!(
        "A scene graph represents a scene in a hierarchical way as a nested document of floors, rooms and items.\nAn example looks like:\n```json\n{}\n```\n\nGiven the goal description: {}\nand using the predicates defined in the example domain:\n{}\na corresponding PDDL problem file looks like:\n{}",
        example.scene.to_json(),
        example.goal_nl.trim(),
        fenced(&predicate_decls(&example.domain)),
        fenced(&print_problem(&example.problem))
    );
    let instruction = format!(
        "Now given a new scene graph:\n```json\n{}\n```\n\nthe goal description: {goal}\nand using the object types and predicates in the domain generated previously:\n{}\nplease generate a new PDDL problem file for domain `{}`. Reply with the complete problem file in a single ```pddl code block.",
        sg.to_json(),
        fenced(&type_and_predicate_decls(d)),
        d.name
    );
    PromptTemplate::new(role, example_text, instruction)
}

fn type_and_predicate_decls(d: &DomainAst) -> String {
    let types: Vec<String> = d.types.iter().map(|t| format!("{} - {}", t.name, t.parent)).collect();
    format!("(:types {})\n(:predicates\n{})", types.join(" "), predicate_decls(d))
}

pub fn build_decomposition_prompt(
    p: &ProblemAst,
    d: &DomainAst,
    example: &DecompositionExample,
) -> Result<PromptTemplate, PromptError> {
    if p.goal.is_empty() {
        return Err(PromptError::EmptyGoal(p.name.clone()));
    }
    if example.subgoals.is_empty() || example.subgoals.len() != example.subgoals_nl.len() {
        return Err(PromptError::IncompleteExample("one natural-language line per sub-goal"));
    }
    let role = "You are an excellent assistant in decomposing long-term goals. Given a PDDL problem file, you can decompose the long-term goal in a sequence of sub-goals.";
    let nl: Vec<String> = example
        .subgoals_nl
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.trim()))
        .collect();
    let formal: Vec<String> = example
        .subgoals
        .iter()
        .map(|g| print_goal(g, 0).trim_end().to_string())
        .collect();
    let example_text = format!(
        "Here is an example PDDL problem file:\n{}\n\nFor simplifying the planning problem, the long-term goal defined here can be decomposed into a sequence of sub-goals:\n{}\n\nUsing the predicates defined in the example domain:\n{}\nthe long-term goal can be decomposed into:\n{}",
        fenced(&print_problem(&example.problem)),
        nl.join("\n"),
        fenced(&print_domain(&example.domain)),
        fenced(&formal.join("\n"))
    );
    let instruction = format!(
        "Given the problem file generated previously:\n{}\n\nplease decompose the long-term goal into a sequence of sub-goals considering the predicates and actions from the domain generated previously:\n{}\nReply with the sub-goals in order, each as one (and ...) expression, in a single ```pddl code block.",
        fenced(&print_problem(p)),
        fenced(&print_domain(d))
    );
    PromptTemplate::new(role, example_text, instruction)
}
