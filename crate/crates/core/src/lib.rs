//! Core planning machinery for scene-graph driven task planning.
//!
//! The crate is layered bottom-up:
//!
//! * [`pddl`] parses and prints the typed STRIPS subset (with negative
//!   preconditions) used by every planning file in the toolkit.
//! * [`scene`] holds the floor/room/item scene graph, pruning, relevance
//!   analysis and the translation of scene topology into planning facts.
//! * [`ground`] instantiates action schemas into a fact-indexed task.
//! * [`search`] runs A* with blind, h-max or LM-cut heuristics.
//! * [`exec`] simulates and validates plans on lifted problems.
//! * [`decompose`] solves a sequence of sub-goals with state chaining.

pub mod decompose;
pub mod exec;
pub mod ground;
pub mod pddl;
pub mod scene;
pub mod search;

pub use exec::{Plan, PlanStep, State};
pub use pddl::{Atom, DomainAst, GoalFormula, Literal, PddlError, ProblemAst};
