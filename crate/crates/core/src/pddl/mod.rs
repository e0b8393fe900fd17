//! Typed STRIPS subset with negative preconditions.
//!
//! Identifiers are case-insensitive and normalized to lower case. Supported
//! requirement flags are `:strips`, `:typing` and `:negative-preconditions`;
//! anything else is rejected with a source location.

mod ast;
mod error;
mod parser;
mod printer;
pub mod sexp;

pub use ast::*;
pub use error::{ErrorKind, Loc, PddlError};
pub use parser::{goal_from_sexp_or_wrapper, parse_domain, parse_goal, parse_problem};
pub use printer::{print_domain, print_goal, print_problem};

/// Returns a copy of `p0` whose init and goal are replaced. Every atom is
/// type-checked against `p0`'s objects.
pub fn replace_init_goal<I>(
    domain: &DomainAst,
    p0: &ProblemAst,
    init: I,
    goal: GoalFormula,
) -> Result<ProblemAst, PddlError>
where
    I: IntoIterator<Item = Atom>,
{
    let table = p0.object_types();
    let mut new_init: Vec<Atom> = Vec::new();
    for atom in init {
        check_ground_atom(domain, &table, &atom)?;
        if !new_init.contains(&atom) {
            new_init.push(atom);
        }
    }
    for lit in &goal.literals {
        check_ground_atom(domain, &table, &lit.atom)?;
    }
    Ok(ProblemAst {
        name: p0.name.clone(),
        domain_name: p0.domain_name.clone(),
        objects: p0.objects.clone(),
        init: new_init,
        goal,
    })
}

#[cfg(test)]
mod tests;
