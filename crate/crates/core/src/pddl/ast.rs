use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::{ErrorKind, PddlError};

/// Root of every type forest.
pub const OBJECT_TYPE: &str = "object";

/// A predicate applied to arguments. Arguments are either object names or
/// `?`-prefixed variables inside action schemas.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<P, I, S>(predicate: P, args: I) -> Self
    where
        P: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Atom {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|a| !a.starts_with('?'))
    }

    /// Replaces variables using `binding`; unbound names are kept.
    pub fn substitute(&self, binding: &BTreeMap<&str, &str>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|a| binding.get(a.as_str()).map_or_else(|| a.clone(), |v| v.to_string()))
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, positive: false }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Requirement {
    Strips,
    Typing,
    NegativePreconditions,
}

impl Requirement {
    pub fn keyword(self) -> &'static str {
        match self {
            Requirement::Strips => ":strips",
            Requirement::Typing => ":typing",
            Requirement::NegativePreconditions => ":negative-preconditions",
        }
    }

    pub fn from_keyword(kw: &str) -> Option<Self> {
        match kw {
            ":strips" => Some(Requirement::Strips),
            ":typing" => Some(Requirement::Typing),
            ":negative-preconditions" => Some(Requirement::NegativePreconditions),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

/// A name with its declared type: action parameters, predicate parameters
/// and problem objects all use this shape.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

impl TypedName {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedName {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Vec<Literal>,
    pub add_effects: Vec<Atom>,
    pub del_effects: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainAst {
    pub name: String,
    pub requirements: Vec<Requirement>,
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

impl DomainAst {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        name == OBJECT_TYPE || self.types.iter().any(|t| t.name == name)
    }

    fn parent_of(&self, name: &str) -> Option<&str> {
        self.types.iter().find(|t| t.name == name).map(|t| t.parent.as_str())
    }

    /// Reflexive-transitive subtype test over the declared forest.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == OBJECT_TYPE || sub == sup {
            return true;
        }
        let mut cur = sub;
        // Bounded walk guards against cyclic declarations.
        for _ in 0..=self.types.len() {
            match self.parent_of(cur) {
                Some(p) if p == sup => return true,
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    /// Predicates that never occur in any action effect.
    pub fn static_predicates(&self) -> BTreeSet<&str> {
        let touched: BTreeSet<&str> = self
            .actions
            .iter()
            .flat_map(|a| a.add_effects.iter().chain(&a.del_effects))
            .map(|a| a.predicate.as_str())
            .collect();
        self.predicates
            .iter()
            .map(|p| p.name.as_str())
            .filter(|p| !touched.contains(p))
            .collect()
    }
}

/// Conjunction of ground literals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoalFormula {
    pub literals: Vec<Literal>,
}

impl GoalFormula {
    pub fn new(literals: Vec<Literal>) -> Self {
        GoalFormula { literals }
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn positive(&self) -> impl Iterator<Item = &Atom> {
        self.literals.iter().filter(|l| l.positive).map(|l| &l.atom)
    }

    pub fn negative(&self) -> impl Iterator<Item = &Atom> {
        self.literals.iter().filter(|l| !l.positive).map(|l| &l.atom)
    }

    pub fn has_negative(&self) -> bool {
        self.literals.iter().any(|l| !l.positive)
    }
}

impl fmt::Display for GoalFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(and")?;
        for l in &self.literals {
            write!(f, " {l}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemAst {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<Atom>,
    pub goal: GoalFormula,
}

impl ProblemAst {
    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects.iter().find(|o| o.name == name).map(|o| o.ty.as_str())
    }

    pub fn object_types(&self) -> BTreeMap<&str, &str> {
        self.objects.iter().map(|o| (o.name.as_str(), o.ty.as_str())).collect()
    }

    /// Objects whose declared type is `ty` or one of its subtypes, in
    /// declaration order.
    pub fn objects_of_type<'a>(&'a self, domain: &'a DomainAst, ty: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(move |o| domain.is_subtype(&o.ty, ty))
            .map(|o| o.name.as_str())
    }
}

/// Checks a ground atom against the domain signature and an object table.
pub fn check_ground_atom(domain: &DomainAst, objects: &BTreeMap<&str, &str>, atom: &Atom) -> Result<(), PddlError> {
    let decl = domain
        .predicate(&atom.predicate)
        .ok_or_else(|| ErrorKind::UndeclaredPredicate(atom.predicate.clone()))?;
    if decl.params.len() != atom.args.len() {
        return Err(ErrorKind::ArityMismatch {
            predicate: atom.predicate.clone(),
            expected: decl.params.len(),
            found: atom.args.len(),
        }
        .into());
    }
    for (arg, param) in atom.args.iter().zip(&decl.params) {
        let ty = objects
            .get(arg.as_str())
            .ok_or_else(|| ErrorKind::UndeclaredItem(arg.clone()))?;
        if !domain.is_subtype(ty, &param.ty) {
            return Err(ErrorKind::TypeMismatch {
                name: arg.clone(),
                expected: param.ty.clone(),
                found: ty.to_string(),
            }
            .into());
        }
    }
    Ok(())
}
