use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::error::{ErrorKind, Loc, PddlError};
use super::sexp::{read_all, Sexp};

type Result<T> = std::result::Result<T, PddlError>;

const UNSUPPORTED_HEADS: &[&str] = &[
    "or",
    "imply",
    "exists",
    "forall",
    "when",
    "=",
    "increase",
    "decrease",
    "assign",
    "scale-up",
    "scale-down",
    "either",
    "at",
    "over",
    "preference",
];

fn syntax(msg: impl Into<String>, loc: Loc) -> PddlError {
    PddlError::at(ErrorKind::Syntax(msg.into()), loc)
}

fn symbol_at(s: &Sexp, what: &str) -> Result<String> {
    s.symbol()
        .map(str::to_string)
        .ok_or_else(|| syntax(format!("expected {what}"), s.loc()))
}

fn list_at<'a>(s: &'a Sexp, what: &str) -> Result<&'a [Sexp]> {
    s.list().ok_or_else(|| syntax(format!("expected {what}"), s.loc()))
}

/// Splits `(define (<kind> name) sections...)`.
fn open_define<'a>(top: &'a [Sexp], kind: &str) -> Result<(String, &'a [Sexp])> {
    let first = match top {
        [one] => one,
        [] => return Err(syntax("empty input", Loc { line: 1, col: 1 })),
        [_, extra, ..] => return Err(syntax("trailing input after definition", extra.loc())),
    };
    let items = list_at(first, "`(define ...)`")?;
    if first.head() != Some("define") {
        return Err(syntax("expected `define`", first.loc()));
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(format!("missing `({kind} ...)` header"), first.loc()))?;
    let h = list_at(header, "definition header")?;
    match h {
        [k, name] if k.symbol() == Some(kind) => Ok((symbol_at(name, "name")?, &items[2..])),
        _ => Err(syntax(format!("expected `({kind} <name>)`"), header.loc())),
    }
}

/// Parses `a b - t c - u d` into (name, type, loc) triples; untyped names
/// default to `object`.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String, Loc)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Loc)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let it = &items[i];
        match it.symbol() {
            Some("-") => {
                let ty = items
                    .get(i + 1)
                    .ok_or_else(|| syntax("missing type after `-`", it.loc()))?;
                if ty.head() == Some("either") {
                    return Err(PddlError::at(ErrorKind::Unsupported("either types".into()), ty.loc()));
                }
                let ty = symbol_at(ty, "type name")?;
                if pending.is_empty() {
                    return Err(syntax("type annotation without names", it.loc()));
                }
                out.extend(pending.drain(..).map(|(n, l)| (n, ty.clone(), l)));
                i += 2;
            }
            Some(name) => {
                pending.push((name.to_string(), it.loc()));
                i += 1;
            }
            None => return Err(syntax("expected a name", it.loc())),
        }
    }
    out.extend(pending.into_iter().map(|(n, l)| (n, OBJECT_TYPE.to_string(), l)));
    Ok(out)
}

fn parse_atom(s: &Sexp) -> Result<Atom> {
    let items = list_at(s, "an atom")?;
    let head = items
        .first()
        .and_then(Sexp::symbol)
        .ok_or_else(|| syntax("expected a predicate name", s.loc()))?;
    if UNSUPPORTED_HEADS.contains(&head) || head == "and" || head == "not" {
        return Err(PddlError::at(ErrorKind::Unsupported(format!("`{head}` here")), s.loc()));
    }
    if head.starts_with(':') || head.starts_with('?') {
        return Err(syntax(format!("`{head}` is not a predicate name"), s.loc()));
    }
    let args = items[1..]
        .iter()
        .map(|a| symbol_at(a, "an argument"))
        .collect::<Result<Vec<_>>>()?;
    Ok(Atom {
        predicate: head.to_string(),
        args,
    })
}

fn parse_literal(s: &Sexp) -> Result<Literal> {
    match s.head() {
        Some("not") => {
            let items = s.list().unwrap_or_default();
            match items {
                [_, inner] => Ok(Literal::neg(parse_atom(inner)?)),
                _ => Err(syntax("`not` takes exactly one atom", s.loc())),
            }
        }
        Some(h) if UNSUPPORTED_HEADS.contains(&h) => Err(PddlError::at(
            ErrorKind::Unsupported(format!("`{h}` formulas")),
            s.loc(),
        )),
        _ => Ok(Literal::pos(parse_atom(s)?)),
    }
}

/// Flattens `(and ...)` (possibly nested) or a single literal.
fn parse_conjunction(s: &Sexp, out: &mut Vec<(Literal, Loc)>) -> Result<()> {
    if s.head() == Some("and") {
        for it in &s.list().unwrap_or_default()[1..] {
            parse_conjunction(it, out)?;
        }
        Ok(())
    } else if s.list().is_some_and(<[Sexp]>::is_empty) {
        // `()` is accepted as the empty conjunction.
        Ok(())
    } else {
        out.push((parse_literal(s)?, s.loc()));
        Ok(())
    }
}

fn parse_requirements(items: &[Sexp]) -> Result<Vec<Requirement>> {
    let mut reqs = Vec::new();
    for it in items {
        let kw = symbol_at(it, "a requirement flag")?;
        let r = Requirement::from_keyword(&kw)
            .ok_or_else(|| PddlError::at(ErrorKind::UnsupportedRequirement(kw.clone()), it.loc()))?;
        if !reqs.contains(&r) {
            reqs.push(r);
        }
    }
    Ok(reqs)
}

fn push_unique<T>(v: &mut Vec<T>, item: T)
where
    T: PartialEq,
{
    if !v.contains(&item) {
        v.push(item);
    }
}

/// Parses a domain file in the supported subset and checks it.
pub fn parse_domain(text: &str) -> Result<DomainAst> {
    let top = read_all(text)?;
    let (name, sections) = open_define(&top, "domain")?;
    let mut domain = DomainAst {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    let mut seen = BTreeSet::new();
    let mut type_locs = Vec::new();
    let mut pred_locs = Vec::new();
    let mut action_srcs = Vec::new();

    for sec in sections {
        let items = list_at(sec, "a domain section")?;
        let key = items
            .first()
            .and_then(Sexp::symbol)
            .ok_or_else(|| syntax("expected a section keyword", sec.loc()))?;
        if key != ":action" && !seen.insert(key.to_string()) {
            return Err(PddlError::at(
                ErrorKind::Duplicate {
                    what: "section",
                    name: key.to_string(),
                },
                sec.loc(),
            ));
        }
        match key {
            ":requirements" => domain.requirements = parse_requirements(&items[1..])?,
            ":types" => {
                for (name, parent, loc) in typed_list(&items[1..])? {
                    if name == OBJECT_TYPE {
                        continue;
                    }
                    if domain.types.iter().any(|t| t.name == name) {
                        return Err(PddlError::at(ErrorKind::Duplicate { what: "type", name }, loc));
                    }
                    type_locs.push(loc);
                    domain.types.push(TypeDecl { name, parent });
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let pl = list_at(p, "a predicate declaration")?;
                    let name = pl
                        .first()
                        .map(|s| symbol_at(s, "a predicate name"))
                        .transpose()?
                        .ok_or_else(|| syntax("empty predicate declaration", p.loc()))?;
                    if domain.predicates.iter().any(|q| q.name == name) {
                        return Err(PddlError::at(
                            ErrorKind::Duplicate {
                                what: "predicate",
                                name,
                            },
                            p.loc(),
                        ));
                    }
                    let params = typed_list(&pl[1..])?
                        .into_iter()
                        .map(|(n, t, _)| TypedName::new(n, t))
                        .collect();
                    pred_locs.push(p.loc());
                    domain.predicates.push(PredicateDecl { name, params });
                }
            }
            ":action" => action_srcs.push(sec),
            ":constants" | ":functions" | ":derived" | ":durative-action" | ":constraints" => {
                return Err(PddlError::at(
                    ErrorKind::Unsupported(format!("`{key}` section")),
                    sec.loc(),
                ));
            }
            other => return Err(syntax(format!("unknown domain section `{other}`"), sec.loc())),
        }
    }

    for (t, loc) in domain.types.iter().zip(&type_locs) {
        if !domain.has_type(&t.parent) {
            return Err(PddlError::at(ErrorKind::UndeclaredType(t.parent.clone()), *loc));
        }
    }
    for (p, loc) in domain.predicates.iter().zip(&pred_locs) {
        for param in &p.params {
            if !domain.has_type(&param.ty) {
                return Err(PddlError::at(ErrorKind::UndeclaredType(param.ty.clone()), *loc));
            }
        }
    }
    for src in action_srcs {
        let action = parse_action(src, &domain)?;
        if domain.action(&action.name).is_some() {
            return Err(PddlError::at(
                ErrorKind::Duplicate {
                    what: "action",
                    name: action.name,
                },
                src.loc(),
            ));
        }
        domain.actions.push(action);
    }
    Ok(domain)
}

fn check_schema_atom(domain: &DomainAst, params: &[TypedName], atom: &Atom, loc: Loc) -> Result<()> {
    let decl = domain
        .predicate(&atom.predicate)
        .ok_or_else(|| PddlError::at(ErrorKind::UndeclaredPredicate(atom.predicate.clone()), loc))?;
    if decl.params.len() != atom.args.len() {
        return Err(PddlError::at(
            ErrorKind::ArityMismatch {
                predicate: atom.predicate.clone(),
                expected: decl.params.len(),
                found: atom.args.len(),
            },
            loc,
        ));
    }
    for (arg, expected) in atom.args.iter().zip(&decl.params) {
        if !arg.starts_with('?') {
            return Err(PddlError::at(
                ErrorKind::Unsupported(format!("constant `{arg}` in an action body")),
                loc,
            ));
        }
        let param = params
            .iter()
            .find(|p| &p.name == arg)
            .ok_or_else(|| PddlError::at(ErrorKind::UndeclaredVariable(arg.clone()), loc))?;
        if !domain.is_subtype(&param.ty, &expected.ty) && !domain.is_subtype(&expected.ty, &param.ty) {
            return Err(PddlError::at(
                ErrorKind::TypeMismatch {
                    name: arg.clone(),
                    expected: expected.ty.clone(),
                    found: param.ty.clone(),
                },
                loc,
            ));
        }
    }
    Ok(())
}

fn parse_action(src: &Sexp, domain: &DomainAst) -> Result<ActionSchema> {
    let items = src.list().unwrap_or_default();
    let name = items
        .get(1)
        .map(|s| symbol_at(s, "an action name"))
        .transpose()?
        .ok_or_else(|| syntax("missing action name", src.loc()))?;
    let mut params = Vec::new();
    let mut pre = Vec::new();
    let mut eff = Vec::new();
    let mut seen = BTreeSet::new();
    let mut i = 2;
    while i < items.len() {
        let key = symbol_at(&items[i], "an action keyword")?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| syntax(format!("missing value for `{key}`"), items[i].loc()))?;
        if !seen.insert(key.clone()) {
            return Err(PddlError::at(
                ErrorKind::Duplicate {
                    what: "action field",
                    name: key,
                },
                items[i].loc(),
            ));
        }
        match key.as_str() {
            ":parameters" => {
                for (n, t, loc) in typed_list(list_at(value, "a parameter list")?)? {
                    if !n.starts_with('?') {
                        return Err(syntax(format!("parameter `{n}` must start with `?`"), loc));
                    }
                    if !domain.has_type(&t) {
                        return Err(PddlError::at(ErrorKind::UndeclaredType(t), loc));
                    }
                    if params.iter().any(|p: &TypedName| p.name == n) {
                        return Err(PddlError::at(
                            ErrorKind::Duplicate {
                                what: "parameter",
                                name: n,
                            },
                            loc,
                        ));
                    }
                    params.push(TypedName::new(n, t));
                }
            }
            ":precondition" => parse_conjunction(value, &mut pre)?,
            ":effect" => parse_conjunction(value, &mut eff)?,
            other => return Err(syntax(format!("unknown action field `{other}`"), items[i].loc())),
        }
        i += 2;
    }

    let mut precondition = Vec::new();
    for (lit, loc) in pre {
        check_schema_atom(domain, &params, &lit.atom, loc)?;
        push_unique(&mut precondition, lit);
    }
    let mut add_effects = Vec::new();
    let mut del_effects = Vec::new();
    for (lit, loc) in eff {
        check_schema_atom(domain, &params, &lit.atom, loc)?;
        if lit.positive {
            push_unique(&mut add_effects, lit.atom);
        } else {
            push_unique(&mut del_effects, lit.atom);
        }
    }
    if let Some(a) = add_effects.iter().find(|a| del_effects.contains(a)) {
        return Err(PddlError::at(
            ErrorKind::EffectConflict {
                action: name,
                atom: a.to_string(),
            },
            src.loc(),
        ));
    }
    Ok(ActionSchema {
        name,
        params,
        precondition,
        add_effects,
        del_effects,
    })
}

fn check_at(domain: &DomainAst, objects: &BTreeMap<&str, &str>, atom: &Atom, loc: Loc) -> Result<()> {
    check_ground_atom(domain, objects, atom).map_err(|e| PddlError::at(e.kind, loc))
}

/// Parses a problem file against an already parsed domain.
pub fn parse_problem(text: &str, domain: &DomainAst) -> Result<ProblemAst> {
    let top = read_all(text)?;
    let (name, sections) = open_define(&top, "problem")?;
    let mut domain_name = None;
    let mut objects: Vec<TypedName> = Vec::new();
    let mut init_src = Vec::new();
    let mut goal_src = None;
    let mut seen = BTreeSet::new();

    for sec in sections {
        let items = list_at(sec, "a problem section")?;
        let key = items
            .first()
            .and_then(Sexp::symbol)
            .ok_or_else(|| syntax("expected a section keyword", sec.loc()))?;
        if !seen.insert(key.to_string()) {
            return Err(PddlError::at(
                ErrorKind::Duplicate {
                    what: "section",
                    name: key.to_string(),
                },
                sec.loc(),
            ));
        }
        match key {
            ":domain" => match &items[1..] {
                [d] => domain_name = Some((symbol_at(d, "a domain name")?, d.loc())),
                _ => return Err(syntax("expected `(:domain <name>)`", sec.loc())),
            },
            ":requirements" => {
                parse_requirements(&items[1..])?;
            }
            ":objects" => {
                for (n, t, loc) in typed_list(&items[1..])? {
                    if !domain.has_type(&t) {
                        return Err(PddlError::at(ErrorKind::UndeclaredType(t), loc));
                    }
                    if objects.iter().any(|o| o.name == n) {
                        return Err(PddlError::at(
                            ErrorKind::Duplicate {
                                what: "object",
                                name: n,
                            },
                            loc,
                        ));
                    }
                    objects.push(TypedName::new(n, t));
                }
            }
            ":init" => {
                for a in &items[1..] {
                    if a.head() == Some("not") {
                        return Err(syntax("negative literals are not allowed in `:init`", a.loc()));
                    }
                    if a.head() == Some("=") {
                        return Err(PddlError::at(
                            ErrorKind::Unsupported("numeric initial values".into()),
                            a.loc(),
                        ));
                    }
                    init_src.push((parse_atom(a)?, a.loc()));
                }
            }
            ":goal" => match &items[1..] {
                [g] => goal_src = Some(g),
                _ => return Err(syntax("`:goal` takes exactly one formula", sec.loc())),
            },
            ":metric" | ":constraints" => {
                return Err(PddlError::at(
                    ErrorKind::Unsupported(format!("`{key}` section")),
                    sec.loc(),
                ));
            }
            other => return Err(syntax(format!("unknown problem section `{other}`"), sec.loc())),
        }
    }

    let (domain_name, dloc) = domain_name.ok_or_else(|| syntax("missing `(:domain ...)`", top[0].loc()))?;
    if domain_name != domain.name {
        return Err(PddlError::at(
            ErrorKind::DomainMismatch {
                expected: domain.name.clone(),
                found: domain_name,
            },
            dloc,
        ));
    }
    let table: BTreeMap<&str, &str> = objects.iter().map(|o| (o.name.as_str(), o.ty.as_str())).collect();
    let mut init = Vec::new();
    for (atom, loc) in init_src {
        check_at(domain, &table, &atom, loc)?;
        push_unique(&mut init, atom);
    }
    let goal_src = goal_src.ok_or_else(|| syntax("missing `(:goal ...)`", top[0].loc()))?;
    let goal = goal_from_sexp(goal_src, domain, &table)?;
    Ok(ProblemAst {
        name,
        domain_name,
        objects,
        init,
        goal,
    })
}

fn goal_from_sexp(s: &Sexp, domain: &DomainAst, table: &BTreeMap<&str, &str>) -> Result<GoalFormula> {
    let mut lits = Vec::new();
    parse_conjunction(s, &mut lits)?;
    let mut literals = Vec::new();
    for (lit, loc) in lits {
        check_at(domain, table, &lit.atom, loc)?;
        push_unique(&mut literals, lit);
    }
    Ok(GoalFormula { literals })
}

/// Parses a standalone goal formula: `(and ...)`, a single literal, or a
/// `(:goal ...)` wrapper, checked against the problem's objects.
pub fn parse_goal(text: &str, domain: &DomainAst, problem: &ProblemAst) -> Result<GoalFormula> {
    let top = read_all(text)?;
    let s = match top.as_slice() {
        [one] => one,
        [] => return Err(syntax("empty goal", Loc { line: 1, col: 1 })),
        [_, extra, ..] => return Err(syntax("trailing input after goal", extra.loc())),
    };
    goal_from_sexp_or_wrapper(s, domain, problem)
}

/// Like [`parse_goal`] for an already read expression.
pub fn goal_from_sexp_or_wrapper(s: &Sexp, domain: &DomainAst, problem: &ProblemAst) -> Result<GoalFormula> {
    let table = problem.object_types();
    let s = if s.head() == Some(":goal") {
        match s.list().unwrap_or_default() {
            [_, g] => g,
            _ => return Err(syntax("`:goal` takes exactly one formula", s.loc())),
        }
    } else {
        s
    };
    goal_from_sexp(s, domain, &table)
}
