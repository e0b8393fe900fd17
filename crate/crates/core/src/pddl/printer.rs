//! Canonical printer. Output is bit-stable: 4-space indentation, one
//! literal per line inside conjunctions, declaration order preserved.

use std::fmt::Write;

use super::ast::*;

const IND: &str = "    ";

/// `a b - t c - u`, grouping consecutive names of the same type.
fn typed_names<'a>(items: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut out = String::new();
    let mut group: Vec<&str> = Vec::new();
    let mut cur_ty: Option<&str> = None;
    let flush = |out: &mut String, group: &mut Vec<&str>, ty: Option<&str>| {
        if let Some(ty) = ty {
            if !out.is_empty() {
                out.push(' ');
            }
            let _ = write!(out, "{} - {ty}", group.join(" "));
            group.clear();
        }
    };
    for (name, ty) in items {
        if cur_ty != Some(ty) {
            flush(&mut out, &mut group, cur_ty);
            cur_ty = Some(ty);
        }
        group.push(name);
    }
    flush(&mut out, &mut group, cur_ty);
    out
}

fn params(ps: &[TypedName]) -> String {
    typed_names(ps.iter().map(|p| (p.name.as_str(), p.ty.as_str())))
}

fn conjunction(out: &mut String, depth: usize, lits: impl IntoIterator<Item = String>) {
    let lits: Vec<String> = lits.into_iter().collect();
    if lits.is_empty() {
        out.push_str("(and)\n");
        return;
    }
    out.push_str("(and\n");
    let inner = IND.repeat(depth + 1);
    for l in lits {
        let _ = writeln!(out, "{inner}{l}");
    }
    let _ = writeln!(out, "{})", IND.repeat(depth));
}

pub fn print_domain(d: &DomainAst) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let reqs: Vec<&str> = d.requirements.iter().map(|r| r.keyword()).collect();
        let _ = writeln!(out, "{IND}(:requirements {})", reqs.join(" "));
    }
    if !d.types.is_empty() {
        let _ = writeln!(out, "{IND}(:types");
        // One line per parent run keeps long type lists readable.
        let mut start = 0;
        while start < d.types.len() {
            let parent = &d.types[start].parent;
            let end = d.types[start..]
                .iter()
                .position(|t| &t.parent != parent)
                .map_or(d.types.len(), |k| start + k);
            let names: Vec<&str> = d.types[start..end].iter().map(|t| t.name.as_str()).collect();
            let _ = writeln!(out, "{IND}{IND}{} - {parent}", names.join(" "));
            start = end;
        }
        let _ = writeln!(out, "{IND})");
    }
    if !d.predicates.is_empty() {
        let _ = writeln!(out, "{IND}(:predicates");
        for p in &d.predicates {
            if p.params.is_empty() {
                let _ = writeln!(out, "{IND}{IND}({})", p.name);
            } else {
                let _ = writeln!(out, "{IND}{IND}({} {})", p.name, params(&p.params));
            }
        }
        let _ = writeln!(out, "{IND})");
    }
    for a in &d.actions {
        let _ = writeln!(out, "{IND}(:action {}", a.name);
        let _ = writeln!(out, "{IND}{IND}:parameters ({})", params(&a.params));
        let _ = write!(out, "{IND}{IND}:precondition ");
        conjunction(&mut out, 2, a.precondition.iter().map(ToString::to_string));
        let _ = write!(out, "{IND}{IND}:effect ");
        let effects = a
            .add_effects
            .iter()
            .map(|e| Literal::pos(e.clone()))
            .chain(a.del_effects.iter().map(|e| Literal::neg(e.clone())));
        conjunction(&mut out, 2, effects.map(|l| l.to_string()));
        let _ = writeln!(out, "{IND})");
    }
    out.push_str(")\n");
    out
}

pub fn print_goal(g: &GoalFormula, depth: usize) -> String {
    let mut out = String::new();
    conjunction(&mut out, depth, g.literals.iter().map(ToString::to_string));
    out
}

pub fn print_problem(p: &ProblemAst) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "{IND}(:domain {})", p.domain_name);
    let _ = writeln!(out, "{IND}(:objects");
    let mut start = 0;
    while start < p.objects.len() {
        let ty = &p.objects[start].ty;
        let end = p.objects[start..]
            .iter()
            .position(|o| &o.ty != ty)
            .map_or(p.objects.len(), |k| start + k);
        let names: Vec<&str> = p.objects[start..end].iter().map(|o| o.name.as_str()).collect();
        let _ = writeln!(out, "{IND}{IND}{} - {ty}", names.join(" "));
        start = end;
    }
    let _ = writeln!(out, "{IND})");
    let _ = writeln!(out, "{IND}(:init");
    for a in &p.init {
        let _ = writeln!(out, "{IND}{IND}{a}");
    }
    let _ = writeln!(out, "{IND})");
    let _ = writeln!(out, "{IND}(:goal");
    let _ = write!(out, "{IND}{IND}{}", print_goal(&p.goal, 2));
    let _ = writeln!(out, "{IND})");
    out.push_str(")\n");
    out
}
