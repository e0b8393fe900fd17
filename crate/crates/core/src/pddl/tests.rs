use proptest::prelude::*;

use super::*;

pub(crate) const MOP_DOMAIN: &str = "
(define (domain cleaning)
    (:requirements :strips :typing :negative-preconditions)
    (:types agent room item)
    (:predicates
        (agent_at ?a - agent ?r - room)
        (item_is_mop ?i - item)
        (item_pickable ?i - item)
        (agent_has_item ?a - agent ?i - item)
        (mop_clean ?i - item)
        (floor_clean ?r - room)
        (battery_full ?a - agent)
        (item_disposed ?i - item)
    )
    (:action mop_floor
        :parameters (?a - agent ?i - item ?r - room)
        :precondition (and
            (agent_at ?a ?r)
            (item_is_mop ?i)
            (item_pickable ?i)
            (agent_has_item ?a ?i)
            (mop_clean ?i)
            (not(floor_clean ?r))
        )
        :effect (and
            (floor_clean ?r)
            (not(mop_clean ?i))
            (not(battery_full ?a))
        )
    )
)";

const LISTING_GOAL_PROBLEM: &str = "
(define (problem house)
    (:domain cleaning)
    (:objects robot - agent
              kitchen living_room - room
              cola_can banana_peel mop - item)
    (:init (agent_at robot kitchen) (mop_clean mop))
    (:goal
        (and
            (item_disposed cola_can)
            (item_disposed banana_peel)
            (floor_clean living_room)
            (floor_clean kitchen)
            (mop_clean mop)
        )
    )
)";

#[test]
fn mop_floor_action_shape() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    assert_eq!(d.actions.len(), 1);
    let a = &d.actions[0];
    assert_eq!(a.name, "mop_floor");
    let params: Vec<(&str, &str)> = a.params.iter().map(|p| (p.name.as_str(), p.ty.as_str())).collect();
    assert_eq!(params, [("?a", "agent"), ("?i", "item"), ("?r", "room")]);
    assert_eq!(a.precondition.len(), 6);
    assert_eq!(a.precondition.iter().filter(|l| !l.positive).count(), 1);
    assert_eq!(a.precondition[5], Literal::neg(Atom::new("floor_clean", ["?r"])));
    assert_eq!(a.add_effects, [Atom::new("floor_clean", ["?r"])]);
    assert_eq!(
        a.del_effects,
        [Atom::new("mop_clean", ["?i"]), Atom::new("battery_full", ["?a"])]
    );
}

#[test]
fn domain_without_actions_is_valid() {
    let d = parse_domain("(define (domain empty) (:requirements :strips) (:predicates (p)))").unwrap();
    assert!(d.actions.is_empty());
    assert_eq!(d.predicates.len(), 1);
}

#[test]
fn undeclared_predicate_is_named() {
    let text = MOP_DOMAIN.replace("(mop_clean ?i)\n            (not", "(mop_is_wet ?i)\n            (not");
    let e = parse_domain(&text).unwrap_err();
    assert_eq!(e.kind, ErrorKind::UndeclaredPredicate("mop_is_wet".into()));
    assert!(e.loc.is_some());
}

#[test]
fn unsupported_requirements_and_constructs_are_rejected() {
    let e = parse_domain("(define (domain x) (:requirements :strips :numeric-fluents))").unwrap_err();
    assert_eq!(e.kind, ErrorKind::UnsupportedRequirement(":numeric-fluents".into()));
    let e = parse_domain(
        "(define (domain x) (:predicates (p ?x) (q ?x))
           (:action a :parameters (?x) :precondition (or (p ?x) (q ?x)) :effect (p ?x)))",
    )
    .unwrap_err();
    assert!(matches!(e.kind, ErrorKind::Unsupported(_)));
    let e = parse_domain(
        "(define (domain x) (:predicates (p ?x))
           (:action a :parameters (?x) :precondition (and) :effect (when (p ?x) (p ?x))))",
    )
    .unwrap_err();
    assert!(matches!(e.kind, ErrorKind::Unsupported(_)));
}

#[test]
fn conflicting_effects_are_rejected() {
    let e = parse_domain(
        "(define (domain x) (:predicates (p ?x))
           (:action a :parameters (?x) :precondition (and) :effect (and (p ?x) (not (p ?x)))))",
    )
    .unwrap_err();
    assert!(matches!(e.kind, ErrorKind::EffectConflict { .. }));
}

#[test]
fn identifiers_are_lowercased() {
    let d = parse_domain("(DEFINE (DOMAIN Mixed) (:PREDICATES (Holds ?X)))").unwrap();
    assert_eq!(d.name, "mixed");
    assert_eq!(d.predicates[0].name, "holds");
    assert_eq!(d.predicates[0].params[0].name, "?x");
}

#[test]
fn listing_goal_has_five_conjuncts() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let p = parse_problem(LISTING_GOAL_PROBLEM, &d).unwrap();
    let expected = [
        Atom::new("item_disposed", ["cola_can"]),
        Atom::new("item_disposed", ["banana_peel"]),
        Atom::new("floor_clean", ["living_room"]),
        Atom::new("floor_clean", ["kitchen"]),
        Atom::new("mop_clean", ["mop"]),
    ];
    assert_eq!(p.goal.literals, expected.map(Literal::pos));
}

#[test]
fn vacuous_problem_parses() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let p = parse_problem(
        "(define (problem v) (:domain cleaning) (:objects) (:init) (:goal (and)))",
        &d,
    )
    .unwrap();
    assert!(p.init.is_empty() && p.goal.is_empty());
}

#[test]
fn goal_over_missing_object_is_undeclared_item() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let text = LISTING_GOAL_PROBLEM.replace("(mop_clean mop)\n        )", "(item_disposed plate)\n        )");
    let e = parse_problem(&text, &d).unwrap_err();
    assert_eq!(e.kind, ErrorKind::UndeclaredItem("plate".into()));
    assert!(e.is_undeclared_item());
}

#[test]
fn object_of_undeclared_type_is_rejected() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let e = parse_problem(
        "(define (problem v) (:domain cleaning) (:objects x - gadget) (:init) (:goal (and)))",
        &d,
    )
    .unwrap_err();
    assert_eq!(e.kind, ErrorKind::UndeclaredType("gadget".into()));
}

#[test]
fn wrong_domain_and_arity_are_rejected() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let e = parse_problem(
        "(define (problem v) (:domain other) (:objects) (:init) (:goal (and)))",
        &d,
    )
    .unwrap_err();
    assert!(matches!(e.kind, ErrorKind::DomainMismatch { .. }));
    let e = parse_problem(
        "(define (problem v) (:domain cleaning) (:objects r - room) (:init (floor_clean r r)) (:goal (and)))",
        &d,
    )
    .unwrap_err();
    assert!(matches!(e.kind, ErrorKind::ArityMismatch { .. }));
    let e = parse_problem(
        "(define (problem v) (:domain cleaning) (:objects r - room) (:init (mop_clean r)) (:goal (and)))",
        &d,
    )
    .unwrap_err();
    assert!(matches!(e.kind, ErrorKind::TypeMismatch { .. }));
}

#[test]
fn printer_matches_golden_layout() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let text = print_domain(&d);
    assert!(text.contains(
        "    (:action mop_floor
        :parameters (?a - agent ?i - item ?r - room)
        :precondition (and
            (agent_at ?a ?r)
            (item_is_mop ?i)
            (item_pickable ?i)
            (agent_has_item ?a ?i)
            (mop_clean ?i)
            (not (floor_clean ?r))
        )
        :effect (and
            (floor_clean ?r)
            (not (mop_clean ?i))
            (not (battery_full ?a))
        )
    )
"
    ));
    let p = parse_problem(LISTING_GOAL_PROBLEM, &d).unwrap();
    assert!(print_problem(&p).contains(
        "    (:goal
        (and
            (item_disposed cola_can)
            (item_disposed banana_peel)
            (floor_clean living_room)
            (floor_clean kitchen)
            (mop_clean mop)
        )
    )
"
    ));
}

#[test]
fn roundtrip_is_a_fixpoint() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let once = print_domain(&d);
    let d2 = parse_domain(&once).unwrap();
    assert_eq!(d, d2);
    assert_eq!(once, print_domain(&d2));
    let p = parse_problem(LISTING_GOAL_PROBLEM, &d).unwrap();
    let p2 = parse_problem(&print_problem(&p), &d2).unwrap();
    assert_eq!(p, p2);
    assert_eq!(print_problem(&p), print_problem(&p2));
}

#[test]
fn replace_init_goal_cases() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let p0 = parse_problem(LISTING_GOAL_PROBLEM, &d).unwrap();
    let same = replace_init_goal(&d, &p0, p0.init.clone(), p0.goal.clone()).unwrap();
    assert_eq!(same, p0);

    let g1 = GoalFormula::new(vec![Literal::pos(Atom::new("item_disposed", ["cola_can"]))]);
    let p1 = replace_init_goal(&d, &p0, p0.init.clone(), g1.clone()).unwrap();
    assert_eq!(p1.goal, g1);
    assert_eq!(p1.init, p0.init);
    assert_eq!(p1.objects, p0.objects);
    assert_eq!(p0.goal.len(), 5);

    let bad = vec![Atom::new("agent_at", ["robot", "garage"])];
    let e = replace_init_goal(&d, &p0, bad, g1).unwrap_err();
    assert_eq!(e.kind, ErrorKind::UndeclaredItem("garage".into()));
}

#[test]
fn parse_goal_accepts_wrappers() {
    let d = parse_domain(MOP_DOMAIN).unwrap();
    let p = parse_problem(LISTING_GOAL_PROBLEM, &d).unwrap();
    let g = parse_goal("(:goal (and (mop_clean mop) (not (floor_clean kitchen))))", &d, &p).unwrap();
    assert_eq!(g.len(), 2);
    assert!(g.has_negative());
    let g = parse_goal("(mop_clean mop)", &d, &p).unwrap();
    assert_eq!(g.len(), 1);
}

#[test]
fn subtypes_are_resolved() {
    let d = parse_domain(
        "(define (domain t) (:requirements :typing) (:types item room - object mop - item)
           (:predicates (held ?i - item)))",
    )
    .unwrap();
    assert!(d.is_subtype("mop", "item"));
    assert!(d.is_subtype("mop", "object"));
    assert!(!d.is_subtype("item", "mop"));
    let p = parse_problem(
        "(define (problem t) (:domain t) (:objects m - mop r - room) (:init (held m)) (:goal (and)))",
        &d,
    )
    .unwrap();
    assert_eq!(p.objects_of_type(&d, "item").collect::<Vec<_>>(), ["m"]);
}

// --- properties ---------------------------------------------------------

const PREDS: [(&str, usize); 4] = [("p", 1), ("q", 2), ("r", 1), ("s", 0)];

fn arb_atom(nvars: usize) -> impl Strategy<Value = Atom> {
    (0..PREDS.len(), prop::collection::vec(0..nvars, 2)).prop_map(|(pi, vars)| {
        let (name, arity) = PREDS[pi];
        Atom::new(name, vars[..arity].iter().map(|v| format!("?v{v}")))
    })
}

fn arb_schema(idx: usize) -> impl Strategy<Value = ActionSchema> {
    (
        1usize..4,
        prop::collection::vec((arb_atom(3), any::<bool>()), 0..5),
        prop::collection::vec((arb_atom(3), any::<bool>()), 0..5),
    )
        .prop_map(move |(nvars, pre, eff)| {
            let clamp = |a: Atom| Atom {
                predicate: a.predicate,
                args: a
                    .args
                    .into_iter()
                    .map(|v| {
                        let k: usize = v[2..].parse().unwrap();
                        format!("?v{}", k % nvars)
                    })
                    .collect(),
            };
            let mut precondition: Vec<Literal> = Vec::new();
            for (a, pos) in pre {
                let l = Literal {
                    atom: clamp(a),
                    positive: pos,
                };
                if !precondition.contains(&l) {
                    precondition.push(l);
                }
            }
            let mut add_effects: Vec<Atom> = Vec::new();
            let mut del_effects: Vec<Atom> = Vec::new();
            for (a, pos) in eff {
                let a = clamp(a);
                if add_effects.contains(&a) || del_effects.contains(&a) {
                    continue;
                }
                if pos {
                    add_effects.push(a);
                } else {
                    del_effects.push(a);
                }
            }
            ActionSchema {
                name: format!("act{idx}"),
                params: (0..nvars).map(|v| TypedName::new(format!("?v{v}"), "thing")).collect(),
                precondition,
                add_effects,
                del_effects,
            }
        })
}

fn arb_domain() -> impl Strategy<Value = DomainAst> {
    prop::collection::vec(0..1usize, 0..4)
        .prop_flat_map(|v| {
            let n = v.len();
            (0..n).map(arb_schema).collect::<Vec<_>>()
        })
        .prop_map(|actions| DomainAst {
            name: "random".into(),
            requirements: vec![
                Requirement::Strips,
                Requirement::Typing,
                Requirement::NegativePreconditions,
            ],
            types: vec![TypeDecl {
                name: "thing".into(),
                parent: OBJECT_TYPE.into(),
            }],
            predicates: PREDS
                .iter()
                .map(|(n, k)| PredicateDecl {
                    name: n.to_string(),
                    params: (0..*k).map(|i| TypedName::new(format!("?x{i}"), "thing")).collect(),
                })
                .collect(),
            actions,
        })
}

proptest! {
    #[test]
    fn printed_domains_reparse_identically(d in arb_domain()) {
        let text = print_domain(&d);
        let back = parse_domain(&text).unwrap();
        for a in &back.actions {
            prop_assert!(a.add_effects.iter().all(|x| !a.del_effects.contains(x)));
        }
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(print_domain(&back), text);
    }

    #[test]
    fn undeclared_item_iff_missing_object(
        declared in prop::collection::btree_set(0..4usize, 0..4),
        init_objs in prop::collection::vec(0..4usize, 0..3),
        goal_objs in prop::collection::vec(0..4usize, 0..3),
    ) {
        let d = parse_domain(
            "(define (domain u) (:requirements :typing) (:types thing) (:predicates (p ?x - thing)))",
        ).unwrap();
        let objs: Vec<String> = declared.iter().map(|i| format!("o{i}")).collect();
        let init: Vec<String> = init_objs.iter().map(|i| format!("(p o{i})")).collect();
        let goal: Vec<String> = goal_objs.iter().map(|i| format!("(p o{i})")).collect();
        let text = format!(
            "(define (problem u) (:domain u) (:objects {} - thing) (:init {}) (:goal (and {})))",
            objs.join(" "), init.join(" "), goal.join(" "),
        );
        let text = if objs.is_empty() { text.replace(" - thing)", ")") } else { text };
        let missing = init_objs.iter().chain(&goal_objs).any(|i| !declared.contains(i));
        match parse_problem(&text, &d) {
            Ok(_) => prop_assert!(!missing),
            Err(e) => {
                prop_assert!(missing);
                prop_assert!(e.is_undeclared_item());
            }
        }
    }
}
