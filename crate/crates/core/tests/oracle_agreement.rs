//! Planner, heuristics and grounder checked against exhaustive BFS.

use proptest::prelude::*;
use sgtp_core::exec::validate;
use sgtp_core::ground::{ground, GroundTask};
use sgtp_core::pddl::{parse_domain, parse_problem, DomainAst, ProblemAst};
use sgtp_core::search::{hmax, lmcut, solve, BitState, HeuristicKind, SearchConfig};
use sgtp_oracle::{NaiveState, Oracle};

const FETCH: &str = "
(define (domain fetch)
    (:requirements :strips :typing :negative-preconditions)
    (:types agent room item)
    (:predicates
        (agent_at ?a - agent ?r - room)
        (neighbor ?r1 - room ?r2 - room)
        (item_at ?i - item ?r - room)
        (agent_has_item ?a - agent ?i - item)
        (agent_hand_free ?a - agent)
        (item_fragile ?i - item)
        (item_wrapped ?i - item))
    (:action go_to_room
        :parameters (?a - agent ?r1 - room ?r2 - room)
        :precondition (and (agent_at ?a ?r1) (neighbor ?r1 ?r2))
        :effect (and (agent_at ?a ?r2) (not (agent_at ?a ?r1))))
    (:action pick_item
        :parameters (?a - agent ?i - item ?r - room)
        :precondition (and (agent_at ?a ?r) (item_at ?i ?r) (agent_hand_free ?a))
        :effect (and (agent_has_item ?a ?i) (not (item_at ?i ?r)) (not (agent_hand_free ?a))))
    (:action place_item
        :parameters (?a - agent ?i - item ?r - room)
        :precondition (and (agent_at ?a ?r) (agent_has_item ?a ?i))
        :effect (and (item_at ?i ?r) (agent_hand_free ?a) (not (agent_has_item ?a ?i))))
    (:action wrap_item
        :parameters (?a - agent ?i - item)
        :precondition (and (agent_has_item ?a ?i) (item_fragile ?i) (not (item_wrapped ?i)))
        :effect (and (item_wrapped ?i))))";

fn fetch_problem(rooms: &[&str], edges: &[(&str, &str)], items: &[(&str, &str)], robot: &str, goal: &str) -> String {
    let mut init = format!("(agent_at robot {robot}) (agent_hand_free robot)");
    if items.iter().any(|(i, _)| *i == "vase") {
        init.push_str(" (item_fragile vase)");
    }
    for (a, b) in edges {
        init.push_str(&format!(" (neighbor {a} {b}) (neighbor {b} {a})"));
    }
    for (i, r) in items {
        init.push_str(&format!(" (item_at {i} {r})"));
    }
    let item_names: Vec<&str> = items.iter().map(|(i, _)| *i).collect();
    format!(
        "(define (problem p) (:domain fetch)
           (:objects robot - agent {} - item {} - room)
           (:init {init})
           (:goal {goal}))",
        item_names.join(" "),
        rooms.join(" ")
    )
}

fn instances() -> Vec<(DomainAst, ProblemAst)> {
    let d = parse_domain(FETCH).unwrap();
    let line = ["r1", "r2", "r3"];
    let line_edges = [("r1", "r2"), ("r2", "r3")];
    let ring = ["a", "b", "c", "e"];
    let ring_edges = [("a", "b"), ("b", "c"), ("c", "e"), ("e", "a")];
    let texts = [
        fetch_problem(&line, &line_edges, &[("box", "r1")], "r2", "(and (item_at box r2))"),
        fetch_problem(&line, &line_edges, &[("box", "r1")], "r2", "(and (item_at box r3))"),
        fetch_problem(
            &line,
            &line_edges,
            &[("box", "r1"), ("vase", "r3")],
            "r2",
            "(and (item_at box r3) (item_at vase r1))",
        ),
        fetch_problem(
            &line,
            &line_edges,
            &[("box", "r1"), ("vase", "r3")],
            "r1",
            "(and (item_wrapped vase) (item_at vase r3))",
        ),
        fetch_problem(
            &ring,
            &ring_edges,
            &[("box", "a"), ("vase", "c"), ("cup", "e")],
            "b",
            "(and (item_at box c) (item_at cup b))",
        ),
        fetch_problem(
            &ring,
            &ring_edges,
            &[("box", "a"), ("vase", "c")],
            "e",
            "(and (item_at vase a) (item_wrapped vase) (agent_at robot b))",
        ),
        fetch_problem(
            &ring,
            &ring_edges,
            &[("box", "a")],
            "a",
            "(and (item_at box a) (not (agent_at robot a)))",
        ),
    ];
    texts
        .iter()
        .map(|t| (d.clone(), parse_problem(t, &d).unwrap()))
        .collect()
}

fn to_bits(task: &GroundTask, oracle: &Oracle, problem: &ProblemAst, s: &NaiveState) -> BitState {
    let statics = problem.init.iter().filter(|a| oracle.state_from_atoms([*a]).is_empty());
    let ids = statics
        .chain(oracle.atoms_of(s).iter())
        .map(|a| task.facts.id(a).expect("reachable atom is indexed"))
        .collect::<Vec<_>>();
    BitState::from_facts(task.num_facts(), ids)
}

#[test]
fn astar_matches_bfs_optimum() {
    for (d, p) in instances() {
        let expected = Oracle::new(&d, &p).bfs(1_000_000).length();
        let task = ground(&d, &p).unwrap();
        for k in [HeuristicKind::Blind, HeuristicKind::Hmax, HeuristicKind::Lmcut] {
            let r = solve(&task, &SearchConfig::with_heuristic(k));
            assert_eq!(r.plan_len(), expected, "{} with {k:?}", p.goal);
        }
    }
}

#[test]
fn reachability_pruning_preserves_optimum() {
    // The oracle instantiates every type-consistent binding; the grounder
    // keeps only relaxed-reachable ones. Optima must agree.
    for (d, p) in instances() {
        let oracle = Oracle::new(&d, &p);
        let task = ground(&d, &p).unwrap();
        assert!(task.actions.len() <= oracle.actions.len());
        let r = solve(&task, &SearchConfig::with_heuristic(HeuristicKind::Blind));
        assert_eq!(r.plan_len(), oracle.bfs(1_000_000).length());
    }
}

#[test]
fn unreachable_goal_is_unsolvable() {
    let d = parse_domain(FETCH).unwrap();
    let text = fetch_problem(&["r1", "r2"], &[], &[("box", "r1")], "r2", "(and (item_at box r2))");
    let p = parse_problem(&text, &d).unwrap();
    assert_eq!(Oracle::new(&d, &p).bfs(1000), sgtp_oracle::Outcome::Unsolvable);
    let task = ground(&d, &p).unwrap();
    for k in [HeuristicKind::Blind, HeuristicKind::Hmax, HeuristicKind::Lmcut] {
        assert_eq!(
            solve(&task, &SearchConfig::with_heuristic(k)).status,
            sgtp_core::search::SearchStatus::Unsolvable
        );
    }
    let init = BitState::from_facts(task.num_facts(), task.init.iter().copied());
    assert_eq!((hmax(&task, &init), lmcut(&task, &init)), (None, None));
}

fn sample_space() -> Vec<(GroundTask, Oracle, ProblemAst, Vec<NaiveState>)> {
    instances()
        .into_iter()
        .map(|(d, p)| {
            let task = ground(&d, &p).unwrap();
            let oracle = Oracle::new(&d, &p);
            let states = oracle.reachable_states(100_000).unwrap();
            (task, oracle, p, states)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn heuristics_are_admissible_and_ordered(pick in any::<(prop::sample::Index, prop::sample::Index)>()) {
        thread_local! {
            static SPACE: Vec<(GroundTask, Oracle, ProblemAst, Vec<NaiveState>)> = sample_space();
        }
        SPACE.with(|space| {
            let (task, oracle, problem, states) = &space[pick.0.index(space.len())];
            let s = &states[pick.1.index(states.len())];
            let truth = oracle.bfs_from(s.clone(), 1_000_000).length();
            let bits = to_bits(task, oracle, problem, s);
            let hm = hmax(task, &bits);
            let lm = lmcut(task, &bits);
            match truth {
                None => {
                    // dead ends may still look solvable to the relaxation
                }
                Some(t) => {
                    prop_assert!(hm.is_some_and(|h| h as usize <= t));
                    prop_assert!(lm.is_some_and(|h| h as usize <= t));
                    prop_assert!(lm >= hm);
                    if t == 0 {
                        prop_assert_eq!(lm, Some(0));
                    }
                }
            }
            Ok(())
        })?;
    }
}

fn cluttered_problem(placement: &[usize], robot: usize, goal_room: usize) -> String {
    let rooms = ["a", "b", "c", "e"];
    let edges = [("a", "b"), ("b", "c"), ("c", "e"), ("b", "e")];
    let names = ["box", "cup", "pen", "mug", "hat"];
    let items: Vec<(&str, &str)> = names.iter().zip(placement).map(|(n, &r)| (*n, rooms[r])).collect();
    let goal = format!("(and (item_at box {}) (agent_hand_free robot))", rooms[goal_room]);
    fetch_problem(&rooms, &edges, &items, rooms[robot], &goal)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetry_reduction_keeps_optimum(
        placement in prop::collection::vec(0usize..4, 5),
        robot in 0usize..4,
        goal_room in 0usize..4,
    ) {
        let d = parse_domain(FETCH).unwrap();
        let p = parse_problem(&cluttered_problem(&placement, robot, goal_room), &d).unwrap();
        let expected = Oracle::new(&d, &p).bfs(1_000_000).length();
        let task = ground(&d, &p).unwrap();
        for k in [HeuristicKind::Blind, HeuristicKind::Lmcut] {
            let reduced = solve(&task, &SearchConfig::with_heuristic(k).symmetry(true));
            prop_assert_eq!(reduced.plan_len(), expected);
            let plan = reduced.plan.unwrap();
            prop_assert!(validate(&d, &p, &plan).is_valid());
        }
    }
}
