//! Reference completions for every bundled instance, seeded faults, and
//! the fixture sets recorded from them.
//!
//! Completions are produced by walking the pipeline's own request builders
//! with reference answers, so the recorded digests are exactly the ones a
//! replay run asks for.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use sgtp_core::pddl::{print_domain, print_problem, Atom, ProblemAst};
use sgtp_llm::{CompletionRequest, FixtureStore, LlmError, Transport};
use thiserror::Error;

use crate::assets::{AssetError, DomainId, Instance};
use crate::pipeline::{BackendMode, FailureClass, Pipeline, Step, TrialConfig};

#[derive(Debug, Error)]
pub enum GoldenError {
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("reference answer rejected at {step:?}: {detail}")]
    Rejected { step: Step, detail: String },
}

/// A deliberate defect in one reference completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fault {
    /// Misspelled keyword in the domain file.
    DomainSyntax,
    /// The domain file lacks the last reference action.
    MissingAction,
    /// The pruning answer lists an id that is not in the scene.
    PruningUnknownItem,
    /// Misspelled keyword in the problem file.
    ProblemSyntax,
    /// A goal item is missing from the problem's objects.
    UndeclaredItem,
    /// The problem-generation completion was never recorded.
    MissingProblemFixture,
    /// The robot starts without a free hand, so nothing can be picked.
    UnreachableGoal,
    /// The decomposition answer is prose without expressions.
    DecompositionProse,
    /// A sub-goal asks for an item that an earlier sub-goal disposed of.
    DecompositionConflict,
    /// The last sub-goal is dropped.
    DecompositionIncomplete,
}

impl Fault {
    pub const ALL: [Fault; 10] = [
        Fault::DomainSyntax,
        Fault::MissingAction,
        Fault::PruningUnknownItem,
        Fault::ProblemSyntax,
        Fault::UndeclaredItem,
        Fault::MissingProblemFixture,
        Fault::UnreachableGoal,
        Fault::DecompositionProse,
        Fault::DecompositionConflict,
        Fault::DecompositionIncomplete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fault::DomainSyntax => "domain_syntax",
            Fault::MissingAction => "missing_action",
            Fault::PruningUnknownItem => "pruning_unknown_item",
            Fault::ProblemSyntax => "problem_syntax",
            Fault::UndeclaredItem => "undeclared_item",
            Fault::MissingProblemFixture => "missing_problem_fixture",
            Fault::UnreachableGoal => "unreachable_goal",
            Fault::DecompositionProse => "decomposition_prose",
            Fault::DecompositionConflict => "decomposition_conflict",
            Fault::DecompositionIncomplete => "decomposition_incomplete",
        }
    }
}

fn fenced(lang: &str, body: &str) -> String {
    format!("```{lang}\n{}\n```", body.trim_end())
}

fn domain_answer(inst: &Instance, fault: Option<Fault>) -> String {
    let text = match fault {
        Some(Fault::DomainSyntax) => inst.bundle.text.replacen(":precondition", ":precondtion", 1),
        Some(Fault::MissingAction) => {
            let mut d = inst.domain().clone();
            d.actions.pop();
            print_domain(&d)
        }
        _ => inst.bundle.text.clone(),
    };
    format!("Here is the domain file:\n\n{}", fenced("pddl", &text))
}

fn pruning_answer(inst: &Instance, fault: Option<Fault>) -> Result<String, AssetError> {
    let mut ids: Vec<String> = inst.relevant_items()?.into_iter().collect();
    if fault == Some(Fault::PruningUnknownItem) {
        ids.push("hoverboard".into());
    }
    Ok(format!("The relevant items are:\n\n{}", fenced("", &ids.join("\n"))))
}

fn first_goal_item(p: &ProblemAst) -> Option<String> {
    p.goal
        .literals
        .iter()
        .flat_map(|l| l.atom.args.iter())
        .find(|a| p.object_type(a) == Some("item"))
        .cloned()
}

fn problem_answer(problem: &ProblemAst, fault: Option<Fault>) -> String {
    let text = match fault {
        Some(Fault::ProblemSyntax) => print_problem(problem).replacen("(:init", "(:initial", 1),
        Some(Fault::UndeclaredItem) => {
            let mut p = problem.clone();
            if let Some(item) = first_goal_item(&p) {
                p.objects.retain(|o| o.name != item);
            }
            print_problem(&p)
        }
        Some(Fault::UnreachableGoal) => {
            let mut p = problem.clone();
            p.init.retain(|a| a.predicate != "agent_hand_free");
            print_problem(&p)
        }
        _ => print_problem(problem),
    };
    format!("Here is the problem file:\n\n{}", fenced("pddl", &text))
}

fn decomposition_answer(inst: &Instance, fault: Option<Fault>) -> String {
    let mut goals = inst.task().subgoals.clone();
    match fault {
        Some(Fault::DecompositionProse) => {
            return "First take out the rubbish, then mop each floor and rinse the mop after every room.".into();
        }
        Some(Fault::DecompositionIncomplete) => {
            goals.pop();
        }
        Some(Fault::DecompositionConflict) => {
            let disposed = goals.iter().position(|g| g.contains("item_disposed"));
            if let Some(i) = disposed {
                let atom = goals[i]
                    .trim_start_matches("(and (item_disposed ")
                    .trim_end_matches("))")
                    .to_string();
                let room = first_room(inst);
                goals.insert(i + 1, format!("(and {})", Atom::new("item_at", [atom, room])));
            }
        }
        _ => {}
    }
    format!("The sub-goals in order are:\n\n{}", fenced("pddl", &goals.join("\n")))
}

fn first_room(inst: &Instance) -> String {
    inst.scene.rooms.first().map(|r| r.id.clone()).unwrap_or_default()
}

/// The requests a replay of `inst` issues together with their reference
/// completions, stopping after the first answer the pipeline rejects.
pub fn script(
    p: &Pipeline,
    inst: &Instance,
    fault: Option<Fault>,
) -> Result<Vec<(CompletionRequest, String)>, GoldenError> {
    let mut out = Vec::new();
    let reject = |step, detail: String| GoldenError::Rejected { step, detail };

    let req = p.domain_request(inst)?;
    let text = domain_answer(inst, fault);
    out.push((req, text.clone()));
    let Ok(domain) = p.parse_domain_response(inst, &text) else {
        return Ok(out);
    };

    let req = p.pruning_request(inst)?;
    let text = pruning_answer(inst, fault)?;
    out.push((req, text.clone()));
    let Ok((_, scene)) = p.parse_pruning_response(inst, &text) else {
        return Ok(out);
    };

    let req = p.problem_request(inst, &scene, &domain)?;
    if fault == Some(Fault::MissingProblemFixture) {
        return Ok(out);
    }
    let reference = inst.problem_for(&scene, &inst.name())?;
    let text = problem_answer(&reference, fault);
    out.push((req, text.clone()));
    let Ok(problem) = p.parse_problem_response(&domain, &text) else {
        return Ok(out);
    };

    let req = p.decomposition_request(&problem, &domain)?;
    let text = decomposition_answer(inst, fault);
    if fault.is_none() {
        p.parse_decomposition_response(&problem, &domain, &text)
            .map_err(|d| reject(Step::Decomposition, d))?;
    }
    out.push((req, text));
    Ok(out)
}

/// Answers from reference completions held in memory.
#[derive(Debug, Default)]
pub struct GoldenResponder {
    answers: HashMap<String, String>,
}

impl GoldenResponder {
    pub fn new(p: &Pipeline, instances: &[Instance], fault: Option<Fault>) -> Result<Self, GoldenError> {
        let mut answers = HashMap::new();
        for inst in instances {
            for (req, text) in script(p, inst, fault)? {
                answers.insert(req.digest(), text);
            }
        }
        Ok(GoldenResponder { answers })
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl Transport for GoldenResponder {
    fn complete(&self, req: &CompletionRequest, _trial: usize) -> Result<String, LlmError> {
        let digest = req.digest();
        self.answers
            .get(&digest)
            .cloned()
            .ok_or(LlmError::MissingFixture { digest })
    }
}

/// A seeded fault and the classification it must receive.
#[derive(Debug, Clone)]
pub struct FaultCase {
    pub name: &'static str,
    pub domain: DomainId,
    pub scene: &'static str,
    /// `None` replays the reference fixtures.
    pub fault: Option<Fault>,
    /// Budget for the original problem, when forced.
    pub orig_timeout: Option<Duration>,
    pub expected: FailureClass,
    pub expected_step: Step,
}

impl FaultCase {
    /// Fixture directory relative to the fixture root.
    pub fn fixture_subdir(&self) -> String {
        match self.fault {
            Some(f) => format!("{FAULTS_SUBDIR}/{}", f.name()),
            None => GOLDEN_SUBDIR.into(),
        }
    }

    pub fn trial_config(&self) -> TrialConfig {
        let mut cfg = TrialConfig::new(self.domain, self.scene, BackendMode::Replay, 1).expect("evaluation domain");
        if let Some(t) = self.orig_timeout {
            cfg.planner.orig_timeout = t;
        }
        cfg
    }
}

pub const GOLDEN_SUBDIR: &str = "golden";
pub const FAULTS_SUBDIR: &str = "faults";

/// Every seeded fault with its designated class and step.
pub fn fault_cases() -> Vec<FaultCase> {
    use FailureClass::*;
    let case = |fault, domain, scene, expected, expected_step| FaultCase {
        name: match fault {
            Some(f) => Fault::name(f),
            None => "forced_timeout",
        },
        domain,
        scene,
        fault,
        orig_timeout: None,
        expected,
        expected_step,
    };
    let hc = DomainId::HouseCleaning;
    let mut cases = vec![
        case(
            Some(Fault::DomainSyntax),
            hc,
            "shelbiana",
            SyntaxError,
            Step::DomainGeneration,
        ),
        case(
            Some(Fault::MissingAction),
            DomainId::PcAssembly,
            "parole",
            IncorrectAction,
            Step::DomainGeneration,
        ),
        case(
            Some(Fault::PruningUnknownItem),
            hc,
            "shelbiana",
            PruningError,
            Step::Pruning,
        ),
        case(
            Some(Fault::ProblemSyntax),
            DomainId::DiningTableSetup,
            "allensville",
            SyntaxError,
            Step::ProblemGeneration,
        ),
        case(
            Some(Fault::UndeclaredItem),
            hc,
            "shelbiana",
            UndeclaredItem,
            Step::ProblemGeneration,
        ),
        case(
            Some(Fault::MissingProblemFixture),
            hc,
            "parole",
            LlmError,
            Step::ProblemGeneration,
        ),
        case(
            Some(Fault::UnreachableGoal),
            DomainId::DiningTableSetup,
            "parole",
            InvalidPlan,
            Step::Planning,
        ),
        case(
            Some(Fault::DecompositionProse),
            hc,
            "shelbiana",
            DecompositionError,
            Step::Decomposition,
        ),
        case(
            Some(Fault::DecompositionConflict),
            hc,
            "shelbiana",
            DecompositionError,
            Step::Planning,
        ),
        case(
            Some(Fault::DecompositionIncomplete),
            hc,
            "allensville",
            DecompositionError,
            Step::Planning,
        ),
    ];
    let mut timeout = case(None, hc, "shelbiana", PlannerTimeout, Step::Planning);
    timeout.orig_timeout = Some(Duration::from_millis(1));
    cases.push(timeout);
    cases
}

/// Records the reference fixtures of every evaluation instance under
/// `root/golden` and each seeded fault under `root/faults/<name>`.
pub fn write_fixtures(p: &Pipeline, root: &Path) -> Result<usize, GoldenError> {
    let mut written = 0;
    for sub in [GOLDEN_SUBDIR, FAULTS_SUBDIR] {
        let dir = root.join(sub);
        if dir.exists() {
            std::fs::remove_dir_all(&dir)
                .map_err(|e| GoldenError::Llm(LlmError::Io(format!("{}: {e}", dir.display()))))?;
        }
    }
    let golden = FixtureStore::open(root.join(GOLDEN_SUBDIR));
    for inst in p.assets.evaluation_instances()? {
        for (req, text) in script(p, &inst, None)? {
            golden.record(&req, 0, &text)?;
            written += 1;
        }
    }
    for case in fault_cases() {
        let Some(fault) = case.fault else { continue };
        let store = FixtureStore::open(root.join(case.fixture_subdir()));
        let inst = p.assets.instance(case.domain, case.scene)?;
        for (req, text) in script(p, &inst, Some(fault))? {
            store.record(&req, 0, &text)?;
            written += 1;
        }
    }
    Ok(written)
}
