//! The five-step pipeline: domain generation, scene pruning, problem
//! generation, goal decomposition and planning of both the original and
//! the decomposed problem.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sgtp_core::decompose::{
    autoregressive_solve, verify_against_original, ForwardSearchPlanner, Planner, RunStatus, SubFailure,
    SubGoalSequence,
};
use sgtp_core::exec::validate;
use sgtp_core::pddl::{parse_domain, parse_problem, DomainAst, ProblemAst};
use sgtp_core::scene::{list_items, prune, SceneGraph};
use sgtp_core::search::{HeuristicKind, SearchConfig, SearchStatus};
use sgtp_core::Plan;
use sgtp_llm::{
    build_decomposition_prompt, build_domain_prompt, build_problem_prompt, build_pruning_prompt, extract_expressions,
    extract_listed_ids, extract_pddl, CompletionRequest, DecompositionExample, DomainExample, LlmConfig, LlmError,
    ProblemExample, PruningExample, Transport,
};
use thiserror::Error;

use crate::assets::{AssetError, Assets, DomainId, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureClass {
    SyntaxError,
    IncorrectAction,
    UndeclaredItem,
    PlannerTimeout,
    InvalidPlan,
    PruningError,
    DecompositionError,
    LlmError,
}

impl FailureClass {
    pub const ALL: [FailureClass; 8] = [
        FailureClass::SyntaxError,
        FailureClass::IncorrectAction,
        FailureClass::UndeclaredItem,
        FailureClass::PlannerTimeout,
        FailureClass::InvalidPlan,
        FailureClass::PruningError,
        FailureClass::DecompositionError,
        FailureClass::LlmError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::SyntaxError => "SYNTAX_ERROR",
            FailureClass::IncorrectAction => "INCORRECT_ACTION",
            FailureClass::UndeclaredItem => "UNDECLARED_ITEM",
            FailureClass::PlannerTimeout => "PLANNER_TIMEOUT",
            FailureClass::InvalidPlan => "INVALID_PLAN",
            FailureClass::PruningError => "PRUNING_ERROR",
            FailureClass::DecompositionError => "DECOMPOSITION_ERROR",
            FailureClass::LlmError => "LLM_ERROR",
        }
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pipeline steps in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    DomainGeneration = 1,
    Pruning = 2,
    ProblemGeneration = 3,
    Decomposition = 4,
    Planning = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    #[default]
    Replay,
    Record,
}

impl FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(BackendMode::Live),
            "replay" => Ok(BackendMode::Replay),
            "record" => Ok(BackendMode::Record),
            other => Err(format!("unknown backend `{other}` (expected live, replay or record)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerSettings {
    pub heuristic: HeuristicKind,
    /// Budget for the original problem.
    pub orig_timeout: Duration,
    /// Budget for each sub-problem.
    pub sub_timeout: Duration,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            heuristic: HeuristicKind::Lmcut,
            orig_timeout: sgtp_core::search::DEFAULT_TIMEOUT,
            sub_timeout: sgtp_core::search::DEFAULT_TIMEOUT,
        }
    }
}

impl PlannerSettings {
    fn search(&self, timeout: Duration) -> SearchConfig {
        SearchConfig::with_heuristic(self.heuristic).timeout(timeout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("`{0}` is the one-shot example domain and cannot be evaluated")]
    ExampleDomain(DomainId),
    #[error("at least one trial is required")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub domain: DomainId,
    pub scene: String,
    pub backend: BackendMode,
    pub trials: usize,
    pub planner: PlannerSettings,
}

impl TrialConfig {
    pub fn new(
        domain: DomainId,
        scene: impl Into<String>,
        backend: BackendMode,
        trials: usize,
    ) -> Result<Self, ConfigError> {
        if domain.is_example() {
            return Err(ConfigError::ExampleDomain(domain));
        }
        if trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        Ok(TrialConfig {
            domain,
            scene: scene.into(),
            backend,
            trials,
            planner: PlannerSettings::default(),
        })
    }

    pub fn instance_name(&self) -> String {
        format!("{}_{}", self.domain, self.scene)
    }
}

/// Outcome of one side (original or decomposed) of a trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SideReport {
    pub success: bool,
    pub plan_len: Option<usize>,
    pub expanded: Option<u64>,
    /// Planning seconds, including grounding.
    pub time: Option<f64>,
    pub failure_class: Option<FailureClass>,
    pub failure_step: Option<Step>,
    pub detail: Option<String>,
}

impl SideReport {
    fn failed(class: FailureClass, step: Step, detail: impl Into<String>) -> Self {
        SideReport {
            failure_class: Some(class),
            failure_step: Some(step),
            detail: Some(detail.into()),
            ..SideReport::default()
        }
    }

    fn fail(&mut self, class: FailureClass, step: Step, detail: impl Into<String>) {
        self.success = false;
        self.failure_class = Some(class);
        self.failure_step = Some(step);
        self.detail = Some(detail.into());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub domain: DomainId,
    pub scene: String,
    pub trial: usize,
    /// Both sides produced a valid plan.
    pub success: bool,
    pub orig: SideReport,
    pub decomp: SideReport,
    /// Class of the earliest failing step over both sides.
    pub failure_class: Option<FailureClass>,
    pub failure_step: Option<Step>,
}

impl TrialReport {
    fn new(cfg: &TrialConfig, trial: usize, orig: SideReport, decomp: SideReport) -> Self {
        let earliest = [&orig, &decomp]
            .into_iter()
            .filter_map(|s| Some((s.failure_step?, s.failure_class?)))
            .min_by_key(|(step, _)| *step);
        TrialReport {
            domain: cfg.domain,
            scene: cfg.scene.clone(),
            trial,
            success: orig.success && decomp.success,
            orig,
            decomp,
            failure_class: earliest.map(|(_, c)| c),
            failure_step: earliest.map(|(s, _)| s),
        }
    }

    /// The same report without wall-clock measurements.
    pub fn without_timing(mut self) -> Self {
        self.orig.time = None;
        self.decomp.time = None;
        self
    }
}

/// One-shot examples shared by every prompt, built from the example domain.
#[derive(Debug, Clone)]
pub struct PromptExamples {
    pub domain: DomainExample,
    pub pruning: PruningExample,
    pub problem: ProblemExample,
    pub decomposition: DecompositionExample,
}

impl PromptExamples {
    pub fn from_assets(assets: &Assets) -> Result<Self, AssetError> {
        let inst = assets.example_instance()?;
        let task = inst.task();
        let problem = inst.golden_problem()?;
        let subgoals = inst.golden_subgoals(&problem)?;
        Ok(PromptExamples {
            domain: DomainExample {
                actions_nl: task.description.clone(),
                domain: inst.domain().clone(),
            },
            pruning: PruningExample {
                scene: inst.scene.clone(),
                goal_nl: task.goal.clone(),
                kept: inst.relevant_items()?.into_iter().collect(),
            },
            problem: ProblemExample {
                scene: inst.pruned_scene()?,
                goal_nl: task.problem_goal_text(),
                domain: inst.domain().clone(),
                problem: problem.clone(),
            },
            decomposition: DecompositionExample {
                domain: inst.domain().clone(),
                problem,
                subgoals_nl: task.subgoals_nl.clone(),
                subgoals: subgoals.goals().to_vec(),
            },
        })
    }
}

/// Everything a trial needs apart from the completion transport.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub assets: Assets,
    pub examples: PromptExamples,
    pub llm: LlmConfig,
}

/// Failure of a generation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub class: FailureClass,
    pub step: Step,
    pub detail: String,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:?}: {}", self.class, self.step, self.detail)
    }
}

impl StepFailure {
    fn new(class: FailureClass, step: Step, detail: impl fmt::Display) -> Self {
        StepFailure {
            class,
            step,
            detail: detail.to_string(),
        }
    }

    fn llm(step: Step, e: LlmError) -> Self {
        Self::new(FailureClass::LlmError, step, e)
    }
}

/// Artifacts of steps 1 to 3.
pub struct Generated {
    pub domain: DomainAst,
    pub kept: Vec<String>,
    pub scene: SceneGraph,
    pub problem: ProblemAst,
}

impl Pipeline {
    pub fn new(assets: Assets, llm: LlmConfig) -> Result<Self, AssetError> {
        let examples = PromptExamples::from_assets(&assets)?;
        Ok(Pipeline { assets, examples, llm })
    }

    /// Bundled assets with the default model configuration.
    pub fn bundled() -> Result<Self, AssetError> {
        Self::new(Assets::bundled(), LlmConfig::default())
    }

    fn request(&self, prompt: &sgtp_llm::PromptTemplate) -> CompletionRequest {
        CompletionRequest::from_prompt(&self.llm.model, prompt).sampling(self.llm.temperature, self.llm.top_p)
    }

    pub fn domain_request(&self, inst: &Instance) -> Result<CompletionRequest, LlmError> {
        Ok(self.request(&build_domain_prompt(&self.examples.domain, &inst.task().description)?))
    }

    pub fn pruning_request(&self, inst: &Instance) -> Result<CompletionRequest, LlmError> {
        let items = list_items(&inst.scene);
        Ok(self.request(&build_pruning_prompt(
            &items,
            &inst.task().goal,
            &self.examples.pruning,
        )?))
    }

    pub fn problem_request(
        &self,
        inst: &Instance,
        scene: &SceneGraph,
        domain: &DomainAst,
    ) -> Result<CompletionRequest, LlmError> {
        let goal = inst.task().problem_goal_text();
        Ok(self.request(&build_problem_prompt(scene, &goal, domain, &self.examples.problem)?))
    }

    pub fn decomposition_request(
        &self,
        problem: &ProblemAst,
        domain: &DomainAst,
    ) -> Result<CompletionRequest, LlmError> {
        Ok(self.request(&build_decomposition_prompt(
            problem,
            domain,
            &self.examples.decomposition,
        )?))
    }

    /// Step 1. The generated domain must parse and define every action of
    /// the reference domain.
    pub fn parse_domain_response(&self, inst: &Instance, text: &str) -> Result<DomainAst, (FailureClass, String)> {
        let files = extract_pddl(text).map_err(|e| (FailureClass::SyntaxError, e.to_string()))?;
        let mut last = String::from("no domain definition in response");
        let domain = files
            .iter()
            .find_map(|f| parse_domain(f).map_err(|e| last = e.to_string()).ok())
            .ok_or((FailureClass::SyntaxError, last))?;
        let missing: Vec<&str> = inst
            .domain()
            .actions
            .iter()
            .map(|a| a.name.as_str())
            .filter(|name| domain.action(name).is_none())
            .collect();
        if !missing.is_empty() {
            return Err((
                FailureClass::IncorrectAction,
                format!("missing action(s): {}", missing.join(", ")),
            ));
        }
        Ok(domain)
    }

    /// Step 2. Every listed id must name an item of the scene.
    pub fn parse_pruning_response(&self, inst: &Instance, text: &str) -> Result<(Vec<String>, SceneGraph), String> {
        let ids = extract_listed_ids(text);
        if ids.is_empty() {
            return Err("no item ids in response".into());
        }
        let known: BTreeSet<&str> = inst.scene.items.iter().map(|i| i.id.as_str()).collect();
        let unknown: Vec<&str> = ids
            .iter()
            .map(String::as_str)
            .filter(|id| !known.contains(id))
            .collect();
        if !unknown.is_empty() {
            return Err(format!("unknown item id(s): {}", unknown.join(", ")));
        }
        let scene = prune(&inst.scene, &ids).map_err(|e| e.to_string())?;
        Ok((ids, scene))
    }

    /// Step 3.
    pub fn parse_problem_response(&self, domain: &DomainAst, text: &str) -> Result<ProblemAst, (FailureClass, String)> {
        let files = extract_pddl(text).map_err(|e| (FailureClass::SyntaxError, e.to_string()))?;
        let mut first_err = None;
        for f in &files {
            match parse_problem(f, domain) {
                Ok(p) => return Ok(p),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        let e = first_err.expect("at least one file");
        let class = if e.is_undeclared_item() {
            FailureClass::UndeclaredItem
        } else {
            FailureClass::SyntaxError
        };
        Err((class, e.to_string()))
    }

    /// Step 4.
    pub fn parse_decomposition_response(
        &self,
        problem: &ProblemAst,
        domain: &DomainAst,
        text: &str,
    ) -> Result<SubGoalSequence, String> {
        let exprs = extract_expressions(text).map_err(|e| e.to_string())?;
        SubGoalSequence::parse(&exprs, domain, problem).map_err(|e| e.to_string())
    }

    /// Steps 1 to 3.
    pub fn generate(&self, inst: &Instance, transport: &dyn Transport, trial: usize) -> Result<Generated, StepFailure> {
        use Step::*;
        let req = self
            .domain_request(inst)
            .map_err(|e| StepFailure::llm(DomainGeneration, e))?;
        let text = transport
            .complete(&req, trial)
            .map_err(|e| StepFailure::llm(DomainGeneration, e))?;
        let domain = self
            .parse_domain_response(inst, &text)
            .map_err(|(c, d)| StepFailure::new(c, DomainGeneration, d))?;

        let req = self.pruning_request(inst).map_err(|e| StepFailure::llm(Pruning, e))?;
        let text = transport
            .complete(&req, trial)
            .map_err(|e| StepFailure::llm(Pruning, e))?;
        let (kept, scene) = self
            .parse_pruning_response(inst, &text)
            .map_err(|d| StepFailure::new(FailureClass::PruningError, Pruning, d))?;

        let req = self
            .problem_request(inst, &scene, &domain)
            .map_err(|e| StepFailure::llm(ProblemGeneration, e))?;
        let text = transport
            .complete(&req, trial)
            .map_err(|e| StepFailure::llm(ProblemGeneration, e))?;
        let problem = self
            .parse_problem_response(&domain, &text)
            .map_err(|(c, d)| StepFailure::new(c, ProblemGeneration, d))?;
        Ok(Generated {
            domain,
            kept,
            scene,
            problem,
        })
    }

    /// Runs one trial. Failures are reported, never returned.
    pub fn run(&self, cfg: &TrialConfig, transport: &dyn Transport, trial: usize) -> TrialReport {
        let inst = match self.assets.instance(cfg.domain, &cfg.scene) {
            Ok(i) => i,
            Err(e) => {
                let side = SideReport::failed(FailureClass::SyntaxError, Step::DomainGeneration, e.to_string());
                return TrialReport::new(cfg, trial, side.clone(), side);
            }
        };
        let generated = match self.generate(&inst, transport, trial) {
            Ok(g) => g,
            Err(f) => {
                let side = SideReport::failed(f.class, f.step, f.detail);
                return TrialReport::new(cfg, trial, side.clone(), side);
            }
        };
        let reference = inst.full_problem();
        let check_reference = |plan: &Plan, side: &mut SideReport| match &reference {
            Ok(full) => {
                let v = validate(inst.domain(), full, plan);
                if !v.is_valid() {
                    side.fail(
                        FailureClass::InvalidPlan,
                        Step::Planning,
                        format!("plan fails the reference task: {}", v.detail),
                    );
                }
            }
            Err(e) => side.fail(
                FailureClass::InvalidPlan,
                Step::Planning,
                format!("reference task unavailable: {e}"),
            ),
        };
        let (mut orig, mut decomp) = std::thread::scope(|s| {
            let orig = s.spawn(|| plan_original(&generated, &cfg.planner));
            let decomp = self.decompose_and_plan(&generated, &cfg.planner, transport, trial);
            (orig.join().expect("original planning thread"), decomp)
        });
        for (side, plan) in [(&mut orig.0, &orig.1), (&mut decomp.0, &decomp.1)] {
            if side.success {
                check_reference(plan, side);
            }
        }
        TrialReport::new(cfg, trial, orig.0, decomp.0)
    }

    /// Steps 4 and 5 of the decomposed side.
    pub fn decompose_and_plan(
        &self,
        g: &Generated,
        settings: &PlannerSettings,
        transport: &dyn Transport,
        trial: usize,
    ) -> (SideReport, Plan) {
        let step = Step::Decomposition;
        let text = match self
            .decomposition_request(&g.problem, &g.domain)
            .and_then(|req| transport.complete(&req, trial))
        {
            Ok(t) => t,
            Err(e) => {
                return (
                    SideReport::failed(FailureClass::LlmError, step, e.to_string()),
                    Plan::default(),
                )
            }
        };
        let goals = match self.parse_decomposition_response(&g.problem, &g.domain, &text) {
            Ok(goals) => goals,
            Err(d) => {
                return (
                    SideReport::failed(FailureClass::DecompositionError, step, d),
                    Plan::default(),
                )
            }
        };
        plan_decomposed(g, &goals, settings)
    }
}

/// Step 5 on the original problem.
fn plan_original(g: &Generated, settings: &PlannerSettings) -> (SideReport, Plan) {
    let step = Step::Planning;
    let result = match ForwardSearchPlanner.plan(&g.domain, &g.problem, &settings.search(settings.orig_timeout)) {
        Ok(r) => r,
        Err(e) => {
            return (
                SideReport::failed(FailureClass::PlannerTimeout, step, e.to_string()),
                Plan::default(),
            )
        }
    };
    let mut side = SideReport {
        expanded: Some(result.expanded),
        time: Some(result.time),
        ..SideReport::default()
    };
    let plan = match (result.status, result.plan) {
        (SearchStatus::Solved, Some(plan)) => plan,
        (SearchStatus::Timeout, _) => {
            side.fail(FailureClass::PlannerTimeout, step, "search timed out");
            return (side, Plan::default());
        }
        _ => {
            side.fail(FailureClass::InvalidPlan, step, "no plan exists");
            return (side, Plan::default());
        }
    };
    side.plan_len = Some(plan.len());
    let v = validate(&g.domain, &g.problem, &plan);
    if v.is_valid() {
        side.success = true;
    } else {
        side.fail(FailureClass::InvalidPlan, step, v.detail);
    }
    (side, plan)
}

/// Step 5 on the sub-goal sequence.
fn plan_decomposed(g: &Generated, goals: &SubGoalSequence, settings: &PlannerSettings) -> (SideReport, Plan) {
    let step = Step::Planning;
    let run = autoregressive_solve(
        &ForwardSearchPlanner,
        &g.domain,
        &g.problem,
        goals,
        &settings.search(settings.sub_timeout),
    );
    let mut side = SideReport {
        expanded: Some(run.total_expanded()),
        time: Some(run.total_time()),
        ..SideReport::default()
    };
    if let RunStatus::Failed { index, failure } = &run.status {
        let class = match failure {
            SubFailure::Timeout | SubFailure::GroundingAborted(_) => FailureClass::PlannerTimeout,
            SubFailure::Unsolvable | SubFailure::NotExecutable(_) | SubFailure::IllTyped(_) => {
                FailureClass::DecompositionError
            }
        };
        side.fail(class, step, format!("sub-problem {}: {failure:?}", index + 1));
        return (side, run.concat_plan);
    }
    side.plan_len = Some(run.concat_plan.len());
    let v = verify_against_original(&g.domain, &g.problem, &run);
    if v.is_valid() {
        side.success = true;
    } else {
        side.fail(
            FailureClass::DecompositionError,
            step,
            format!("sub-goals do not reach the goal: {}", v.detail),
        );
    }
    (side, run.concat_plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden::GoldenResponder;
    use sgtp_llm::ForbiddenTransport;

    #[test]
    fn config_rejects_example_domain_and_zero_trials() {
        assert_eq!(
            TrialConfig::new(DomainId::Laundry, "kemblesville", BackendMode::Replay, 1),
            Err(ConfigError::ExampleDomain(DomainId::Laundry))
        );
        assert_eq!(
            TrialConfig::new(DomainId::PcAssembly, "parole", BackendMode::Replay, 0),
            Err(ConfigError::NoTrials)
        );
        let cfg = TrialConfig::new(DomainId::PcAssembly, "parole", BackendMode::Live, 3).unwrap();
        assert_eq!(cfg.instance_name(), "pc_assembly_parole");
        assert_eq!(cfg.planner.orig_timeout, Duration::from_secs(60));
    }

    #[test]
    fn backend_modes_parse() {
        assert_eq!("live".parse::<BackendMode>(), Ok(BackendMode::Live));
        assert_eq!("record".parse::<BackendMode>(), Ok(BackendMode::Record));
        assert_eq!(BackendMode::default(), BackendMode::Replay);
        assert!("offline".parse::<BackendMode>().is_err());
    }

    #[test]
    fn reference_answers_give_a_successful_trial() {
        let p = Pipeline::bundled().unwrap();
        let inst = p.assets.instance(DomainId::HouseCleaning, "parole").unwrap();
        let t = GoldenResponder::new(&p, &[inst], None).unwrap();
        let cfg = TrialConfig::new(DomainId::HouseCleaning, "parole", BackendMode::Replay, 1).unwrap();
        let r = p.run(&cfg, &t, 0);
        assert!(r.success, "{r:?}");
        assert_eq!((r.failure_class, r.failure_step), (None, None));
        assert_eq!(r.orig.plan_len, Some(22));
        assert_eq!(r.decomp.plan_len, Some(22));
        assert!(r.decomp.expanded.unwrap() * 10 <= r.orig.expanded.unwrap());
    }

    #[test]
    fn unavailable_model_fails_at_the_first_step() {
        let p = Pipeline::bundled().unwrap();
        let cfg = TrialConfig::new(DomainId::DiningTableSetup, "parole", BackendMode::Live, 1).unwrap();
        let t = ForbiddenTransport::default();
        let r = p.run(&cfg, &t, 0);
        assert!(!r.success);
        assert_eq!(r.failure_class, Some(FailureClass::LlmError));
        assert_eq!(r.failure_step, Some(Step::DomainGeneration));
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn earliest_step_wins_over_both_sides() {
        let cfg = TrialConfig::new(DomainId::PcAssembly, "parole", BackendMode::Replay, 1).unwrap();
        let side = |class, step| SideReport {
            failure_class: Some(class),
            failure_step: Some(step),
            ..Default::default()
        };
        let r = TrialReport::new(
            &cfg,
            0,
            side(FailureClass::PlannerTimeout, Step::Planning),
            side(FailureClass::DecompositionError, Step::Decomposition),
        );
        assert_eq!(r.failure_class, Some(FailureClass::DecompositionError));
        assert_eq!(r.failure_step, Some(Step::Decomposition));
    }
}
