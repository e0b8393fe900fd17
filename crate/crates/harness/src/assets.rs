//! Bundled domains, task descriptions and scenes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sgtp_core::decompose::{SubGoalError, SubGoalSequence};
use sgtp_core::pddl::{parse_domain, parse_goal, DomainAst, GoalFormula, PddlError, ProblemAst, TypedName};
use sgtp_core::scene::{
    build_problem, load_scene_graph, prune, relevance_prune_with, EncodingConfig, RelevanceContext, SceneError,
    SceneGraph,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    SubGoal(#[from] SubGoalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainId {
    Laundry,
    PcAssembly,
    DiningTableSetup,
    HouseCleaning,
}

impl DomainId {
    pub const ALL: [DomainId; 4] = [
        DomainId::Laundry,
        DomainId::PcAssembly,
        DomainId::DiningTableSetup,
        DomainId::HouseCleaning,
    ];
    pub const EVALUATION: [DomainId; 3] = [
        DomainId::PcAssembly,
        DomainId::DiningTableSetup,
        DomainId::HouseCleaning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainId::Laundry => "laundry",
            DomainId::PcAssembly => "pc_assembly",
            DomainId::DiningTableSetup => "dining_table_setup",
            DomainId::HouseCleaning => "house_cleaning",
        }
    }

    /// The domain used as the one-shot example in every prompt.
    pub fn is_example(self) -> bool {
        self == DomainId::Laundry
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainId {
    type Err = AssetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| AssetError::UnknownDomain(s.to_string()))
    }
}

/// Scene paired with the example domain.
pub const EXAMPLE_SCENE: &str = "kemblesville";
pub const EVALUATION_SCENES: [&str; 3] = ["parole", "allensville", "shelbiana"];

/// Contents of a domain's `task.toml`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    /// Natural-language action knowledge.
    pub description: String,
    /// Natural-language goal.
    pub goal: String,
    pub goal_pddl: String,
    pub agents: Vec<TypedName>,
    pub agent_facts: Vec<String>,
    /// Natural-language description of the agents' initial situation.
    pub start: String,
    pub subgoals: Vec<String>,
    #[serde(default)]
    pub subgoals_nl: Vec<String>,
    #[serde(default)]
    pub encoding: EncodingConfig,
}

impl TaskSpec {
    /// Goal text given to the problem generator.
    pub fn problem_goal_text(&self) -> String {
        format!("{} {}", self.start.trim(), self.goal.trim())
    }
}

#[derive(Debug, Clone)]
pub struct DomainBundle {
    pub id: DomainId,
    pub text: String,
    pub domain: DomainAst,
    pub task: TaskSpec,
}

/// Asset directory handle.
#[derive(Debug, Clone)]
pub struct Assets {
    root: PathBuf,
}

fn read(path: &Path) -> Result<String, AssetError> {
    std::fs::read_to_string(path).map_err(|e| AssetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl Assets {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Assets { root: root.into() }
    }

    /// The assets shipped with this crate.
    pub fn bundled() -> Self {
        Self::open(Path::new(env!("CARGO_MANIFEST_DIR")).join("assets"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn domain_dir(&self, id: DomainId) -> PathBuf {
        self.root.join("domains").join(id.as_str())
    }

    pub fn domain(&self, id: DomainId) -> Result<DomainBundle, AssetError> {
        let dir = self.domain_dir(id);
        let text = read(&dir.join("domain.pddl"))?;
        let domain = parse_domain(&text)?;
        let task_path = dir.join("task.toml");
        let task: TaskSpec = toml::from_str(&read(&task_path)?).map_err(|e| AssetError::Format {
            path: task_path,
            message: e.to_string(),
        })?;
        Ok(DomainBundle { id, text, domain, task })
    }

    pub fn scene_path(&self, name: &str) -> PathBuf {
        self.root.join("scenes").join(format!("{name}.json"))
    }

    pub fn scene(&self, name: &str) -> Result<SceneGraph, AssetError> {
        let path = self.scene_path(name);
        if !path.exists() {
            return Err(AssetError::UnknownScene(name.to_string()));
        }
        Ok(load_scene_graph(&read(&path)?)?)
    }

    pub fn instance(&self, id: DomainId, scene: &str) -> Result<Instance, AssetError> {
        Ok(Instance {
            bundle: self.domain(id)?,
            scene: self.scene(scene)?,
        })
    }

    /// Every evaluation (domain, scene) pair in table order.
    pub fn evaluation_instances(&self) -> Result<Vec<Instance>, AssetError> {
        let mut out = Vec::new();
        for id in DomainId::EVALUATION {
            for scene in EVALUATION_SCENES {
                out.push(self.instance(id, scene)?);
            }
        }
        Ok(out)
    }

    pub fn fixtures_dir(&self) -> PathBuf {
        self.root.join("fixtures")
    }

    pub fn ground_truth_path(&self) -> PathBuf {
        self.root.join("ground_truth.json")
    }

    /// Cached optimal plan lengths by instance name.
    pub fn ground_truth(&self) -> Result<BTreeMap<String, usize>, AssetError> {
        let path = self.ground_truth_path();
        serde_json::from_str(&read(&path)?).map_err(|e| AssetError::Format {
            path,
            message: e.to_string(),
        })
    }

    /// The one-shot example instance.
    pub fn example_instance(&self) -> Result<Instance, AssetError> {
        self.instance(DomainId::Laundry, EXAMPLE_SCENE)
    }
}

/// A domain paired with a scene.
#[derive(Debug, Clone)]
pub struct Instance {
    pub bundle: DomainBundle,
    pub scene: SceneGraph,
}

impl Instance {
    pub fn domain(&self) -> &DomainAst {
        &self.bundle.domain
    }

    pub fn task(&self) -> &TaskSpec {
        &self.bundle.task
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.bundle.id, self.scene.name)
    }

    /// Problem over `sg` with the task's agents, agent facts and goal.
    pub fn problem_for(&self, sg: &SceneGraph, name: &str) -> Result<ProblemAst, AssetError> {
        let d = self.domain();
        let task = self.task();
        let skeleton = build_problem(name, sg, d, &task.encoding, &task.agents, &[], GoalFormula::default())?;
        let facts = parse_goal(&format!("(and {})", task.agent_facts.join(" ")), d, &skeleton)?;
        let facts: Vec<_> = facts.literals.into_iter().map(|l| l.atom).collect();
        let goal = parse_goal(&task.goal_pddl, d, &skeleton)?;
        Ok(build_problem(name, sg, d, &task.encoding, &task.agents, &facts, goal)?)
    }

    /// Problem over the whole scene.
    pub fn full_problem(&self) -> Result<ProblemAst, AssetError> {
        self.problem_for(&self.scene, &format!("{}_full", self.name()))
    }

    /// Items the goal can depend on, by backward relevance analysis.
    pub fn relevant_items(&self) -> Result<BTreeSet<String>, AssetError> {
        let d = self.domain();
        let full = self.full_problem()?;
        let task = self.task();
        let facts = parse_goal(&format!("(and {})", task.agent_facts.join(" ")), d, &full)?;
        let ctx = RelevanceContext {
            encoding: task.encoding.clone(),
            agents: task.agents.clone(),
            agent_facts: facts.literals.into_iter().map(|l| l.atom).collect(),
        };
        Ok(relevance_prune_with(&self.scene, d, &full.goal, &ctx)?)
    }

    pub fn pruned_scene(&self) -> Result<SceneGraph, AssetError> {
        let keep: Vec<String> = self.relevant_items()?.into_iter().collect();
        Ok(prune(&self.scene, &keep)?)
    }

    /// Reference problem over the relevance-pruned scene.
    pub fn golden_problem(&self) -> Result<ProblemAst, AssetError> {
        self.problem_for(&self.pruned_scene()?, &self.name())
    }

    pub fn golden_subgoals(&self, problem: &ProblemAst) -> Result<SubGoalSequence, AssetError> {
        Ok(SubGoalSequence::parse(
            &self.task().subgoals.join("\n"),
            self.domain(),
            problem,
        )?)
    }
}
