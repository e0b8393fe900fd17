//! PDDL files generated from the bundled assets: reference problems over
//! pruned and whole scenes, and the sub-problems met while solving the
//! reference sub-goal sequences.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sgtp_core::decompose::{autoregressive_solve, ForwardSearchPlanner};
use sgtp_core::pddl::{parse_domain, parse_problem, print_problem, DomainAst, ProblemAst};
use sgtp_core::search::SearchConfig;
use sgtp_oracle::optimal_length;

use crate::assets::{AssetError, Assets, Instance};

pub const CORPUS_DIR: &str = "corpus";
/// Generated subdirectories, cleared on regeneration.
pub const GENERATED: [&str; 3] = ["problems", "full", "subproblems"];
/// State budget for the optimal lengths cached as ground truth.
pub const GROUND_TRUTH_STATE_LIMIT: usize = 20_000_000;

fn io(path: &Path, e: std::io::Error) -> AssetError {
    AssetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> AssetError {
    AssetError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Every instance with a reference task: evaluation pairs and the example.
pub fn reference_instances(assets: &Assets) -> Result<Vec<Instance>, AssetError> {
    let mut all = assets.evaluation_instances()?;
    all.push(assets.example_instance()?);
    Ok(all)
}

/// Generated files keyed by path relative to the corpus directory.
pub fn generate(assets: &Assets) -> Result<BTreeMap<PathBuf, String>, AssetError> {
    let mut out = BTreeMap::new();
    for inst in reference_instances(assets)? {
        let name = inst.name();
        let golden = inst.golden_problem()?;
        out.insert(
            Path::new("problems").join(format!("{name}.pddl")),
            print_problem(&golden),
        );
        out.insert(
            Path::new("full").join(format!("{name}_full.pddl")),
            print_problem(&inst.full_problem()?),
        );
        let seq = inst.golden_subgoals(&golden)?;
        let run = autoregressive_solve(
            &ForwardSearchPlanner,
            inst.domain(),
            &golden,
            &seq,
            &SearchConfig::default(),
        );
        if !run.is_solved() {
            return Err(format_err(
                Path::new(&name),
                "reference sub-goal sequence is not solvable",
            ));
        }
        for (k, sub) in run.subs.iter().enumerate() {
            let path = Path::new("subproblems").join(format!("{name}_sub{}.pddl", k + 1));
            out.insert(path, print_problem(&sub.problem));
        }
    }
    Ok(out)
}

/// Replaces the generated part of the corpus with `files`.
pub fn write(assets: &Assets, files: &BTreeMap<PathBuf, String>) -> Result<(), AssetError> {
    let root = assets.root().join(CORPUS_DIR);
    for sub in GENERATED {
        let dir = root.join(sub);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| io(&dir, e))?;
        }
    }
    for (rel, text) in files {
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), AssetError> {
    for entry in std::fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let path = entry.map_err(|e| io(dir, e))?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "pddl") {
            out.push(path);
        }
    }
    Ok(())
}

/// Every `.pddl` file under the asset root, sorted.
pub fn pddl_files(assets: &Assets) -> Result<Vec<PathBuf>, AssetError> {
    let mut out = Vec::new();
    collect(assets.root(), &mut out)?;
    out.sort();
    Ok(out)
}

/// Problem files of one generated subdirectory, sorted.
pub fn problem_files(assets: &Assets, sub: &str) -> Result<Vec<PathBuf>, AssetError> {
    let mut out = Vec::new();
    collect(&assets.root().join(CORPUS_DIR).join(sub), &mut out)?;
    out.sort();
    Ok(out)
}

/// Domain name referenced by a problem file.
pub fn problem_domain_name(text: &str) -> Option<&str> {
    let at = text.find("(:domain")? + "(:domain".len();
    text[at..]
        .split(|c: char| c.is_whitespace() || c == ')')
        .find(|s| !s.is_empty())
}

/// Parses every domain in the asset tree, keyed by declared name.
pub fn domains(assets: &Assets) -> Result<BTreeMap<String, DomainAst>, AssetError> {
    let mut out = BTreeMap::new();
    for path in pddl_files(assets)? {
        let text = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        if problem_domain_name(&text).is_none() {
            let d = parse_domain(&text)?;
            out.insert(d.name.clone(), d);
        }
    }
    Ok(out)
}

/// Loads a problem file together with the domain it names.
pub fn load_problem(domains: &BTreeMap<String, DomainAst>, path: &Path) -> Result<(DomainAst, ProblemAst), AssetError> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    let name = problem_domain_name(&text).ok_or_else(|| format_err(path, "missing (:domain ...)"))?;
    let d = domains
        .get(name)
        .ok_or_else(|| format_err(path, format!("unknown domain `{name}`")))?;
    let p = parse_problem(&text, d)?;
    Ok((d.clone(), p))
}

/// Breadth-first optimal lengths of the reference problems.
pub fn compute_ground_truth(assets: &Assets) -> Result<BTreeMap<String, usize>, AssetError> {
    let mut out = BTreeMap::new();
    for inst in reference_instances(assets)? {
        let p = inst.golden_problem()?;
        let len = optimal_length(inst.domain(), &p, GROUND_TRUTH_STATE_LIMIT)
            .length()
            .ok_or_else(|| format_err(Path::new(&inst.name()), "no optimum within the state limit"))?;
        log::info!("{}: {len}", inst.name());
        out.insert(inst.name(), len);
    }
    Ok(out)
}

pub fn write_ground_truth(assets: &Assets, gt: &BTreeMap<String, usize>) -> Result<(), AssetError> {
    let path = assets.ground_truth_path();
    let mut text = serde_json::to_string_pretty(gt).expect("map serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io(&path, e))
}
