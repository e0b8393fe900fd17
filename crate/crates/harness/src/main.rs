//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use sgtp_core::decompose::{autoregressive_solve, manifest, ForwardSearchPlanner, SubGoalSequence};
use sgtp_core::exec::{parse_plan, validate};
use sgtp_core::ground::ground;
use sgtp_core::pddl::{parse_domain, parse_problem, print_domain, print_problem, DomainAst, ProblemAst};
use sgtp_core::scene::{load_scene_graph, prune};
use sgtp_core::search::{solve, HeuristicKind, SearchConfig, SearchStatus};
use sgtp_harness::assets::{Assets, DomainId, EVALUATION_SCENES};
use sgtp_harness::corpus;
use sgtp_harness::golden::{write_fixtures, GOLDEN_SUBDIR};
use sgtp_harness::pipeline::{BackendMode, Pipeline, TrialConfig};
use sgtp_harness::report::{aggregate, emit_report, run_trials, Aggregate, ReportFormat};
use sgtp_llm::{
    credential_from_env, FixtureStore, HttpTransport, LlmConfig, RecordTransport, ReplayTransport, Transport,
};

#[derive(Parser)]
#[command(name = "sgtp", version, about = "Scene-graph task planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a domain or problem file and print it in canonical form.
    Parse {
        file: PathBuf,
        /// Domain file, required for problem files.
        #[arg(long)]
        domain: Option<PathBuf>,
    },
    /// Ground a problem and print its actions.
    Ground {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// Print every ground action instead of a summary.
        #[arg(long)]
        dump: bool,
    },
    /// Find an optimal plan.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Check a plan against a problem.
    Validate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Print a scene graph reduced to a set of items.
    Prune {
        #[arg(long)]
        scene: PathBuf,
        /// Item ids to keep, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "task")]
        keep: Vec<String>,
        /// Keep the items relevant to a bundled task's goal.
        #[arg(long)]
        task: Option<DomainId>,
    },
    /// Generate a domain file for a bundled task.
    GenDomain {
        #[arg(long)]
        domain: DomainId,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Generate a problem file for a bundled task and scene.
    GenProblem {
        #[arg(long)]
        domain: DomainId,
        #[arg(long)]
        scene: String,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Solve a sub-goal sequence and print the run manifest.
    Decompose {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// One goal expression per sub-goal.
        #[arg(long)]
        subgoals: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Include wall-clock times.
        #[arg(long)]
        timing: bool,
    },
    /// Run trials of the full pipeline on one task and scene.
    Pipeline {
        #[arg(long)]
        domain: DomainId,
        #[arg(long)]
        scene: String,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        llm: LlmArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the pipeline on every evaluation task and scene.
    Bench {
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        llm: LlmArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-render a saved structured report.
    Report {
        input: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
    /// Rewrite the bundled fixtures from the reference answers, and the
    /// generated PDDL corpus.
    RegenFixtures {
        /// Fixture root; defaults to the bundled one. The corpus is only
        /// rewritten for the bundled root.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Also recompute the cached optimal lengths by breadth-first search.
        #[arg(long)]
        ground_truth: bool,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value = "lmcut")]
    heuristic: HeuristicKind,
    #[arg(long, default_value_t = 60.0)]
    timeout_s: f64,
    /// Merge states that differ only by a permutation of interchangeable
    /// objects.
    #[arg(long)]
    symmetry: bool,
}

impl SearchArgs {
    fn config(&self) -> Result<SearchConfig, String> {
        Ok(SearchConfig::with_heuristic(self.heuristic)
            .timeout(timeout(self.timeout_s)?)
            .symmetry(self.symmetry))
    }
}

fn timeout(secs: f64) -> Result<Duration, String> {
    if secs.is_finite() && secs > 0.0 {
        Ok(Duration::from_secs_f64(secs))
    } else {
        Err(format!("timeout must be a positive number of seconds, got {secs}"))
    }
}

#[derive(Args)]
struct LlmArgs {
    #[arg(long, default_value = "replay")]
    backend: BackendMode,
    /// Fixture directory for replay and record.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Client configuration (endpoint_url, model, temperature, top_p,
    /// request_timeout_s).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "lmcut")]
    heuristic: HeuristicKind,
    /// Planner budget in seconds for the original problem and for each
    /// sub-problem.
    #[arg(long, default_value_t = 60.0)]
    timeout_s: f64,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
    /// Include wall-clock times in the report.
    #[arg(long)]
    timing: bool,
    /// Worker threads for trials.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also write the per-trial reports as JSON.
    #[arg(long)]
    trial_reports: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status: 0 success, 1 failures in the result, 2 usage or setup error.
enum Outcome {
    Ok,
    Failures,
}

type CmdResult = Result<Outcome, String>;

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_domain(path: &Path) -> Result<DomainAst, String> {
    parse_domain(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_pair(domain: &Path, problem: &Path) -> Result<(DomainAst, ProblemAst), String> {
    let d = load_domain(domain)?;
    let p = parse_problem(&read(problem)?, &d).map_err(|e| format!("{}: {e}", problem.display()))?;
    Ok((d, p))
}

fn pipeline(llm: &LlmArgs) -> Result<Pipeline, String> {
    let cfg = match &llm.config {
        Some(path) => LlmConfig::load(path).map_err(|e| e.to_string())?,
        None => LlmConfig::default(),
    };
    Pipeline::new(Assets::bundled(), cfg).map_err(|e| e.to_string())
}

fn transport(p: &Pipeline, llm: &LlmArgs) -> Result<Box<dyn Transport>, String> {
    let dir = llm
        .fixtures
        .clone()
        .unwrap_or_else(|| p.assets.fixtures_dir().join(GOLDEN_SUBDIR));
    let store = Arc::new(FixtureStore::open(dir));
    let live = || -> Result<HttpTransport, String> {
        let key = credential_from_env().map_err(|e| e.to_string())?;
        HttpTransport::new(&p.llm, key).map_err(|e| e.to_string())
    };
    Ok(match llm.backend {
        BackendMode::Replay => Box::new(ReplayTransport::new(store)),
        BackendMode::Live => Box::new(live()?),
        BackendMode::Record => Box::new(RecordTransport::new(live()?, store)),
    })
}

fn run_instances(p: &Pipeline, t: &dyn Transport, cfgs: Vec<TrialConfig>, run: &RunArgs) -> CmdResult {
    let gt = p.assets.ground_truth().unwrap_or_default();
    let mut rows: Vec<Aggregate> = Vec::new();
    let mut all_reports = Vec::new();
    let mut failures = false;
    for cfg in cfgs {
        let reports = run_trials(p, &cfg, t, run.workers);
        failures |= reports.iter().any(|r| !r.success);
        rows.push(aggregate(
            &cfg,
            &p.llm.model,
            gt.get(&cfg.instance_name()).copied(),
            &reports,
            run.timing,
        ));
        all_reports.extend(
            reports
                .into_iter()
                .map(|r| if run.timing { r } else { r.without_timing() }),
        );
    }
    if let Some(path) = &run.trial_reports {
        let text = serde_json::to_string_pretty(&all_reports).map_err(|e| e.to_string())?;
        write(path, &(text + "\n"))?;
    }
    let out = emit_report(&rows, run.format);
    match &run.out {
        Some(path) => write(path, &out)?,
        None => print!("{out}"),
    }
    Ok(if failures { Outcome::Failures } else { Outcome::Ok })
}

fn trial_config(
    domain: DomainId,
    scene: &str,
    trials: usize,
    llm: &LlmArgs,
    run: &RunArgs,
) -> Result<TrialConfig, String> {
    let mut cfg = TrialConfig::new(domain, scene, llm.backend, trials).map_err(|e| e.to_string())?;
    cfg.planner.heuristic = run.heuristic;
    cfg.planner.orig_timeout = timeout(run.timeout_s)?;
    cfg.planner.sub_timeout = cfg.planner.orig_timeout;
    Ok(cfg)
}

fn execute(cmd: Command) -> CmdResult {
    match cmd {
        Command::Parse { file, domain } => {
            let text = read(&file)?;
            match domain {
                Some(dpath) => {
                    let d = load_domain(&dpath)?;
                    let p = parse_problem(&text, &d).map_err(|e| format!("{}: {e}", file.display()))?;
                    print!("{}", print_problem(&p));
                }
                None => {
                    let d = parse_domain(&text).map_err(|e| format!("{}: {e}", file.display()))?;
                    print!("{}", print_domain(&d));
                }
            }
            Ok(Outcome::Ok)
        }
        Command::Ground { domain, problem, dump } => {
            let (d, p) = load_pair(&domain, &problem)?;
            let task = ground(&d, &p).map_err(|e| e.to_string())?;
            if dump {
                print!("{}", task.dump());
            } else {
                println!("facts: {}\nactions: {}", task.num_facts(), task.actions.len());
            }
            Ok(Outcome::Ok)
        }
        Command::Plan {
            domain,
            problem,
            search,
        } => {
            let (d, p) = load_pair(&domain, &problem)?;
            let task = ground(&d, &p).map_err(|e| e.to_string())?;
            let r = solve(&task, &search.config()?);
            eprintln!(
                "status: {:?}, expanded: {}, generated: {}, time: {:.3}s",
                r.status, r.expanded, r.generated, r.time
            );
            match (&r.status, &r.plan) {
                (SearchStatus::Solved, Some(plan)) => {
                    print!("{}", plan.to_text());
                    Ok(Outcome::Ok)
                }
                _ => Ok(Outcome::Failures),
            }
        }
        Command::Validate { domain, problem, plan } => {
            let (d, p) = load_pair(&domain, &problem)?;
            let plan = parse_plan(&read(&plan)?).map_err(|e| e.to_string())?;
            let report = validate(&d, &p, &plan);
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
            Ok(if report.is_valid() {
                Outcome::Ok
            } else {
                Outcome::Failures
            })
        }
        Command::Prune { scene, keep, task } => {
            let sg = load_scene_graph(&read(&scene)?).map_err(|e| e.to_string())?;
            let keep: Vec<String> = match task {
                Some(id) => {
                    let bundle = Assets::bundled().domain(id).map_err(|e| e.to_string())?;
                    let inst = sgtp_harness::assets::Instance {
                        bundle,
                        scene: sg.clone(),
                    };
                    inst.relevant_items().map_err(|e| e.to_string())?.into_iter().collect()
                }
                None => keep,
            };
            let pruned = prune(&sg, &keep).map_err(|e| e.to_string())?;
            println!("{}", pruned.to_json());
            Ok(Outcome::Ok)
        }
        Command::GenDomain { domain, llm } => {
            let p = pipeline(&llm)?;
            let t = transport(&p, &llm)?;
            let inst = p
                .assets
                .example_instance()
                .and_then(|ex| p.assets.instance(domain, &ex.scene.name));
            let inst = inst.map_err(|e| e.to_string())?;
            let req = p.domain_request(&inst).map_err(|e| e.to_string())?;
            let text = t.complete(&req, 0).map_err(|e| e.to_string())?;
            match p.parse_domain_response(&inst, &text) {
                Ok(d) => {
                    print!("{}", print_domain(&d));
                    Ok(Outcome::Ok)
                }
                Err((class, detail)) => {
                    eprintln!("{class}: {detail}");
                    Ok(Outcome::Failures)
                }
            }
        }
        Command::GenProblem { domain, scene, llm } => {
            let p = pipeline(&llm)?;
            let t = transport(&p, &llm)?;
            let inst = p.assets.instance(domain, &scene).map_err(|e| e.to_string())?;
            match p.generate(&inst, t.as_ref(), 0) {
                Ok(g) => {
                    print!("{}", print_problem(&g.problem));
                    Ok(Outcome::Ok)
                }
                Err(f) => {
                    eprintln!("{f}");
                    Ok(Outcome::Failures)
                }
            }
        }
        Command::Decompose {
            domain,
            problem,
            subgoals,
            search,
            timing,
        } => {
            let (d, p) = load_pair(&domain, &problem)?;
            let goals = SubGoalSequence::parse(&read(&subgoals)?, &d, &p).map_err(|e| e.to_string())?;
            let run = autoregressive_solve(&ForwardSearchPlanner, &d, &p, &goals, &search.config()?);
            let doc = manifest(&d, &p, &run, timing);
            println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?);
            let valid = run.is_solved() && validate(&d, &p, &run.concat_plan).is_valid();
            Ok(if valid { Outcome::Ok } else { Outcome::Failures })
        }
        Command::Pipeline {
            domain,
            scene,
            trials,
            llm,
            run,
        } => {
            let cfg = trial_config(domain, &scene, trials, &llm, &run)?;
            let p = pipeline(&llm)?;
            p.assets.scene(&scene).map_err(|e| e.to_string())?;
            let t = transport(&p, &llm)?;
            run_instances(&p, t.as_ref(), vec![cfg], &run)
        }
        Command::Bench { trials, llm, run } => {
            let p = pipeline(&llm)?;
            let t = transport(&p, &llm)?;
            let mut cfgs = Vec::new();
            for domain in DomainId::EVALUATION {
                for scene in EVALUATION_SCENES {
                    cfgs.push(trial_config(domain, scene, trials, &llm, &run)?);
                }
            }
            run_instances(&p, t.as_ref(), cfgs, &run)
        }
        Command::Report { input, format } => {
            let rows: Vec<Aggregate> =
                serde_json::from_str(&read(&input)?).map_err(|e| format!("{}: {e}", input.display()))?;
            print!("{}", emit_report(&rows, format));
            Ok(Outcome::Ok)
        }
        Command::RegenFixtures { root, ground_truth } => {
            let p = Pipeline::bundled().map_err(|e| e.to_string())?;
            if root.is_none() {
                let files = corpus::generate(&p.assets).map_err(|e| e.to_string())?;
                corpus::write(&p.assets, &files).map_err(|e| e.to_string())?;
                eprintln!("wrote {} corpus files", files.len());
            }
            if ground_truth {
                let gt = corpus::compute_ground_truth(&p.assets).map_err(|e| e.to_string())?;
                corpus::write_ground_truth(&p.assets, &gt).map_err(|e| e.to_string())?;
                eprintln!("wrote {}", p.assets.ground_truth_path().display());
            }
            let root = root.unwrap_or_else(|| p.assets.fixtures_dir());
            let n = write_fixtures(&p, &root).map_err(|e| e.to_string())?;
            eprintln!("recorded {n} completions under {}", root.display());
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failures) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
