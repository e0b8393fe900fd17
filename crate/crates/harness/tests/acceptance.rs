//! Acceptance suite. Runs every criterion in order in one test so that the
//! timing-sensitive ones do not share the machine with each other, prints
//! one PASS/FAIL line per criterion, and fails if any criterion failed.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use sgtp_core::decompose::{
    autoregressive_solve, check_chaining, verify_against_original, ForwardSearchPlanner, Planner,
};
use sgtp_core::exec::validate;
use sgtp_core::ground::ground;
use sgtp_core::pddl::{parse_domain, parse_problem, print_domain, print_problem, DomainAst, ProblemAst};
use sgtp_core::search::{solve, HeuristicKind, SearchConfig, SearchStatus};
use sgtp_core::{Plan, PlanStep};
use sgtp_harness::assets::{Assets, DomainId, EVALUATION_SCENES};
use sgtp_harness::corpus::{self, reference_instances};
use sgtp_harness::golden::fault_cases;
use sgtp_harness::pipeline::Pipeline;
use sgtp_llm::{FixtureStore, ReplayTransport};
use sgtp_oracle::{Oracle, Outcome};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Verdict {
    let t = start.elapsed();
    if t < limit {
        Ok(format!("{detail}; {:.1}s", t.as_secs_f64()))
    } else {
        Err(format!(
            "{detail}; took {:.1}s, limit {}s",
            t.as_secs_f64(),
            limit.as_secs()
        ))
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn sgtp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgtp"))
}

/// Criterion 1: parse, print and parse again gives the same tree for every file.
fn parser_roundtrip() -> Verdict {
    let start = Instant::now();
    let assets = Assets::bundled();
    let files = corpus::pddl_files(&assets).map_err(|e| e.to_string())?;
    let domains = corpus::domains(&assets).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    for path in &files {
        let text = read(path);
        let ok = match corpus::problem_domain_name(&text) {
            None => parse_domain(&text).is_ok_and(|d| parse_domain(&print_domain(&d)).as_ref() == Ok(&d)),
            Some(name) => domains.get(name).is_some_and(|d| {
                parse_problem(&text, d).is_ok_and(|p| parse_problem(&print_problem(&p), d).as_ref() == Ok(&p))
            }),
        };
        if !ok {
            failures.push(path.display().to_string());
        }
    }
    let listings = files
        .iter()
        .filter(|p| p.to_string_lossy().contains("listings"))
        .count();
    if !failures.is_empty() {
        return Err(format!(
            "{} of {} files fail: {failures:?}",
            failures.len(),
            files.len()
        ));
    }
    if files.len() < 20 || listings < 2 {
        return Err(format!("corpus too small: {} files, {listings} listings", files.len()));
    }
    within(Duration::from_secs(5), start, format!("{} files", files.len()))
}

/// Criterion 2: A* with hmax and lmcut finds the breadth-first optimum.
fn planner_optimality() -> Verdict {
    const STATE_LIMIT: usize = 1_000_000;
    let start = Instant::now();
    let assets = Assets::bundled();
    let domains = corpus::domains(&assets).map_err(|e| e.to_string())?;
    let mut files = corpus::problem_files(&assets, "problems").map_err(|e| e.to_string())?;
    files.extend(corpus::problem_files(&assets, "subproblems").map_err(|e| e.to_string())?);
    let (mut checked, mut mismatches) = (0, Vec::new());
    for path in &files {
        let (d, p) = corpus::load_problem(&domains, path).map_err(|e| e.to_string())?;
        let Outcome::Optimal { length, .. } = Oracle::new(&d, &p).bfs(STATE_LIMIT) else {
            continue;
        };
        checked += 1;
        let task = ground(&d, &p).map_err(|e| e.to_string())?;
        for k in [HeuristicKind::Hmax, HeuristicKind::Lmcut] {
            let r = solve(
                &task,
                &SearchConfig::with_heuristic(k).timeout(Duration::from_secs(120)),
            );
            if r.plan_len() != Some(length) {
                mismatches.push(format!("{} {k:?}: {:?} vs {length}", path.display(), r.plan_len()));
            }
        }
    }
    if !mismatches.is_empty() {
        return Err(format!("{mismatches:?}"));
    }
    if checked < 12 {
        return Err(format!("only {checked} oracle-feasible instances"));
    }
    within(
        Duration::from_secs(600),
        start,
        format!("{checked} instances agree with BFS"),
    )
}

/// Criterion 3: chaining, validity and bounded overhead of the reference
/// decompositions.
fn decomposition_soundness() -> Verdict {
    let assets = Assets::bundled();
    let gt = assets.ground_truth().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;
    for inst in reference_instances(&assets).map_err(|e| e.to_string())? {
        let p = inst.golden_problem().map_err(|e| e.to_string())?;
        let seq = inst.golden_subgoals(&p).map_err(|e| e.to_string())?;
        let run = autoregressive_solve(&ForwardSearchPlanner, inst.domain(), &p, &seq, &SearchConfig::default());
        let optimal = gt[&inst.name()];
        let len = run.concat_plan.len();
        let chained = run.is_solved() && check_chaining(inst.domain(), &run).is_ok();
        let valid = verify_against_original(inst.domain(), &p, &run).is_valid();
        let gap = len as f64 / optimal as f64 - 1.0;
        let good = chained && valid && len >= optimal && gap <= 0.10;
        ok &= good;
        notes.push(format!("{} {len}/{optimal}", inst.name()));
        if !good {
            notes.push(format!("(chained={chained} valid={valid} gap={:.1}%)", 100.0 * gap));
        }
    }
    check(ok, notes.join(", "))
}

/// Criterion 4: decomposed planning expands a tenth of the nodes in less time.
fn decomposition_efficiency() -> Verdict {
    let start = Instant::now();
    let assets = Assets::bundled();
    let cfg = SearchConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for scene in EVALUATION_SCENES {
        let inst = assets
            .instance(DomainId::HouseCleaning, scene)
            .map_err(|e| e.to_string())?;
        let p = inst.golden_problem().map_err(|e| e.to_string())?;
        let orig = ForwardSearchPlanner
            .plan(inst.domain(), &p, &cfg)
            .map_err(|e| e.to_string())?;
        let seq = inst.golden_subgoals(&p).map_err(|e| e.to_string())?;
        let run = autoregressive_solve(&ForwardSearchPlanner, inst.domain(), &p, &seq, &cfg);
        let (e0, e1) = (orig.expanded, run.total_expanded());
        let (t0, t1) = (orig.time, run.total_time());
        ok &= orig.is_solved() && run.is_solved() && e1 * 10 <= e0 && t1 < t0;
        notes.push(format!("{scene}: {e1} vs {e0} expanded, {t1:.3}s vs {t0:.3}s"));
    }
    let detail = notes.join("; ");
    if ok {
        within(Duration::from_secs(120), start, detail)
    } else {
        Err(detail)
    }
}

fn objects_of_type<'a>(p: &'a ProblemAst, ty: &str) -> Vec<&'a str> {
    p.objects
        .iter()
        .filter(|o| o.ty == ty)
        .map(|o| o.name.as_str())
        .collect()
}

/// Deletions, swaps and renamings of one plan.
fn mutants(plan: &Plan, d: &DomainAst, p: &ProblemAst) -> Vec<Plan> {
    let n = plan.len();
    let mut out = Vec::new();
    for i in 0..n {
        let mut m = plan.clone();
        m.steps.remove(i);
        out.push(m);
    }
    for i in 0..n.saturating_sub(1) {
        for j in [i + 1, n - 1 - i / 2] {
            if j > i && j < n && plan.steps[i] != plan.steps[j] {
                let mut m = plan.clone();
                m.steps.swap(i, j);
                out.push(m);
            }
        }
    }
    for (i, step) in plan.steps.iter().enumerate() {
        let Some(schema) = d.actions.iter().find(|a| a.name == step.name) else {
            continue;
        };
        let k = i % step.args.len().max(1);
        let Some(param) = schema.params.get(k) else {
            continue;
        };
        let pool = objects_of_type(p, &param.ty);
        let Some(pos) = pool.iter().position(|o| *o == step.args[k]) else {
            continue;
        };
        if pool.len() < 2 {
            continue;
        }
        let mut m = plan.clone();
        let mut args = step.args.clone();
        args[k] = pool[(pos + 1 + i) % pool.len()].to_string();
        if args[k] == step.args[k] {
            args[k] = pool[(pos + 1) % pool.len()].to_string();
        }
        m.steps[i] = PlanStep::new(step.name.clone(), args);
        out.push(m);
    }
    out
}

/// Criterion 5: the validator's verdict on mutated plans matches re-simulation.
fn validator_fidelity() -> Verdict {
    let assets = Assets::bundled();
    let (mut total, mut valid_mutants, mut disagreements) = (0, 0, Vec::new());
    for inst in reference_instances(&assets).map_err(|e| e.to_string())? {
        let p = inst.golden_problem().map_err(|e| e.to_string())?;
        let d = inst.domain();
        let task = ground(d, &p).map_err(|e| e.to_string())?;
        let plan = solve(&task, &SearchConfig::default())
            .plan
            .ok_or("reference problem unsolved")?;
        let oracle = Oracle::new(d, &p);
        for m in std::iter::once(plan.clone()).chain(mutants(&plan, d, &p)) {
            total += 1;
            let verdict = validate(d, &p, &m).is_valid();
            let labels: Vec<String> = m.steps.iter().map(PlanStep::to_string).collect();
            let reached = oracle
                .simulate(labels.iter().map(String::as_str))
                .is_some_and(|s| oracle.is_goal(&s));
            valid_mutants += usize::from(verdict);
            if verdict != reached {
                disagreements.push(format!("{}: {}", inst.name(), m.to_text().replace('\n', " ")));
            }
        }
    }
    if !disagreements.is_empty() {
        return Err(format!(
            "{} disagreements: {:?}",
            disagreements.len(),
            &disagreements[..disagreements.len().min(3)]
        ));
    }
    check(
        total >= 100,
        format!("{total} plans, {valid_mutants} valid, all verdicts agree"),
    )
}

/// Criterion 6: the planner stops within two seconds of its budget.
fn timeout_contract() -> Verdict {
    let dir = Assets::bundled().root().join(corpus::CORPUS_DIR).join("crafted");
    let mut notes = Vec::new();
    let mut ok = true;
    for t in [None, Some(1u64), Some(5)] {
        let budget = t.unwrap_or(60);
        let mut cmd = sgtp();
        cmd.arg("plan")
            .arg("--domain")
            .arg(dir.join("corridor_domain.pddl"))
            .arg("--problem")
            .arg(dir.join("corridor_haul.pddl"));
        if let Some(t) = t {
            cmd.arg("--timeout-s").arg(t.to_string());
        }
        let start = Instant::now();
        let out = cmd.output().map_err(|e| e.to_string())?;
        let elapsed = start.elapsed().as_secs_f64();
        let stderr = String::from_utf8_lossy(&out.stderr);
        let timed_out = stderr.contains("status: Timeout") && out.status.code() == Some(1);
        ok &= timed_out && elapsed <= budget as f64 + 2.0;
        notes.push(format!("{budget}s budget: {elapsed:.2}s, timeout={timed_out}"));
    }
    check(ok, notes.join("; "))
}

/// Counts connection attempts on a local port.
struct Sink {
    addr: String,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
}

impl Sink {
    fn start() -> Sink {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        listener.set_nonblocking(true).expect("nonblocking");
        let addr = listener.local_addr().expect("addr").to_string();
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (h, s) = (hits.clone(), stop.clone());
        std::thread::spawn(move || {
            while !s.load(Ordering::SeqCst) {
                if listener.accept().is_ok() {
                    h.fetch_add(1, Ordering::SeqCst);
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        });
        Sink { addr, hits, stop }
    }
}

impl Drop for Sink {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn replay_all(config: &Path, out_dir: &Path) -> Result<Vec<u8>, String> {
    let mut bytes = Vec::new();
    for domain in DomainId::EVALUATION {
        for scene in EVALUATION_SCENES {
            let trials = out_dir.join(format!("{domain}_{scene}.json"));
            let out = sgtp()
                .args([
                    "pipeline",
                    "--domain",
                    domain.as_str(),
                    "--scene",
                    scene,
                    "--backend",
                    "replay",
                    "--format",
                    "csv",
                ])
                .arg("--config")
                .arg(config)
                .arg("--trial-reports")
                .arg(&trials)
                .env("SGTP_API_KEY", "unused")
                .output()
                .map_err(|e| e.to_string())?;
            if out.status.code() != Some(0) {
                return Err(format!(
                    "{domain}/{scene}: exit {:?}: {}",
                    out.status.code(),
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
            bytes.extend(out.stdout);
            bytes.extend(std::fs::read(&trials).map_err(|e| e.to_string())?);
        }
    }
    Ok(bytes)
}

/// Criterion 7: replayed pipeline runs are byte-identical and never touch the network.
fn hermetic_replay() -> Verdict {
    let start = Instant::now();
    let sink = Sink::start();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("llm.toml");
    let mut f = std::fs::File::create(&config).map_err(|e| e.to_string())?;
    writeln!(f, "endpoint_url = \"http://{}/v1/chat/completions\"", sink.addr).map_err(|e| e.to_string())?;
    drop(f);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    std::fs::create_dir_all(&a).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&b).map_err(|e| e.to_string())?;
    let first = replay_all(&config, &a)?;
    let second = replay_all(&config, &b)?;
    std::thread::sleep(Duration::from_millis(50));
    let hits = sink.hits.load(Ordering::SeqCst);
    if first != second {
        return Err("reports differ between runs".into());
    }
    if hits != 0 {
        return Err(format!("{hits} connection attempts"));
    }
    within(
        Duration::from_secs(300),
        start,
        format!("9 pairs twice, {} identical bytes, 0 connections", first.len()),
    )
}

/// Criterion 8: seeded faults are attributed to their class at the earliest step.
fn failure_taxonomy() -> Verdict {
    let p = Pipeline::bundled().map_err(|e| e.to_string())?;
    let cases = fault_cases();
    let mut wrong = Vec::new();
    for case in &cases {
        let store = Arc::new(FixtureStore::open(p.assets.fixtures_dir().join(case.fixture_subdir())));
        let report = p.run(&case.trial_config(), &ReplayTransport::new(store), 0);
        let got = (report.failure_class, report.failure_step);
        if got != (Some(case.expected), Some(case.expected_step)) {
            wrong.push(format!("{}: got {got:?}", case.name));
        }
    }
    if !wrong.is_empty() {
        return Err(wrong.join("; "));
    }
    check(cases.len() >= 8, format!("{} seeded faults classified", cases.len()))
}

/// Criterion 9: relevance pruning keeps the optimum and shrinks the grounded task.
fn pruning_soundness() -> Verdict {
    let assets = Assets::bundled();
    let gt = assets.ground_truth().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;
    for inst in reference_instances(&assets).map_err(|e| e.to_string())? {
        let d = inst.domain();
        let full = ground(d, &inst.full_problem().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let pruned = ground(d, &inst.golden_problem().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let cfg = SearchConfig::default().timeout(Duration::from_secs(900)).symmetry(true);
        let full_run = solve(&full, &cfg);
        let pruned_run = solve(&pruned, &SearchConfig::default().timeout(Duration::from_secs(300)));
        let shrink = 1.0 - pruned.actions.len() as f64 / full.actions.len() as f64;
        let large = inst.scene.items.len() >= 30;
        let same = full_run.status == SearchStatus::Solved && full_run.plan_len() == pruned_run.plan_len();
        let matches_gt = pruned_run.plan_len() == Some(gt[&inst.name()]);
        ok &= same && matches_gt && (!large || shrink >= 0.30);
        notes.push(format!(
            "{} {:?}/{:?} actions {}->{} ({:.0}%)",
            inst.name(),
            pruned_run.plan_len(),
            full_run.plan_len(),
            full.actions.len(),
            pruned.actions.len(),
            100.0 * shrink
        ));
    }
    check(ok, notes.join(", "))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        ("1 parser roundtrip", parser_roundtrip),
        ("2 planner optimality", planner_optimality),
        ("3 decomposition soundness", decomposition_soundness),
        ("4 decomposition efficiency", decomposition_efficiency),
        ("5 validator fidelity", validator_fidelity),
        ("6 timeout contract", timeout_contract),
        ("7 hermetic replay", hermetic_replay),
        ("8 failure taxonomy", failure_taxonomy),
        ("9 pruning soundness", pruning_soundness),
    ];
    let mut results: BTreeMap<&str, bool> = BTreeMap::new();
    for (name, f) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        // Written past the test harness's capture so every run shows it.
        let line = match &verdict {
            Ok(detail) => format!("PASS criterion {name}: {detail}\n"),
            Err(detail) => format!("FAIL criterion {name}: {detail}\n"),
        };
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(line.as_bytes());
        let _ = out.flush();
        results.insert(name, verdict.is_ok());
    }
    let failed: Vec<_> = results.iter().filter(|(_, ok)| !**ok).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
