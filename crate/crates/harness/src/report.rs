//! Trial execution over a worker pool, aggregation over successful trials,
//! and rendering of the results table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sgtp_llm::Transport;
use thiserror::Error;

use crate::assets::DomainId;
use crate::pipeline::{FailureClass, Pipeline, TrialConfig, TrialReport};

/// Cell shown when a mean has no successful trial to average.
pub const NOT_APPLICABLE: &str = "×";
/// Cell shown for a measurement left out of the report.
pub const OMITTED: &str = "-";

/// Results of all trials of one (domain, scene, model) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub domain: DomainId,
    pub scene: String,
    pub model: String,
    pub trials: usize,
    /// Trials whose original problem was solved with a valid plan.
    pub success_orig: usize,
    /// Trials whose sub-goal sequence was solved with a valid plan.
    pub success_decomp: usize,
    pub plan_len_orig: Option<f64>,
    pub plan_len_decomp: Option<f64>,
    /// Optimal plan length of the reference task.
    pub gt: Option<usize>,
    pub time_orig: Option<f64>,
    pub time_decomp: Option<f64>,
    pub expanded_orig: Option<f64>,
    pub expanded_decomp: Option<f64>,
    /// Trials per class of the earliest failure.
    pub failures: BTreeMap<FailureClass, usize>,
}

impl Aggregate {
    pub fn success_rate_orig(&self) -> f64 {
        rate(self.success_orig, self.trials)
    }

    pub fn success_rate_decomp(&self) -> f64 {
        rate(self.success_decomp, self.trials)
    }
}

fn rate(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Reduces trial reports to one row. Means are taken over the trials in
/// which that side succeeded. Times are dropped unless `with_timing`.
pub fn aggregate(
    cfg: &TrialConfig,
    model: &str,
    gt: Option<usize>,
    reports: &[TrialReport],
    with_timing: bool,
) -> Aggregate {
    let orig: Vec<_> = reports.iter().filter(|r| r.orig.success).map(|r| &r.orig).collect();
    let decomp: Vec<_> = reports.iter().filter(|r| r.decomp.success).map(|r| &r.decomp).collect();
    let mut failures = BTreeMap::new();
    for class in reports.iter().filter_map(|r| r.failure_class) {
        *failures.entry(class).or_insert(0) += 1;
    }
    let time = |sides: &[&crate::pipeline::SideReport]| {
        if with_timing {
            mean(sides.iter().filter_map(|s| s.time))
        } else {
            None
        }
    };
    Aggregate {
        domain: cfg.domain,
        scene: cfg.scene.clone(),
        model: model.to_string(),
        trials: reports.len(),
        success_orig: orig.len(),
        success_decomp: decomp.len(),
        plan_len_orig: mean(orig.iter().filter_map(|s| s.plan_len).map(|v| v as f64)),
        plan_len_decomp: mean(decomp.iter().filter_map(|s| s.plan_len).map(|v| v as f64)),
        gt,
        time_orig: time(&orig),
        time_decomp: time(&decomp),
        expanded_orig: mean(orig.iter().filter_map(|s| s.expanded).map(|v| v as f64)),
        expanded_decomp: mean(decomp.iter().filter_map(|s| s.expanded).map(|v| v as f64)),
        failures,
    }
}

/// Runs `cfg.trials` independent trials on up to `workers` threads. Reports
/// come back in trial order whatever the scheduling.
pub fn run_trials(p: &Pipeline, cfg: &TrialConfig, transport: &dyn Transport, workers: usize) -> Vec<TrialReport> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<TrialReport>>> = Mutex::new(vec![None; cfg.trials]);
    let workers = workers.clamp(1, cfg.trials.max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let trial = next.fetch_add(1, Ordering::SeqCst);
                if trial >= cfg.trials {
                    break;
                }
                log::info!("{} trial {trial}", cfg.instance_name());
                let report = p.run(cfg, transport, trial);
                slots.lock().expect("trial slots")[trial] = Some(report);
            });
        }
    });
    slots
        .into_inner()
        .expect("trial slots")
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported report format `{0}` (expected table, csv or json)")]
pub struct UnsupportedFormat(pub String);

impl FromStr for ReportFormat {
    type Err = UnsupportedFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" | "table-text" | "text" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" | "structured" => Ok(ReportFormat::Json),
            other => Err(UnsupportedFormat(other.to_string())),
        }
    }
}

pub const COLUMNS: [&str; 13] = [
    "domain",
    "scene",
    "model",
    "trials",
    "success_orig_pct",
    "success_decomp_pct",
    "plan_len_orig",
    "plan_len_decomp",
    "gt",
    "time_orig_s",
    "time_decomp_s",
    "expanded_orig",
    "expanded_decomp",
];

/// `×` when no trial succeeded, `-` when the value was not recorded.
fn measure(v: Option<f64>, successes: usize, decimals: usize) -> String {
    match v {
        Some(v) => format!("{v:.decimals$}"),
        None if successes == 0 => NOT_APPLICABLE.into(),
        None => OMITTED.into(),
    }
}

fn cells(a: &Aggregate) -> Vec<String> {
    vec![
        a.domain.to_string(),
        a.scene.clone(),
        a.model.clone(),
        a.trials.to_string(),
        format!("{:.0}", 100.0 * a.success_rate_orig()),
        format!("{:.0}", 100.0 * a.success_rate_decomp()),
        measure(a.plan_len_orig, a.success_orig, 2),
        measure(a.plan_len_decomp, a.success_decomp, 2),
        a.gt.map_or(OMITTED.to_string(), |g| g.to_string()),
        measure(a.time_orig, a.success_orig, 4),
        measure(a.time_decomp, a.success_decomp, 4),
        measure(a.expanded_orig, a.success_orig, 1),
        measure(a.expanded_decomp, a.success_decomp, 1),
    ]
}

/// Rows are sorted by domain, scene and model.
pub fn emit_report(rows: &[Aggregate], format: ReportFormat) -> String {
    let mut rows: Vec<&Aggregate> = rows.iter().collect();
    rows.sort_by(|a, b| (a.domain, &a.scene, &a.model).cmp(&(b.domain, &b.scene, &b.model)));
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("aggregates serialize");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut out = COLUMNS.join(",");
            out.push('\n');
            for r in rows {
                out.push_str(&cells(r).join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Table => {
            let table: Vec<Vec<String>> = std::iter::once(COLUMNS.iter().map(|c| c.to_string()).collect())
                .chain(rows.into_iter().map(cells))
                .collect();
            let widths: Vec<usize> = (0..COLUMNS.len())
                .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for (i, row) in table.iter().enumerate() {
                let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                let _ = writeln!(out, "{}", line.join("  ").trim_end());
                if i == 0 {
                    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                    let _ = writeln!(out, "{}", rule.join("  "));
                }
            }
            out
        }
    }
}
