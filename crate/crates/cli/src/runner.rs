//! Job execution, report files and the run summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use morrey_core::verify::{Check, ExperimentReport, Verdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Planned;

/// Double quadratures above this many kernel evaluations need `--force`.
pub const BUDGET: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Both,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub format: Format,
    pub force: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub id: String,
    pub experiment: String,
    pub paper_anchor: String,
    pub negative_control: bool,
    pub verdict: Verdict,
    pub headline: String,
    pub failed_checks: Vec<String>,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub experiments: Vec<SummaryEntry>,
    pub failed: usize,
    /// SHA-256 over the reports with timings cleared.
    pub determinism_hash: String,
    pub started_at: String,
    pub wall_clock_s: f64,
}

#[derive(Debug)]
pub struct Outcome {
    pub planned: Planned,
    pub report: ExperimentReport,
}

impl Outcome {
    pub fn failed(&self) -> bool {
        self.report.verdict != Verdict::Pass
    }
}

/// Refuses plans whose double quadratures exceed the budget.
pub fn check_budget(plan: &[Planned], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in plan {
        let cost = p.job.cost().with_context(|| format!("estimating cost of `{}`", p.id))?;
        if cost > BUDGET {
            anyhow::bail!(
                "experiment `{}` needs about {cost:.2e} kernel evaluations, above the {BUDGET:.0e} budget; rerun with --force",
                p.id
            );
        }
    }
    Ok(())
}

/// A runtime error becomes a failed report carrying the message.
fn errored(p: &Planned, err: &morrey_core::LabError) -> ExperimentReport {
    let mut r = ExperimentReport::new(&p.id, p.kind.tag(), p.params.clone());
    r.check(Check::flag("experiment completed", false));
    r.note(format!("error: {err}"));
    r.finish()
}

/// Runs every job, parallel across jobs.
pub fn execute(plan: Vec<Planned>) -> Vec<Outcome> {
    plan.into_par_iter()
        .map(|p| {
            let t = Instant::now();
            let mut report = match p.job.run(&p.id) {
                Ok(r) => r,
                Err(e) => errored(&p, &e),
            };
            report.paper_anchor = p.paper_anchor.clone();
            report.timing.wall_clock_s = t.elapsed().as_secs_f64();
            Outcome { planned: p, report }
        })
        .collect()
}

/// Canonical report text used for the determinism hash.
pub fn canonical(report: &ExperimentReport) -> String {
    let mut r = report.clone();
    r.timing = Default::default();
    serde_json::to_string(&r).expect("reports serialize")
}

pub fn determinism_hash(outcomes: &[Outcome]) -> String {
    let mut h = Sha256::new();
    for o in outcomes {
        h.update(canonical(&o.report).as_bytes());
        h.update(b"\n");
    }
    format!("{:x}", h.finalize())
}

pub fn summarize(outcomes: &[Outcome], started_at: String, wall: f64) -> Summary {
    let experiments: Vec<SummaryEntry> = outcomes
        .iter()
        .map(|o| SummaryEntry {
            id: o.report.id.clone(),
            experiment: o.report.experiment.clone(),
            paper_anchor: o.report.paper_anchor.clone(),
            negative_control: o.planned.negative_control,
            verdict: o.report.verdict,
            headline: format!("{:e}", o.report.headline),
            failed_checks: o.report.failed_checks().iter().map(|c| c.name.clone()).collect(),
            wall_clock_s: o.report.timing.wall_clock_s,
        })
        .collect();
    Summary {
        failed: outcomes.iter().filter(|o| o.failed()).count(),
        experiments,
        determinism_hash: determinism_hash(outcomes),
        started_at,
        wall_clock_s: wall,
    }
}

/// Writes reports one at a time, then the summary.
pub fn write_reports(out: &Path, format: Format, outcomes: &[Outcome], summary: &Summary) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for o in outcomes {
        if matches!(format, Format::Json | Format::Both) {
            let path = out.join(format!("{}.json", o.report.id));
            std::fs::write(&path, serde_json::to_string_pretty(&o.report)? + "\n")?;
            written.push(path);
        }
        if matches!(format, Format::Csv | Format::Both) {
            let path = out.join(format!("{}.csv", o.report.id));
            std::fs::write(&path, o.report.rows_csv())?;
            written.push(path);
        }
    }
    let path = out.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(summary)? + "\n")?;
    written.push(path);
    Ok(written)
}

/// One line per experiment for the terminal.
pub fn verdict_lines(outcomes: &[Outcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        let tag = match (o.report.verdict, o.planned.negative_control) {
            (Verdict::Pass, _) => "PASS",
            (_, true) => "FAIL (negative control)",
            (Verdict::Fail, false) => "FAIL",
            (Verdict::Inconclusive, false) => "INCONCLUSIVE",
        };
        let _ = writeln!(
            s,
            "{tag:<24} {:<28} headline {:<12.5e} {:>8.2}s  [{}]",
            o.report.id, o.report.headline, o.report.timing.wall_clock_s, o.report.paper_anchor
        );
        for c in o.report.failed_checks() {
            let _ = writeln!(s, "{:<24} check `{}`: {:e} vs {:e}", "", c.name, c.value, c.threshold);
        }
        if o.report.verdict == Verdict::Fail && o.report.failed_checks().is_empty() {
            let rows_over = o.report.row_threshold.is_some_and(|t| o.report.rows.iter().any(|r| !(r.ratio <= t)));
            let why = if rows_over { "a row ratio exceeds its bound" } else { "the headline is unstable under refinement" };
            let _ = writeln!(s, "{:<24} {why}", "");
        }
    }
    s
}

fn kinds_in(v: &serde_json::Value, key: &str, acc: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, child) in m {
                if k == key {
                    if let Some(kind) = child.get("kind").and_then(|x| x.as_str()) {
                        let label = match child.get("p").and_then(|p| p.as_f64()) {
                            Some(p) => format!("{kind}(p = {p})"),
                            None => kind.to_string(),
                        };
                        if !acc.contains(&label) {
                            acc.push(label);
                        }
                    }
                }
                kinds_in(child, key, acc);
            }
        }
        serde_json::Value::Array(items) => items.iter().for_each(|x| kinds_in(x, key, acc)),
        _ => {}
    }
}

/// The resolved plan in human-readable form.
pub fn describe(plan: &[Planned]) -> Result<String> {
    let mut s = String::new();
    let mut total = 0.0;
    for p in plan {
        let cost = p.job.cost()?;
        total += cost;
        writeln!(s, "{} [{}]", p.id, p.kind.tag())?;
        writeln!(s, "  anchor: {}", p.paper_anchor)?;
        if p.negative_control {
            writeln!(s, "  negative control: expected to fail")?;
        }
        if let Some(n) = p.job.cells() {
            let h = p.params["grid"]["h"].as_f64().unwrap_or(f64::NAN);
            writeln!(s, "  grid: {n} nodes, h = {h}")?;
        }
        for (label, keys) in [
            ("spaces", &["space", "x1", "x2", "y", "dual_override"][..]),
            ("kernels", &["kernel"][..]),
            ("profiles", &["profile", "u", "u1", "u2"][..]),
            ("families", &["family", "bmo_family"][..]),
        ] {
            let mut acc = Vec::new();
            for k in keys {
                kinds_in(&p.params, k, &mut acc);
            }
            if let Some(serde_json::Value::String(fam)) = p.params.get("b_family") {
                if label == "families" {
                    acc.push(format!("b family {fam}"));
                }
            }
            if !acc.is_empty() {
                writeln!(s, "  {label}: {}", acc.join(", "))?;
            }
        }
        if let Some(pairs) = p.params.get("pairs").and_then(|x| x.as_array()) {
            writeln!(s, "  input family: {} entries", pairs.len())?;
        }
        if cost > 0.0 {
            writeln!(s, "  estimated cost: {cost:.3e} kernel evaluations")?;
        }
        if cost > BUDGET {
            writeln!(s, "  WARNING: above the {BUDGET:.0e} evaluation budget; running needs --force")?;
        }
    }
    writeln!(s, "{} experiments, {total:.3e} kernel evaluations in total", plan.len())?;
    Ok(s)
}

pub fn now_stamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
