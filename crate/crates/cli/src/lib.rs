//! Config-driven runner for the morrey-core experiments.

pub mod config;
pub mod jobs;
pub mod presets;
pub mod runner;

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use config::{LabConfig, Overrides, Planned, Resolution};
pub use runner::{Format, Outcome, Summary};

/// Exit status for unreadable or invalid configs and refused budgets.
pub const EXIT_CONFIG: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Action {
    /// Execute every experiment and write reports.
    #[default]
    Run,
    /// Print the resolved plan with cost estimates.
    Describe,
}

#[derive(Debug, Parser)]
#[command(name = "morrey-lab", version, about = "Run Morrey-space operator experiments from a TOML file")]
pub struct Cli {
    #[arg(value_enum, default_value_t = Action::Run)]
    pub action: Action,
    /// Experiment file, or `preset:NAME`.
    #[arg(long, required_unless_present = "list")]
    pub config: Option<String>,
    /// Report directory; overrides the file's `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid spacing for every experiment: a number, or `h/k` to divide each grid's own.
    #[arg(long, value_name = "H")]
    pub resolution_override: Option<Resolution>,
    /// Seed for randomized input families; overrides the file's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the file's `threads`.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Run double quadratures above the evaluation budget.
    #[arg(long)]
    pub force: bool,
    /// List the built-in presets.
    #[arg(long)]
    pub list: bool,
}

/// Runs the command line and returns the process exit status: the number of
/// experiments without a pass verdict, or [`EXIT_CONFIG`].
pub fn main_with(cli: Cli) -> i32 {
    if cli.list {
        print!("{}", presets::listing());
        return 0;
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CONFIG
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<i32> {
    let path = cli.config.as_deref().expect("clap requires --config");
    let cfg = LabConfig::load(path)?;
    let ov = Overrides { resolution: cli.resolution_override, seed: cli.seed };
    let plan = cfg.plan(&ov)?;
    if cli.action == Action::Describe {
        print!("{}", runner::describe(&plan)?);
        return Ok(0);
    }
    runner::check_budget(&plan, cli.force)?;
    if let Some(n) = cli.threads.or(cfg.threads) {
        // A second global init in the same process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = cli.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("reports"));
    let started = runner::now_stamp();
    let t = Instant::now();
    let outcomes = runner::execute(plan);
    let summary = runner::summarize(&outcomes, started, t.elapsed().as_secs_f64());
    runner::write_reports(&out, cli.format, &outcomes, &summary)?;
    print!("{}", runner::verdict_lines(&outcomes));
    println!("{} of {} experiments failed; reports in {}", summary.failed, outcomes.len(), out.display());
    Ok(summary.failed as i32)
}
