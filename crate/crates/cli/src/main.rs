//! `nrslice`: run slicing and random-access campaigns on a scenario file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use nrslice::campaign::{
    merge_reports, run_campaign, run_log, CampaignError, CampaignSpec, Workload, DEFAULT_RACH_SEEDS,
    DEFAULT_SLICING_SEEDS,
};
use nrslice::metrics::{svg, Report};
use nrslice::reproduce::{format_table, rach_checks, slicing_checks};
use nrslice::slicing::PlanMode;
use nrslice::{load_scenario, Scenario};

const EXIT_INVALID: u8 = 2;
const EXIT_SEEDS_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "nrslice", version, about = "Static vs. dynamic 5G NR slicing in a logistics cell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Slicing campaign: eMBB throughput and URLLC latency.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_SLICING_SEEDS)]
        seeds: usize,
    },
    /// Random-access campaign: blocking, retransmissions and access delay.
    Rach {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_RACH_SEEDS)]
        seeds: usize,
        #[command(flatten)]
        overrides: RachOverrides,
    },
    /// Both campaigns with the published seed counts, compared against the
    /// published values.
    Reproduce {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_SLICING_SEEDS)]
        slicing_seeds: usize,
        #[arg(long, default_value_t = DEFAULT_RACH_SEEDS)]
        rach_seeds: usize,
    },
    /// Check a scenario file and print its hash.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file; the bundled one when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Plans::Both)]
    plans: Plans,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, env = "NRSLICE_OUT", default_value = "nrslice-out")]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,svg")]
    format: Vec<Format>,
}

#[derive(Args, Debug)]
struct RachOverrides {
    /// Arrivals in every interval.
    #[arg(long)]
    arrivals: Option<u32>,
    #[arg(long)]
    preambles: Option<u32>,
    /// preambleTransMax.
    #[arg(long)]
    max_attempts: Option<u32>,
    /// PRACH configuration index for every interval and plan.
    #[arg(long)]
    index: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Plans {
    Static,
    Dynamic,
    Both,
}

impl Plans {
    fn modes(self) -> Vec<PlanMode> {
        match self {
            Plans::Static => vec![PlanMode::Static],
            Plans::Dynamic => vec![PlanMode::Dynamic],
            Plans::Both => vec![PlanMode::Static, PlanMode::Dynamic],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

/// Errors that map to a dedicated exit code.
#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    SeedsFailed(anyhow::Error),
    Criteria(usize),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::SeedsFailed(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_SEEDS_FAILED)
        }
        Err(Failure::Criteria(n)) => {
            eprintln!("{n} row(s) outside tolerance");
            ExitCode::FAILURE
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { scenario } => {
            let s = scenario_from(scenario.as_deref())?;
            println!("ok {}", s.config_hash());
            println!(
                "{} intervals of {} s, {} AGVs, {} workers, {} tags",
                s.n_intervals(),
                s.network.interval_duration_s,
                s.fleet.agvs,
                s.fleet.workers,
                s.fleet.smart_tags
            );
            Ok(())
        }
        Command::Run { common, seeds } => {
            let s = scenario_from(common.scenario.as_deref())?;
            let report = campaign(&s, &common, Workload::Slicing, seeds)?;
            write_outputs(&common, "slicing", &report)?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Rach { common, seeds, overrides } => {
            let mut s = scenario_from(common.scenario.as_deref())?;
            apply_overrides(&mut s, &overrides)?;
            let report = campaign(&s, &common, Workload::Rach, seeds)?;
            write_outputs(&common, "rach", &report)?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Reproduce { common, slicing_seeds, rach_seeds } => {
            let s = scenario_from(common.scenario.as_deref())?;
            let rach = campaign(&s, &common, Workload::Rach, rach_seeds)?;
            let slicing = campaign(&s, &common, Workload::Slicing, slicing_seeds)?;
            let mut checks = rach_checks(&rach);
            checks.extend(slicing_checks(&slicing));
            let report = merge_reports(rach, slicing);
            write_outputs(&common, "reproduce", &report)?;
            let table = format_table(&checks);
            let path = common.out.join("reproduce.txt");
            fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
            print!("{table}");
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(Failure::Criteria(failed));
            }
            Ok(())
        }
    }
}

fn scenario_from(path: Option<&Path>) -> Result<Scenario, Failure> {
    let s = match path {
        Some(p) => load_scenario(p).map_err(|e| Failure::Invalid(e.into()))?,
        None => Scenario::bundled(),
    };
    s.validate().map_err(|e| Failure::Invalid(e.into()))?;
    Ok(s)
}

fn apply_overrides(s: &mut Scenario, o: &RachOverrides) -> Result<(), Failure> {
    if let Some(n) = o.arrivals {
        for iv in &mut s.intervals {
            iv.mmtc_arrivals = n;
        }
        s.fleet.smart_tags = s.fleet.smart_tags.max(n);
    }
    if let Some(p) = o.preambles {
        s.rach.num_preambles = p;
    }
    if let Some(m) = o.max_attempts {
        s.rach.preamble_trans_max = m;
    }
    if let Some(i) = o.index {
        let n = s.n_intervals();
        s.rach.static_indices = vec![i; n];
        s.rach.dynamic_indices = vec![i; n];
    }
    s.validate().map_err(|e| Failure::Invalid(e.into()))
}

fn campaign(s: &Scenario, common: &Common, workload: Workload, seeds: usize) -> Result<Report, Failure> {
    if seeds == 0 {
        return Err(Failure::Invalid(anyhow::anyhow!("--seeds must be at least 1")));
    }
    let jobs = common
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let spec = CampaignSpec {
        workload,
        plans: common.plans.modes(),
        seeds,
        master_seed: common.master_seed,
        jobs,
        resume_dir: Some(common.out.clone()),
    };
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    info!("{} campaign: {seeds} seeds, {jobs} jobs", workload.as_str());
    let log_path = common.out.join(format!("{}.log", workload.as_str()));
    match run_campaign(s, &spec) {
        Ok((report, _)) => {
            fs::write(&log_path, run_log(s, &spec, &[])).with_context(|| format!("writing {}", log_path.display()))?;
            Ok(report)
        }
        Err(e @ CampaignError::SeedsFailed { .. }) => {
            let note = e.to_string();
            fs::write(&log_path, run_log(s, &spec, &[note])).with_context(|| format!("writing {}", log_path.display()))?;
            Err(Failure::SeedsFailed(e.into()))
        }
        Err(e @ CampaignError::HashMismatch { .. }) => Err(Failure::Invalid(e.into())),
        Err(e) => Err(Failure::Other(e.into())),
    }
}

fn write_outputs(common: &Common, stem: &str, report: &Report) -> Result<(), Failure> {
    let out = &common.out;
    if common.format.contains(&Format::Csv) {
        let path = out.join(format!("{stem}.csv"));
        fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    if common.format.contains(&Format::Svg) {
        let dir = out.join(format!("{stem}-charts"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let (charts, omitted) = svg::render_all(report);
        for (name, body) in charts {
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        if !omitted.is_empty() {
            let log = out.join(format!("{stem}.log"));
            let mut text = fs::read_to_string(&log).unwrap_or_default();
            for f in &omitted {
                text.push_str(&format!("note: chart {f} omitted, no data\n"));
            }
            fs::write(&log, text).with_context(|| format!("writing {}", log.display()))?;
            info!("charts without data: {}", omitted.join(", "));
        }
    }
    Ok(())
}
