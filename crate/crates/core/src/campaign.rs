//! Seeded campaigns: many independent runs of one scenario, merged in seed
//! order and reduced to a [`Report`].
//!
//! Seed `i` of a campaign runs with `rng::seed_stream(master_seed, i)`, so
//! any subset of seeds can be recomputed on its own and the result does not
//! depend on how many worker threads were used. Each finished seed is saved
//! under `<out>/seeds/` so an interrupted campaign can resume.

use std::fmt::Write as _;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{aggregate_seeds, IntervalLabel, Metric, Report, RunCollector, RunMetrics};
use crate::rach::{rach_metrics, simulate_rach, RachError};
use crate::rng;
use crate::scenario::{Population, ProfileTraffic, Scenario};
use crate::slicing::{run_slice, PlanMode, Profile, SliceDevice, SlicePlan, SliceRun, SliceStats};

pub const DEFAULT_SLICING_SEEDS: usize = 25;
pub const DEFAULT_RACH_SEEDS: usize = 1000;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: written for scenario {found}, current scenario is {expected}")]
    HashMismatch { path: PathBuf, expected: String, found: String },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Rach(#[from] RachError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("{} of {total} seeds failed: {}", failed.len(), failed.iter().map(|(i, m)| format!("seed {i}: {m}")).collect::<Vec<_>>().join("; "))]
    SeedsFailed { total: usize, failed: Vec<(usize, String)> },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workload {
    /// eMBB and URLLC slices over the whole horizon.
    Slicing,
    /// The mMTC random-access bursts at the start of each interval.
    Rach,
}

impl Workload {
    pub fn as_str(self) -> &'static str {
        match self {
            Workload::Slicing => "slicing",
            Workload::Rach => "rach",
        }
    }
}

/// The slice-run inputs for one profile under `plan`.
pub fn slice_run<'a>(
    scenario: &'a Scenario,
    plan: &'a SlicePlan,
    profile: Profile,
    devices: &'a [SliceDevice],
    run_seed: u64,
) -> SliceRun<'a> {
    let n = &scenario.network;
    SliceRun {
        profile,
        plan,
        carrier: scenario.carrier(),
        gnb: scenario.floorplan.gnb_position(),
        channel: &n.channel,
        pipeline: n.pipeline,
        bler: n.bler,
        overhead: n.tb_overhead,
        channel_refresh: scenario.channel_refresh(),
        devices,
        run_seed,
    }
}

#[derive(Debug, Clone)]
pub struct SlicingOutcome {
    pub metrics: RunMetrics,
    pub embb: SliceStats,
    pub urllc: SliceStats,
}

/// One seed of the slicing model under one plan.
pub fn run_slicing_seed(scenario: &Scenario, population: &Population, mode: PlanMode, run_seed: u64) -> SlicingOutcome {
    let plan = scenario.slice_plan(mode);
    let f = &scenario.fleet;
    let mut collector = RunCollector::new(
        scenario.latency_threshold(),
        scenario.n_intervals(),
        [f.workers as usize, f.agvs as usize, f.smart_tags as usize],
    );
    let mut stats = Vec::new();
    for profile in [Profile::Embb, Profile::Urllc] {
        let devices = population.slice_devices(profile, run_seed);
        let run = slice_run(scenario, &plan, profile, &devices, run_seed);
        stats.push(run_slice(&run, ProfileTraffic::new(scenario, profile, run_seed), |r| collector.add(r)));
    }
    let urllc = stats.pop().expect("two slices");
    let embb = stats.pop().expect("two slices");
    SlicingOutcome { metrics: collector.metrics(), embb, urllc }
}

/// Seed of the random-access burst of 0-based `interval`.
pub fn rach_seed(run_seed: u64, interval: usize) -> u64 {
    rng::derive(run_seed, &[rng::label::RACH, interval as u64])
}

/// One seed of the random-access model under one plan: a burst per interval
/// with that interval's arrival count and PRACH index. The combined row is
/// the mean of the interval rows.
pub fn run_rach_seed(scenario: &Scenario, mode: PlanMode, run_seed: u64) -> Result<RunMetrics, RachError> {
    let mut out = RunMetrics::default();
    let mut combined: Vec<(Metric, Vec<f64>)> = Vec::new();
    let mut push = |out: &mut RunMetrics, iv: usize, metric: Metric, v: f64| {
        out.insert(IntervalLabel::Interval(iv as u8 + 1), Profile::Mmtc, metric, v);
        match combined.iter_mut().find(|(m, _)| *m == metric) {
            Some((_, vs)) => vs.push(v),
            None => combined.push((metric, vec![v])),
        }
    };
    for (iv, spec) in scenario.intervals.iter().enumerate() {
        if spec.mmtc_arrivals == 0 {
            continue;
        }
        let cfg = scenario.rach_config(scenario.rach_indices(mode)[iv])?;
        let res = simulate_rach(spec.mmtc_arrivals, None, &cfg, rach_seed(run_seed, iv))?;
        let m = rach_metrics(&res);
        push(&mut out, iv, Metric::BlockingProbability, m.blocking_probability);
        if let Some(r) = m.avg_preamble_retx {
            push(&mut out, iv, Metric::AvgPreambleRetx, r);
        }
        if let Some(d) = m.access_delay_ms {
            push(&mut out, iv, Metric::AccessDelayMs, d.mean);
            push(&mut out, iv, Metric::AccessDelayDevLoMs, d.dev_lo);
            push(&mut out, iv, Metric::AccessDelayDevHiMs, d.dev_hi);
        }
    }
    for (metric, vs) in combined {
        out.insert(IntervalLabel::Combined, Profile::Mmtc, metric, vs.iter().sum::<f64>() / vs.len() as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub workload: Workload,
    pub plans: Vec<PlanMode>,
    pub seeds: usize,
    pub master_seed: u64,
    pub jobs: usize,
    /// Where finished seeds are saved and looked up; `None` disables resume.
    pub resume_dir: Option<PathBuf>,
}

/// Metrics of every plan for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub index: usize,
    pub run_seed: u64,
    pub plans: Vec<(PlanMode, RunMetrics)>,
}

fn run_seed_all(scenario: &Scenario, spec: &CampaignSpec, index: usize) -> Result<SeedResult, String> {
    let run_seed = rng::seed_stream(spec.master_seed, index as u64);
    let mut plans = Vec::new();
    match spec.workload {
        Workload::Slicing => {
            let population = Population::build(scenario, run_seed);
            for &mode in &spec.plans {
                plans.push((mode, run_slicing_seed(scenario, &population, mode, run_seed).metrics));
            }
        }
        Workload::Rach => {
            for &mode in &spec.plans {
                plans.push((mode, run_rach_seed(scenario, mode, run_seed).map_err(|e| e.to_string())?));
            }
        }
    }
    Ok(SeedResult { index, run_seed, plans })
}

fn seed_file(dir: &Path, workload: Workload, index: usize) -> PathBuf {
    dir.join("seeds").join(format!("{}-{index:05}.csv", workload.as_str()))
}

const SEED_HEADER: &str = "plan,interval,profile,metric,value";

fn save_seed(path: &Path, hash: &str, master_seed: u64, r: &SeedResult) -> Result<(), CampaignError> {
    let mut s = format!("# config_hash: {hash}\n# master_seed: {master_seed}\n# run_seed: {}\n{SEED_HEADER}\n", r.run_seed);
    for (mode, m) in &r.plans {
        for (k, v) in &m.values {
            // Display of f64 is shortest round-trip, so reloading is exact
            let _ = writeln!(s, "{mode},{},{},{},{v}", k.interval, k.profile, k.metric);
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, s).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn load_seed(path: &Path, hash: &str, spec: &CampaignSpec, index: usize) -> Result<Option<SeedResult>, CampaignError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(path)(e)),
    };
    let corrupt = |message: String| CampaignError::Corrupt { path: path.to_path_buf(), message };
    let mut found_hash = None;
    let mut master = None;
    let mut plans: Vec<(PlanMode, RunMetrics)> = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("# config_hash: ") {
            found_hash = Some(h.trim().to_string());
        } else if let Some(m) = line.strip_prefix("# master_seed: ") {
            master = m.trim().parse::<u64>().ok();
        } else if line.starts_with('#') || line == SEED_HEADER || line.is_empty() {
            continue;
        } else {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(corrupt(format!("bad line {line:?}")));
            }
            let mode: PlanMode = f[0].parse().map_err(corrupt)?;
            let interval: IntervalLabel = f[1].parse().map_err(corrupt)?;
            let profile: Profile = f[2].parse().map_err(corrupt)?;
            let metric: Metric = f[3].parse().map_err(corrupt)?;
            let value: f64 = f[4].parse().map_err(|e| corrupt(format!("{e}")))?;
            let slot = match plans.iter().position(|(m, _)| *m == mode) {
                Some(i) => i,
                None => {
                    plans.push((mode, RunMetrics::default()));
                    plans.len() - 1
                }
            };
            plans[slot].1.insert(interval, profile, metric, value);
        }
    }
    let found = found_hash.ok_or_else(|| corrupt("missing config hash".into()))?;
    if found != hash {
        return Err(CampaignError::HashMismatch { path: path.to_path_buf(), expected: hash.to_string(), found });
    }
    // a different master seed or plan set means the file answers another question
    if master != Some(spec.master_seed) || spec.plans.iter().any(|p| !plans.iter().any(|(m, _)| m == p)) {
        return Ok(None);
    }
    plans.retain(|(m, _)| spec.plans.contains(m));
    plans.sort_by_key(|(m, _)| spec.plans.iter().position(|p| p == m));
    let run_seed = rng::seed_stream(spec.master_seed, index as u64);
    Ok(Some(SeedResult { index, run_seed, plans }))
}

/// Runs or reloads every seed, then aggregates per plan.
///
/// Seeds that fail do not stop the others; their indices are reported in
/// [`CampaignError::SeedsFailed`] after all seeds were attempted.
pub fn run_campaign(scenario: &Scenario, spec: &CampaignSpec) -> Result<(Report, Vec<SeedResult>), CampaignError> {
    assert!(spec.seeds >= 1, "a campaign needs at least one seed");
    let hash = scenario.config_hash();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<SeedResult, CampaignError>> = pool.install(|| {
        (0..spec.seeds)
            .into_par_iter()
            .map(|i| {
                let path = spec.resume_dir.as_deref().map(|d| seed_file(d, spec.workload, i));
                if let Some(p) = &path {
                    if let Some(done) = load_seed(p, &hash, spec, i)? {
                        log::debug!("seed {i}: reusing {}", p.display());
                        return Ok(done);
                    }
                }
                let r = panic::catch_unwind(AssertUnwindSafe(|| run_seed_all(scenario, spec, i)))
                    .unwrap_or_else(|e| Err(panic_message(&e)))
                    .map_err(|m| CampaignError::SeedsFailed { total: spec.seeds, failed: vec![(i, m)] })?;
                if let Some(p) = &path {
                    save_seed(p, &hash, spec.master_seed, &r)?;
                }
                log::info!("{} seed {i} done", spec.workload.as_str());
                Ok(r)
            })
            .collect()
    });

    let mut results = Vec::with_capacity(spec.seeds);
    let mut failed = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(CampaignError::SeedsFailed { failed: f, .. }) => failed.extend(f),
            Err(e) => return Err(e),
        }
    }
    if !failed.is_empty() {
        return Err(CampaignError::SeedsFailed { total: spec.seeds, failed });
    }
    Ok((aggregate(&hash, &spec.plans, &results), results))
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| e.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panicked".into())
}

/// Per-plan aggregation of seed results, plans in the given order.
pub fn aggregate(hash: &str, plans: &[PlanMode], results: &[SeedResult]) -> Report {
    let mut report = Report::new(hash);
    for &mode in plans {
        let runs: Vec<RunMetrics> = results
            .iter()
            .filter_map(|r| r.plans.iter().find(|(m, _)| *m == mode).map(|(_, x)| x.clone()))
            .collect();
        report.add_plan(mode.as_str(), &aggregate_seeds(&runs));
    }
    report
}

/// Merges reports of the same scenario, rows of `b` after those of `a`.
pub fn merge_reports(mut a: Report, b: Report) -> Report {
    debug_assert_eq!(a.config_hash, b.config_hash);
    a.rows.extend(b.rows);
    a
}

/// Plain-text run log: scenario hash, seeds, and derived RA overhead.
pub fn run_log(scenario: &Scenario, spec: &CampaignSpec, notes: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config_hash: {}", scenario.config_hash());
    let _ = writeln!(s, "workload: {}", spec.workload.as_str());
    let _ = writeln!(s, "plans: {}", spec.plans.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","));
    let _ = writeln!(s, "master_seed: {}", spec.master_seed);
    let _ = writeln!(s, "seeds: {}", spec.seeds);
    if spec.workload == Workload::Rach {
        for &mode in &spec.plans {
            for (iv, &index) in scenario.rach_indices(mode).iter().enumerate() {
                if let Ok(cfg) = scenario.rach_config(index) {
                    let _ = writeln!(
                        s,
                        "ra_overhead {mode} interval {}: index {index}, {} occasions/frame, {:.1}% of subframes",
                        iv + 1,
                        cfg.pattern.slots_per_frame(),
                        cfg.pattern.ra_overhead() * 100.0
                    );
                }
            }
        }
    }
    for n in notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "seed_index,run_seed");
    for i in 0..spec.seeds {
        let _ = writeln!(s, "{i},{}", rng::seed_stream(spec.master_seed, i as u64));
    }
    s
}
