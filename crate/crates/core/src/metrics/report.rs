use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{IntervalLabel, Metric, MetricKey, RunMetrics};
use crate::slicing::Profile;

pub const CSV_HEADER: &str = "plan,interval,profile,metric,mean,dev_lo,dev_hi,seeds";
const HASH_PREFIX: &str = "# config_hash: ";

/// `x` rounded to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("formatted float parses")
}

/// Cross-seed summary of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Mean shortfall of the seeds below the mean.
    pub dev_lo: f64,
    /// Mean excess of the seeds above the mean.
    pub dev_hi: f64,
    pub seeds: usize,
}

impl Aggregate {
    /// Values are sorted first so the result does not depend on their order.
    pub fn of(values: &[f64]) -> Option<Aggregate> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let side = |above: bool| {
            let d: Vec<f64> = v
                .iter()
                .filter(|&&x| if above { x > mean } else { x < mean })
                .map(|&x| (x - mean).abs())
                .collect();
            if d.is_empty() { 0.0 } else { d.iter().sum::<f64>() / d.len() as f64 }
        };
        Some(Aggregate { mean, dev_lo: side(false), dev_hi: side(true), seeds: v.len() })
    }
}

/// Per-metric aggregation over seeds; each value is first rounded to nine
/// significant digits.
pub fn aggregate_seeds(runs: &[RunMetrics]) -> BTreeMap<MetricKey, Aggregate> {
    let mut by_key: BTreeMap<MetricKey, Vec<f64>> = BTreeMap::new();
    for run in runs {
        for (k, v) in &run.values {
            by_key.entry(*k).or_default().push(round_sig(*v, 9));
        }
    }
    by_key.into_iter().filter_map(|(k, v)| Aggregate::of(&v).map(|a| (k, a))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub plan: String,
    pub key: MetricKey,
    pub agg: Aggregate,
}

/// Aggregated results of a campaign, tagged with the scenario hash.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Report { config_hash: config_hash.into(), rows: Vec::new() }
    }

    pub fn add_plan(&mut self, plan: &str, aggs: &BTreeMap<MetricKey, Aggregate>) {
        self.rows.extend(aggs.iter().map(|(k, a)| ReportRow { plan: plan.to_string(), key: *k, agg: *a }));
    }

    pub fn get(&self, plan: &str, interval: IntervalLabel, profile: Profile, metric: Metric) -> Option<&Aggregate> {
        let key = MetricKey { interval, profile, metric };
        self.rows.iter().find(|r| r.plan == plan && r.key == key).map(|r| &r.agg)
    }

    pub fn plans(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.plan.as_str()) {
                out.push(&r.plan);
            }
        }
        out
    }

    /// Header line, one line per row, and a trailing comment with the hash.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.plan,
                r.key.interval,
                r.key.profile,
                r.key.metric,
                round_sig(r.agg.mean, 9),
                round_sig(r.agg.dev_lo, 9),
                round_sig(r.agg.dev_hi, 9),
                r.agg.seeds
            );
        }
        let _ = writeln!(s, "{HASH_PREFIX}{}", self.config_hash);
        s
    }

    /// The same report with every value rounded as [`Report::to_csv`] does.
    pub fn rounded(&self) -> Report {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.agg.mean = round_sig(r.agg.mean, 9);
            r.agg.dev_lo = round_sig(r.agg.dev_lo, 9);
            r.agg.dev_hi = round_sig(r.agg.dev_hi, 9);
        }
        out
    }
}

pub fn parse_csv(text: &str) -> Result<Report, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        other => return Err(format!("expected header {CSV_HEADER:?}, got {:?}", other.map(|l| l.1))),
    }
    let mut report = Report::default();
    for (n, line) in lines {
        if let Some(hash) = line.strip_prefix(HASH_PREFIX) {
            report.config_hash = hash.trim().to_string();
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(format!("line {}: {} fields", n + 1, f.len()));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("line {}: field {i}: {e}", n + 1));
        report.rows.push(ReportRow {
            plan: f[0].to_string(),
            key: MetricKey {
                interval: f[1].parse()?,
                profile: f[2].parse().map_err(|e| format!("line {}: {e}", n + 1))?,
                metric: f[3].parse()?,
            },
            agg: Aggregate {
                mean: num(4)?,
                dev_lo: num(5)?,
                dev_hi: num(6)?,
                seeds: f[7].parse().map_err(|e| format!("line {}: {e}", n + 1))?,
            },
        });
    }
    Ok(report)
}
