//! Per-packet records, the metrics computed from them, cross-seed
//! aggregation and export.

mod records;
pub mod report;
pub mod svg;

pub use records::{DropReason, Packet, PacketRecord};
pub use report::{aggregate_seeds, parse_csv, round_sig, Aggregate, Report, ReportRow, CSV_HEADER};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::slicing::Profile;
use crate::timebase::SimTime;

/// Bits per second over the window from the first creation to the last
/// delivery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub bps: f64,
    /// Set when nothing was delivered; `bps` is then 0.
    pub empty: bool,
}

pub fn throughput(records: &[PacketRecord]) -> Throughput {
    let mut acc = FlowAccumulator::default();
    records.iter().for_each(|r| acc.add(r, SimTime::MAX));
    acc.throughput()
}

/// Share of records delivered strictly faster than `threshold`; dropped
/// packets count against it. `None` for an empty slice of records.
pub fn threshold_reliability(records: &[PacketRecord], threshold: SimTime) -> Option<f64> {
    let mut acc = FlowAccumulator::default();
    records.iter().for_each(|r| acc.add(r, threshold));
    acc.reliability()
}

/// Streaming form of [`throughput`] and [`threshold_reliability`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlowAccumulator {
    pub packets: u64,
    pub on_time: u64,
    pub dropped: u64,
    pub bytes_delivered: u64,
    pub first_created: Option<SimTime>,
    pub last_delivered: Option<SimTime>,
}

impl FlowAccumulator {
    pub fn add(&mut self, r: &PacketRecord, threshold: SimTime) {
        self.packets += 1;
        self.first_created = Some(self.first_created.map_or(r.created, |f| f.min(r.created)));
        match r.delivered {
            Some(at) => {
                self.bytes_delivered += r.size_bytes as u64;
                self.last_delivered = Some(self.last_delivered.map_or(at, |l| l.max(at)));
                if at - r.created < threshold {
                    self.on_time += 1;
                }
            }
            None => self.dropped += 1,
        }
    }

    pub fn merge(&mut self, o: &FlowAccumulator) {
        self.packets += o.packets;
        self.on_time += o.on_time;
        self.dropped += o.dropped;
        self.bytes_delivered += o.bytes_delivered;
        self.first_created = match (self.first_created, o.first_created) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.last_delivered = match (self.last_delivered, o.last_delivered) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    pub fn throughput(&self) -> Throughput {
        match (self.first_created, self.last_delivered) {
            (Some(first), Some(last)) if self.bytes_delivered > 0 && last > first => Throughput {
                bps: 8.0 * self.bytes_delivered as f64 / (last - first).as_secs_f64(),
                empty: false,
            },
            _ => Throughput { bps: 0.0, empty: true },
        }
    }

    pub fn reliability(&self) -> Option<f64> {
        (self.packets > 0).then(|| self.on_time as f64 / self.packets as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntervalLabel {
    /// 1-based.
    Interval(u8),
    Combined,
}

impl fmt::Display for IntervalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalLabel::Interval(i) => write!(f, "{i}"),
            IntervalLabel::Combined => f.write_str("combined"),
        }
    }
}

impl FromStr for IntervalLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "combined" {
            return Ok(IntervalLabel::Combined);
        }
        s.parse().map(IntervalLabel::Interval).map_err(|_| format!("bad interval label {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    ThroughputBps,
    Reliability,
    Outage,
    BlockingProbability,
    AvgPreambleRetx,
    AccessDelayMs,
    AccessDelayDevLoMs,
    AccessDelayDevHiMs,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::ThroughputBps,
        Metric::Reliability,
        Metric::Outage,
        Metric::BlockingProbability,
        Metric::AvgPreambleRetx,
        Metric::AccessDelayMs,
        Metric::AccessDelayDevLoMs,
        Metric::AccessDelayDevHiMs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ThroughputBps => "throughput_bps",
            Metric::Reliability => "reliability",
            Metric::Outage => "outage",
            Metric::BlockingProbability => "blocking_probability",
            Metric::AvgPreambleRetx => "avg_preamble_retx",
            Metric::AccessDelayMs => "access_delay_ms",
            Metric::AccessDelayDevLoMs => "access_delay_dev_lo_ms",
            Metric::AccessDelayDevHiMs => "access_delay_dev_hi_ms",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetricKey {
    pub interval: IntervalLabel,
    pub profile: Profile,
    pub metric: Metric,
}

/// Metric values of one seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub values: BTreeMap<MetricKey, f64>,
}

impl RunMetrics {
    pub fn get(&self, interval: IntervalLabel, profile: Profile, metric: Metric) -> Option<f64> {
        self.values.get(&MetricKey { interval, profile, metric }).copied()
    }

    pub fn insert(&mut self, interval: IntervalLabel, profile: Profile, metric: Metric, value: f64) {
        self.values.insert(MetricKey { interval, profile, metric }, value);
    }

    pub fn extend(&mut self, other: RunMetrics) {
        self.values.extend(other.values);
    }
}

/// Folds packet records of one run into per-(interval, device) accumulators.
#[derive(Debug, Clone)]
pub struct RunCollector {
    threshold: SimTime,
    /// `[profile][interval][device]`
    flows: [Vec<Vec<FlowAccumulator>>; 3],
}

impl RunCollector {
    pub fn new(threshold: SimTime, n_intervals: usize, devices: [usize; 3]) -> Self {
        RunCollector {
            threshold,
            flows: devices.map(|n| vec![vec![FlowAccumulator::default(); n]; n_intervals]),
        }
    }

    pub fn add(&mut self, r: &PacketRecord) {
        self.flows[r.profile.index()][r.interval as usize - 1][r.device as usize].add(r, self.threshold);
    }

    pub fn flow(&self, profile: Profile, interval: usize, device: usize) -> &FlowAccumulator {
        &self.flows[profile.index()][interval][device]
    }

    /// Throughput as the mean over devices that offered traffic, and
    /// reliability/outage pooled over every packet; per interval and over
    /// the concatenation of all intervals. mMTC data is not reported.
    pub fn metrics(&self) -> RunMetrics {
        let mut out = RunMetrics::default();
        for profile in [Profile::Embb, Profile::Urllc] {
            let per_iv = &self.flows[profile.index()];
            let n_dev = per_iv.first().map_or(0, |v| v.len());
            let mut combined_dev = vec![FlowAccumulator::default(); n_dev];
            let mut combined_pool = FlowAccumulator::default();
            for (iv, devs) in per_iv.iter().enumerate() {
                let label = IntervalLabel::Interval(iv as u8 + 1);
                let mut pool = FlowAccumulator::default();
                for (d, acc) in devs.iter().enumerate() {
                    pool.merge(acc);
                    combined_dev[d].merge(acc);
                }
                combined_pool.merge(&pool);
                Self::emit(&mut out, label, profile, devs, &pool);
            }
            Self::emit(&mut out, IntervalLabel::Combined, profile, &combined_dev, &combined_pool);
        }
        out
    }

    fn emit(out: &mut RunMetrics, label: IntervalLabel, profile: Profile, devs: &[FlowAccumulator], pool: &FlowAccumulator) {
        let active: Vec<f64> = devs.iter().filter(|a| a.packets > 0).map(|a| a.throughput().bps).collect();
        if !active.is_empty() {
            out.insert(label, profile, Metric::ThroughputBps, active.iter().sum::<f64>() / active.len() as f64);
        }
        if let Some(rel) = pool.reliability() {
            out.insert(label, profile, Metric::Reliability, rel);
            out.insert(label, profile, Metric::Outage, 1.0 - rel);
        }
    }
}
