//! Scenario description: network constants, slice splits, random-access
//! settings, floorplan, fleet, traffic and the activity intervals.
//!
//! Scenarios are TOML documents. [`Scenario::from_toml_str`] parses and
//! validates; every error names the field it concerns. The canonical form
//! used for hashing is the re-serialized validated document, so formatting
//! and comments in the source file do not change the hash.

pub mod fleet;
pub mod floorplan;
pub mod mobility;
pub mod traffic;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::rach::{CustomPattern, RaSlotPattern, RachConfig};
use crate::slicing::{build_slice_plan, BlerModel, Carrier, LatencyPipeline, PlanMode, SlicePlan};
use crate::timebase::{Numerology, SimTime, MAX_DATA_MU};

pub use fleet::{Population, DeviceKind};
pub use floorplan::{Floorplan, Rack};
pub use mobility::{MobilityState, Trajectory};
pub use traffic::{generate_traffic, ProfileTraffic};

/// The scenario shipped with the crate.
pub const BUNDLED_SCENARIO: &str = include_str!("../../scenarios/distribution_center.scenario");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ScenarioError {
    fn invalid(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError::Invalid { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub bandwidth_mhz: f64,
    pub guard_fraction: f64,
    pub interval_duration_s: u32,
    pub latency_threshold_ms: f64,
    pub tb_overhead: f64,
    /// How often a moving device's link is re-evaluated.
    pub channel_refresh_ms: u32,
    pub channel: ChannelParams,
    pub pipeline: LatencyPipeline,
    pub bler: BlerModel,
}

/// Split fractions are ordered (eMBB, URLLC, mMTC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicesSection {
    pub numerologies: [u8; 3],
    pub static_split: [f64; 3],
    pub dynamic_splits: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RachSection {
    pub num_preambles: u32,
    pub preamble_trans_max: u32,
    pub rar_window_ms: f64,
    pub backoff_indicator_ms: f64,
    pub rar_processing_delay_ms: f64,
    /// PRACH configuration index per interval.
    pub static_indices: Vec<u32>,
    pub dynamic_indices: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<CustomPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSection {
    pub agvs: u32,
    pub workers: u32,
    pub smart_tags: u32,
    pub agv_height_m: f64,
    pub worker_height_m: f64,
    pub agv_speed_mps: f64,
    pub worker_speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub urllc_packet_bytes: u32,
    pub urllc_rate_hz: f64,
    pub embb_packet_bytes: u32,
    pub mmtc_packet_bytes: u32,
    pub mmtc_report_period_s: f64,
    /// Width of the window the simultaneous arrivals fall into.
    pub mmtc_batch_spread_ms: f64,
    pub loading_trips_per_hour: f64,
    pub storing_trips_per_hour: f64,
    pub worker_trips_per_hour: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgvActivity {
    /// Trailer dock to palletizer and back.
    Loading,
    /// Palletizer to racks and back.
    Storing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub agvs: u32,
    pub agv_activity: AgvActivity,
    pub embb_rate_mbps: f64,
    pub mmtc_arrivals: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: NetworkSection,
    pub slices: SlicesSection,
    pub rach: RachSection,
    pub floorplan: Floorplan,
    pub fleet: FleetSection,
    pub traffic: TrafficSection,
    pub intervals: Vec<IntervalSpec>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    Scenario::from_toml_str(&text)
}

fn positive(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::invalid(path, format!("must be positive, got {v}")))
    }
}

impl Scenario {
    pub fn bundled() -> Scenario {
        Scenario::from_toml_str(BUNDLED_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario, ScenarioError> {
        let de = toml::Deserializer::new(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().message().trim().to_string();
            ScenarioError::Parse { path, message }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Canonical TOML of this scenario.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn carrier(&self) -> Carrier {
        Carrier { bandwidth_hz: self.network.bandwidth_mhz * 1e6, guard_fraction: self.network.guard_fraction }
    }

    pub fn interval_duration(&self) -> SimTime {
        SimTime::from_secs(self.network.interval_duration_s as u64)
    }

    pub fn n_intervals(&self) -> usize {
        self.intervals.len()
    }

    pub fn horizon(&self) -> SimTime {
        SimTime(self.interval_duration().0 * self.n_intervals() as u64)
    }

    pub fn interval_start(&self, interval: usize) -> SimTime {
        SimTime(self.interval_duration().0 * interval as u64)
    }

    pub fn latency_threshold(&self) -> SimTime {
        SimTime::from_ms_f64(self.network.latency_threshold_ms)
    }

    pub fn channel_refresh(&self) -> SimTime {
        SimTime::from_ms(self.network.channel_refresh_ms as u64)
    }

    pub fn numerologies(&self) -> [Numerology; 3] {
        self.slices.numerologies.map(|m| Numerology::new(m).expect("validated"))
    }

    pub fn slice_plan(&self, mode: PlanMode) -> SlicePlan {
        self.try_slice_plan(mode).expect("validated")
    }

    fn try_slice_plan(&self, mode: PlanMode) -> Result<SlicePlan, ScenarioError> {
        let (splits, path): (Vec<[f64; 3]>, &str) = match mode {
            PlanMode::Static => (vec![self.slices.static_split], "slices.static_split"),
            PlanMode::Dynamic => (self.slices.dynamic_splits.clone(), "slices.dynamic_splits"),
        };
        build_slice_plan(
            mode,
            &splits,
            self.numerologies(),
            &self.carrier(),
            self.n_intervals(),
            self.interval_duration(),
        )
        .map_err(|e| ScenarioError::invalid(path, e))
    }

    pub fn rach_indices(&self, mode: PlanMode) -> &[u32] {
        match mode {
            PlanMode::Static => &self.rach.static_indices,
            PlanMode::Dynamic => &self.rach.dynamic_indices,
        }
    }

    /// Random-access settings with the given PRACH configuration index.
    pub fn rach_config(&self, index: u32) -> Result<RachConfig, crate::rach::RachError> {
        let r = &self.rach;
        let cfg = RachConfig {
            prach_config_index: index,
            pattern: RaSlotPattern::lookup(index, &r.patterns)?,
            num_preambles: r.num_preambles,
            preamble_trans_max: r.preamble_trans_max,
            rar_window: SimTime::from_ms_f64(r.rar_window_ms),
            backoff_indicator: SimTime::from_ms_f64(r.backoff_indicator_ms),
            rar_processing_delay: SimTime::from_ms_f64(r.rar_processing_delay_ms),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = &self.network;
        positive("network.bandwidth_mhz", n.bandwidth_mhz)?;
        if !(0.0..1.0).contains(&n.guard_fraction) {
            return Err(ScenarioError::invalid("network.guard_fraction", "must lie in [0, 1)"));
        }
        if n.interval_duration_s == 0 {
            return Err(ScenarioError::invalid("network.interval_duration_s", "must be positive"));
        }
        positive("network.latency_threshold_ms", n.latency_threshold_ms)?;
        if !(n.tb_overhead > 0.0 && n.tb_overhead <= 1.0) {
            return Err(ScenarioError::invalid("network.tb_overhead", "must lie in (0, 1]"));
        }
        if n.channel_refresh_ms == 0 {
            return Err(ScenarioError::invalid("network.channel_refresh_ms", "must be positive"));
        }
        let c = &n.channel;
        if !(0.5..=100.0).contains(&c.carrier_ghz) {
            return Err(ScenarioError::invalid("network.channel.carrier_ghz", "must lie in [0.5, 100] GHz"));
        }
        positive("network.channel.k_dh_m", c.k_dh_m)?;
        positive("network.channel.se_alpha", c.se_alpha)?;
        positive("network.channel.se_max", c.se_max)?;
        for (name, v) in [("shadowing_los_db", c.shadowing_los_db), ("shadowing_nlos_db", c.shadowing_nlos_db)] {
            if !(v >= 0.0) {
                return Err(ScenarioError::invalid(format!("network.channel.{name}"), "must be non-negative"));
            }
        }
        let b = &n.bler;
        if !(b.floor > 0.0 && b.floor <= b.cap && b.cap <= 1.0) {
            return Err(ScenarioError::invalid("network.bler", "need 0 < floor <= cap <= 1"));
        }

        if self.intervals.is_empty() {
            return Err(ScenarioError::invalid("intervals", "at least one interval is required"));
        }
        for (i, &mu) in self.slices.numerologies.iter().enumerate() {
            let path = format!("slices.numerologies[{i}]");
            Numerology::new(mu).map_err(|e| ScenarioError::invalid(&path, e))?;
            if mu > MAX_DATA_MU {
                return Err(ScenarioError::invalid(path, format!("mu = {mu}; data slices in FR1 use 0..=2")));
            }
        }
        self.try_slice_plan(PlanMode::Static)?;
        self.try_slice_plan(PlanMode::Dynamic)?;

        let r = &self.rach;
        for (path, list) in [("rach.static_indices", &r.static_indices), ("rach.dynamic_indices", &r.dynamic_indices)] {
            if list.len() != self.n_intervals() {
                return Err(ScenarioError::invalid(
                    path,
                    format!("{} entries for {} intervals", list.len(), self.n_intervals()),
                ));
            }
            for (i, &index) in list.iter().enumerate() {
                self.rach_config(index).map_err(|e| ScenarioError::invalid(format!("{path}[{i}]"), e))?;
            }
        }

        self.floorplan.validate().map_err(|(path, msg)| ScenarioError::invalid(path, msg))?;

        let f = &self.fleet;
        positive("fleet.agv_speed_mps", f.agv_speed_mps)?;
        positive("fleet.worker_speed_mps", f.worker_speed_mps)?;
        for (name, h) in [("agv_height_m", f.agv_height_m), ("worker_height_m", f.worker_height_m)] {
            if !(h >= 0.0 && h <= self.floorplan.height_m) {
                return Err(ScenarioError::invalid(format!("fleet.{name}"), "must lie within the hall height"));
            }
        }

        let t = &self.traffic;
        for (name, v) in [
            ("urllc_packet_bytes", t.urllc_packet_bytes),
            ("embb_packet_bytes", t.embb_packet_bytes),
            ("mmtc_packet_bytes", t.mmtc_packet_bytes),
        ] {
            if v == 0 {
                return Err(ScenarioError::invalid(format!("traffic.{name}"), "must be positive"));
            }
        }
        positive("traffic.urllc_rate_hz", t.urllc_rate_hz)?;
        positive("traffic.mmtc_report_period_s", t.mmtc_report_period_s)?;
        positive("traffic.mmtc_batch_spread_ms", t.mmtc_batch_spread_ms)?;
        positive("traffic.loading_trips_per_hour", t.loading_trips_per_hour)?;
        positive("traffic.storing_trips_per_hour", t.storing_trips_per_hour)?;
        positive("traffic.worker_trips_per_hour", t.worker_trips_per_hour)?;

        for (i, iv) in self.intervals.iter().enumerate() {
            if iv.agvs > f.agvs {
                return Err(ScenarioError::invalid(
                    format!("intervals[{i}].agvs"),
                    format!("{} active AGVs but the fleet has {}", iv.agvs, f.agvs),
                ));
            }
            if iv.mmtc_arrivals > f.smart_tags {
                return Err(ScenarioError::invalid(
                    format!("intervals[{i}].mmtc_arrivals"),
                    format!("{} arrivals but the fleet has {} smart tags", iv.mmtc_arrivals, f.smart_tags),
                ));
            }
            if !(iv.embb_rate_mbps.is_finite() && iv.embb_rate_mbps >= 0.0) {
                return Err(ScenarioError::invalid(format!("intervals[{i}].embb_rate_mbps"), "must be non-negative"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweak(edit: impl Fn(&mut toml::Table)) -> Result<Scenario, ScenarioError> {
        let mut doc: toml::Table = BUNDLED_SCENARIO.parse().unwrap();
        edit(&mut doc);
        Scenario::from_toml_str(&toml::to_string(&doc).unwrap())
    }

    fn table<'a>(doc: &'a mut toml::Table, key: &str) -> &'a mut toml::Table {
        doc.get_mut(key).unwrap().as_table_mut().unwrap()
    }

    #[test]
    fn bundled_scenario() {
        let s = Scenario::bundled();
        assert_eq!(s.fleet.workers, 5);
        assert_eq!(s.fleet.smart_tags, 1000);
        assert_eq!(s.network.bandwidth_mhz, 20.0);
        assert_eq!(s.network.channel.carrier_ghz, 3.7);
        assert_eq!(s.n_intervals(), 3);
        assert_eq!(s.horizon(), SimTime::from_secs(1800));
        assert_eq!(s.rach_indices(PlanMode::Dynamic), &[22, 22, 16]);
        assert_eq!(s.intervals.iter().map(|i| i.mmtc_arrivals).collect::<Vec<_>>(), vec![1000, 500, 250]);
    }

    #[test]
    fn hash_ignores_formatting_but_not_content() {
        let a = Scenario::bundled();
        let reformatted = format!("# extra comment\n\n{}", a.canonical());
        let b = Scenario::from_toml_str(&reformatted).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        let c = tweak(|d| {
            table(d, "fleet").insert("workers".into(), 4.into());
        })
        .unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn fraction_sum_rejected() {
        let err = tweak(|d| {
            let v: toml::Value = toml::Value::try_from([0.5, 0.4, 0.2]).unwrap();
            table(d, "slices").insert("static_split".into(), v);
        })
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("slices.static_split"), "{msg}");
        assert!(msg.contains("1.1"), "{msg}");
    }

    #[test]
    fn fractional_and_negative_counts_rejected() {
        let err = tweak(|d| {
            table(d, "fleet").insert("agvs".into(), 2.5.into());
        })
        .unwrap_err();
        assert!(matches!(&err, ScenarioError::Parse { path, .. } if path == "fleet.agvs"), "{err}");
        let err = tweak(|d| {
            table(d, "fleet").insert("smart_tags".into(), (-3).into());
        })
        .unwrap_err();
        assert!(matches!(&err, ScenarioError::Parse { path, .. } if path == "fleet.smart_tags"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let err = tweak(|d| {
            table(d, "network").insert("colour".into(), "blue".into());
        })
        .unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn zero_agvs_is_valid() {
        let s = tweak(|d| {
            table(d, "fleet").insert("agvs".into(), 0.into());
            for iv in d.get_mut("intervals").unwrap().as_array_mut().unwrap() {
                iv.as_table_mut().unwrap().insert("agvs".into(), 0.into());
            }
        })
        .unwrap();
        assert_eq!(s.fleet.agvs, 0);
    }

    #[test]
    fn data_numerology_limited() {
        let err = tweak(|d| {
            let v = toml::Value::try_from([0, 3, 0]).unwrap();
            table(d, "slices").insert("numerologies".into(), v);
        })
        .unwrap_err();
        assert!(err.to_string().starts_with("slices.numerologies[1]"), "{err}");
    }

    #[test]
    fn semantic_errors_carry_paths() {
        let err = tweak(|d| {
            let iv = d.get_mut("intervals").unwrap().as_array_mut().unwrap();
            iv[1].as_table_mut().unwrap().insert("agvs".into(), 11.into());
        })
        .unwrap_err();
        assert!(err.to_string().starts_with("intervals[1].agvs"), "{err}");
        let err = tweak(|d| {
            table(d, "rach").insert("rar_processing_delay_ms".into(), 6.0.into());
        })
        .unwrap_err();
        assert!(err.to_string().starts_with("rach.static_indices[0]"), "{err}");
        let err = tweak(|d| {
            let v = toml::Value::try_from([19, 19, 99]).unwrap();
            table(d, "rach").insert("static_indices".into(), v);
        })
        .unwrap_err();
        assert!(err.to_string().contains("unknown PRACH configuration index 99"), "{err}");
    }

    #[test]
    fn custom_rach_pattern() {
        let s = tweak(|d| {
            let v = toml::Value::try_from([19, 19, 99]).unwrap();
            let rach = table(d, "rach");
            rach.insert("static_indices".into(), v);
            let mut p = toml::Table::new();
            p.insert("index".into(), 99.into());
            p.insert("period_frames".into(), 2.into());
            p.insert("subframes".into(), toml::Value::try_from([5]).unwrap());
            rach.insert("patterns".into(), toml::Value::Array(vec![p.into()]));
        })
        .unwrap();
        assert_eq!(s.rach_config(99).unwrap().pattern.slots_per_frame(), 0.5);
        // the canonical form keeps the custom table
        assert_eq!(Scenario::from_toml_str(&s.canonical()).unwrap(), s);
    }
}
