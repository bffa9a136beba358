//! Bandwidth partitioning into per-profile slices and the per-slice MAC.

mod engine;
mod pipeline;
mod rr;

pub use engine::{run_slice, run_slice_traced, SliceDevice, SliceRun, SliceStats};
pub use pipeline::{simulate_transmission, tb_bits, BlerModel, IsolatedTransmission, LatencyPipeline, DEFAULT_OVERHEAD};
pub use rr::{Grant, RoundRobin, TransmissionGrant};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timebase::{prb_count, Numerology, SimTime, TimebaseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlicingError {
    #[error("interval {interval}: slice fractions sum to {sum}, expected 1")]
    FractionSum { interval: usize, sum: f64 },
    #[error("interval {interval}: fraction {fraction} of {profile} is outside [0, 1]")]
    FractionRange { interval: usize, profile: Profile, fraction: f64 },
    #[error("interval {interval}, {profile}: {source}")]
    Narrow {
        interval: usize,
        profile: Profile,
        #[source]
        source: TimebaseError,
    },
    #[error("static plan needs one split or identical splits, got {0} differing ones")]
    StaticVaries(usize),
    #[error("plan has {got} interval splits, scenario has {expected} intervals")]
    IntervalCount { got: usize, expected: usize },
}

/// Beyond the plan's last interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("simulation horizon reached at {0}")]
pub struct EndOfSimulation(pub SimTime);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Embb,
    Urllc,
    Mmtc,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Embb, Profile::Urllc, Profile::Mmtc];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Embb => "embb",
            Profile::Urllc => "urllc",
            Profile::Mmtc => "mmtc",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Profile::Mmtc => Direction::Uplink,
            Profile::Embb | Profile::Urllc => Direction::Downlink,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "embb" => Ok(Profile::Embb),
            "urllc" => Ok(Profile::Urllc),
            "mmtc" => Ok(Profile::Mmtc),
            other => Err(format!("unknown profile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downlink,
    Uplink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Static,
    Dynamic,
}

impl PlanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanMode::Static => "static",
            PlanMode::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PlanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(PlanMode::Static),
            "dynamic" => Ok(PlanMode::Dynamic),
            other => Err(format!("unknown plan `{other}`")),
        }
    }
}

/// Carrier-wide constants the slices are cut from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub bandwidth_hz: f64,
    pub guard_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceConfig {
    pub profile: Profile,
    pub bandwidth_fraction: f64,
    pub numerology: Numerology,
    pub direction: Direction,
}

impl SliceConfig {
    pub fn bandwidth_hz(&self, carrier: &Carrier) -> f64 {
        self.bandwidth_fraction * carrier.bandwidth_hz
    }

    pub fn prbs(&self, carrier: &Carrier) -> Result<u32, TimebaseError> {
        prb_count(self.bandwidth_hz(carrier), self.numerology, carrier.guard_fraction)
    }

    /// Bandwidth actually occupied by the slice's PRBs.
    pub fn occupied_hz(&self, carrier: &Carrier) -> Result<f64, TimebaseError> {
        Ok(self.prbs(carrier)? as f64 * 12.0 * self.numerology.scs_hz())
    }
}

pub type SliceSet = [SliceConfig; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct SlicePlan {
    pub mode: PlanMode,
    pub intervals: Vec<SliceSet>,
    pub interval_duration: SimTime,
}

pub const DEFAULT_STATIC_SPLIT: [f64; 3] = [0.55, 0.30, 0.15];
pub const DEFAULT_DYNAMIC_SPLITS: [[f64; 3]; 3] =
    [[0.40, 0.30, 0.30], [0.30, 0.60, 0.10], [0.70, 0.20, 0.10]];
pub const DEFAULT_NUMEROLOGIES: [Numerology; 3] = [Numerology::MU0, Numerology::MU2, Numerology::MU0];

const SUM_TOLERANCE: f64 = 1e-9;

/// Validates `splits` (eMBB, URLLC, mMTC fractions per interval) and expands
/// them into a plan over `n_intervals` intervals.
pub fn build_slice_plan(
    mode: PlanMode,
    splits: &[[f64; 3]],
    numerologies: [Numerology; 3],
    carrier: &Carrier,
    n_intervals: usize,
    interval_duration: SimTime,
) -> Result<SlicePlan, SlicingError> {
    let expanded: Vec<[f64; 3]> = match mode {
        PlanMode::Static => {
            let first = *splits.first().ok_or(SlicingError::IntervalCount { got: 0, expected: 1 })?;
            if splits.iter().any(|s| s != &first) {
                return Err(SlicingError::StaticVaries(splits.len()));
            }
            vec![first; n_intervals]
        }
        PlanMode::Dynamic => {
            if splits.len() != n_intervals {
                return Err(SlicingError::IntervalCount { got: splits.len(), expected: n_intervals });
            }
            splits.to_vec()
        }
    };

    let mut intervals = Vec::with_capacity(expanded.len());
    for (interval, split) in expanded.iter().enumerate() {
        let sum: f64 = split.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SlicingError::FractionSum { interval, sum });
        }
        let mut set = [SliceConfig {
            profile: Profile::Embb,
            bandwidth_fraction: 0.0,
            numerology: Numerology::MU0,
            direction: Direction::Downlink,
        }; 3];
        for profile in Profile::ALL {
            let fraction = split[profile.index()];
            if !(0.0..=1.0).contains(&fraction) {
                return Err(SlicingError::FractionRange { interval, profile, fraction });
            }
            let cfg = SliceConfig {
                profile,
                bandwidth_fraction: fraction,
                numerology: numerologies[profile.index()],
                direction: profile.direction(),
            };
            cfg.prbs(carrier)
                .map_err(|source| SlicingError::Narrow { interval, profile, source })?;
            set[profile.index()] = cfg;
        }
        intervals.push(set);
    }
    Ok(SlicePlan { mode, intervals, interval_duration })
}

impl SlicePlan {
    pub fn horizon(&self) -> SimTime {
        SimTime(self.interval_duration.0 * self.intervals.len() as u64)
    }

    /// Interval index containing `t`; intervals are half-open `[start, end)`.
    pub fn interval_of(&self, t: SimTime) -> Result<usize, EndOfSimulation> {
        let idx = (t.0 / self.interval_duration.0) as usize;
        if idx >= self.intervals.len() {
            return Err(EndOfSimulation(t));
        }
        Ok(idx)
    }

    pub fn slices_at(&self, t: SimTime) -> Result<&SliceSet, EndOfSimulation> {
        Ok(&self.intervals[self.interval_of(t)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CARRIER: Carrier = Carrier { bandwidth_hz: 20e6, guard_fraction: 0.10 };
    const TEN_MIN: SimTime = SimTime::from_secs(600);

    fn default_plan(mode: PlanMode) -> SlicePlan {
        let splits: &[[f64; 3]] = match mode {
            PlanMode::Static => &[DEFAULT_STATIC_SPLIT],
            PlanMode::Dynamic => &DEFAULT_DYNAMIC_SPLITS,
        };
        build_slice_plan(mode, splits, DEFAULT_NUMEROLOGIES, &CARRIER, 3, TEN_MIN).unwrap()
    }

    fn mhz(plan: &SlicePlan, interval: usize, p: Profile) -> f64 {
        plan.intervals[interval][p.index()].bandwidth_hz(&CARRIER) / 1e6
    }

    #[test]
    fn static_bandwidths() {
        let plan = default_plan(PlanMode::Static);
        for iv in 0..3 {
            assert!((mhz(&plan, iv, Profile::Embb) - 11.0).abs() < 1e-9);
            assert!((mhz(&plan, iv, Profile::Urllc) - 6.0).abs() < 1e-9);
            assert!((mhz(&plan, iv, Profile::Mmtc) - 3.0).abs() < 1e-9);
        }
        assert_eq!(plan.intervals[1][Profile::Urllc.index()].prbs(&CARRIER).unwrap(), 7);
        assert_eq!(plan.intervals[1][Profile::Urllc.index()].numerology, Numerology::MU2);
        assert_eq!(plan.intervals[0][Profile::Mmtc.index()].direction, Direction::Uplink);
    }

    #[test]
    fn dynamic_bandwidths() {
        let plan = default_plan(PlanMode::Dynamic);
        assert!((mhz(&plan, 1, Profile::Urllc) - 12.0).abs() < 1e-9);
        assert!((mhz(&plan, 2, Profile::Embb) - 14.0).abs() < 1e-9);
        assert!((mhz(&plan, 0, Profile::Mmtc) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn slices_at_boundaries() {
        let dynamic = default_plan(PlanMode::Dynamic);
        let s = dynamic.slices_at(SimTime::ZERO).unwrap();
        assert_eq!(
            s.map(|c| c.bandwidth_fraction),
            [0.40, 0.30, 0.30]
        );
        let s = dynamic.slices_at(SimTime::from_secs(600)).unwrap();
        assert_eq!(s.map(|c| c.bandwidth_fraction), [0.30, 0.60, 0.10]);
        let s = dynamic.slices_at(SimTime::from_secs(600) - SimTime(1)).unwrap();
        assert_eq!(s.map(|c| c.bandwidth_fraction), [0.40, 0.30, 0.30]);

        let stat = default_plan(PlanMode::Static);
        let s = stat.slices_at(SimTime::from_secs(1500)).unwrap();
        assert_eq!(s.map(|c| c.bandwidth_fraction), [0.55, 0.30, 0.15]);
        assert_eq!(
            stat.slices_at(SimTime::from_secs(1800)),
            Err(EndOfSimulation(SimTime::from_secs(1800)))
        );
    }

    #[test]
    fn rejects_bad_splits() {
        let err = build_slice_plan(
            PlanMode::Static,
            &[[0.5, 0.4, 0.2]],
            DEFAULT_NUMEROLOGIES,
            &CARRIER,
            3,
            TEN_MIN,
        )
        .unwrap_err();
        assert!(matches!(err, SlicingError::FractionSum { interval: 0, .. }));

        let err = build_slice_plan(
            PlanMode::Dynamic,
            &[[0.999, 0.0005, 0.0005]; 3],
            DEFAULT_NUMEROLOGIES,
            &CARRIER,
            3,
            TEN_MIN,
        )
        .unwrap_err();
        assert!(matches!(err, SlicingError::Narrow { profile: Profile::Urllc, .. }));

        let err = build_slice_plan(
            PlanMode::Static,
            &DEFAULT_DYNAMIC_SPLITS,
            DEFAULT_NUMEROLOGIES,
            &CARRIER,
            3,
            TEN_MIN,
        )
        .unwrap_err();
        assert!(matches!(err, SlicingError::StaticVaries(3)));

        let err = build_slice_plan(
            PlanMode::Dynamic,
            &DEFAULT_DYNAMIC_SPLITS[..2],
            DEFAULT_NUMEROLOGIES,
            &CARRIER,
            3,
            TEN_MIN,
        )
        .unwrap_err();
        assert!(matches!(err, SlicingError::IntervalCount { got: 2, expected: 3 }));
    }
}
