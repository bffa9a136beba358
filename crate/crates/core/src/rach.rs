//! Contention-based random access at preamble level.
//!
//! Only Msg1 and Msg2 are modelled. A preamble picked by exactly one UE in an
//! RA occasion is answered; one picked by several UEs is lost for all of them.
//! Losers notice when their RAR window closes, wait a uniform backoff and try
//! again at the next occasion, until `preamble_trans_max` attempts are spent.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, SimRng};
use crate::timebase::{SimTime, FRAME_NS, NS_PER_MS, SUBFRAMES_PER_FRAME};

pub const MAX_PREAMBLES: u32 = 64;
pub const MAX_RAR_WINDOW: SimTime = SimTime::from_ms(10);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RachError {
    #[error("unknown PRACH configuration index {index}; supported: {supported:?}")]
    UnknownIndex { index: u32, supported: Vec<u32> },
    #[error("RA slot pattern: {0}")]
    Pattern(String),
    #[error("{0}")]
    Config(String),
    #[error("UE {0} did not complete random access")]
    NotSucceeded(u32),
}

/// RA occasions within a repeating period of whole frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaSlotPattern {
    pub period_frames: u32,
    /// Subframe offsets inside the first frame of each period.
    pub subframes: Vec<u8>,
}

const BUILTIN: &[(u32, &[u8])] = &[
    (16, &[1]),
    (17, &[4]),
    (18, &[7]),
    (19, &[1, 6]),
    (20, &[2, 7]),
    (21, &[3, 8]),
    (22, &[1, 4, 7]),
    (23, &[2, 5, 8]),
    (24, &[3, 6, 9]),
    (27, &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]),
];

/// A user-defined index, declared in the scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomPattern {
    pub index: u32,
    pub period_frames: u32,
    pub subframes: Vec<u8>,
}

impl RaSlotPattern {
    pub fn new(period_frames: u32, subframes: Vec<u8>) -> Result<Self, RachError> {
        if !(1..=2).contains(&period_frames) {
            return Err(RachError::Pattern(format!("period of {period_frames} frames, expected 1 or 2")));
        }
        if subframes.is_empty() {
            return Err(RachError::Pattern("no subframe offsets".into()));
        }
        if subframes.iter().any(|&s| s as u64 >= SUBFRAMES_PER_FRAME) {
            return Err(RachError::Pattern(format!("offsets {subframes:?} must lie in 0..=9")));
        }
        if subframes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RachError::Pattern(format!("offsets {subframes:?} must be strictly increasing")));
        }
        Ok(RaSlotPattern { period_frames, subframes })
    }

    pub fn supported_indices() -> Vec<u32> {
        BUILTIN.iter().map(|(i, _)| *i).collect()
    }

    pub fn builtin(index: u32) -> Result<Self, RachError> {
        Self::lookup(index, &[])
    }

    /// Custom patterns shadow the built-in table.
    pub fn lookup(index: u32, custom: &[CustomPattern]) -> Result<Self, RachError> {
        if let Some(c) = custom.iter().find(|c| c.index == index) {
            return Self::new(c.period_frames, c.subframes.clone());
        }
        match BUILTIN.iter().find(|(i, _)| *i == index) {
            Some((_, offsets)) => Self::new(1, offsets.to_vec()),
            None => {
                let mut supported = Self::supported_indices();
                supported.extend(custom.iter().map(|c| c.index));
                supported.sort_unstable();
                Err(RachError::UnknownIndex { index, supported })
            }
        }
    }

    pub fn slots_per_frame(&self) -> f64 {
        self.subframes.len() as f64 / self.period_frames as f64
    }

    /// Share of subframes that carry an RA occasion.
    pub fn ra_overhead(&self) -> f64 {
        self.slots_per_frame() / SUBFRAMES_PER_FRAME as f64
    }

    fn period_ns(&self) -> u64 {
        self.period_frames as u64 * FRAME_NS
    }

    /// First occasion starting at or after `t`.
    pub fn next_at_or_after(&self, t: SimTime) -> SimTime {
        let period = self.period_ns();
        let base = t.0 / period * period;
        for &s in &self.subframes {
            let cand = base + s as u64 * NS_PER_MS;
            if cand >= t.0 {
                return SimTime(cand);
            }
        }
        SimTime(base + period + self.subframes[0] as u64 * NS_PER_MS)
    }
}

/// Occasion start times in `[0, horizon)`.
pub fn ra_slot_schedule(pattern: &RaSlotPattern, horizon: SimTime) -> Vec<SimTime> {
    let mut out = Vec::new();
    let mut t = pattern.next_at_or_after(SimTime::ZERO);
    while t < horizon {
        out.push(t);
        t = pattern.next_at_or_after(t + SimTime(1));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RachConfig {
    pub prach_config_index: u32,
    pub pattern: RaSlotPattern,
    pub num_preambles: u32,
    pub preamble_trans_max: u32,
    pub rar_window: SimTime,
    pub backoff_indicator: SimTime,
    pub rar_processing_delay: SimTime,
}

impl RachConfig {
    /// Pool 60, ten attempts, 5 ms window, 20 ms backoff, RAR after 2 ms.
    pub fn with_index(index: u32) -> Result<Self, RachError> {
        let cfg = RachConfig {
            prach_config_index: index,
            pattern: RaSlotPattern::builtin(index)?,
            num_preambles: 60,
            preamble_trans_max: 10,
            rar_window: SimTime::from_ms(5),
            backoff_indicator: SimTime::from_ms(20),
            rar_processing_delay: SimTime::from_ms(2),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RachError> {
        if self.num_preambles == 0 || self.num_preambles > MAX_PREAMBLES {
            return Err(RachError::Config(format!(
                "num_preambles = {}, expected 1..={MAX_PREAMBLES}",
                self.num_preambles
            )));
        }
        if self.preamble_trans_max == 0 {
            return Err(RachError::Config("preamble_trans_max must be at least 1".into()));
        }
        if self.rar_window > MAX_RAR_WINDOW {
            return Err(RachError::Config(format!("rar_window {} exceeds 10 ms", self.rar_window)));
        }
        if self.rar_processing_delay > self.rar_window {
            return Err(RachError::Config(format!(
                "rar_processing_delay {} exceeds rar_window {}",
                self.rar_processing_delay, self.rar_window
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeState {
    WaitingFirstSlot,
    WaitingRar,
    Backoff,
    Succeeded,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeRaState {
    pub id: u32,
    pub state: UeState,
    pub attempts: u32,
    pub first_tx_time: Option<SimTime>,
    /// RAR reception.
    pub success_time: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaResults {
    pub ues: Vec<UeRaState>,
    /// Distinct occasions in which at least one preamble was sent.
    pub occasions_used: u64,
    pub collisions: u64,
}

impl RaResults {
    pub fn succeeded(&self) -> usize {
        self.ues.iter().filter(|u| u.state == UeState::Succeeded).count()
    }

    pub fn blocked(&self) -> usize {
        self.ues.iter().filter(|u| u.state == UeState::Blocked).count()
    }
}

/// Runs the procedure for `n` UEs until every one has succeeded or is blocked.
///
/// `arrivals` defaults to everybody at t = 0. Within an occasion UEs draw
/// their preamble in id order, then collided UEs draw their backoff in id
/// order, all from one stream derived from `seed`.
pub fn simulate_rach(
    n: u32,
    arrivals: Option<&[SimTime]>,
    config: &RachConfig,
    seed: u64,
) -> Result<RaResults, RachError> {
    config.validate()?;
    if n == 0 {
        return Err(RachError::Config("need at least one arrival".into()));
    }
    if let Some(a) = arrivals {
        if a.len() != n as usize {
            return Err(RachError::Config(format!("{} arrival times for {n} UEs", a.len())));
        }
    }
    let mut rng: SimRng = rng::stream(seed, &[rng::label::RACH]);
    let mut ues: Vec<UeRaState> = (0..n)
        .map(|id| UeRaState {
            id,
            state: UeState::WaitingFirstSlot,
            attempts: 0,
            first_tx_time: None,
            success_time: None,
        })
        .collect();

    let mut occasions: BTreeMap<SimTime, Vec<u32>> = BTreeMap::new();
    for id in 0..n {
        let arrival = arrivals.map_or(SimTime::ZERO, |a| a[id as usize]);
        occasions.entry(config.pattern.next_at_or_after(arrival)).or_default().push(id);
    }

    let pool = config.num_preambles as usize;
    let mut pick_count = vec![0u32; pool];
    let mut picks: Vec<(u32, usize)> = Vec::new();
    let mut occasions_used = 0;
    let mut collisions = 0;
    let bi_ns = config.backoff_indicator.0 as f64;

    while let Some((t, mut ids)) = occasions.pop_first() {
        occasions_used += 1;
        ids.sort_unstable();
        picks.clear();
        pick_count.iter_mut().for_each(|c| *c = 0);
        for &id in &ids {
            let p = rng.gen_range(0..pool);
            pick_count[p] += 1;
            picks.push((id, p));
            let ue = &mut ues[id as usize];
            ue.attempts += 1;
            ue.first_tx_time.get_or_insert(t);
            ue.state = UeState::WaitingRar;
        }
        collisions += pick_count.iter().filter(|&&c| c > 1).count() as u64;
        for &(id, p) in &picks {
            let ue = &mut ues[id as usize];
            if pick_count[p] == 1 {
                ue.state = UeState::Succeeded;
                ue.success_time = Some(t + config.rar_processing_delay);
            } else if ue.attempts >= config.preamble_trans_max {
                ue.state = UeState::Blocked;
            } else {
                ue.state = UeState::Backoff;
                let backoff = if bi_ns > 0.0 { rng.gen_range(0.0..bi_ns) } else { 0.0 };
                let eligible = t + config.rar_window + SimTime(backoff.ceil() as u64);
                occasions.entry(config.pattern.next_at_or_after(eligible)).or_default().push(id);
            }
        }
    }
    Ok(RaResults { ues, occasions_used, collisions })
}

/// Time from the first preamble to RAR reception.
pub fn access_delay(ue: &UeRaState) -> Result<SimTime, RachError> {
    match (ue.state, ue.first_tx_time, ue.success_time) {
        (UeState::Succeeded, Some(first), Some(done)) => Ok(done - first),
        _ => Err(RachError::NotSucceeded(ue.id)),
    }
}

/// Mean and one-sided mean absolute deviations of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadStats {
    pub mean: f64,
    /// Mean distance below the mean, over the samples below it.
    pub dev_lo: f64,
    /// Mean distance above the mean, over the samples above it.
    pub dev_hi: f64,
    pub samples: usize,
}

impl SpreadStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let side = |above: bool| {
            let (sum, count) = values
                .iter()
                .filter(|&&v| if above { v > mean } else { v < mean })
                .fold((0.0, 0usize), |(s, c), &v| (s + (v - mean).abs(), c + 1));
            if count == 0 { 0.0 } else { sum / count as f64 }
        };
        Some(SpreadStats { mean, dev_lo: side(false), dev_hi: side(true), samples: values.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RachMetrics {
    pub blocking_probability: f64,
    /// Mean of `attempts - 1` over UEs that got through; `None` if none did.
    pub avg_preamble_retx: Option<f64>,
    /// Access delay in milliseconds over UEs that got through.
    pub access_delay_ms: Option<SpreadStats>,
}

pub fn rach_metrics(results: &RaResults) -> RachMetrics {
    assert!(!results.ues.is_empty(), "empty random-access results");
    let total = results.ues.len() as f64;
    let ok: Vec<&UeRaState> = results.ues.iter().filter(|u| u.state == UeState::Succeeded).collect();
    let retx = (!ok.is_empty())
        .then(|| ok.iter().map(|u| (u.attempts - 1) as f64).sum::<f64>() / ok.len() as f64);
    let delays: Vec<f64> = ok
        .iter()
        .map(|u| access_delay(u).expect("succeeded UE").as_ms_f64())
        .collect();
    RachMetrics {
        blocking_probability: results.blocked() as f64 / total,
        avg_preamble_retx: retx,
        access_delay_ms: SpreadStats::of(&delays),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(index: u32) -> RachConfig {
        RachConfig::with_index(index).unwrap()
    }

    #[test]
    fn schedule_counts() {
        assert_eq!(ra_slot_schedule(&cfg(19).pattern, SimTime::from_ms(20)).len(), 4);
        assert_eq!(ra_slot_schedule(&cfg(16).pattern, SimTime::from_ms(100)).len(), 10);
        let s22 = ra_slot_schedule(&cfg(22).pattern, SimTime::from_ms(10));
        assert_eq!(s22, vec![SimTime::from_ms(1), SimTime::from_ms(4), SimTime::from_ms(7)]);
        let every_other = RaSlotPattern::new(2, vec![3]).unwrap();
        assert_eq!(
            ra_slot_schedule(&every_other, SimTime::from_ms(45)),
            vec![SimTime::from_ms(3), SimTime::from_ms(23), SimTime::from_ms(43)]
        );
    }

    #[test]
    fn pattern_validation() {
        assert!(RaSlotPattern::new(1, vec![4, 2]).is_err());
        assert!(RaSlotPattern::new(1, vec![10]).is_err());
        assert!(RaSlotPattern::new(3, vec![1]).is_err());
        assert!(RaSlotPattern::new(1, vec![]).is_err());
        match RaSlotPattern::builtin(99) {
            Err(RachError::UnknownIndex { supported, .. }) => assert!(supported.contains(&19)),
            other => panic!("{other:?}"),
        }
        let custom = [CustomPattern { index: 99, period_frames: 1, subframes: vec![0, 5] }];
        assert_eq!(RaSlotPattern::lookup(99, &custom).unwrap().slots_per_frame(), 2.0);
        assert_eq!(cfg(22).pattern.ra_overhead(), 0.3);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(19);
        c.rar_processing_delay = SimTime::from_ms(6);
        assert!(matches!(c.validate(), Err(RachError::Config(_))));
        let mut c = cfg(19);
        c.num_preambles = 65;
        assert!(c.validate().is_err());
        let mut c = cfg(19);
        c.rar_window = SimTime::from_ms(11);
        assert!(c.validate().is_err());
    }

    #[test]
    fn next_occasion() {
        let p = cfg(19).pattern;
        assert_eq!(p.next_at_or_after(SimTime::ZERO), SimTime::from_ms(1));
        assert_eq!(p.next_at_or_after(SimTime::from_ms(1)), SimTime::from_ms(1));
        assert_eq!(p.next_at_or_after(SimTime::from_ms(1) + SimTime(1)), SimTime::from_ms(6));
        assert_eq!(p.next_at_or_after(SimTime::from_ms(7)), SimTime::from_ms(11));
    }

    #[test]
    fn lone_ue_succeeds_first_time() {
        for index in [16, 19, 22] {
            let r = simulate_rach(1, None, &cfg(index), 3).unwrap();
            let m = rach_metrics(&r);
            assert_eq!(m.blocking_probability, 0.0);
            assert_eq!(m.avg_preamble_retx, Some(0.0));
            assert_eq!(r.ues[0].attempts, 1);
            assert_eq!(access_delay(&r.ues[0]).unwrap(), SimTime::from_ms(2));
        }
    }

    #[test]
    fn arrival_before_occasion() {
        // arrives at 10 ms, one ms before the index-16 occasion at 11 ms
        let r = simulate_rach(1, Some(&[SimTime::from_ms(10)]), &cfg(16), 0).unwrap();
        assert_eq!(r.ues[0].first_tx_time, Some(SimTime::from_ms(11)));
        assert_eq!(access_delay(&r.ues[0]).unwrap(), SimTime::from_ms(2));
        let wait = r.ues[0].success_time.unwrap() - SimTime::from_ms(10);
        assert!(wait <= SimTime::from_ms(12));
    }

    #[test]
    fn forced_collision_blocks_everybody() {
        let mut c = cfg(19);
        c.num_preambles = 1;
        c.preamble_trans_max = 1;
        for seed in 0..20 {
            let r = simulate_rach(2, None, &c, seed).unwrap();
            assert_eq!(rach_metrics(&r).blocking_probability, 1.0);
            assert_eq!(rach_metrics(&r).avg_preamble_retx, None);
            assert!(access_delay(&r.ues[0]).is_err());
        }
    }

    #[test]
    fn state_invariants() {
        let c = cfg(19);
        let r = simulate_rach(300, None, &c, 9).unwrap();
        assert_eq!(r.succeeded() + r.blocked(), 300);
        for ue in &r.ues {
            assert!((1..=c.preamble_trans_max).contains(&ue.attempts));
            match ue.state {
                UeState::Succeeded => assert!(ue.success_time.is_some()),
                UeState::Blocked => assert_eq!(ue.attempts, c.preamble_trans_max),
                s => panic!("UE left in {s:?}"),
            }
        }
        assert_eq!(r, simulate_rach(300, None, &c, 9).unwrap());
        assert_ne!(r, simulate_rach(300, None, &c, 10).unwrap());
    }

    #[test]
    fn spread_stats() {
        let s = SpreadStats::of(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.dev_lo, 2.0);
        assert_eq!(s.dev_hi, 6.0);
        let flat = SpreadStats::of(&[5.0; 4]).unwrap();
        assert_eq!((flat.dev_lo, flat.dev_hi), (0.0, 0.0));
        assert!(SpreadStats::of(&[]).is_none());
    }

    #[test]
    fn more_occasions_fewer_retransmissions() {
        let seeds = 30;
        let mean_retx = |index| {
            (0..seeds)
                .map(|s| rach_metrics(&simulate_rach(400, None, &cfg(index), s).unwrap()).avg_preamble_retx.unwrap())
                .sum::<f64>()
                / seeds as f64
        };
        assert!(mean_retx(22) < mean_retx(19));
        assert!(mean_retx(19) < mean_retx(16));
    }
}
