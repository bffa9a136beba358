//! Packet sources.
//!
//! Sources are lazy: a run with five 8 Mbps workers produces millions of
//! packets, so each device yields its packets on demand and
//! [`ProfileTraffic`] merges the devices of a profile into one time-ordered
//! stream. [`generate_traffic`] materializes one interval for inspection.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::fleet::DeviceKind;
use super::Scenario;
use crate::metrics::Packet;
use crate::rng::{self, SimRng};
use crate::slicing::Profile;
use crate::timebase::SimTime;

#[derive(Debug, Clone)]
struct Periodic {
    interval: u8,
    next: SimTime,
    period: SimTime,
    end: SimTime,
}

/// All packets of one device over the whole horizon.
#[derive(Debug, Clone)]
pub struct DeviceSource {
    profile: Profile,
    device: u32,
    size_bytes: u32,
    periodic: Vec<Periodic>,
    current: usize,
    /// Sorted one-off packets: (time, 1-based interval).
    one_shots: Vec<(SimTime, u8)>,
    shot: usize,
    seq: u64,
}

impl DeviceSource {
    /// Next packet time and interval, and whether it comes from the periodic part.
    fn peek(&mut self) -> Option<(SimTime, u8, bool)> {
        while let Some(p) = self.periodic.get(self.current) {
            if p.next < p.end {
                break;
            }
            self.current += 1;
        }
        let a = self.periodic.get(self.current).map(|p| (p.next, p.interval));
        let b = self.one_shots.get(self.shot).copied();
        match (a, b) {
            (Some(x), Some(y)) if y.0 < x.0 => Some((y.0, y.1, false)),
            (Some(x), _) => Some((x.0, x.1, true)),
            (None, Some(y)) => Some((y.0, y.1, false)),
            (None, None) => None,
        }
    }

    pub fn next_time(&mut self) -> Option<SimTime> {
        self.peek().map(|(t, _, _)| t)
    }
}

impl Iterator for DeviceSource {
    type Item = Packet;

    fn next(&mut self) -> Option<Packet> {
        let (created, interval, periodic) = self.peek()?;
        if periodic {
            let p = &mut self.periodic[self.current];
            p.next += p.period;
        } else {
            self.shot += 1;
        }
        let packet = Packet {
            profile: self.profile,
            device: self.device,
            seq: self.seq,
            size_bytes: self.size_bytes,
            created,
            interval,
        };
        self.seq += 1;
        Some(packet)
    }
}

fn traffic_stream(run_seed: u64, kind: DeviceKind, index: u32) -> SimRng {
    rng::stream(run_seed, &[rng::label::TRAFFIC, kind.global_id(index)])
}

fn interval_of(scenario: &Scenario, t: SimTime) -> u8 {
    (t.0 / scenario.interval_duration().0) as u8 + 1
}

/// Builds the source of device `index` of `profile`.
pub fn device_source(scenario: &Scenario, profile: Profile, index: u32, run_seed: u64) -> DeviceSource {
    let kind = DeviceKind::of_profile(profile);
    let mut r = traffic_stream(run_seed, kind, index);
    let tr = &scenario.traffic;
    let dur = scenario.interval_duration();
    let mut periodic = Vec::new();
    let mut one_shots = Vec::new();
    let size_bytes = match profile {
        Profile::Urllc => {
            let period = SimTime::from_secs_f64(1.0 / tr.urllc_rate_hz);
            let phase = SimTime(r.gen_range(0..period.0));
            for (iv, spec) in scenario.intervals.iter().enumerate() {
                if index < spec.agvs {
                    let start = scenario.interval_start(iv);
                    periodic.push(Periodic { interval: iv as u8 + 1, next: start + phase, period, end: start + dur });
                }
            }
            tr.urllc_packet_bytes
        }
        Profile::Embb => {
            let u: f64 = r.gen();
            let bits = tr.embb_packet_bytes as f64 * 8.0;
            for (iv, spec) in scenario.intervals.iter().enumerate() {
                if spec.embb_rate_mbps > 0.0 {
                    let period = SimTime::from_secs_f64(bits / (spec.embb_rate_mbps * 1e6));
                    let start = scenario.interval_start(iv);
                    let phase = SimTime((u * period.0 as f64) as u64);
                    periodic.push(Periodic { interval: iv as u8 + 1, next: start + phase, period, end: start + dur });
                }
            }
            tr.embb_packet_bytes
        }
        Profile::Mmtc => {
            let report_period = SimTime::from_secs_f64(tr.mmtc_report_period_s);
            let mut t = SimTime(r.gen_range(0..report_period.0));
            while t < scenario.horizon() {
                one_shots.push((t, interval_of(scenario, t)));
                t += report_period;
            }
            let spread = SimTime::from_ms_f64(tr.mmtc_batch_spread_ms);
            for (iv, spec) in scenario.intervals.iter().enumerate() {
                let offset = SimTime(r.gen_range(0..spread.0));
                if index < spec.mmtc_arrivals {
                    one_shots.push((scenario.interval_start(iv) + offset, iv as u8 + 1));
                }
            }
            one_shots.sort();
            tr.mmtc_packet_bytes
        }
    };
    DeviceSource { profile, device: index, size_bytes, periodic, current: 0, one_shots, shot: 0, seq: 0 }
}

/// Time-ordered merge of every device of one profile; ties go to the lower
/// device id.
#[derive(Debug, Clone)]
pub struct ProfileTraffic {
    sources: Vec<DeviceSource>,
    heap: BinaryHeap<Reverse<(SimTime, u32)>>,
}

impl ProfileTraffic {
    pub fn new(scenario: &Scenario, profile: Profile, run_seed: u64) -> Self {
        let n = match profile {
            Profile::Urllc => scenario.fleet.agvs,
            Profile::Embb => scenario.fleet.workers,
            Profile::Mmtc => scenario.fleet.smart_tags,
        };
        let mut sources: Vec<DeviceSource> = (0..n).map(|i| device_source(scenario, profile, i, run_seed)).collect();
        let heap = sources
            .iter_mut()
            .enumerate()
            .filter_map(|(i, s)| s.next_time().map(|t| Reverse((t, i as u32))))
            .collect();
        ProfileTraffic { sources, heap }
    }
}

impl Iterator for ProfileTraffic {
    type Item = Packet;

    fn next(&mut self) -> Option<Packet> {
        let Reverse((_, dev)) = self.heap.pop()?;
        let src = &mut self.sources[dev as usize];
        let packet = src.next().expect("heap entry implies a pending packet");
        if let Some(t) = src.next_time() {
            self.heap.push(Reverse((t, dev)));
        }
        Some(packet)
    }
}

/// Every packet created during 1-based `interval`, ordered by creation time,
/// then profile, then device.
pub fn generate_traffic(scenario: &Scenario, interval: u8, run_seed: u64) -> Vec<Packet> {
    assert!(
        (1..=scenario.n_intervals()).contains(&(interval as usize)),
        "interval {interval} outside 1..={}",
        scenario.n_intervals()
    );
    let end = scenario.interval_start(interval as usize);
    let mut out: Vec<Packet> = Profile::ALL
        .iter()
        .flat_map(|&p| {
            ProfileTraffic::new(scenario, p, run_seed)
                .take_while(move |pk| pk.created < end)
                .filter(move |pk| pk.interval == interval)
        })
        .collect();
    out.sort_by_key(|p| (p.created, p.profile, p.device));
    out
}
