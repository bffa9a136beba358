//! Slot-driven MAC of a single slice.
//!
//! Each slot boundary runs in this order: decode outcomes due by now are
//! applied, newly created packets join their device's FIFO, pending HARQ
//! retransmissions take their PRBs first, and round-robin shares the rest
//! among backlogged devices. A grant becomes one transport block carrying
//! bits from the head of the device's queue, possibly several packets or a
//! piece of one. Idle stretches are skipped.

use std::collections::{BTreeMap, VecDeque};
use std::iter::Peekable;

use rand::Rng;

use super::pipeline::{tb_bits, BlerModel, LatencyPipeline};
use super::rr::{RoundRobin, TransmissionGrant};
use super::{Carrier, Direction, Profile, SlicePlan};
use crate::channel::{pathloss_db, sinr_db, sinr_for_efficiency, spectral_efficiency, ChannelParams, LinkDraw, Position3D};
use crate::metrics::{DropReason, Packet, PacketRecord};
use crate::rng::{self, SimRng};
use crate::scenario::Trajectory;
use crate::timebase::{time_to_position, Numerology, SimTime, SUBCARRIERS_PER_PRB, SYMBOLS_PER_SLOT};

/// A device as seen by a slice: where it is and its channel draws, per interval.
#[derive(Debug, Clone)]
pub struct SliceDevice {
    pub paths: Vec<Trajectory>,
    pub draws: Vec<LinkDraw>,
}

/// Everything a slice run needs besides its traffic.
#[derive(Debug, Clone)]
pub struct SliceRun<'a> {
    pub profile: Profile,
    pub plan: &'a SlicePlan,
    pub carrier: Carrier,
    pub gnb: Position3D,
    pub channel: &'a ChannelParams,
    pub pipeline: LatencyPipeline,
    pub bler: BlerModel,
    pub overhead: f64,
    pub channel_refresh: SimTime,
    pub devices: &'a [SliceDevice],
    /// Seed of the run; the slice derives its own HARQ stream from it.
    pub run_seed: u64,
}

/// Counters of one slice run. Per-interval vectors are indexed from 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SliceStats {
    pub decision_slots: u64,
    pub prbs_granted: u64,
    /// Over all slots: PRBs that were wanted and available but not granted.
    pub prb_shortfall: u64,
    /// Slots in which grants exceeded the slice capacity.
    pub capacity_violations: u64,
    pub transport_blocks: u64,
    pub harq_retx: u64,
    pub bits_offered: Vec<u64>,
    pub bits_delivered: Vec<u64>,
    pub packets_offered: u64,
    pub packets_delivered: u64,
    pub packets_harq_dropped: u64,
    pub packets_undelivered: u64,
    pub pathloss_clamps: u64,
}

#[derive(Debug)]
struct PktState {
    packet: Packet,
    unsent: u64,
    unacked: u64,
    last_decode: SimTime,
    done: bool,
}

#[derive(Debug, Default)]
struct DevQueue {
    q: VecDeque<PktState>,
    /// Ordinal of `q[0]` among all packets the device ever enqueued.
    base: u64,
    /// First entry that may still have unsent bits.
    next_unsent: usize,
    backlog_bits: u64,
}

#[derive(Debug, Clone, Copy)]
struct Link {
    se: f64,
    bler: f64,
    valid_until: SimTime,
}

#[derive(Debug)]
struct Tb {
    device: u32,
    prbs: u32,
    bler: f64,
    retx: u32,
    /// (packet ordinal, bits)
    segments: Vec<(u64, u64)>,
}

struct SliceGeometry {
    interval: usize,
    mu: Numerology,
    slot: SimTime,
    capacity: u32,
    occupied_hz: f64,
}

struct Engine<'r, 'a, F: FnMut(&PacketRecord)> {
    run: &'r SliceRun<'a>,
    queues: Vec<DevQueue>,
    links: Vec<Option<Link>>,
    decodes: BTreeMap<(SimTime, u64), Tb>,
    retx: BTreeMap<(SimTime, u64), Tb>,
    next_tb: u64,
    harq: SimRng,
    stats: SliceStats,
    sink: F,
}

impl<'r, 'a, F: FnMut(&PacketRecord)> Engine<'r, 'a, F> {
    fn emit(&mut self, rec: PacketRecord) {
        (self.sink)(&rec);
    }

    fn enqueue(&mut self, p: Packet) {
        let bits = p.size_bytes as u64 * 8;
        self.stats.packets_offered += 1;
        self.stats.bits_offered[p.interval as usize - 1] += bits;
        let dq = &mut self.queues[p.device as usize];
        dq.backlog_bits += bits;
        dq.q.push_back(PktState { packet: p, unsent: bits, unacked: 0, last_decode: SimTime::ZERO, done: false });
    }

    fn pop_finished(&mut self, dev: usize) {
        let dq = &mut self.queues[dev];
        while dq.q.front().is_some_and(|p| p.done) {
            dq.q.pop_front();
            dq.base += 1;
            dq.next_unsent = dq.next_unsent.saturating_sub(1);
        }
    }

    fn apply_decode(&mut self, at: SimTime, tb: Tb, geom: &SliceGeometry) {
        let failed = self.harq.gen::<f64>() < tb.bler;
        let dev = tb.device as usize;
        if !failed {
            for &(ord, bits) in &tb.segments {
                let dq = &mut self.queues[dev];
                let Some(p) = ord.checked_sub(dq.base).and_then(|i| dq.q.get_mut(i as usize)) else {
                    continue;
                };
                if p.done {
                    continue;
                }
                p.unacked -= bits;
                p.last_decode = p.last_decode.max(at);
                if p.unsent == 0 && p.unacked == 0 {
                    p.done = true;
                    let rec = PacketRecord::delivered(&p.packet, p.last_decode);
                    self.stats.packets_delivered += 1;
                    self.stats.bits_delivered[p.packet.interval as usize - 1] += p.packet.size_bytes as u64 * 8;
                    self.emit(rec);
                }
            }
            self.pop_finished(dev);
        } else if tb.retx < self.run.pipeline.max_harq_retx {
            let when = self.run.pipeline.retx_decision(at, geom.mu);
            let id = self.next_tb;
            self.next_tb += 1;
            self.retx.insert((when, id), Tb { retx: tb.retx + 1, ..tb });
        } else {
            self.drop_tb(&tb);
        }
    }

    fn drop_tb(&mut self, tb: &Tb) {
        let dev = tb.device as usize;
        for &(ord, _) in &tb.segments {
            let dq = &mut self.queues[dev];
            let Some(p) = ord.checked_sub(dq.base).and_then(|i| dq.q.get_mut(i as usize)) else {
                continue;
            };
            if p.done {
                continue;
            }
            p.done = true;
            dq.backlog_bits -= p.unsent;
            p.unsent = 0;
            let rec = PacketRecord::dropped(&p.packet, DropReason::HarqExhausted);
            self.stats.packets_harq_dropped += 1;
            self.emit(rec);
        }
        self.pop_finished(dev);
    }

    fn link(&mut self, dev: usize, t: SimTime, geom: &SliceGeometry) -> Link {
        if let Some(l) = self.links[dev] {
            if t < l.valid_until {
                return l;
            }
        }
        let run = self.run;
        let d = &run.devices[dev];
        let pos = d.paths[geom.interval].position_at(t);
        let ch = run.channel;
        let state = d.draws[geom.interval].state(run.gnb.distance_2d(&pos), ch);
        let pl = pathloss_db(&run.gnb, &pos, ch.carrier_ghz, state);
        if pl.clamped {
            self.stats.pathloss_clamps += 1;
        }
        let (tx, nf) = match run.profile.direction() {
            Direction::Downlink => (ch.gnb_tx_dbm, ch.noise_figure_dl_db),
            Direction::Uplink => (ch.ue_tx_dbm, ch.noise_figure_ul_db),
        };
        let sinr = sinr_db(tx, pl.db, geom.occupied_hz, nf);
        let se = spectral_efficiency(sinr, ch);
        // the MCS is picked for the measured SINR, or for the cap once it saturates
        let selection = sinr.min(sinr_for_efficiency(ch.se_max, ch));
        let interval_end = run.plan.interval_duration.0 * (geom.interval as u64 + 1);
        let l = Link {
            se,
            bler: run.bler.bler(sinr, selection),
            valid_until: SimTime((t + run.channel_refresh).0.min(interval_end)),
        };
        self.links[dev] = Some(l);
        l
    }

    fn carve(&mut self, dev: usize, bits: u64) -> Vec<(u64, u64)> {
        let dq = &mut self.queues[dev];
        let mut left = bits;
        let mut segments = Vec::new();
        while left > 0 && dq.next_unsent < dq.q.len() {
            let i = dq.next_unsent;
            let p = &mut dq.q[i];
            if p.done || p.unsent == 0 {
                dq.next_unsent += 1;
                continue;
            }
            let take = p.unsent.min(left);
            p.unsent -= take;
            p.unacked += take;
            left -= take;
            dq.backlog_bits -= take;
            segments.push((dq.base + i as u64, take));
            if p.unsent == 0 {
                dq.next_unsent += 1;
            }
        }
        segments
    }
}

fn geometry(run: &SliceRun, interval: usize) -> SliceGeometry {
    let cfg = run.plan.intervals[interval][run.profile.index()];
    let capacity = cfg.prbs(&run.carrier).expect("plan validated at build time");
    SliceGeometry {
        interval,
        mu: cfg.numerology,
        slot: cfg.numerology.slot_duration(),
        capacity,
        occupied_hz: cfg.occupied_hz(&run.carrier).expect("plan validated at build time"),
    }
}

/// PRBs needed to carry `bits` at `se`.
fn prbs_for(bits: u64, se: f64, overhead: f64) -> u32 {
    let per_prb = (SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT) as f64 * se * overhead;
    let mut p = (bits as f64 / per_prb).ceil().max(1.0) as u32;
    while tb_bits(p, se, overhead) < bits {
        p += 1;
    }
    p
}

/// Runs one slice over the plan horizon.
///
/// `arrivals` must be ordered by creation time and only hold packets of this
/// slice's profile. Every packet ends up in exactly one record passed to
/// `sink`: delivered, dropped after HARQ exhaustion, or undelivered at the
/// horizon.
pub fn run_slice<I, F>(run: &SliceRun, arrivals: I, sink: F) -> SliceStats
where
    I: IntoIterator<Item = Packet>,
    F: FnMut(&PacketRecord),
{
    run_slice_traced(run, arrivals, sink, |_, _| {})
}

/// [`run_slice`] that also reports every transmission; the flag marks
/// HARQ retransmissions.
pub fn run_slice_traced<I, F, G>(run: &SliceRun, arrivals: I, sink: F, mut on_grant: G) -> SliceStats
where
    I: IntoIterator<Item = Packet>,
    F: FnMut(&PacketRecord),
    G: FnMut(&TransmissionGrant, bool),
{
    let n_iv = run.plan.intervals.len();
    let horizon = run.plan.horizon();
    let mut arrivals: Peekable<I::IntoIter> = arrivals.into_iter().peekable();
    let mut e = Engine {
        run,
        queues: (0..run.devices.len()).map(|_| DevQueue::default()).collect(),
        links: vec![None; run.devices.len()],
        decodes: BTreeMap::new(),
        retx: BTreeMap::new(),
        next_tb: 0,
        harq: rng::stream(run.run_seed, &[rng::label::HARQ, run.profile.index() as u64]),
        stats: SliceStats { bits_offered: vec![0; n_iv], bits_delivered: vec![0; n_iv], ..Default::default() },
        sink,
    };
    let mut rr = RoundRobin::new();
    let mut geom = geometry(run, 0);
    let boundary = |x: SimTime| -> SimTime {
        match run.plan.interval_of(x) {
            Ok(iv) => {
                let mu = run.plan.intervals[iv][run.profile.index()].numerology;
                x.ceil_to(mu.slot_duration())
            }
            Err(_) => horizon,
        }
    };

    let mut demands: Vec<(u32, u32)> = Vec::new();
    let mut ses: Vec<f64> = vec![0.0; run.devices.len()];
    let mut blers: Vec<f64> = vec![0.0; run.devices.len()];
    let mut t = SimTime::ZERO;
    while t < horizon {
        let iv = run.plan.interval_of(t).expect("t below horizon");
        if iv != geom.interval {
            geom = geometry(run, iv);
            e.links.iter_mut().for_each(|l| *l = None);
        }
        e.stats.decision_slots += 1;

        while let Some(entry) = e.decodes.first_entry() {
            if entry.key().0 > t {
                break;
            }
            let ((at, _), tb) = entry.remove_entry();
            e.apply_decode(at, tb, &geom);
        }
        while let Some(p) = arrivals.next_if(|p| p.created <= t) {
            debug_assert_eq!(p.profile, run.profile);
            e.enqueue(p);
        }

        let decode_at = run.pipeline.decode_done(t, geom.mu);
        let slot_pos = time_to_position(t, geom.mu);
        let mut used = 0u32;
        let mut wanted_retx = 0u32;
        let mut deferred = Vec::new();
        while let Some(entry) = e.retx.first_entry() {
            if entry.key().0 > t {
                break;
            }
            let (_, tb) = entry.remove_entry();
            if tb.prbs > geom.capacity {
                // the slice shrank under this retransmission
                e.drop_tb(&tb);
                continue;
            }
            wanted_retx += tb.prbs;
            if tb.prbs > geom.capacity - used {
                deferred.push(tb);
                continue;
            }
            used += tb.prbs;
            e.stats.harq_retx += 1;
            e.stats.transport_blocks += 1;
            let bits: u64 = tb.segments.iter().map(|s| s.1).sum();
            on_grant(&TransmissionGrant { device: tb.device, slot: slot_pos, prbs: tb.prbs, tb_bits: bits }, true);
            let id = e.next_tb;
            e.next_tb += 1;
            e.decodes.insert((decode_at, id), tb);
        }
        for tb in deferred {
            let id = e.next_tb;
            e.next_tb += 1;
            e.retx.insert((t + geom.slot, id), tb);
        }

        demands.clear();
        let mut any_backlog = false;
        for dev in 0..e.queues.len() {
            let backlog = e.queues[dev].backlog_bits;
            if backlog == 0 {
                continue;
            }
            any_backlog = true;
            let link = e.link(dev, t, &geom);
            if link.se > 0.0 {
                ses[dev] = link.se;
                blers[dev] = link.bler;
                demands.push((dev as u32, prbs_for(backlog, link.se, run.overhead)));
            }
        }
        let wanted_new: u64 = demands.iter().map(|d| d.1 as u64).sum();
        let grants = rr.allocate(&demands, geom.capacity - used);
        let mut granted = used as u64;
        for g in grants {
            let dev = g.device as usize;
            let bits = tb_bits(g.prbs, ses[dev], run.overhead);
            let segments = e.carve(dev, bits);
            if segments.is_empty() {
                continue;
            }
            granted += g.prbs as u64;
            e.stats.transport_blocks += 1;
            on_grant(&TransmissionGrant { device: g.device, slot: slot_pos, prbs: g.prbs, tb_bits: bits }, false);
            let id = e.next_tb;
            e.next_tb += 1;
            e.decodes.insert(
                (decode_at, id),
                Tb { device: g.device, prbs: g.prbs, bler: blers[dev], retx: 0, segments },
            );
        }
        e.stats.prbs_granted += granted;
        if granted > geom.capacity as u64 {
            e.stats.capacity_violations += 1;
        }
        let expected = (geom.capacity as u64).min(wanted_retx as u64 + wanted_new);
        e.stats.prb_shortfall += expected.saturating_sub(granted);

        t = if any_backlog {
            t + geom.slot
        } else {
            let mut next = horizon;
            if let Some(p) = arrivals.peek() {
                next = next.min(boundary(p.created));
            }
            if let Some((k, _)) = e.retx.first_key_value() {
                next = next.min(boundary(k.0));
            }
            if let Some((k, _)) = e.decodes.first_key_value() {
                next = next.min(boundary(k.0));
            }
            next.max(t + geom.slot)
        };
    }

    // outcomes decoded before the horizon still count
    while let Some(entry) = e.decodes.first_entry() {
        if entry.key().0 >= horizon {
            break;
        }
        let ((at, _), tb) = entry.remove_entry();
        e.apply_decode(at, tb, &geom);
    }

    let mut leftovers: Vec<PacketRecord> = Vec::new();
    for dq in &e.queues {
        for p in dq.q.iter().filter(|p| !p.done) {
            leftovers.push(PacketRecord::dropped(&p.packet, DropReason::Undelivered));
        }
    }
    for p in arrivals.take_while(|p| p.created < horizon) {
        e.stats.packets_offered += 1;
        e.stats.bits_offered[p.interval as usize - 1] += p.size_bytes as u64 * 8;
        leftovers.push(PacketRecord::dropped(&p, DropReason::Undelivered));
    }
    e.stats.packets_undelivered += leftovers.len() as u64;
    for rec in leftovers {
        e.emit(rec);
    }
    e.stats
}
