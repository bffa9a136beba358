//! Transport-block sizing, the block-error model and the MAC/PHY latency
//! pipeline shared by the slice engine and the isolated-packet helper.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{DropReason, Packet, PacketRecord};
use crate::timebase::{Numerology, SimTime, SUBCARRIERS_PER_PRB, SYMBOLS_PER_SLOT};

/// Default fraction of resource elements left after control and reference signals.
pub const DEFAULT_OVERHEAD: f64 = 0.86;

/// Bits carried by `prbs` PRBs for one slot at spectral efficiency `se`.
pub fn tb_bits(prbs: u32, se: f64, overhead: f64) -> u64 {
    let re = prbs as f64 * (SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT) as f64;
    (re * se * overhead).floor().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyPipeline {
    pub mac_to_phy_slots: u32,
    pub tb_decode_us: u32,
    pub harq_feedback_slots: u32,
    pub max_harq_retx: u32,
}

impl Default for LatencyPipeline {
    fn default() -> Self {
        LatencyPipeline { mac_to_phy_slots: 2, tb_decode_us: 100, harq_feedback_slots: 1, max_harq_retx: 3 }
    }
}

impl LatencyPipeline {
    pub fn tb_decode(&self) -> SimTime {
        SimTime::from_us(self.tb_decode_us as u64)
    }

    /// When a TB scheduled at the slot boundary `decision` has been decoded.
    pub fn decode_done(&self, decision: SimTime, mu: Numerology) -> SimTime {
        let slot = mu.slot_duration().0;
        decision + SimTime(slot * (self.mac_to_phy_slots as u64 + 1)) + self.tb_decode()
    }

    /// First slot boundary at which a TB that failed decoding at `decoded`
    /// can be rescheduled.
    pub fn retx_decision(&self, decoded: SimTime, mu: Numerology) -> SimTime {
        let slot = mu.slot_duration();
        (decoded + SimTime(slot.0 * self.harq_feedback_slots as u64)).ceil_to(slot)
    }
}

/// Exponential BLER curve around a threshold set `margin_db` below the SINR
/// the MCS was chosen for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlerModel {
    pub margin_db: f64,
    pub scale: f64,
    pub floor: f64,
    pub cap: f64,
}

impl Default for BlerModel {
    fn default() -> Self {
        BlerModel { margin_db: 2.0, scale: 0.5, floor: 1e-5, cap: 0.5 }
    }
}

impl BlerModel {
    pub fn bler(&self, sinr_db: f64, selection_sinr_db: f64) -> f64 {
        let threshold = selection_sinr_db - self.margin_db;
        (self.scale * (-(sinr_db - threshold)).exp()).clamp(self.floor, self.cap)
    }
}

/// Outcome of [`simulate_transmission`].
#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedTransmission {
    pub record: PacketRecord,
    pub transport_blocks: u32,
    pub harq_retx: u32,
}

/// Sends a single packet over an otherwise idle slice that offers
/// `tb_bits_per_slot` bits to it in every slot.
///
/// The packet is split into back-to-back TBs decided at consecutive slot
/// boundaries from the first one at or after creation; each TB fails
/// independently with probability `bler` and is retried through the HARQ
/// loop. This mirrors the slice engine's timing for a lone packet.
pub fn simulate_transmission<R: Rng + ?Sized>(
    packet: &Packet,
    tb_bits_per_slot: u64,
    mu: Numerology,
    pipeline: &LatencyPipeline,
    bler: f64,
    rng: &mut R,
) -> IsolatedTransmission {
    let bits = packet.size_bytes as u64 * 8;
    if tb_bits_per_slot == 0 {
        return IsolatedTransmission {
            record: PacketRecord::dropped(packet, DropReason::Undelivered),
            transport_blocks: 0,
            harq_retx: 0,
        };
    }
    let n_tb = bits.div_ceil(tb_bits_per_slot) as u32;
    let slot = mu.slot_duration();
    let first = packet.created.ceil_to(slot);
    let mut done = SimTime::ZERO;
    let mut retx = 0;
    for k in 0..n_tb {
        let mut decision = first + SimTime(slot.0 * k as u64);
        let mut attempt = 0;
        loop {
            let decoded = pipeline.decode_done(decision, mu);
            if rng.gen::<f64>() >= bler {
                done = done.max(decoded);
                break;
            }
            if attempt == pipeline.max_harq_retx {
                return IsolatedTransmission {
                    record: PacketRecord::dropped(packet, DropReason::HarqExhausted),
                    transport_blocks: n_tb,
                    harq_retx: retx,
                };
            }
            attempt += 1;
            retx += 1;
            decision = pipeline.retx_decision(decoded, mu);
        }
    }
    IsolatedTransmission {
        record: PacketRecord::delivered(packet, done),
        transport_blocks: n_tb,
        harq_retx: retx,
    }
}
