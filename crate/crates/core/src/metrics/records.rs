use serde::{Deserialize, Serialize};

use crate::slicing::Profile;
use crate::timebase::SimTime;

/// A packet as offered to a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub profile: Profile,
    pub device: u32,
    /// Per-device sequence number, starting at 0.
    pub seq: u64,
    pub size_bytes: u32,
    pub created: SimTime,
    /// 1-based activity interval the packet was created in.
    pub interval: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// A transport block failed more than `max_harq_retx` retransmissions.
    HarqExhausted,
    /// Still queued or in flight when the simulation ended.
    Undelivered,
}

/// Timing ledger entry of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub profile: Profile,
    pub device: u32,
    pub seq: u64,
    pub size_bytes: u32,
    pub created: SimTime,
    pub delivered: Option<SimTime>,
    pub drop: Option<DropReason>,
    pub interval: u8,
}

impl PacketRecord {
    pub fn delivered(p: &Packet, at: SimTime) -> Self {
        debug_assert!(at >= p.created);
        Self::from_packet(p, Some(at), None)
    }

    pub fn dropped(p: &Packet, reason: DropReason) -> Self {
        Self::from_packet(p, None, Some(reason))
    }

    fn from_packet(p: &Packet, delivered: Option<SimTime>, drop: Option<DropReason>) -> Self {
        PacketRecord {
            profile: p.profile,
            device: p.device,
            seq: p.seq,
            size_bytes: p.size_bytes,
            created: p.created,
            delivered,
            drop,
            interval: p.interval,
        }
    }

    pub fn is_dropped(&self) -> bool {
        self.drop.is_some()
    }

    pub fn latency(&self) -> Option<SimTime> {
        self.delivered.map(|d| d - self.created)
    }
}
