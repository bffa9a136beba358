//! 5G NR frame-structure arithmetic.
//!
//! All simulated time is an integer count of nanoseconds ([`SimTime`]). Slot
//! durations are exact for every supported numerology; OFDM symbol durations
//! (1/14 of a slot) are rounded to the nearest nanosecond once, here, and are
//! never accumulated into the clock.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NS_PER_US: u64 = 1_000;
pub const NS_PER_MS: u64 = 1_000_000;
pub const NS_PER_SEC: u64 = 1_000_000_000;

pub const SUBFRAME_NS: u64 = NS_PER_MS;
pub const FRAME_NS: u64 = 10 * NS_PER_MS;
pub const SUBFRAMES_PER_FRAME: u64 = 10;
pub const SYMBOLS_PER_SLOT: u64 = 14;
pub const SUBCARRIERS_PER_PRB: u64 = 12;

/// Highest numerology defined for NR.
pub const MAX_MU: u8 = 4;
/// Highest numerology usable on FR1 data channels.
pub const MAX_DATA_MU: u8 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimebaseError {
    #[error("numerology {0} out of range (expected 0..=4)")]
    InvalidNumerology(u8),
    #[error("bandwidth must be positive, got {0} Hz")]
    InvalidBandwidth(f64),
    #[error("guard fraction must be in [0, 1), got {0}")]
    InvalidGuard(f64),
    #[error("slice too narrow: {bandwidth_hz} Hz holds no PRB at numerology {mu}")]
    SliceTooNarrow { bandwidth_hz: f64, mu: u8 },
}

/// NR numerology index (mu).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Numerology(u8);

impl Numerology {
    pub const MU0: Numerology = Numerology(0);
    pub const MU1: Numerology = Numerology(1);
    pub const MU2: Numerology = Numerology(2);

    pub fn new(mu: u8) -> Result<Self, TimebaseError> {
        if mu > MAX_MU {
            return Err(TimebaseError::InvalidNumerology(mu));
        }
        Ok(Numerology(mu))
    }

    pub fn mu(self) -> u8 {
        self.0
    }

    pub fn slots_per_subframe(self) -> u64 {
        1 << self.0
    }

    pub fn slots_per_frame(self) -> u64 {
        SUBFRAMES_PER_FRAME * self.slots_per_subframe()
    }

    pub fn scs_hz(self) -> f64 {
        15_000.0 * self.slots_per_subframe() as f64
    }

    /// Slot length. Exact for every mu in 0..=4.
    pub fn slot_duration(self) -> SimTime {
        SimTime(SUBFRAME_NS / self.slots_per_subframe())
    }

    /// OFDM symbol length (normal cyclic prefix folded in), rounded to the nearest ns.
    pub fn symbol_duration(self) -> SimTime {
        let denom = SYMBOLS_PER_SLOT * self.slots_per_subframe();
        SimTime((SUBFRAME_NS + denom / 2) / denom)
    }

    pub fn params(self) -> NumerologyParams {
        NumerologyParams {
            scs_khz: 15 * (1u32 << self.0),
            slot_duration: self.slot_duration(),
            symbol_duration: self.symbol_duration(),
            slots_per_subframe: self.slots_per_subframe() as u32,
        }
    }
}

impl TryFrom<u8> for Numerology {
    type Error = TimebaseError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Numerology::new(value)
    }
}

impl From<Numerology> for u8 {
    fn from(value: Numerology) -> Self {
        value.0
    }
}

impl fmt::Display for Numerology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mu={}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumerologyParams {
    pub scs_khz: u32,
    pub slot_duration: SimTime,
    pub symbol_duration: SimTime,
    pub slots_per_subframe: u32,
}

/// Checked form of [`Numerology::params`] for raw indices.
pub fn numerology_params(mu: u8) -> Result<NumerologyParams, TimebaseError> {
    Ok(Numerology::new(mu)?.params())
}

/// Nanoseconds since simulation start.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * NS_PER_US)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * NS_PER_MS)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * NS_PER_SEC)
    }

    /// Rounds to the nearest nanosecond. Negative inputs saturate at zero.
    pub fn from_ms_f64(ms: f64) -> Self {
        SimTime((ms * NS_PER_MS as f64).round().max(0.0) as u64)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * NS_PER_SEC as f64).round().max(0.0) as u64)
    }

    pub const fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / NS_PER_MS as f64
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Smallest multiple of `step` that is `>= self`.
    pub fn ceil_to(self, step: SimTime) -> SimTime {
        debug_assert!(step.0 > 0);
        SimTime(self.0.div_ceil(step.0) * step.0)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} ms", self.as_ms_f64())
    }
}

/// Frame / subframe / slot coordinates of an instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FramePosition {
    pub frame: u64,
    pub subframe: u8,
    pub slot: u8,
}

/// Position of the slot containing `t`.
pub fn time_to_position(t: SimTime, mu: Numerology) -> FramePosition {
    let slot_index = t.0 / mu.slot_duration().0;
    let per_frame = mu.slots_per_frame();
    let in_frame = slot_index % per_frame;
    FramePosition {
        frame: slot_index / per_frame,
        subframe: (in_frame / mu.slots_per_subframe()) as u8,
        slot: (in_frame % mu.slots_per_subframe()) as u8,
    }
}

/// Start time of the slot at `pos`.
pub fn position_to_time(pos: FramePosition, mu: Numerology) -> SimTime {
    SimTime(
        pos.frame * FRAME_NS
            + pos.subframe as u64 * SUBFRAME_NS
            + pos.slot as u64 * mu.slot_duration().0,
    )
}

/// Number of whole PRBs (12 subcarriers each) fitting in the usable part of
/// `bandwidth_hz`, after removing `guard_fraction` of it.
pub fn prb_count(
    bandwidth_hz: f64,
    mu: Numerology,
    guard_fraction: f64,
) -> Result<u32, TimebaseError> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(TimebaseError::InvalidBandwidth(bandwidth_hz));
    }
    if !(0.0..1.0).contains(&guard_fraction) {
        return Err(TimebaseError::InvalidGuard(guard_fraction));
    }
    let prb_hz = SUBCARRIERS_PER_PRB as f64 * mu.scs_hz();
    // tolerate representation error in products like 20e6 * 0.9
    let prbs = (bandwidth_hz * (1.0 - guard_fraction) / prb_hz + 1e-9).floor() as u32;
    if prbs == 0 {
        return Err(TimebaseError::SliceTooNarrow { bandwidth_hz, mu: mu.mu() });
    }
    Ok(prbs)
}
