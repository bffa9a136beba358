//! Large-scale propagation, link budget and link adaptation.
//!
//! Path loss follows the 3GPP TR 38.901 indoor-factory model with dense
//! clutter and a high base-station antenna (InF-DH). There is one cell, so
//! the SINR is a plain SNR: no interference term.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{self, SimRng};

/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position3D { x, y, z }
    }

    pub fn distance_2d(&self, other: &Position3D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_3d(&self, other: &Position3D) -> f64 {
        let d2 = self.distance_2d(other);
        d2.hypot(self.z - other.z)
    }

    /// Point a fraction `f` of the way from `self` to `to`.
    pub fn lerp(&self, to: &Position3D, f: f64) -> Position3D {
        Position3D {
            x: self.x + (to.x - self.x) * f,
            y: self.y + (to.y - self.y) * f,
            z: self.z + (to.z - self.z) * f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub los: bool,
    pub shadowing_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pathloss {
    pub db: f64,
    /// Set when the geometric distance was below 1 m and got clamped.
    pub clamped: bool,
}

/// Tunable channel constants, all exposed in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    /// Clutter length of the LOS-probability exponential, in metres.
    pub k_dh_m: f64,
    pub shadowing_los_db: f64,
    pub shadowing_nlos_db: f64,
    /// Receiver noise figure at the UE (downlink).
    pub noise_figure_dl_db: f64,
    /// Receiver noise figure at the gNB (uplink).
    pub noise_figure_ul_db: f64,
    pub gnb_tx_dbm: f64,
    pub ue_tx_dbm: f64,
    /// Shannon attenuation factor of the link-adaptation curve.
    pub se_alpha: f64,
    pub se_max: f64,
    pub sinr_min_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_ghz: 3.7,
            k_dh_m: 25.0,
            shadowing_los_db: 4.3,
            shadowing_nlos_db: 4.0,
            noise_figure_dl_db: 7.0,
            noise_figure_ul_db: 5.0,
            gnb_tx_dbm: 15.0,
            ue_tx_dbm: 15.0,
            se_alpha: 0.75,
            se_max: 7.4063,
            sinr_min_db: -10.0,
        }
    }
}

fn los_formula(d3d: f64, fc_ghz: f64) -> f64 {
    31.84 + 21.50 * d3d.log10() + 19.00 * fc_ghz.log10()
}

fn nlos_dh_formula(d3d: f64, fc_ghz: f64) -> f64 {
    33.63 + 21.9 * d3d.log10() + 20.0 * fc_ghz.log10()
}

/// InF-DH path loss between two points, shadowing included.
pub fn pathloss_db(tx: &Position3D, rx: &Position3D, fc_ghz: f64, state: LinkState) -> Pathloss {
    let raw = tx.distance_3d(rx);
    let clamped = raw < MIN_DISTANCE_M;
    let d = raw.max(MIN_DISTANCE_M);
    let los = los_formula(d, fc_ghz);
    let median = if state.los { los } else { los.max(nlos_dh_formula(d, fc_ghz)) };
    Pathloss { db: median + state.shadowing_db, clamped }
}

pub fn los_probability(d2d: f64, k_dh_m: f64) -> f64 {
    (-d2d.max(0.0) / k_dh_m).exp()
}

pub fn noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub fn sinr_db(tx_power_dbm: f64, pathloss_db: f64, bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    debug_assert!(bandwidth_hz > 0.0);
    tx_power_dbm - pathloss_db - noise_dbm(bandwidth_hz, noise_figure_db)
}

/// Truncated-Shannon link adaptation, in bit/s/Hz.
pub fn spectral_efficiency(sinr_db: f64, params: &ChannelParams) -> f64 {
    if sinr_db.is_nan() || sinr_db < params.sinr_min_db {
        return 0.0;
    }
    let linear = 10f64.powf(sinr_db / 10.0);
    (params.se_alpha * (1.0 + linear).log2()).min(params.se_max)
}

/// Inverse of [`spectral_efficiency`] on its uncapped branch: the SINR at
/// which the curve reaches `se`.
pub fn sinr_for_efficiency(se: f64, params: &ChannelParams) -> f64 {
    10.0 * (2f64.powf(se / params.se_alpha) - 1.0).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub pathloss_db: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub sinr_db: f64,
}

impl LinkBudget {
    pub fn new(tx_power_dbm: f64, pathloss_db: f64, noise_figure_db: f64, bandwidth_hz: f64) -> Self {
        LinkBudget {
            tx_power_dbm,
            pathloss_db,
            noise_figure_db,
            bandwidth_hz,
            sinr_db: sinr_db(tx_power_dbm, pathloss_db, bandwidth_hz, noise_figure_db),
        }
    }
}

/// The per-(device, interval) random draws of a run.
///
/// A device keeps one uniform variate for its LOS decision and one standard
/// normal for its shadowing during an activity interval; the LOS state at a
/// given position is `u < p_los(d2d)`, so it still follows the geometry as
/// the device moves while the draw itself stays fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDraw {
    pub los_uniform: f64,
    pub shadow_normal: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelTable {
    draws: Vec<Vec<LinkDraw>>,
}

impl ChannelTable {
    /// `device_ids` are the global ids used to derive each device's stream.
    pub fn new(run_seed: u64, device_ids: &[u64], intervals: usize) -> Self {
        let draws = device_ids
            .iter()
            .map(|&id| {
                let mut r: SimRng = rng::stream(run_seed, &[rng::label::CHANNEL, id]);
                (0..intervals)
                    .map(|_| LinkDraw {
                        los_uniform: r.gen::<f64>(),
                        shadow_normal: r.sample(StandardNormal),
                    })
                    .collect()
            })
            .collect();
        ChannelTable { draws }
    }

    pub fn draw(&self, device_index: usize, interval: usize) -> LinkDraw {
        self.draws[device_index][interval]
    }
}

impl LinkDraw {
    pub fn state(&self, d2d: f64, params: &ChannelParams) -> LinkState {
        let los = self.los_uniform < los_probability(d2d, params.k_dh_m);
        let sigma = if los { params.shadowing_los_db } else { params.shadowing_nlos_db };
        LinkState { los, shadowing_db: self.shadow_normal * sigma }
    }
}
