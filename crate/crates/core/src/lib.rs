//! Deterministic 5G NR simulator for an indoor logistics cell: a
//! slot-level slicing model for eMBB and URLLC traffic and a random-access
//! model for massive mMTC arrivals.

pub mod campaign;
pub mod channel;
pub mod metrics;
pub mod rach;
pub mod reproduce;
pub mod rng;
pub mod scenario;
pub mod slicing;
pub mod timebase;

pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use slicing::Profile;
pub use timebase::SimTime;
