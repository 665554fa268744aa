//! Trace-driven DRAM energy estimation for DDR3L modules.
//!
//! A command trace is replayed against per-bank state ([`dram_state`]);
//! each RD/WR draws a current that depends on the transferred data
//! ([`datadep`]) and each bank and row carries its own structural factor
//! ([`variation`]). The [`energy`] engine integrates all of it against a
//! [`profiles::VendorProfile`]. [`baselines`] holds simpler comparison
//! models and [`encoding`] the data encodings that can be scored with it.

pub mod baselines;
pub mod datadep;
pub mod dram_state;
pub mod encoding;
pub mod energy;
pub mod profiles;
pub mod regression;
pub mod trace;
pub mod variation;

pub use energy::{compute_energy, EnergyBreakdown, EnergyError, EnergyOptions, EnergyReport};
pub use profiles::{TimingParams, VendorProfile};
pub use trace::{parse_trace, CacheLine, Command, CommandKind, Direction, Op, ParseMode, Trace};
