//! Hybrid wireless virtualization (HWV) control plane and simulator.
//!
//! A central controller re-provisions per-slice airtime quotas across
//! heterogeneous virtualized radios (scheduled-MAC basestations and
//! contention-MAC access points) by solving a revenue-maximizing LP each
//! control cycle, and is compared against a static equal-split baseline.

pub mod airtime;
pub mod controller;
pub mod metrics;
pub mod nwpd;
pub mod optimizer;
pub mod policy;
pub mod registry;
pub mod runner;
pub mod substrate;
