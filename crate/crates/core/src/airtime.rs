//! Fractional airtime occupancy, the single accounting metric shared by
//! scheduled-MAC basestations and contention-MAC access points.
//!
//! A slice's airtime can be derived either from its share of scheduler
//! resource blocks or from its achieved throughput relative to the average
//! PHY rate it was served at. Both routes give the same fraction when the
//! MAC is work-conserving, which is what lets one controller treat both
//! radio types uniformly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AirtimeError {
    #[error("resource block total is zero")]
    ZeroTotalBlocks,
    #[error("allocated blocks ({allocated}) are not part of the slice set")]
    BlocksNotInSet { allocated: u64 },
    #[error("invalid PHY rate {0} Mbps (must be > 0)")]
    InvalidPhyRate(f64),
    #[error("invalid achieved rate {0} Mbps (must be >= 0)")]
    InvalidAchievedRate(f64),
    #[error("invalid subcarrier count: {allotted} allotted of {total}")]
    InvalidSubcarrierCount { allotted: u32, total: u32 },
    #[error("simultaneous stream count must be >= 1")]
    InvalidStreamCount,
    #[error("airtime fraction {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Fraction of a substrate's transmission time used by one slice.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AirtimeFraction(f64);

impl AirtimeFraction {
    pub const ZERO: AirtimeFraction = AirtimeFraction(0.0);
    pub const FULL: AirtimeFraction = AirtimeFraction(1.0);

    pub fn new(value: f64) -> Result<Self, AirtimeError> {
        if (0.0..=1.0).contains(&value) {
            Ok(AirtimeFraction(value))
        } else {
            Err(AirtimeError::OutOfRange(value))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to zero.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            AirtimeFraction(0.0)
        } else {
            AirtimeFraction(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AirtimeFraction {
    type Error = AirtimeError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        AirtimeFraction::new(value)
    }
}

impl From<AirtimeFraction> for f64 {
    fn from(a: AirtimeFraction) -> f64 {
        a.0
    }
}

/// Number of MAC scheduler resource blocks granted to a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ResourceBlockCount(pub u64);

/// Achieved slice throughput and the average PHY rate it was served at, in Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub achieved_rate: f64,
    pub phy_rate: f64,
}

impl RatePair {
    pub fn new(achieved_rate: f64, phy_rate: f64) -> Self {
        RatePair {
            achieved_rate,
            phy_rate,
        }
    }
}

/// Airtime as the slice's share of scheduler resource blocks.
pub fn airtime_from_blocks(
    allocated: ResourceBlockCount,
    all_slices: &[ResourceBlockCount],
) -> Result<AirtimeFraction, AirtimeError> {
    if !all_slices.contains(&allocated) {
        return Err(AirtimeError::BlocksNotInSet {
            allocated: allocated.0,
        });
    }
    let total: u128 = all_slices.iter().map(|b| b.0 as u128).sum();
    if total == 0 {
        return Err(AirtimeError::ZeroTotalBlocks);
    }
    Ok(AirtimeFraction::saturating(allocated.0 as f64 / total as f64))
}

/// Airtime as achieved throughput over average PHY rate. Measurements above
/// the PHY rate are clamped to full airtime.
pub fn airtime_from_rates(rates: RatePair) -> Result<AirtimeFraction, AirtimeError> {
    if !(rates.phy_rate > 0.0) || !rates.phy_rate.is_finite() {
        return Err(AirtimeError::InvalidPhyRate(rates.phy_rate));
    }
    if !(rates.achieved_rate >= 0.0) {
        return Err(AirtimeError::InvalidAchievedRate(rates.achieved_rate));
    }
    Ok(AirtimeFraction::saturating(
        rates.achieved_rate / rates.phy_rate,
    ))
}

/// Scales OFDMA airtime by the (window-averaged) share of subcarriers the
/// slice held.
pub fn normalize_ofdma(
    raw_airtime: AirtimeFraction,
    subcarriers_allotted: u32,
    subcarriers_total: u32,
) -> Result<AirtimeFraction, AirtimeError> {
    if subcarriers_allotted == 0 || subcarriers_allotted > subcarriers_total {
        return Err(AirtimeError::InvalidSubcarrierCount {
            allotted: subcarriers_allotted,
            total: subcarriers_total,
        });
    }
    if subcarriers_allotted == subcarriers_total {
        return Ok(raw_airtime);
    }
    Ok(AirtimeFraction::saturating(
        raw_airtime.0 * (subcarriers_allotted as f64 / subcarriers_total as f64),
    ))
}

/// Divides MU-MIMO airtime among the simultaneous transmissions sharing it.
pub fn normalize_mu_mimo(
    raw_airtime: AirtimeFraction,
    simultaneous_streams: u32,
) -> Result<AirtimeFraction, AirtimeError> {
    if simultaneous_streams == 0 {
        return Err(AirtimeError::InvalidStreamCount);
    }
    Ok(AirtimeFraction::saturating(
        raw_airtime.0 / simultaneous_streams as f64,
    ))
}
