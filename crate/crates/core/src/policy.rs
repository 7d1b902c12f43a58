//! Operator policy served by the network-wide policy database: slice bids
//! and quotas, minimum reservations, utility definitions and pricing.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{
    AllocationProblem, ConstraintKind, OptimizerError, SliceQuota, SubstrateId,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy validation failed: {}", join_fields(.0))]
    Invalid(Vec<FieldError>),
    #[error("reports do not match policy: {0}")]
    Mismatch(String),
}

fn join_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMode {
    /// All substrates weigh 1: the objective is aggregate rate.
    #[default]
    RateMaximization,
    /// Per-substrate price weights scale each substrate's rate.
    WeightedRevenue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityForm {
    /// Γ_j(t) = C_j: revenue is linear in allocated airtime.
    #[default]
    LinearConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CoefficientSource {
    /// C^k_j is the slice's average PHY rate reported by substrate k.
    #[default]
    ReportedPhyRate,
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UtilitySpec {
    #[serde(default)]
    pub form: UtilityForm,
    #[serde(default)]
    pub coefficient: CoefficientSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePolicy {
    pub name: String,
    /// Total airtime budget over all substrates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota_bts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota_ap: Option<f64>,
    #[serde(default)]
    pub utility: UtilitySpec,
}

impl SlicePolicy {
    pub fn quota(&self) -> SliceQuota {
        SliceQuota {
            total: self.bid,
            scheduled: self.quota_bts,
            contention: self.quota_ap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumReservation {
    /// Substrate `index`.
    pub substrate: usize,
    /// Position in `slices`.
    pub slice: usize,
    pub airtime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceWeight {
    pub substrate: usize,
    pub weight: f64,
}

fn default_period() -> u64 {
    1
}

fn default_refresh() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub version: u64,
    pub substrates: Vec<SubstrateId>,
    pub slices: Vec<SlicePolicy>,
    #[serde(default)]
    pub minima: Vec<MinimumReservation>,
    #[serde(default)]
    pub pricing_mode: PricingMode,
    /// Substrates without an entry weigh 1.
    #[serde(default)]
    pub price_weights: Vec<PriceWeight>,
    /// Cycles between re-solves.
    #[serde(default = "default_period")]
    pub control_period: u64,
    /// Cycles between policy fetches.
    #[serde(default = "default_refresh")]
    pub policy_refresh_period: u64,
}

impl PolicyDocument {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Canonical serialization; GET responses and the store use these bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("policy serializes");
        out.push(b'\n');
        out
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn substrate_position(&self, index: usize) -> Option<usize> {
        self.substrates.iter().position(|s| s.index == index)
    }

    /// `[substrate][slice]` minimum reservations in policy order.
    pub fn minima_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_slices()]; self.substrates.len()];
        for r in &self.minima {
            if let (Some(k), true) = (self.substrate_position(r.substrate), r.slice < self.n_slices())
            {
                m[k][r.slice] = r.airtime;
            }
        }
        m
    }

    /// Effective price weight per substrate, in policy order.
    pub fn effective_weights(&self) -> Vec<f64> {
        match self.pricing_mode {
            PricingMode::RateMaximization => vec![1.0; self.substrates.len()],
            PricingMode::WeightedRevenue => self
                .substrates
                .iter()
                .map(|s| {
                    self.price_weights
                        .iter()
                        .find(|w| w.substrate == s.index)
                        .map_or(1.0, |w| w.weight)
                })
                .collect(),
        }
    }

    /// The LP for one control cycle. `phy_rates` is `[substrate][slice]` in
    /// policy order and feeds slices whose utility coefficient is the
    /// reported PHY rate.
    pub fn build_problem(&self, phy_rates: &[Vec<f64>]) -> Result<AllocationProblem, OptimizerError> {
        let utility = phy_rates
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.slices)
                    .map(|(rate, slice)| match slice.utility.coefficient {
                        CoefficientSource::ReportedPhyRate => *rate,
                        CoefficientSource::Fixed { value } => value,
                    })
                    .collect()
            })
            .collect();
        AllocationProblem::new(
            self.substrates.clone(),
            self.slices.iter().map(SlicePolicy::quota).collect(),
            self.minima_matrix(),
            utility,
            self.effective_weights(),
        )
    }

    /// Every violated field; empty means the document is acceptable.
    pub fn violations(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        if self.version == 0 {
            errs.push(FieldError::new("version", "must be >= 1"));
        }
        if self.substrates.is_empty() {
            errs.push(FieldError::new("substrates", "at least one substrate required"));
        }
        let mut seen = BTreeSet::new();
        for s in &self.substrates {
            if !seen.insert(s.index) {
                errs.push(FieldError::new(
                    "substrates",
                    format!("duplicate substrate index {}", s.index),
                ));
            }
        }
        if self.slices.is_empty() {
            errs.push(FieldError::new("slices", "at least one slice required"));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        for (j, s) in self.slices.iter().enumerate() {
            for (name, v) in [("bid", s.bid), ("quota_bts", s.quota_bts), ("quota_ap", s.quota_ap)] {
                if let Some(v) = v {
                    if !nonneg(v) {
                        errs.push(FieldError::new(
                            format!("slices[{j}].{name}"),
                            format!("must be finite and >= 0, got {v}"),
                        ));
                    }
                }
            }
            if let CoefficientSource::Fixed { value } = s.utility.coefficient {
                if !nonneg(value) {
                    errs.push(FieldError::new(
                        format!("slices[{j}].utility.coefficient"),
                        format!("must be finite and >= 0, got {value}"),
                    ));
                }
            }
        }
        let mut seen_min = BTreeSet::new();
        for (i, m) in self.minima.iter().enumerate() {
            if self.substrate_position(m.substrate).is_none() {
                errs.push(FieldError::new(
                    format!("minima[{i}].substrate"),
                    format!("unknown substrate {}", m.substrate),
                ));
            }
            if m.slice >= self.n_slices() {
                errs.push(FieldError::new(
                    format!("minima[{i}].slice"),
                    format!("unknown slice {}", m.slice),
                ));
            }
            if !(m.airtime.is_finite() && (0.0..=1.0).contains(&m.airtime)) {
                errs.push(FieldError::new(
                    format!("minima[{i}].airtime"),
                    format!("must lie in [0, 1], got {}", m.airtime),
                ));
            }
            if !seen_min.insert((m.substrate, m.slice)) {
                errs.push(FieldError::new(
                    format!("minima[{i}]"),
                    "duplicate reservation for substrate and slice",
                ));
            }
        }
        for (i, w) in self.price_weights.iter().enumerate() {
            if self.substrate_position(w.substrate).is_none() {
                errs.push(FieldError::new(
                    format!("price_weights[{i}].substrate"),
                    format!("unknown substrate {}", w.substrate),
                ));
            }
            if !nonneg(w.weight) {
                errs.push(FieldError::new(
                    "price_weight",
                    format!("substrate {}: must be finite and >= 0, got {}", w.substrate, w.weight),
                ));
            }
        }
        if self.control_period == 0 {
            errs.push(FieldError::new("control_period", "must be >= 1"));
        }
        if self.policy_refresh_period == 0 {
            errs.push(FieldError::new("policy_refresh_period", "must be >= 1"));
        }
        let total_bids: f64 = self.slices.iter().filter_map(|s| s.bid).sum();
        if total_bids > self.substrates.len() as f64 + 1e-9 {
            errs.push(FieldError::new(
                "slices.bid",
                format!(
                    "bids total {total_bids} exceeds the {} units of airtime across all substrates",
                    self.substrates.len()
                ),
            ));
        }
        if !errs.is_empty() {
            return errs;
        }

        // Structure is sound; check the polytope itself is nonempty.
        let zeros = vec![vec![0.0; self.n_slices()]; self.substrates.len()];
        match self.build_problem(&zeros) {
            Ok(problem) => {
                for v in problem.check_feasibility().violations {
                    let field = match v.constraint {
                        ConstraintKind::SubstrateAirtime { .. } => "minima".to_string(),
                        ConstraintKind::SliceBudget { slice } => format!("slices[{}].bid", slice.0),
                        ConstraintKind::SliceKindQuota { slice, kind } => {
                            format!("slices[{}].quota_{kind}", slice.0)
                        }
                        ConstraintKind::Minimum { .. } => "minima".to_string(),
                    };
                    errs.push(FieldError::new(field, v.to_string()));
                }
            }
            Err(e) => errs.push(FieldError::new("policy", e.to_string())),
        }
        errs
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(PolicyError::Invalid(errs))
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn bts_ap_policy() -> PolicyDocument {
        PolicyDocument {
            version: 1,
            substrates: vec![SubstrateId::bts(0), SubstrateId::ap(1)],
            slices: vec![
                SlicePolicy {
                    name: "SLC1".into(),
                    bid: Some(1.4),
                    quota_bts: None,
                    quota_ap: None,
                    utility: UtilitySpec::default(),
                },
                SlicePolicy {
                    name: "SLC2".into(),
                    bid: Some(0.6),
                    quota_bts: None,
                    quota_ap: None,
                    utility: UtilitySpec::default(),
                },
            ],
            minima: vec![],
            pricing_mode: PricingMode::RateMaximization,
            price_weights: vec![],
            control_period: 1,
            policy_refresh_period: 100,
        }
    }

    #[test]
    fn bts_ap_policy_is_valid() {
        assert_eq!(bts_ap_policy().violations(), vec![]);
    }

    #[test]
    fn overfull_minima_name_the_substrate() {
        let mut p = bts_ap_policy();
        p.minima = vec![
            MinimumReservation { substrate: 1, slice: 0, airtime: 0.7 },
            MinimumReservation { substrate: 1, slice: 1, airtime: 0.5 },
        ];
        let errs = p.violations();
        assert!(errs.iter().any(|e| e.field == "minima" && e.message.contains("ap1")), "{errs:?}");
    }

    #[test]
    fn negative_price_weight_flagged() {
        let mut p = bts_ap_policy();
        p.pricing_mode = PricingMode::WeightedRevenue;
        p.price_weights = vec![PriceWeight { substrate: 0, weight: -1.0 }];
        assert!(matches!(p.validate(), Err(PolicyError::Invalid(e)) if e[0].field == "price_weight"));
    }

    #[test]
    fn bids_over_total_airtime_flagged() {
        let mut p = bts_ap_policy();
        p.slices[0].bid = Some(1.8);
        assert!(p.violations().iter().any(|e| e.field == "slices.bid"));
    }

    #[test]
    fn weighted_mode_drives_objective() {
        let json = r#"{
            "version": 3,
            "substrates": [{"index":0,"kind":"scheduled-basestation"},{"index":1,"kind":"contention-access-point"}],
            "slices": [{"name":"SLC1","bid":1.4},{"name":"SLC2","bid":0.6}],
            "pricing_mode": "weighted-revenue",
            "price_weights": [{"substrate":0,"weight":2.0},{"substrate":1,"weight":1.0}]
        }"#;
        let p = PolicyDocument::from_json(json).unwrap();
        p.validate().unwrap();
        assert_eq!(p.control_period, 1);
        assert_eq!(p.policy_refresh_period, 100);
        let prob = p.build_problem(&[vec![10.0, 5.0], vec![20.0, 8.0]]).unwrap();
        assert_eq!(prob.price_weights(), &[2.0, 1.0]);
        assert_eq!(prob.weighted_coeff(0, 0), 20.0);
    }

    #[test]
    fn fixed_coefficient_overrides_reports() {
        let mut p = bts_ap_policy();
        p.slices[1].utility.coefficient = CoefficientSource::Fixed { value: 7.5 };
        let prob = p.build_problem(&[vec![10.0, 5.0], vec![20.0, 8.0]]).unwrap();
        assert_eq!(prob.utility()[0], vec![10.0, 7.5]);
        assert_eq!(prob.utility()[1], vec![20.0, 7.5]);
    }

    #[test]
    fn json_bytes_are_stable() {
        let p = bts_ap_policy();
        let a = p.to_json_bytes();
        let back = PolicyDocument::from_json(std::str::from_utf8(&a).unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json_bytes(), a);
    }

    mod roundtrip {
        use super::super::*;
        use proptest::prelude::*;

        fn opt_f64() -> impl Strategy<Value = Option<f64>> {
            prop::option::of(0.0f64..3.0)
        }

        fn slice() -> impl Strategy<Value = SlicePolicy> {
            ("[A-Za-z0-9 _-]{1,12}", opt_f64(), opt_f64(), opt_f64(), prop::option::of(0.0f64..100.0))
                .prop_map(|(name, bid, quota_bts, quota_ap, fixed)| SlicePolicy {
                    name,
                    bid,
                    quota_bts,
                    quota_ap,
                    utility: UtilitySpec {
                        form: UtilityForm::LinearConstant,
                        coefficient: fixed
                            .map_or(CoefficientSource::ReportedPhyRate, |value| CoefficientSource::Fixed { value }),
                    },
                })
        }

        fn document() -> impl Strategy<Value = PolicyDocument> {
            (
                1u64..1_000,
                prop::collection::vec(any::<bool>(), 1..4),
                prop::collection::vec(slice(), 1..4),
                prop::collection::vec((0usize..4, 0usize..4, 0.0f64..0.5), 0..4),
                any::<bool>(),
                prop::collection::vec((0usize..4, 0.0f64..5.0), 0..3),
                1u64..10,
                1u64..500,
            )
                .prop_map(|(version, kinds, slices, minima, weighted, weights, period, refresh)| {
                    PolicyDocument {
                        version,
                        substrates: kinds
                            .iter()
                            .enumerate()
                            .map(|(i, bts)| if *bts { SubstrateId::bts(i) } else { SubstrateId::ap(i) })
                            .collect(),
                        slices,
                        minima: minima
                            .into_iter()
                            .map(|(substrate, slice, airtime)| MinimumReservation { substrate, slice, airtime })
                            .collect(),
                        pricing_mode: if weighted {
                            PricingMode::WeightedRevenue
                        } else {
                            PricingMode::RateMaximization
                        },
                        price_weights: weights
                            .into_iter()
                            .map(|(substrate, weight)| PriceWeight { substrate, weight })
                            .collect(),
                        control_period: period,
                        policy_refresh_period: refresh,
                    }
                })
        }

        proptest! {
            #[test]
            fn serialize_then_parse_is_identity(doc in document()) {
                let bytes = doc.to_json_bytes();
                let back: PolicyDocument = serde_json::from_slice(&bytes).unwrap();
                prop_assert_eq!(&back, &doc);
                prop_assert_eq!(back.to_json_bytes(), bytes);
            }
        }
    }
}
