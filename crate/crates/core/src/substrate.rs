//! Simulated virtualized radios.
//!
//! A basestation and an access point are both reduced to an airtime budget
//! per slice: every slice is backlogged, uses exactly the quota it was
//! given, and carries `quota × average PHY rate`. Link quality varies each
//! cycle according to a pluggable [`LoadModel`].

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airtime::AirtimeFraction;
use crate::optimizer::{equal_split, AllocationMatrix, OptimizerError, SubstrateId};
use crate::policy::PolicyDocument;
use crate::registry::{params, Registry, RegistryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("quota sums to {0}, exceeding full airtime")]
    QuotaOverflow(f64),
    #[error("quota has {got} entries, substrate serves {expected} slices")]
    QuotaLength { got: usize, expected: usize },
    #[error("static allocation infeasible: {0}")]
    InfeasibleStatic(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// Draws a slice's average PHY rate for the next cycle.
pub trait LoadModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// Result must lie in `(0, peak]`.
    fn draw_phy_rate(&self, peak: f64, rng: &mut dyn RngCore) -> f64;
}

/// I.i.d. uniform on `[low_fraction × peak, high_fraction × peak]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformLoad {
    #[serde(default = "UniformLoad::default_low")]
    pub low_fraction: f64,
    #[serde(default = "UniformLoad::default_high")]
    pub high_fraction: f64,
}

impl UniformLoad {
    fn default_low() -> f64 {
        0.1
    }
    fn default_high() -> f64 {
        1.0
    }
}

impl Default for UniformLoad {
    fn default() -> Self {
        UniformLoad {
            low_fraction: 0.1,
            high_fraction: 1.0,
        }
    }
}

impl LoadModel for UniformLoad {
    fn name(&self) -> &str {
        "uniform"
    }

    fn draw_phy_rate(&self, peak: f64, rng: &mut dyn RngCore) -> f64 {
        let lo = self.low_fraction * peak;
        let hi = self.high_fraction * peak;
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            hi
        }
    }
}

/// Fixed PHY rate, capped at the substrate peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantLoad {
    pub rate_mbps: f64,
}

impl LoadModel for ConstantLoad {
    fn name(&self) -> &str {
        "constant"
    }

    fn draw_phy_rate(&self, peak: f64, _rng: &mut dyn RngCore) -> f64 {
        self.rate_mbps.min(peak)
    }
}

#[derive(Clone)]
pub struct LoadModelRegistry(Registry<dyn LoadModel>);

impl Default for LoadModelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl LoadModelRegistry {
    pub fn with_builtins() -> Self {
        let mut reg = Registry::new("load model");
        reg.register("uniform", |v| {
            let m: UniformLoad = params(v)?;
            if !(m.low_fraction > 0.0 && m.low_fraction <= m.high_fraction && m.high_fraction <= 1.0)
            {
                return Err("need 0 < low_fraction <= high_fraction <= 1".into());
            }
            Ok(Arc::new(m) as Arc<dyn LoadModel>)
        });
        reg.register("constant", |v| {
            let m: ConstantLoad = params(v)?;
            if !(m.rate_mbps > 0.0 && m.rate_mbps.is_finite()) {
                return Err("rate_mbps must be > 0".into());
            }
            Ok(Arc::new(m) as Arc<dyn LoadModel>)
        });
        LoadModelRegistry(reg)
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&serde_json::Value) -> Result<Arc<dyn LoadModel>, String> + Send + Sync + 'static,
    {
        self.0.register(name, factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.names().collect()
    }

    pub fn build(&self, spec: &NamedSpec) -> Result<Arc<dyn LoadModel>, RegistryError> {
        self.0.build(&spec.name, &spec.params)
    }
}

/// A registry entry name plus its parameter object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

impl NamedSpec {
    pub fn new(name: &str) -> Self {
        NamedSpec {
            name: name.to_string(),
            params: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstrateConfig {
    #[serde(flatten)]
    pub id: SubstrateId,
    pub peak_phy_rate_mbps: f64,
}

fn default_strategy() -> NamedSpec {
    NamedSpec::new("simplex")
}

fn default_load_model() -> NamedSpec {
    NamedSpec::new("uniform")
}

/// Simulation side of an experiment. Bids, minima and pricing come from the
/// [`PolicyDocument`] the controller runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_cycles: u64,
    pub seed: u64,
    pub n_slices: usize,
    pub substrates: Vec<SubstrateConfig>,
    #[serde(default = "default_load_model")]
    pub load_model: NamedSpec,
    #[serde(default = "default_strategy")]
    pub strategy: NamedSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn n_aps(&self) -> usize {
        self.substrates
            .iter()
            .filter(|s| s.id.kind == crate::optimizer::SubstrateKind::ContentionAccessPoint)
            .count()
    }

    pub fn n_btss(&self) -> usize {
        self.substrates.len() - self.n_aps()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.substrates.is_empty() || self.n_slices == 0 {
            return Err(SimError::InvalidConfig(
                "need at least one substrate and one slice".into(),
            ));
        }
        for (i, s) in self.substrates.iter().enumerate() {
            if !(s.peak_phy_rate_mbps > 0.0 && s.peak_phy_rate_mbps.is_finite()) {
                return Err(SimError::InvalidConfig(format!(
                    "substrate {} peak rate must be > 0",
                    s.id
                )));
            }
            if self.substrates[..i].iter().any(|o| o.id.index == s.id.index) {
                return Err(SimError::InvalidConfig(format!(
                    "duplicate substrate index {}",
                    s.id.index
                )));
            }
        }
        Ok(())
    }

    /// The policy must manage exactly the simulated substrates, in order.
    pub fn check_policy(&self, policy: &PolicyDocument) -> Result<(), SimError> {
        let ids: Vec<SubstrateId> = self.substrates.iter().map(|s| s.id).collect();
        if ids != policy.substrates {
            return Err(SimError::InvalidConfig(
                "policy substrates differ from config substrates".into(),
            ));
        }
        if policy.n_slices() != self.n_slices {
            return Err(SimError::InvalidConfig(format!(
                "policy defines {} slices, config simulates {}",
                policy.n_slices(),
                self.n_slices
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceLoad {
    /// Mbps; becomes the utility coefficient C^k_j.
    pub avg_phy_rate: f64,
    pub achieved_rate: f64,
    pub used_airtime: AirtimeFraction,
    pub usage_flag: bool,
    pub requested_airtime: AirtimeFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub substrate: SubstrateId,
    pub cycle: u64,
    pub slices: Vec<SliceLoad>,
}

pub struct SubstrateState {
    id: SubstrateId,
    peak_phy_rate: f64,
    current_quota: Vec<AirtimeFraction>,
    per_slice_phy_rate: Vec<f64>,
    previous_achieved: Vec<f64>,
    load_model: Arc<dyn LoadModel>,
    rng: ChaCha8Rng,
}

impl fmt::Debug for SubstrateState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubstrateState")
            .field("id", &self.id)
            .field("peak_phy_rate", &self.peak_phy_rate)
            .field("current_quota", &self.current_quota)
            .field("per_slice_phy_rate", &self.per_slice_phy_rate)
            .field("load_model", &self.load_model)
            .finish()
    }
}

impl SubstrateState {
    /// Each substrate draws from its own ChaCha stream of the experiment seed,
    /// so substrates are independent and replay is exact.
    pub fn new(
        config: &SubstrateConfig,
        n_slices: usize,
        seed: u64,
        load_model: Arc<dyn LoadModel>,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(config.id.index as u64);
        SubstrateState {
            id: config.id,
            peak_phy_rate: config.peak_phy_rate_mbps,
            current_quota: vec![AirtimeFraction::ZERO; n_slices],
            per_slice_phy_rate: vec![config.peak_phy_rate_mbps; n_slices],
            previous_achieved: vec![0.0; n_slices],
            load_model,
            rng,
        }
    }

    pub fn id(&self) -> SubstrateId {
        self.id
    }

    pub fn peak_phy_rate(&self) -> f64 {
        self.peak_phy_rate
    }

    pub fn current_quota(&self) -> &[AirtimeFraction] {
        &self.current_quota
    }

    pub fn phy_rates(&self) -> &[f64] {
        &self.per_slice_phy_rate
    }

    /// Advance link conditions by one cycle.
    pub fn step_load(&mut self) {
        for j in 0..self.per_slice_phy_rate.len() {
            self.previous_achieved[j] = self.current_quota[j].value() * self.per_slice_phy_rate[j];
            let drawn = self
                .load_model
                .draw_phy_rate(self.peak_phy_rate, &mut self.rng);
            self.per_slice_phy_rate[j] = drawn.clamp(f64::MIN_POSITIVE, self.peak_phy_rate);
        }
    }

    pub fn apply_quota(&mut self, quota: &[AirtimeFraction]) -> Result<(), SimError> {
        if quota.len() != self.current_quota.len() {
            return Err(SimError::QuotaLength {
                got: quota.len(),
                expected: self.current_quota.len(),
            });
        }
        let sum: f64 = quota.iter().map(|q| q.value()).sum();
        if sum > 1.0 + 1e-9 {
            return Err(SimError::QuotaOverflow(sum));
        }
        self.current_quota.copy_from_slice(quota);
        Ok(())
    }

    /// Saturated demand: each slice uses its full quota. Requested airtime
    /// is what the previous cycle's throughput would need at today's rate.
    pub fn report(&self, cycle: u64) -> LoadReport {
        let slices = self
            .current_quota
            .iter()
            .zip(&self.per_slice_phy_rate)
            .zip(&self.previous_achieved)
            .map(|((quota, phy), prev)| {
                let achieved_rate = quota.value() * phy;
                SliceLoad {
                    avg_phy_rate: *phy,
                    achieved_rate,
                    used_airtime: *quota,
                    usage_flag: achieved_rate > 0.0,
                    requested_airtime: AirtimeFraction::saturating(prev / phy),
                }
            })
            .collect();
        LoadReport {
            substrate: self.id,
            cycle,
            slices,
        }
    }
}

/// Equal split of each slice's bid across all configured substrates.
pub fn static_allocation(
    config: &ExperimentConfig,
    policy: &PolicyDocument,
) -> Result<AllocationMatrix, SimError> {
    config.check_policy(policy)?;
    let zeros = vec![vec![0.0; config.n_slices]; config.substrates.len()];
    let problem = policy
        .build_problem(&zeros)
        .map_err(|e| SimError::InfeasibleStatic(e.to_string()))?;
    equal_split(&problem).map_err(|e| match e {
        OptimizerError::InfeasibleStatic(m) => SimError::InfeasibleStatic(m),
        other => SimError::InfeasibleStatic(other.to_string()),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::policy::tests::bts_ap_policy;

    fn frac(v: &[f64]) -> Vec<AirtimeFraction> {
        v.iter().map(|x| AirtimeFraction::new(*x).unwrap()).collect()
    }

    fn ap(seed: u64, model: Arc<dyn LoadModel>) -> SubstrateState {
        SubstrateState::new(
            &SubstrateConfig {
                id: SubstrateId::ap(1),
                peak_phy_rate_mbps: 36.0,
            },
            2,
            seed,
            model,
        )
    }

    pub(crate) fn bts_ap_config() -> ExperimentConfig {
        ExperimentConfig {
            n_cycles: 1000,
            seed: 1,
            n_slices: 2,
            substrates: vec![
                SubstrateConfig {
                    id: SubstrateId::bts(0),
                    peak_phy_rate_mbps: 20.0,
                },
                SubstrateConfig {
                    id: SubstrateId::ap(1),
                    peak_phy_rate_mbps: 36.0,
                },
            ],
            load_model: NamedSpec::new("uniform"),
            strategy: NamedSpec::new("simplex"),
        }
    }

    #[test]
    fn uniform_draws_stay_in_range() {
        let mut s = ap(7, Arc::new(UniformLoad::default()));
        for _ in 0..10_000 {
            s.step_load();
            for r in s.phy_rates() {
                assert!((3.6..=36.0).contains(r), "{r}");
            }
        }
    }

    #[test]
    fn constant_model_is_constant() {
        let mut s = ap(7, Arc::new(ConstantLoad { rate_mbps: 20.0 }));
        for _ in 0..50 {
            s.step_load();
            assert_eq!(s.phy_rates(), &[20.0, 20.0]);
        }
    }

    #[test]
    fn same_seed_same_rates() {
        let model: Arc<dyn LoadModel> = Arc::new(UniformLoad::default());
        let (mut a, mut b) = (ap(42, model.clone()), ap(42, model.clone()));
        let mut c = ap(43, model);
        let mut differs = false;
        for _ in 0..100 {
            a.step_load();
            b.step_load();
            c.step_load();
            assert_eq!(a.phy_rates(), b.phy_rates());
            differs |= a.phy_rates() != c.phy_rates();
        }
        assert!(differs);
    }

    #[test]
    fn quota_examples() {
        let mut s = ap(1, Arc::new(ConstantLoad { rate_mbps: 36.0 }));
        s.apply_quota(&frac(&[0.7, 0.3])).unwrap();
        assert_eq!(s.current_quota(), frac(&[0.7, 0.3]).as_slice());
        assert!(matches!(
            s.apply_quota(&frac(&[0.6, 0.6])),
            Err(SimError::QuotaOverflow(_))
        ));
        assert_eq!(s.current_quota(), frac(&[0.7, 0.3]).as_slice());
        s.apply_quota(&frac(&[0.0, 0.0])).unwrap();
        s.step_load();
        let r = s.report(0);
        assert!(r.slices.iter().all(|l| l.achieved_rate == 0.0 && !l.usage_flag));
        assert!(s.apply_quota(&frac(&[0.5])).is_err());
    }

    #[test]
    fn report_examples() {
        let cfg = |peak| SubstrateConfig {
            id: SubstrateId::bts(0),
            peak_phy_rate_mbps: peak,
        };
        let mut s = SubstrateState::new(&cfg(36.0), 2, 0, Arc::new(ConstantLoad { rate_mbps: 36.0 }));
        s.apply_quota(&frac(&[0.5, 0.5])).unwrap();
        s.step_load();
        let r = s.report(3);
        assert_eq!(r.cycle, 3);
        assert_eq!(r.slices[0].achieved_rate, 18.0);
        assert_eq!(r.slices[1].achieved_rate, 18.0);

        s.per_slice_phy_rate = vec![20.0, 10.0];
        s.apply_quota(&frac(&[1.0, 0.0])).unwrap();
        let r = s.report(4);
        assert_eq!((r.slices[0].achieved_rate, r.slices[1].achieved_rate), (20.0, 0.0));
        assert!(r.slices[0].usage_flag && !r.slices[1].usage_flag);

        s.per_slice_phy_rate = vec![36.0, 18.0];
        s.apply_quota(&frac(&[0.7, 0.3])).unwrap();
        let r = s.report(5);
        assert!((r.slices[0].achieved_rate - 25.2).abs() < 1e-12);
        assert!((r.slices[1].achieved_rate - 5.4).abs() < 1e-12);
    }

    #[test]
    fn requested_airtime_tracks_previous_throughput() {
        let cfg = SubstrateConfig {
            id: SubstrateId::bts(0),
            peak_phy_rate_mbps: 20.0,
        };
        let mut s = SubstrateState::new(&cfg, 1, 0, Arc::new(ConstantLoad { rate_mbps: 10.0 }));
        s.apply_quota(&frac(&[0.5])).unwrap();
        // Previous rate was the peak (20): 0.5 × 20 = 10 Mbps needs all of a 10 Mbps link.
        s.step_load();
        assert_eq!(s.report(0).slices[0].requested_airtime.value(), 1.0);
        s.step_load();
        assert_eq!(s.report(1).slices[0].requested_airtime.value(), 0.5);
    }

    #[test]
    fn static_split_examples() {
        let cfg = bts_ap_config();
        let t = static_allocation(&cfg, &bts_ap_policy()).unwrap();
        assert!((t.get(0, 0) - 0.7).abs() < 1e-15 && (t.get(1, 1) - 0.3).abs() < 1e-15);

        let mut p = bts_ap_policy();
        p.slices[0].bid = Some(1.0);
        p.slices[1].bid = Some(1.0);
        assert_eq!(static_allocation(&cfg, &p).unwrap().flatten(), vec![0.5; 4]);

        p.slices[0].bid = Some(2.0);
        p.slices[1].bid = Some(0.6);
        assert!(matches!(
            static_allocation(&cfg, &p),
            Err(SimError::InfeasibleStatic(_))
        ));
    }

    #[test]
    fn registry_builds_models() {
        let reg = LoadModelRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["constant", "uniform"]);
        let m = reg.build(&NamedSpec::new("uniform")).unwrap();
        assert_eq!(m.name(), "uniform");
        let bad = NamedSpec {
            name: "uniform".into(),
            params: serde_json::json!({"low_fraction": 0.0}),
        };
        assert!(reg.build(&bad).is_err());
        let c = NamedSpec {
            name: "constant".into(),
            params: serde_json::json!({"rate_mbps": 20.0}),
        };
        assert_eq!(reg.build(&c).unwrap().name(), "constant");
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = bts_ap_config();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert_eq!((cfg.n_aps(), cfg.n_btss()), (1, 1));
    }
}
