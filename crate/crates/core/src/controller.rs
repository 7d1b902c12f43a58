//! The HWV control loop: poll substrate load reports, build the allocation
//! LP from the cached policy, solve it, push the new quotas, and account
//! revenue against the static baseline under the same cycle's coefficients.
//!
//! Two timescales run here. The control period (default one cycle) governs
//! re-solving; the much coarser policy refresh period governs re-fetching
//! the operator policy from its source.

use std::sync::Arc;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::MetricsSeries;
use crate::nwpd::FetchError;
use crate::optimizer::{
    equal_split, revenue_of, AllocationMatrix, AllocationStrategy, OptimizerError, SolveStatus,
    StrategyRegistry, SubstrateId,
};
use crate::policy::{PolicyDocument, PolicyError};
use crate::substrate::{
    static_allocation, ExperimentConfig, LoadModelRegistry, LoadReport, SimError, SubstrateState,
};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("report for cycle {got} received while expecting cycle {expected}")]
    ReportCycleMismatch { expected: u64, got: u64 },
    #[error("no load report from substrate {0}")]
    MissingSubstrateReport(SubstrateId),
    #[error("report from unmanaged or duplicated substrate {0}")]
    UnexpectedReport(SubstrateId),
    #[error("report from {substrate} has {got} slices, policy defines {expected}")]
    SliceCountMismatch {
        substrate: SubstrateId,
        got: usize,
        expected: usize,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
}

/// Where the controller obtains operator policy.
pub trait PolicySource: Send + Sync {
    fn describe(&self) -> String;
    fn fetch(&self) -> Result<PolicyDocument, FetchError>;
}

/// A policy held in memory, e.g. loaded from a file.
pub struct FixedPolicy(pub PolicyDocument);

impl PolicySource for FixedPolicy {
    fn describe(&self) -> String {
        format!("inline policy v{}", self.0.version)
    }

    fn fetch(&self) -> Result<PolicyDocument, FetchError> {
        self.0
            .validate()
            .map_err(|e| FetchError::MalformedPolicy(e.to_string()))?;
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleStatus {
    Optimal,
    /// Solver found no feasible point; previous allocation kept.
    Infeasible,
    /// Not a control-period boundary; previous allocation kept.
    Held,
}

impl CycleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleStatus::Optimal => "optimal",
            CycleStatus::Infeasible => "infeasible",
            CycleStatus::Held => "held",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(CycleStatus::Optimal),
            "infeasible" => Some(CycleStatus::Infeasible),
            "held" => Some(CycleStatus::Held),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: u64,
    pub policy_version: u64,
    pub status: CycleStatus,
    pub dynamic_revenue: f64,
    pub static_revenue: f64,
    /// `[substrate][slice]` utility coefficients C^k_j used this cycle.
    pub coefficients: Vec<Vec<f64>>,
    pub allocation: AllocationMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    policy: PolicyDocument,
    static_allocation: AllocationMatrix,
    last_allocation: AllocationMatrix,
    cycle: u64,
    /// Set after a policy change so the next cycle re-solves regardless of
    /// the control period.
    resolve_pending: bool,
}

impl ControllerState {
    /// Starts from the static split, which is also the comparison baseline.
    pub fn new(policy: PolicyDocument) -> Result<Self, ControllerError> {
        policy.validate()?;
        let zeros = vec![vec![0.0; policy.n_slices()]; policy.substrates.len()];
        let static_allocation = equal_split(&policy.build_problem(&zeros)?)?;
        Ok(ControllerState {
            last_allocation: static_allocation.clone(),
            static_allocation,
            policy,
            cycle: 0,
            resolve_pending: true,
        })
    }

    pub fn policy(&self) -> &PolicyDocument {
        &self.policy
    }

    pub fn last_allocation(&self) -> &AllocationMatrix {
        &self.last_allocation
    }

    pub fn static_allocation(&self) -> &AllocationMatrix {
        &self.static_allocation
    }

    /// Next cycle number the controller expects reports for.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Adopt a newer policy at a refresh boundary. Same-version documents
    /// are ignored.
    pub fn install_policy(&mut self, policy: PolicyDocument) -> Result<bool, ControllerError> {
        if policy.version == self.policy.version && policy == self.policy {
            return Ok(false);
        }
        policy.validate()?;
        let zeros = vec![vec![0.0; policy.n_slices()]; policy.substrates.len()];
        self.static_allocation = equal_split(&policy.build_problem(&zeros)?)?;
        self.policy = policy;
        self.resolve_pending = true;
        Ok(true)
    }

    /// Orders reports by the policy's substrate list and extracts C^k_j.
    fn coefficient_matrix(&self, reports: &[LoadReport]) -> Result<Vec<Vec<f64>>, ControllerError> {
        let expected = self.cycle;
        for r in reports {
            if r.cycle != expected {
                return Err(ControllerError::ReportCycleMismatch {
                    expected,
                    got: r.cycle,
                });
            }
            if reports.iter().filter(|o| o.substrate == r.substrate).count() > 1
                || !self.policy.substrates.contains(&r.substrate)
            {
                return Err(ControllerError::UnexpectedReport(r.substrate));
            }
        }
        self.policy
            .substrates
            .iter()
            .map(|sub| {
                let report = reports
                    .iter()
                    .find(|r| r.substrate == *sub)
                    .ok_or(ControllerError::MissingSubstrateReport(*sub))?;
                if report.slices.len() != self.policy.n_slices() {
                    return Err(ControllerError::SliceCountMismatch {
                        substrate: *sub,
                        got: report.slices.len(),
                        expected: self.policy.n_slices(),
                    });
                }
                Ok(report.slices.iter().map(|s| s.avg_phy_rate).collect())
            })
            .collect()
    }

    /// One poll → solve → record step. Returns the successor state and the
    /// cycle record; `self` is left untouched.
    pub fn control_cycle(
        &self,
        strategy: &dyn AllocationStrategy,
        reports: &[LoadReport],
    ) -> Result<(ControllerState, CycleRecord), ControllerError> {
        let coefficients = self.coefficient_matrix(reports)?;
        let problem = self.policy.build_problem(&coefficients)?;

        let on_period = self.cycle.is_multiple_of(self.policy.control_period);
        let (status, allocation) = if on_period || self.resolve_pending {
            let report = strategy.allocate(&problem)?;
            match (report.status, report.allocation) {
                (SolveStatus::Optimal, Some(allocation)) => {
                    // When the static split is itself optimal the two revenues can
                    // differ in the last bit; never push the lower of the two.
                    let baseline = &self.static_allocation;
                    let keep_static = baseline.is_feasible_for(&problem)
                        && revenue_of(baseline, &problem)? > revenue_of(&allocation, &problem)?;
                    let chosen = if keep_static { baseline.clone() } else { allocation };
                    (CycleStatus::Optimal, chosen)
                }
                _ => {
                    warn!(
                        "cycle {}: allocation infeasible under policy v{}, keeping previous quotas",
                        self.cycle, self.policy.version
                    );
                    (CycleStatus::Infeasible, self.last_allocation.clone())
                }
            }
        } else {
            (CycleStatus::Held, self.last_allocation.clone())
        };

        let dynamic_revenue = revenue_of(&allocation, &problem)?;
        let static_revenue = revenue_of(&self.static_allocation, &problem)?;
        debug!(
            "cycle {}: {} dynamic={dynamic_revenue:.4} static={static_revenue:.4}",
            self.cycle,
            status.as_str()
        );

        let record = CycleRecord {
            cycle: self.cycle,
            policy_version: self.policy.version,
            status,
            dynamic_revenue,
            static_revenue,
            coefficients,
            allocation: allocation.clone(),
        };
        let next = ControllerState {
            policy: self.policy.clone(),
            static_allocation: self.static_allocation.clone(),
            last_allocation: allocation,
            cycle: self.cycle + 1,
            resolve_pending: self.resolve_pending && status != CycleStatus::Optimal,
        };
        Ok((next, record))
    }
}

/// Registries consulted when building an experiment from config names.
#[derive(Clone, Default)]
pub struct Registries {
    pub strategies: StrategyRegistry,
    pub load_models: LoadModelRegistry,
}

/// Short digest identifying a config/policy pair.
pub fn config_digest(config: &ExperimentConfig, policy: &PolicyDocument) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(policy.to_json_bytes());
    hex::encode(&h.finalize()[..8])
}

pub fn run_experiment(
    config: &ExperimentConfig,
    policy: &PolicyDocument,
) -> Result<MetricsSeries, ControllerError> {
    run_experiment_with(config, &FixedPolicy(policy.clone()), &Registries::default())
}

/// Runs `config.n_cycles` iterations of step_load → report → control_cycle
/// → push, re-fetching policy every `policy_refresh_period` cycles. A failed
/// refresh keeps the cached policy.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    source: &dyn PolicySource,
    registries: &Registries,
) -> Result<MetricsSeries, ControllerError> {
    config.validate()?;
    let policy = source.fetch()?;
    config.check_policy(&policy)?;
    let digest = config_digest(config, &policy);
    let strategy: Arc<dyn AllocationStrategy> = registries
        .strategies
        .build(&config.strategy.name, &config.strategy.params)
        .map_err(SimError::from)?;
    let load_model = registries.load_models.build(&config.load_model).map_err(SimError::from)?;

    let baseline = static_allocation(config, &policy)?;
    let mut substrates: Vec<SubstrateState> = config
        .substrates
        .iter()
        .map(|s| SubstrateState::new(s, config.n_slices, config.seed, load_model.clone()))
        .collect();
    for (k, s) in substrates.iter_mut().enumerate() {
        s.apply_quota(baseline.substrate_row(k))?;
    }

    let mut state = ControllerState::new(policy)?;
    let mut records = Vec::with_capacity(config.n_cycles as usize);
    for cycle in 0..config.n_cycles {
        let refresh = state.policy().policy_refresh_period;
        if cycle > 0 && cycle % refresh == 0 {
            match source.fetch() {
                Ok(p) => {
                    config.check_policy(&p)?;
                    if state.install_policy(p)? {
                        debug!("cycle {cycle}: installed policy v{}", state.policy().version);
                    }
                }
                Err(e) => warn!("cycle {cycle}: policy refresh from {} failed: {e}", source.describe()),
            }
        }

        for s in substrates.iter_mut() {
            s.step_load();
        }
        let reports: Vec<LoadReport> = substrates.iter().map(|s| s.report(cycle)).collect();
        let (next, record) = state.control_cycle(strategy.as_ref(), &reports)?;
        for (k, s) in substrates.iter_mut().enumerate() {
            s.apply_quota(record.allocation.substrate_row(k))?;
        }
        state = next;
        records.push(record);
    }
    Ok(MetricsSeries {
        records,
        config_digest: digest,
    })
}
