//! Allocation strategies selectable by name.
//!
//! | name          | parameters            | behaviour                          |
//! |---------------|-----------------------|------------------------------------|
//! | `simplex`     | none                  | exact LP optimum                   |
//! | `grid-search` | `grid_step` (0.05)    | grid oracle, at most 6 variables   |
//! | `static`      | none                  | equal split of bids, never adapts  |

use std::sync::Arc;

use serde::Deserialize;

use super::{
    brute_force_solve, equal_split, revenue_of, solve, AllocationProblem, OptimizerError,
    SolveReport, SolveStatus,
};
use crate::registry::{params, Registry, RegistryError};

pub trait AllocationStrategy: Send + Sync {
    fn name(&self) -> &str;
    fn allocate(&self, problem: &AllocationProblem) -> Result<SolveReport, OptimizerError>;
}

pub struct SimplexStrategy;

impl AllocationStrategy for SimplexStrategy {
    fn name(&self) -> &str {
        "simplex"
    }

    fn allocate(&self, problem: &AllocationProblem) -> Result<SolveReport, OptimizerError> {
        Ok(solve(problem))
    }
}

pub struct GridSearchStrategy {
    pub grid_step: f64,
}

impl AllocationStrategy for GridSearchStrategy {
    fn name(&self) -> &str {
        "grid-search"
    }

    fn allocate(&self, problem: &AllocationProblem) -> Result<SolveReport, OptimizerError> {
        brute_force_solve(problem, self.grid_step)
    }
}

pub struct StaticStrategy;

impl AllocationStrategy for StaticStrategy {
    fn name(&self) -> &str {
        "static"
    }

    fn allocate(&self, problem: &AllocationProblem) -> Result<SolveReport, OptimizerError> {
        if !problem.check_feasibility().is_feasible() {
            return Ok(SolveReport::infeasible());
        }
        let allocation = equal_split(problem)?;
        let objective = revenue_of(&allocation, problem)?;
        Ok(SolveReport {
            status: SolveStatus::Optimal,
            allocation: Some(allocation),
            objective,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridParams {
    #[serde(default = "default_grid_step")]
    grid_step: f64,
}

fn default_grid_step() -> f64 {
    0.05
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Clone)]
pub struct StrategyRegistry(Registry<dyn AllocationStrategy>);

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry(Registry::new("allocation strategy"))
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("simplex", |v| {
            let _: NoParams = params(v)?;
            Ok(Arc::new(SimplexStrategy) as Arc<dyn AllocationStrategy>)
        });
        reg.register("grid-search", |v| {
            let p: GridParams = params(v)?;
            let cells = 1.0 / p.grid_step;
            if !(p.grid_step > 0.0 && p.grid_step <= 1.0) || (cells - cells.round()).abs() > 1e-9 {
                return Err(format!("grid_step {} must divide 1 evenly", p.grid_step));
            }
            Ok(Arc::new(GridSearchStrategy {
                grid_step: p.grid_step,
            }) as Arc<dyn AllocationStrategy>)
        });
        reg.register("static", |v| {
            let _: NoParams = params(v)?;
            Ok(Arc::new(StaticStrategy) as Arc<dyn AllocationStrategy>)
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&serde_json::Value) -> Result<Arc<dyn AllocationStrategy>, String>
            + Send
            + Sync
            + 'static,
    {
        self.0.register(name, factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.names().collect()
    }

    pub fn build(
        &self,
        name: &str,
        params: &serde_json::Value,
    ) -> Result<Arc<dyn AllocationStrategy>, RegistryError> {
        self.0.build(name, params)
    }
}
