//! Airtime re-provisioning optimizer.
//!
//! With constant per-cycle utility coefficients the revenue objective is
//! linear, so [`solve`] is an exact LP solve. [`brute_force_solve`] is an
//! independent grid search over the same polytope used to check it.
//! Under degenerate optima only the objective value is stable; which
//! optimal vertex is returned depends on the pivot rule.

mod baseline;
mod oracle;
mod problem;
mod simplex;
pub mod strategy;

use thiserror::Error;

pub use baseline::equal_split;
pub use oracle::{brute_force_solve, MAX_ORACLE_VARS};
pub use problem::{
    revenue_of, AllocationMatrix, AllocationProblem, ConstraintKind, Feasibility, SliceId,
    SliceQuota, SolveReport, SolveStatus, SubstrateId, SubstrateKind, Violation,
    CONSTRAINT_TOLERANCE,
};
pub use strategy::{AllocationStrategy, StrategyRegistry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("grid oracle supports at most {max} variables, got {got}")]
    TooManyVariables { got: usize, max: usize },
    #[error("grid step {0} does not divide 1 evenly")]
    InvalidGridStep(f64),
    #[error("static equal split is infeasible: {0}")]
    InfeasibleStatic(String),
}

/// Exact LP solve of the allocation problem.
///
/// Substituting `x = t − δ` turns the minimum reservations into plain
/// nonnegativity and leaves every right-hand side nonnegative whenever the
/// problem is feasible, so the slack basis is a valid starting vertex.
pub fn solve(problem: &AllocationProblem) -> SolveReport {
    if !problem.check_feasibility().is_feasible() {
        return SolveReport::infeasible();
    }
    let n = problem.n_vars();
    let (n_sub, n_sl) = (problem.n_substrates(), problem.n_slices());
    let mut delta = vec![0.0; n];
    let mut coeff = vec![0.0; n];
    for k in 0..n_sub {
        for j in 0..n_sl {
            let v = problem.var_index(k, j);
            delta[v] = problem.minimum(k, j);
            coeff[v] = problem.weighted_coeff(k, j);
        }
    }

    let constraints = problem.sum_constraints();
    let mut rows = Vec::with_capacity(constraints.len());
    let mut rhs = Vec::with_capacity(constraints.len());
    for c in &constraints {
        let mut row = vec![0.0; n];
        let mut reserved = 0.0;
        for &v in &c.vars {
            row[v] = 1.0;
            reserved += delta[v];
        }
        rows.push(row);
        // Feasibility was checked above; clear rounding residue.
        rhs.push((c.bound - reserved).max(0.0));
    }

    let x = match simplex::maximize(&coeff, &rows, &rhs) {
        simplex::LpOutcome::Optimal { x, .. } => x,
        // Each variable is capped by its substrate row, so this is unreachable
        // for a well-formed problem.
        simplex::LpOutcome::Unbounded => return SolveReport::infeasible(),
    };

    let rows: Vec<Vec<f64>> = (0..n_sub)
        .map(|k| {
            (0..n_sl)
                .map(|j| {
                    let v = problem.var_index(k, j);
                    delta[v] + x[v]
                })
                .collect()
        })
        .collect();
    let allocation = AllocationMatrix::from_rows_unchecked(rows);
    let objective = revenue_of(&allocation, problem).expect("dimensions built from problem");
    SolveReport {
        status: SolveStatus::Optimal,
        allocation: Some(allocation),
        objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(c: f64) -> AllocationProblem {
        AllocationProblem::new(
            vec![SubstrateId::bts(0)],
            vec![SliceQuota::total(1.0)],
            vec![vec![0.0]],
            vec![vec![c]],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn single_variable() {
        let r = solve(&single(20.0));
        assert!(r.is_optimal());
        assert_eq!(r.allocation.unwrap().get(0, 0), 1.0);
        assert_eq!(r.objective, 20.0);
    }

    #[test]
    fn two_slices_prefers_larger_coefficient() {
        let p = AllocationProblem::new(
            vec![SubstrateId::ap(0)],
            vec![SliceQuota::total(1.0); 2],
            vec![vec![0.0, 0.0]],
            vec![vec![36.0, 18.0]],
            vec![1.0],
        )
        .unwrap();
        let r = solve(&p);
        let t = r.allocation.unwrap();
        assert_eq!((t.get(0, 0), t.get(0, 1)), (1.0, 0.0));
        assert_eq!(r.objective, 36.0);
    }

    #[test]
    fn minimum_on_ap_is_honoured() {
        // BTS then AP; bids (1.4, 0.6); slice 0 needs 0.7 on the AP.
        let p = AllocationProblem::new(
            vec![SubstrateId::bts(0), SubstrateId::ap(1)],
            vec![SliceQuota::total(1.4), SliceQuota::total(0.6)],
            vec![vec![0.0, 0.0], vec![0.7, 0.0]],
            vec![vec![8.0, 18.0], vec![12.0, 30.0]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let r = solve(&p);
        let t = r.allocation.unwrap();
        assert!(t.get(1, 0) >= 0.7 - 1e-12);
        assert!(t.is_feasible_for(&p));
        // AP slice 1 takes its whole 0.3 remainder, slice 1 is then capped by
        // its bid, leaving BTS to slice 0: 0.7*12 + 0.3*30 + 0.3*18 + 0.7*8.
        let expected = 0.7 * 12.0 + 0.3 * 30.0 + 0.3 * 18.0 + 0.7 * 8.0;
        assert!((r.objective - expected).abs() < 1e-9, "{}", r.objective);
    }

    #[test]
    fn infeasible_minima() {
        let p = AllocationProblem::new(
            vec![SubstrateId::bts(0)],
            vec![SliceQuota::default(); 2],
            vec![vec![0.7, 0.5]],
            vec![vec![1.0, 1.0]],
            vec![1.0],
        )
        .unwrap();
        let r = solve(&p);
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.allocation.is_none());
    }

    #[test]
    fn zero_utility_returns_minima() {
        let p = AllocationProblem::new(
            vec![SubstrateId::bts(0)],
            vec![SliceQuota::default(); 2],
            vec![vec![0.2, 0.1]],
            vec![vec![0.0, 0.0]],
            vec![1.0],
        )
        .unwrap();
        let t = solve(&p).allocation.unwrap();
        assert_eq!(t.flatten(), vec![0.2, 0.1]);
    }
}
