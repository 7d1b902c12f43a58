use super::problem::{AllocationMatrix, AllocationProblem, SubstrateKind};
use super::OptimizerError;

/// Static baseline: each slice's bid split equally over all substrates.
///
/// A slice without a total bid splits its per-kind quota over the substrates
/// of that kind, and falls back to an equal share of each substrate when it
/// has no quota for that kind either. The result must satisfy every
/// constraint of `problem`; otherwise the baseline is reported infeasible.
pub fn equal_split(problem: &AllocationProblem) -> Result<AllocationMatrix, OptimizerError> {
    let n_sub = problem.n_substrates();
    let n_sl = problem.n_slices();
    let count_of = |kind: SubstrateKind| {
        problem
            .substrates()
            .iter()
            .filter(|s| s.kind == kind)
            .count()
    };
    let mut rows = vec![vec![0.0; n_sl]; n_sub];
    for (k, sub) in problem.substrates().iter().enumerate() {
        for (j, q) in problem.quotas().iter().enumerate() {
            rows[k][j] = match (q.total, q.for_kind(sub.kind)) {
                (Some(bid), _) => bid / n_sub as f64,
                (None, Some(quota)) => quota / count_of(sub.kind) as f64,
                (None, None) => 1.0 / n_sl as f64,
            };
        }
    }
    if let Some((k, j)) = rows
        .iter()
        .enumerate()
        .flat_map(|(k, r)| r.iter().enumerate().map(move |(j, v)| (k, j, *v)))
        .find(|(_, _, v)| *v > 1.0)
        .map(|(k, j, _)| (k, j))
    {
        return Err(OptimizerError::InfeasibleStatic(format!(
            "share of slice {j} on substrate {} exceeds full airtime",
            problem.substrates()[k]
        )));
    }
    let allocation = AllocationMatrix::from_rows_unchecked(rows);
    let violations = allocation.violations(problem)?;
    if let Some(v) = violations.first() {
        return Err(OptimizerError::InfeasibleStatic(v.to_string()));
    }
    Ok(allocation)
}
