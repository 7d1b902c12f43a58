use std::fmt;

use serde::{Deserialize, Serialize};

use super::OptimizerError;
use crate::airtime::AirtimeFraction;

/// Slack allowed when checking sums of airtime fractions.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SliceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubstrateKind {
    /// Resource-block scheduled MAC (cellular basestation).
    ScheduledBasestation,
    /// CSMA MAC with group airtime enforcement (WiFi access point).
    ContentionAccessPoint,
}

impl SubstrateKind {
    pub fn short_name(self) -> &'static str {
        match self {
            SubstrateKind::ScheduledBasestation => "bts",
            SubstrateKind::ContentionAccessPoint => "ap",
        }
    }
}

impl fmt::Display for SubstrateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubstrateId {
    pub index: usize,
    pub kind: SubstrateKind,
}

impl SubstrateId {
    pub fn bts(index: usize) -> Self {
        SubstrateId {
            index,
            kind: SubstrateKind::ScheduledBasestation,
        }
    }

    pub fn ap(index: usize) -> Self {
        SubstrateId {
            index,
            kind: SubstrateKind::ContentionAccessPoint,
        }
    }
}

impl fmt::Display for SubstrateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind, self.index)
    }
}

/// Airtime budgets for one slice. `total` spans every substrate; the per-kind
/// quotas span only substrates of that kind. Absent limits are unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SliceQuota {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheduled: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contention: Option<f64>,
}

impl SliceQuota {
    pub fn total(bid: f64) -> Self {
        SliceQuota {
            total: Some(bid),
            ..Default::default()
        }
    }

    pub fn for_kind(&self, kind: SubstrateKind) -> Option<f64> {
        match kind {
            SubstrateKind::ScheduledBasestation => self.scheduled,
            SubstrateKind::ContentionAccessPoint => self.contention,
        }
    }
}

/// One linear "sum of airtimes ≤ bound" constraint of the allocation polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    SubstrateAirtime { substrate: SubstrateId },
    SliceBudget { slice: SliceId },
    SliceKindQuota { slice: SliceId, kind: SubstrateKind },
    Minimum { substrate: SubstrateId, slice: SliceId },
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::SubstrateAirtime { substrate } => {
                write!(f, "total airtime on substrate {substrate}")
            }
            ConstraintKind::SliceBudget { slice } => write!(f, "airtime bid of slice {}", slice.0),
            ConstraintKind::SliceKindQuota { slice, kind } => {
                write!(f, "{kind} quota of slice {}", slice.0)
            }
            ConstraintKind::Minimum { substrate, slice } => {
                write!(f, "minimum reservation of slice {} on {substrate}", slice.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: ConstraintKind,
    pub value: f64,
    pub bound: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constraint {
            ConstraintKind::Minimum { .. } => write!(
                f,
                "{}: {:.6} below {:.6}",
                self.constraint, self.value, self.bound
            ),
            _ => write!(
                f,
                "{}: {:.6} exceeds {:.6}",
                self.constraint, self.value, self.bound
            ),
        }
    }
}

/// Variable indices and bound of one sum constraint.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SumConstraint {
    pub kind: ConstraintKind,
    pub vars: Vec<usize>,
    pub bound: f64,
}

/// The airtime re-provisioning LP: maximize Σ_k w_k Σ_j C^k_j t^k_j over
/// per-substrate, per-slice and per-kind budgets with minimum reservations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    substrates: Vec<SubstrateId>,
    quotas: Vec<SliceQuota>,
    /// `[substrate][slice]`
    minima: Vec<Vec<f64>>,
    /// `[substrate][slice]`, Mbps
    utility: Vec<Vec<f64>>,
    price_weights: Vec<f64>,
}

fn check_matrix(
    field: &'static str,
    m: &[Vec<f64>],
    rows: usize,
    cols: usize,
) -> Result<(), OptimizerError> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(OptimizerError::DimensionMismatch(format!(
            "{field} must be {rows}x{cols}"
        )));
    }
    if m.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(OptimizerError::Malformed(format!(
            "{field} entries must be finite and >= 0"
        )));
    }
    Ok(())
}

impl AllocationProblem {
    pub fn new(
        substrates: Vec<SubstrateId>,
        quotas: Vec<SliceQuota>,
        minima: Vec<Vec<f64>>,
        utility: Vec<Vec<f64>>,
        price_weights: Vec<f64>,
    ) -> Result<Self, OptimizerError> {
        let (n_sub, n_sl) = (substrates.len(), quotas.len());
        if n_sub == 0 || n_sl == 0 {
            return Err(OptimizerError::Malformed(
                "problem needs at least one substrate and one slice".into(),
            ));
        }
        for (i, s) in substrates.iter().enumerate() {
            if substrates[..i].iter().any(|o| o.index == s.index) {
                return Err(OptimizerError::Malformed(format!(
                    "duplicate substrate index {}",
                    s.index
                )));
            }
        }
        check_matrix("minima", &minima, n_sub, n_sl)?;
        check_matrix("utility", &utility, n_sub, n_sl)?;
        if price_weights.len() != n_sub {
            return Err(OptimizerError::DimensionMismatch(format!(
                "price_weights must have {n_sub} entries"
            )));
        }
        if price_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(OptimizerError::Malformed(
                "price_weight entries must be finite and >= 0".into(),
            ));
        }
        for q in &quotas {
            for v in [q.total, q.scheduled, q.contention].into_iter().flatten() {
                if !v.is_finite() || v < 0.0 {
                    return Err(OptimizerError::Malformed(
                        "quota entries must be finite and >= 0".into(),
                    ));
                }
            }
        }
        Ok(AllocationProblem {
            substrates,
            quotas,
            minima,
            utility,
            price_weights,
        })
    }

    pub fn substrates(&self) -> &[SubstrateId] {
        &self.substrates
    }

    pub fn n_substrates(&self) -> usize {
        self.substrates.len()
    }

    pub fn n_slices(&self) -> usize {
        self.quotas.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n_substrates() * self.n_slices()
    }

    pub fn quotas(&self) -> &[SliceQuota] {
        &self.quotas
    }

    pub fn minimum(&self, substrate: usize, slice: usize) -> f64 {
        self.minima[substrate][slice]
    }

    pub fn minima(&self) -> &[Vec<f64>] {
        &self.minima
    }

    pub fn utility(&self) -> &[Vec<f64>] {
        &self.utility
    }

    pub fn price_weights(&self) -> &[f64] {
        &self.price_weights
    }

    /// Price-weighted revenue coefficient of variable `(substrate, slice)`.
    pub fn weighted_coeff(&self, substrate: usize, slice: usize) -> f64 {
        self.price_weights[substrate] * self.utility[substrate][slice]
    }

    /// Same constraints, utility coefficients multiplied by `factor`.
    pub fn with_scaled_utility(&self, factor: f64) -> Result<Self, OptimizerError> {
        let utility = self
            .utility
            .iter()
            .map(|r| r.iter().map(|c| c * factor).collect())
            .collect();
        AllocationProblem::new(
            self.substrates.clone(),
            self.quotas.clone(),
            self.minima.clone(),
            utility,
            self.price_weights.clone(),
        )
    }

    pub fn with_quotas(&self, quotas: Vec<SliceQuota>) -> Result<Self, OptimizerError> {
        AllocationProblem::new(
            self.substrates.clone(),
            quotas,
            self.minima.clone(),
            self.utility.clone(),
            self.price_weights.clone(),
        )
    }

    pub(crate) fn var_index(&self, substrate: usize, slice: usize) -> usize {
        substrate * self.n_slices() + slice
    }

    /// Every sum constraint as variable-index rows, flattened substrate-major.
    pub(crate) fn sum_constraints(&self) -> Vec<SumConstraint> {
        let mut out = Vec::new();
        for (k, sub) in self.substrates.iter().enumerate() {
            out.push(SumConstraint {
                kind: ConstraintKind::SubstrateAirtime { substrate: *sub },
                vars: (0..self.n_slices()).map(|j| self.var_index(k, j)).collect(),
                bound: 1.0,
            });
        }
        for (j, q) in self.quotas.iter().enumerate() {
            if let Some(bid) = q.total {
                out.push(SumConstraint {
                    kind: ConstraintKind::SliceBudget { slice: SliceId(j) },
                    vars: (0..self.n_substrates())
                        .map(|k| self.var_index(k, j))
                        .collect(),
                    bound: bid,
                });
            }
            for kind in [
                SubstrateKind::ScheduledBasestation,
                SubstrateKind::ContentionAccessPoint,
            ] {
                if let Some(quota) = q.for_kind(kind) {
                    let vars: Vec<usize> = self
                        .substrates
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.kind == kind)
                        .map(|(k, _)| self.var_index(k, j))
                        .collect();
                    if !vars.is_empty() {
                        out.push(SumConstraint {
                            kind: ConstraintKind::SliceKindQuota {
                                slice: SliceId(j),
                                kind,
                            },
                            vars,
                            bound: quota,
                        });
                    }
                }
            }
        }
        out
    }

    /// The polytope is nonempty iff the minimum-reservation point satisfies
    /// every sum constraint, since it is the componentwise least point.
    pub fn check_feasibility(&self) -> Feasibility {
        let minima = AllocationMatrix::from_rows_unchecked(self.minima.clone());
        let violations = minima.violations(self).unwrap_or_default();
        Feasibility { violations }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Airtime fractions indexed `[substrate][slice]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationMatrix {
    rows: Vec<Vec<AirtimeFraction>>,
}

impl AllocationMatrix {
    pub fn zeros(n_substrates: usize, n_slices: usize) -> Self {
        AllocationMatrix {
            rows: vec![vec![AirtimeFraction::ZERO; n_slices]; n_substrates],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, OptimizerError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(OptimizerError::DimensionMismatch(
                "ragged allocation rows".into(),
            ));
        }
        let rows = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|v| {
                        AirtimeFraction::new(v)
                            .map_err(|e| OptimizerError::Malformed(e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AllocationMatrix { rows })
    }

    /// Entries are clamped into `[0, 1]`.
    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        AllocationMatrix {
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(AirtimeFraction::saturating).collect())
                .collect(),
        }
    }

    pub fn n_substrates(&self) -> usize {
        self.rows.len()
    }

    pub fn n_slices(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn get(&self, substrate: usize, slice: usize) -> f64 {
        self.rows[substrate][slice].value()
    }

    /// Quota vector to push to one substrate.
    pub fn substrate_row(&self, substrate: usize) -> &[AirtimeFraction] {
        &self.rows[substrate]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[AirtimeFraction]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().map(|a| a.value()).collect()
    }

    fn check_dims(&self, problem: &AllocationProblem) -> Result<(), OptimizerError> {
        if self.n_substrates() != problem.n_substrates() || self.n_slices() != problem.n_slices()
        {
            return Err(OptimizerError::DimensionMismatch(format!(
                "allocation is {}x{}, problem is {}x{}",
                self.n_substrates(),
                self.n_slices(),
                problem.n_substrates(),
                problem.n_slices()
            )));
        }
        Ok(())
    }

    /// Every constraint of `problem` this matrix breaks by more than
    /// [`CONSTRAINT_TOLERANCE`]. Sums are taken directly over rows and
    /// columns rather than through the LP row encoding.
    pub fn violations(&self, problem: &AllocationProblem) -> Result<Vec<Violation>, OptimizerError> {
        self.check_dims(problem)?;
        let mut out = Vec::new();
        for (k, sub) in problem.substrates().iter().enumerate() {
            let used: f64 = self.rows[k].iter().map(|a| a.value()).sum();
            if used > 1.0 + CONSTRAINT_TOLERANCE {
                out.push(Violation {
                    constraint: ConstraintKind::SubstrateAirtime { substrate: *sub },
                    value: used,
                    bound: 1.0,
                });
            }
        }
        for (j, q) in problem.quotas().iter().enumerate() {
            if let Some(bid) = q.total {
                let used: f64 = (0..self.n_substrates()).map(|k| self.get(k, j)).sum();
                if used > bid + CONSTRAINT_TOLERANCE {
                    out.push(Violation {
                        constraint: ConstraintKind::SliceBudget { slice: SliceId(j) },
                        value: used,
                        bound: bid,
                    });
                }
            }
            for kind in [
                SubstrateKind::ScheduledBasestation,
                SubstrateKind::ContentionAccessPoint,
            ] {
                if let Some(quota) = q.for_kind(kind) {
                    let used: f64 = problem
                        .substrates()
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.kind == kind)
                        .map(|(k, _)| self.get(k, j))
                        .sum();
                    if used > quota + CONSTRAINT_TOLERANCE {
                        out.push(Violation {
                            constraint: ConstraintKind::SliceKindQuota {
                                slice: SliceId(j),
                                kind,
                            },
                            value: used,
                            bound: quota,
                        });
                    }
                }
            }
        }
        for (k, sub) in problem.substrates().iter().enumerate() {
            for j in 0..problem.n_slices() {
                let min = problem.minimum(k, j);
                if self.get(k, j) < min - CONSTRAINT_TOLERANCE {
                    out.push(Violation {
                        constraint: ConstraintKind::Minimum {
                            substrate: *sub,
                            slice: SliceId(j),
                        },
                        value: self.get(k, j),
                        bound: min,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn is_feasible_for(&self, problem: &AllocationProblem) -> bool {
        self.violations(problem).is_ok_and(|v| v.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Present iff `status` is `Optimal`.
    pub allocation: Option<AllocationMatrix>,
    pub objective: f64,
}

impl SolveReport {
    pub fn infeasible() -> Self {
        SolveReport {
            status: SolveStatus::Infeasible,
            allocation: None,
            objective: 0.0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Σ_k w_k Σ_j t^k_j C^k_j.
pub fn revenue_of(
    allocation: &AllocationMatrix,
    problem: &AllocationProblem,
) -> Result<f64, OptimizerError> {
    allocation.check_dims(problem)?;
    let mut total = 0.0;
    for k in 0..problem.n_substrates() {
        let row: f64 = (0..problem.n_slices())
            .map(|j| allocation.get(k, j) * problem.utility[k][j])
            .sum();
        total += problem.price_weights[k] * row;
    }
    Ok(total)
}
