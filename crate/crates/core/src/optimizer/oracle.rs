//! Grid-search oracle for the allocation LP.
//!
//! Every variable ranges over `{δ, δ + step, …} ∩ [δ, 1]`. The search visits
//! the grid depth-first in the flattened substrate-major order and skips a
//! subtree only when it provably contains no feasible point or no point that
//! could match the incumbent, so the result equals plain enumeration of the
//! whole grid. It shares no code with the simplex path beyond the problem
//! accessors and the direct constraint check on the final matrix.

use super::problem::{AllocationMatrix, AllocationProblem, SolveReport, SolveStatus};
use super::{revenue_of, OptimizerError};

/// The grid has `(1/step + 1)^n` points; beyond this the search is impractical.
pub const MAX_ORACLE_VARS: usize = 6;

const TIE_TOLERANCE: f64 = 1e-9;

struct Search<'a> {
    problem: &'a AllocationProblem,
    step: f64,
    n_sl: usize,
    minima: Vec<f64>,
    coeff: Vec<f64>,
    /// `[substrate]` airtime assigned so far.
    substrate_used: Vec<f64>,
    /// `[slice]` airtime assigned so far, over all substrates.
    slice_used: Vec<f64>,
    /// `[slice][kind]`, kind 0 = basestation, 1 = access point.
    slice_kind_used: Vec<[f64; 2]>,
    current: Vec<f64>,
    best: Option<(f64, Vec<f64>)>,
}

fn kind_slot(kind: super::SubstrateKind) -> usize {
    match kind {
        super::SubstrateKind::ScheduledBasestation => 0,
        super::SubstrateKind::ContentionAccessPoint => 1,
    }
}

impl<'a> Search<'a> {
    fn substrate_of(&self, var: usize) -> usize {
        var / self.n_sl
    }

    fn slice_of(&self, var: usize) -> usize {
        var % self.n_sl
    }

    /// Minimum airtime still owed by unassigned variables (index ≥ `from`)
    /// to each constraint group, so partial assignments can be rejected early.
    fn pending_minima(&self, from: usize) -> (Vec<f64>, Vec<f64>, Vec<[f64; 2]>) {
        let n_sub = self.problem.n_substrates();
        let mut sub = vec![0.0; n_sub];
        let mut sl = vec![0.0; self.n_sl];
        let mut slk = vec![[0.0; 2]; self.n_sl];
        for v in from..self.minima.len() {
            let (k, j) = (self.substrate_of(v), self.slice_of(v));
            let kind = kind_slot(self.problem.substrates()[k].kind);
            sub[k] += self.minima[v];
            sl[j] += self.minima[v];
            slk[j][kind] += self.minima[v];
        }
        (sub, sl, slk)
    }

    fn partial_ok(&self, from: usize) -> bool {
        let (sub, sl, slk) = self.pending_minima(from);
        let eps = TIE_TOLERANCE;
        for (k, used) in self.substrate_used.iter().enumerate() {
            if used + sub[k] > 1.0 + eps {
                return false;
            }
        }
        for (j, q) in self.problem.quotas().iter().enumerate() {
            if let Some(bid) = q.total {
                if self.slice_used[j] + sl[j] > bid + eps {
                    return false;
                }
            }
            for kind in [
                super::SubstrateKind::ScheduledBasestation,
                super::SubstrateKind::ContentionAccessPoint,
            ] {
                if let Some(quota) = q.for_kind(kind) {
                    let s = kind_slot(kind);
                    if self.slice_kind_used[j][s] + slk[j][s] > quota + eps {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Upper bound on the objective contributed by variables `from..`: the
    /// smaller of giving each substrate's remaining airtime to its best
    /// remaining slice and giving each slice's remaining budget to its best
    /// remaining substrate.
    fn remaining_bound(&self, from: usize) -> f64 {
        let n_sub = self.problem.n_substrates();
        let mut sub_coeff = vec![None::<f64>; n_sub];
        let mut sl_coeff = vec![None::<f64>; self.n_sl];
        let mut sl_vars = vec![0usize; self.n_sl];
        let mut sl_kind_vars = vec![[0usize; 2]; self.n_sl];
        for v in from..self.coeff.len() {
            let (k, j) = (self.substrate_of(v), self.slice_of(v));
            sub_coeff[k] = Some(sub_coeff[k].unwrap_or(0.0).max(self.coeff[v]));
            sl_coeff[j] = Some(sl_coeff[j].unwrap_or(0.0).max(self.coeff[v]));
            sl_vars[j] += 1;
            sl_kind_vars[j][kind_slot(self.problem.substrates()[k].kind)] += 1;
        }
        let by_substrate: f64 = sub_coeff
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.map(|c| c * (1.0 - self.substrate_used[k]).max(0.0)))
            .sum();
        let by_slice: f64 = sl_coeff
            .iter()
            .enumerate()
            .filter_map(|(j, c)| {
                c.map(|c| {
                    let q = &self.problem.quotas()[j];
                    let by_kind: f64 = [
                        super::SubstrateKind::ScheduledBasestation,
                        super::SubstrateKind::ContentionAccessPoint,
                    ]
                    .into_iter()
                    .map(|kind| {
                        let s = kind_slot(kind);
                        let n = sl_kind_vars[j][s] as f64;
                        match q.for_kind(kind) {
                            Some(quota) => (quota - self.slice_kind_used[j][s]).max(0.0).min(n),
                            None => n,
                        }
                    })
                    .sum();
                    let room = match q.total {
                        Some(bid) => (bid - self.slice_used[j]).max(0.0).min(by_kind),
                        None => by_kind,
                    };
                    c * room
                })
            })
            .sum();
        by_substrate.min(by_slice)
    }

    fn assign(&mut self, var: usize, value: f64) {
        let (k, j) = (self.substrate_of(var), self.slice_of(var));
        let kind = kind_slot(self.problem.substrates()[k].kind);
        self.substrate_used[k] += value;
        self.slice_used[j] += value;
        self.slice_kind_used[j][kind] += value;
        self.current[var] = value;
    }

    fn unassign(&mut self, var: usize) {
        let value = self.current[var];
        let (k, j) = (self.substrate_of(var), self.slice_of(var));
        let kind = kind_slot(self.problem.substrates()[k].kind);
        self.substrate_used[k] -= value;
        self.slice_used[j] -= value;
        self.slice_kind_used[j][kind] -= value;
        self.current[var] = 0.0;
    }

    fn offer(&mut self, objective: f64) {
        let better = match &self.best {
            None => true,
            Some((best, vec)) => {
                objective > best + TIE_TOLERANCE
                    || (objective >= best - TIE_TOLERANCE && self.current < *vec)
            }
        };
        if better {
            self.best = Some((objective, self.current.clone()));
        }
    }

    fn descend(&mut self, var: usize, partial: f64) {
        if var == self.current.len() {
            self.offer(partial);
            return;
        }
        if let Some((best, _)) = &self.best {
            let bound = partial + self.remaining_bound(var);
            if bound * (1.0 + 1e-12) < best - TIE_TOLERANCE {
                return;
            }
        }
        let min = self.minima[var];
        let steps = ((1.0 - min) / self.step + 1e-9).floor() as usize;
        // High values first so good incumbents appear early.
        for m in (0..=steps).rev() {
            let value = min + m as f64 * self.step;
            self.assign(var, value);
            if self.partial_ok(var + 1) {
                self.descend(var + 1, partial + self.coeff[var] * value);
            }
            self.unassign(var);
        }
    }
}

/// Best allocation on the `grid_step` lattice anchored at the minima. Ties
/// within 1e-9 go to the lexicographically smallest flattened allocation.
pub fn brute_force_solve(
    problem: &AllocationProblem,
    grid_step: f64,
) -> Result<SolveReport, OptimizerError> {
    let n = problem.n_vars();
    if n > MAX_ORACLE_VARS {
        return Err(OptimizerError::TooManyVariables {
            got: n,
            max: MAX_ORACLE_VARS,
        });
    }
    let cells = 1.0 / grid_step;
    if !(grid_step > 0.0 && grid_step <= 1.0) || (cells - cells.round()).abs() > 1e-9 {
        return Err(OptimizerError::InvalidGridStep(grid_step));
    }

    let n_sl = problem.n_slices();
    let mut minima = vec![0.0; n];
    let mut coeff = vec![0.0; n];
    for k in 0..problem.n_substrates() {
        for j in 0..n_sl {
            minima[k * n_sl + j] = problem.minimum(k, j);
            coeff[k * n_sl + j] = problem.weighted_coeff(k, j);
        }
    }
    let mut search = Search {
        problem,
        step: grid_step,
        n_sl,
        minima,
        coeff,
        substrate_used: vec![0.0; problem.n_substrates()],
        slice_used: vec![0.0; n_sl],
        slice_kind_used: vec![[0.0; 2]; n_sl],
        current: vec![0.0; n],
        best: None,
    };
    if search.partial_ok(0) {
        search.descend(0, 0.0);
    }

    let Some((_, flat)) = search.best else {
        return Ok(SolveReport::infeasible());
    };
    let rows = flat.chunks(n_sl).map(<[f64]>::to_vec).collect();
    let allocation = AllocationMatrix::from_rows_unchecked(rows);
    debug_assert!(allocation.is_feasible_for(problem));
    let objective = revenue_of(&allocation, problem)?;
    Ok(SolveReport {
        status: SolveStatus::Optimal,
        allocation: Some(allocation),
        objective,
    })
}
