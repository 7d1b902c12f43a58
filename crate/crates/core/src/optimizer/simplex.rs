//! Dense primal simplex for `maximize c·x  s.t.  A x ≤ b, x ≥ 0` with
//! `b ≥ 0`, so the all-slack basis is feasible and no phase one is needed.
//! Pivoting follows Bland's rule, which rules out cycling on degenerate
//! vertices and makes the returned vertex a deterministic function of the
//! input.

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Unbounded,
}

/// Rows of `a` must have `c.len()` entries. Panics on negative `b`.
pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    assert_eq!(b.len(), m);
    assert!(b.iter().all(|v| *v >= 0.0), "rhs must be nonnegative");

    // Tableau columns: n structural, m slack, then rhs.
    let width = n + m + 1;
    let mut tab: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n);
            let mut t = vec![0.0; width];
            t[..n].copy_from_slice(row);
            t[n + i] = 1.0;
            t[width - 1] = b[i];
            t
        })
        .collect();
    // Reduced-cost row stored as -c so that optimality means no negatives.
    let mut obj = vec![0.0; width];
    for (o, ci) in obj.iter_mut().zip(c) {
        *o = -ci;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let scale = c.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

    loop {
        // Bland: lowest-index column with positive reduced gain.
        let Some(enter) = (0..n + m).find(|&j| obj[j] < -EPS * scale) else {
            break;
        };

        // Ratio test, ties broken by lowest basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[i][enter];
            if coef > EPS {
                let ratio = tab[i][width - 1] / coef;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || (ratio <= lr + EPS && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = leave else {
            return LpOutcome::Unbounded;
        };

        let pivot = tab[row][enter];
        for v in tab[row].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = tab[row].clone();
        for (i, r) in tab.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[enter];
            if f != 0.0 {
                for (v, p) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        let f = obj[enter];
        for (v, p) in obj.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        basis[row] = enter;
    }

    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab[i][width - 1].max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, objective }
}
