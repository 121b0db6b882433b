use super::{cp1_residuals, BoxSolution, Bounds};
use crate::error::{Error, Result};
use crate::report::{Termination, Trace};
use crate::sparse::{self, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Free,
    Lower,
    Upper,
}

/// Primal-dual active set method.
///
/// Starting from `λ = 0` and the unconstrained solution, an unknown is put on
/// its lower bound when `λ + c (lo − u) > 0`, on its upper bound when
/// `λ + c (hi − u) < 0` (fixed when `lo = hi`), and left free otherwise,
/// including ties up to rounding. The equality-constrained system for that partition
/// is solved exactly and the loop stops when the partition repeats.
pub fn pdas(
    a: &CsrMatrix,
    b: &[f64],
    bounds: &Bounds,
    c: Option<f64>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<BoxSolution> {
    let n = a.nrows();
    crate::assembly::check_len(n, b.len())?;
    crate::assembly::check_len(n, bounds.len())?;
    bounds.validate()?;
    let diag = a.diagonal();
    let c = c.unwrap_or_else(|| diag.iter().cloned().fold(0.0, f64::max));
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("active-set parameter c = {c} must be positive")));
    }
    let max_iter = max_iter.unwrap_or(10 * n.max(1));
    let constrained = bounds.constrained();

    let mut trace = Trace::start();
    let mut u = sparse::solve_spd(a, b)?;
    let mut lam_full = vec![0.0; n];
    let mut states = vec![State::Free; n];
    let mut history = vec![Vec::new()];
    let mut terminated = Termination::MaxIter;

    for k in 1..=max_iter {
        // indicators within rounding of zero count as ties
        let tie = 64.0
            * f64::EPSILON
            * (sparse::norm_inf(b) + c * sparse::norm_inf(&u) + sparse::norm_inf(&lam_full));
        let mut next = vec![State::Free; n];
        for &i in &constrained {
            let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
            next[i] = if lo == hi || lam_full[i] + c * (lo - u[i]) > tie {
                State::Lower
            } else if lam_full[i] + c * (hi - u[i]) < -tie {
                State::Upper
            } else {
                State::Free
            };
        }
        if next == states {
            let lambda: Vec<f64> = constrained.iter().map(|&i| lam_full[i]).collect();
            let residuals = cp1_residuals(a, b, bounds, &u, &lambda);
            trace.push(k, residuals.max(), 1.0);
            if residuals.max() <= tol {
                terminated = Termination::Converged;
            } else {
                terminated = Termination::Stalled;
            }
            break;
        }
        states = next;
        history.push(
            constrained
                .iter()
                .copied()
                .filter(|&i| states[i] != State::Free)
                .collect(),
        );

        let fixed: Vec<bool> = states.iter().map(|&s| s != State::Free).collect();
        let values: Vec<f64> = (0..n)
            .map(|i| match states[i] {
                State::Lower => bounds.lower[i],
                State::Upper => bounds.upper[i],
                State::Free => 0.0,
            })
            .collect();
        u = sparse::solve_with_fixed(a, b, &fixed, &values)?;
        let au = a.mul_vec(&u);
        for i in 0..n {
            lam_full[i] = if fixed[i] { au[i] - b[i] } else { 0.0 };
        }
        let lambda: Vec<f64> = constrained.iter().map(|&i| lam_full[i]).collect();
        trace.push(k, cp1_residuals(a, b, bounds, &u, &lambda).max(), 1.0);
    }
    let lambda: Vec<f64> = constrained.iter().map(|&i| lam_full[i]).collect();
    let residuals = cp1_residuals(a, b, bounds, &u, &lambda);
    Ok(BoxSolution {
        u,
        lambda,
        residuals,
        report: trace.finish(terminated),
        history,
    })
}
