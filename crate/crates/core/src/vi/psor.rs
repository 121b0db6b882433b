use super::{cp1_residuals, BoxSolution, Bounds};
use crate::error::{Error, Result};
use crate::report::{Termination, Trace};
use crate::sparse::{self, CsrMatrix, EnvelopeCholesky};

/// Relaxation factor for SOR on `A`, from the Jacobi spectral radius
/// `ρ = 1 − μ_min(D^{-1/2} A D^{-1/2})` via `ω = 2 / (1 + sqrt(1 − ρ²))`.
/// The smallest eigenvalue is found by inverse iteration.
pub fn sor_relaxation(a: &CsrMatrix) -> Result<f64> {
    let n = a.nrows();
    if n < 2 {
        return Ok(1.0);
    }
    let sd: Vec<f64> = a.diagonal().iter().map(|d| d.sqrt()).collect();
    let chol = EnvelopeCholesky::factor(a)?;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 1e-3).collect();
    let mut mu = 1.0;
    for _ in 0..40 {
        let nx = sparse::norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y: Vec<f64> = x.iter().zip(&sd).map(|(v, s)| v * s).collect();
        let z = chol.solve(&y);
        let w: Vec<f64> = z.iter().zip(&sd).map(|(v, s)| v * s).collect();
        let next_mu = 1.0 / sparse::dot(&x, &w);
        x = w;
        if (next_mu - mu).abs() <= 1e-6 * next_mu {
            mu = next_mu;
            break;
        }
        mu = next_mu;
    }
    let rho = (1.0 - mu).clamp(0.0, 0.999_999);
    Ok(2.0 / (1.0 + (1.0 - rho * rho).sqrt()))
}

/// Projected SOR. Stops once the complementarity residuals of the iterate,
/// with `λ = A u − b` on constrained rows, are all below `tol`.
pub fn psor(
    a: &CsrMatrix,
    b: &[f64],
    bounds: &Bounds,
    omega: Option<f64>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<BoxSolution> {
    let n = a.nrows();
    crate::assembly::check_len(n, b.len())?;
    crate::assembly::check_len(n, bounds.len())?;
    bounds.validate()?;
    let omega = match omega {
        Some(w) => w,
        None => sor_relaxation(a)?,
    };
    if !(omega > 0.0 && omega < 2.0) {
        return Err(Error::InvalidParameter(format!("relaxation factor {omega} is outside (0, 2)")));
    }
    let max_iter = max_iter.unwrap_or(100 * n.max(1));
    let diag = a.diagonal();
    let constrained = bounds.constrained();
    let mut u: Vec<f64> = (0..n).map(|i| bounds.project(i, 0.0)).collect();
    let mut trace = Trace::start();
    let mut terminated = Termination::MaxIter;
    let mut lambda = vec![0.0; constrained.len()];
    let mut residuals = Default::default();
    for k in 1..=max_iter {
        for i in 0..n {
            let r = a.row_dot(i, &u) - b[i];
            u[i] = bounds.project(i, u[i] - omega * r / diag[i]);
        }
        let au = a.mul_vec(&u);
        for (l, &i) in lambda.iter_mut().zip(&constrained) {
            *l = au[i] - b[i];
        }
        residuals = cp1_residuals(a, b, bounds, &u, &lambda);
        trace.push(k, residuals.max(), omega);
        if residuals.max() <= tol {
            terminated = Termination::Converged;
            break;
        }
    }
    Ok(BoxSolution {
        u,
        lambda,
        residuals,
        report: trace.finish(terminated),
        history: Vec::new(),
    })
}
