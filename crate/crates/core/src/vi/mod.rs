//! Variational inequalities of the first kind: obstacle problems in the
//! domain, Signorini problems on the boundary, and their mixed
//! (multiplier) form.
//!
//! After discretization every problem here is the box-constrained system
//!
//! ```text
//! find u with lo ≤ u ≤ hi,  λ = A u − b,
//! λ ≥ 0 where u = lo > −∞,  λ ≤ 0 where u = hi < ∞,  λ = 0 elsewhere
//! ```
//!
//! with `b = w f + lift` the assembled right-hand side. The multiplier lives
//! only on constrained unknowns.

mod pdas;
mod psor;
pub mod qp;

use serde::Serialize;

use crate::assembly::DiscreteOperator;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::ConditionKind;
use crate::report::ConvergenceReport;
use crate::sparse::CsrMatrix;

pub use pdas::pdas;
pub use psor::{psor, sor_relaxation};
pub use qp::{qp_residuals, solve_box_qp, LinearRows, QpResiduals, QpSolution};

/// Default residual tolerance of the VI solvers (max norm).
pub const DEFAULT_TOL: f64 = 1e-8;

/// Per-unknown bounds; infinite entries mean "no bound".
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unconstrained(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.lower[i] > f64::NEG_INFINITY || self.upper[i] < f64::INFINITY
    }

    /// Indices carrying at least one finite bound, ascending.
    pub fn constrained(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_constrained(i)).collect()
    }

    #[inline]
    pub fn project(&self, i: usize, v: f64) -> f64 {
        v.max(self.lower[i]).min(self.upper[i])
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lower.len(),
                got: self.upper.len(),
            });
        }
        for i in 0..self.len() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidObstacle(format!(
                    "unknown {i}: bounds [{lo}, {hi}] are empty"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum ObstacleKind {
    /// Pointwise bounds at every unknown of the domain.
    Domain { lower: Field, upper: Option<Field> },
    /// Lower bound `u ≥ gap` on Signorini nodes, gaps taken from the boundary
    /// labeling. `segment` restricts to one Signorini segment.
    Boundary { segment: Option<String> },
}

#[derive(Debug, Clone)]
pub struct ObstacleSpec {
    pub kind: ObstacleKind,
}

impl ObstacleSpec {
    pub fn lower(psi: Field) -> Self {
        Self {
            kind: ObstacleKind::Domain {
                lower: psi,
                upper: None,
            },
        }
    }

    pub fn between(lower: Field, upper: Field) -> Self {
        Self {
            kind: ObstacleKind::Domain {
                lower,
                upper: Some(upper),
            },
        }
    }

    pub fn signorini() -> Self {
        Self {
            kind: ObstacleKind::Boundary { segment: None },
        }
    }

    pub fn signorini_segment(id: &str) -> Self {
        Self {
            kind: ObstacleKind::Boundary {
                segment: Some(id.to_string()),
            },
        }
    }

    /// Bounds on the operator's unknowns, after checking that the constraint
    /// set is nonempty and compatible with the Dirichlet data.
    pub fn bounds(&self, op: &DiscreteOperator) -> Result<Bounds> {
        let n = op.n_dofs();
        let mut b = Bounds::unconstrained(n);
        match &self.kind {
            ObstacleKind::Domain { lower, upper } => {
                lower.ensure_on(op.grid())?;
                if let Some(up) = upper {
                    up.ensure_on(op.grid())?;
                }
                for (d, &node) in op.dof_nodes().iter().enumerate() {
                    b.lower[d] = lower[node];
                    if let Some(up) = upper {
                        b.upper[d] = up[node];
                    }
                }
                let slack = 1e-12;
                for &(node, value) in op.dirichlet() {
                    let lo = lower[node];
                    let hi = upper.as_ref().map_or(f64::INFINITY, |u| u[node]);
                    if lo > value + slack * (1.0 + value.abs()) || hi < value - slack * (1.0 + value.abs()) {
                        return Err(Error::InvalidObstacle(format!(
                            "boundary data {value} at node {node} violates the obstacle [{lo}, {hi}]"
                        )));
                    }
                }
            }
            ObstacleKind::Boundary { segment } => {
                let labels = op.labeling();
                let allowed = match segment {
                    Some(id) => {
                        let idx = labels
                            .spec()
                            .segment_index(id)
                            .ok_or_else(|| Error::UnknownSegment(id.clone()))?;
                        if labels.spec().segments()[idx].condition.kind() != ConditionKind::Signorini {
                            return Err(Error::InvalidObstacle(format!("segment `{id}` is not a Signorini segment")));
                        }
                        Some(labels.nodes_of(id)?)
                    }
                    None => None,
                };
                if op.signorini().is_empty() {
                    return Err(Error::InvalidObstacle("grid has no Signorini nodes".into()));
                }
                for &(d, gap) in op.signorini() {
                    let node = op.dof_nodes()[d];
                    if allowed.as_ref().is_none_or(|a| a.contains(&node)) {
                        b.lower[d] = gap;
                    }
                }
            }
        }
        b.validate()?;
        Ok(b)
    }

    /// A grid function whose restriction to the constrained unknowns is the
    /// active bound (lower where finite, otherwise upper); zero on
    /// unconstrained unknowns and the Dirichlet data on Dirichlet nodes.
    pub fn g_preimage(&self, op: &DiscreteOperator) -> Result<Field> {
        let b = self.bounds(op)?;
        let dofs: Vec<f64> = (0..b.len())
            .map(|i| {
                if b.lower[i] > f64::NEG_INFINITY {
                    b.lower[i]
                } else if b.upper[i] < f64::INFINITY {
                    b.upper[i]
                } else {
                    0.0
                }
            })
            .collect();
        op.expand(&dofs)
    }
}

/// The four residuals of the complementarity form, in max norm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Cp1Residuals {
    /// `‖A u − b − Bᵀλ‖∞`.
    pub stationarity: f64,
    /// Largest bound violation.
    pub feasibility: f64,
    /// Largest multiplier of the wrong sign for the bounds present.
    pub dual_feasibility: f64,
    /// Largest `|λ_i| · distance to the bound it pushes against`.
    pub complementarity: f64,
}

impl Cp1Residuals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Residuals of `(u, λ)` for the algebraic system; `lambda` is indexed like
/// `bounds.constrained()`.
pub fn cp1_residuals(a: &CsrMatrix, b: &[f64], bounds: &Bounds, u: &[f64], lambda: &[f64]) -> Cp1Residuals {
    let mut r: Vec<f64> = a.mul_vec(u).iter().zip(b).map(|(x, y)| x - y).collect();
    let mut res = Cp1Residuals::default();
    for (&i, &l) in bounds.constrained().iter().zip(lambda) {
        r[i] -= l;
        let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
        res.feasibility = res.feasibility.max(lo - u[i]).max(u[i] - hi);
        let (lp, lm) = (l.max(0.0), (-l).max(0.0));
        if lo == f64::NEG_INFINITY {
            res.dual_feasibility = res.dual_feasibility.max(lp);
        } else {
            res.complementarity = res.complementarity.max(lp * (u[i] - lo).abs());
        }
        if hi == f64::INFINITY {
            res.dual_feasibility = res.dual_feasibility.max(lm);
        } else {
            res.complementarity = res.complementarity.max(lm * (hi - u[i]).abs());
        }
    }
    res.stationarity = r.iter().fold(0.0, |m, v| m.max(v.abs()));
    res
}

/// Output of the algebraic solvers.
#[derive(Debug, Clone)]
pub struct BoxSolution {
    pub u: Vec<f64>,
    /// Multipliers on `bounds.constrained()`.
    pub lambda: Vec<f64>,
    pub residuals: Cp1Residuals,
    pub report: ConvergenceReport,
    /// Active index sets visited (PDAS only).
    pub history: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViMethod {
    /// Projected SOR; `omega: None` picks the relaxation from the matrix.
    Psor { omega: Option<f64> },
    /// Primal-dual active set; `c: None` uses the largest diagonal entry.
    Pdas { c: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViOptions {
    pub method: ViMethod,
    pub tol: f64,
    /// Defaults to `10 N` sweeps for PDAS and `100 N` for PSOR.
    pub max_iter: Option<usize>,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self {
            method: ViMethod::Pdas { c: None },
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

impl ViOptions {
    pub fn psor() -> Self {
        Self {
            method: ViMethod::Psor { omega: None },
            ..Self::default()
        }
    }

    pub fn pdas() -> Self {
        Self::default()
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }
}

pub fn solve_box(a: &CsrMatrix, b: &[f64], bounds: &Bounds, opts: &ViOptions) -> Result<BoxSolution> {
    match opts.method {
        ViMethod::Psor { omega } => psor(a, b, bounds, omega, opts.tol, opts.max_iter),
        ViMethod::Pdas { c } => pdas(a, b, bounds, c, opts.tol, opts.max_iter),
    }
}

/// Primal field and multiplier of an obstacle or Signorini problem.
#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub u: Field,
    /// Constrained unknowns (dof indices) in ascending order.
    pub constrained: Vec<usize>,
    /// Multiplier on each constrained unknown.
    pub lambda: Vec<f64>,
    /// Constrained unknowns where a bound is attained with a nonzero
    /// multiplier.
    pub active_set: Vec<usize>,
    pub residuals: Cp1Residuals,
    pub report: ConvergenceReport,
    pub history: Vec<Vec<usize>>,
}

impl MixedSolution {
    pub fn converged(&self) -> bool {
        self.report.converged()
    }

    /// Multiplier as a nodal field (zero off the constrained set).
    pub fn lambda_field(&self, op: &DiscreteOperator) -> Result<Field> {
        let mut values = vec![0.0; op.grid().num_nodes()];
        for (&d, &l) in self.constrained.iter().zip(&self.lambda) {
            values[op.dof_nodes()[d]] = l;
        }
        Field::from_values(op.grid(), values)
    }
}

pub fn solve_obstacle(op: &DiscreteOperator, f: &Field, spec: &ObstacleSpec, opts: &ViOptions) -> Result<MixedSolution> {
    let bounds = spec.bounds(op)?;
    let b = op.rhs(f)?;
    let sol = solve_box(op.matrix(), &b, &bounds, opts)?;
    let constrained = bounds.constrained();
    let active_set = constrained
        .iter()
        .zip(&sol.lambda)
        .filter(|(_, &l)| l != 0.0)
        .filter(|(&i, _)| sol.u[i] == bounds.lower[i] || sol.u[i] == bounds.upper[i])
        .map(|(&i, _)| i)
        .collect();
    Ok(MixedSolution {
        u: op.expand(&sol.u)?,
        constrained,
        lambda: sol.lambda,
        active_set,
        residuals: sol.residuals,
        report: sol.report,
        history: sol.history,
    })
}

pub fn solve_obstacle_psor(
    op: &DiscreteOperator,
    f: &Field,
    spec: &ObstacleSpec,
    omega: Option<f64>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<MixedSolution> {
    let opts = ViOptions {
        method: ViMethod::Psor { omega },
        tol,
        max_iter,
    };
    solve_obstacle(op, f, spec, &opts)
}

pub fn solve_obstacle_pdas(
    op: &DiscreteOperator,
    f: &Field,
    spec: &ObstacleSpec,
    c: Option<f64>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<MixedSolution> {
    let opts = ViOptions {
        method: ViMethod::Pdas { c },
        tol,
        max_iter,
    };
    solve_obstacle(op, f, spec, &opts)
}

/// Signorini problem: `u ≥ gap` on every Signorini node of the operator.
pub fn solve_signorini(op: &DiscreteOperator, f: &Field, opts: &ViOptions) -> Result<MixedSolution> {
    solve_obstacle(op, f, &ObstacleSpec::signorini(), opts)
}

/// Recomputes the complementarity residuals of a candidate from scratch.
pub fn verify_cp1(op: &DiscreteOperator, f: &Field, spec: &ObstacleSpec, sol: &MixedSolution) -> Result<Cp1Residuals> {
    let bounds = spec.bounds(op)?;
    let constrained = bounds.constrained();
    if constrained != sol.constrained {
        return Err(Error::DimensionMismatch {
            expected: constrained.len(),
            got: sol.constrained.len(),
        });
    }
    let b = op.rhs(f)?;
    let u = op.restrict(&sol.u)?;
    Ok(cp1_residuals(op.matrix(), &b, &bounds, &u, &sol.lambda))
}

/// Multiplier recovered from a primal solution alone: `λ = A u − b` on the
/// constrained unknowns.
pub fn recover_multiplier(op: &DiscreteOperator, f: &Field, spec: &ObstacleSpec, u: &Field) -> Result<Vec<f64>> {
    let bounds = spec.bounds(op)?;
    let b = op.rhs(f)?;
    let au = op.matrix().mul_vec(&op.restrict(u)?);
    Ok(bounds.constrained().iter().map(|&i| au[i] - b[i]).collect())
}
