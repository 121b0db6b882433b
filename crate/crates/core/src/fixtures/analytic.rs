//! Problems with known solutions and empirical convergence orders.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::assembly::{assemble, solve_dirichlet, CoefficientField, DiscreteOperator};
use crate::error::{Error, Result};
use crate::field::{Field, ScalarFn};
use crate::mesh::{label_boundary, BoundaryCondition, BoundarySpec, Grid, Selector, Side};
use crate::vi::{solve_signorini, ViOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    NodalMax,
    DiscreteL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// Linear Dirichlet problem.
    Poisson,
    /// Signorini contact problem solved by the active-set method.
    Signorini,
}

/// A discretizable problem with its exact solution.
#[derive(Clone)]
pub struct AnalyticCase {
    pub name: &'static str,
    pub kind: CaseKind,
    pub exact: ScalarFn,
    pub load: ScalarFn,
    /// Interval the observed order must fall into.
    pub expected_rate_window: (f64, f64),
    pub norm: ErrorNorm,
    /// Default refinement levels `m` (mesh width `1/m`).
    pub levels: Vec<usize>,
    /// Point whose node and neighbours are left out of the error.
    pub singular_point: Option<[f64; 2]>,
    grid: fn(usize) -> Result<Grid>,
    boundary: fn(&ScalarFn) -> BoundarySpec,
}

impl std::fmt::Debug for AnalyticCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticCase")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("window", &self.expected_rate_window)
            .finish()
    }
}

impl AnalyticCase {
    pub fn grid(&self, m: usize) -> Result<Grid> {
        (self.grid)(m)
    }

    pub fn operator(&self, m: usize) -> Result<DiscreteOperator> {
        let grid = Arc::new(self.grid(m)?);
        let labels = label_boundary(&grid, &(self.boundary)(&self.exact))?;
        assemble(grid.clone(), &CoefficientField::laplacian(grid.dim()), &labels)
    }

    /// Discrete solution at level `m`.
    pub fn solve(&self, m: usize) -> Result<(DiscreteOperator, Field)> {
        let op = self.operator(m)?;
        let f = Field::sample(op.grid(), &self.load);
        let u = match self.kind {
            CaseKind::Poisson => solve_dirichlet(&op, &f)?,
            CaseKind::Signorini => {
                let sol = solve_signorini(&op, &f, &ViOptions::pdas().with_tol(1e-10))?;
                if !sol.converged() {
                    return Err(Error::Oracle(format!("{}: contact solve did not converge at m = {m}", self.name)));
                }
                sol.u
            }
        };
        Ok((op, u))
    }

    /// Error of `u` against the exact solution over the grid nodes, leaving
    /// out the singular node and its neighbours.
    pub fn error(&self, grid: &Grid, u: &Field) -> f64 {
        let h = grid.h();
        let near = |x: [f64; 2]| match self.singular_point {
            Some(p) => (0..grid.dim()).all(|k| (x[k] - p[k]).abs() <= h[k] * 1.000001),
            None => false,
        };
        let diffs = grid
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| !near(n.x))
            .map(|(k, n)| (u[k] - self.exact.eval(n.x)).abs());
        match self.norm {
            ErrorNorm::NodalMax => diffs.fold(0.0, f64::max),
            ErrorNorm::DiscreteL2 => {
                let cell: f64 = h.iter().product();
                (diffs.map(|d| d * d).sum::<f64>() * cell).sqrt()
            }
        }
    }
}

fn smooth_grid(m: usize) -> Result<Grid> {
    Grid::rectangle((0.0, 1.0), (0.0, 1.0), [m - 1, m - 1])
}

fn lshape_grid(m: usize) -> Result<Grid> {
    Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [2 * m - 1, 2 * m - 1])
}

fn contact_grid(m: usize) -> Result<Grid> {
    Grid::rectangle((-1.0, 1.0), (0.0, 1.0), [2 * m - 1, m - 1])
}

fn dirichlet_exact(exact: &ScalarFn) -> BoundarySpec {
    BoundarySpec::new().with("boundary", Selector::All, BoundaryCondition::Dirichlet(exact.clone()))
}

fn contact_boundary(exact: &ScalarFn) -> BoundarySpec {
    BoundarySpec::new()
        .with(
            "contact",
            Selector::SideRange { side: Side::South, lo: -1.0, hi: 0.0 },
            BoundaryCondition::Signorini(0.0.into()),
        )
        .with(
            "free",
            Selector::SideRange { side: Side::South, lo: 0.0, hi: 1.0 },
            BoundaryCondition::Neumann(0.0.into()),
        )
        .with("outer", Selector::All, BoundaryCondition::Dirichlet(exact.clone()))
}

/// Angle in `[0, 2π)`.
fn angle(x: [f64; 2]) -> f64 {
    let t = x[1].atan2(x[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// `sin πx sin πy` on the unit square.
pub fn smooth_square() -> AnalyticCase {
    AnalyticCase {
        name: "smooth_square",
        kind: CaseKind::Poisson,
        exact: ScalarFn::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin()),
        load: ScalarFn::new(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()),
        expected_rate_window: (1.9, 2.1),
        norm: ErrorNorm::NodalMax,
        levels: vec![8, 16, 32, 64],
        singular_point: None,
        grid: smooth_grid,
        boundary: dirichlet_exact,
    }
}

/// Harmonic `ρ^{2/3} sin(2θ/3)` on the L-shaped domain with the reentrant
/// corner at the origin.
pub fn lshape_corner() -> AnalyticCase {
    AnalyticCase {
        name: "lshape_corner",
        kind: CaseKind::Poisson,
        exact: ScalarFn::new(|x| {
            let r = x[0].hypot(x[1]);
            if r == 0.0 {
                return 0.0;
            }
            // the removed quadrant is x1 > 0, x2 < 0, so θ runs over [0, 3π/2]
            r.powf(2.0 / 3.0) * (2.0 * angle(x) / 3.0).sin()
        }),
        load: ScalarFn::zero(),
        expected_rate_window: (0.5, 1.5),
        norm: ErrorNorm::NodalMax,
        levels: vec![8, 16, 32, 64],
        singular_point: Some([0.0, 0.0]),
        grid: lshape_grid,
        boundary: dirichlet_exact,
    }
}

/// Harmonic `−ρ^{1/2} cos(θ/2)` on `[−1,1]×[0,1]`: in contact with the
/// obstacle `u ≥ 0` on the left half of the bottom edge, traction free on the
/// right half.
pub fn kinderlehrer_signorini() -> AnalyticCase {
    AnalyticCase {
        name: "kinderlehrer_signorini",
        kind: CaseKind::Signorini,
        exact: ScalarFn::new(|x| {
            let r = x[0].hypot(x[1]);
            -r.sqrt() * (angle(x) / 2.0).cos()
        }),
        load: ScalarFn::zero(),
        expected_rate_window: (0.3, 1.5),
        norm: ErrorNorm::NodalMax,
        levels: vec![8, 16, 32, 64],
        singular_point: Some([0.0, 0.0]),
        grid: contact_grid,
        boundary: contact_boundary,
    }
}

pub const CASE_NAMES: [&str; 3] = ["smooth_square", "lshape_corner", "kinderlehrer_signorini"];

pub fn case_by_name(name: &str) -> Result<AnalyticCase> {
    match name {
        "smooth_square" => Ok(smooth_square()),
        "lshape_corner" => Ok(lshape_corner()),
        "kinderlehrer_signorini" => Ok(kinderlehrer_signorini()),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelError {
    pub m: usize,
    pub h: f64,
    pub unknowns: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub case: String,
    pub norm: ErrorNorm,
    pub levels: Vec<LevelError>,
    /// Least-squares slope of `log error` against `log h`.
    pub order: f64,
    pub window: (f64, f64),
    pub within_window: bool,
}

/// Least-squares slope of `log e` against `log h`.
pub fn observed_order(h: &[f64], e: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Solves the case on each refinement level and fits the observed order.
pub fn run_convergence_study(case: &AnalyticCase, refinements: &[usize]) -> Result<ConvergenceStudy> {
    if refinements.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a convergence study needs at least 3 levels, got {}",
            refinements.len()
        )));
    }
    let mut levels = Vec::with_capacity(refinements.len());
    for &m in refinements {
        if m < 2 {
            return Err(Error::InvalidParameter(format!("refinement level {m} is too coarse")));
        }
        let (op, u) = case.solve(m)?;
        levels.push(LevelError {
            m,
            h: 1.0 / m as f64,
            unknowns: op.n_dofs(),
            error: case.error(op.grid(), &u),
        });
    }
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let e: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let order = observed_order(&h, &e);
    let (lo, hi) = case.expected_rate_window;
    Ok(ConvergenceStudy {
        case: case.name.to_string(),
        norm: case.norm,
        levels,
        order,
        window: case.expected_rate_window,
        within_window: order >= lo && order <= hi,
    })
}
