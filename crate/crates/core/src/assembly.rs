//! Finite-difference assembly of `L u = -div(a grad u) + a0 u` with diagonal
//! diffusion, and the linear solves that realize `L^{-1}`.
//!
//! Unknowns ("dofs") are every node that is not Dirichlet-labeled. Each row is
//! the flux balance over the node's dual cell, normalized by the full cell
//! area: away from the boundary this is the 5-point stencil, and at Neumann or
//! Signorini nodes it coincides with ghost-point elimination scaled by the
//! fraction of the cell inside the domain (1/2 on an edge, 1/4 at a corner,
//! 3/4 at a reentrant corner). The matrix is symmetric and the discrete system
//! reads `A u = w f + lift` with those load weights `w`.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Field, ScalarFn};
use crate::mesh::{BoundaryCondition, BoundaryLabeling, ConditionKind, DomainKind, Grid};
use crate::sparse::{self, CsrMatrix};

/// Coefficients of the operator: one diffusion function per axis and a
/// nonnegative reaction term.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub a_diag: Vec<ScalarFn>,
    pub a_zero: ScalarFn,
}

impl CoefficientField {
    pub fn laplacian(dim: usize) -> Self {
        Self {
            a_diag: vec![ScalarFn::constant(1.0); dim],
            a_zero: ScalarFn::zero(),
        }
    }

    pub fn with_reaction(mut self, a_zero: impl Into<ScalarFn>) -> Self {
        self.a_zero = a_zero.into();
        self
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    labeling: BoundaryLabeling,
    matrix: CsrMatrix,
    dof_nodes: Vec<usize>,
    node_dof: Vec<Option<usize>>,
    dirichlet: Vec<(usize, f64)>,
    lift: Vec<f64>,
    weights: Vec<f64>,
    boundary_weights: Vec<f64>,
    signorini: Vec<(usize, f64)>,
    alpha: f64,
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn labeling(&self) -> &BoundaryLabeling {
        &self.labeling
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_nodes.len()
    }

    /// Grid node of each unknown.
    pub fn dof_nodes(&self) -> &[usize] {
        &self.dof_nodes
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.node_dof[node]
    }

    /// Dirichlet nodes with their prescribed values.
    pub fn dirichlet(&self) -> &[(usize, f64)] {
        &self.dirichlet
    }

    /// Boundary-data part of the right-hand side.
    pub fn lift(&self) -> &[f64] {
        &self.lift
    }

    /// Load weight of each unknown: 1 inside, 1/2 on an edge, 1/4 at a corner.
    pub fn load_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Boundary length inside each unknown's dual cell divided by the full
    /// cell area: the nodal quadrature weight of boundary integrals.
    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    /// Signorini unknowns (dof index) with their gaps.
    pub fn signorini(&self) -> &[(usize, f64)] {
        &self.signorini
    }

    /// Smallest sampled diffusion coefficient.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Right-hand side `w f + lift` for a load given at every node.
    pub fn rhs(&self, f: &Field) -> Result<Vec<f64>> {
        f.ensure_on(&self.grid)?;
        Ok(self
            .dof_nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.lift)
            .map(|((&n, &w), &l)| w * f[n] + l)
            .collect())
    }

    /// Nodal field from unknowns, with Dirichlet data filled in.
    pub fn expand(&self, dofs: &[f64]) -> Result<Field> {
        check_len(self.n_dofs(), dofs.len())?;
        let mut values = vec![0.0; self.grid.num_nodes()];
        for (&n, &v) in self.dof_nodes.iter().zip(dofs) {
            values[n] = v;
        }
        for &(n, v) in &self.dirichlet {
            values[n] = v;
        }
        Field::from_values(&self.grid, values)
    }

    pub fn restrict(&self, field: &Field) -> Result<Vec<f64>> {
        field.ensure_on(&self.grid)?;
        Ok(self.dof_nodes.iter().map(|&n| field[n]).collect())
    }

    /// Matrix Market dump (symmetric coordinate format, lower triangle).
    pub fn write_matrix_market(&self, mut out: impl Write) -> io::Result<()> {
        let lower: Vec<(usize, usize, f64)> =
            self.matrix.triplets().filter(|&(i, j, _)| j <= i).collect();
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "{} {} {}", self.matrix.nrows(), self.matrix.ncols(), lower.len())?;
        for (i, j, v) in lower {
            writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub fn assemble(
    grid: Arc<Grid>,
    coeffs: &CoefficientField,
    labeling: &BoundaryLabeling,
) -> Result<DiscreteOperator> {
    let dim = grid.dim();
    if labeling.grid_id() != grid.id() {
        return Err(Error::InvalidGrid("boundary labeling belongs to a different grid".into()));
    }
    if coeffs.a_diag.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: coeffs.a_diag.len(),
        });
    }

    let mut alpha = f64::INFINITY;
    let mut reaction = Vec::with_capacity(grid.num_nodes());
    for (id, node) in grid.nodes().iter().enumerate() {
        for a in &coeffs.a_diag {
            let v = a.eval(node.x);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Ellipticity { node: id, value: v });
            }
            alpha = alpha.min(v);
        }
        let r = coeffs.a_zero.eval(node.x);
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::NegativeReaction { node: id, value: r });
        }
        reaction.push(r);
    }
    if labeling.count_of(ConditionKind::Dirichlet) == 0 && reaction.iter().all(|&r| r == 0.0) {
        return Err(Error::NotCoercive);
    }

    let mut node_dof = vec![None; grid.num_nodes()];
    let mut dof_nodes = Vec::new();
    let mut dirichlet = Vec::new();
    let mut dirichlet_value = vec![0.0; grid.num_nodes()];
    for (id, node) in grid.nodes().iter().enumerate() {
        match labeling.condition_of(id) {
            Some(BoundaryCondition::Dirichlet(g)) => {
                let v = g.eval(node.x);
                dirichlet_value[id] = v;
                dirichlet.push((id, v));
            }
            _ => {
                node_dof[id] = Some(dof_nodes.len());
                dof_nodes.push(id);
            }
        }
    }

    let h = grid.h().to_vec();
    let mut triplets = Vec::with_capacity(dof_nodes.len() * (2 * dim + 1));
    let mut lift = vec![0.0; dof_nodes.len()];
    let mut weights = vec![1.0; dof_nodes.len()];
    let mut boundary_weights = vec![0.0; dof_nodes.len()];
    let mut signorini = Vec::new();

    for (row, &node) in dof_nodes.iter().enumerate() {
        let x = grid.node(node).x;
        let cell = DualCell::new(&grid, node);
        let w = cell.area_fraction();
        weights[row] = w;
        boundary_weights[row] = cell.boundary_length(&h);
        let neumann = match labeling.condition_of(node) {
            Some(BoundaryCondition::Neumann(g)) => Some(g.eval(x)),
            _ => None,
        };

        let mut diag = w * reaction[node];
        for axis in 0..dim {
            let h2 = h[axis] * h[axis];
            for dir in [-1, 1] {
                let frac = cell.face_fraction(axis, dir);
                if let Some(nb) = grid.neighbor(node, axis, dir).filter(|_| frac > 0.0) {
                    let a = edge_coefficient(grid.kind(), &coeffs.a_diag[axis], x, grid.node(nb).x);
                    let c = frac * a / h2;
                    diag += c;
                    match node_dof[nb] {
                        Some(col) => triplets.push((row, col, -c)),
                        None => lift[row] += c * dirichlet_value[nb],
                    }
                }
            }
        }
        if let Some(g) = neumann {
            lift[row] += boundary_weights[row] * g;
        }
        triplets.push((row, row, diag));
        if let Some(BoundaryCondition::Signorini(gap)) = labeling.condition_of(node) {
            signorini.push((row, gap.eval(x)));
        }
    }

    let n = dof_nodes.len();
    Ok(DiscreteOperator {
        grid,
        labeling: labeling.clone(),
        matrix: CsrMatrix::from_triplets(n, n, triplets),
        dof_nodes,
        node_dof,
        dirichlet,
        lift,
        weights,
        boundary_weights,
        signorini,
        alpha,
    })
}

/// Which quarters of the dual cell `[x - h/2, x + h/2]` around a node lie in
/// the domain (halves in 1D). Quadrant `(sx, sy)` is inside when the lattice
/// square spanned by the node and its neighbors in those directions exists.
struct DualCell {
    dim: usize,
    inside: [[bool; 2]; 2],
}

impl DualCell {
    fn new(grid: &Grid, node: usize) -> Self {
        let dim = grid.dim();
        let [i, j] = grid.node(node).lattice;
        let (i, j) = (i as isize, j as isize);
        let mut inside = [[false; 2]; 2];
        for (a, sx) in [-1isize, 1].into_iter().enumerate() {
            for (b, sy) in [-1isize, 1].into_iter().enumerate() {
                inside[a][b] = if dim == 1 {
                    grid.node_at(i + sx, j).is_some()
                } else {
                    grid.node_at(i + sx, j).is_some()
                        && grid.node_at(i, j + sy).is_some()
                        && grid.node_at(i + sx, j + sy).is_some()
                };
            }
        }
        Self { dim, inside }
    }

    fn quadrant(&self, axis: usize, dir: isize, other: usize) -> bool {
        let d = usize::from(dir > 0);
        if axis == 0 {
            self.inside[d][other]
        } else {
            self.inside[other][d]
        }
    }

    fn area_fraction(&self) -> f64 {
        let count = self.inside.iter().flatten().filter(|&&b| b).count();
        count as f64 / 4.0
    }

    /// Fraction of the dual-cell face toward the neighbor at `dir` along `axis`
    /// that lies inside the domain.
    fn face_fraction(&self, axis: usize, dir: isize) -> f64 {
        let halves = (0..2).filter(|&o| self.quadrant(axis, dir, o)).count();
        halves as f64 / 2.0
    }

    /// Length of domain boundary inside the dual cell divided by its full area.
    fn boundary_length(&self, h: &[f64]) -> f64 {
        if self.dim == 1 {
            let missing = self.inside.iter().filter(|q| !q[0]).count();
            return missing as f64 / h[0];
        }
        let mut total = 0.0;
        for axis in 0..2 {
            for dir in [-1, 1] {
                // the half edge toward this neighbor is boundary when exactly
                // one of the two quadrants beside it is inside
                if self.quadrant(axis, dir, 0) != self.quadrant(axis, dir, 1) {
                    total += 0.5 / h[1 - axis];
                }
            }
        }
        total
    }
}

fn edge_coefficient(kind: DomainKind, a: &ScalarFn, x: [f64; 2], y: [f64; 2]) -> f64 {
    if kind == DomainKind::Interval {
        let (ax, ay) = (a.eval(x), a.eval(y));
        2.0 * ax * ay / (ax + ay)
    } else {
        a.eval([0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])])
    }
}

/// Relative residual accepted from the linear solver.
pub const LINEAR_TOL: f64 = 1e-10;

/// Solves `A u = w f + lift` and returns the full nodal field.
pub fn solve_dirichlet(op: &DiscreteOperator, f: &Field) -> Result<Field> {
    let b = op.rhs(f)?;
    let u = solve_system(op, &b)?;
    op.expand(&u)
}

/// Solves `A u = b` on the unknowns and checks the relative residual.
pub fn solve_system(op: &DiscreteOperator, b: &[f64]) -> Result<Vec<f64>> {
    check_len(op.n_dofs(), b.len())?;
    let u = sparse::solve_spd(&op.matrix, b)?;
    let bn = sparse::norm2(b);
    if bn > 0.0 {
        let r: Vec<f64> = op.matrix.mul_vec(&u).iter().zip(b).map(|(a, b)| a - b).collect();
        let rel = sparse::norm2(&r) / bn;
        if rel > LINEAR_TOL {
            return Err(Error::LinearSolver { residual: rel });
        }
    }
    Ok(u)
}

/// `A v` on the unknowns.
pub fn apply(op: &DiscreteOperator, v: &[f64]) -> Result<Vec<f64>> {
    check_len(op.n_dofs(), v.len())?;
    Ok(op.matrix.mul_vec(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{label_boundary, BoundarySpec, Selector, Side};

    fn dirichlet_op(grid: Grid, data: f64) -> DiscreteOperator {
        let grid = Arc::new(grid);
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(data)).unwrap();
        assemble(grid.clone(), &CoefficientField::laplacian(grid.dim()), &labels).unwrap()
    }

    #[test]
    fn one_dimensional_stencil() {
        let op = dirichlet_op(Grid::interval(0.0, 1.0, 3).unwrap(), 0.0);
        let a = op.matrix().to_dense();
        for i in 0..3 {
            assert_eq!(a[(i, i)], 32.0);
            if i + 1 < 3 {
                assert_eq!(a[(i, i + 1)], -16.0);
                assert_eq!(a[(i + 1, i)], -16.0);
            }
        }
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(apply(&op, &[1.0, 1.0, 1.0]).unwrap(), vec![16.0, 0.0, 16.0]);
        assert_eq!(apply(&op, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(apply(&op, &[0.0; 2]).is_err());
    }

    #[test]
    fn two_dimensional_stencil() {
        let op = dirichlet_op(Grid::rectangle((0.0, 1.0), (0.0, 1.0), [2, 2]).unwrap(), 0.0);
        let h2 = 1.0 / 9.0;
        let a = op.matrix().to_dense();
        for i in 0..4 {
            assert!((a[(i, i)] - 4.0 / h2).abs() < 1e-9);
            let off: f64 = (0..4).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
            assert!((off + 2.0 / h2).abs() < 1e-9);
        }
    }

    #[test]
    fn reaction_adds_to_diagonal_only() {
        let grid = Arc::new(Grid::interval(0.0, 1.0, 4).unwrap());
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        let plain = assemble(grid.clone(), &CoefficientField::laplacian(1), &labels).unwrap();
        let react = assemble(
            grid.clone(),
            &CoefficientField::laplacian(1).with_reaction(3.0),
            &labels,
        )
        .unwrap();
        let d = react.matrix().to_dense() - plain.matrix().to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d[(i, j)], if i == j { 3.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constants_are_reproduced() {
        let op = dirichlet_op(Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [7, 7]).unwrap(), 2.5);
        let u = solve_dirichlet(&op, &Field::zeros(op.grid())).unwrap();
        assert!(u.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn quadratic_is_exact_in_1d() {
        let op = dirichlet_op(Grid::interval(0.0, 1.0, 9).unwrap(), 0.0);
        let f = Field::constant(op.grid(), 2.0);
        let u = solve_dirichlet(&op, &f).unwrap();
        for (n, node) in op.grid().nodes().iter().enumerate() {
            let x = node.x[0];
            assert!((u[n] - x * (1.0 - x)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let grid = Arc::new(Grid::interval(0.0, 1.0, 3).unwrap());
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        let bad = CoefficientField {
            a_diag: vec![ScalarFn::new(|x| x[0] - 0.5)],
            a_zero: ScalarFn::zero(),
        };
        assert!(matches!(
            assemble(grid.clone(), &bad, &labels),
            Err(Error::Ellipticity { node: 0, .. })
        ));
        let neg = CoefficientField::laplacian(1).with_reaction(-1.0);
        assert!(matches!(
            assemble(grid.clone(), &neg, &labels),
            Err(Error::NegativeReaction { .. })
        ));
        let free = BoundarySpec::new().with("all", Selector::All, BoundaryCondition::Neumann(0.0.into()));
        let labels = label_boundary(&grid, &free).unwrap();
        assert!(matches!(
            assemble(grid, &CoefficientField::laplacian(1), &labels),
            Err(Error::NotCoercive)
        ));
    }

    #[test]
    fn neumann_rows_keep_symmetry_and_linear_exactness() {
        // u = 1 + 2 x1 - x2 is discretely harmonic; flux on the south side is -a du/dx2 = 1
        let grid = Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), [4, 5]).unwrap());
        let exact = |x: [f64; 2]| 1.0 + 2.0 * x[0] - x[1];
        let spec = BoundarySpec::new()
            .with("s", Selector::Side(Side::South), BoundaryCondition::Neumann(1.0.into()))
            .with("w", Selector::Side(Side::West), BoundaryCondition::Dirichlet(ScalarFn::new(exact)))
            .with("e", Selector::Side(Side::East), BoundaryCondition::Dirichlet(ScalarFn::new(exact)))
            .with("n", Selector::Side(Side::North), BoundaryCondition::Dirichlet(ScalarFn::new(exact)));
        let labels = label_boundary(&grid, &spec).unwrap();
        let op = assemble(grid.clone(), &CoefficientField::laplacian(2), &labels).unwrap();
        assert!(op.matrix().symmetry_defect() <= 1e-12 * op.matrix().max_abs());
        let u = solve_dirichlet(&op, &Field::zeros(&grid)).unwrap();
        for (n, node) in grid.nodes().iter().enumerate() {
            assert!((u[n] - exact(node.x)).abs() < 1e-10, "node {n}");
        }
    }

    #[test]
    fn variable_coefficient_symmetry() {
        let grid = Arc::new(Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [5, 7]).unwrap());
        let spec = BoundarySpec::new()
            .with("cut", Selector::Side(Side::InnerHorizontal), BoundaryCondition::Neumann(0.3.into()))
            .with("rest", Selector::All, BoundaryCondition::Dirichlet(0.0.into()));
        let labels = label_boundary(&grid, &spec).unwrap();
        let coeffs = CoefficientField {
            a_diag: vec![
                ScalarFn::new(|x| 1.0 + x[0] * x[0]),
                ScalarFn::new(|x| 2.0 + (x[1]).sin()),
            ],
            a_zero: ScalarFn::new(|x| x[0].abs()),
        };
        let op = assemble(grid, &coeffs, &labels).unwrap();
        assert!(op.matrix().symmetry_defect() <= 1e-12 * op.matrix().max_abs());
    }

    #[test]
    fn matrix_market_dump() {
        let op = dirichlet_op(Grid::interval(0.0, 1.0, 2).unwrap(), 0.0);
        let mut buf = Vec::new();
        op.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 18\n2 1 -9\n2 2 18\n"
        );
    }
}
