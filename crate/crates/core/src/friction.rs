//! Variational inequalities of the second kind with a Tresca friction term,
//! optionally restricted to a sign cone.
//!
//! The discrete problem is
//!
//! ```text
//! minimize ½ uᵀAu − bᵀu + Σ_i G_i |u_i|   over u ∈ K,
//! ```
//!
//! where `G_i = w_i g_i` combines the friction bound with the nodal quadrature
//! weight and `K` imposes `u_i ≥ 0` or `u_i ≤ 0` on selected unknowns. With the
//! total reaction `ℓ = b − A u`, optimality says that on every nonsmooth unknown
//! `ℓ_i` lies in an interval `[lo_i, hi_i]`: `[−G, G]` for plain friction, open
//! on one side under a sign constraint. A sticking unknown has `u_i = 0`, a
//! slipping one sits at an end of the interval. The reaction splits as
//! `ℓ = p + λ` with `|p| ≤ G` the friction force and `λ` in the polar cone.

use serde::Serialize;

use crate::assembly::{check_len, DiscreteOperator};
use crate::error::{Error, Result};
use crate::field::{Field, ScalarFn};
use crate::report::{ConvergenceReport, Termination, Trace};
use crate::sparse::{self, CsrMatrix, EnvelopeCholesky};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeSign {
    Free,
    Nonnegative,
    Nonpositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContactState {
    #[serde(rename = "stick")]
    Stick,
    #[serde(rename = "slip+")]
    SlipPlus,
    #[serde(rename = "slip-")]
    SlipMinus,
}

impl ContactState {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactState::Stick => "stick",
            ContactState::SlipPlus => "slip+",
            ContactState::SlipMinus => "slip-",
        }
    }
}

/// Friction data on a set of unknowns of an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionSpec {
    /// Unknowns (dof indices) carrying friction, strictly increasing.
    pub nodes: Vec<usize>,
    /// Friction bound `g > 0` per friction node.
    pub g: Vec<f64>,
    /// Quadrature weight per friction node.
    pub weights: Vec<f64>,
    /// Sign set per unknown (all unknowns, not only friction nodes).
    pub cone: Option<Vec<ConeSign>>,
}

impl FrictionSpec {
    pub fn new(nodes: Vec<usize>, g: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if g.len() != nodes.len() || weights.len() != nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: nodes.len(),
                got: g.len().min(weights.len()),
            });
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFriction("friction nodes must be strictly increasing".into()));
        }
        if let Some(k) = g.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidFriction(format!(
                "friction bound must be positive, got {} at node {}",
                g[k], nodes[k]
            )));
        }
        if let Some(k) = weights.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidFriction(format!(
                "quadrature weight must be positive, got {} at node {}",
                weights[k], nodes[k]
            )));
        }
        Ok(Self {
            nodes,
            g,
            weights,
            cone: None,
        })
    }

    /// Friction on every unknown of the domain, weighted like the load.
    pub fn on_domain(op: &DiscreteOperator, g: &ScalarFn) -> Result<Self> {
        let nodes: Vec<usize> = (0..op.n_dofs()).collect();
        let gv = op.dof_nodes().iter().map(|&n| g.eval(op.grid().node(n).x)).collect();
        Self::new(nodes, gv, op.load_weights().to_vec())
    }

    /// Friction on the unknowns of one boundary segment, weighted by boundary
    /// length.
    pub fn on_segment(op: &DiscreteOperator, segment: &str, g: &ScalarFn) -> Result<Self> {
        let mut nodes: Vec<usize> = op
            .labeling()
            .nodes_of(segment)?
            .into_iter()
            .filter_map(|n| op.dof_of(n))
            .collect();
        nodes.sort_unstable();
        if nodes.is_empty() {
            return Err(Error::InvalidFriction(format!("segment `{segment}` has no unknowns")));
        }
        let gv = nodes
            .iter()
            .map(|&d| g.eval(op.grid().node(op.dof_nodes()[d]).x))
            .collect();
        let w = nodes.iter().map(|&d| op.boundary_weights()[d]).collect();
        Self::new(nodes, gv, w)
    }

    pub fn with_cone(mut self, cone: Vec<ConeSign>) -> Self {
        self.cone = Some(cone);
        self
    }

    /// Same problem with every friction bound multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let mut out = Self::new(
            self.nodes.clone(),
            self.g.iter().map(|g| g * t).collect(),
            self.weights.clone(),
        )?;
        out.cone = self.cone.clone();
        Ok(out)
    }

    /// Weighted bound `G = w g` per unknown (zero off the friction set).
    pub fn bound_per_dof(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for ((&i, &g), &w) in self.nodes.iter().zip(&self.g).zip(&self.weights) {
            out[i] = w * g;
        }
        out
    }

    fn cone_per_dof(&self, n: usize) -> Vec<ConeSign> {
        self.cone.clone().unwrap_or_else(|| vec![ConeSign::Free; n])
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let Some(&last) = self.nodes.last() {
            if last >= n {
                return Err(Error::InvalidFriction(format!(
                    "friction node {last} out of range for {n} unknowns"
                )));
            }
        }
        if let Some(c) = &self.cone {
            check_len(n, c.len())?;
        }
        Ok(())
    }
}

/// Interval for the reaction at a sticking unknown.
fn reaction_interval(bound: f64, sign: ConeSign) -> (f64, f64) {
    match sign {
        ConeSign::Free => (-bound, bound),
        ConeSign::Nonnegative => (f64::NEG_INFINITY, bound),
        ConeSign::Nonpositive => (-bound, f64::INFINITY),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FrictionResiduals {
    /// `‖A u + p + λ − b‖∞`.
    pub stationarity: f64,
    /// `max (|p_i| − G_i)₊`.
    pub box_violation: f64,
    /// `max |p_i u_i − G_i |u_i||`.
    pub alignment: f64,
    /// Largest violation of `u ∈ K`.
    pub cone_feasibility: f64,
    /// Largest violation of `λ ∈ K⁻`.
    pub cone_sign: f64,
    /// `|⟨λ, u⟩|`.
    pub cone_comp: f64,
}

impl FrictionResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.box_violation,
            self.alignment,
            self.cone_feasibility,
            self.cone_sign,
            self.cone_comp,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone)]
pub struct FrictionSolution {
    pub u: Field,
    /// Friction force per friction node.
    pub p: Vec<f64>,
    /// Cone multiplier per unknown; `None` without a cone.
    pub lambda: Option<Vec<f64>>,
    /// Contact state per friction node.
    pub states: Vec<ContactState>,
    pub residuals: FrictionResiduals,
    pub report: ConvergenceReport,
    /// Whether the Uzawa fallback produced the result.
    pub used_fallback: bool,
}

impl FrictionSolution {
    pub fn converged(&self) -> bool {
        self.report.converged()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrictionMethod {
    /// Semismooth Newton, falling back to Uzawa if it cycles.
    SemismoothNewton,
    Uzawa,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionOptions {
    pub method: FrictionMethod,
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Newton indicator scaling; defaults to the largest diagonal entry.
    pub c: Option<f64>,
}

impl Default for FrictionOptions {
    fn default() -> Self {
        Self {
            method: FrictionMethod::SemismoothNewton,
            tol: 1e-8,
            max_iter: None,
            c: None,
        }
    }
}

/// Algebraic solution: unknowns, reaction `ℓ = b − A u`, per-unknown state.
#[derive(Debug, Clone)]
pub struct ReactionSolution {
    pub u: Vec<f64>,
    pub reaction: Vec<f64>,
    pub report: ConvergenceReport,
    pub used_fallback: bool,
}

struct Problem<'a> {
    a: &'a CsrMatrix,
    b: &'a [f64],
    /// Nonsmooth unknowns with their reaction intervals.
    nonsmooth: Vec<(usize, f64, f64)>,
}

impl Problem<'_> {
    /// Max violation of the optimality conditions for `(u, ℓ)` with
    /// `ℓ = b − A u` exactly on smooth rows.
    fn optimality_gap(&self, u: &[f64], reaction: &[f64]) -> f64 {
        let mut gap = 0.0f64;
        for &(i, lo, hi) in &self.nonsmooth {
            let l = reaction[i];
            gap = gap.max(lo - l).max(l - hi);
            // u > 0 needs ℓ = hi, u < 0 needs ℓ = lo
            if u[i] > 0.0 {
                gap = gap.max(if hi.is_finite() { (hi - l) * u[i] } else { f64::INFINITY });
            } else if u[i] < 0.0 {
                gap = gap.max(if lo.is_finite() { (l - lo) * -u[i] } else { f64::INFINITY });
            }
        }
        gap
    }
}

pub fn solve_reaction_system(
    a: &CsrMatrix,
    b: &[f64],
    bound: &[f64],
    cone: &[ConeSign],
    opts: &FrictionOptions,
) -> Result<ReactionSolution> {
    let n = a.nrows();
    check_len(n, b.len())?;
    check_len(n, bound.len())?;
    check_len(n, cone.len())?;
    let nonsmooth = (0..n)
        .filter(|&i| bound[i] > 0.0 || cone[i] != ConeSign::Free)
        .map(|i| {
            let (lo, hi) = reaction_interval(bound[i], cone[i]);
            (i, lo, hi)
        })
        .collect();
    let problem = Problem { a, b, nonsmooth };
    match opts.method {
        FrictionMethod::SemismoothNewton => match newton(&problem, opts)? {
            Some(sol) => Ok(sol),
            None => uzawa(&problem, opts, true),
        },
        FrictionMethod::Uzawa => uzawa(&problem, opts, false),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Phase {
    Stick,
    Upper,
    Lower,
}

/// Semismooth Newton on `ℓ = proj_[lo,hi](ℓ + c u)`; `None` when the state
/// sequence cycles or runs out of iterations.
fn newton(p: &Problem, opts: &FrictionOptions) -> Result<Option<ReactionSolution>> {
    let n = p.a.nrows();
    let c = opts.c.unwrap_or_else(|| p.a.diagonal().iter().cloned().fold(0.0, f64::max));
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("indicator scaling c = {c} must be positive")));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1) + 20);
    let mut trace = Trace::start();
    let mut u = sparse::solve_spd(p.a, p.b)?;
    let mut reaction = vec![0.0; n];
    let mut phases: Option<Vec<Phase>> = None;
    let mut seen = std::collections::HashSet::new();
    for k in 1..=max_iter {
        let tie = 64.0
            * f64::EPSILON
            * (sparse::norm_inf(p.b) + c * sparse::norm_inf(&u) + sparse::norm_inf(&reaction));
        let next: Vec<Phase> = p
            .nonsmooth
            .iter()
            .map(|&(i, lo, hi)| {
                let t = reaction[i] + c * u[i];
                if t > hi + tie {
                    Phase::Upper
                } else if t < lo - tie {
                    Phase::Lower
                } else {
                    Phase::Stick
                }
            })
            .collect();
        if phases.as_ref() == Some(&next) {
            let gap = p.optimality_gap(&u, &reaction);
            trace.push(k, gap, 1.0);
            if gap <= opts.tol {
                return Ok(Some(ReactionSolution {
                    u,
                    reaction,
                    report: trace.finish(Termination::Converged),
                    used_fallback: false,
                }));
            }
            return Ok(None);
        }
        if !seen.insert(next.clone()) {
            return Ok(None);
        }
        let mut fixed = vec![false; n];
        let mut rhs = p.b.to_vec();
        for (&(i, lo, hi), &ph) in p.nonsmooth.iter().zip(&next) {
            match ph {
                Phase::Stick => fixed[i] = true,
                Phase::Upper => rhs[i] -= hi,
                Phase::Lower => rhs[i] -= lo,
            }
        }
        u = sparse::solve_with_fixed(p.a, &rhs, &fixed, &vec![0.0; n])?;
        let au = p.a.mul_vec(&u);
        reaction.iter_mut().for_each(|v| *v = 0.0);
        for (&(i, lo, hi), &ph) in p.nonsmooth.iter().zip(&next) {
            reaction[i] = match ph {
                Phase::Stick => p.b[i] - au[i],
                Phase::Upper => hi,
                Phase::Lower => lo,
            };
        }
        trace.push(k, p.optimality_gap(&u, &reaction), 1.0);
        phases = Some(next);
    }
    Ok(None)
}

/// Largest eigenvalue of the reaction-to-displacement map `B A⁻¹ Bᵀ`
/// restricted to the nonsmooth unknowns, by power iteration.
fn dual_operator_norm(p: &Problem, chol: &EnvelopeCholesky) -> f64 {
    let n = p.a.nrows();
    let mut x = vec![0.0; n];
    for (k, &(i, _, _)) in p.nonsmooth.iter().enumerate() {
        x[i] = 1.0 + 0.01 * (k % 5) as f64;
    }
    let mut mu = 0.0;
    for _ in 0..200 {
        let nx = sparse::norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = chol.solve(&x);
        let mut next = vec![0.0; n];
        for &(i, _, _) in &p.nonsmooth {
            next[i] = y[i];
        }
        let m = sparse::dot(&x, &next);
        x = next;
        if (m - mu).abs() <= 1e-10 * m {
            return m;
        }
        mu = m;
    }
    mu
}

/// Projected gradient ascent on the dual: `ℓ ← proj(ℓ + ρ u(ℓ))` with
/// `u(ℓ) = A⁻¹(b − ℓ)`.
fn uzawa(p: &Problem, opts: &FrictionOptions, fallback: bool) -> Result<ReactionSolution> {
    let n = p.a.nrows();
    let chol = EnvelopeCholesky::factor(p.a)?;
    let rho = 1.0 / (1.05 * dual_operator_norm(p, &chol)).max(f64::MIN_POSITIVE);
    let max_iter = opts.max_iter.map_or(2000 * n.max(1) + 1000, |m| m.max(1) * 200);
    let mut trace = Trace::start();
    let mut reaction = vec![0.0; n];
    let mut u = chol.solve(p.b);
    let mut terminated = Termination::MaxIter;
    for k in 1..=max_iter {
        for &(i, lo, hi) in &p.nonsmooth {
            reaction[i] = (reaction[i] + rho * u[i]).clamp(lo, hi);
        }
        let rhs: Vec<f64> = p.b.iter().zip(&reaction).map(|(b, l)| b - l).collect();
        let trial = chol.solve(&rhs);
        let gap = p.optimality_gap(&trial, &reaction);
        let sticking = p
            .nonsmooth
            .iter()
            .filter(|&&(i, lo, hi)| reaction[i] > lo && reaction[i] < hi)
            .map(|&(i, _, _)| trial[i].abs())
            .fold(0.0, f64::max);
        trace.push(k, gap.max(sticking), rho);
        u = trial;
        if gap.max(sticking) <= opts.tol * 1e-2 {
            terminated = Termination::Converged;
            break;
        }
    }
    // snap sticking unknowns to zero and re-solve so the primal equations hold
    let mut fixed = vec![false; n];
    let mut rhs = p.b.to_vec();
    for &(i, lo, hi) in &p.nonsmooth {
        if reaction[i] > lo && reaction[i] < hi {
            fixed[i] = true;
        } else {
            rhs[i] -= reaction[i];
        }
    }
    if terminated == Termination::Converged {
        let snapped = sparse::solve_with_fixed(p.a, &rhs, &fixed, &vec![0.0; n])?;
        let au = p.a.mul_vec(&snapped);
        let mut r2 = reaction.clone();
        for &(i, _, _) in &p.nonsmooth {
            if fixed[i] {
                r2[i] = p.b[i] - au[i];
            }
        }
        if p.optimality_gap(&snapped, &r2) <= opts.tol {
            u = snapped;
            reaction = r2;
        }
    }
    Ok(ReactionSolution {
        u,
        reaction,
        report: trace.finish(terminated),
        used_fallback: fallback,
    })
}

/// Splits the reaction into friction force and cone multiplier.
fn split(reaction: &[f64], bound: &[f64], spec: &FrictionSpec, cone: &[ConeSign]) -> (Vec<f64>, Option<Vec<f64>>) {
    let p: Vec<f64> = spec
        .nodes
        .iter()
        .map(|&i| {
            if cone[i] == ConeSign::Free {
                reaction[i]
            } else {
                reaction[i].clamp(-bound[i], bound[i])
            }
        })
        .collect();
    let lambda = spec.cone.as_ref().map(|_| {
        let mut pf = vec![0.0; reaction.len()];
        for (&i, &pi) in spec.nodes.iter().zip(&p) {
            pf[i] = pi;
        }
        (0..reaction.len())
            .map(|i| if cone[i] == ConeSign::Free { 0.0 } else { reaction[i] - pf[i] })
            .collect()
    });
    (p, lambda)
}

fn solve(op: &DiscreteOperator, f: &Field, spec: &FrictionSpec, opts: &FrictionOptions) -> Result<FrictionSolution> {
    let n = op.n_dofs();
    spec.validate(n)?;
    let b = op.rhs(f)?;
    let bound = spec.bound_per_dof(n);
    let cone = spec.cone_per_dof(n);
    let sol = solve_reaction_system(op.matrix(), &b, &bound, &cone, opts)?;
    let (p, lambda) = split(&sol.reaction, &bound, spec, &cone);
    let states = spec
        .nodes
        .iter()
        .map(|&i| {
            if sol.u[i] > 0.0 {
                ContactState::SlipPlus
            } else if sol.u[i] < 0.0 {
                ContactState::SlipMinus
            } else {
                ContactState::Stick
            }
        })
        .collect();
    let u = op.expand(&sol.u)?;
    let residuals = residuals(op.matrix(), &b, spec, &sol.u, &p, lambda.as_deref());
    Ok(FrictionSolution {
        u,
        p,
        lambda,
        states,
        residuals,
        report: sol.report,
        used_fallback: sol.used_fallback,
    })
}

/// Friction problem without a sign cone.
pub fn solve_vi2(op: &DiscreteOperator, f: &Field, spec: &FrictionSpec, opts: &FrictionOptions) -> Result<FrictionSolution> {
    if spec.cone.is_some() {
        return Err(Error::InvalidFriction("a cone is given; use the cone-constrained solver".into()));
    }
    solve(op, f, spec, opts)
}

/// Friction problem restricted to the cone of `spec`.
pub fn solve_vi3(op: &DiscreteOperator, f: &Field, spec: &FrictionSpec, opts: &FrictionOptions) -> Result<FrictionSolution> {
    if spec.cone.is_none() {
        return Err(Error::InvalidFriction("no cone given".into()));
    }
    solve(op, f, spec, opts)
}

fn residuals(
    a: &CsrMatrix,
    b: &[f64],
    spec: &FrictionSpec,
    u: &[f64],
    p: &[f64],
    lambda: Option<&[f64]>,
) -> FrictionResiduals {
    let n = u.len();
    let mut r: Vec<f64> = a.mul_vec(u).iter().zip(b).map(|(x, y)| x - y).collect();
    let mut res = FrictionResiduals::default();
    for (k, &i) in spec.nodes.iter().enumerate() {
        let bound = spec.weights[k] * spec.g[k];
        r[i] += p[k];
        res.box_violation = res.box_violation.max(p[k].abs() - bound);
        res.alignment = res.alignment.max((p[k] * u[i] - bound * u[i].abs()).abs());
    }
    let cone = spec.cone_per_dof(n);
    for i in 0..n {
        res.cone_feasibility = res.cone_feasibility.max(match cone[i] {
            ConeSign::Free => 0.0,
            ConeSign::Nonnegative => -u[i],
            ConeSign::Nonpositive => u[i],
        });
    }
    if let Some(l) = lambda {
        let mut inner = 0.0;
        for i in 0..n {
            r[i] += l[i];
            inner += l[i] * u[i];
            res.cone_sign = res.cone_sign.max(match cone[i] {
                ConeSign::Free => l[i].abs(),
                ConeSign::Nonnegative => l[i],
                ConeSign::Nonpositive => -l[i],
            });
        }
        res.cone_comp = inner.abs();
    }
    res.stationarity = r.iter().fold(0.0, |m, v| m.max(v.abs()));
    res
}

/// Recomputes every residual of a candidate solution from scratch.
pub fn verify_mp2_mp3(op: &DiscreteOperator, f: &Field, spec: &FrictionSpec, sol: &FrictionSolution) -> Result<FrictionResiduals> {
    let n = op.n_dofs();
    spec.validate(n)?;
    check_len(spec.nodes.len(), sol.p.len())?;
    if let Some(l) = &sol.lambda {
        check_len(n, l.len())?;
    }
    let b = op.rhs(f)?;
    let u = op.restrict(&sol.u)?;
    Ok(residuals(op.matrix(), &b, spec, &u, &sol.p, sol.lambda.as_deref()))
}

/// `½ uᵀAu − bᵀu + Σ G_i |u_i|` on the unknowns of `u`.
pub fn friction_energy(u: &Field, f: &Field, op: &DiscreteOperator, spec: &FrictionSpec) -> Result<f64> {
    let v = op.restrict(u)?;
    let b = op.rhs(f)?;
    let av = op.matrix().mul_vec(&v);
    let quad = 0.5 * sparse::dot(&v, &av) - sparse::dot(&b, &v);
    let phi: f64 = spec
        .nodes
        .iter()
        .zip(spec.g.iter().zip(&spec.weights))
        .map(|(&i, (g, w))| w * g * v[i].abs())
        .sum();
    Ok(quad + phi)
}

/// `Σ G_i |u_i|`, the discrete friction functional.
pub fn friction_functional(u: &[f64], spec: &FrictionSpec) -> f64 {
    spec.nodes
        .iter()
        .zip(spec.g.iter().zip(&spec.weights))
        .map(|(&i, (g, w))| w * g * u[i].abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assembly::{assemble, CoefficientField};
    use crate::mesh::{label_boundary, BoundarySpec, Grid};

    /// One unknown with `A = [2]` and `b = f`.
    fn scalar_op() -> DiscreteOperator {
        let grid = Arc::new(Grid::interval(0.0, 2.0, 1).unwrap());
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        assemble(grid, &CoefficientField::laplacian(1), &labels).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        let op = scalar_op();
        assert_eq!(op.matrix().get(0, 0), 2.0);
        let spec = FrictionSpec::on_domain(&op, &ScalarFn::constant(1.0)).unwrap();
        for method in [FrictionMethod::SemismoothNewton, FrictionMethod::Uzawa] {
            let opts = FrictionOptions { method, ..Default::default() };
            let s = solve_vi2(&op, &Field::constant(op.grid(), 5.0), &spec, &opts).unwrap();
            assert!((s.u[1] - 2.0).abs() < 1e-12 && (s.p[0] - 1.0).abs() < 1e-12, "{method:?}");
            assert_eq!(s.states, vec![ContactState::SlipPlus]);
            let s = solve_vi2(&op, &Field::constant(op.grid(), 0.5), &spec, &opts).unwrap();
            assert!(s.u[1].abs() < 1e-12 && (s.p[0] - 0.5).abs() < 1e-12, "{method:?}");
            assert_eq!(s.states, vec![ContactState::Stick]);
        }
    }

    #[test]
    fn energy_values() {
        let op = scalar_op();
        let spec = FrictionSpec::on_domain(&op, &ScalarFn::constant(1.0)).unwrap();
        let f = Field::constant(op.grid(), 5.0);
        assert_eq!(friction_energy(&Field::zeros(op.grid()), &f, &op, &spec).unwrap(), 0.0);
        let u = op.expand(&[2.0]).unwrap();
        assert_eq!(friction_energy(&u, &f, &op, &spec).unwrap(), -4.0);
    }

    #[test]
    fn rejects_nonpositive_bound() {
        assert!(FrictionSpec::new(vec![0], vec![0.0], vec![1.0]).is_err());
        assert!(FrictionSpec::new(vec![1, 0], vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
    }
}
