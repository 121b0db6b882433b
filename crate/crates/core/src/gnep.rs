//! Multiobjective elliptic optimal control as a jointly convex generalized
//! Nash game.
//!
//! Players share one state `y` solving `A y = f + Σ β_ν u^ν`. Each player ν
//! chooses a control `u^ν` in the box `[a^ν, b^ν]` and minimizes
//!
//! ```text
//! θ_ν = ½ Σ_{i observed by ν} q_i (y_i − g^ν_i)² + (γ_ν/2) Σ_i q_i (u^ν_i)²
//! ```
//!
//! while the state must stay in a common box `[a⁰, b⁰]`. In the multistate
//! variables `w^ν = A⁻¹(β_ν u^ν)` the state is `y = A⁻¹f + Σ w^μ` and
//! `u^ν = A w^ν / β_ν`, so every constraint is linear in `w` and no PDE solve
//! is needed inside the equilibrium iteration. Norms use the nodal quadrature
//! weight `q_i = Π h_k` over the unknowns; Dirichlet nodes are fixed and do not
//! enter the costs.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{check_len, DiscreteOperator};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::ConditionKind;
use crate::report::{ConvergenceReport, Termination, Trace};
use crate::sparse::EnvelopeCholesky;
use crate::vi::{solve_box_qp, LinearRows};

/// One value per unknown for every player.
pub type Strategy = Vec<Vec<f64>>;

const QP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Player {
    /// Control cost weight `γ > 0`.
    pub gamma: f64,
    /// Control gain `β > 0`.
    pub beta: f64,
    pub target: Field,
    /// Observed nodes (one flag per grid node).
    pub obs_mask: Vec<bool>,
    pub control_box: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct GnepInstance {
    op: DiscreteOperator,
    players: Vec<Player>,
    f: Field,
    state_box: (Field, Field),
    a: DMatrix<f64>,
    chol: EnvelopeCholesky,
    quad: f64,
    y0: Vec<f64>,
    lo0: Vec<f64>,
    hi0: Vec<f64>,
    /// Per player: quadrature weight on observed unknowns, zero elsewhere.
    obs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    /// `Aᵀ Q A` with `Q = q I`.
    aqa: DMatrix<f64>,
    start: Strategy,
}

impl GnepInstance {
    /// Validates the data and certifies feasibility with one projection QP.
    pub fn new(op: DiscreteOperator, players: Vec<Player>, f: Field, state_box: (Field, Field)) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::InvalidGnep("at least one player is required".into()));
        }
        let labels = op.labeling();
        if labels.count_of(ConditionKind::Neumann) + labels.count_of(ConditionKind::Signorini) > 0 {
            return Err(Error::InvalidGnep("the state equation must carry Dirichlet data only".into()));
        }
        let grid = op.grid();
        f.ensure_on(grid)?;
        state_box.0.ensure_on(grid)?;
        state_box.1.ensure_on(grid)?;
        for (nu, p) in players.iter().enumerate() {
            if !(p.gamma > 0.0 && p.gamma.is_finite()) || !(p.beta > 0.0 && p.beta.is_finite()) {
                return Err(Error::InvalidGnep(format!("player {nu}: gamma and beta must be positive")));
            }
            if !(p.control_box.0 <= p.control_box.1) {
                return Err(Error::InvalidGnep(format!("player {nu}: empty control box")));
            }
            p.target.ensure_on(grid)?;
            check_len(grid.num_nodes(), p.obs_mask.len())?;
        }
        let dofs = op.dof_nodes();
        let lo0: Vec<f64> = dofs.iter().map(|&n| state_box.0[n]).collect();
        let hi0: Vec<f64> = dofs.iter().map(|&n| state_box.1[n]).collect();
        if let Some(k) = (0..dofs.len()).find(|&k| !(lo0[k] < hi0[k])) {
            return Err(Error::InvalidGnep(format!("state box is empty at node {}", dofs[k])));
        }
        let chol = EnvelopeCholesky::factor(op.matrix())?;
        let y0 = chol.solve(&op.rhs(&f)?);
        let quad: f64 = grid.h().iter().product();
        let a = op.matrix().to_dense();
        let aqa = a.transpose() * &a * quad;
        let obs = players
            .iter()
            .map(|p| dofs.iter().map(|&n| if p.obs_mask[n] { quad } else { 0.0 }).collect())
            .collect();
        let targets = players.iter().map(|p| dofs.iter().map(|&n| p.target[n]).collect()).collect();
        let mut inst = Self {
            op,
            players,
            f,
            state_box,
            a,
            chol,
            quad,
            y0,
            lo0,
            hi0,
            obs,
            targets,
            aqa,
            start: Vec::new(),
        };
        let zero = vec![vec![0.0; inst.n()]; inst.num_players()];
        inst.start = if inst.violation(&zero) <= 1e-12 {
            zero
        } else {
            let n = inst.n() * inst.num_players();
            let rows = inst.joint_rows();
            let sol = solve_box_qp(
                &DMatrix::identity(n, n),
                &vec![0.0; n],
                &vec![f64::NEG_INFINITY; n],
                &vec![f64::INFINITY; n],
                Some(&rows),
                QP_TOL,
            )
            .map_err(|e| match e {
                Error::Infeasible(_) => Error::InvalidGnep("no control in the boxes keeps the state in its box".into()),
                other => other,
            })?;
            inst.split(&sol.x)
        };
        Ok(inst)
    }

    pub fn op(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn load(&self) -> &Field {
        &self.f
    }

    pub fn state_box(&self) -> (&Field, &Field) {
        (&self.state_box.0, &self.state_box.1)
    }

    /// Number of unknowns per player.
    pub fn n(&self) -> usize {
        self.op.n_dofs()
    }

    /// Nodal quadrature weight.
    pub fn quadrature(&self) -> f64 {
        self.quad
    }

    /// Uncontrolled state `A⁻¹ f` on the unknowns.
    pub fn free_state(&self) -> &[f64] {
        &self.y0
    }

    /// Dense copy of the state operator.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Observation weights of player ν on the unknowns.
    pub fn observation(&self, nu: usize) -> &[f64] {
        &self.obs[nu]
    }

    pub fn target_dofs(&self, nu: usize) -> &[f64] {
        &self.targets[nu]
    }

    /// State bounds on the unknowns.
    pub fn state_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo0, &self.hi0)
    }

    /// Feasible starting point: zero if admissible, else the least-norm
    /// feasible strategy.
    pub fn initial_strategy(&self) -> &Strategy {
        &self.start
    }

    fn check(&self, w: &Strategy) -> Result<()> {
        check_len(self.num_players(), w.len())?;
        w.iter().try_for_each(|v| check_len(self.n(), v.len()))
    }

    fn split(&self, flat: &[f64]) -> Strategy {
        flat.chunks(self.n()).map(|c| c.to_vec()).collect()
    }

    /// State `A⁻¹f + Σ w^μ` on the unknowns.
    pub fn state_of(&self, w: &Strategy) -> Vec<f64> {
        let mut y = self.y0.clone();
        for v in w {
            y.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        y
    }

    /// Control `A w^ν / β_ν` on the unknowns.
    pub fn control_of(&self, nu: usize, w: &[f64]) -> Vec<f64> {
        let aw = &self.a * DVector::from_column_slice(w);
        aw.iter().map(|v| v / self.players[nu].beta).collect()
    }

    /// Solves the state equation for given controls.
    pub fn solve_state(&self, u: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_len(self.num_players(), u.len())?;
        let mut rhs = self.op.rhs(&self.f)?;
        let weights = self.op.load_weights();
        for (nu, un) in u.iter().enumerate() {
            check_len(self.n(), un.len())?;
            for i in 0..self.n() {
                rhs[i] += weights[i] * self.players[nu].beta * un[i];
            }
        }
        Ok(self.chol.solve(&rhs))
    }

    /// Largest violation of the joint constraints.
    pub fn violation(&self, w: &Strategy) -> f64 {
        let mut worst = 0.0f64;
        for (nu, v) in w.iter().enumerate() {
            let (lo, hi) = self.players[nu].control_box;
            let beta = self.players[nu].beta;
            for c in self.control_of(nu, v) {
                worst = worst.max((lo - c) * beta).max((c - hi) * beta);
            }
        }
        for (i, y) in self.state_of(w).iter().enumerate() {
            worst = worst.max(self.lo0[i] - y).max(y - self.hi0[i]);
        }
        worst
    }

    fn control_rows(&self, nu: usize, offset: usize, rows: &mut LinearRows) {
        let (lo, hi) = self.players[nu].control_box;
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            return;
        }
        let beta = self.players[nu].beta;
        for i in 0..self.n() {
            let row = self.op.matrix().row(i).map(|(j, v)| (offset + j, v)).collect();
            rows.push(row, lo * beta, hi * beta);
        }
    }

    /// Rows describing the joint feasible set in the stacked variable.
    fn joint_rows(&self) -> LinearRows {
        let n = self.n();
        let mut rows = LinearRows::new();
        for nu in 0..self.num_players() {
            self.control_rows(nu, nu * n, &mut rows);
        }
        for i in 0..n {
            let (lo, hi) = (self.lo0[i] - self.y0[i], self.hi0[i] - self.y0[i]);
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                continue;
            }
            let row = (0..self.num_players()).map(|nu| (nu * n + i, 1.0)).collect();
            rows.push(row, lo, hi);
        }
        rows
    }

    /// Hessian of `θ_ν` in its own variable.
    fn own_hessian(&self, nu: usize) -> DMatrix<f64> {
        let p = &self.players[nu];
        let mut h = &self.aqa * (p.gamma / (p.beta * p.beta));
        for i in 0..self.n() {
            h[(i, i)] += self.obs[nu][i];
        }
        h
    }

    /// Linear term of `θ_ν(·, w^{−ν})`, i.e. `Q_ν (s − g^ν)` with `s` the
    /// state produced by everyone else.
    fn own_linear(&self, nu: usize, w: &Strategy) -> Vec<f64> {
        let mut s = self.y0.clone();
        for (mu, v) in w.iter().enumerate() {
            if mu != nu {
                s.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
        }
        (0..self.n()).map(|i| self.obs[nu][i] * (s[i] - self.targets[nu][i])).collect()
    }

    pub fn state_fields(&self, w: &Strategy, merit: f64) -> Result<GnepState> {
        self.check(w)?;
        let y = self.op.expand(&self.state_of(w))?;
        let wf = w.iter().map(|v| self.dof_field(v)).collect::<Result<Vec<_>>>()?;
        let uf = w
            .iter()
            .enumerate()
            .map(|(nu, v)| self.dof_field(&self.control_of(nu, v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GnepState {
            w: wf,
            y,
            u: uf,
            merit,
        })
    }

    fn dof_field(&self, v: &[f64]) -> Result<Field> {
        let mut values = vec![0.0; self.op.grid().num_nodes()];
        for (&n, &x) in self.op.dof_nodes().iter().zip(v) {
            values[n] = x;
        }
        Field::from_values(self.op.grid(), values)
    }

    /// Multistate variables of a state, back on the unknowns.
    pub fn strategy_of(&self, state: &GnepState) -> Result<Strategy> {
        check_len(self.num_players(), state.w.len())?;
        state
            .w
            .iter()
            .map(|f| {
                f.ensure_on(self.op.grid())?;
                Ok(self.op.dof_nodes().iter().map(|&n| f[n]).collect())
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GnepState {
    pub w: Vec<Field>,
    pub y: Field,
    pub u: Vec<Field>,
    /// Nikaido-Isoda merit at `w`.
    pub merit: f64,
}

/// Cost of player ν at the strategy `w`.
pub fn theta(inst: &GnepInstance, nu: usize, w: &Strategy) -> Result<f64> {
    inst.check(w)?;
    if nu >= inst.num_players() {
        return Err(Error::InvalidGnep(format!("no player {nu}")));
    }
    let y = inst.state_of(w);
    let track: f64 = (0..inst.n())
        .map(|i| inst.obs[nu][i] * (y[i] - inst.targets[nu][i]).powi(2))
        .sum();
    let p = &inst.players[nu];
    let aw = &inst.a * DVector::from_column_slice(&w[nu]);
    let reg = aw.norm_squared() * inst.quad * p.gamma / (p.beta * p.beta);
    Ok(0.5 * (track + reg))
}

/// `Ψ(x, y) = Σ_ν θ_ν(x) − θ_ν(y^ν, x^{−ν})`.
pub fn nikaido_isoda(inst: &GnepInstance, x: &Strategy, y: &Strategy) -> Result<f64> {
    inst.check(x)?;
    inst.check(y)?;
    let mut total = 0.0;
    let mut mixed = x.clone();
    for nu in 0..inst.num_players() {
        mixed[nu] = y[nu].clone();
        total += theta(inst, nu, x)? - theta(inst, nu, &mixed)?;
        mixed[nu] = x[nu].clone();
    }
    Ok(total)
}

/// Minimizer of `θ_ν(·, w^{−ν})` over the strategies of player ν that keep
/// the joint constraints satisfied.
pub fn best_response(inst: &GnepInstance, nu: usize, w: &Strategy) -> Result<Vec<f64>> {
    inst.check(w)?;
    let n = inst.n();
    let mut s = inst.y0.clone();
    for (mu, v) in w.iter().enumerate() {
        if mu != nu {
            s.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
    }
    let lower: Vec<f64> = (0..n).map(|i| inst.lo0[i] - s[i]).collect();
    let upper: Vec<f64> = (0..n).map(|i| inst.hi0[i] - s[i]).collect();
    let mut rows = LinearRows::new();
    inst.control_rows(nu, 0, &mut rows);
    let sol = solve_box_qp(
        &inst.own_hessian(nu),
        &inst.own_linear(nu, w),
        &lower,
        &upper,
        Some(&rows),
        QP_TOL,
    )?;
    Ok(sol.x)
}

/// Maximizer of `Ψ(w, ·)` over the joint feasible set: every player responds
/// to `w` while the state box couples the responses.
pub fn joint_best_response(inst: &GnepInstance, w: &Strategy) -> Result<Strategy> {
    inst.check(w)?;
    let (n, np) = (inst.n(), inst.num_players());
    let mut h = DMatrix::zeros(n * np, n * np);
    let mut q = Vec::with_capacity(n * np);
    for nu in 0..np {
        h.view_mut((nu * n, nu * n), (n, n)).copy_from(&inst.own_hessian(nu));
        q.extend(inst.own_linear(nu, w));
    }
    let rows = inst.joint_rows();
    let free = vec![f64::INFINITY; n * np];
    let neg: Vec<f64> = free.iter().map(|v| -v).collect();
    let sol = solve_box_qp(&h, &q, &neg, &free, Some(&rows), QP_TOL)?;
    Ok(inst.split(&sol.x))
}

/// `V̂(w) = Ψ(w, Z(w))` with `Z` the joint best response, together with `Z`.
pub fn merit(inst: &GnepInstance, w: &Strategy) -> Result<(f64, Strategy)> {
    let z = joint_best_response(inst, w)?;
    Ok((nikaido_isoda(inst, w, &z)?, z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationOptions {
    pub tau0: f64,
    pub shrink: f64,
    /// Armijo slope parameter.
    pub sigma: f64,
    pub tau_min: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            shrink: 0.5,
            sigma: 1e-4,
            tau_min: 1e-8,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Relaxation `w ← w + τ (Z(w) − w)` with a backtracking line search on the
/// merit. Non-convergence is reported in the trace, with the best iterate.
pub fn solve_gnep_relaxation(inst: &GnepInstance, opts: &RelaxationOptions) -> Result<(GnepState, ConvergenceReport)> {
    if !(opts.tau0 > 0.0 && opts.tau0 <= 1.0) || !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::InvalidParameter("need 0 < tau0 ≤ 1 and 0 < shrink < 1".into()));
    }
    let mut trace = Trace::start();
    let mut w = inst.start.clone();
    let (mut v, mut z) = merit(inst, &w)?;
    trace.push(0, v, 0.0);
    let mut terminated = Termination::MaxIter;
    for k in 1..=opts.max_iter {
        if v <= opts.tol {
            terminated = Termination::Converged;
            break;
        }
        let mut tau = opts.tau0;
        let accepted = loop {
            let trial: Strategy = w
                .iter()
                .zip(&z)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + tau * (y - x)).collect())
                .collect();
            let (vt, zt) = merit(inst, &trial)?;
            if vt <= (1.0 - opts.sigma * tau) * v {
                break Some((trial, vt, zt));
            }
            tau *= opts.shrink;
            if tau < opts.tau_min {
                break None;
            }
        };
        match accepted {
            Some((trial, vt, zt)) => {
                w = trial;
                v = vt;
                z = zt;
                trace.push(k, v, tau);
            }
            None => {
                terminated = Termination::Stalled;
                break;
            }
        }
    }
    if terminated == Termination::MaxIter && v <= opts.tol {
        terminated = Termination::Converged;
    }
    Ok((inst.state_fields(&w, v)?, trace.finish(terminated)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedReport {
    pub samples: usize,
    pub seed: u64,
    /// Largest `Ψ(x̄, y)` over the sampled feasible `y`.
    pub max_sampled_psi: f64,
    /// `Ψ(x̄, Z(x̄))`, the supremum over the feasible set.
    pub response_psi: f64,
    /// Per player `θ_ν(x̄) − θ_ν(BR_ν(x̄^{−ν}), x̄^{−ν})`.
    pub nash_gaps: Vec<f64>,
    /// Constraint violation of `x̄`.
    pub violation: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks the normalized-equilibrium inequality `Ψ(x̄, y) ≤ tol` on sampled
/// feasible `y` and at the joint best response, then the per-player Nash
/// inequality.
pub fn verify_normalized(
    inst: &GnepInstance,
    state: &GnepState,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<NormalizedReport> {
    let x = inst.strategy_of(state)?;
    let (n, np) = (inst.n(), inst.num_players());
    let scale = x.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let rows = inst.joint_rows();
    let eye = DMatrix::identity(n * np, n * np);
    let free = vec![f64::INFINITY; n * np];
    let neg: Vec<f64> = free.iter().map(|v| -v).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_sampled = f64::NEG_INFINITY;
    for k in 0..n_samples {
        let radius = scale * 0.5f64.powi((k % 8) as i32);
        let target: Vec<f64> = x
            .iter()
            .flatten()
            .map(|v| v + radius * rng.random_range(-1.0..1.0))
            .collect();
        let q: Vec<f64> = target.iter().map(|v| -v).collect();
        let y = solve_box_qp(&eye, &q, &neg, &free, Some(&rows), QP_TOL)?;
        max_sampled = max_sampled.max(nikaido_isoda(inst, &x, &inst.split(&y.x))?);
    }
    let (response_psi, _) = merit(inst, &x)?;
    let mut nash_gaps = Vec::with_capacity(np);
    for nu in 0..np {
        let mut alt = x.clone();
        alt[nu] = best_response(inst, nu, &x)?;
        nash_gaps.push(theta(inst, nu, &x)? - theta(inst, nu, &alt)?);
    }
    let violation = inst.violation(&x);
    let passed = max_sampled <= tol
        && response_psi <= tol
        && nash_gaps.iter().all(|&g| g <= tol)
        && violation <= tol;
    Ok(NormalizedReport {
        samples: n_samples,
        seed,
        max_sampled_psi: if n_samples == 0 { 0.0 } else { max_sampled },
        response_psi,
        nash_gaps,
        violation,
        tol,
        passed,
    })
}

/// Affine pseudo-gradient of the game in control variables:
/// `F(u) = M u + c` with `F_ν = ∇_{u^ν} θ_ν`.
fn control_game(inst: &GnepInstance) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (n, np) = (inst.n(), inst.num_players());
    // dense A⁻¹ column by column
    let mut ainv = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ainv.set_column(j, &DVector::from_vec(inst.chol.solve(&e)));
    }
    let mut m = DMatrix::zeros(n * np, n * np);
    let mut c = DVector::zeros(n * np);
    for nu in 0..np {
        let bn = inst.players[nu].beta;
        let qn = DMatrix::from_diagonal(&DVector::from_column_slice(&inst.obs[nu]));
        let left = &ainv * &qn;
        for mu in 0..np {
            let bm = inst.players[mu].beta;
            let mut blk = &left * &ainv * (bn * bm);
            if mu == nu {
                for i in 0..n {
                    blk[(i, i)] += inst.players[nu].gamma * inst.quad;
                }
            }
            m.view_mut((nu * n, mu * n), (n, n)).copy_from(&blk);
        }
        let resid: DVector<f64> =
            DVector::from_iterator(n, (0..n).map(|i| inst.y0[i] - inst.targets[nu][i]));
        c.rows_mut(nu * n, n).copy_from(&(&left * resid * bn));
    }
    (m, c, ainv)
}

/// Smallest eigenvalue of the symmetric part of the game Jacobian in the
/// multistate variables. Positive means the pseudo-gradient is strongly
/// monotone and the normalized equilibrium is unique.
pub fn monotonicity_margin(inst: &GnepInstance) -> f64 {
    let (n, np) = (inst.n(), inst.num_players());
    let mut j = DMatrix::zeros(n * np, n * np);
    for nu in 0..np {
        for mu in 0..np {
            let mut blk = if nu == mu { inst.own_hessian(nu) } else { DMatrix::zeros(n, n) };
            if nu != mu {
                for i in 0..n {
                    blk[(i, i)] = inst.obs[nu][i];
                }
            }
            j.view_mut((nu * n, mu * n), (n, n)).copy_from(&blk);
        }
    }
    let sym = (&j + j.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Normalized equilibrium computed directly in the control variables by an
/// extragradient method in the metric of the symmetrized Jacobian. Every
/// state evaluation goes through `A⁻¹`, so this is meant for small grids.
pub fn solve_formulation_ii(inst: &GnepInstance, tol: f64) -> Result<GnepState> {
    let (n, np) = (inst.n(), inst.num_players());
    let (m, c, ainv) = control_game(inst);
    let sym = (&m + m.transpose()) * 0.5;
    let eta = 1e-3 * sym.diagonal().max().abs().max(f64::MIN_POSITIVE);
    let g = &sym + DMatrix::identity(n * np, n * np) * eta;
    // step from the spectral norm of G^{-1/2} M G^{-1/2}
    let gchol = g.clone().cholesky().ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let linv = gchol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n * np, n * np))
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let scaled = &linv * &m * linv.transpose();
    let lip = scaled.singular_values().max();
    let alpha = 0.9 / lip;

    let mut lower = Vec::with_capacity(n * np);
    let mut upper = Vec::with_capacity(n * np);
    for p in &inst.players {
        lower.extend(std::iter::repeat_n(p.control_box.0, n));
        upper.extend(std::iter::repeat_n(p.control_box.1, n));
    }
    let mut rows = LinearRows::new();
    for i in 0..n {
        let (lo, hi) = (inst.lo0[i] - inst.y0[i], inst.hi0[i] - inst.y0[i]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            continue;
        }
        let mut row = Vec::with_capacity(n * np);
        for (mu, p) in inst.players.iter().enumerate() {
            for j in 0..n {
                row.push((mu * n + j, p.beta * ainv[(i, j)]));
            }
        }
        rows.push(row, lo, hi);
    }
    // G-metric projection of u − α G⁻¹ d
    let project = |u: &DVector<f64>, d: &DVector<f64>| -> Result<DVector<f64>> {
        let q = d * alpha - &g * u;
        let sol = solve_box_qp(&g, q.as_slice(), &lower, &upper, Some(&rows), QP_TOL * 1e-2)?;
        Ok(DVector::from_vec(sol.x))
    };
    let start: Vec<f64> = inst
        .start
        .iter()
        .enumerate()
        .flat_map(|(nu, w)| inst.control_of(nu, w))
        .collect();
    let mut u = DVector::from_vec(start);
    let max_iter = 100_000;
    let mut done = false;
    for _ in 0..max_iter {
        let f = &m * &u + &c;
        let mid = project(&u, &f)?;
        let fm = &m * &mid + &c;
        let next = project(&u, &fm)?;
        let step = (&next - &u).amax();
        u = next;
        if step <= tol * (1.0 + u.amax()) {
            done = true;
            break;
        }
    }
    if !done {
        return Err(Error::InvalidGnep(format!(
            "control-variable equilibrium not reached in {max_iter} iterations"
        )));
    }
    let w: Strategy = (0..np)
        .map(|nu| {
            let un = u.rows(nu * n, n);
            (&ainv * un * inst.players[nu].beta).iter().copied().collect()
        })
        .collect();
    let (v, _) = merit(inst, &w)?;
    inst.state_fields(&w, v)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assembly::{assemble, CoefficientField};
    use crate::mesh::{label_boundary, BoundarySpec, Grid};

    fn instance(n: usize, players: usize) -> GnepInstance {
        let grid = Arc::new(Grid::interval(0.0, 1.0, n).unwrap());
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        let op = assemble(grid.clone(), &CoefficientField::laplacian(1), &labels).unwrap();
        let ps = (0..players)
            .map(|k| Player {
                gamma: 1e-2,
                beta: 1.0,
                target: Field::constant(&grid, 0.1 * (k + 1) as f64),
                obs_mask: vec![true; grid.num_nodes()],
                control_box: (-5.0, 5.0),
            })
            .collect();
        let inf = Field::constant(&grid, f64::INFINITY);
        let ninf = Field::constant(&grid, f64::NEG_INFINITY);
        GnepInstance::new(op, ps, Field::constant(&grid, 1.0), (ninf, inf)).unwrap()
    }

    #[test]
    fn psi_vanishes_on_diagonal() {
        let inst = instance(5, 2);
        let w = vec![vec![0.01, 0.02, 0.0, -0.01, 0.03], vec![0.0; 5]];
        assert_eq!(nikaido_isoda(&inst, &w, &w).unwrap(), 0.0);
    }

    #[test]
    fn zero_strategy_at_target_costs_nothing() {
        let grid = Arc::new(Grid::interval(0.0, 1.0, 4).unwrap());
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        let op = assemble(grid.clone(), &CoefficientField::laplacian(1), &labels).unwrap();
        let f = Field::constant(&grid, 2.0);
        let y0 = crate::assembly::solve_dirichlet(&op, &f).unwrap();
        let p = Player {
            gamma: 1.0,
            beta: 2.0,
            target: y0,
            obs_mask: vec![true; grid.num_nodes()],
            control_box: (-1.0, 1.0),
        };
        let inf = Field::constant(&grid, f64::INFINITY);
        let ninf = Field::constant(&grid, f64::NEG_INFINITY);
        let inst = GnepInstance::new(op, vec![p], f, (ninf, inf)).unwrap();
        assert!(theta(&inst, 0, &vec![vec![0.0; 4]]).unwrap().abs() < 1e-24);
    }

    #[test]
    fn round_trip_through_state_equation() {
        let inst = instance(6, 2);
        let w = vec![vec![0.01, 0.03, 0.02, -0.01, 0.0, 0.02], vec![0.02; 6]];
        let u: Vec<Vec<f64>> = (0..2).map(|nu| inst.control_of(nu, &w[nu])).collect();
        let y = inst.solve_state(&u).unwrap();
        for (a, b) in y.iter().zip(inst.state_of(&w)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_infeasible_boxes() {
        let grid = Arc::new(Grid::interval(0.0, 1.0, 3).unwrap());
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        let op = assemble(grid.clone(), &CoefficientField::laplacian(1), &labels).unwrap();
        let p = Player {
            gamma: 1.0,
            beta: 1.0,
            target: Field::zeros(&grid),
            obs_mask: vec![true; 5],
            control_box: (0.0, 0.0),
        };
        let err = GnepInstance::new(
            op,
            vec![p],
            Field::constant(&grid, 10.0),
            (Field::constant(&grid, -1.0), Field::constant(&grid, 0.0)),
        );
        assert!(matches!(err, Err(Error::InvalidGnep(_))));
    }
}
