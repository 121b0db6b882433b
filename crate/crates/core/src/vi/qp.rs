//! Strictly convex quadratic programs with bounds and two-sided linear rows,
//! solved by the Goldfarb–Idnani dual active-set method.
//!
//! ```text
//! minimize ½ xᵀHx + qᵀx   subject to   lower ≤ x ≤ upper,   lo ≤ M x ≤ hi
//! ```
//!
//! The method starts from the unconstrained minimizer and adds the most
//! violated constraint at a time while keeping dual feasibility, so reaching a
//! primal feasible point is also the optimality certificate. An empty feasible
//! set shows up as an unbounded dual step and is reported as infeasible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Two-sided general constraints `lo ≤ M x ≤ hi`, with `M` stored by rows.
#[derive(Debug, Clone, Default)]
pub struct LinearRows {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LinearRows {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: Vec<(usize, f64)>, lo: f64, hi: f64) {
        self.rows.push(row);
        self.lo.push(lo);
        self.hi.push(hi);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Bound multipliers, positive where the lower bound is active and
    /// negative at an active upper bound: `Hx + q = z_bounds + Mᵀ z_rows`.
    pub z_bounds: Vec<f64>,
    pub z_rows: Vec<f64>,
    pub iterations: usize,
    pub kkt: QpResiduals,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QpResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub dual_feasibility: f64,
    pub complementarity: f64,
}

impl QpResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Bound(usize),
    Row(usize),
}

/// `nᵀx ≥ b` (or `= b` when `equality`), with `sign` mapping the multiplier
/// back to the two-sided source constraint.
struct Constraint {
    normal: Vec<(usize, f64)>,
    b: f64,
    equality: bool,
    source: Source,
    sign: f64,
}

impl Constraint {
    fn slack(&self, x: &DVector<f64>) -> f64 {
        self.normal.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - self.b
    }

    fn norm(&self) -> f64 {
        self.normal.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }
}

fn build_constraints(
    n: usize,
    lower: &[f64],
    upper: &[f64],
    rows: Option<&LinearRows>,
) -> Result<Vec<Constraint>> {
    let mut out = Vec::new();
    let mut push = |normal: Vec<(usize, f64)>, lo: f64, hi: f64, source: Source| -> Result<()> {
        if lo > hi {
            return Err(Error::Infeasible(format!("{source:?}: lower bound {lo} exceeds upper {hi}")));
        }
        if lo == hi {
            out.push(Constraint { normal, b: lo, equality: true, source, sign: 1.0 });
            return Ok(());
        }
        if lo > f64::NEG_INFINITY {
            out.push(Constraint { normal: normal.clone(), b: lo, equality: false, source, sign: 1.0 });
        }
        if hi < f64::INFINITY {
            let neg = normal.iter().map(|&(j, v)| (j, -v)).collect();
            out.push(Constraint { normal: neg, b: -hi, equality: false, source, sign: -1.0 });
        }
        Ok(())
    };
    for i in 0..n {
        push(vec![(i, 1.0)], lower[i], upper[i], Source::Bound(i))?;
    }
    if let Some(r) = rows {
        for (k, row) in r.rows.iter().enumerate() {
            if let Some(&(j, _)) = row.iter().find(|&&(j, _)| j >= n) {
                return Err(Error::DimensionMismatch { expected: n, got: j + 1 });
            }
            push(row.clone(), r.lo[k], r.hi[k], Source::Row(k))?;
        }
    }
    Ok(out)
}

/// Factorization state of the dual method: `J = L⁻ᵀ Q` and the upper
/// triangular `R` of the active normals, `L⁻¹ N = Q [R; 0]`.
struct Factors {
    n: usize,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    iq: usize,
}

impl Factors {
    fn jt_times(&self, normal: &[(usize, f64)]) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for col in 0..self.n {
            let c = self.j.column(col);
            d[col] = normal.iter().map(|&(k, v)| c[k] * v).sum();
        }
        d
    }

    /// Primal step direction `z = J₂ d₂` and dual direction `r = R⁻¹ d₁`.
    fn directions(&self, d: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
        let mut z = DVector::zeros(self.n);
        for col in self.iq..self.n {
            z.axpy(d[col], &self.j.column(col), 1.0);
        }
        let mut r = vec![0.0; self.iq];
        for i in (0..self.iq).rev() {
            let mut s = d[i];
            for k in i + 1..self.iq {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        (z, r)
    }

    /// Appends the constraint with `d = Jᵀ n`; false (and nothing appended)
    /// if it is linearly dependent on the active ones.
    fn add(&mut self, d: &mut DVector<f64>) -> bool {
        let n = self.n;
        for jj in (self.iq + 1..n).rev() {
            let (cc, ss) = (d[jj - 1], d[jj]);
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            d[jj] = 0.0;
            let (mut cc, mut ss) = (cc / h, ss / h);
            if cc < 0.0 {
                cc = -cc;
                ss = -ss;
                d[jj - 1] = -h;
            } else {
                d[jj - 1] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in 0..n {
                let t1 = self.j[(k, jj - 1)];
                let t2 = self.j[(k, jj)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj - 1)] = a;
                self.j[(k, jj)] = xny * (t1 + a) - t2;
            }
        }
        if self.iq >= n {
            return false;
        }
        let scale = (0..=self.iq).map(|i| d[i].abs()).fold(0.0, f64::max);
        if d[self.iq].abs() <= f64::EPSILON * scale.max(1.0) * 1e2 {
            return false;
        }
        for i in 0..=self.iq {
            self.r[(i, self.iq)] = d[i];
        }
        self.iq += 1;
        true
    }

    /// Removes the active constraint in position `l`.
    fn drop(&mut self, l: usize) {
        let n = self.n;
        for i in l..self.iq - 1 {
            for k in 0..n {
                self.r[(k, i)] = self.r[(k, i + 1)];
            }
        }
        for k in 0..n {
            self.r[(k, self.iq - 1)] = 0.0;
        }
        self.iq -= 1;
        for jj in l..self.iq {
            let (cc, ss) = (self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            let (mut cc, mut ss) = (cc / h, ss / h);
            self.r[(jj + 1, jj)] = 0.0;
            if cc < 0.0 {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in jj + 1..self.iq {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                let a = t1 * cc + t2 * ss;
                self.r[(jj, k)] = a;
                self.r[(jj + 1, k)] = xny * (t1 + a) - t2;
            }
            for k in 0..n {
                let t1 = self.j[(k, jj)];
                let t2 = self.j[(k, jj + 1)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj)] = a;
                self.j[(k, jj + 1)] = xny * (a + t1) - t2;
            }
        }
    }
}

/// Solves the QP. `tol` bounds the reported KKT residuals; constraint
/// violations below a small multiple of machine precision are ignored.
pub fn solve_box_qp(
    h: &DMatrix<f64>,
    q: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: Option<&LinearRows>,
    tol: f64,
) -> Result<QpSolution> {
    let n = q.len();
    for len in [h.nrows(), h.ncols(), lower.len(), upper.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if let Some(r) = rows {
        if r.lo.len() != r.rows.len() || r.hi.len() != r.rows.len() {
            return Err(Error::DimensionMismatch { expected: r.rows.len(), got: r.lo.len() });
        }
    }
    let cons = build_constraints(n, lower, upper, rows)?;
    let chol = h
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let l = chol.l();
    let jinit = l
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let mut fac = Factors {
        n,
        j: jinit,
        r: DMatrix::zeros(n, n.max(1)),
        iq: 0,
    };
    let mut x = -chol.solve(&DVector::from_column_slice(q));
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let scale = 1.0 + cons.iter().map(|c| c.b.abs()).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let feas_tol = 1e-13 * scale;

    for (ci, c) in cons.iter().enumerate().filter(|(_, c)| c.equality) {
        let mut d = fac.jt_times(&c.normal);
        let (z, r) = fac.directions(&d);
        let zn: f64 = c.normal.iter().map(|&(k, v)| z[k] * v).sum();
        let t = if zn.abs() > 0.0 { -c.slack(&x) / zn } else { 0.0 };
        x.axpy(t, &z, 1.0);
        for (ui, ri) in u.iter_mut().zip(&r) {
            *ui -= t * ri;
        }
        u.push(t);
        active.push(ci);
        if !fac.add(&mut d) {
            return Err(Error::Infeasible(format!(
                "equality constraint {:?} is linearly dependent on earlier ones",
                c.source
            )));
        }
    }

    let max_iter = 50 * (n + cons.len()) + 100;
    let mut iterations = 0;
    let mut is_active = vec![false; cons.len()];
    for &a in &active {
        is_active[a] = true;
    }
    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::QpIterationLimit(max_iter));
        }
        let mut worst = None;
        let mut worst_val = -feas_tol;
        for (ci, c) in cons.iter().enumerate() {
            if is_active[ci] {
                continue;
            }
            let s = c.slack(&x) / c.norm();
            if s < worst_val {
                worst_val = s;
                worst = Some(ci);
            }
        }
        let Some(p) = worst else { break };
        let cp = &cons[p];
        let mut s_p = cp.slack(&x);
        let mut u_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::QpIterationLimit(max_iter));
            }
            let mut d = fac.jt_times(&cp.normal);
            let (z, r) = fac.directions(&d);
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 0.0 && !cons[active[k]].equality {
                    let ratio = u[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }
            let zn: f64 = cp.normal.iter().map(|&(k, v)| z[k] * v).sum();
            let z_norm = z.norm();
            let t2 = if z_norm > f64::EPSILON * 1e2 * (1.0 + x.norm()) && zn > 0.0 {
                -s_p / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Infeasible(format!(
                    "constraint {:?} cannot be satisfied together with the active set",
                    cp.source
                )));
            }
            if t2.is_finite() {
                x.axpy(t, &z, 1.0);
            }
            for (uk, rk) in u.iter_mut().zip(&r) {
                *uk -= t * rk;
            }
            u_p += t;
            if t == t2 {
                // a numerically dependent constraint already holds after the step
                if fac.add(&mut d) {
                    active.push(p);
                    u.push(u_p);
                    is_active[p] = true;
                }
                break;
            }
            let k = drop_at.expect("partial step always has a blocking constraint");
            is_active[active[k]] = false;
            active.remove(k);
            u.remove(k);
            fac.drop(k);
            s_p = cp.slack(&x);
        }
    }

    let x: Vec<f64> = x.iter().copied().collect();
    let mut z_bounds = vec![0.0; n];
    let mut z_rows = vec![0.0; rows.map_or(0, |r| r.len())];
    for (&ci, &uk) in active.iter().zip(&u) {
        let c = &cons[ci];
        match c.source {
            Source::Bound(i) => z_bounds[i] += c.sign * uk,
            Source::Row(k) => z_rows[k] += c.sign * uk,
        }
    }
    let kkt = qp_residuals(h, q, lower, upper, rows, &x, &z_bounds, &z_rows);
    if kkt.max() > tol {
        return Err(Error::Infeasible(format!(
            "KKT residual {:e} above tolerance {tol:e} (ill-conditioned problem)",
            kkt.max()
        )));
    }
    Ok(QpSolution {
        x,
        z_bounds,
        z_rows,
        iterations,
        kkt,
    })
}

/// KKT residuals of a candidate primal-dual point, in max norm.
#[allow(clippy::too_many_arguments)]
pub fn qp_residuals(
    h: &DMatrix<f64>,
    q: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: Option<&LinearRows>,
    x: &[f64],
    z_bounds: &[f64],
    z_rows: &[f64],
) -> QpResiduals {
    let n = x.len();
    let xv = DVector::from_column_slice(x);
    let mut grad: Vec<f64> = (h * &xv).iter().zip(q).map(|(a, b)| a + b).collect();
    for i in 0..n {
        grad[i] -= z_bounds[i];
    }
    let mut res = QpResiduals::default();
    let side = |value: f64, lo: f64, hi: f64, z: f64, res: &mut QpResiduals| {
        res.feasibility = res.feasibility.max(lo - value).max(value - hi);
        let zp = z.max(0.0);
        let zm = (-z).max(0.0);
        if lo == f64::NEG_INFINITY {
            res.dual_feasibility = res.dual_feasibility.max(zp);
        } else {
            res.complementarity = res.complementarity.max(zp * (value - lo).abs());
        }
        if hi == f64::INFINITY {
            res.dual_feasibility = res.dual_feasibility.max(zm);
        } else {
            res.complementarity = res.complementarity.max(zm * (hi - value).abs());
        }
    };
    for i in 0..n {
        side(x[i], lower[i], upper[i], z_bounds[i], &mut res);
    }
    if let Some(r) = rows {
        let mx = r.eval(x);
        for (k, row) in r.rows.iter().enumerate() {
            for &(j, v) in row {
                grad[j] -= v * z_rows[k];
            }
            side(mx[k], r.lo[k], r.hi[k], z_rows[k], &mut res);
        }
    }
    res.stationarity = grad.iter().fold(0.0, |m, g| m.max(g.abs()));
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn unconstrained_minimizer() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let q = [-1.0, 2.0];
        let s = solve_box_qp(&h, &q, &[-INF; 2], &[INF; 2], None, 1e-10).unwrap();
        let expect = h.clone().lu().solve(&DVector::from_column_slice(&[1.0, -2.0])).unwrap();
        assert!((s.x[0] - expect[0]).abs() < 1e-12 && (s.x[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn identity_clips_to_box() {
        let h = DMatrix::identity(3, 3);
        let s = solve_box_qp(&h, &[-2.0; 3], &[0.0; 3], &[1.0; 3], None, 1e-10).unwrap();
        assert_eq!(s.x, vec![1.0; 3]);
        assert_eq!(s.z_bounds, vec![-1.0; 3]);
    }

    #[test]
    fn equality_and_rows() {
        // min ½|x|² s.t. x0 + x1 = 2, x1 - x2 ≥ 1
        let h = DMatrix::identity(3, 3);
        let mut rows = LinearRows::new();
        rows.push(vec![(0, 1.0), (1, 1.0)], 2.0, 2.0);
        rows.push(vec![(1, 1.0), (2, -1.0)], 1.0, INF);
        let s = solve_box_qp(&h, &[0.0; 3], &[-INF; 3], &[INF; 3], Some(&rows), 1e-10).unwrap();
        assert!(s.kkt.max() < 1e-12);
        // x = (2/3 ... ) from KKT by hand: x0 = a, x1 = a + b, x2 = -b, 2a + b = 2, a + 2b = 1
        let (a, b) = (1.0, 0.0);
        assert!((s.x[0] - a).abs() < 1e-12 && (s.x[1] - (a + b)).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_rows() {
        let h = DMatrix::identity(2, 2);
        let mut rows = LinearRows::new();
        rows.push(vec![(0, 1.0), (1, 1.0)], 3.0, INF);
        let err = solve_box_qp(&h, &[0.0; 2], &[0.0; 2], &[1.0; 2], Some(&rows), 1e-10);
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }
}
