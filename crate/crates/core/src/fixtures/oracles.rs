//! Exhaustive-enumeration reference solvers.
//!
//! Each oracle tries every combinatorial state of the constraints, solves the
//! resulting linear system densely and keeps the states whose solution
//! satisfies all sign and feasibility conditions. They share nothing with the
//! iterative solvers beyond dense LU.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gnep::{GnepInstance, Strategy};
use crate::vi::LinearRows;

/// Largest number of combinatorial states an oracle will enumerate.
pub const MAX_STATES: usize = 531_441;

#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: Vec<f64>,
    /// Positive at an active lower bound, negative at an active upper bound.
    pub z_bounds: Vec<f64>,
    pub z_rows: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    Off,
    Lo,
    Hi,
}

fn state_count(options: &[Vec<Side>]) -> Result<usize> {
    options.iter().try_fold(1usize, |acc, o| {
        acc.checked_mul(o.len())
            .filter(|&c| c <= MAX_STATES)
            .ok_or_else(|| Error::Oracle(format!("more than {MAX_STATES} states to enumerate")))
    })
}

fn decode(mut index: usize, options: &[Vec<Side>]) -> Vec<Side> {
    options
        .iter()
        .map(|o| {
            let s = o[index % o.len()];
            index /= o.len();
            s
        })
        .collect()
}

fn sides_for(lo: f64, hi: f64) -> Vec<Side> {
    if lo == hi {
        return vec![Side::Lo];
    }
    let mut s = vec![Side::Off];
    if lo > f64::NEG_INFINITY {
        s.push(Side::Lo);
    }
    if hi < f64::INFINITY {
        s.push(Side::Hi);
    }
    s
}

/// Every KKT point of `min ½xᵀHx + qᵀx` over bounds and two-sided rows,
/// found by enumerating which side of each constraint is active. For a
/// strictly convex problem the list has one entry, or several numerically
/// coincident ones under degeneracy.
pub fn oracle_active_set_qp(
    h: &DMatrix<f64>,
    q: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: Option<&LinearRows>,
    tol: f64,
) -> Result<Vec<KktPoint>> {
    let n = q.len();
    let empty = LinearRows::default();
    let rows = rows.unwrap_or(&empty);
    // constraint list: bounds first, then rows; each as (normal, lo, hi)
    let mut normals: Vec<DVector<f64>> = Vec::new();
    let mut los = Vec::new();
    let mut his = Vec::new();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        normals.push(e);
        los.push(lower[i]);
        his.push(upper[i]);
    }
    for (k, r) in rows.rows.iter().enumerate() {
        let mut v = DVector::zeros(n);
        for &(j, a) in r {
            v[j] += a;
        }
        normals.push(v);
        los.push(rows.lo[k]);
        his.push(rows.hi[k]);
    }
    let options: Vec<Vec<Side>> = los.iter().zip(&his).map(|(&l, &h)| sides_for(l, h)).collect();
    let total = state_count(&options)?;

    let mut found: Vec<KktPoint> = Vec::new();
    for index in 0..total {
        let sides = decode(index, &options);
        let act: Vec<usize> = (0..sides.len()).filter(|&k| sides[k] != Side::Off).collect();
        let m = act.len();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        let mut rhs = DVector::zeros(n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        for i in 0..n {
            rhs[i] = -q[i];
        }
        for (a, &k) in act.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + a)] = -normals[k][j];
                kkt[(n + a, j)] = normals[k][j];
            }
            rhs[n + a] = if sides[k] == Side::Lo { los[k] } else { his[k] };
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let mut ok = true;
        let mut z = vec![0.0; normals.len()];
        for (a, &k) in act.iter().enumerate() {
            z[k] = sol[n + a];
        }
        for k in 0..normals.len() {
            let v = normals[k].dot(&x);
            let scale = tol * (1.0 + v.abs());
            if v < los[k] - scale || v > his[k] + scale {
                ok = false;
                break;
            }
            if los[k] != his[k] {
                if sides[k] == Side::Lo && z[k] < -tol {
                    ok = false;
                    break;
                }
                if sides[k] == Side::Hi && z[k] > tol {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            found.push(KktPoint {
                x: x.iter().copied().collect(),
                z_bounds: z[..n].to_vec(),
                z_rows: z[n..].to_vec(),
            });
        }
    }
    if found.is_empty() {
        return Err(Error::Oracle("no active set yields a KKT point".into()));
    }
    Ok(found)
}

/// Per-unknown sign constraint of a cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignSet {
    Free,
    Nonnegative,
    Nonpositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contact {
    Stick,
    SlipPlus,
    SlipMinus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StickSlipPoint {
    pub u: Vec<f64>,
    /// `b − A u`, the total force on each unknown.
    pub force: Vec<f64>,
    pub states: Vec<Contact>,
}

/// Solutions of `min ½uᵀAu − bᵀu + Σ bound_i |u_i|` subject to the sign sets,
/// by enumerating stick / slip± on every unknown that has a positive friction
/// bound or a sign constraint.
///
/// Optimality: with `r = b − A u`, a sticking unknown has `u_i = 0` and `r_i`
/// in the subdifferential interval (`[-g, g]`, widened to `(-∞, g]` for
/// `u ≥ 0` and `[-g, ∞)` for `u ≤ 0`), a slipping unknown has `r_i = ±g` and
/// `u_i` of that sign. Unconstrained unknowns without friction satisfy `r_i = 0`.
pub fn oracle_stick_slip(
    a: &DMatrix<f64>,
    b: &[f64],
    bound: &[f64],
    signs: &[SignSet],
    tol: f64,
) -> Result<Vec<StickSlipPoint>> {
    let n = b.len();
    let nonsmooth: Vec<usize> = (0..n)
        .filter(|&i| bound[i] > 0.0 || signs[i] != SignSet::Free)
        .collect();
    let options: Vec<Vec<Contact>> = nonsmooth
        .iter()
        .map(|&i| match signs[i] {
            SignSet::Free => vec![Contact::Stick, Contact::SlipPlus, Contact::SlipMinus],
            SignSet::Nonnegative => vec![Contact::Stick, Contact::SlipPlus],
            SignSet::Nonpositive => vec![Contact::Stick, Contact::SlipMinus],
        })
        .collect();
    let total = options.iter().try_fold(1usize, |acc, o| {
        acc.checked_mul(o.len())
            .filter(|&c| c <= MAX_STATES)
            .ok_or_else(|| Error::Oracle(format!("more than {MAX_STATES} patterns to enumerate")))
    })?;

    let mut found = Vec::new();
    for index in 0..total {
        let mut states = vec![Contact::SlipPlus; n];
        let mut rest = index;
        for (o, &i) in options.iter().zip(&nonsmooth) {
            states[i] = o[rest % o.len()];
            rest /= o.len();
        }
        let is_ns = |i: usize| bound[i] > 0.0 || signs[i] != SignSet::Free;
        // target force on slipping unknowns (zero for smooth ones)
        let force_of = |i: usize| -> f64 {
            if !is_ns(i) {
                return 0.0;
            }
            match states[i] {
                Contact::SlipPlus => bound[i],
                Contact::SlipMinus => -bound[i],
                Contact::Stick => 0.0,
            }
        };
        let free: Vec<usize> = (0..n)
            .filter(|&i| !(is_ns(i) && states[i] == Contact::Stick))
            .collect();
        let m = free.len();
        let mut u = vec![0.0; n];
        if m > 0 {
            let mut sub = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    sub[(r, c)] = a[(i, j)];
                }
                rhs[r] = b[i] - force_of(i);
            }
            let Some(sol) = sub.lu().solve(&rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                u[i] = sol[r];
            }
        }
        let au = a * DVector::from_column_slice(&u);
        let force: Vec<f64> = (0..n).map(|i| b[i] - au[i]).collect();
        let ok = nonsmooth.iter().all(|&i| {
            let g = bound[i];
            let scale = tol * (1.0 + force[i].abs());
            match states[i] {
                Contact::SlipPlus => u[i] >= -tol,
                Contact::SlipMinus => u[i] <= tol,
                Contact::Stick => {
                    let lo = if signs[i] == SignSet::Nonnegative { f64::NEG_INFINITY } else { -g };
                    let hi = if signs[i] == SignSet::Nonpositive { f64::INFINITY } else { g };
                    force[i] >= lo - scale && force[i] <= hi + scale
                }
            }
        });
        if ok {
            let states = (0..n)
                .map(|i| if is_ns(i) { states[i] } else { Contact::SlipPlus })
                .collect::<Vec<_>>();
            found.push(StickSlipPoint { u, force, states });
        }
    }
    if found.is_empty() {
        return Err(Error::Oracle("no stick/slip pattern is consistent".into()));
    }
    Ok(found)
}

/// Normalized equilibria of a game on a grid with one unknown, by
/// enumerating which side of each control bound and of the shared state
/// bound is active and solving the stationarity system of all players with
/// one multiplier for the shared constraint.
pub fn oracle_gnep_fixed_point(inst: &GnepInstance, tol: f64) -> Result<Vec<Strategy>> {
    if inst.n() != 1 {
        return Err(Error::Oracle(format!("expected one unknown, found {}", inst.n())));
    }
    let np = inst.num_players();
    if np > 3 {
        return Err(Error::Oracle("at most three players".into()));
    }
    let a = inst.matrix()[(0, 0)];
    let q = inst.quadrature();
    let y0 = inst.free_state()[0];
    let (lo0, hi0) = inst.state_bounds();
    let (slo, shi) = (lo0[0] - y0, hi0[0] - y0);
    // constraint normals over w, with bounds; players first, shared last
    let mut normals = Vec::new();
    let mut los = Vec::new();
    let mut his = Vec::new();
    for (nu, p) in inst.players().iter().enumerate() {
        let mut e = vec![0.0; np];
        e[nu] = 1.0;
        normals.push(e);
        los.push(p.control_box.0 * p.beta / a);
        his.push(p.control_box.1 * p.beta / a);
    }
    normals.push(vec![1.0; np]);
    los.push(slo);
    his.push(shi);
    let options: Vec<Vec<Side>> = los.iter().zip(&his).map(|(&l, &h)| sides_for(l, h)).collect();
    let total = state_count(&options)?;
    let mut found = Vec::new();
    for index in 0..total {
        let sides = decode(index, &options);
        let act: Vec<usize> = (0..sides.len()).filter(|&k| sides[k] != Side::Off).collect();
        let m = act.len();
        let mut sys = DMatrix::zeros(np + m, np + m);
        let mut rhs = DVector::zeros(np + m);
        for (nu, p) in inst.players().iter().enumerate() {
            let obs = inst.observation(nu)[0];
            // F_ν = obs (y0 + Σ w − g) + (γ/β²) q a² w_ν
            for mu in 0..np {
                sys[(nu, mu)] = obs;
            }
            sys[(nu, nu)] += p.gamma / (p.beta * p.beta) * q * a * a;
            rhs[nu] = -obs * (y0 - inst.target_dofs(nu)[0]);
            for (c, &k) in act.iter().enumerate() {
                sys[(nu, np + c)] = -normals[k][nu];
            }
        }
        for (c, &k) in act.iter().enumerate() {
            for mu in 0..np {
                sys[(np + c, mu)] = normals[k][mu];
            }
            rhs[np + c] = if sides[k] == Side::Lo { los[k] } else { his[k] };
        }
        let Some(sol) = sys.lu().solve(&rhs) else { continue };
        let w: Vec<f64> = sol.rows(0, np).iter().copied().collect();
        let ok = (0..normals.len()).all(|k| {
            let v: f64 = normals[k].iter().zip(&w).map(|(x, y)| x * y).sum();
            let scale = tol * (1.0 + v.abs());
            let inside = v >= los[k] - scale && v <= his[k] + scale;
            let sign = match act.iter().position(|&j| j == k) {
                Some(c) if los[k] != his[k] => {
                    let z = sol[np + c];
                    if sides[k] == Side::Lo { z >= -tol } else { z <= tol }
                }
                _ => true,
            };
            inside && sign
        });
        if ok {
            found.push(w.into_iter().map(|v| vec![v]).collect());
        }
    }
    if found.is_empty() {
        return Err(Error::Oracle("no active pattern yields an equilibrium".into()));
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qp_oracle_projects_onto_box() {
        let h = DMatrix::identity(2, 2);
        let pts = oracle_active_set_qp(&h, &[-2.0, 0.5], &[0.0; 2], &[1.0; 2], None, 1e-12).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].x, vec![1.0, 0.0]);
        assert_eq!(pts[0].z_bounds, vec![-1.0, 0.5]);
    }

    #[test]
    fn soft_threshold_by_enumeration() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let p = oracle_stick_slip(&a, &[5.0], &[1.0], &[SignSet::Free], 1e-12).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].u, vec![2.0]);
        let p = oracle_stick_slip(&a, &[0.5], &[1.0], &[SignSet::Free], 1e-12).unwrap();
        assert_eq!(p[0].u, vec![0.0]);
        assert_eq!(p[0].states, vec![Contact::Stick]);
    }
}
