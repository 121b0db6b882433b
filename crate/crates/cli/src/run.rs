//! Executes a run configuration and writes its artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use regvi_core::assembly::{assemble, solve_system, CoefficientField, DiscreteOperator};
use regvi_core::fixtures::{case_by_name, run_convergence_study};
use regvi_core::friction::{
    solve_vi2, solve_vi3, verify_mp2_mp3, ConeSign, ContactState, FrictionMethod, FrictionOptions,
    FrictionSpec,
};
use regvi_core::gnep::{solve_gnep_relaxation, verify_normalized, GnepInstance, Player, RelaxationOptions};
use regvi_core::mesh::{
    label_boundary, BoundaryCondition, BoundarySpec, DomainKind, Grid, Selector, Side,
};
use regvi_core::report::ConvergenceReport;
use regvi_core::vi::{solve_obstacle, verify_cp1, ObstacleSpec, ViMethod, ViOptions};
use regvi_core::Field;

use crate::config::{
    problem_name, ConditionName, ConeName, DomainName, Format, ProblemKind, RunConfig, SelectName,
};
use crate::error::{CliError, ConfigError};
use crate::expr::{compile_predicate, Expr};
use crate::output::{num, OutputDir};

/// Environment variable overriding `output.directory`.
pub const OUTPUT_ENV: &str = "REGVI_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    NotConverged,
    VerifierFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::NotConverged => 2,
            Status::VerifierFailed => 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub dump_mesh: bool,
    pub dump_matrix: bool,
    /// Takes precedence over the config and the environment.
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: Status,
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: Value,
}

/// What a problem runner hands back for the report.
struct Outcome {
    converged: bool,
    verified: bool,
    convergence: Option<ConvergenceReport>,
    details: Value,
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    run_config(RunConfig::from_file(path)?, opts)
}

pub fn run_config(mut cfg: RunConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    if let Some(dir) = &opts.output_dir {
        cfg.output.directory = dir.display().to_string();
    } else if let Ok(dir) = std::env::var(OUTPUT_ENV) {
        if !dir.is_empty() {
            cfg.output.directory = dir;
        }
    }
    let mut out = OutputDir::create(
        &cfg.output.directory,
        cfg.output.formats.contains(&Format::Csv),
        cfg.output.formats.contains(&Format::Json),
    )?;
    let outcome = match cfg.problem {
        ProblemKind::Fixture => run_fixture(&cfg, &mut out)?,
        _ => {
            let op = build_operator(&cfg)?;
            if opts.dump_mesh {
                let dump = op.grid().dump(Some(op.labeling()));
                let mut text = serde_json::to_string_pretty(&dump)?;
                text.push('\n');
                out.raw("mesh.json", text.as_bytes())?;
            }
            if opts.dump_matrix {
                let mut bytes = Vec::new();
                op.write_matrix_market(&mut bytes)?;
                out.raw("matrix.mtx", &bytes)?;
            }
            match cfg.problem {
                ProblemKind::Poisson => run_poisson(&cfg, &op, &mut out)?,
                ProblemKind::Obstacle | ProblemKind::Signorini => run_obstacle(&cfg, &op, &mut out)?,
                ProblemKind::Tresca | ProblemKind::Vi3 => run_friction(&cfg, &op, &mut out)?,
                ProblemKind::Gnep => run_gnep(&cfg, op, &mut out)?,
                ProblemKind::Fixture => unreachable!("handled above"),
            }
        }
    };
    let status = if !outcome.converged {
        Status::NotConverged
    } else if !outcome.verified {
        Status::VerifierFailed
    } else {
        Status::Success
    };
    let report = json!({
        "problem": problem_name(cfg.problem),
        "status": status,
        "exit_code": status.exit_code(),
        "versions": { "regvi": env!("CARGO_PKG_VERSION") },
        "config": cfg,
        "convergence": outcome.convergence,
        "results": outcome.details,
    });
    out.json("report.json", &report)?;
    Ok(RunSummary {
        status,
        directory: out.root().to_path_buf(),
        files: out.written().to_vec(),
        report,
    })
}

fn compile(expr: &Expr, key: &str) -> Result<regvi_core::ScalarFn, ConfigError> {
    expr.compile(key)
}

pub fn build_grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    let mesh = cfg.mesh.as_ref().ok_or_else(|| ConfigError::new("mesh", "section is required"))?;
    let kind = match mesh.domain {
        DomainName::Interval => DomainKind::Interval,
        DomainName::Rectangle => DomainKind::Rectangle,
        DomainName::LShape => DomainKind::LShape,
    };
    let extents: Vec<(f64, f64)> = mesh.extents.iter().map(|e| (e[0], e[1])).collect();
    Grid::build(kind, &extents, &mesh.n).map_err(|e| ConfigError::new("mesh", e.to_string()).into())
}

pub fn build_operator(cfg: &RunConfig) -> Result<DiscreteOperator, CliError> {
    let grid = Arc::new(build_grid(cfg)?);
    let mut spec = BoundarySpec::new();
    for (k, b) in cfg.boundary.iter().enumerate() {
        let key = format!("boundary[{k}]");
        let side = match b.select {
            SelectName::All => None,
            SelectName::West => Some(Side::West),
            SelectName::East => Some(Side::East),
            SelectName::South => Some(Side::South),
            SelectName::North => Some(Side::North),
            SelectName::InnerVertical => Some(Side::InnerVertical),
            SelectName::InnerHorizontal => Some(Side::InnerHorizontal),
        };
        let selector = match (side, b.range) {
            (None, None) => Selector::All,
            (None, Some(_)) => return Err(ConfigError::new(format!("{key}.range"), "needs a side, not `all`").into()),
            (Some(s), None) => Selector::Side(s),
            (Some(s), Some([lo, hi])) => Selector::SideRange { side: s, lo, hi },
        };
        let value = compile(&b.value, &format!("{key}.value"))?;
        let condition = match b.condition {
            ConditionName::Dirichlet => BoundaryCondition::Dirichlet(value),
            ConditionName::Neumann => BoundaryCondition::Neumann(value),
            ConditionName::Signorini => BoundaryCondition::Signorini(value),
        };
        spec = spec.with(&b.id, selector, condition);
    }
    let labels = label_boundary(&grid, &spec).map_err(|e| ConfigError::new("boundary", e.to_string()))?;
    let a_diag = cfg
        .coefficients
        .a
        .iter()
        .enumerate()
        .map(|(k, e)| compile(e, &format!("coefficients.a[{k}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let coeff = CoefficientField {
        a_diag,
        a_zero: compile(&cfg.coefficients.a0, "coefficients.a0")?,
    };
    assemble(grid, &coeff, &labels).map_err(|e| ConfigError::new("coefficients", e.to_string()).into())
}

fn load(cfg: &RunConfig, op: &DiscreteOperator) -> Result<Field, CliError> {
    Ok(Field::sample(op.grid(), &compile(&cfg.coefficients.f, "coefficients.f")?))
}

fn node_cols(op: &DiscreteOperator, node: usize) -> Vec<String> {
    let x = op.grid().node(node).x;
    vec![node.to_string(), num(x[0]), num(x[1])]
}

fn trace_rows(report: &ConvergenceReport) -> Vec<Vec<String>> {
    report
        .iterations
        .iter()
        .map(|r| vec![r.k.to_string(), num(r.value), num(r.step)])
        .collect()
}

fn verify_tol(cfg: &RunConfig) -> f64 {
    cfg.solver.verify_tol.expect("filled by RunConfig::effective")
}

fn tol(cfg: &RunConfig) -> f64 {
    cfg.solver.tol.expect("filled by RunConfig::effective")
}

fn method(cfg: &RunConfig) -> &str {
    cfg.solver.method.as_deref().expect("filled by RunConfig::effective")
}

fn run_poisson(cfg: &RunConfig, op: &DiscreteOperator, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let f = load(cfg, op)?;
    let b = op.rhs(&f)?;
    let u = solve_system(op, &b)?;
    let au = op.matrix().mul_vec(&u);
    let residual = au.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let field = op.expand(&u)?;
    out.csv(
        "u.csv",
        &["node_id", "x1", "x2", "u"],
        (0..op.grid().num_nodes()).map(|n| {
            let mut row = node_cols(op, n);
            row.push(num(field[n]));
            row
        }),
    )?;
    Ok(Outcome {
        converged: true,
        verified: residual <= verify_tol(cfg) * scale,
        convergence: None,
        details: json!({ "unknowns": op.n_dofs(), "residual": residual, "relative_residual": residual / scale }),
    })
}

fn run_obstacle(cfg: &RunConfig, op: &DiscreteOperator, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let f = load(cfg, op)?;
    let spec = if cfg.problem == ProblemKind::Signorini {
        ObstacleSpec::signorini()
    } else {
        let ob = cfg.obstacle.as_ref().expect("checked by RunConfig::effective");
        let lower = match &ob.lower {
            Some(e) => Field::sample(op.grid(), &compile(e, "obstacle.lower")?),
            None => Field::constant(op.grid(), f64::NEG_INFINITY),
        };
        match &ob.upper {
            Some(e) => ObstacleSpec::between(lower, Field::sample(op.grid(), &compile(e, "obstacle.upper")?)),
            None => ObstacleSpec::lower(lower),
        }
    };
    let vi_method = match method(cfg) {
        "psor" => ViMethod::Psor { omega: cfg.solver.omega },
        _ => ViMethod::Pdas { c: cfg.solver.c },
    };
    let opts = ViOptions {
        method: vi_method,
        tol: tol(cfg),
        max_iter: cfg.solver.max_iter,
    };
    let sol = solve_obstacle(op, &f, &spec, &opts).map_err(|e| match e {
        regvi_core::Error::InvalidObstacle(m) => CliError::Config(ConfigError::new("obstacle", m)),
        other => other.into(),
    })?;
    let residuals = verify_cp1(op, &f, &spec, &sol)?;
    let lambda = sol.lambda_field(op)?;
    let active: Vec<bool> = {
        let mut a = vec![false; op.grid().num_nodes()];
        for &d in &sol.active_set {
            a[op.dof_nodes()[d]] = true;
        }
        a
    };
    out.csv(
        "u.csv",
        &["node_id", "x1", "x2", "u", "lambda", "active"],
        (0..op.grid().num_nodes()).map(|n| {
            let mut row = node_cols(op, n);
            row.extend([num(sol.u[n]), num(lambda[n]), u8::from(active[n]).to_string()]);
            row
        }),
    )?;
    out.csv("iterations.csv", &["k", "residual", "step"], trace_rows(&sol.report))?;
    Ok(Outcome {
        converged: sol.converged(),
        verified: residuals.passes(verify_tol(cfg)),
        details: json!({
            "unknowns": op.n_dofs(),
            "constrained": sol.constrained.len(),
            "active": sol.active_set.len(),
            "residuals": residuals,
            "verify_tol": verify_tol(cfg),
        }),
        convergence: Some(sol.report),
    })
}

fn run_friction(cfg: &RunConfig, op: &DiscreteOperator, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let f = load(cfg, op)?;
    let fc = cfg.friction.as_ref().expect("checked by RunConfig::effective");
    let g = compile(&fc.g, "friction.g")?;
    let spec = if fc.on == "domain" {
        FrictionSpec::on_domain(op, &g)
    } else {
        FrictionSpec::on_segment(op, &fc.on, &g)
    }
    .map_err(|e| ConfigError::new("friction", e.to_string()))?;
    let spec = match fc.cone {
        Some(c) => {
            let sign = match c {
                ConeName::Free => ConeSign::Free,
                ConeName::Nonnegative => ConeSign::Nonnegative,
                ConeName::Nonpositive => ConeSign::Nonpositive,
            };
            spec.with_cone(vec![sign; op.n_dofs()])
        }
        None => spec,
    };
    let opts = FrictionOptions {
        method: if method(cfg) == "uzawa" { FrictionMethod::Uzawa } else { FrictionMethod::SemismoothNewton },
        tol: tol(cfg),
        max_iter: cfg.solver.max_iter,
        c: cfg.solver.c,
    };
    let sol = if cfg.problem == ProblemKind::Vi3 {
        solve_vi3(op, &f, &spec, &opts)?
    } else {
        solve_vi2(op, &f, &spec, &opts)?
    };
    let residuals = verify_mp2_mp3(op, &f, &spec, &sol)?;
    let nodes = op.grid().num_nodes();
    let mut p_col = vec![String::new(); nodes];
    let mut state_col = vec![String::new(); nodes];
    let mut lambda_col = vec![0.0; nodes];
    let mut active = vec![false; nodes];
    for (k, &d) in spec.nodes.iter().enumerate() {
        let n = op.dof_nodes()[d];
        p_col[n] = num(sol.p[k]);
        state_col[n] = sol.states[k].as_str().to_string();
        active[n] = sol.states[k] == ContactState::Stick;
    }
    if let Some(l) = &sol.lambda {
        for (d, &v) in l.iter().enumerate() {
            let n = op.dof_nodes()[d];
            lambda_col[n] = v;
            active[n] |= v != 0.0;
        }
    }
    out.csv(
        "u.csv",
        &["node_id", "x1", "x2", "u", "lambda", "active", "p", "state"],
        (0..nodes).map(|n| {
            let mut row = node_cols(op, n);
            row.extend([
                num(sol.u[n]),
                num(lambda_col[n]),
                u8::from(active[n]).to_string(),
                p_col[n].clone(),
                state_col[n].clone(),
            ]);
            row
        }),
    )?;
    out.csv("iterations.csv", &["k", "residual", "step"], trace_rows(&sol.report))?;
    let count = |s: ContactState| sol.states.iter().filter(|&&x| x == s).count();
    Ok(Outcome {
        converged: sol.converged(),
        verified: residuals.passes(verify_tol(cfg)),
        details: json!({
            "unknowns": op.n_dofs(),
            "friction_nodes": spec.nodes.len(),
            "stick": count(ContactState::Stick),
            "slip_plus": count(ContactState::SlipPlus),
            "slip_minus": count(ContactState::SlipMinus),
            "used_fallback": sol.used_fallback,
            "residuals": residuals,
            "verify_tol": verify_tol(cfg),
        }),
        convergence: Some(sol.report),
    })
}

/// Builds the game described by the `gnep` section on the given operator.
pub fn build_gnep(cfg: &RunConfig, op: DiscreteOperator) -> Result<GnepInstance, CliError> {
    let gc = cfg.gnep.as_ref().ok_or_else(|| ConfigError::new("gnep", "section is required"))?;
    let grid = op.grid_arc().clone();
    let players = gc
        .players
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let key = format!("gnep.players[{k}]");
            let observe = compile_predicate(&format!("{key}.observe"), &p.observe)?;
            Ok(Player {
                gamma: p.gamma,
                beta: p.beta,
                target: Field::sample(&grid, &compile(&p.target, &format!("{key}.target"))?),
                obs_mask: grid.nodes().iter().map(|n| observe(n.x)).collect(),
                control_box: (p.control_box[0], p.control_box[1]),
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let f = Field::sample(&grid, &compile(&cfg.coefficients.f, "coefficients.f")?);
    let lo = Field::sample(&grid, &compile(&gc.state_lower, "gnep.state_lower")?);
    let hi = Field::sample(&grid, &compile(&gc.state_upper, "gnep.state_upper")?);
    GnepInstance::new(op, players, f, (lo, hi)).map_err(|e| match e {
        regvi_core::Error::InvalidGnep(m) => ConfigError::new("gnep", m).into(),
        other => other.into(),
    })
}

/// Relaxation settings from the `gnep` and `solver` sections.
pub fn relaxation_options(cfg: &RunConfig) -> RelaxationOptions {
    let gc = cfg.gnep.as_ref().expect("checked by RunConfig::effective");
    RelaxationOptions {
        tau0: gc.tau0,
        shrink: gc.shrink,
        sigma: gc.sigma,
        tau_min: gc.tau_min,
        tol: tol(cfg),
        max_iter: cfg.solver.max_iter.unwrap_or(200),
    }
}

fn run_gnep(cfg: &RunConfig, op: DiscreteOperator, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let inst = build_gnep(cfg, op)?;
    let (state, report) = solve_gnep_relaxation(&inst, &relaxation_options(cfg))?;
    let gc = cfg.gnep.as_ref().expect("checked by RunConfig::effective");
    let check = verify_normalized(&inst, &state, gc.samples, cfg.solver.seed, verify_tol(cfg))?;
    let op = inst.op();
    let nodes = op.grid().num_nodes();
    out.csv(
        "state.csv",
        &["node_id", "x1", "x2", "y"],
        (0..nodes).map(|n| {
            let mut row = node_cols(op, n);
            row.push(num(state.y[n]));
            row
        }),
    )?;
    for (nu, (u, w)) in state.u.iter().zip(&state.w).enumerate() {
        out.csv(
            &format!("control_{}.csv", nu + 1),
            &["node_id", "x1", "x2", "u", "w"],
            (0..nodes).map(|n| {
                let mut row = node_cols(op, n);
                row.extend([num(u[n]), num(w[n])]);
                row
            }),
        )?;
    }
    out.csv("merit.csv", &["k", "merit", "step"], trace_rows(&report))?;
    let at_box: Vec<usize> = inst
        .players()
        .iter()
        .zip(&state.u)
        .map(|(p, u)| {
            op.dof_nodes()
                .iter()
                .filter(|&&n| {
                    let scale = 1e-9 * (1.0 + u[n].abs());
                    (u[n] - p.control_box.0).abs() <= scale || (u[n] - p.control_box.1).abs() <= scale
                })
                .count()
        })
        .collect();
    Ok(Outcome {
        converged: report.converged(),
        verified: check.passed,
        details: json!({
            "players": inst.num_players(),
            "unknowns_per_player": inst.n(),
            "sweeps": report.iterations.len().saturating_sub(1),
            "merit": state.merit,
            "controls_at_box": at_box,
            "verification": check,
        }),
        convergence: Some(report),
    })
}

fn run_fixture(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let fc = cfg.fixture.as_ref().expect("checked by RunConfig::effective");
    let case = case_by_name(&fc.name).map_err(|e| ConfigError::new("fixture.name", e.to_string()))?;
    let levels = fc.levels.clone().unwrap_or_else(|| case.levels.clone());
    let study = run_convergence_study(&case, &levels).map_err(|e| match e {
        regvi_core::Error::InvalidParameter(m) => CliError::Config(ConfigError::new("fixture.levels", m)),
        other => other.into(),
    })?;
    write_study(out, &study)?;
    Ok(Outcome {
        converged: true,
        verified: study.within_window,
        convergence: None,
        details: serde_json::to_value(&study)?,
    })
}

pub(crate) fn write_study(out: &mut OutputDir, study: &regvi_core::fixtures::ConvergenceStudy) -> Result<(), CliError> {
    out.csv(
        "convergence.csv",
        &["m", "h", "unknowns", "error"],
        study
            .levels
            .iter()
            .map(|l| vec![l.m.to_string(), num(l.h), l.unknowns.to_string(), num(l.error)]),
    )
}
