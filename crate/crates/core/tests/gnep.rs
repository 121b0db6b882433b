use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regvi_core::assembly::{assemble, CoefficientField};
use regvi_core::fixtures::oracle_gnep_fixed_point;
use regvi_core::gnep::{
    best_response, merit, monotonicity_margin, nikaido_isoda, solve_formulation_ii,
    solve_gnep_relaxation, theta, verify_normalized, GnepInstance, Player, RelaxationOptions,
    Strategy,
};
use regvi_core::mesh::{label_boundary, BoundarySpec, Grid};
use regvi_core::Field;

fn instance(grid: Grid, players: Vec<Player>, f: f64, state: (f64, f64)) -> GnepInstance {
    try_instance(grid, players, f, state).unwrap()
}

fn try_instance(grid: Grid, players: Vec<Player>, f: f64, state: (f64, f64)) -> regvi_core::Result<GnepInstance> {
    let grid = Arc::new(grid);
    let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
    let op = assemble(grid.clone(), &CoefficientField::laplacian(grid.dim()), &labels).unwrap();
    let players = players
        .into_iter()
        .map(|mut p| {
            if p.obs_mask.is_empty() {
                p.obs_mask = vec![true; grid.num_nodes()];
            }
            p
        })
        .collect();
    GnepInstance::new(
        op,
        players,
        Field::constant(&grid, f),
        (Field::constant(&grid, state.0), Field::constant(&grid, state.1)),
    )
}

fn player(grid: &Grid, gamma: f64, beta: f64, target: f64, bx: (f64, f64)) -> Player {
    Player {
        gamma,
        beta,
        target: Field::constant(grid, target),
        obs_mask: Vec::new(),
        control_box: bx,
    }
}

/// Random small game; redrawn until the boxes admit a feasible control.
fn random_tiny(rng: &mut ChaCha8Rng, n: usize, players: usize) -> GnepInstance {
    loop {
        if let Ok(inst) = draw_tiny(rng, n, players) {
            return inst;
        }
    }
}

fn draw_tiny(rng: &mut ChaCha8Rng, n: usize, players: usize) -> regvi_core::Result<GnepInstance> {
    let grid = Grid::interval(0.0, 1.0, n).unwrap();
    let ps = (0..players)
        .map(|_| {
            let mut p = player(
                &grid,
                rng.random_range(0.01..0.5),
                rng.random_range(0.5..2.0),
                rng.random_range(-1.0..1.0),
                (rng.random_range(-8.0..-1.0), rng.random_range(1.0..8.0)),
            );
            let split = rng.random_range(0.2..0.8);
            let left = rng.random_bool(0.5);
            p.obs_mask = grid.nodes().iter().map(|nd| (nd.x[0] < split) == left).collect();
            p
        })
        .collect();
    let f = rng.random_range(-5.0..5.0);
    let cap = rng.random_range(0.05..0.3);
    try_instance(grid, ps, f, (-cap, cap))
}

fn tight() -> RelaxationOptions {
    RelaxationOptions {
        tol: 1e-13,
        max_iter: 500,
        ..Default::default()
    }
}

#[test]
fn one_node_games_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..12 {
        let np = 2 + trial % 2;
        let inst = random_tiny(&mut rng, 1, np);
        let (state, rep) = solve_gnep_relaxation(&inst, &tight()).unwrap();
        let w = inst.strategy_of(&state).unwrap();
        let expect = oracle_gnep_fixed_point(&inst, 1e-10).unwrap();
        assert!(monotonicity_margin(&inst) > 0.0);
        assert_eq!(expect.len(), 1, "trial {trial}");
        for (a, b) in w.iter().zip(&expect[0]) {
            assert!((a[0] - b[0]).abs() < 1e-6, "trial {trial}: {w:?} vs {expect:?} ({:?})", rep.terminated);
        }
    }
}

#[test]
fn single_player_reduces_to_optimal_control() {
    let grid = Grid::interval(0.0, 1.0, 9).unwrap();
    let p = player(&grid, 1e-3, 1.0, 0.4, (-3.0, 3.0));
    let inst = instance(grid, vec![p], 1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let (state, rep) = solve_gnep_relaxation(&inst, &RelaxationOptions::default()).unwrap();
    assert!(rep.converged());
    assert!(rep.iterations.len() <= 2);
    let w = inst.strategy_of(&state).unwrap();
    let direct = best_response(&inst, 0, &w).unwrap();
    for (a, b) in w[0].iter().zip(&direct) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(verify_normalized(&inst, &state, 50, 1, 1e-8).unwrap().passed);

    let mut worse = state.clone();
    let node = inst.op().dof_nodes()[4];
    worse.w[0].values_mut()[node] += 1e-3;
    let report = verify_normalized(&inst, &worse, 0, 1, 1e-8).unwrap();
    assert!(!report.passed && report.nash_gaps[0] > 1e-8);
}

#[test]
fn symmetric_players_share_the_effort() {
    let grid = Grid::interval(0.0, 1.0, 7).unwrap();
    let p = player(&grid, 1e-2, 1.0, 0.3, (-2.0, 2.0));
    let inst = instance(grid, vec![p.clone(), p], -1.0, (-0.5, 0.25));
    let (state, rep) = solve_gnep_relaxation(&inst, &tight()).unwrap();
    assert!(rep.converged());
    let w = inst.strategy_of(&state).unwrap();
    for (a, b) in w[0].iter().zip(&w[1]) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn costs_agree_with_control_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let inst = random_tiny(&mut rng, 6, 2);
    let q = inst.quadrature();
    for _ in 0..5 {
        let w: Strategy = (0..2)
            .map(|_| (0..6).map(|_| rng.random_range(-0.05..0.05)).collect())
            .collect();
        let u: Vec<Vec<f64>> = (0..2).map(|nu| inst.control_of(nu, &w[nu])).collect();
        let y = inst.solve_state(&u).unwrap();
        for nu in 0..2 {
            let p = &inst.players()[nu];
            let mut expect = 0.0;
            for (k, &node) in inst.op().dof_nodes().iter().enumerate() {
                if p.obs_mask[node] {
                    expect += 0.5 * q * (y[k] - p.target[node]).powi(2);
                }
                expect += 0.5 * p.gamma * q * u[nu][k].powi(2);
            }
            let got = theta(&inst, nu, &w).unwrap();
            assert!((got - expect).abs() <= 1e-10 * expect.max(1.0));
        }
    }
}

#[test]
fn merit_is_nonnegative_and_trace_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let inst = random_tiny(&mut rng, 7, 2);
    let start = inst.initial_strategy().clone();
    assert!(merit(&inst, &start).unwrap().0 >= -1e-12);
    assert_eq!(nikaido_isoda(&inst, &start, &start).unwrap(), 0.0);
    let (_, rep) = solve_gnep_relaxation(&inst, &tight()).unwrap();
    for pair in rep.iterations.windows(2) {
        assert!(pair[1].value <= pair[0].value);
    }
}

#[test]
fn formulations_agree_on_tiny_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..5 {
        let inst = random_tiny(&mut rng, 5, 2);
        assert!(monotonicity_margin(&inst) > 0.0);
        let (relaxed, rep) = solve_gnep_relaxation(&inst, &tight()).unwrap();
        assert!(rep.converged(), "{:?}", rep.terminated);
        let direct = solve_formulation_ii(&inst, 1e-12).unwrap();
        for (a, b) in relaxed.y.values().iter().zip(direct.y.values()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        // controls through the state equation give the same state back
        let w = inst.strategy_of(&relaxed).unwrap();
        let u: Vec<Vec<f64>> = (0..2).map(|nu| inst.control_of(nu, &w[nu])).collect();
        let y = inst.solve_state(&u).unwrap();
        for (a, b) in y.iter().zip(inst.state_of(&w)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn perturbed_equilibrium_fails_verification() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let inst = random_tiny(&mut rng, 6, 2);
    let (state, _) = solve_gnep_relaxation(&inst, &tight()).unwrap();
    assert!(verify_normalized(&inst, &state, 100, 3, 1e-8).unwrap().passed);
    let mut bad = state.clone();
    for v in bad.w[1].values_mut() {
        *v *= 0.5;
    }
    let report = verify_normalized(&inst, &bad, 0, 3, 1e-8).unwrap();
    assert!(report.response_psi > 1e-8 && !report.passed);
}
