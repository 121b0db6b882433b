use std::sync::Arc;

use proptest::prelude::*;

use regvi_core::assembly::{assemble, solve_dirichlet, CoefficientField};
use regvi_core::gnep::{nikaido_isoda, GnepInstance, Player};
use regvi_core::mesh::{label_boundary, BoundarySpec, Grid};
use regvi_core::sparse::EnvelopeCholesky;
use regvi_core::vi::Bounds;
use regvi_core::{Field, ScalarFn};

fn dirichlet_op(grid: Grid, coeff: CoefficientField) -> regvi_core::assembly::DiscreteOperator {
    let grid = Arc::new(grid);
    let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
    assemble(grid, &coeff, &labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rectangle_node_counts(n1 in 1usize..12, n2 in 1usize..12) {
        let g = Grid::rectangle((0.0, 2.0), (-1.0, 1.0), [n1, n2]).unwrap();
        prop_assert_eq!(g.num_nodes(), (n1 + 2) * (n2 + 2));
        prop_assert_eq!(g.num_interior(), n1 * n2);
        prop_assert_eq!(g.boundary_nodes().len(), 2 * (n1 + n2) + 4);
    }

    #[test]
    fn grid_construction_is_deterministic(k in 1usize..6) {
        let n = 2 * k + 1;
        let a = serde_json::to_string(&Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [n, n]).unwrap().dump(None)).unwrap();
        let b = serde_json::to_string(&Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [n, n]).unwrap().dump(None)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn operator_is_symmetric_positive_definite(
        n1 in 2usize..9,
        n2 in 2usize..9,
        c0 in 0.5f64..3.0,
        c1 in -0.4f64..0.4,
        r in 0.0f64..2.0,
    ) {
        let coeff = CoefficientField {
            a_diag: vec![
                ScalarFn::new(move |x| c0 + c1 * x[0]),
                ScalarFn::new(move |x| c0 - c1 * x[1]),
            ],
            a_zero: ScalarFn::constant(r),
        };
        let op = dirichlet_op(Grid::rectangle((0.0, 1.0), (0.0, 1.0), [n1, n2]).unwrap(), coeff);
        prop_assert!(op.matrix().symmetry_defect() <= 1e-12 * op.matrix().max_abs());
        prop_assert!(EnvelopeCholesky::factor(op.matrix()).is_ok());
    }

    #[test]
    fn nonnegative_load_gives_nonnegative_solution(values in proptest::collection::vec(0.0f64..10.0, 49)) {
        let op = dirichlet_op(
            Grid::rectangle((0.0, 1.0), (0.0, 1.0), [5, 5]).unwrap(),
            CoefficientField::laplacian(2),
        );
        let f = Field::from_values(op.grid(), values).unwrap();
        let u = solve_dirichlet(&op, &f).unwrap();
        prop_assert!(u.values().iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn box_projection_is_idempotent(v in -10.0f64..10.0, lo in -5.0f64..0.0, width in 0.0f64..5.0) {
        let b = Bounds { lower: vec![lo], upper: vec![lo + width] };
        let p = b.project(0, v);
        prop_assert_eq!(b.project(0, p), p);
        prop_assert!(p >= lo && p <= lo + width);
    }

    #[test]
    fn nikaido_isoda_vanishes_on_the_diagonal(w in proptest::collection::vec(-1.0f64..1.0, 10)) {
        let grid = Arc::new(Grid::interval(0.0, 1.0, 5).unwrap());
        let labels = label_boundary(&grid, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        let op = assemble(grid.clone(), &CoefficientField::laplacian(1), &labels).unwrap();
        let players = (0..2)
            .map(|k| Player {
                gamma: 0.1,
                beta: 1.0 + k as f64,
                target: Field::constant(&grid, 0.2),
                obs_mask: vec![true; grid.num_nodes()],
                control_box: (-1.0, 1.0),
            })
            .collect();
        let free = (Field::constant(&grid, f64::NEG_INFINITY), Field::constant(&grid, f64::INFINITY));
        let inst = GnepInstance::new(op, players, Field::constant(&grid, 1.0), free).unwrap();
        let x = vec![w[..5].to_vec(), w[5..].to_vec()];
        prop_assert_eq!(nikaido_isoda(&inst, &x, &x).unwrap(), 0.0);
    }
}
