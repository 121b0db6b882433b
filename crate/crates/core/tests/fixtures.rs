use regvi_core::fixtures::{
    case_by_name, kinderlehrer_signorini, lshape_corner, observed_order, run_convergence_study,
    smooth_square, CASE_NAMES,
};
use regvi_core::mesh::ConditionKind;
use regvi_core::Error;

#[test]
fn slope_of_exact_power_law() {
    let h = [0.1, 0.05, 0.025];
    let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
    assert!((observed_order(&h, &e) - 1.5).abs() < 1e-12);
}

#[test]
fn smooth_case_is_second_order() {
    let case = smooth_square();
    let study = run_convergence_study(&case, &case.levels).unwrap();
    assert!(study.within_window, "order {}", study.order);
    assert!(study.levels.windows(2).all(|w| w[1].error < w[0].error));
}

#[test]
fn singular_cases_converge_slower() {
    let smooth = run_convergence_study(&smooth_square(), &[8, 16, 32]).unwrap();
    for case in [lshape_corner(), kinderlehrer_signorini()] {
        let study = run_convergence_study(&case, &case.levels).unwrap();
        assert!(study.within_window, "{}: order {}", case.name, study.order);
        assert!(study.order < smooth.order);
    }
}

#[test]
fn contact_case_touches_on_the_left() {
    let case = kinderlehrer_signorini();
    let (op, u) = case.solve(8).unwrap();
    let labels = op.labeling();
    assert_eq!(labels.count_of(ConditionKind::Signorini), 8);
    for node in labels.nodes_of("contact").unwrap() {
        assert!(u[node].abs() < 1e-10);
    }
    for node in labels.nodes_of("free").unwrap() {
        assert!(u[node] < 0.0);
    }
}

#[test]
fn lookup_by_name() {
    for name in CASE_NAMES {
        assert_eq!(case_by_name(name).unwrap().name, name);
    }
    assert!(matches!(case_by_name("nope"), Err(Error::UnknownFixture(_))));
    assert!(run_convergence_study(&smooth_square(), &[8, 16]).is_err());
}
