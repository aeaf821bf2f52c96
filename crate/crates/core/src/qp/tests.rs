use super::*;

fn dm(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, v)
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[test]
fn unconstrained_minimum() {
    let qp = QpProblem::new(DMatrix::identity(2, 2), dv(&[-1.0, -1.0]), DMatrix::zeros(0, 2), dv(&[]), dv(&[])).unwrap();
    let sol = qp_solve(&qp, &QpSettings::default(), None).unwrap();
    assert_eq!(sol.status, QpStatus::Solved);
    assert!((sol.z - dv(&[1.0, 1.0])).amax() < 1e-8);
}

#[test]
fn active_upper_bound() {
    let qp = QpProblem::new(DMatrix::identity(1, 1), dv(&[-10.0]), dm(1, 1, &[1.0]), dv(&[0.0]), dv(&[1.0])).unwrap();
    let sol = qp_solve(&qp, &QpSettings::default(), None).unwrap();
    assert_eq!(sol.status, QpStatus::Solved);
    assert!((sol.z[0] - 1.0).abs() < 1e-9);
    assert!((sol.y[0] - 9.0).abs() < 1e-6);
}

#[test]
fn equality_constraint() {
    // min x^2 + y^2 s.t. x + y = 1
    let qp = QpProblem::new(
        DMatrix::identity(2, 2) * 2.0,
        dv(&[0.0, 0.0]),
        dm(1, 2, &[1.0, 1.0]),
        dv(&[1.0]),
        dv(&[1.0]),
    )
    .unwrap();
    let sol = qp_solve(&qp, &QpSettings::default(), None).unwrap();
    assert_eq!(sol.status, QpStatus::Solved);
    assert!((sol.z - dv(&[0.5, 0.5])).amax() < 1e-9);
}

#[test]
fn detects_primal_infeasibility() {
    let qp = QpProblem::new(
        DMatrix::identity(1, 1),
        dv(&[0.0]),
        dm(2, 1, &[1.0, 1.0]),
        dv(&[1.0, -QP_INFINITY]),
        dv(&[QP_INFINITY, 0.0]),
    )
    .unwrap();
    let sol = qp_solve(&qp, &QpSettings::default(), None).unwrap();
    assert_eq!(sol.status, QpStatus::PrimalInfeasible);
}

#[test]
fn rejects_bad_input() {
    assert!(matches!(
        QpProblem::new(DMatrix::identity(2, 2), dv(&[0.0]), DMatrix::zeros(0, 2), dv(&[]), dv(&[])),
        Err(Error::Dimension { .. })
    ));
    assert!(QpProblem::new(dm(2, 2, &[1.0, 0.5, 0.0, 1.0]), dv(&[0.0, 0.0]), DMatrix::zeros(0, 2), dv(&[]), dv(&[])).is_err());
    assert!(QpProblem::new(DMatrix::identity(1, 1), dv(&[0.0]), dm(1, 1, &[1.0]), dv(&[1.0]), dv(&[0.0])).is_err());
}

#[test]
fn max_iter_reports_status() {
    let qp = QpProblem::new(
        dm(2, 2, &[4.0, 1.0, 1.0, 2.0]),
        dv(&[1.0, 1.0]),
        dm(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
        dv(&[1.0, 0.0, 0.0]),
        dv(&[1.0, 0.7, 0.7]),
    )
    .unwrap();
    let settings = QpSettings { max_iter: 1, polish: false, ..Default::default() };
    let sol = qp_solve(&qp, &settings, None).unwrap();
    assert_eq!(sol.status, QpStatus::MaxIter);
    assert_eq!(sol.iterations, 1);
}

fn small_problem() -> QpProblem {
    QpProblem::new(
        dm(2, 2, &[4.0, 1.0, 1.0, 2.0]),
        dv(&[1.0, 1.0]),
        dm(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
        dv(&[1.0, 0.0, 0.0]),
        dv(&[1.0, 0.7, 0.7]),
    )
    .unwrap()
}

#[test]
fn known_small_problem() {
    let sol = qp_solve(&small_problem(), &QpSettings::default(), None).unwrap();
    assert_eq!(sol.status, QpStatus::Solved);
    assert!((sol.z - dv(&[0.3, 0.7])).amax() < 1e-8);
    assert!((sol.objective - 1.88).abs() < 1e-8);
}

#[test]
fn warm_start_at_solution_finishes_immediately() {
    let qp = small_problem();
    let mut solver = QpSolver::new(qp.clone(), QpSettings::default()).unwrap();
    let first = solver.solve();
    solver.update_vectors(&qp.q_vec, &qp.lower, &qp.upper).unwrap();
    solver.warm_start(&first.z, &first.y).unwrap();
    let second = solver.solve();
    assert!(second.iterations <= 2, "iterations {}", second.iterations);
    assert!((second.z - first.z).amax() < 1e-8);
}

#[test]
fn update_bounds_moves_optimum_to_new_boundary() {
    let qp = small_problem();
    let mut solver = QpSolver::new(qp.clone(), QpSettings::default()).unwrap();
    let first = solver.solve();
    let upper = dv(&[1.0, 0.7, 0.6]);
    solver.update_vectors(&qp.q_vec, &qp.lower, &upper).unwrap();
    solver.warm_start(&first.z, &first.y).unwrap();
    let second = solver.solve();
    assert_eq!(second.status, QpStatus::Solved);
    assert!((second.z - dv(&[0.4, 0.6])).amax() < 1e-8);
}

#[test]
fn update_rejects_dimension_change() {
    let qp = small_problem();
    assert!(qp_update_vectors(&qp, &dv(&[1.0]), &qp.lower, &qp.upper).is_err());
    let mut solver = QpSolver::new(qp.clone(), QpSettings::default()).unwrap();
    assert!(solver.update_vectors(&qp.q_vec, &dv(&[0.0]), &qp.upper).is_err());
}

#[test]
fn deterministic() {
    let a = qp_solve(&small_problem(), &QpSettings::default(), None).unwrap();
    let b = qp_solve(&small_problem(), &QpSettings::default(), None).unwrap();
    assert_eq!(a, b);
}
