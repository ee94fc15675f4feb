use gafhole::measures::z_of_p;
use gafhole::special::WeightModel;
use gafhole::varopt::*;
use proptest::prelude::*;

fn closed_min(alpha: f64, beta: f64, p: f64) -> f64 {
    (alpha.ln() - 1.5) / beta + 2.0 * z_of_p(p).unwrap() / (beta * alpha * alpha)
}

fn random_feasible(grid: &[f64], raw: &[f64], p: f64, alpha: f64) -> Vec<f64> {
    let c = Constraint::for_p(p).unwrap();
    let mask: Vec<bool> = grid
        .iter()
        .map(|&r| match c {
            Constraint::MassInsideLe => r < 1.0,
            Constraint::MassClosedInsideGe => r <= 1.0,
        })
        .collect();
    project_constrained(raw, &mask, p / alpha, c == Constraint::MassInsideLe)
}

#[test]
fn solver_never_beats_closed_form() {
    let opts = VaroptOptions { grid_size: 200, ..VaroptOptions::default() };
    for (alpha, beta, p) in [(10.0, 2.0, 0.0), (10.0, 1.0, 0.5), (10.0, 2.0, 2.0)] {
        let m = WeightModel::new(beta).unwrap();
        let res = minimize_constrained(alpha, &m, p, Constraint::for_p(p).unwrap(), &opts).unwrap();
        let lower = closed_min(alpha, beta, p);
        assert!(res.objective >= lower - 1e-9, "{} < {lower}", res.objective);
        assert!(res.objective - lower < 5e-3);
        let w = &res.measure;
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn refinement_does_not_increase_objective() {
    let (alpha, beta, p) = (10.0, 2.0, 0.0);
    let m = WeightModel::new(beta).unwrap();
    let opts = VaroptOptions { grid_size: 200, ..VaroptOptions::default() };
    let c = Constraint::for_p(p).unwrap();
    let coarse = make_grid(alpha, &m, p, 200).unwrap();
    let fine = refine_grid(&coarse);
    assert!(coarse.iter().all(|x| fine.contains(x)));
    let a = minimize_on_grid(&coarse, alpha, &m, p, c, &opts).unwrap();
    let b = minimize_on_grid(&fine, alpha, &m, p, c, &opts).unwrap();
    assert!(b.objective <= a.objective + opts.tol, "{} > {}", b.objective, a.objective);
}

#[test]
fn parameter_errors() {
    let m = WeightModel::new(2.0).unwrap();
    let opts = VaroptOptions::default();
    let c = Constraint::MassInsideLe;
    assert!(minimize_constrained(2.0, &m, 0.0, c, &opts).is_err());
    assert!(minimize_constrained(10.0, &m, 12.0, Constraint::MassClosedInsideGe, &opts).is_err());
    let small = VaroptOptions { grid_size: 50, ..opts };
    assert!(minimize_constrained(10.0, &m, 0.0, c, &small).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_is_convex(
        raw1 in proptest::collection::vec(0.0f64..1.0, 200),
        raw2 in proptest::collection::vec(0.0f64..1.0, 200),
        idx in 0usize..3,
        p in prop_oneof![Just(0.0), Just(0.5), Just(2.0)],
    ) {
        let (alpha, beta) = (10.0, 2.0);
        let m = WeightModel::new(beta).unwrap();
        let grid = make_grid(alpha, &m, p, 200).unwrap();
        let n = grid.len();
        let w1 = random_feasible(&grid, &raw1[..n.min(200)].iter().cloned().chain(std::iter::repeat(0.1)).take(n).collect::<Vec<_>>(), p, alpha);
        let w2 = random_feasible(&grid, &raw2[..n.min(200)].iter().cloned().chain(std::iter::repeat(0.1)).take(n).collect::<Vec<_>>(), p, alpha);
        let lam = [0.25, 0.5, 0.75][idx];
        let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let lhs = objective(&grid, &mix, alpha, beta);
        let rhs = lam * objective(&grid, &w1, alpha, beta) + (1.0 - lam) * objective(&grid, &w2, alpha, beta);
        prop_assert!(lhs <= rhs + 1e-10, "{} > {}", lhs, rhs);
    }
}
