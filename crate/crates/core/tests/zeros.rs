use gafhole::gaf::sample_gaf;
use gafhole::special::{TruncationPlan, WeightModel};
use gafhole::zeros::*;
use gafhole::{Complex64, Error};
use proptest::prelude::*;

fn plan(beta: f64, r: f64) -> (WeightModel, TruncationPlan) {
    let m = WeightModel::new(beta).unwrap();
    (m, TruncationPlan::covering(&m, r, 2.0, 36.0).unwrap())
}

#[test]
fn conjugation_symmetry() {
    let (m, p) = plan(2.0, 1.5);
    for i in 0..20 {
        let s = sample_gaf(&m, &p, 4, i);
        let z = find_zeros(&s, 3.0).unwrap();
        let zc = find_zeros(&s.conjugate(), 3.0).unwrap();
        assert_eq!(z.zeros.len(), zc.zeros.len());
        for a in &z.zeros {
            let best = zc.zeros.iter().map(|b| (b - a.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "trial {i}: {best}");
        }
    }
}

#[test]
fn contour_and_companion_counts_agree() {
    for beta in [1.0, 2.0, 3.0] {
        let (m, p) = plan(beta, 1.5);
        for i in 0..50 {
            let s = sample_gaf(&m, &p, 8, i);
            let zs = find_zeros(&s, 3.0).unwrap();
            for r in [0.7, 1.5, 2.5] {
                assert_eq!(count_zeros_argument(&s, r).unwrap(), zs.count_within(r), "beta={beta} i={i} r={r}");
            }
        }
    }
}

#[test]
fn search_radius_is_checked() {
    let (m, p) = plan(2.0, 1.0);
    let s = sample_gaf(&m, &p, 1, 0);
    assert!(matches!(find_zeros(&s, 4.5), Err(Error::Parameter(_))));
    assert!(count_zeros_argument(&s, 0.0).is_err());
}

#[test]
fn degenerate_leading_coefficient() {
    let (m, p) = plan(2.0, 1.0);
    let mut xi: Vec<Complex64> = sample_gaf(&m, &p, 2, 0).xi;
    let n = xi.len();
    xi[n - 1] = Complex64::new(0.0, 0.0);
    let s = gafhole::gaf::GafSample::with_xi(m, p, xi).unwrap();
    assert!(matches!(find_zeros(&s, 2.0), Err(Error::DegenerateDegree { .. })));
    let red = find_zeros_with_reduction(&s, 2.0).unwrap();
    assert_eq!(red.degree_reduced, 1);
}

#[test]
fn linear_statistic_coverage() {
    let (m, p) = plan(2.0, 1.0);
    let s = sample_gaf(&m, &p, 3, 0);
    let zs = find_zeros(&s, 2.0).unwrap();
    let phi = TestFunction::RadialBump { radius: 1.5 };
    assert!(linear_statistic(&zs, &phi, 1.0).is_ok());
    assert!(matches!(linear_statistic(&zs, &phi, 2.0), Err(Error::Coverage(_))));
}

#[test]
fn known_polynomial_roots() {
    // (z − 1)(z + 2)(z − i) = z³ + (1 − i)z² + (−2 − i)z + 2i
    let c = [
        Complex64::new(0.0, 2.0),
        Complex64::new(-2.0, -1.0),
        Complex64::new(1.0, -1.0),
        Complex64::new(1.0, 0.0),
    ];
    let roots = polynomial_roots(&c).unwrap();
    for t in [Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0), Complex64::new(0.0, 1.0)] {
        assert!(roots.iter().any(|r| (r - t).norm() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_reproduce_polynomial(re in proptest::collection::vec(-1.0f64..1.0, 6), im in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let roots: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for y in &roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * y;
            }
            c = next;
        }
        let found = polynomial_roots(&c).unwrap();
        prop_assert_eq!(found.len(), 6);
        for f in &found {
            let v = c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, ck| acc * f + ck);
            prop_assert!(v.norm() < 1e-9);
        }
    }

    #[test]
    fn test_functions_bounded_and_supported(inner in 0.0f64..1.0, span in 0.5f64..2.0, x in 0.0f64..5.0, th in 0.0f64..6.3) {
        let phi = TestFunction::MollifiedAnnulus { inner, outer: inner + span, width: span / 4.0 };
        prop_assert!(phi.validate().is_ok());
        let v = phi.eval(Complex64::from_polar(x, th));
        prop_assert!((0.0..=1.0).contains(&v));
        if x > inner + span { prop_assert_eq!(v, 0.0); }
        if x >= inner + span / 4.0 && x <= inner + 3.0 * span / 4.0 { prop_assert!((v - 1.0).abs() < 1e-12); }
    }
}
