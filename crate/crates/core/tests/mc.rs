use gafhole::mc::*;
use gafhole::quad;
use gafhole::special::WeightModel;
use gafhole::zeros::TestFunction;
use gafhole::Error;

fn model() -> WeightModel {
    WeightModel::new(2.0).unwrap()
}

fn experiment(r: f64, trials: usize, seed: u64) -> HoleExperiment {
    let m = model();
    let plan = hole_plan(&m, r).unwrap();
    estimate_hole_probability(&m, &plan, r, trials, seed).unwrap()
}

#[test]
fn results_do_not_depend_on_workers() {
    let m = model();
    let plan = hole_plan(&m, 0.8).unwrap();
    let run = |t| with_threads(Some(t), || estimate_hole_probability(&m, &plan, 0.8, 600, 5).unwrap()).unwrap();
    let a = run(1);
    assert_eq!(a, run(3));
    let d = |t| with_threads(Some(t), || dominant_monomial_probability(&m, 0.6, 0.0, 500, 2).unwrap()).unwrap();
    assert_eq!(d(1), d(4));
    assert!(with_threads(Some(0), || ()).is_err());
}

#[test]
fn hole_probability_shrinks_with_radius() {
    let a = experiment(0.8, 2500, 1);
    let b = experiment(1.2, 2500, 1);
    let c = experiment(1.5, 2500, 1);
    assert!(a.results.p_hat >= b.results.p_hat && b.results.p_hat >= c.results.p_hat);
    assert!(a.results.ci95.0 > b.results.ci95.1);
    for e in [&a, &b, &c] {
        assert!(e.results.conditional_zero_radii.iter().all(|&x| x >= 1.0));
        let (lo, hi) = e.results.ci95;
        assert!(lo <= e.results.p_hat && e.results.p_hat <= hi);
    }
}

#[test]
fn reproducible_across_seeds() {
    let a = experiment(1.0, 2500, 11);
    let b = experiment(1.0, 2500, 12);
    assert!(a.results.ci95.0 <= b.results.ci95.1 && b.results.ci95.0 <= a.results.ci95.1);
}

#[test]
fn empty_acceptance_is_flagged() {
    let e = experiment(3.0, 100, 0);
    assert!(e.results.no_acceptance);
    assert!(e.results.conditional_zero_radii.is_empty());
    assert!(matches!(depletion_statistic(&e), Err(Error::Insufficient(_))));
    let phi = TestFunction::RadialBump { radius: 0.8 };
    assert!(matches!(conditional_linear_statistics(&e, &phi), Err(Error::Insufficient(_))));
}

#[test]
fn split_half_null_is_calibrated() {
    let m = model();
    let plan = hole_plan(&m, 1.0).unwrap();
    let runs = 20;
    let mut inside = 0;
    for seed in 0..runs {
        let e = estimate_hole_probability(&m, &plan, 1.0, 300, 1000 + seed).unwrap();
        if split_half_statistic(&e).unwrap().zscore.abs() < 3.0 {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.95 * runs as f64, "{inside}/{runs}");
}

#[test]
fn dominant_event_examples() {
    let m = model();
    let mut prev: Option<DominantResult> = None;
    for r in [0.3, 0.6, 1.0] {
        let d = dominant_monomial_probability(&m, r, 0.0, 3000, 4).unwrap();
        assert_eq!(d.k0, 0);
        assert_eq!(d.rouche_violations, 0);
        let z = gafhole::measures::z_of_p(0.0).unwrap();
        assert!((d.log_lower_bound + z * r.powi(4)).abs() < 1e-12);
        if r == 0.3 {
            assert!(d.p_hat > 0.5);
        }
        if let Some(p) = prev {
            assert!(d.p_hat <= p.p_hat || d.ci95.1 >= p.ci95.0);
        }
        prev = Some(d);
    }
    // N = (β/2)4^β e r^β = 43 at r = 1; k₀ = ⌊p⌋.
    assert_eq!(dominant_monomial_probability(&m, 1.0, 40.0, 10, 0).unwrap().k0, 40);
    assert!(matches!(dominant_monomial_probability(&m, 1.0, 50.0, 10, 0), Err(Error::Parameter(_))));
    assert!(matches!(dominant_monomial_probability(&m, 1.0, 1.0, 10, 0), Err(Error::Singular(_))));
}

#[test]
fn conditional_linear_examples() {
    let e = experiment(0.8, 1500, 21);
    let beta = 2.0;
    let outer = (1.0f64 / beta).exp();

    let inner = TestFunction::RadialBump { radius: 0.9 };
    let s = conditional_linear_statistics(&e, &inner).unwrap();
    assert_eq!(s.mean_cond, 0.0);
    assert_eq!(s.target, 0.0);

    let band = TestFunction::MollifiedAnnulus { inner: 1.05, outer: 0.95 * outer, width: 0.05 };
    let s = conditional_linear_statistics(&e, &band).unwrap();
    assert!(s.target.abs() < 1e-12);

    let beyond = TestFunction::MollifiedAnnulus { inner: outer, outer: 2.5, width: 0.3 };
    let s = conditional_linear_statistics(&e, &beyond).unwrap();
    let r: f64 = 0.8;
    let exact = r.powf(beta)
        * (beta / 2.0)
        * quad::adaptive(|u: f64| beyond.radial_profile(u.powf(1.0 / beta)), outer.powf(beta), 2.5f64.powf(beta), 1e-14, 1e-12);
    assert!((s.target - exact).abs() < 1e-9 * exact, "{} vs {exact}", s.target);
    assert!((s.gap - (s.mean_cond - s.target)).abs() < 1e-15);

    let wide = TestFunction::RadialBump { radius: 3.5 };
    assert!(matches!(conditional_linear_statistics(&e, &wide), Err(Error::Coverage(_))));
}
