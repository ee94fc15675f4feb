//! The individual commands. Each one produces a results payload; [`execute`]
//! wraps it into a [`RunRecord`] and writes it out.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use gafhole::measures::{
    equilibrium_report, minimizer, potential_closed, potential_quadrature, q_of_p, z_of_p, RadialMeasure, Regime,
};
use gafhole::mc::{
    self, conditional_linear_statistics, density_histogram_gap, depletion_statistic, dominant_monomial_probability,
    estimate_hole_probability, hole_plan, radial_chi_square, split_half_statistic, tail_exceedance_study,
    zero_count_study, Depletion, HoleExperiment,
};
use gafhole::polydensity::{joint_density, PolyDensityParams};
use gafhole::special::stirling_threshold;
use gafhole::varopt::{minimize_constrained, Constraint, VaroptOptions};
use gafhole::zeros::TestFunction;
use gafhole::{Complex64, Error, TruncationPlan, WeightModel};

use crate::params::{resolve, CheckKind, Cli, Command, Params, SimulateKind};
use crate::record::{fmt_f64, Node, RunRecord, SCHEMA_VERSION};
use crate::CliError;

/// Tolerances of the `check` commands.
pub mod tol {
    /// Sup-gap of the N = 1 radial histogram against the exact annulus means.
    pub const DENSITY_HIST: f64 = 0.02;
    /// Pointwise gap of the N = 1 density against `(1/π)(1+|z|²)^{-2}`.
    pub const DENSITY_POINTWISE: f64 = 1e-12;
    /// Mean zero count vs the intensity prediction, in standard errors.
    pub const INTENSITY_SE: f64 = 5.0;
    pub const STIRLING_MAX_THRESHOLD: u64 = 50;
    pub const STIRLING_K_MAX: u64 = 100_000;
    /// Closed-form potential against quadrature.
    pub const POTENTIAL: f64 = 1e-10;
    pub const EQUILIBRIUM: f64 = 1e-9;
    pub const ENERGY_IDENTITY: f64 = 1e-8;
}

/// Radius of the `check density` histogram and number of annuli.
pub const DENSITY_RMAX: f64 = 3.0;
pub const DENSITY_BINS: usize = 30;
/// Terms beyond the truncation summed by `check tail`.
pub const TAIL_EXTRA_TERMS: usize = 200;

/// Payload of one command, before it is wrapped into a record.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub results: Node,
    /// CSV body for `table`.
    pub csv: Option<String>,
    /// Set when a check or the optimizer reported failure (exit code 3).
    pub failure: Option<String>,
}

impl Payload {
    fn new(results: Node) -> Self {
        Payload { results, csv: None, failure: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub record: RunRecord,
    pub csv: Option<String>,
    pub failure: Option<String>,
}

/// Resolves parameters, runs the command and writes its files (or stdout).
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let params = resolve(&cli.command, &cli.flags)?;
    let started_at = now();
    let payload = run_command(&cli.command, &params)?;
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        command: cli.command.name(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: now(),
        params: params.echo(),
        results: payload.results,
    };
    write_outputs(&params, &record, payload.csv.as_deref())?;
    Ok(Outcome { record, csv: payload.csv, failure: payload.failure })
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

/// Path of the record that accompanies a CSV table.
pub fn record_path_for(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".record");
    PathBuf::from(s)
}

fn write_outputs(params: &Params, record: &RunRecord, csv: Option<&str>) -> Result<(), CliError> {
    let text = record.write();
    match (&params.out, csv) {
        (Some(path), Some(csv)) => {
            std::fs::write(path, csv)?;
            std::fs::write(record_path_for(path), text)?;
        }
        (Some(path), None) => std::fs::write(path, text)?,
        (None, Some(csv)) => print!("{csv}"),
        (None, None) => print!("{text}"),
    }
    Ok(())
}

/// Runs one command under the requested thread cap.
pub fn run_command(command: &Command, params: &Params) -> Result<Payload, CliError> {
    let command = *command;
    let params = params.clone();
    mc::with_threads(params.threads, move || dispatch(&command, &params))?
}

fn dispatch(command: &Command, params: &Params) -> Result<Payload, CliError> {
    let model = WeightModel::new(params.beta)?;
    match command {
        Command::Table => cmd_table(params),
        Command::Measure => cmd_measure(params, &model),
        Command::Varopt => cmd_varopt(params, &model),
        Command::Simulate { kind } => match kind {
            SimulateKind::Hole => cmd_hole(params, &model),
            SimulateKind::Conditional => cmd_conditional(params, &model),
            SimulateKind::Dominant => cmd_dominant(params, &model),
        },
        Command::Check { kind } => match kind {
            CheckKind::Density => check_density(params, &model),
            CheckKind::Intensity => check_intensity(params, &model),
            CheckKind::Stirling => check_stirling(&model),
            CheckKind::Tail => check_tail(params, &model),
            CheckKind::Potential => check_potential(params, &model),
        },
    }
}

fn scalar_f(v: f64) -> Node {
    Node::scalar(fmt_f64(v))
}

fn interval(lo: f64, hi: f64, trials: usize) -> Node {
    let mut n = Node::section();
    n.push("lo", Node::mc(lo, trials));
    n.push("hi", Node::mc(hi, trials));
    n
}

/// `(1/β)(ln α − 3/2) + 2Z_p/(βα²)`, the minimal energy.
pub fn closed_form_energy(alpha: f64, beta: f64, p: f64) -> Result<f64, CliError> {
    Ok((alpha.ln() - 1.5) / beta + 2.0 * z_of_p(p)? / (beta * alpha * alpha))
}

/// One row of the `table` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub p: f64,
    /// `None` at the singular level p = 1.
    pub q_z: Option<(f64, f64)>,
    pub regime: &'static str,
}

pub fn table_rows(p_list: &[f64]) -> Result<Vec<TableRow>, CliError> {
    p_list
        .iter()
        .map(|&p| match Regime::of(p) {
            Ok(r) => Ok(TableRow { p, q_z: Some((q_of_p(p)?, z_of_p(p)?)), regime: r.as_str() }),
            Err(Error::Singular(_)) => Ok(TableRow { p, q_z: None, regime: "singular" }),
            Err(e) => Err(e.into()),
        })
        .collect()
}

fn cmd_table(params: &Params) -> Result<Payload, CliError> {
    let rows = table_rows(&params.p)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["p", "q", "Z_p", "regime"]).map_err(io)?;
    let mut table = Node::section();
    for (i, row) in rows.iter().enumerate() {
        let (q, z) = match row.q_z {
            Some((q, z)) => (fmt_f64(q), fmt_f64(z)),
            None => (String::new(), String::new()),
        };
        w.write_record([fmt_f64(row.p), q, z, row.regime.to_string()]).map_err(io)?;
        let mut n = Node::section();
        n.push("p", scalar_f(row.p));
        if let Some((q, z)) = row.q_z {
            n.push("q", Node::closed_form(q));
            n.push("Z_p", Node::closed_form(z));
        }
        n.push("regime", Node::scalar(row.regime));
        table.push(format!("row_{i}"), n);
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    let mut results = Node::section();
    results.push("rows", table);
    Ok(Payload { csv: Some(String::from_utf8(bytes).expect("CSV is UTF-8")), ..Payload::new(results) })
}

fn measure_node(mu: &RadialMeasure) -> Node {
    let mut atoms = Node::section();
    for (i, a) in mu.atoms.iter().enumerate() {
        let mut n = Node::section();
        n.push("radius", Node::closed_form(a.radius));
        n.push("mass", Node::closed_form(a.mass));
        atoms.push(format!("atom_{i}"), n);
    }
    let mut pieces = Node::section();
    for (i, p) in mu.pieces.iter().enumerate() {
        let mut n = Node::section();
        n.push("r_in", Node::closed_form(p.r_in));
        n.push("r_out", Node::closed_form(p.r_out));
        n.push("density_coeff", Node::closed_form(p.coeff));
        n.push("mass", Node::closed_form(p.mass(mu.beta)));
        pieces.push(format!("piece_{i}"), n);
    }
    let mut n = Node::section();
    n.push("atoms", atoms);
    n.push("pieces", pieces);
    n
}

fn cmd_measure(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let p = params.single_p()?;
    let min = minimizer(params.alpha, model, p)?;
    let report = equilibrium_report(&min.measure, params.alpha, model)?;
    let closed = closed_form_energy(params.alpha, params.beta, p)?;
    let mut results = Node::section();
    results.push("regime", Node::scalar(min.params.regime.as_str()));
    results.push("q", Node::closed_form(min.params.q));
    results.push("Z_p", Node::closed_form(min.params.z_p));
    results.push("measure", measure_node(&min.measure));
    results.push("mass", Node::closed_form(min.measure.total_mass()));
    let mut energy = Node::section();
    energy.push("b_value", Node::closed_form(report.b_value));
    energy.push("sigma_value", Node::closed_form(report.sigma_value));
    energy.push("i_value", Node::closed_form(report.i_value));
    energy.push("i_closed_form", Node::closed_form(closed));
    energy.push("i_gap", Node::closed_form((report.i_value - closed).abs()));
    energy.push("g_max", Node::closed_form(report.g_max));
    energy.push("g_support_dev", Node::closed_form(report.g_support_dev));
    energy.push("g_at_unit", Node::closed_form(report.g_at_unit));
    results.push("energy", energy);
    Ok(Payload::new(results))
}

/// Open radial intervals of `[0, α^{1/β}]` that carry no mass of the exact minimizer.
pub fn forbidden_gaps(mu: &RadialMeasure, top: f64) -> Vec<(f64, f64)> {
    let mut support: Vec<(f64, f64)> = mu.atoms.iter().filter(|a| a.mass > 0.0).map(|a| (a.radius, a.radius)).collect();
    support.extend(mu.pieces.iter().map(|p| (p.r_in, p.r_out.min(top))));
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gaps = Vec::new();
    let mut reach = 0.0f64;
    for (lo, hi) in support {
        if lo > reach {
            gaps.push((reach, lo));
        }
        reach = reach.max(hi);
    }
    gaps
}

pub fn parse_constraint(s: &str) -> Result<Constraint, CliError> {
    match s {
        "mass_inside_le" => Ok(Constraint::MassInsideLe),
        "mass_closed_inside_ge" => Ok(Constraint::MassClosedInsideGe),
        other => Err(CliError::Parameter(format!("unknown constraint `{other}`"))),
    }
}

fn cmd_varopt(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let p = params.single_p()?;
    let constraint = match &params.constraint {
        Some(s) => parse_constraint(s)?,
        None => Constraint::for_p(p)?,
    };
    let options = VaroptOptions { grid_size: params.grid, ..VaroptOptions::default() };
    let res = minimize_constrained(params.alpha, model, p, constraint, &options)?;
    let closed = closed_form_energy(params.alpha, params.beta, p)?;
    let exact = minimizer(params.alpha, model, p)?;
    let top = params.alpha.powf(1.0 / params.beta);
    let w = &res.measure;
    let band: f64 = forbidden_gaps(&exact.measure, top).iter().map(|&(lo, hi)| w.mass_between(lo, hi, false, false)).sum();
    let mut weights = Node::section();
    for (i, (r, m)) in w.grid.iter().zip(&w.weights).enumerate() {
        if *m > 0.0 {
            let mut n = Node::section();
            n.push("radius", scalar_f(*r));
            n.push("weight", Node::optimizer(*m));
            weights.push(format!("node_{i}"), n);
        }
    }
    let mut results = Node::section();
    results.push("constraint", Node::scalar(constraint.as_str()));
    results.push("grid_size", Node::scalar(w.grid.len()));
    results.push("objective", Node::optimizer(res.objective));
    results.push("closed_form_minimum", Node::closed_form(closed));
    results.push("gap", Node::optimizer(res.objective - closed));
    results.push("forbidden_band_mass", Node::optimizer(band));
    results.push("unit_circle_weight", Node::optimizer(w.weight_at(1.0)));
    results.push("converged", Node::scalar(res.converged));
    results.push("iterations", Node::scalar(res.iterations));
    results.push("weights", weights);
    let failure = (!res.converged).then(|| format!("optimizer did not converge in {} iterations", res.iterations));
    Ok(Payload { failure, ..Payload::new(results) })
}

fn depletion_node(d: Result<Depletion, Error>, trials: usize) -> Result<Node, CliError> {
    let mut n = Node::section();
    match d {
        Ok(d) => {
            n.push("status", Node::scalar("ok"));
            n.push("band_frac_cond", Node::mc(d.band_frac_cond, trials));
            n.push("band_frac_uncond", Node::mc(d.band_frac_uncond, trials));
            n.push("zscore", Node::mc(d.zscore, trials));
            n.push("n_cond", Node::scalar(d.n_cond));
            n.push("n_uncond", Node::scalar(d.n_uncond));
        }
        Err(Error::Insufficient(msg)) => {
            n.push("status", Node::scalar("insufficient"));
            n.push("reason", Node::scalar(msg));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(n)
}

fn hole_experiment(params: &Params, model: &WeightModel) -> Result<HoleExperiment, CliError> {
    let plan = hole_plan(model, params.r)?;
    Ok(estimate_hole_probability(model, &plan, params.r, params.trials, params.seed)?)
}

fn hole_summary(exp: &HoleExperiment) -> Node {
    let res = &exp.results;
    let mut n = Node::section();
    n.push("n_trunc", Node::scalar(exp.plan.n_trunc));
    n.push("search_radius", scalar_f(exp.search_radius));
    n.push("hole_count", Node::scalar(res.hole_count));
    n.push("p_hat", Node::mc(res.p_hat, exp.trials));
    n.push("ci95", interval(res.ci95.0, res.ci95.1, exp.trials));
    n.push("no_acceptance", Node::scalar(res.no_acceptance));
    n
}

fn cmd_hole(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let exp = hole_experiment(params, model)?;
    let mut results = hole_summary(&exp);
    results.push("unconditional_trials", Node::scalar(exp.results.unconditional_trials));
    results.push("depletion", depletion_node(depletion_statistic(&exp), exp.trials)?);
    results.push("split_half", depletion_node(split_half_statistic(&exp), exp.results.unconditional_trials)?);
    Ok(Payload::new(results))
}

/// Smoothed indicators of the hole, the forbidden band and the region beyond it
/// (in units of r).
pub fn conditional_test_functions(model: &WeightModel) -> [(&'static str, TestFunction); 3] {
    let outer = model.hole_outer;
    [
        ("inner", TestFunction::MollifiedAnnulus { inner: 0.0, outer: 0.95, width: 0.05 }),
        ("band", TestFunction::MollifiedAnnulus { inner: 1.05, outer: 0.95 * outer, width: 0.05 }),
        ("beyond", TestFunction::MollifiedAnnulus { inner: 1.05 * outer, outer: 1.25 * outer, width: 0.05 }),
    ]
}

fn cmd_conditional(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let exp = hole_experiment(params, model)?;
    let mut results = hole_summary(&exp);
    let mut stats = Node::section();
    for (name, phi) in conditional_test_functions(model) {
        let mut n = Node::section();
        match conditional_linear_statistics(&exp, &phi) {
            Ok(s) => {
                n.push("status", Node::scalar("ok"));
                n.push("mean_cond", Node::mc(s.mean_cond, exp.trials));
                n.push("target", Node::closed_form(s.target));
                n.push("gap", Node::mc(s.gap, exp.trials));
                n.push("accepted", Node::scalar(s.accepted));
            }
            Err(Error::Insufficient(msg)) => {
                n.push("status", Node::scalar("insufficient"));
                n.push("reason", Node::scalar(msg));
            }
            Err(e) => return Err(e.into()),
        }
        stats.push(name, n);
    }
    results.push("linear_statistics", stats);
    Ok(Payload::new(results))
}

fn cmd_dominant(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let p = params.single_p()?;
    let d = dominant_monomial_probability(model, params.r, p, params.trials, params.seed)?;
    let mut results = Node::section();
    results.push("k0", Node::scalar(d.k0));
    results.push("n_trunc", Node::scalar(d.n_trunc));
    results.push("hits", Node::scalar(d.hits));
    results.push("p_hat", Node::mc(d.p_hat, d.trials));
    results.push("ci95", interval(d.ci95.0, d.ci95.1, d.trials));
    results.push("log_lower_bound", Node::closed_form(d.log_lower_bound));
    results.push("rouche_violations", Node::scalar(d.rouche_violations));
    Ok(Payload::new(results))
}

fn verdict(results: &mut Node, checks: &[(&str, bool)]) -> Option<String> {
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    results.push("pass", Node::scalar(failed.is_empty()));
    (!failed.is_empty()).then(|| failed.join(", "))
}

fn check_density(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let l = params.r;
    let p1 = PolyDensityParams::new(1, l, *model)?;
    let gap = density_histogram_gap(&p1, params.trials, params.seed, DENSITY_RMAX, DENSITY_BINS)?;
    let chi_samples = (params.trials / 10).max(CHI_MIN_SAMPLES);
    let chi = radial_chi_square(&PolyDensityParams::new(2, l, *model)?, chi_samples, params.seed)?;
    let mut results = Node::section();
    let mut checks = vec![];
    if params.beta == 2.0 && l == 1.0 {
        let mut worst = 0.0f64;
        for i in 0..=60 {
            for j in 0..8 {
                let z = Complex64::from_polar(0.05 * i as f64, 2.0 * PI * j as f64 / 8.0);
                let exact = 1.0 / (PI * (1.0 + z.norm_sqr()).powi(2));
                worst = worst.max((joint_density(&[z], &p1)? - exact).abs());
            }
        }
        results.push("pointwise_gap", Node::closed_form(worst));
        checks.push(("pointwise", worst <= tol::DENSITY_POINTWISE));
    } else {
        results.push("pointwise_gap", Node::scalar("skipped"));
    }
    results.push("histogram_sup_gap", Node::mc(gap.sup_gap, gap.samples));
    results.push("chi_square", Node::mc(chi.statistic, chi_samples));
    results.push("chi_square_df", Node::scalar(chi.df));
    results.push("chi_square_critical_1pct", scalar_f(chi.critical_1pct));
    checks.push(("histogram", gap.sup_gap <= tol::DENSITY_HIST));
    checks.push(("chi_square", chi.passes()));
    let failure = verdict(&mut results, &checks);
    Ok(Payload { failure, ..Payload::new(results) })
}

/// Floor on the N = 2 chi-square sample size of `check density`.
pub const CHI_MIN_SAMPLES: usize = 3000;

fn check_intensity(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let plan = hole_plan(model, params.r)?;
    let s = zero_count_study(model, &plan, params.r, params.trials, params.seed)?;
    let z = (s.mean - s.predicted) / s.std_err;
    let mut results = Node::section();
    results.push("mean_count", Node::mc(s.mean, s.trials));
    results.push("std_err", Node::mc(s.std_err, s.trials));
    results.push("predicted", Node::closed_form(s.predicted));
    results.push("zscore", Node::mc(z, s.trials));
    let failure = verdict(&mut results, &[("intensity", z.abs() <= tol::INTENSITY_SE)]);
    Ok(Payload { failure, ..Payload::new(results) })
}

fn check_stirling(model: &WeightModel) -> Result<Payload, CliError> {
    let t = stirling_threshold(model, tol::STIRLING_K_MAX);
    let mut results = Node::section();
    results.push("k_max", Node::scalar(t.k_max));
    results.push("threshold", Node::scalar(t.first_valid.map_or("none".into(), |k| k.to_string())));
    let ok = t.first_valid.is_some_and(|k| k <= tol::STIRLING_MAX_THRESHOLD);
    let failure = verdict(&mut results, &[("containment", ok)]);
    Ok(Payload { failure, ..Payload::new(results) })
}

fn check_tail(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let plan = TruncationPlan::for_sampling(model, params.r, params.alpha, 1.0)?;
    let s = tail_exceedance_study(model, &plan, params.trials, params.seed, params.grid, TAIL_EXTRA_TERMS)?;
    let mut results = Node::section();
    results.push("n_trunc", Node::scalar(plan.n_trunc));
    results.push("log_bound", Node::closed_form(s.log_bound));
    results.push("exceedances", Node::scalar(s.exceedances));
    results.push("max_log_ratio", Node::mc(s.max_log_ratio, s.trials));
    let failure = verdict(&mut results, &[("tail_bound", s.exceedances == 0)]);
    Ok(Payload { failure, ..Payload::new(results) })
}

fn check_potential(params: &Params, model: &WeightModel) -> Result<Payload, CliError> {
    let p = params.single_p()?;
    let min = minimizer(params.alpha, model, p)?;
    let top = params.alpha.powf(1.0 / params.beta);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let x = 1.5 * top * i as f64 / 199.0;
        worst = worst.max((potential_closed(&min, x)? - potential_quadrature(&min.measure, x)?).abs());
    }
    let report = equilibrium_report(&min.measure, params.alpha, model)?;
    let closed = closed_form_energy(params.alpha, params.beta, p)?;
    let energy_gap = (report.i_value - closed).abs();
    let mut results = Node::section();
    results.push("potential_gap", Node::closed_form(worst));
    results.push("g_max", Node::closed_form(report.g_max));
    results.push("g_support_dev", Node::closed_form(report.g_support_dev));
    results.push("energy_gap", Node::closed_form(energy_gap));
    let failure = verdict(
        &mut results,
        &[
            ("potential", worst <= tol::POTENTIAL),
            ("g_max", report.g_max <= tol::EQUILIBRIUM),
            ("g_support", report.g_support_dev <= tol::EQUILIBRIUM),
            ("energy_identity", energy_gap <= tol::ENERGY_IDENTITY),
        ],
    );
    Ok(Payload { failure, ..Payload::new(results) })
}
