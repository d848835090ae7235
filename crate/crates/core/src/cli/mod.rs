//! Batch experiments behind the command-line front end.
//!
//! Each command reads a [`Config`], writes its artifacts into an output
//! directory and returns an [`Outcome`]. Outputs depend only on the config
//! (seed included), so reruns are byte-identical.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::convolution::{cocycle_check, s_diamond_bound_check, s_diamond_indicator, s_diamond_riemann, s_diamond_step, StepForcing};
use crate::error::Result;
use crate::grid::{dist_to_c, StatePair};
use crate::model::{check_beta_condition, euler_invariance_check, h0_bound, subtangency_defect, vhat2};
use crate::oracles::{characteristics_solve, picard_solve_with, sup_gap, PicardOptions, Samples};
use crate::probes;
use crate::row;
use crate::scheme::{self, certify, check_invariants, converge_run, delta_for, mild_residual, Certificate, SchemeConfig, Trajectory};
use crate::semigroup::{DeltaTable, TranslationSemigroup};

pub use config::Config;
use report::{Table, Written};

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Short human-readable lines.
    pub summary: Vec<String>,
    /// Set when a checked invariant failed; the files are still written.
    pub violation: Option<String>,
}

fn outcome(written: Written, summary: Vec<String>, violation: Option<String>) -> Outcome {
    Outcome {
        files: written.0,
        summary,
        violation,
    }
}

fn sample_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(&["t", "lp_norm_u", "dist_to_C", "H_norm", "eta_accepted"]);
    for s in &traj.samples {
        t.push(row![s.t, s.norm, s.dist_to_c, s.correction_norm, s.eta]);
    }
    t
}

fn oracle_table(samples: &Samples, kappa: f64) -> Table {
    let mut t = Table::new(&["t", "lp_norm_u", "dist_to_C"]);
    for (time, u) in samples {
        t.push(row![*time, u.lp_norm(), dist_to_c(u, kappa)]);
    }
    t
}

fn regime(cert: &Certificate) -> serde_json::Value {
    json!({
        "lambda_hat": cert.lambda_hat,
        "gamma_hat": cert.gamma_hat,
        "delta_tau": cert.delta_tau,
        "delta_eps": cert.delta_eps,
        "contraction": cert.contraction,
        "radius_growth": cert.radius_growth,
        "rho": cert.rho,
        "semigroup_constants": cert.semigroup_constants,
        "satisfied": cert.satisfied,
    })
}

fn probing(cfg: &Config, traj: &Trajectory) -> serde_json::Value {
    json!({
        "probes_per_trial": cfg.scheme.probes,
        "max_difference_quotient": traj.run.probe_lipschitz,
        "exhaustive": false,
    })
}

/// Knot run on the configured model: `samples.csv` and `report.json`.
pub fn simulate(cfg: &Config, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let x0 = cfg.initial_state()?;
    let seed = cfg.run.seed;
    let traj = scheme::simulate(&x0, &cfg.scheme(), &params)?;
    let mut written = Written::default();
    written.csv(out, "samples.csv", &sample_table(&traj))?;

    let delta = delta_for(&traj.run, cfg.scheme.delta_trials, seed)?;
    let invariants = check_invariants(&traj, &delta)?;
    let cert = certify(&traj.run, &params, &delta, seed)?;
    let defect_sup = traj.defect_sup();
    written.json(
        out,
        "report.json",
        &json!({
            "beta_condition": cert.beta_condition,
            "h0": cert.h0,
            "paper_regime": regime(&cert),
            "knots": traj.run.knots.len(),
            "defect_sup": defect_sup,
            "knot_defect_sup": invariants.knot_dist_sup,
            "terminated_by": traj.run.terminated_by,
            "invariants": invariants_json(&invariants),
            "continuity_probing": probing(cfg, &traj),
            "config": cfg,
        }),
    )?;

    let violation = if !traj.run.reached_horizon() {
        Some(format!("run stopped early: {}", traj.run.terminated_by.as_str()))
    } else if !invariants.holds() {
        Some(format!("discrete invariants failed: {invariants:?}"))
    } else {
        None
    };
    let summary = vec![
        format!("knots: {}", traj.run.knots.len()),
        format!("terminated_by: {}", traj.run.terminated_by.as_str()),
        format!("defect_sup: {defect_sup:e} (bound {:e})", invariants.sample_dist_bound),
        format!("beta_condition: {}", cert.beta_condition.holds),
    ];
    Ok(outcome(written, summary, violation))
}

fn invariants_json(r: &scheme::InvariantReport) -> serde_json::Value {
    let mut v = serde_json::to_value(r).expect("report serializes");
    v["holds"] = json!(r.holds());
    v
}

/// Runs `levels` halvings of epsilon: `convergence.csv` and `convergence.json`.
pub fn convergence(cfg: &Config, levels: Option<usize>, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let x0 = cfg.initial_state()?;
    let levels = levels.unwrap_or(cfg.run.levels);
    let scheme = SchemeConfig {
        epsilon: cfg.run.convergence_epsilon,
        ..cfg.scheme()
    };
    let conv = converge_run(&x0, &scheme, &params, levels)?;
    let finest = conv.trajectories.last().expect("at least two levels");
    let delta = delta_for(&finest.run, cfg.scheme.delta_trials, cfg.run.seed)?;
    let final_report = check_invariants(finest, &delta)?;
    let strictly_decreasing = conv.cauchy.windows(2).all(|w| w[1] < w[0]);

    let mut table = Table::new(&["level", "epsilon", "knots", "defect_sup", "cauchy_to_next"]);
    let mut per_level = Vec::new();
    for (j, (eps, traj)) in conv.epsilons.iter().zip(&conv.trajectories).enumerate() {
        let next = conv.cauchy.get(j).map_or(report::Cell::Text(String::new()), |&c| c.into());
        table.push(vec![j.into(), (*eps).into(), traj.run.knots.len().into(), traj.defect_sup().into(), next]);
        per_level.push(json!({
            "epsilon": eps,
            "knots": traj.run.knots.len(),
            "defect_sup": traj.defect_sup(),
            "first_eta": traj.samples.first().map(|s| s.eta),
        }));
    }
    let mut written = Written::default();
    written.csv(out, "convergence.csv", &table)?;
    written.json(
        out,
        "convergence.json",
        &json!({
            "epsilons": conv.epsilons,
            "cauchy": conv.cauchy,
            "strictly_decreasing": strictly_decreasing,
            "levels": per_level,
            "final_defect_sup": final_report.sample_dist_sup,
            "final_defect_bound": final_report.sample_dist_bound,
            "config": cfg,
        }),
    )?;
    let violation = (final_report.sample_dist_sup > final_report.sample_dist_bound).then(|| {
        format!(
            "final level defect {:e} exceeds {:e}",
            final_report.sample_dist_sup, final_report.sample_dist_bound
        )
    });
    let summary = vec![
        format!("cauchy: {:?}", conv.cauchy),
        format!("strictly_decreasing: {strictly_decreasing}"),
    ];
    Ok(outcome(written, summary, violation))
}

/// Certificate and defect statistics: `invariance.json`. Reports, never fails
/// on a violated condition.
pub fn invariance_report(cfg: &Config, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let x0 = cfg.initial_state()?;
    let seed = cfg.run.seed;
    let beta = check_beta_condition(&params);
    let h0 = h0_bound(&params)?;
    let euler = euler_invariance_check(&params, cfg.run.samples, seed)?;

    let run = match scheme::simulate(&x0, &cfg.scheme(), &params) {
        Ok(traj) => {
            let delta = delta_for(&traj.run, cfg.scheme.delta_trials, seed)?;
            let invariants = check_invariants(&traj, &delta)?;
            let cert = certify(&traj.run, &params, &delta, seed)?;
            let (residual, ratio) = mild_residual(&traj, &params, &delta)?;
            json!({
                "paper_regime": regime(&cert),
                "knots": traj.run.knots.len(),
                "defect_sup": traj.defect_sup(),
                "terminated_by": traj.run.terminated_by,
                "invariants": invariants_json(&invariants),
                "mild_residual": { "residual": residual, "ratio_to_eps_plus_delta": ratio },
                "continuity_probing": probing(cfg, &traj),
            })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };
    let mut written = Written::default();
    written.json(
        out,
        "invariance.json",
        &json!({
            "beta_condition": beta,
            "h0": h0,
            "euler_check": euler,
            "scheme": run,
            "config": cfg,
        }),
    )?;
    let summary = vec![
        format!("beta_condition: {} (integral {} vs bound {})", beta.holds, beta.integral, beta.bound),
        format!("h0: {h0}"),
        format!(
            "euler defect: random states {:e}, extremal state {:e}",
            euler.random_defect_sup, euler.extremal_defect
        ),
    ];
    Ok(outcome(written, summary, None))
}

#[derive(Debug, Serialize)]
struct SolverStats {
    lp_norm_sup: f64,
    defect_sup: f64,
}

fn stats(samples: &Samples, kappa: f64) -> SolverStats {
    SolverStats {
        lp_norm_sup: samples.iter().map(|(_, u)| u.lp_norm()).fold(0.0, f64::max),
        defect_sup: samples.iter().map(|(_, u)| dist_to_c(u, kappa)).fold(0.0, f64::max),
    }
}

/// Scheme, Picard and characteristics on `[0, tau]`: per-solver CSVs,
/// `oracle.csv` with pairwise gaps, and `oracle.json`.
pub fn oracle_compare(cfg: &Config, out: &Path) -> Result<Outcome> {
    const AGREEMENT: f64 = 1e-3;
    let params = cfg.params()?;
    let kappa = params.kappa();
    let x0 = cfg.initial_state()?;
    let tau = cfg.scheme.tau;

    let traj = scheme::simulate(&x0, &cfg.scheme(), &params)?;
    if !traj.run.reached_horizon() {
        return Err(crate::Error::Incomplete(traj.run.terminated_by.as_str().into()));
    }
    let scheme_samples: Samples = traj.samples.iter().map(|s| (s.t, s.u.clone())).collect();
    let opts = PicardOptions {
        seed: cfg.run.seed,
        delta_trials: cfg.scheme.delta_trials,
        ..PicardOptions::default()
    };
    let picard = picard_solve_with(&x0, tau, cfg.run.picard_iters, &params, &params, &opts)?;
    let chars = characteristics_solve(&x0, tau, &params)?;

    let mut table = Table::new(&[
        "t",
        "scheme_lp_norm",
        "picard_lp_norm",
        "characteristics_lp_norm",
        "scheme_vs_picard",
        "scheme_vs_characteristics",
        "picard_vs_characteristics",
    ]);
    for ((s, p), c) in scheme_samples.iter().zip(&picard.samples).zip(&chars) {
        table.push(row![
            s.0,
            s.1.lp_norm(),
            p.1.lp_norm(),
            c.1.lp_norm(),
            s.1.distance(&p.1),
            s.1.distance(&c.1),
            p.1.distance(&c.1),
        ]);
    }
    let gaps = json!({
        "scheme_vs_picard": sup_gap(&scheme_samples, &picard.samples),
        "scheme_vs_characteristics": sup_gap(&scheme_samples, &chars),
        "picard_vs_characteristics": sup_gap(&picard.samples, &chars),
    });
    let oracle_gap = sup_gap(&picard.samples, &chars);
    let mut written = Written::default();
    written.csv(out, "scheme.csv", &oracle_table(&scheme_samples, kappa))?;
    written.csv(out, "picard.csv", &oracle_table(&picard.samples, kappa))?;
    written.csv(out, "characteristics.csv", &oracle_table(&chars, kappa))?;
    written.csv(out, "oracle.csv", &table)?;

    let picard_stats = stats(&picard.samples, kappa);
    let chars_stats = stats(&chars, kappa);
    written.json(
        out,
        "oracle.json",
        &json!({
            "sup_gaps": gaps,
            "tolerance": AGREEMENT,
            "oracles_agree": oracle_gap <= AGREEMENT,
            "scheme": stats(&scheme_samples, kappa),
            "picard": {
                "stats": picard_stats,
                "lambda_hat": picard.lambda_hat,
                "window_delta": picard.window_delta,
                "contraction_bound": picard.contraction_bound(),
                "worst_ratio": picard.worst_ratio(),
                "converged": picard.converged(),
                "windows": picard.windows,
            },
            "characteristics": chars_stats,
            "config": cfg,
        }),
    )?;

    let beta_ok = check_beta_condition(&params).holds;
    let violation = (beta_ok && picard_stats.defect_sup.max(chars_stats.defect_sup) > 1e-10)
        .then(|| "an oracle left the invariant set".to_string());
    let summary = vec![
        format!("picard vs characteristics: {oracle_gap:e}"),
        format!("scheme vs picard: {:e}", sup_gap(&scheme_samples, &picard.samples)),
        format!("picard worst ratio: {}", picard.worst_ratio()),
    ];
    Ok(outcome(written, summary, violation))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Sub-tangency defect and `||vhat2|| / h` over the configured step ladder
/// for random smooth states: `subtangency.csv` and `subtangency.json`.
pub fn subtangency(cfg: &Config, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let grid = *params.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let steps = &cfg.run.subtangency_steps;
    let mut table = Table::new(&["sample", "h", "defect", "vhat2_ratio"]);
    let mut rows = Vec::new();
    for q in 0..cfg.run.samples {
        let phi = probes::random_smooth_in_c(&grid, params.components(), params.kappa(), &mut rng);
        let mut defects = Vec::new();
        let mut ratios = Vec::new();
        for &h in steps {
            let d = subtangency_defect(&phi, h, &params)?;
            let r = vhat2(&phi, h, &params)?.lp_norm() / h;
            table.push(row![q, h, d, r]);
            defects.push(d);
            ratios.push(r);
        }
        rows.push(json!({
            "defects": defects,
            "vhat2_ratios": ratios,
            "defect_decreasing": strictly_decreasing(&defects),
            "ratio_decreasing": strictly_decreasing(&ratios),
        }));
    }
    let all = rows
        .iter()
        .all(|r| r["defect_decreasing"] == json!(true) && r["ratio_decreasing"] == json!(true));
    let mut written = Written::default();
    written.csv(out, "subtangency.csv", &table)?;
    written.json(
        out,
        "subtangency.json",
        &json!({ "steps": steps, "samples": rows, "all_decreasing": all, "config": cfg }),
    )?;
    Ok(outcome(written, vec![format!("all_decreasing: {all}")], None))
}

/// One property of the convolution harness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertySummary {
    pub name: &'static str,
    pub instances: usize,
    /// Largest defect, or largest `lhs / rhs` for the bound check.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest step of the harness forcings, in cells.
const HARNESS_CELLS: usize = 40;

/// Convolution property harness on the configured grid: `conv_tests.csv`
/// and `conv_tests.json`.
pub fn conv_tests(cfg: &Config, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let grid = *params.grid();
    let n = params.components();
    let span = HARNESS_CELLS.min(grid.n_cells());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut table = Table::new(&["check", "instance", "value", "tolerance", "pass"]);
    let mut summaries = Vec::new();
    let mut record = |name: &'static str, values: Vec<f64>, tolerance: f64| {
        for (i, &v) in values.iter().enumerate() {
            table.push(row![name, i, v, tolerance, v <= tolerance]);
        }
        let worst = values.iter().copied().fold(0.0, f64::max);
        summaries.push(PropertySummary {
            name,
            instances: values.len(),
            worst,
            tolerance,
            pass: worst <= tolerance,
        });
    };

    let mut indicator = Vec::new();
    for _ in 0..5 {
        let x = probes::random_state_pair(&grid, n, &mut rng);
        let a = rng.gen_range(0..span - 2);
        let b = rng.gen_range(a + 1..span - 1);
        let t = rng.gen_range(0..span);
        let zero = StatePair::zeros(grid, n);
        let (breaks, pieces) = if a == 0 {
            (vec![0, b, span], vec![x.clone(), zero])
        } else {
            (vec![0, a, b, span], vec![zero.clone(), x.clone(), zero])
        };
        let forcing = StepForcing::from_steps(grid, breaks, pieces)?;
        let lhs = s_diamond_indicator(&x, grid.time(a), grid.time(b), grid.time(t))?;
        indicator.push(lhs.distance(&s_diamond_riemann(&forcing, grid.time(t))?));
    }
    record("indicator_vs_riemann", indicator, 1e-6);

    let mut step = Vec::new();
    for _ in 0..5 {
        let forcing = probes::random_step_forcing(&grid, n, 0, span, 3, &mut rng);
        let t = grid.time(span);
        step.push(s_diamond_step(&forcing, t)?.distance(&s_diamond_riemann(&forcing, t)?));
    }
    record("step_vs_riemann", step, 1e-6);

    let mut cocycle = Vec::new();
    let forcing = probes::random_step_forcing(&grid, n, 0, span, 6, &mut rng);
    for _ in 0..20 {
        let t = rng.gen_range(0..=span);
        let s = rng.gen_range(0..=span - t);
        cocycle.push(cocycle_check(&forcing, grid.time(t), grid.time(s))?);
    }
    record("cocycle", cocycle, 1e-12);

    let mut linear = Vec::new();
    for _ in 0..10 {
        let f = probes::random_step_forcing(&grid, n, 0, span, 4, &mut rng);
        let g = probes::random_step_forcing(&grid, n, 0, span, 4, &mut rng);
        let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let t = grid.time(rng.gen_range(0..=span));
        let mut rhs = s_diamond_step(&f, t)?.scale(alpha);
        rhs.axpy(beta, &s_diamond_step(&g, t)?);
        linear.push(s_diamond_step(&f.combine(alpha, &g, beta)?, t)?.distance(&rhs));
    }
    record("linearity", linear, 1e-12);

    let sg = TranslationSemigroup::unperturbed(grid);
    let delta = DeltaTable::build(&sg, grid.time(span), n, cfg.scheme.delta_trials, cfg.run.seed)?;
    let mut ratios = Vec::new();
    for _ in 0..100 {
        let start = rng.gen_range(0..span);
        let end = rng.gen_range(start + 1..=span);
        let f = probes::random_step_forcing(&grid, n, start, end, 5, &mut rng);
        let t = grid.time(rng.gen_range(start..=end));
        let check = s_diamond_bound_check(&f, t, &delta)?;
        ratios.push(if check.rhs > 0.0 { check.lhs / check.rhs } else { 0.0 });
    }
    record("semivariation_bound", ratios, 1.0 + 1e-9);

    let mut written = Written::default();
    written.csv(out, "conv_tests.csv", &table)?;
    written.json(out, "conv_tests.json", &json!({ "checks": summaries, "config": cfg }))?;
    let failed: Vec<&str> = summaries.iter().filter(|s| !s.pass).map(|s| s.name).collect();
    let summary = summaries
        .iter()
        .map(|s| format!("{}: worst {:e} (tolerance {:e}) {}", s.name, s.worst, s.tolerance, if s.pass { "pass" } else { "FAIL" }))
        .collect();
    let violation = (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", ")));
    Ok(outcome(written, summary, violation))
}

