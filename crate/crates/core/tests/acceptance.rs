//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Reference values come from oracles written here against the plain
//! definitions (direct sums, per-cell interval distance), not from the
//! library's own fast paths.

use std::process::{Command, ExitCode};
use std::time::Instant;

use age_invariance::convolution::{cocycle_check, s_diamond_bound_check, s_diamond_indicator, s_diamond_step, StepForcing};
use age_invariance::grid::{AgeGrid, GridFunction, StatePair};
use age_invariance::model::{
    bump, check_beta_condition, crowding_extremal, h0_bound, subtangency_defect, vhat1, vhat2, ModelParams,
};
use age_invariance::oracles::{characteristics_solve, picard_solve};
use age_invariance::probes;
use age_invariance::scheme::{check_invariants, converge_run, delta_for, simulate, SchemeConfig};
use age_invariance::semigroup::{DeltaTable, TranslationSemigroup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `T0(k da) phi` for one species: shift right, zero inflow.
fn naive_t0(phi: &[f64], k: usize) -> Vec<f64> {
    (0..phi.len()).map(|i| if i >= k { phi[i - k] } else { 0.0 }).collect()
}

/// `S(k da)(x, phi)` for one species without decay: `x` on the first `k`
/// cells plus `da * sum_{j=1..k} T0(j da) phi`.
fn naive_s(x: f64, phi: &[f64], k: usize, da: f64) -> Vec<f64> {
    let mut out = vec![0.0; phi.len()];
    for (i, o) in out.iter_mut().enumerate() {
        if i < k {
            *o = x;
        }
        for j in 1..=k {
            if i >= j {
                *o += da * phi[i - j];
            }
        }
    }
    out
}

fn l2(v: &[f64], da: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * da).sqrt()
}

fn l2_gap(a: &[f64], b: &[f64], da: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&d, da)
}

/// Distance to `{0 <= v <= kappa}` for one species.
fn naive_dist_to_c(v: &[f64], kappa: f64, da: f64) -> f64 {
    let excess: Vec<f64> = v.iter().map(|&x| (-x).max(0.0) + (x - kappa).max(0.0)).collect();
    l2(&excess, da)
}

/// `(S <> f)(t_k)` as the backward difference quotient of the Riemann sum of
/// `S * f` on the cell lattice, for a one-species forcing starting at 0.
fn riemann_s_diamond(f: &StepForcing, k: usize) -> Vec<f64> {
    let da = f.grid().cell_width();
    let n = f.grid().n_cells();
    let riemann = |end: usize| {
        let mut sum = vec![0.0; n];
        for j in 0..end {
            let piece = f.value_at_step(j);
            let s = naive_s(piece.boundary[0], piece.density.values(), end - j, da);
            for (a, b) in sum.iter_mut().zip(s) {
                *a += da * b;
            }
        }
        sum
    };
    if k == 0 {
        return vec![0.0; n];
    }
    riemann(k).iter().zip(riemann(k - 1)).map(|(a, b)| (a - b) / da).collect()
}

fn default_start(params: &ModelParams) -> GridFunction {
    bump(params.grid(), 1, 0.02, 0.5, 4.0)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn invariance() -> Verdict {
    let params = ModelParams::reference();
    let started = Instant::now();
    let traj = simulate(&default_start(&params), &SchemeConfig::new(0.05, 2.0).with_seed(7), &params).unwrap();
    let delta = delta_for(&traj.run, 8, 1).unwrap();
    let report = check_invariants(&traj, &delta).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let da = params.grid().cell_width();
    let knot_sup = traj
        .run
        .knots
        .iter()
        .map(|k| naive_dist_to_c(k.y.values(), 1.0, da))
        .fold(0.0, f64::max);
    let sample_sup = traj
        .samples
        .iter()
        .map(|s| naive_dist_to_c(s.u.values(), 1.0, da))
        .fold(0.0, f64::max);
    let pass = traj.run.reached_horizon()
        && knot_sup <= 1e-12
        && sample_sup <= report.sample_dist_bound
        && elapsed < 30.0;
    verdict(
        pass,
        format!(
            "knots {}, knot dist sup {knot_sup:e} <= 1e-12, sample dist sup {sample_sup:e} <= eps + Gamma*delta(eps) = {:.4e}, {elapsed:.2}s < 30s",
            traj.run.knots.len(),
            report.sample_dist_bound
        ),
    )
}

fn euler_certificate() -> Verdict {
    let params = ModelParams::reference();
    let grid = *params.grid();
    let da = grid.cell_width();
    let h0 = h0_bound(&params).unwrap();
    let steps = grid.floor_time(h0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for q in 0..100 {
        let phi = if q % 2 == 0 {
            probes::random_smooth_in_c(&grid, 1, 1.0, &mut rng)
        } else {
            probes::random_rough_in_c(&grid, 1, 1.0, &mut rng)
        };
        for k in 1..=steps {
            let v = vhat1(&phi, grid.time(k), &params).unwrap();
            worst = worst.max(naive_dist_to_c(v.values(), 1.0, da));
        }
    }
    let heavy = params.with_beta_scaled(8.0 / (3.0 * params.kappa())).unwrap();
    let condition = check_beta_condition(&heavy);
    let spill = vhat1(&crowding_extremal(&heavy), da, &heavy).unwrap();
    let spill_defect = naive_dist_to_c(spill.values(), 1.0, da);
    let pass = h0 == 2.0 && worst <= 1e-12 && !condition.holds && spill_defect > 1e-6;
    verdict(
        pass,
        format!(
            "h0 = {h0}, worst dist(vhat1, C) over 100 states x {steps} steps = {worst:e}; integral(beta) = {} -> condition {}, extremal defect {spill_defect:e} > 1e-6",
            condition.integral, condition.holds
        ),
    )
}

const LADDER: [f64; 4] = [0.08, 0.04, 0.02, 0.01];

fn decay_ratio() -> Verdict {
    let params = ModelParams::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    let mut example = Vec::new();
    for q in 0..10 {
        let phi = probes::random_smooth_in_c(params.grid(), 1, 1.0, &mut rng);
        let ratios: Vec<f64> = LADDER
            .iter()
            .map(|&h| vhat2(&phi, h, &params).unwrap().lp_norm() / h)
            .collect();
        if !strictly_decreasing(&ratios) {
            failures += 1;
        }
        if q == 0 {
            example = ratios;
        }
    }
    verdict(failures == 0, format!("{failures}/10 non-decreasing; first state [{}]", sci(&example)))
}

fn subtangency() -> Verdict {
    let params = ModelParams::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    let mut example = Vec::new();
    for q in 0..10 {
        let phi = probes::random_smooth_in_c(params.grid(), 1, 1.0, &mut rng);
        let defects: Vec<f64> = LADDER
            .iter()
            .map(|&h| subtangency_defect(&phi, h, &params).unwrap())
            .collect();
        if !strictly_decreasing(&defects) {
            failures += 1;
        }
        if q == 0 {
            example = defects;
        }
    }
    verdict(failures == 0, format!("{failures}/10 non-decreasing; first state [{}]", sci(&example)))
}

fn convolution_calculus() -> Verdict {
    let grid = AgeGrid::with_horizon(0.02, 2.0, 2.0).unwrap();
    let da = grid.cell_width();
    let span = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut indicator_gap = 0.0f64;
    let mut step_gap = 0.0f64;
    for _ in 0..5 {
        let x = probes::random_state_pair(&grid, 1, &mut rng);
        let a = rng.gen_range(1..span / 2);
        let b = rng.gen_range(a + 1..span - 1);
        let t = rng.gen_range(b..span);
        let zero = StatePair::zeros(grid, 1);
        let f = StepForcing::from_steps(grid, vec![0, a, b, span], vec![zero.clone(), x.clone(), zero]).unwrap();
        let lib = s_diamond_indicator(&x, grid.time(a), grid.time(b), grid.time(t)).unwrap();
        indicator_gap = indicator_gap.max(l2_gap(lib.values(), &riemann_s_diamond(&f, t), da));

        let f = probes::random_step_forcing(&grid, 1, 0, span, 3, &mut rng);
        let lib = s_diamond_step(&f, grid.time(span)).unwrap();
        step_gap = step_gap.max(l2_gap(lib.values(), &riemann_s_diamond(&f, span), da));
    }

    let f = probes::random_step_forcing(&grid, 1, 0, span, 6, &mut rng);
    let mut cocycle = 0.0f64;
    for _ in 0..20 {
        let t = rng.gen_range(0..=span);
        let s = rng.gen_range(0..=span - t);
        cocycle = cocycle.max(cocycle_check(&f, grid.time(t), grid.time(s)).unwrap());
    }

    let delta = DeltaTable::build(&TranslationSemigroup::unperturbed(grid), grid.time(span), 1, 8, 5).unwrap();
    let mut held = 0;
    for _ in 0..100 {
        let start = rng.gen_range(0..span);
        let end = rng.gen_range(start + 1..=span);
        let f = probes::random_step_forcing(&grid, 1, start, end, 5, &mut rng);
        let t = grid.time(rng.gen_range(start..=end));
        if s_diamond_bound_check(&f, t, &delta).unwrap().holds {
            held += 1;
        }
    }
    let pass = indicator_gap <= 1e-6 && step_gap <= 1e-6 && cocycle <= 1e-12 && held == 100;
    verdict(
        pass,
        format!(
            "indicator vs Riemann {indicator_gap:e}, step vs Riemann {step_gap:e} (<= 1e-6); cocycle {cocycle:e} (<= 1e-12); bound held {held}/100"
        ),
    )
}

fn cauchy_convergence() -> Verdict {
    let params = ModelParams::reference();
    let x0 = default_start(&params);
    let conv = converge_run(&x0, &SchemeConfig::new(0.1, 1.0).with_seed(7), &params, 4).unwrap();
    let picard = picard_solve(&x0, 1.0, 50, &params).unwrap();
    let da = params.grid().cell_width();
    let finest = conv.trajectories.last().unwrap();
    let gap = finest
        .samples
        .iter()
        .zip(&picard.samples)
        .map(|(s, (_, u))| l2_gap(s.u.values(), u.values(), da))
        .fold(0.0, f64::max);
    let pass = strictly_decreasing(&conv.cauchy) && gap <= 1e-3;
    verdict(pass, format!("cauchy [{}] strictly decreasing; finest vs picard {gap:e} <= 1e-3", sci(&conv.cauchy)))
}

fn oracle_agreement() -> Verdict {
    let params = ModelParams::reference();
    let x0 = default_start(&params);
    let picard = picard_solve(&x0, 1.0, 50, &params).unwrap();
    let chars = characteristics_solve(&x0, 1.0, &params).unwrap();
    let da = params.grid().cell_width();
    let gap = picard
        .samples
        .iter()
        .zip(&chars)
        .map(|((_, a), (_, b))| l2_gap(a.values(), b.values(), da))
        .fold(0.0, f64::max);
    // Within each window the differences shrink by the measured factor.
    let geometric = picard
        .windows
        .iter()
        .all(|w| w.converged && w.ratios.iter().all(|&r| r < 1.0));
    let pass = gap <= 1e-3 && picard.contraction_bound() < 1.0 && geometric;
    verdict(
        pass,
        format!(
            "sup gap {gap:e} <= 1e-3; {} windows with Lambda*delta = {:.3} < 1, worst ratio {:.3}",
            picard.windows.len(),
            picard.contraction_bound(),
            picard.worst_ratio()
        ),
    )
}

fn semigroup_laws() -> Verdict {
    let grid = AgeGrid::with_horizon(0.01, 3.0, 2.0).unwrap();
    let da = grid.cell_width();
    let sg = TranslationSemigroup::unperturbed(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut law_exact = 0;
    let mut translation = 0.0f64;
    let mut oracle = 0.0f64;
    for _ in 0..100 {
        let phi = probes::random_density(&grid, 1, &mut rng);
        let (t, s) = (rng.gen_range(0..200), rng.gen_range(0..200));
        if sg.t0_steps(&sg.t0_steps(&phi, s), t) == sg.t0_steps(&phi, t + s) {
            law_exact += 1;
        }
        oracle = oracle.max(l2_gap(sg.t0_steps(&phi, t).values(), &naive_t0(phi.values(), t), da));

        let x = rng.gen_range(-1.0..1.0);
        let (s, h) = (rng.gen_range(0..150), rng.gen_range(0..150));
        let lhs = sg.s_steps(&[x], &phi, s + h).sub(&sg.s_steps(&[x], &phi, s));
        let rhs = sg.t0_steps(&sg.s_steps(&[x], &phi, h), s);
        translation = translation.max(lhs.distance(&rhs));
        oracle = oracle.max(l2_gap(sg.s_steps(&[x], &phi, h).values(), &naive_s(x, phi.values(), h, da), da));
    }
    let pass = law_exact == 100 && translation <= 1e-12 && oracle <= 1e-12;
    verdict(
        pass,
        format!("T law exact {law_exact}/100; S translation defect {translation:e} <= 1e-12; direct-sum oracle gap {oracle:e}"),
    )
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_age-invariance");
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &dirs {
        let status = Command::new(bin)
            .args(["simulate", "--quiet", "--seed", "11", "--out"])
            .arg(dir.path())
            .status()
            .unwrap();
        if !status.success() {
            return verdict(false, format!("simulate exited with {status}"));
        }
    }
    let mut identical = true;
    for name in ["samples.csv", "report.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        identical &= a == b && !a.is_empty();
    }
    verdict(identical, "samples.csv and report.json byte-identical across two runs".into())
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("invariance of the knot scheme", invariance),
        ("Euler part certificate", euler_certificate),
        ("remainder decay", decay_ratio),
        ("sub-tangency", subtangency),
        ("convolution calculus", convolution_calculus),
        ("Cauchy convergence", cauchy_convergence),
        ("oracle agreement", oracle_agreement),
        ("semigroup laws", semigroup_laws),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("criterion {} [{}] {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
