//! Adaptive knot construction for invariance-preserving time stepping.
//!
//! From a knot `(l_k, y_k)` in `C` the scheme picks a trial step `eta` for
//! which the right-hand side barely moves on a ball around `y_k`, the
//! semigroup predictor stays within `eps/2 * eta` of `C`, and translation
//! moves `y_k` by at most `eps`. It then advances by half that step:
//!
//! ```text
//! z       = T0(h) y_k + S(h) F(y_k)
//! y_{k+1} = nearest point of C to z
//! H_k     = (y_{k+1} - z) / h          with ||H_k|| <= eps / 2
//! ```
//!
//! Between knots the approximate solution is `T0(s) y_k + S(s) F(y_k) + s H_k`.
//! Everything runs with the shifted generator `A - gamma I` and the matching
//! `F + gamma I`; `gamma = 0` is the plain model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::convolution::{s_diamond_lattice, s_diamond_step_with, StepForcing};
use crate::error::{Error, Result};
use crate::grid::{dist_to_c, project_to_c, AgeGrid, GridFunction, StatePair};
use crate::model::{
    check_beta_condition, h0_bound, lipschitz_estimate, BetaCondition, ModelParams, Nonlinearity, Shifted,
    MEMBERSHIP_TOL,
};
use crate::probes;
use crate::semigroup::{DeltaTable, TranslationSemigroup};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub epsilon: f64,
    pub tau: f64,
    pub gamma: f64,
    /// Working radius; `None` means `2 (||x0|| + 1)`.
    pub rho: Option<f64>,
    /// Smallest trial step; `None` means one cell.
    pub eta_min: Option<f64>,
    pub max_knots: usize,
    /// Random perturbations used to probe the continuity condition.
    pub probes: usize,
    pub seed: u64,
}

impl SchemeConfig {
    pub fn new(epsilon: f64, tau: f64) -> Self {
        Self {
            epsilon,
            tau,
            gamma: 0.0,
            rho: None,
            eta_min: None,
            max_knots: 100_000,
            probes: 8,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, grid: &AgeGrid) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        grid.steps(self.tau)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return bad(format!("rho must be positive, got {rho}"));
            }
        }
        if let Some(eta) = self.eta_min {
            if grid.steps(eta)? == 0 {
                return bad(format!("eta_min must be at least one cell, got {eta}"));
            }
        }
        if self.max_knots == 0 {
            return bad("max_knots must be positive".into());
        }
        Ok(())
    }

    fn eta_min_steps(&self, grid: &AgeGrid) -> usize {
        self.eta_min
            .map(|e| grid.floor_time(e).max(1))
            .unwrap_or(1)
    }
}

/// One node of the construction. `correction`, `eta` and `advance` describe
/// the step to the next knot and are zero on the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub step: usize,
    pub l: f64,
    pub y: GridFunction,
    /// `F_gamma(y)`.
    pub forcing: StatePair,
    pub correction: GridFunction,
    /// Accepted trial step, in cells.
    pub eta: usize,
    /// Cells to the next knot.
    pub advance: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    KnotCap,
    Divergence,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::KnotCap => "knot_cap",
            Termination::Divergence => "divergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotRun {
    pub knots: Vec<Knot>,
    pub terminated_by: Termination,
    pub epsilon: f64,
    pub gamma: f64,
    pub rho: f64,
    pub kappa: f64,
    pub tau_steps: usize,
    /// `max_k ||F_gamma(y_k)||`.
    pub forcing_sup: f64,
    /// Largest difference quotient of `F_gamma` seen while probing.
    pub probe_lipschitz: f64,
}

impl KnotRun {
    pub fn grid(&self) -> &AgeGrid {
        self.knots[0].y.grid()
    }

    pub fn semigroup(&self) -> TranslationSemigroup {
        TranslationSemigroup::new(*self.grid(), self.gamma)
    }

    pub fn x0(&self) -> &GridFunction {
        &self.knots[0].y
    }

    pub fn end_steps(&self) -> usize {
        self.knots.last().expect("a run has at least one knot").step
    }

    pub fn reached_horizon(&self) -> bool {
        self.terminated_by == Termination::Horizon
    }

    /// Index `k` with `l_k <= step < l_{k+1}`, or the last knot at its own time.
    fn interval(&self, step: usize) -> usize {
        let idx = self.knots.partition_point(|k| k.step <= step);
        idx.saturating_sub(1)
    }
}

/// Result of the step search at one knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStep {
    pub eta: usize,
    pub defect: f64,
    pub translation: f64,
    pub forcing_gap: f64,
    pub probe_lipschitz: f64,
}

fn predictor(sg: &TranslationSemigroup, y: &GridFunction, f: &StatePair, steps: usize) -> GridFunction {
    let mut z = sg.t0_steps(y, steps);
    z.axpy(1.0, &sg.s_pair_steps(f, steps));
    z
}

/// Largest number of cells strictly shorter than `bound`.
fn cells_below(grid: &AgeGrid, bound: f64) -> usize {
    let k = grid.floor_time(bound);
    if k > 0 && grid.time(k) >= bound * (1.0 - 1e-12) {
        k - 1
    } else {
        k
    }
}

/// Grid-aligned halving ladder below `min(eps, rho)`, longest first.
fn ladder(grid: &AgeGrid, eps: f64, rho: f64, eta_min: usize) -> Vec<usize> {
    let top = cells_below(grid, eps.min(rho)).max(eta_min);
    let mut out = vec![top];
    let mut eta = grid.time(top);
    loop {
        eta /= 2.0;
        let k = grid.floor_time(eta);
        if k < eta_min {
            break;
        }
        if Some(&k) != out.last() {
            out.push(k);
        }
    }
    if *out.last().expect("ladder is non-empty") != eta_min {
        out.push(eta_min);
    }
    out
}

/// Searches the halving ladder for a step meeting the three knot conditions.
#[allow(clippy::too_many_arguments)]
pub fn trial_step(
    l: f64,
    y: &GridFunction,
    forcing: &StatePair,
    eps: f64,
    rho: f64,
    cfg: &SchemeConfig,
    params: &ModelParams,
    rng: &mut ChaCha8Rng,
) -> Result<TrialStep> {
    let grid = *params.grid();
    let kappa = params.kappa();
    let sg = TranslationSemigroup::new(grid, cfg.gamma);
    let nl = Shifted {
        inner: params,
        gamma: cfg.gamma,
    };
    let eta_min = cfg.eta_min_steps(&grid);
    let mut last_failure = String::new();
    for eta in ladder(&grid, eps, rho, eta_min) {
        let h = grid.time(eta);
        let translation = sg.t0_steps(y, eta).distance(y);
        if translation > eps {
            last_failure = format!("translation {translation:.3e} > eps at eta = {h}");
            continue;
        }
        let defect = dist_to_c(&predictor(&sg, y, forcing, eta), kappa) / h;
        if defect >= eps / 2.0 {
            last_failure = format!("defect {defect:.3e} >= eps/2 at eta = {h}");
            continue;
        }
        let mut forcing_gap = 0.0f64;
        let mut quotient = 0.0f64;
        for _ in 0..cfg.probes {
            let probe = ball_probe(y, h, kappa, rng);
            let gap = probe.distance(y);
            if gap == 0.0 {
                continue;
            }
            let diff = nl.eval(&probe).distance(forcing);
            forcing_gap = forcing_gap.max(diff);
            quotient = quotient.max(diff / gap);
        }
        if forcing_gap > eps {
            last_failure = format!("forcing moves {forcing_gap:.3e} > eps within eta = {h}");
            continue;
        }
        return Ok(TrialStep {
            eta,
            defect,
            translation,
            forcing_gap,
            probe_lipschitz: quotient,
        });
    }
    Err(Error::StepCollapse {
        time: l,
        eta_min: grid.time(eta_min),
        reason: last_failure,
    })
}

/// A point of `C` within `radius` of `y`, reached along a random per-cell direction.
fn ball_probe(y: &GridFunction, radius: f64, kappa: f64, rng: &mut ChaCha8Rng) -> GridFunction {
    let dir = probes::random_direction(y.grid(), y.components(), rng);
    let mut moved = y.clone();
    moved.axpy(radius, &dir);
    let moved = project_to_c(&moved, kappa);
    let gap = moved.distance(y);
    if gap <= radius {
        return moved;
    }
    // Both ends lie in C, so the shortened segment does too.
    let mut out = y.clone();
    out.axpy(radius / gap, &moved.sub(y));
    out
}

/// Step to the next knot: returns `(advance, y_next, H)`.
#[allow(clippy::too_many_arguments)]
pub fn advance_knot(
    l: f64,
    y: &GridFunction,
    forcing: &StatePair,
    eta: usize,
    remaining: usize,
    eps: f64,
    cfg: &SchemeConfig,
    params: &ModelParams,
) -> Result<(usize, GridFunction, GridFunction)> {
    let grid = *params.grid();
    let sg = TranslationSemigroup::new(grid, cfg.gamma);
    let mut h = (eta / 2).max(1).min(remaining);
    loop {
        let z = predictor(&sg, y, forcing, h);
        let next = project_to_c(&z, params.kappa());
        let correction = next.sub(&z).scale(1.0 / grid.time(h));
        let norm = correction.lp_norm();
        if norm <= eps / 2.0 {
            return Ok((h, next, correction));
        }
        if h == 1 {
            return Err(Error::CorrectionTooLarge {
                time: l,
                norm,
                bound: eps / 2.0,
            });
        }
        h /= 2;
    }
}

/// Builds knots from `x0` up to `tau`, or until the knot cap or the
/// divergence detector stops the run.
pub fn build_knots(x0: &GridFunction, cfg: &SchemeConfig, params: &ModelParams) -> Result<KnotRun> {
    let grid = *params.grid();
    cfg.validate(&grid)?;
    if x0.grid() != &grid || x0.components() != params.components() {
        return Err(Error::Shape("initial state does not match the model grid".into()));
    }
    let d = dist_to_c(x0, params.kappa());
    if d > MEMBERSHIP_TOL {
        return Err(Error::NotInSet { distance: d });
    }
    let nl = Shifted {
        inner: params,
        gamma: cfg.gamma,
    };
    let rho = cfg.rho.unwrap_or(2.0 * (x0.lp_norm() + 1.0));
    let tau_steps = grid.steps(cfg.tau)?;
    let eps = cfg.epsilon;

    let first = nl.eval(x0);
    let mut forcing_sup = first.norm();
    let mut probe_lipschitz = 0.0f64;
    let mut knots = vec![Knot {
        step: 0,
        l: 0.0,
        y: x0.clone(),
        forcing: first,
        correction: GridFunction::zeros(grid, params.components()),
        eta: 0,
        advance: 0,
    }];
    let mut terminated_by = Termination::Horizon;
    while knots.last().expect("non-empty").step < tau_steps {
        if knots.len() >= cfg.max_knots {
            terminated_by = Termination::KnotCap;
            break;
        }
        let k = knots.len() - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ k as u64);
        let current = knots.last_mut().expect("non-empty");
        let trial = trial_step(current.l, &current.y, &current.forcing, eps, rho, cfg, params, &mut rng)?;
        let (advance, next, correction) = advance_knot(
            current.l,
            &current.y,
            &current.forcing,
            trial.eta,
            tau_steps - current.step,
            eps,
            cfg,
            params,
        )?;
        probe_lipschitz = probe_lipschitz.max(trial.probe_lipschitz);
        current.eta = trial.eta;
        current.advance = advance;
        current.correction = correction;
        let step = current.step + advance;

        let forcing = nl.eval(&next);
        forcing_sup = forcing_sup.max(forcing.norm());
        let diverged = next.lp_norm() > 10.0 * rho;
        knots.push(Knot {
            step,
            l: grid.time(step),
            y: next,
            forcing,
            correction: GridFunction::zeros(grid, params.components()),
            eta: 0,
            advance: 0,
        });
        if diverged {
            terminated_by = Termination::Divergence;
            break;
        }
    }
    Ok(KnotRun {
        knots,
        terminated_by,
        epsilon: eps,
        gamma: cfg.gamma,
        rho,
        kappa: params.kappa(),
        tau_steps,
        forcing_sup,
        probe_lipschitz,
    })
}

/// `u_eps(t)` from the knot on whose interval `t` lies.
pub fn assemble_u_eps(run: &KnotRun, t: f64) -> Result<GridFunction> {
    let step = run.grid().steps(t)?;
    assemble_steps(run, step).ok_or(Error::OutsideRange {
        t,
        start: 0.0,
        end: run.grid().time(run.end_steps()),
    })
}

fn assemble_steps(run: &KnotRun, step: usize) -> Option<GridFunction> {
    if step > run.end_steps() {
        return None;
    }
    let knot = &run.knots[run.interval(step)];
    let s = step - knot.step;
    if s == 0 {
        return Some(knot.y.clone());
    }
    let sg = run.semigroup();
    let mut u = predictor(&sg, &knot.y, &knot.forcing, s);
    u.axpy(run.grid().time(s), &knot.correction);
    Some(u)
}

/// Left limit at `step` using the previous interval's formula.
fn assemble_left(run: &KnotRun, k: usize) -> GridFunction {
    let prev = &run.knots[k - 1];
    let sg = run.semigroup();
    let mut u = predictor(&sg, &prev.y, &prev.forcing, prev.advance);
    u.axpy(run.grid().time(prev.advance), &prev.correction);
    u
}

/// The step forcing `f(t) = F_gamma(y_i)` on `[l_i, l_{i+1})`.
pub fn knot_forcing(run: &KnotRun) -> Result<StepForcing> {
    let grid = *run.grid();
    if run.knots.len() < 2 {
        return Err(Error::Incomplete("a single knot carries no forcing".into()));
    }
    let breaks = run.knots.iter().map(|k| k.step).collect();
    let pieces = run.knots[..run.knots.len() - 1]
        .iter()
        .map(|k| k.forcing.clone())
        .collect();
    StepForcing::from_steps(grid, breaks, pieces)
}

/// `u_eps(t)` in its global form: transported `x0`, the convolution with
/// the knot forcing, and the transported corrections.
pub fn assemble_global(run: &KnotRun, t: f64) -> Result<GridFunction> {
    let grid = *run.grid();
    let step = grid.steps(t)?;
    if step > run.end_steps() {
        return Err(Error::OutsideRange {
            t,
            start: 0.0,
            end: grid.time(run.end_steps()),
        });
    }
    let sg = run.semigroup();
    let mut u = sg.t0_steps(run.x0(), step);
    if step == 0 {
        return Ok(u);
    }
    let forcing = knot_forcing(run)?;
    u.axpy(1.0, &s_diamond_step_with(&sg, &forcing, t)?);
    for knot in &run.knots {
        if knot.step >= step {
            break;
        }
        let end = (knot.step + knot.advance).min(step);
        let held = grid.time(end - knot.step);
        u.axpy(held, &sg.t0_steps(&knot.correction, step - end));
    }
    Ok(u)
}

/// `u_eps` sampled on every grid time of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub u: GridFunction,
    pub norm: f64,
    pub dist_to_c: f64,
    /// `||H_k||` of the interval containing `t`.
    pub correction_norm: f64,
    /// Accepted trial step of that interval.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run: KnotRun,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn from_run(run: KnotRun) -> Self {
        let grid = *run.grid();
        let kappa = run.kappa;
        let samples = (0..=run.end_steps())
            .into_par_iter()
            .map(|step| {
                let u = assemble_steps(&run, step).expect("step is within the run");
                let knot = &run.knots[run.interval(step)];
                let interval = if knot.advance == 0 && run.interval(step) > 0 {
                    &run.knots[run.interval(step) - 1]
                } else {
                    knot
                };
                Sample {
                    step,
                    t: grid.time(step),
                    norm: u.lp_norm(),
                    dist_to_c: dist_to_c(&u, kappa),
                    correction_norm: interval.correction.lp_norm(),
                    eta: grid.time(interval.eta),
                    u,
                }
            })
            .collect();
        Self { run, samples }
    }

    pub fn defect_sup(&self) -> f64 {
        self.samples.iter().map(|s| s.dist_to_c).fold(0.0, f64::max)
    }

    pub fn knot_defect_sup(&self) -> f64 {
        self.run.knots.iter().map(|k| dist_to_c(&k.y, self.run.kappa)).fold(0.0, f64::max)
    }

    pub fn sample_at(&self, step: usize) -> Option<&GridFunction> {
        self.samples.get(step).map(|s| &s.u)
    }
}

/// Scheme run followed by sampling on the grid.
pub fn simulate(x0: &GridFunction, cfg: &SchemeConfig, params: &ModelParams) -> Result<Trajectory> {
    Ok(Trajectory::from_run(build_knots(x0, cfg, params)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub epsilons: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// `sup_t ||u_j(t) - u_{j+1}(t)||` for consecutive levels.
    pub cauchy: Vec<f64>,
}

/// Runs `eps / 2^j` for `j < levels` (in parallel) and tabulates the
/// successive sup-differences.
pub fn converge_run(x0: &GridFunction, cfg: &SchemeConfig, params: &ModelParams, levels: usize) -> Result<Convergence> {
    if levels < 2 {
        return Err(Error::InvalidParams(format!("at least 2 levels are needed, got {levels}")));
    }
    let epsilons: Vec<f64> = (0..levels).map(|j| cfg.epsilon / f64::powi(2.0, j as i32)).collect();
    let trajectories = epsilons
        .par_iter()
        .map(|&eps| {
            let level = SchemeConfig {
                epsilon: eps,
                ..cfg.clone()
            };
            let traj = simulate(x0, &level, params)?;
            if !traj.run.reached_horizon() {
                return Err(Error::Incomplete(traj.run.terminated_by.as_str().into()));
            }
            Ok(traj)
        })
        .collect::<Result<Vec<_>>>()?;
    let cauchy = trajectories
        .windows(2)
        .map(|pair| sup_distance(&pair[0], &pair[1]))
        .collect();
    Ok(Convergence {
        epsilons,
        trajectories,
        cauchy,
    })
}

/// `sup_t ||a(t) - b(t)||` over the shared grid times.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x.u.distance(&y.u))
        .fold(0.0, f64::max)
}

/// Measured constants and the a-posteriori smallness check of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub beta_condition: BetaCondition,
    pub h0: f64,
    pub lambda_hat: f64,
    pub gamma_hat: f64,
    pub delta_tau: f64,
    pub delta_eps: f64,
    /// `max_h Gamma delta(h) + h + ||T(h) x0||` over grid times `h <= tau`.
    pub radius_growth: f64,
    pub rho: f64,
    /// `lambda_hat * delta_tau`.
    pub contraction: f64,
    pub satisfied: bool,
    pub semigroup_constants: &'static str,
}

/// Computes the certificate of a run; `delta` must reach `tau`.
pub fn certify(run: &KnotRun, params: &ModelParams, delta: &DeltaTable, seed: u64) -> Result<Certificate> {
    let grid = *run.grid();
    let nl = Shifted {
        inner: params,
        gamma: run.gamma,
    };
    let lambda_hat = lipschitz_estimate(&nl, params, 200, seed).max(run.probe_lipschitz);
    let gamma_hat = run.forcing_sup;
    let lookup = |steps: usize| {
        delta.at_steps(steps).ok_or(Error::OutsideRange {
            t: grid.time(steps),
            start: 0.0,
            end: grid.time(delta.horizon_steps()),
        })
    };
    let delta_tau = lookup(run.tau_steps)?;
    let delta_eps = delta.at(run.epsilon).ok_or(Error::OutsideRange {
        t: run.epsilon,
        start: 0.0,
        end: grid.time(delta.horizon_steps()),
    })?;
    let sg = run.semigroup();
    let mut radius_growth = 0.0f64;
    for h in 0..=run.tau_steps {
        // M = 1 and omega = -gamma, so the growth factor exp(omega+ h) is 1.
        let r = gamma_hat * lookup(h)? + grid.time(h) + sg.t0_steps(run.x0(), h).lp_norm();
        radius_growth = radius_growth.max(r);
    }
    let contraction = lambda_hat * delta_tau;
    Ok(Certificate {
        beta_condition: check_beta_condition(params),
        h0: h0_bound(params)?,
        lambda_hat,
        gamma_hat,
        delta_tau,
        delta_eps,
        radius_growth,
        rho: run.rho,
        contraction,
        satisfied: radius_growth <= run.rho && contraction > 0.0 && contraction < 1.0,
        semigroup_constants: "M = 1, omega = -gamma",
    })
}

/// Tabulated `delta` for the shifted family of a run, up to its horizon.
pub fn delta_for(run: &KnotRun, trials: usize, seed: u64) -> Result<DeltaTable> {
    let horizon = run.grid().time(run.tau_steps.max(run.grid().floor_time(run.epsilon).max(1)));
    DeltaTable::build(&run.semigroup(), horizon, run.x0().components(), trials, seed)
}

/// Outcome of the discrete checks on a finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub knot_dist_sup: f64,
    pub correction_sup: f64,
    pub correction_bound: f64,
    /// Largest `||y_k - T(l_k - l_m) y_m|| - bound` over `m < k`; `<= 0` means the bound holds.
    pub knot_drift_excess: f64,
    /// Largest `||u(t) - y_k|| - bound` on each interval.
    pub interval_excess: f64,
    pub sample_dist_sup: f64,
    pub sample_dist_bound: f64,
    pub sample_norm_sup: f64,
    pub rho: f64,
    /// Largest jump between the formulas on either side of a knot.
    pub continuity_gap: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.knot_dist_sup <= MEMBERSHIP_TOL
            && self.correction_sup <= self.correction_bound
            && self.knot_drift_excess <= 0.0
            && self.interval_excess <= 0.0
            && self.sample_dist_sup <= self.sample_dist_bound
            && self.sample_norm_sup <= self.rho
            && self.continuity_gap <= 1e-12
    }
}

/// Checks the discrete invariants of a sampled trajectory against measured
/// constants.
pub fn check_invariants(traj: &Trajectory, delta: &DeltaTable) -> Result<InvariantReport> {
    let run = &traj.run;
    let grid = *run.grid();
    let eps = run.epsilon;
    let gamma_hat = run.forcing_sup;
    let sg = run.semigroup();
    let lookup = |steps: usize| {
        delta.at_steps(steps).ok_or(Error::OutsideRange {
            t: grid.time(steps),
            start: 0.0,
            end: grid.time(delta.horizon_steps()),
        })
    };

    let kappa = run.kappa;
    let knot_dist_sup = run.knots.iter().map(|k| dist_to_c(&k.y, kappa)).fold(0.0, f64::max);
    let correction_sup = run.knots.iter().map(|k| k.correction.lp_norm()).fold(0.0, f64::max);

    let mut knot_drift_excess = f64::NEG_INFINITY;
    for (k, later) in run.knots.iter().enumerate() {
        for earlier in &run.knots[..k] {
            let gap = later.step - earlier.step;
            let drift = later.y.distance(&sg.t0_steps(&earlier.y, gap));
            let bound = gamma_hat * lookup(gap)? + 0.5 * eps * grid.time(gap);
            knot_drift_excess = knot_drift_excess.max(drift - bound);
        }
    }
    if run.knots.len() < 2 {
        knot_drift_excess = 0.0;
    }

    let delta_eps = delta.at(eps).ok_or(Error::OutsideRange {
        t: eps,
        start: 0.0,
        end: grid.time(delta.horizon_steps()),
    })?;
    let interval_bound = eps + gamma_hat * delta_eps + 0.5 * eps * eps;
    let mut interval_excess = f64::NEG_INFINITY;
    for s in &traj.samples {
        let knot = &run.knots[run.interval(s.step)];
        interval_excess = interval_excess.max(s.u.distance(&knot.y) - interval_bound);
    }

    let mut continuity_gap = 0.0f64;
    for k in 1..run.knots.len() {
        continuity_gap = continuity_gap.max(assemble_left(run, k).distance(&run.knots[k].y));
    }

    Ok(InvariantReport {
        knot_dist_sup,
        correction_sup,
        correction_bound: eps / 2.0,
        knot_drift_excess,
        interval_excess,
        sample_dist_sup: traj.defect_sup(),
        sample_dist_bound: eps + gamma_hat * delta_eps,
        sample_norm_sup: traj.samples.iter().map(|s| s.norm).fold(0.0, f64::max),
        rho: run.rho,
        continuity_gap,
    })
}

/// `sup_t ||u(t) - T0(t) x0 - (S <> F(u(.)))(t)||` with `F(u)` sampled on
/// the grid lattice, and the ratio to `eps + delta(eps)`.
pub fn mild_residual(traj: &Trajectory, params: &ModelParams, delta: &DeltaTable) -> Result<(f64, f64)> {
    let run = &traj.run;
    let grid = *run.grid();
    let sg = run.semigroup();
    let nl = Shifted {
        inner: params,
        gamma: run.gamma,
    };
    let end = run.end_steps();
    if end == 0 {
        return Ok((0.0, 0.0));
    }
    let breaks: Vec<usize> = (0..=end).collect();
    let pieces = traj.samples[..end].iter().map(|s| nl.eval(&s.u)).collect();
    let forcing = StepForcing::from_steps(grid, breaks, pieces)?;
    let conv = s_diamond_lattice(&sg, &forcing);
    let mut residual = 0.0f64;
    for (s, c) in traj.samples.iter().zip(&conv) {
        let mut r = s.u.sub(&sg.t0_steps(run.x0(), s.step));
        r.axpy(-1.0, c);
        residual = residual.max(r.lp_norm());
    }
    let delta_eps = delta.at(run.epsilon).unwrap_or(f64::NAN);
    Ok((residual, residual / (run.epsilon + delta_eps)))
}
