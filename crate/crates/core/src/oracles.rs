//! Reference solvers for cross-checking the knot scheme.
//!
//! * [`picard_solve`] iterates the variation-of-constants formula on the time
//!   lattice, one window at a time so that each window is a contraction.
//! * [`characteristics_solve`] transports by one cell per step and integrates
//!   the mortality ODE along each characteristic with classical RK4. It only
//!   uses the grid and the model parameters.

use rayon::prelude::*;
use serde::Serialize;

use crate::convolution::{s_diamond_lattice, StepForcing};
use crate::error::{Error, Result};
use crate::grid::{chi, theta, GridFunction};
use crate::model::{lipschitz_estimate, ModelParams, Nonlinearity};
use crate::semigroup::{DeltaTable, TranslationSemigroup};

/// A solution sampled at the grid times `0, da, ..., tau`.
pub type Samples = Vec<(f64, GridFunction)>;

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOptions {
    pub tolerance: f64,
    /// Largest accepted `lambda_hat * delta(window)`.
    pub window_target: f64,
    pub lipschitz_pairs: usize,
    pub delta_trials: usize,
    pub seed: u64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            window_target: 0.5,
            lipschitz_pairs: 200,
            delta_trials: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardWindow {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    /// `d_{m+1} / d_m` for successive sup-differences.
    pub ratios: Vec<f64>,
    pub final_difference: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub samples: Samples,
    pub windows: Vec<PicardWindow>,
    pub lambda_hat: f64,
    pub window_delta: f64,
}

impl PicardSolution {
    /// `lambda_hat * delta(window)`, the contraction bound each window was sized for.
    pub fn contraction_bound(&self) -> f64 {
        self.lambda_hat * self.window_delta
    }

    pub fn converged(&self) -> bool {
        self.windows.iter().all(|w| w.converged)
    }

    /// Largest ratio of successive differences over all windows.
    pub fn worst_ratio(&self) -> f64 {
        self.windows
            .iter()
            .flat_map(|w| w.ratios.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Picard iteration for the model right-hand side.
pub fn picard_solve(x0: &GridFunction, tau: f64, iters: usize, params: &ModelParams) -> Result<PicardSolution> {
    picard_solve_with(x0, tau, iters, params, params, &PicardOptions::default())
}

/// Picard iteration for any right-hand side; `params` supplies the grid and
/// the set used to sample Lipschitz quotients.
pub fn picard_solve_with<N: Nonlinearity>(
    x0: &GridFunction,
    tau: f64,
    iters: usize,
    nl: &N,
    params: &ModelParams,
    opts: &PicardOptions,
) -> Result<PicardSolution> {
    let grid = *params.grid();
    let total = grid.steps(tau)?;
    if iters == 0 {
        return Err(Error::InvalidParams("at least one Picard iteration is required".into()));
    }
    let sg = TranslationSemigroup::unperturbed(grid);
    let lambda_hat = lipschitz_estimate(nl, params, opts.lipschitz_pairs, opts.seed);
    let (window, window_delta) = if total == 0 {
        (1, 0.0)
    } else {
        let table = DeltaTable::build(&sg, tau, x0.components(), opts.delta_trials, opts.seed)?;
        let mut w = 1;
        for k in 1..=total {
            if lambda_hat * table.at_steps(k).expect("table reaches tau") <= opts.window_target {
                w = k;
            }
        }
        (w, table.at_steps(w).expect("window within table"))
    };

    let mut samples: Samples = vec![(0.0, x0.clone())];
    let mut windows = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + window).min(total);
        let (states, report) = picard_window(&sg, nl, &samples[start].1, start, end, iters, opts.tolerance)?;
        for (j, u) in states.into_iter().enumerate().skip(1) {
            samples.push((grid.time(start + j), u));
        }
        windows.push(report);
        start = end;
    }
    Ok(PicardSolution {
        samples,
        windows,
        lambda_hat,
        window_delta,
    })
}

fn picard_window<N: Nonlinearity>(
    sg: &TranslationSemigroup,
    nl: &N,
    initial: &GridFunction,
    start: usize,
    end: usize,
    iters: usize,
    tol: f64,
) -> Result<(Vec<GridFunction>, PicardWindow)> {
    let grid = *sg.grid();
    let len = end - start;
    let transported: Vec<GridFunction> = (0..=len).map(|j| sg.t0_steps(initial, j)).collect();
    let mut current = vec![initial.clone(); len + 1];
    let mut ratios = Vec::new();
    let mut previous: Option<f64> = None;
    let mut rising = 0;
    let mut iterations = 0;
    let mut difference = f64::INFINITY;
    while iterations < iters {
        iterations += 1;
        let pieces = current[..len].iter().map(|u| nl.eval(u)).collect();
        let forcing = StepForcing::from_steps(grid, (start..=end).collect(), pieces)?;
        let conv = s_diamond_lattice(sg, &forcing);
        let next: Vec<GridFunction> = transported.iter().zip(&conv).map(|(t, c)| t.add(c)).collect();
        difference = next
            .iter()
            .zip(&current)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        current = next;
        if let Some(prev) = previous {
            if prev > 0.0 {
                let ratio = difference / prev;
                ratios.push(ratio);
                rising = if ratio >= 1.0 { rising + 1 } else { 0 };
                if rising >= 3 {
                    return Err(Error::NonContraction { ratios });
                }
            }
        }
        if difference < tol {
            break;
        }
        previous = Some(difference);
    }
    let report = PicardWindow {
        start: grid.time(start),
        end: grid.time(end),
        iterations,
        ratios,
        final_difference: difference,
        converged: difference < tol,
    };
    Ok((current, report))
}

/// Unit-CFL characteristics with RK4 for the mortality term.
///
/// Each step moves every cell one to the right, fills cell 0 with the birth
/// integral of the previous state, then integrates
/// `u' = -mu chi(u_i) chi(kappa - Theta(u))` over one cell width. `mu` is taken
/// at the age a characteristic has at the start of the step.
pub fn characteristics_solve(x0: &GridFunction, tau: f64, params: &ModelParams) -> Result<Samples> {
    let grid = *params.grid();
    let total = grid.steps(tau)?;
    if x0.grid() != &grid || x0.components() != params.components() {
        return Err(Error::Shape("initial state does not match the model grid".into()));
    }
    let n = params.components();
    let kappa = params.kappa();
    let dt = grid.cell_width();
    let beta = params.beta();
    let mu = params.mu();

    let mut samples = vec![(0.0, x0.clone())];
    for step in 1..=total {
        let prev = &samples[step - 1].1;
        let mut births = vec![0.0; n];
        for (i, cell) in prev.cells().enumerate() {
            let room = chi(kappa - theta(cell), kappa);
            for c in 0..n {
                births[c] += beta[i] * chi(cell[c], kappa) * room;
            }
        }
        for b in &mut births {
            *b *= dt;
        }

        let mut next = GridFunction::zeros(grid, n);
        next.values_mut()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out)| {
                let (start, rate) = if i == 0 {
                    (births.as_slice(), mu[0])
                } else {
                    (prev.cell(i - 1), mu[i - 1])
                };
                out.copy_from_slice(start);
                rk4_mortality(out, rate, kappa, dt);
            });
        samples.push((grid.time(step), next));
    }
    Ok(samples)
}

fn rk4_mortality(u: &mut [f64], rate: f64, kappa: f64, dt: f64) {
    let n = u.len();
    let field = |v: &[f64], out: &mut [f64]| {
        let room = chi(kappa - theta(v), kappa);
        for c in 0..n {
            out[c] = -rate * chi(v[c], kappa) * room;
        }
    };
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    field(u, &mut k1);
    for c in 0..n {
        tmp[c] = u[c] + 0.5 * dt * k1[c];
    }
    field(&tmp, &mut k2);
    for c in 0..n {
        tmp[c] = u[c] + 0.5 * dt * k2[c];
    }
    field(&tmp, &mut k3);
    for c in 0..n {
        tmp[c] = u[c] + dt * k3[c];
    }
    field(&tmp, &mut k4);
    for c in 0..n {
        u[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    }
}

/// `sup_t ||a(t) - b(t)||` over the times both sample lists share.
pub fn sup_gap(a: &[(f64, GridFunction)], b: &[(f64, GridFunction)]) -> f64 {
    a.iter()
        .zip(b)
        .map(|((_, x), (_, y))| x.distance(y))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dist_to_c, AgeGrid};
    use crate::model::{NoReaction, Untruncated};
    use crate::semigroup::apply_t0;

    fn coarse() -> ModelParams {
        let g = AgeGrid::new(0.05, 80, 2.0).unwrap();
        ModelParams::from_profiles(g, 1, 1.0, 2.0, |_| 1.5, |_| 0.5).unwrap()
    }

    fn bump(p: &ModelParams) -> GridFunction {
        GridFunction::from_fn(*p.grid(), |a| if (0.5..2.5).contains(&a) { 0.3 * (a - 0.5).sin() } else { 0.0 })
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let p = coarse();
        let x0 = GridFunction::zeros(*p.grid(), 1);
        let sol = picard_solve(&x0, 0.5, 20, &p).unwrap();
        assert!(sol.samples.iter().all(|(_, u)| u.is_zero()));
        assert!(sol.windows.iter().all(|w| w.iterations == 1));
        assert!(characteristics_solve(&x0, 0.5, &p).unwrap().iter().all(|(_, u)| u.is_zero()));
    }

    #[test]
    fn no_reaction_is_pure_transport() {
        let p = coarse();
        let x0 = bump(&p);
        let sol = picard_solve_with(&x0, 1.0, 20, &NoReaction, &p, &PicardOptions::default()).unwrap();
        for (t, u) in &sol.samples {
            assert_eq!(u, &apply_t0(&x0, *t).unwrap());
        }
    }

    fn picard_vs_characteristics(cell_width: f64) -> f64 {
        let g = AgeGrid::with_horizon(cell_width, 4.0, 2.0).unwrap();
        let p = ModelParams::from_profiles(g, 1, 1.0, 2.0, |_| 1.5, |_| 0.5).unwrap();
        let x0 = bump(&p);
        let picard = picard_solve(&x0, 1.0, 50, &p).unwrap();
        assert!(picard.converged());
        assert!(picard.contraction_bound() <= 0.5);
        assert!(picard.worst_ratio() < 1.0);
        let chars = characteristics_solve(&x0, 1.0, &p).unwrap();
        assert_eq!(picard.samples.len(), chars.len());
        for (_, u) in picard.samples.iter().chain(&chars) {
            assert!(dist_to_c(u, 1.0) <= 1e-10);
        }
        sup_gap(&picard.samples, &chars)
    }

    #[test]
    fn picard_and_characteristics_agree_to_first_order() {
        let coarse_gap = picard_vs_characteristics(0.05);
        let fine_gap = picard_vs_characteristics(0.025);
        assert!(coarse_gap < 1e-2, "gap {coarse_gap}");
        assert!(fine_gap < 0.6 * coarse_gap, "{coarse_gap} -> {fine_gap}");
    }

    #[test]
    fn logistic_decay_along_characteristics() {
        // beta = 0: every characteristic solves u' = -m u (kappa - u) exactly.
        let g = AgeGrid::new(0.05, 80, 2.0).unwrap();
        let (m, kappa, c) = (0.8, 1.0, 0.6);
        let p = ModelParams::from_profiles(g, 1, kappa, 2.0, |_| 0.0, |_| m).unwrap();
        let x0 = GridFunction::constant(g, &[c]);
        let sol = characteristics_solve(&x0, 1.0, &p).unwrap();
        let (t, u) = sol.last().unwrap();
        let e = (m * kappa * t).exp();
        let exact = kappa * c / (c + (kappa - c) * e);
        for i in 20..80 {
            assert!((u.cell(i)[0] - exact).abs() < 1e-9, "cell {i}: {} vs {exact}", u.cell(i)[0]);
        }
        assert!(u.cell(0)[0] == 0.0);
    }

    #[test]
    fn untruncated_rhs_gives_the_same_picard_solution() {
        let p = coarse();
        let x0 = bump(&p);
        let a = picard_solve(&x0, 0.5, 50, &p).unwrap();
        let b = picard_solve_with(&x0, 0.5, 50, &Untruncated(&p), &p, &PicardOptions::default()).unwrap();
        for ((_, u), (_, v)) in a.samples.iter().zip(&b.samples) {
            assert_eq!(u, v);
        }
    }

    #[test]
    fn rejects_unaligned_horizon() {
        let p = coarse();
        let x0 = bump(&p);
        assert!(picard_solve(&x0, 0.33, 10, &p).is_err());
        assert!(characteristics_solve(&x0, 0.33, &p).is_err());
    }
}
