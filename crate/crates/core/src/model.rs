//! Age-structured population model with crowding-truncated birth and death.
//!
//! With `w_i(a) = chi(phi_i(a)) * chi(kappa - Theta(phi(a)))` the right-hand
//! side splits into a boundary birth term and a density death term:
//!
//! ```text
//! F0(phi)_i    = integral of beta(a) w_i(a) da
//! F1(phi)_i(a) = -mu(a) w_i(a)
//! ```
//!
//! The one-step map is `vhat(phi; h) = T0(h) phi + S(h) (F0, F1)`, which
//! [`vhat1`] and [`vhat2`] split into an explicit Euler part along
//! characteristics and a remainder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{chi, dist_to_c, project_to_c, theta, AgeGrid, GridFunction, StatePair};
use crate::probes;
use crate::semigroup::TranslationSemigroup;

/// States farther than this from `C` are rejected where membership is required.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    grid: AgeGrid,
    components: usize,
    kappa: f64,
    beta: Vec<f64>,
    mu: Vec<f64>,
    a_dagger: f64,
}

impl ModelParams {
    /// Parameters from per-cell birth and mortality rates.
    pub fn new(
        grid: AgeGrid,
        components: usize,
        kappa: f64,
        beta: Vec<f64>,
        mu: Vec<f64>,
        a_dagger: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if components == 0 {
            return bad("species count must be at least 1".into());
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {kappa}"));
        }
        if !(a_dagger > 0.0 && a_dagger.is_finite()) {
            return bad(format!("a_dagger must be positive, got {a_dagger}"));
        }
        let n = grid.n_cells();
        if beta.len() != n || mu.len() != n {
            return bad(format!(
                "rates need {n} cells, got beta {} and mu {}",
                beta.len(),
                mu.len()
            ));
        }
        if let Some((i, b)) = beta.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b >= 0.0)) {
            return bad(format!("beta must be finite and non-negative, cell {i} has {b}"));
        }
        let edge_tol = 1e-9 * grid.cell_width();
        if let Some(i) = (0..n).find(|&i| grid.time(i) >= a_dagger - edge_tol && beta[i] != 0.0) {
            return bad(format!(
                "beta must vanish past a_dagger = {a_dagger}, cell {i} (age {}) has {}",
                grid.time(i),
                beta[i]
            ));
        }
        if let Some((i, m)) = mu.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return bad(format!("mu must be finite and bounded away from 0, cell {i} has {m}"));
        }
        Ok(Self {
            grid,
            components,
            kappa,
            beta,
            mu,
            a_dagger,
        })
    }

    /// Samples `beta` and `mu` at cell midpoints; `beta` is set to 0 on cells
    /// starting at or after `a_dagger`.
    pub fn from_profiles(
        grid: AgeGrid,
        components: usize,
        kappa: f64,
        a_dagger: f64,
        beta: impl Fn(f64) -> f64,
        mu: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let edge_tol = 1e-9 * grid.cell_width();
        let b = (0..grid.n_cells())
            .map(|i| {
                if grid.time(i) >= a_dagger - edge_tol {
                    0.0
                } else {
                    beta(grid.center(i))
                }
            })
            .collect();
        let m = (0..grid.n_cells()).map(|i| mu(grid.center(i))).collect();
        Self::new(grid, components, kappa, b, m, a_dagger)
    }

    /// One species, `kappa = 1`, `beta = 1.5` on `[0, 2)`, `mu = 0.5`, `p = 2`,
    /// ages `[0, 10)` in cells of width `0.01`.
    pub fn reference() -> Self {
        let grid = AgeGrid::with_horizon(0.01, 10.0, 2.0).expect("reference grid is valid");
        Self::from_profiles(grid, 1, 1.0, 2.0, |_| 1.5, |_| 0.5).expect("reference parameters are valid")
    }

    /// Same model with the birth rate multiplied by `factor`.
    pub fn with_beta_scaled(&self, factor: f64) -> Result<Self> {
        let beta = self.beta.iter().map(|b| b * factor).collect();
        Self::new(self.grid, self.components, self.kappa, beta, self.mu.clone(), self.a_dagger)
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn a_dagger(&self) -> f64 {
        self.a_dagger
    }

    pub fn mu_sup(&self) -> f64 {
        self.mu.iter().copied().fold(0.0, f64::max)
    }

    pub fn mu_inf(&self) -> f64 {
        self.mu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cell-rule integral of `beta` over `[0, a_dagger)`.
    pub fn beta_integral(&self) -> f64 {
        self.beta.iter().sum::<f64>() * self.grid.cell_width()
    }
}

/// `amplitude * sin^2` hump supported on `[start, end]`, split evenly over
/// the species. Lies in `C` whenever `amplitude <= kappa`.
pub fn bump(grid: &AgeGrid, components: usize, amplitude: f64, start: f64, end: f64) -> GridFunction {
    let share = amplitude / components as f64;
    GridFunction::from_fn_vec(*grid, components, |a, out| {
        let level = if a > start && a < end {
            let s = (std::f64::consts::PI * (a - start) / (end - start)).sin();
            share * s * s
        } else {
            0.0
        };
        out.fill(level);
    })
}

/// Right-hand side `(F0, F1)` acting on densities.
pub trait Nonlinearity: Sync {
    fn eval(&self, phi: &GridFunction) -> StatePair;
}

impl Nonlinearity for ModelParams {
    fn eval(&self, phi: &GridFunction) -> StatePair {
        rhs(self, phi, chi)
    }
}

/// The model without truncation, `w_i = phi_i (kappa - Theta(phi))`.
///
/// On `C` it evaluates bit-for-bit like the truncated model.
#[derive(Debug, Clone, Copy)]
pub struct Untruncated<'a>(pub &'a ModelParams);

impl Nonlinearity for Untruncated<'_> {
    fn eval(&self, phi: &GridFunction) -> StatePair {
        rhs(self.0, phi, |s, _| s)
    }
}

/// `F = 0`: the solution is pure transport.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReaction;

impl Nonlinearity for NoReaction {
    fn eval(&self, phi: &GridFunction) -> StatePair {
        StatePair::zeros(*phi.grid(), phi.components())
    }
}

/// `F_gamma(phi) = F(phi) + gamma (0, phi)`, the right-hand side that goes
/// with the shifted generator `A - gamma I`.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<'a, N: ?Sized> {
    pub inner: &'a N,
    pub gamma: f64,
}

impl<N: Nonlinearity + ?Sized> Nonlinearity for Shifted<'_, N> {
    fn eval(&self, phi: &GridFunction) -> StatePair {
        let mut out = self.inner.eval(phi);
        if self.gamma != 0.0 {
            out.density.axpy(self.gamma, phi);
        }
        out
    }
}

fn rhs(params: &ModelParams, phi: &GridFunction, trunc: impl Fn(f64, f64) -> f64) -> StatePair {
    assert_eq!(phi.grid(), &params.grid, "density grid differs from the model grid");
    assert_eq!(phi.components(), params.components, "density has the wrong species count");
    let n = params.components;
    let kappa = params.kappa;
    let mut births = vec![0.0; n];
    let mut deaths = GridFunction::zeros(params.grid, n);
    for (i, cell) in phi.cells().enumerate() {
        let room = trunc(kappa - theta(cell), kappa);
        let out = deaths.cell_mut(i);
        for c in 0..n {
            let w = trunc(cell[c], kappa) * room;
            births[c] += params.beta[i] * w;
            out[c] = -params.mu[i] * w;
        }
    }
    let width = params.grid.cell_width();
    for b in &mut births {
        *b *= width;
    }
    StatePair {
        boundary: births,
        density: deaths,
    }
}

/// Birth term `F0(phi)`.
pub fn f0(phi: &GridFunction, params: &ModelParams) -> Vec<f64> {
    params.eval(phi).boundary
}

/// Death term `F1(phi)`.
pub fn f1(phi: &GridFunction, params: &ModelParams) -> GridFunction {
    params.eval(phi).density
}

/// `T0(h) phi + S(h) F(phi)`.
pub fn vhat(phi: &GridFunction, h: f64, params: &ModelParams) -> Result<GridFunction> {
    let k = params.grid.steps(h)?;
    Ok(vhat_steps(phi, k, params))
}

pub(crate) fn vhat_steps(phi: &GridFunction, k: usize, params: &ModelParams) -> GridFunction {
    let sg = TranslationSemigroup::unperturbed(params.grid);
    let f = params.eval(phi);
    let mut out = sg.t0_steps(phi, k);
    out.axpy(1.0, &sg.s_pair_steps(&f, k));
    out
}

/// Euler part: `F0(phi)` on ages below `h`, `phi + h F1(phi)` carried `h` to the right above.
pub fn vhat1(phi: &GridFunction, h: f64, params: &ModelParams) -> Result<GridFunction> {
    let k = params.grid.steps(h)?;
    let f = params.eval(phi);
    let n = params.components;
    let cells = params.grid.n_cells();
    let mut out = GridFunction::zeros(params.grid, n);
    for i in 0..cells {
        let dst = out.cell_mut(i);
        if i < k {
            dst.copy_from_slice(&f.boundary);
        } else {
            let src = phi.cell(i - k);
            let death = f.density.cell(i - k);
            for c in 0..n {
                dst[c] = src[c] + h * death[c];
            }
        }
    }
    Ok(out)
}

/// `vhat - vhat1`.
pub fn vhat2(phi: &GridFunction, h: f64, params: &ModelParams) -> Result<GridFunction> {
    Ok(vhat(phi, h, params)?.sub(&vhat1(phi, h, params)?))
}

/// Birth-kernel smallness check `integral of beta <= 4 / kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaCondition {
    #[serde(rename = "value")]
    pub holds: bool,
    pub integral: f64,
    pub bound: f64,
    pub margin: f64,
}

pub fn check_beta_condition(params: &ModelParams) -> BetaCondition {
    let integral = params.beta_integral();
    let bound = 4.0 / params.kappa;
    BetaCondition {
        holds: integral <= bound,
        integral,
        bound,
        margin: bound - integral,
    }
}

/// `1 / (sup(mu) kappa)`: below this step `s -> (1 - h mu (kappa - s)) s` is
/// non-decreasing on `[0, kappa]`.
pub fn h0_bound(params: &ModelParams) -> Result<f64> {
    let m = params.mu_sup();
    if m == 0.0 {
        return Err(Error::ZeroMortality);
    }
    Ok(1.0 / (m * params.kappa))
}

/// State maximizing the births: every species at `kappa / (2n)` where
/// `beta > 0`, so each crowding weight equals `kappa^2 / (4n)`.
pub fn crowding_extremal(params: &ModelParams) -> GridFunction {
    let level = params.kappa / (2.0 * params.components as f64);
    let mut phi = GridFunction::zeros(params.grid, params.components);
    for (i, &b) in params.beta.iter().enumerate() {
        if b > 0.0 {
            phi.cell_mut(i).fill(level);
        }
    }
    phi
}

/// Worst `dist(vhat1(phi; h), C)` over random states and all grid steps up to `h0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerCheck {
    pub states: usize,
    pub steps: usize,
    pub random_defect_sup: f64,
    /// Defect of [`crowding_extremal`] at one cell.
    pub extremal_defect: f64,
}

/// Runs `vhat1` on `states` random members of `C` (half smooth, half
/// cell-wise rough) for every grid-aligned `h <= h0`, capped at the age range.
pub fn euler_invariance_check(params: &ModelParams, states: usize, seed: u64) -> Result<EulerCheck> {
    let grid = params.grid;
    let steps = grid.floor_time(h0_bound(params)?).min(grid.n_cells());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_defect_sup = 0.0f64;
    for q in 0..states {
        let phi = if q % 2 == 0 {
            probes::random_smooth_in_c(&grid, params.components, params.kappa, &mut rng)
        } else {
            probes::random_rough_in_c(&grid, params.components, params.kappa, &mut rng)
        };
        for k in 1..=steps {
            let v = vhat1(&phi, grid.time(k), params)?;
            random_defect_sup = random_defect_sup.max(dist_to_c(&v, params.kappa));
        }
    }
    let extremal = vhat1(&crowding_extremal(params), grid.cell_width(), params)?;
    Ok(EulerCheck {
        states,
        steps,
        random_defect_sup,
        extremal_defect: dist_to_c(&extremal, params.kappa),
    })
}

/// `dist(vhat(phi; h), C) / h` for `phi` in `C`.
pub fn subtangency_defect(phi: &GridFunction, h: f64, params: &ModelParams) -> Result<f64> {
    let k = params.grid.steps(h)?;
    if k == 0 {
        return Err(Error::NotGridAligned {
            time: h,
            cell_width: params.grid.cell_width(),
        });
    }
    let d = dist_to_c(phi, params.kappa);
    if d > MEMBERSHIP_TOL {
        return Err(Error::NotInSet { distance: d });
    }
    Ok(dist_to_c(&vhat_steps(phi, k, params), params.kappa) / params.grid.time(k))
}

/// Largest observed `||F(u) - F(v)|| / ||u - v||` over `pairs` random pairs
/// in `C`. Half the pairs are unrelated states, half are small perturbations.
pub fn lipschitz_estimate(nl: &impl Nonlinearity, params: &ModelParams, pairs: usize, seed: u64) -> f64 {
    let grid = params.grid;
    let n = params.components;
    let kappa = params.kappa;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for q in 0..pairs {
        let u = if rng.gen_bool(0.5) {
            probes::random_smooth_in_c(&grid, n, kappa, &mut rng)
        } else {
            probes::random_rough_in_c(&grid, n, kappa, &mut rng)
        };
        let v = if q % 2 == 0 {
            probes::random_smooth_in_c(&grid, n, kappa, &mut rng)
        } else {
            let radius = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let mut w = u.clone();
            w.axpy(radius, &probes::random_direction(&grid, n, &mut rng));
            project_to_c(&w, kappa)
        };
        let gap = u.distance(&v);
        if gap > 0.0 {
            best = best.max(nl.eval(&u).distance(&nl.eval(&v)) / gap);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn small() -> ModelParams {
        let g = AgeGrid::new(0.1, 60, 2.0).unwrap();
        ModelParams::from_profiles(g, 1, 1.0, 2.0, |_| 1.5, |_| 0.5).unwrap()
    }

    #[test]
    fn validation() {
        let g = AgeGrid::new(0.5, 4, 2.0).unwrap();
        let ok = |b: Vec<f64>, m: Vec<f64>| ModelParams::new(g, 1, 1.0, b, m, 1.0);
        assert!(ok(vec![1.0, 1.0, 0.0, 0.0], vec![0.5; 4]).is_ok());
        assert!(ok(vec![1.0, 1.0, 1.0, 0.0], vec![0.5; 4]).is_err());
        assert!(ok(vec![-1.0, 0.0, 0.0, 0.0], vec![0.5; 4]).is_err());
        assert!(ok(vec![0.0; 4], vec![0.5, 0.0, 0.5, 0.5]).is_err());
        assert!(ok(vec![0.0; 3], vec![0.5; 4]).is_err());
        assert!(ModelParams::new(g, 1, 0.0, vec![0.0; 4], vec![0.5; 4], 1.0).is_err());
    }

    #[test]
    fn f0_examples() {
        let p = small();
        let g = *p.grid();
        assert_eq!(f0(&GridFunction::zeros(g, 1), &p), vec![0.0]);
        for c in [0.0, 0.25, 0.5, 1.0] {
            let val = f0(&GridFunction::constant(g, &[c]), &p)[0];
            assert_relative_eq!(val, 1.5 * 2.0 * c * (1.0 - c), epsilon = 1e-12);
        }
    }

    #[test]
    fn f0_vanishes_on_saturated_states() {
        let g = AgeGrid::new(0.1, 60, 2.0).unwrap();
        let p = ModelParams::from_profiles(g, 2, 1.0, 2.0, |_| 1.5, |_| 0.5).unwrap();
        let phi = GridFunction::constant(g, &[0.3, 0.7]);
        assert_eq!(f0(&phi, &p), vec![0.0, 0.0]);
    }

    #[test]
    fn f1_examples() {
        let p = small();
        let g = *p.grid();
        assert!(f1(&GridFunction::zeros(g, 1), &p).is_zero());
        let v = f1(&GridFunction::constant(g, &[0.3]), &p);
        assert!(v.values().iter().all(|&x| (x + 0.5 * 0.3 * 0.7).abs() < 1e-15));
        assert!(f1(&GridFunction::constant(g, &[2.0]), &p).is_zero());
    }

    #[test]
    fn euler_part_leaves_c_only_for_large_births() {
        let p = small();
        let ok = euler_invariance_check(&p, 4, 1).unwrap();
        assert_eq!(ok.steps, 20);
        assert!(ok.random_defect_sup <= 1e-12);
        assert!(ok.extremal_defect <= 1e-12);
        let heavy = p.with_beta_scaled(8.0 / 3.0).unwrap();
        assert!(!check_beta_condition(&heavy).holds);
        let bad = euler_invariance_check(&heavy, 2, 1).unwrap();
        // Births are 2 kappa against the cap kappa on one cell of width 0.1.
        assert_relative_eq!(bad.extremal_defect, (0.1f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn vhat_examples() {
        let p = small();
        let g = *p.grid();
        let mut phi = GridFunction::zeros(g, 1);
        phi.cell_mut(5)[0] = 0.4;
        assert_eq!(vhat(&phi, 0.0, &p).unwrap(), phi);
        assert!(vhat(&GridFunction::zeros(g, 1), 0.3, &p).unwrap().is_zero());

        // One cell of mass moved two cells: each of the two steps drops
        // da * F1 one and two cells downstream.
        let v = vhat(&phi, 0.2, &p).unwrap();
        let death = -0.5 * 0.4 * 0.6;
        let births = 1.5 * 0.1 * 0.4 * 0.6;
        assert_relative_eq!(v.cell(0)[0], births, epsilon = 1e-15);
        assert_relative_eq!(v.cell(1)[0], births, epsilon = 1e-15);
        assert_eq!(v.cell(5)[0], 0.0);
        assert_relative_eq!(v.cell(6)[0], 0.1 * death, epsilon = 1e-15);
        assert_relative_eq!(v.cell(7)[0], 0.4 + 0.1 * death, epsilon = 1e-15);
        assert_eq!(v.cell(8)[0], 0.0);
    }

    #[test]
    fn vhat1_branches() {
        let p = small();
        let g = *p.grid();
        let phi = GridFunction::from_fn(g, |a| 0.5 * (a * 1.3).sin().abs());
        assert_eq!(vhat1(&phi, 0.0, &p).unwrap(), phi);
        assert!(vhat2(&phi, 0.0, &p).unwrap().is_zero());
        let births = f0(&phi, &p);
        let deaths = f1(&phi, &p);
        let v = vhat1(&phi, 0.3, &p).unwrap();
        for i in 0..3 {
            assert_eq!(v.cell(i), births.as_slice());
        }
        for i in 3..g.n_cells() {
            assert_eq!(v.cell(i)[0], phi.cell(i - 3)[0] + 0.3 * deaths.cell(i - 3)[0]);
        }
        assert!(vhat2(&GridFunction::zeros(g, 1), 0.3, &p).unwrap().is_zero());
    }

    #[test]
    fn beta_condition_examples() {
        let g = AgeGrid::new(0.01, 1000, 2.0).unwrap();
        let zero = ModelParams::from_profiles(g, 1, 1.0, 2.0, |_| 0.0, |_| 0.5).unwrap();
        let c = check_beta_condition(&zero);
        assert!(c.holds);
        assert_eq!(c.margin, 4.0);

        let c = check_beta_condition(&ModelParams::reference());
        assert!(c.holds);
        assert_relative_eq!(c.integral, 3.0, epsilon = 1e-12);

        let c = check_beta_condition(&ModelParams::reference().with_beta_scaled(8.0 / 3.0).unwrap());
        assert!(!c.holds);
        assert_relative_eq!(c.integral, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn h0_examples() {
        let p = ModelParams::reference();
        assert_eq!(h0_bound(&p).unwrap(), 2.0);
        let g = *p.grid();
        let wide = ModelParams::from_profiles(g, 1, 2.0, 2.0, |_| 1.5, |_| 0.5).unwrap();
        assert_eq!(h0_bound(&wide).unwrap(), 1.0);
        let fast = ModelParams::from_profiles(g, 1, 1.0, 2.0, |_| 1.5, |_| 1.0).unwrap();
        assert_eq!(h0_bound(&fast).unwrap(), 1.0);
    }

    #[test]
    fn h0_keeps_the_survival_map_monotone() {
        let p = ModelParams::reference();
        let h = h0_bound(&p).unwrap();
        for m in [p.mu_inf(), 0.5 * (p.mu_inf() + p.mu_sup()), p.mu_sup()] {
            let map = |s: f64| (1.0 - h * m * (p.kappa() - s)) * s;
            let samples: Vec<f64> = (0..=2000).map(|j| map(j as f64 / 2000.0 * p.kappa())).collect();
            assert!(samples.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        }
    }

    #[test]
    fn defect_requires_membership() {
        let p = small();
        let g = *p.grid();
        assert_eq!(subtangency_defect(&GridFunction::zeros(g, 1), 0.2, &p).unwrap(), 0.0);
        let outside = GridFunction::constant(g, &[1.5]);
        assert!(matches!(subtangency_defect(&outside, 0.2, &p), Err(Error::NotInSet { .. })));
        assert!(subtangency_defect(&GridFunction::zeros(g, 1), 0.0, &p).is_err());
    }

    #[test]
    fn untruncated_agrees_bitwise_on_c() {
        let g = AgeGrid::new(0.05, 200, 2.0).unwrap();
        let p = ModelParams::from_profiles(g, 3, 1.0, 2.0, |a| 1.0 + 0.2 * a, |a| 0.4 + 0.1 * a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let phi = probes::random_rough_in_c(&g, 3, 1.0, &mut rng);
            assert_eq!(p.eval(&phi), Untruncated(&p).eval(&phi));
        }
    }

    #[test]
    fn shifted_adds_gamma_phi() {
        let p = small();
        let phi = GridFunction::from_fn(*p.grid(), |a| 0.2 + 0.1 * a.cos());
        let out = Shifted { inner: &p, gamma: 0.7 }.eval(&phi);
        let mut expect = p.eval(&phi);
        expect.density.axpy(0.7, &phi);
        assert_eq!(out, expect);
        assert!(NoReaction.eval(&phi).norm() == 0.0);
    }

    #[test]
    fn lipschitz_quotient_is_bounded() {
        let p = small();
        let l = lipschitz_estimate(&p, &p, 1000, 3);
        let beta_l2 = p.beta().iter().map(|b| b * b * 0.1).sum::<f64>().sqrt();
        // |d(s(kappa - s))| <= kappa |ds| on [0, kappa], so this bound is rigorous for n = 1.
        assert!(l > 0.0 && l <= (beta_l2 + p.mu_sup()) * p.kappa() + 1e-12, "{l}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn euler_part_stays_in_c(seed in 0u64..100_000, k in 1usize..=20, n in 1usize..=3) {
            let g = AgeGrid::new(0.1, 40, 2.0).unwrap();
            let p = ModelParams::from_profiles(g, n, 1.0, 2.0, |_| 2.0, |_| 0.5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = probes::random_rough_in_c(&g, n, 1.0, &mut rng);
            prop_assert!(dist_to_c(&vhat1(&phi, g.time(k), &p).unwrap(), 1.0) <= 1e-12);
        }

        #[test]
        fn births_respect_the_range_bound(seed in 0u64..100_000, n in 1usize..=3) {
            let p = {
                let g = AgeGrid::new(0.1, 40, 2.0).unwrap();
                ModelParams::from_profiles(g, n, 1.5, 2.0, |a| 1.0 + a, |_| 0.5).unwrap()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Off C the bound only survives for one species: with two, (kappa, -kappa) gives w = kappa^2.
            let phi = if n == 1 {
                probes::random_density(p.grid(), n, &mut rng).scale(2.0)
            } else {
                probes::random_rough_in_c(p.grid(), n, p.kappa(), &mut rng)
            };
            let cap = p.kappa() * p.kappa() / 4.0 * p.beta_integral();
            for b in f0(&phi, &p) {
                prop_assert!((0.0..=cap + 1e-12).contains(&b));
            }
        }
    }
}
