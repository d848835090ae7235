//! Translation semigroup and integrated semigroup on the age grid.
//!
//! For grid-aligned times `t = k * da`:
//!
//! * `T0(t) phi` moves `phi` right by `k` cells with zero inflow and scales by
//!   `exp(-gamma t)` (the shifted family `A - gamma I`).
//! * `S(t) (x, phi)` puts `exp(-gamma a) x` in the cells with age `a < t` and
//!   adds the right-endpoint rule `da * sum_{j=1..k} T0(j da) phi`.
//!
//! Both are exact for grid-aligned arguments, so the semigroup law and the
//! translation identity `S(s + h) - S(s) = T0(s) S(h)` hold to rounding.
//! With the right-endpoint rule one step of `T0(da) y + S(da) F(y)` moves each
//! cell's reaction term along with its mass, i.e. it is an explicit Euler step
//! along characteristics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{shift_right, AgeGrid, GridFunction, StatePair};
use crate::probes;

/// Longest step evaluated by direct summation instead of a sliding window.
const DIRECT_SUM_MAX: usize = 16;

/// Discrete `T0` and `S` for `A - gamma I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationSemigroup {
    grid: AgeGrid,
    gamma: f64,
}

impl TranslationSemigroup {
    pub fn new(grid: AgeGrid, gamma: f64) -> Self {
        Self { grid, gamma }
    }

    pub fn unperturbed(grid: AgeGrid) -> Self {
        Self::new(grid, 0.0)
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn decay(&self, steps: usize) -> f64 {
        if self.gamma == 0.0 {
            1.0
        } else {
            (-self.gamma * self.grid.time(steps)).exp()
        }
    }

    pub fn t0_steps(&self, f: &GridFunction, steps: usize) -> GridFunction {
        let mut out = shift_right(f, steps);
        if self.gamma != 0.0 {
            out.scale_in_place(self.decay(steps));
        }
        out
    }

    pub fn apply_t0(&self, f: &GridFunction, t: f64) -> Result<GridFunction> {
        Ok(self.t0_steps(f, self.grid.steps(t)?))
    }

    /// `S(k da)(x, phi)`.
    pub fn s_steps(&self, x: &[f64], f: &GridFunction, steps: usize) -> GridFunction {
        let n = f.components();
        assert_eq!(x.len(), n, "boundary and density component counts differ");
        let cells = f.n_cells();
        let width = self.grid.cell_width();
        let mut out = GridFunction::zeros(*f.grid(), n);
        if steps == 0 {
            return out;
        }
        let w = self.decay(1);
        let src = f.values();
        let dst = out.values_mut();

        let inflow = steps.min(cells);
        let mut weight = 1.0;
        for i in 0..inflow {
            for c in 0..n {
                dst[i * n + c] = weight * x[c];
            }
            weight *= w;
        }

        if steps <= DIRECT_SUM_MAX {
            let weights: Vec<f64> = (0..=steps).map(|j| self.decay(j)).collect();
            for i in 1..cells {
                for c in 0..n {
                    let mut acc = 0.0;
                    for j in 1..=steps.min(i) {
                        acc += weights[j] * src[(i - j) * n + c];
                    }
                    dst[i * n + c] += width * acc;
                }
            }
            return out;
        }

        // Sliding window over the `steps` cells behind cell i. The count of
        // nonzero entries lets the sum restart from an exact zero.
        let wk = self.decay(steps);
        for c in 0..n {
            let mut window = 0.0;
            let mut nonzero = 0usize;
            for i in 1..cells {
                let entering = src[(i - 1) * n + c];
                nonzero += (entering != 0.0) as usize;
                window = w * (entering + window);
                if i > steps {
                    let leaving = src[(i - 1 - steps) * n + c];
                    nonzero -= (leaving != 0.0) as usize;
                    window -= wk * w * leaving;
                }
                if nonzero == 0 {
                    window = 0.0;
                }
                dst[i * n + c] += width * window;
            }
        }
        out
    }

    pub fn apply_s(&self, x: &[f64], f: &GridFunction, t: f64) -> Result<GridFunction> {
        Ok(self.s_steps(x, f, self.grid.steps(t)?))
    }

    pub fn s_pair_steps(&self, pair: &StatePair, steps: usize) -> GridFunction {
        self.s_steps(&pair.boundary, &pair.density, steps)
    }
}

/// `T0(t) f` for the unperturbed transport.
pub fn apply_t0(f: &GridFunction, t: f64) -> Result<GridFunction> {
    TranslationSemigroup::unperturbed(*f.grid()).apply_t0(f, t)
}

/// `S(t)(x, f)` for the unperturbed transport.
pub fn apply_s(x: &[f64], f: &GridFunction, t: f64) -> Result<GridFunction> {
    TranslationSemigroup::unperturbed(*f.grid()).apply_s(x, f, t)
}

/// `exp(-gamma t) T0(t) f`.
pub fn apply_t0_shifted(f: &GridFunction, t: f64, gamma: f64) -> Result<GridFunction> {
    TranslationSemigroup::new(*f.grid(), gamma).apply_t0(f, t)
}

/// Empirical bound `delta(t)` on `||(S <> f)(t)|| / sup ||f||`, tabulated on
/// the grid-aligned times `0, da, ..., horizon`.
///
/// Each candidate forcing is a lattice step function; its convolution is
/// advanced with the cocycle `v(t + da) = T0(da) v(t) + S(da) f(t)` so every
/// intermediate time is a candidate too. The table is made non-decreasing by
/// a running maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    cell_width: f64,
    values: Vec<f64>,
}

/// Targets and splits of the two-block candidate family per table build.
const BLOCK_TARGETS: usize = 24;
const BLOCK_SPLITS: usize = 33;

impl DeltaTable {
    pub fn build(sg: &TranslationSemigroup, horizon: f64, components: usize, trials: usize, seed: u64) -> Result<Self> {
        let grid = *sg.grid();
        let m_max = grid.steps(horizon)?;
        let mut raw = vec![0.0; m_max + 1];

        for &target in &spread(1, m_max, BLOCK_TARGETS) {
            for &split in &spread(0, target, BLOCK_SPLITS) {
                sweep(sg, components, target, &mut raw, |j| block_piece(&grid, components, split, j));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            if m_max == 0 {
                break;
            }
            let forcing = probes::random_step_forcing(&grid, components, 0, m_max, 8, &mut rng);
            sweep(sg, components, m_max, &mut raw, |j| forcing.value_at_step(j).clone());
        }

        let mut running = 0.0f64;
        for v in raw.iter_mut() {
            running = running.max(*v);
            *v = running;
        }
        Ok(Self {
            cell_width: grid.cell_width(),
            values: raw,
        })
    }

    pub fn horizon_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn at_steps(&self, steps: usize) -> Option<f64> {
        self.values.get(steps).copied()
    }

    /// `delta(t)`, rounding `t` up to the next grid time; `None` past the horizon.
    pub fn at(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        let r = t / self.cell_width;
        let k = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
            r.round()
        } else {
            r.ceil()
        };
        self.at_steps(k as usize)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Empirical `delta(t)` for the unperturbed transport on `grid`.
pub fn estimate_delta(grid: &AgeGrid, components: usize, t: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NotGridAligned {
            time: t,
            cell_width: grid.cell_width(),
        });
    }
    let table = DeltaTable::build(&TranslationSemigroup::unperturbed(*grid), t, components, trials, seed)?;
    Ok(table.values[table.horizon_steps()])
}

fn sweep(
    sg: &TranslationSemigroup,
    components: usize,
    steps: usize,
    raw: &mut [f64],
    mut piece: impl FnMut(usize) -> StatePair,
) {
    let mut v = GridFunction::zeros(*sg.grid(), components);
    for j in 0..steps {
        let f = piece(j);
        let scale = f.norm();
        let mut next = sg.t0_steps(&v, 1);
        next.axpy(1.0, &sg.s_pair_steps(&f, 1));
        v = next;
        if scale > 0.0 || j > 0 {
            let k = j + 1;
            if k < raw.len() {
                raw[k] = raw[k].max(v.lp_norm());
            }
        }
    }
}

/// Slot `j` of the two-block forcing aimed at time `target`: the first
/// `split` slots feed a unit boundary value, which lands on the age cells
/// `[target - split, target)`; the remaining slots carry unit densities
/// placed so that transport piles them onto the same cells.
fn block_piece(grid: &AgeGrid, components: usize, split: usize, j: usize) -> StatePair {
    let mut pair = StatePair::zeros(*grid, components);
    if j < split {
        pair.boundary[0] = 1.0;
        return pair;
    }
    let width = split.max(1);
    let level = (width as f64 * grid.cell_width()).powf(-1.0 / grid.p());
    let lo = j.saturating_sub(width);
    let hi = j.min(grid.n_cells());
    if lo == hi {
        // Nothing behind slot 0 to carry; use the cell it starts on.
        pair.density.cell_mut(0)[0] = grid.cell_width().powf(-1.0 / grid.p());
    }
    for i in lo..hi {
        pair.density.cell_mut(i)[0] = level;
    }
    pair
}

/// Up to `count` integers spread evenly over `[lo, hi]`, endpoints included.
fn spread(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if hi < lo {
        return Vec::new();
    }
    let span = hi - lo;
    if span < count {
        return (lo..=hi).collect();
    }
    let mut out: Vec<usize> = (0..count)
        .map(|q| lo + ((q as f64 / (count - 1) as f64) * span as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> AgeGrid {
        AgeGrid::new(0.1, 20, 2.0).unwrap()
    }

    /// Direct double sum for `S(k da)(x, f)`.
    fn naive_s(sg: &TranslationSemigroup, x: &[f64], f: &GridFunction, k: usize) -> GridFunction {
        let g = *f.grid();
        let n = f.components();
        let mut out = GridFunction::zeros(g, n);
        for i in 0..g.n_cells() {
            for (c, &xc) in x.iter().enumerate() {
                let mut v = 0.0;
                if i < k {
                    v += (-sg.gamma() * g.time(i)).exp() * xc;
                }
                for j in 1..=k.min(i) {
                    v += g.cell_width() * (-sg.gamma() * g.time(j)).exp() * f.cell(i - j)[c];
                }
                out.cell_mut(i)[c] = v;
            }
        }
        out
    }

    #[test]
    fn t0_examples() {
        let g = grid();
        let f = GridFunction::constant(g, &[2.0]);
        assert_eq!(apply_t0(&f, 0.0).unwrap(), f);
        let moved = apply_t0(&f, 0.1).unwrap();
        assert_eq!(moved.cell(0), &[0.0]);
        assert!(moved.values()[1..].iter().all(|&v| v == 2.0));
        assert!(apply_t0(&f, 2.0).unwrap().is_zero());
        assert!(apply_t0(&f, 0.15).is_err());
    }

    #[test]
    fn s_examples() {
        let g = grid();
        let zero = GridFunction::zeros(g, 1);
        assert!(apply_s(&[3.0], &GridFunction::constant(g, &[1.0]), 0.0).unwrap().is_zero());

        let s = apply_s(&[1.0], &zero, 0.2).unwrap();
        assert_eq!(&s.values()[..3], &[1.0, 1.0, 0.0]);

        let c = 0.7;
        let s = apply_s(&[0.0], &GridFunction::constant(g, &[c]), 0.2).unwrap();
        assert_eq!(s.values()[0], 0.0);
        assert_relative_eq!(s.values()[1], c * 0.1, epsilon = 1e-15);
        for &v in &s.values()[2..] {
            assert_relative_eq!(v, 2.0 * c * 0.1, epsilon = 1e-15);
        }
        assert!(apply_s(&[0.0], &zero, 0.05).is_err());
    }

    #[test]
    fn shifted_examples() {
        let g = AgeGrid::new(0.25, 12, 2.0).unwrap();
        let f = GridFunction::constant(g, &[1.0]);
        assert_eq!(apply_t0_shifted(&f, 0.5, 0.0).unwrap(), apply_t0(&f, 0.5).unwrap());
        assert_eq!(apply_t0_shifted(&f, 0.0, 3.0).unwrap(), f);
        let out = apply_t0_shifted(&f, 1.0, std::f64::consts::LN_2).unwrap();
        let expect = apply_t0(&f, 1.0).unwrap().scale(0.5);
        assert!(out.distance(&expect) < 1e-15);
    }

    #[test]
    fn window_sum_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid();
        for gamma in [0.0, 0.8] {
            let sg = TranslationSemigroup::new(g, gamma);
            for k in [0, 1, 3, 7, 20, 25] {
                let f = probes::random_density(&g, 2, &mut rng);
                let x = [0.3, -1.2];
                let diff = sg.s_steps(&x, &f, k).distance(&naive_s(&sg, &x, &f, k));
                assert!(diff < 1e-13, "gamma={gamma} k={k} diff={diff}");
            }
        }
    }

    #[test]
    fn delta_lower_bound_from_boundary_impulse() {
        let g = AgeGrid::new(0.01, 200, 2.0).unwrap();
        for t in [0.02, 0.05, 0.1, 0.2] {
            let d = estimate_delta(&g, 1, t, 4, 7).unwrap();
            assert!(d >= t.sqrt() - 1e-12, "t={t}: {d}");
        }
    }

    #[test]
    fn delta_decreases_towards_zero() {
        let g = AgeGrid::new(0.01, 200, 2.0).unwrap();
        let table = DeltaTable::build(&TranslationSemigroup::unperturbed(g), 0.64, 1, 8, 11).unwrap();
        let mut prev = f64::INFINITY;
        for t in [0.64, 0.32, 0.16, 0.08, 0.04, 0.02, 0.01] {
            let d = table.at(t).unwrap();
            assert!(d < prev);
            // Bound derived for this transport: max_s s^(1/p) + (t - s) <= t^(1/p) + t.
            assert!(d <= t.sqrt() + t + 1e-12, "t={t}: {d}");
            prev = d;
        }
        assert_eq!(table.at(0.0), Some(0.0));
        assert!(table.at(1.0).is_none());
    }

    #[test]
    fn delta_zero_forcing_contributes_nothing() {
        let g = AgeGrid::new(0.1, 10, 2.0).unwrap();
        let sg = TranslationSemigroup::unperturbed(g);
        let mut raw = vec![0.0; 4];
        sweep(&sg, 1, 3, &mut raw, |_| StatePair::zeros(g, 1));
        assert!(raw.iter().all(|&v| v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn semigroup_law(seed in 0u64..1000, s in 0usize..25, t in 0usize..25, gamma in 0.0f64..2.0) {
            let g = grid();
            let sg = TranslationSemigroup::new(g, gamma);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = probes::random_density(&g, 2, &mut rng);
            let lhs = sg.t0_steps(&sg.t0_steps(&f, s), t);
            let rhs = sg.t0_steps(&f, s + t);
            if gamma == 0.0 {
                prop_assert_eq!(lhs, rhs);
            } else {
                prop_assert!(lhs.distance(&rhs) <= 1e-14);
            }
        }

        #[test]
        fn translation_identity(seed in 0u64..1000, sigma in 0usize..25, h in 0usize..25, gamma in 0.0f64..2.0) {
            let g = grid();
            let sg = TranslationSemigroup::new(g, gamma);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = probes::random_density(&g, 1, &mut rng);
            let x = [rng_value(seed)];
            let lhs = sg.s_steps(&x, &f, sigma + h).sub(&sg.s_steps(&x, &f, sigma));
            let rhs = sg.t0_steps(&sg.s_steps(&x, &f, h), sigma);
            prop_assert!(lhs.distance(&rhs) <= 1e-12);
        }

        #[test]
        fn t0_contracts(seed in 0u64..1000, t in 0usize..25) {
            let g = grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = probes::random_density(&g, 1, &mut rng);
            prop_assert!(apply_t0(&f, g.time(t)).unwrap().lp_norm() <= f.lp_norm() + 1e-12);
        }
    }

    fn rng_value(seed: u64) -> f64 {
        (seed % 17) as f64 / 8.0 - 1.0
    }
}
