//! Convolution `(S <> f)(t)` of the integrated semigroup with step forcings.
//!
//! For a step forcing with pieces `x_i` on `[t_i, t_{i+1})` the convolution
//! telescopes into differences of `S` evaluations, so on grid-aligned times
//! every quantity here is exact up to rounding.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AgeGrid, GridFunction, StatePair};
use crate::semigroup::{DeltaTable, TranslationSemigroup};

/// Piecewise-constant `X`-valued forcing on grid-aligned breakpoints.
///
/// The last piece also covers the right endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepForcing {
    grid: AgeGrid,
    breaks: Vec<usize>,
    pieces: Vec<StatePair>,
}

impl StepForcing {
    /// Forcing from breakpoint times `t_0 < ... < t_m` and `m` pieces.
    pub fn new(grid: AgeGrid, breakpoints: &[f64], pieces: Vec<StatePair>) -> Result<Self> {
        let breaks = breakpoints
            .iter()
            .map(|&t| grid.steps(t))
            .collect::<Result<Vec<_>>>()?;
        Self::from_steps(grid, breaks, pieces)
    }

    /// Forcing with breakpoints given in cells.
    pub fn from_steps(grid: AgeGrid, breaks: Vec<usize>, pieces: Vec<StatePair>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidForcing("at least one piece is required".into()));
        }
        if breaks.len() != pieces.len() + 1 {
            return Err(Error::InvalidForcing(format!(
                "{} pieces need {} breakpoints, got {}",
                pieces.len(),
                pieces.len() + 1,
                breaks.len()
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidForcing("breakpoints must be strictly increasing".into()));
        }
        let n = pieces[0].density.components();
        for piece in &pieces {
            if piece.density.grid() != &grid || piece.density.components() != n || piece.boundary.len() != n {
                return Err(Error::Shape("forcing pieces must share grid and component count".into()));
            }
        }
        Ok(Self { grid, breaks, pieces })
    }

    /// One piece held constant on `[start, end]`.
    pub fn constant(piece: StatePair, start: f64, end: f64) -> Result<Self> {
        let grid = *piece.density.grid();
        Self::new(grid, &[start, end], vec![piece])
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.pieces[0].density.components()
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[StatePair] {
        &self.pieces
    }

    pub fn start_steps(&self) -> usize {
        self.breaks[0]
    }

    pub fn end_steps(&self) -> usize {
        *self.breaks.last().expect("at least two breakpoints")
    }

    pub fn start(&self) -> f64 {
        self.grid.time(self.start_steps())
    }

    pub fn end(&self) -> f64 {
        self.grid.time(self.end_steps())
    }

    fn piece_index(&self, step: usize) -> usize {
        // Index of the last breakpoint <= step, capped at the last piece.
        let idx = self.breaks.partition_point(|&b| b <= step);
        idx.saturating_sub(1).min(self.pieces.len() - 1)
    }

    /// Value on the lattice interval `[step, step + 1)` (absolute cells).
    pub fn value_at_step(&self, step: usize) -> &StatePair {
        assert!(
            step >= self.start_steps() && step <= self.end_steps(),
            "step {step} outside forcing support"
        );
        &self.pieces[self.piece_index(step)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.pieces.iter().map(StatePair::norm).fold(0.0, f64::max)
    }

    /// `f(t + .)` restricted to `[t, end]`, keeping absolute times.
    pub fn restrict_from(&self, step: usize) -> Result<Self> {
        if step < self.start_steps() || step >= self.end_steps() {
            return Err(Error::OutsideRange {
                t: self.grid.time(step),
                start: self.start(),
                end: self.end(),
            });
        }
        let first = self.piece_index(step);
        let mut breaks = vec![step];
        breaks.extend(self.breaks[first + 1..].iter().copied());
        let pieces = self.pieces[first..].to_vec();
        Self::from_steps(self.grid, breaks, pieces)
    }

    /// Refinement with one piece per grid cell of time.
    pub fn to_lattice(&self) -> Self {
        let breaks: Vec<usize> = (self.start_steps()..=self.end_steps()).collect();
        let pieces = (self.start_steps()..self.end_steps())
            .map(|k| self.value_at_step(k).clone())
            .collect();
        Self {
            grid: self.grid,
            breaks,
            pieces,
        }
    }

    /// `alpha * self + beta * other` on the common lattice refinement.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.breaks[0] != other.breaks[0] || self.end_steps() != other.end_steps() {
            return Err(Error::InvalidForcing("forcings must share their support".into()));
        }
        let mut out = self.to_lattice();
        for (k, piece) in (out.start_steps()..).zip(out.pieces.iter_mut()) {
            let mut v = piece.scale(alpha);
            v.axpy(beta, other.value_at_step(k));
            *piece = v;
        }
        Ok(out)
    }
}

/// `S((t - a)+) x - S((t - b)+) x`: the convolution of `x` times the
/// indicator of `[a, b)`.
pub fn s_diamond_indicator(x: &StatePair, a: f64, b: f64, t: f64) -> Result<GridFunction> {
    if !(a < b) {
        return Err(Error::EmptyInterval { a, b });
    }
    let grid = *x.density.grid();
    let (a, b, t) = (grid.steps(a)?, grid.steps(b)?, grid.steps(t)?);
    let sg = TranslationSemigroup::unperturbed(grid);
    let mut out = sg.s_pair_steps(x, t.saturating_sub(a));
    if t > b {
        out.axpy(-1.0, &sg.s_pair_steps(x, t - b));
    }
    Ok(out)
}

/// `(S <> f(t_0 + .))(t - t_0)` by the telescoping sum over pieces.
pub fn s_diamond_step(f: &StepForcing, t: f64) -> Result<GridFunction> {
    s_diamond_step_with(&TranslationSemigroup::unperturbed(*f.grid()), f, t)
}

/// As [`s_diamond_step`] for the shifted family of `sg`.
pub fn s_diamond_step_with(sg: &TranslationSemigroup, f: &StepForcing, t: f64) -> Result<GridFunction> {
    let grid = *f.grid();
    let k = grid.steps(t)?;
    if k < f.start_steps() || k > f.end_steps() {
        return Err(Error::OutsideRange {
            t,
            start: f.start(),
            end: f.end(),
        });
    }
    Ok(telescope(sg, f, k))
}

fn telescope(sg: &TranslationSemigroup, f: &StepForcing, k: usize) -> GridFunction {
    let mut out = GridFunction::zeros(*f.grid(), f.components());
    for (i, piece) in f.pieces.iter().enumerate() {
        let lo = f.breaks[i];
        if lo >= k {
            break;
        }
        out.axpy(1.0, &sg.s_pair_steps(piece, k - lo));
        let hi = f.breaks[i + 1];
        if hi < k {
            out.axpy(-1.0, &sg.s_pair_steps(piece, k - hi));
        }
    }
    out
}

/// `(S <> f)` at every lattice time `t_0, t_0 + da, ..., t_m`, advanced by the
/// cocycle `v(t + da) = T0(da) v(t) + S(da) f(t)`. Entry `j` is the value at
/// `t_0 + j da`.
pub fn s_diamond_lattice(sg: &TranslationSemigroup, f: &StepForcing) -> Vec<GridFunction> {
    let mut out = Vec::with_capacity(f.end_steps() - f.start_steps() + 1);
    let mut v = GridFunction::zeros(*f.grid(), f.components());
    out.push(v.clone());
    for step in f.start_steps()..f.end_steps() {
        let mut next = sg.t0_steps(&v, 1);
        next.axpy(1.0, &sg.s_pair_steps(f.value_at_step(step), 1));
        v = next;
        out.push(v.clone());
    }
    out
}

/// Brute-force `(S <> f)(t)`: the backward difference quotient of the
/// Riemann sum `da * sum_j S(t - t_j) f(t_j)` of `S * f`, on the cell lattice.
pub fn s_diamond_riemann(f: &StepForcing, t: f64) -> Result<GridFunction> {
    let grid = *f.grid();
    let k = grid.steps(t)?;
    if k < f.start_steps() || k > f.end_steps() {
        return Err(Error::OutsideRange {
            t,
            start: f.start(),
            end: f.end(),
        });
    }
    let sg = TranslationSemigroup::unperturbed(grid);
    let riemann = |end: usize| {
        let mut sum = GridFunction::zeros(grid, f.components());
        for j in f.start_steps()..end {
            sum.axpy(grid.cell_width(), &sg.s_pair_steps(f.value_at_step(j), end - j));
        }
        sum
    };
    if k == f.start_steps() {
        return Ok(GridFunction::zeros(grid, f.components()));
    }
    Ok(riemann(k).sub(&riemann(k - 1)).scale(1.0 / grid.cell_width()))
}

/// Outcome of comparing `||(S <> f)(t)||` with `delta(t - t_0) sup ||f||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the semi-variation bound against a tabulated `delta`.
pub fn s_diamond_bound_check(f: &StepForcing, t: f64, delta: &DeltaTable) -> Result<BoundCheck> {
    let lhs = s_diamond_step(f, t)?.lp_norm();
    let elapsed = f.grid().steps(t)? - f.start_steps();
    let d = delta.at_steps(elapsed).ok_or(Error::OutsideRange {
        t,
        start: f.start(),
        end: f.grid().time(f.start_steps() + delta.horizon_steps()),
    })?;
    let rhs = d * f.sup_norm();
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9),
    })
}

/// Norm of `(S<>f)(t+s) - T0(s)(S<>f)(t) - (S<>f(t+.))(s)`, with `t` and `s`
/// measured from the start of `f`.
pub fn cocycle_check(f: &StepForcing, t: f64, s: f64) -> Result<f64> {
    let grid = *f.grid();
    let (tk, sk) = (grid.steps(t)?, grid.steps(s)?);
    let t0 = f.start_steps();
    if t0 + tk + sk > f.end_steps() {
        return Err(Error::OutsideRange {
            t: f.start() + t + s,
            start: f.start(),
            end: f.end(),
        });
    }
    let sg = TranslationSemigroup::unperturbed(grid);
    let whole = telescope(&sg, f, t0 + tk + sk);
    let mut rhs = sg.t0_steps(&telescope(&sg, f, t0 + tk), sk);
    if sk > 0 {
        let tail = f.restrict_from(t0 + tk)?;
        rhs.axpy(1.0, &telescope(&sg, &tail, t0 + tk + sk));
    }
    Ok(whole.distance(&rhs))
}
