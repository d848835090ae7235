//! Discrete L^p age densities.
//!
//! A [`GridFunction`] stores cell averages of a density `a -> R^n` on a
//! uniform age grid truncated at `a_max`. Norms use the l^p vector norm per
//! cell, so the discrete L^p norm is `(sum_i |f_i|_p^p * da)^(1/p)` and any
//! pointwise constraint set factors through cell-wise distances.
//!
//! The invariant set is the density band
//! `C = { phi : phi >= 0, 0 <= Theta(phi(a)) <= kappa }`, where `Theta` is the
//! component sum. [`dist_to_c`] is exact; [`project_to_c`] returns an exact
//! cell-wise nearest point.

use crate::error::{Error, Result};

/// Relative slack accepted when converting a time to a whole number of cells.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    cell_width: f64,
    n_cells: usize,
    p: f64,
}

impl AgeGrid {
    pub fn new(cell_width: f64, n_cells: usize, p: f64) -> Result<Self> {
        if !(cell_width > 0.0 && cell_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell width must be positive and finite, got {cell_width}"
            )));
        }
        if n_cells == 0 {
            return Err(Error::InvalidGrid("at least one cell is required".into()));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "exponent p must be finite and >= 1, got {p}"
            )));
        }
        Ok(Self {
            cell_width,
            n_cells,
            p,
        })
    }

    /// Grid covering `[0, a_max)`; `a_max` must be a multiple of `cell_width`.
    pub fn with_horizon(cell_width: f64, a_max: f64, p: f64) -> Result<Self> {
        if !(cell_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cell width must be positive, got {cell_width}"
            )));
        }
        let n = aligned_steps(a_max, cell_width)?;
        Self::new(cell_width, n, p)
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn a_max(&self) -> f64 {
        self.n_cells as f64 * self.cell_width
    }

    /// Midpoint age of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.cell_width
    }

    /// Number of cells spanned by the grid-aligned time `t`.
    pub fn steps(&self, t: f64) -> Result<usize> {
        aligned_steps(t, self.cell_width)
    }

    pub fn time(&self, steps: usize) -> f64 {
        steps as f64 * self.cell_width
    }

    /// `|v|_p` for a cell vector.
    pub fn vec_norm(&self, v: &[f64]) -> f64 {
        vec_norm_p(v, self.p)
    }

    /// Largest grid-aligned time not exceeding `t` (0 for `t < cell_width`).
    pub fn floor_time(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let r = t / self.cell_width;
        let k = r.round();
        if (r - k).abs() <= ALIGN_TOL * r.max(1.0) {
            k as usize
        } else {
            r.floor() as usize
        }
    }
}

fn aligned_steps(t: f64, width: f64) -> Result<usize> {
    let err = || Error::NotGridAligned {
        time: t,
        cell_width: width,
    };
    if !(t >= 0.0 && t.is_finite()) {
        return Err(err());
    }
    let r = t / width;
    let k = r.round();
    if (r - k).abs() > ALIGN_TOL * r.max(1.0) {
        return Err(err());
    }
    Ok(k as usize)
}

pub(crate) fn vec_norm_p(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

fn root_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// Cell-averaged density with `components` species per age cell.
///
/// Values are stored cell-major: component `c` of cell `i` lives at
/// `i * components + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: AgeGrid,
    components: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: AgeGrid, components: usize) -> Self {
        assert!(components >= 1, "a density needs at least one component");
        Self {
            grid,
            components,
            values: vec![0.0; grid.n_cells * components],
        }
    }

    pub fn from_values(grid: AgeGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::Shape("at least one component is required".into()));
        }
        if values.len() != grid.n_cells * components {
            return Err(Error::Shape(format!(
                "expected {} values ({} cells x {} components), got {}",
                grid.n_cells * components,
                grid.n_cells,
                components,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite value {bad}")));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Scalar density sampled at cell midpoints.
    pub fn from_fn(grid: AgeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_cells).map(|i| f(grid.center(i))).collect();
        Self {
            grid,
            components: 1,
            values,
        }
    }

    /// Vector density sampled at cell midpoints; `f` fills one cell.
    pub fn from_fn_vec(grid: AgeGrid, components: usize, f: impl Fn(f64, &mut [f64])) -> Self {
        let mut out = Self::zeros(grid, components);
        for i in 0..grid.n_cells {
            let a = grid.center(i);
            f(a, out.cell_mut(i));
        }
        out
    }

    pub fn constant(grid: AgeGrid, value: &[f64]) -> Self {
        let mut out = Self::zeros(grid, value.len());
        for i in 0..grid.n_cells {
            out.cell_mut(i).copy_from_slice(value);
        }
        out
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.components;
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.components)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn lp_norm(&self) -> f64 {
        lp_norm(self)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid && self.components == other.components
    }

    fn check_shape(&self, other: &Self) {
        assert!(
            self.same_shape(other),
            "grid function shape mismatch ({} x {} vs {} x {})",
            self.grid.n_cells,
            self.components,
            other.grid.n_cells,
            other.components
        );
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        self.check_shape(other);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale_in_place(alpha);
        out
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    /// `lp_norm(self - other)` without allocating.
    pub fn distance(&self, other: &Self) -> f64 {
        self.check_shape(other);
        let p = self.grid.p;
        let mut acc = 0.0;
        for (a, b) in self.cells().zip(other.cells()) {
            let cell: f64 = a.iter().zip(b).map(|(x, y)| pow_p(x - y, p)).sum();
            acc += cell;
        }
        root_p(acc * self.grid.cell_width, p)
    }
}

/// An element `(x, phi)` of `R^n x L^p`.
///
/// Elements of the closed domain have `boundary == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub boundary: Vec<f64>,
    pub density: GridFunction,
}

impl StatePair {
    pub fn new(boundary: Vec<f64>, density: GridFunction) -> Result<Self> {
        if boundary.len() != density.components() {
            return Err(Error::Shape(format!(
                "boundary has {} components, density has {}",
                boundary.len(),
                density.components()
            )));
        }
        Ok(Self { boundary, density })
    }

    /// Embeds a density as `(0, phi)`.
    pub fn from_density(density: GridFunction) -> Self {
        Self {
            boundary: vec![0.0; density.components()],
            density,
        }
    }

    pub fn zeros(grid: AgeGrid, components: usize) -> Self {
        Self::from_density(GridFunction::zeros(grid, components))
    }

    pub fn is_in_closed_domain(&self) -> bool {
        self.boundary.iter().all(|&v| v == 0.0)
    }

    /// Product norm `|x|_p + ||phi||_{L^p}`.
    pub fn norm(&self) -> f64 {
        self.density.grid().vec_norm(&self.boundary) + self.density.lp_norm()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            boundary: self.boundary.iter().map(|v| alpha * v).collect(),
            density: self.density.scale(alpha),
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.boundary.len(), other.boundary.len());
        for (a, b) in self.boundary.iter_mut().zip(&other.boundary) {
            *a += alpha * b;
        }
        self.density.axpy(alpha, &other.density);
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }
}

/// Discrete L^p norm.
pub fn lp_norm(f: &GridFunction) -> f64 {
    let p = f.grid.p;
    let acc: f64 = f.values.iter().map(|&v| pow_p(v, p)).sum();
    root_p(acc * f.grid.cell_width, p)
}

/// Component sum of a cell vector.
pub fn theta(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// Truncation `min(kappa, max(s, 0))`.
pub fn chi(s: f64, kappa: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= kappa {
        kappa
    } else {
        s
    }
}

/// Translation by `m` cells with zero inflow; mass past `a_max` is dropped.
pub fn shift_right(f: &GridFunction, m: usize) -> GridFunction {
    let n = f.components;
    let cells = f.grid.n_cells;
    let mut out = GridFunction::zeros(f.grid, n);
    if m < cells {
        out.values[m * n..].copy_from_slice(&f.values[..(cells - m) * n]);
    }
    out
}

/// Nearest point of `K = { w >= 0, sum(w) <= kappa }` to `v` in the l^p
/// norm, written into `out`; returns `|v - w|_p^p`.
///
/// Negative components go to zero. When the positive part still exceeds the
/// cap, the excess is removed by equal decrements capped at each component
/// (water filling), which minimises the sum of `d_c^p` for every `p >= 1`.
fn nearest_in_cell(v: &[f64], kappa: f64, p: f64, out: &mut [f64]) -> f64 {
    if v.len() == 1 {
        let w = chi(v[0], kappa);
        out[0] = w;
        return pow_p(v[0] - w, p);
    }
    let mut cost = 0.0;
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(v) {
        if x < 0.0 {
            cost += pow_p(x, p);
            *o = 0.0;
        } else {
            *o = x;
            total += x;
        }
    }
    if total <= kappa {
        return cost;
    }
    let mut sorted: Vec<f64> = out.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut excess = total - kappa;
    let mut level = 0.0;
    let len = sorted.len();
    for (j, &u) in sorted.iter().enumerate() {
        let remaining = (len - j) as f64;
        if u * remaining >= excess {
            level = excess / remaining;
            break;
        }
        excess -= u;
    }
    let mut capped = 0.0;
    for o in out.iter_mut() {
        let d = o.min(level);
        cost += pow_p(d, p);
        *o -= d;
        capped += *o;
    }
    if capped > kappa {
        let s = kappa / capped;
        for o in out.iter_mut() {
            *o *= s;
        }
    }
    cost
}

/// Cell-wise `|v - K|_p` (exact).
pub fn cell_dist_to_k(v: &[f64], kappa: f64, p: f64) -> f64 {
    let mut scratch = vec![0.0; v.len()];
    root_p(nearest_in_cell(v, kappa, p, &mut scratch), p)
}

/// L^p distance from `f` to the density band `C`.
pub fn dist_to_c(f: &GridFunction, kappa: f64) -> f64 {
    let p = f.grid.p;
    let mut scratch = vec![0.0; f.components];
    let acc: f64 = f
        .cells()
        .map(|cell| nearest_in_cell(cell, kappa, p, &mut scratch))
        .sum();
    root_p(acc * f.grid.cell_width, p)
}

/// Cell-wise nearest point of `C`: clamp negatives to zero, then cap the
/// component sum at `kappa`.
pub fn project_to_c(f: &GridFunction, kappa: f64) -> GridFunction {
    let p = f.grid.p;
    let mut out = GridFunction::zeros(f.grid, f.components);
    for i in 0..f.grid.n_cells {
        let n = f.components;
        nearest_in_cell(
            &f.values[i * n..(i + 1) * n],
            kappa,
            p,
            &mut out.values[i * n..(i + 1) * n],
        );
    }
    out
}

pub fn in_c(f: &GridFunction, kappa: f64, tol: f64) -> bool {
    dist_to_c(f, kappa) <= tol
}
