//! Seeded random states and forcings used by estimators, checks and tests.

use rand::Rng;
use std::f64::consts::PI;

use crate::convolution::StepForcing;
use crate::grid::{theta, AgeGrid, GridFunction, StatePair};

/// A vector of `K = { v >= 0, sum(v) <= kappa }`, hitting the faces
/// `sum = 0` and `sum = kappa` with positive probability.
pub fn random_cell_in_k<R: Rng + ?Sized>(rng: &mut R, components: usize, kappa: f64) -> Vec<f64> {
    let total = match rng.gen_range(0..8) {
        0 => 0.0,
        1 => kappa,
        _ => rng.gen_range(0.0..kappa),
    };
    let weights: Vec<f64> = (0..components).map(|_| rng.gen_range(0.0..1.0)).collect();
    let sum: f64 = weights.iter().sum();
    if sum == 0.0 {
        let mut v = vec![0.0; components];
        v[0] = total;
        return v;
    }
    let mut v: Vec<f64> = weights.iter().map(|w| total * w / sum).collect();
    while theta(&v) > kappa {
        for x in &mut v {
            *x *= 1.0 - f64::EPSILON;
        }
    }
    v
}

/// Cell-wise independent element of `C`.
pub fn random_rough_in_c<R: Rng + ?Sized>(grid: &AgeGrid, components: usize, kappa: f64, rng: &mut R) -> GridFunction {
    let mut f = GridFunction::zeros(*grid, components);
    for i in 0..grid.n_cells() {
        let cell = random_cell_in_k(rng, components, kappa);
        f.cell_mut(i).copy_from_slice(&cell);
    }
    f
}

/// Smooth element of `C`: `kappa * A * sin+(w a + theta)^2`, split over the
/// components with random fixed weights. Between humps the profile is zero
/// on whole intervals.
pub fn random_smooth_in_c<R: Rng + ?Sized>(grid: &AgeGrid, components: usize, kappa: f64, rng: &mut R) -> GridFunction {
    let amplitude = rng.gen_range(0.2..1.0);
    let freq = rng.gen_range(1.0..4.0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let weights: Vec<f64> = (0..components).map(|_| rng.gen_range(0.1..1.0)).collect();
    let sum: f64 = weights.iter().sum();
    GridFunction::from_fn_vec(*grid, components, |a, out| {
        let s = (freq * a + phase).sin().max(0.0);
        let level = kappa * amplitude * s * s;
        for (o, w) in out.iter_mut().zip(&weights) {
            *o = level * w / sum;
        }
    })
}

/// Signed density mixing a few random waves with per-cell noise.
pub fn random_density<R: Rng + ?Sized>(grid: &AgeGrid, components: usize, rng: &mut R) -> GridFunction {
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..6.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let noise = rng.gen_range(0.0..0.5);
    let mut f = GridFunction::zeros(*grid, components);
    for i in 0..grid.n_cells() {
        let a = grid.center(i);
        for (c, v) in f.cell_mut(i).iter_mut().enumerate() {
            let smooth: f64 = waves
                .iter()
                .map(|(amp, w, ph)| amp * (w * a + ph + c as f64).sin())
                .sum();
            *v = smooth + noise * rng.gen_range(-1.0..1.0);
        }
    }
    f
}

/// Independent per-cell direction with unit norm.
pub fn random_direction<R: Rng + ?Sized>(grid: &AgeGrid, components: usize, rng: &mut R) -> GridFunction {
    loop {
        let values = (0..grid.n_cells() * components)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let f = GridFunction::from_values(*grid, components, values).expect("shape is consistent");
        let norm = f.lp_norm();
        if norm > 0.0 {
            return f.scale(1.0 / norm);
        }
    }
}

/// Random `(x, phi)`; about a third of the draws are pure boundary impulses
/// and a third are pure densities.
pub fn random_state_pair<R: Rng + ?Sized>(grid: &AgeGrid, components: usize, rng: &mut R) -> StatePair {
    let kind = rng.gen_range(0..3);
    let boundary = if kind == 2 {
        vec![0.0; components]
    } else {
        (0..components).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let density = if kind == 0 {
        GridFunction::zeros(*grid, components)
    } else {
        random_density(grid, components, rng)
    };
    StatePair { boundary, density }
}

/// Random step forcing on `[start, end]` (in cells) with at most
/// `max_pieces` pieces, scaled so its sup norm is 1.
pub fn random_step_forcing<R: Rng + ?Sized>(
    grid: &AgeGrid,
    components: usize,
    start: usize,
    end: usize,
    max_pieces: usize,
    rng: &mut R,
) -> StepForcing {
    assert!(end > start, "forcing interval must be non-empty");
    let span = end - start;
    let pieces = rng.gen_range(1..=max_pieces.max(1)).min(span);
    let mut cuts: Vec<usize> = (0..pieces - 1).map(|_| start + rng.gen_range(1..span)).collect();
    cuts.push(start);
    cuts.push(end);
    cuts.sort_unstable();
    cuts.dedup();
    let values: Vec<StatePair> = (0..cuts.len() - 1)
        .map(|_| random_state_pair(grid, components, rng))
        .collect();
    let sup = values.iter().map(StatePair::norm).fold(0.0, f64::max);
    let values = if sup > 0.0 {
        values.iter().map(|v| v.scale(1.0 / sup)).collect()
    } else {
        values
    };
    StepForcing::from_steps(*grid, cuts, values).expect("cuts are ascending and grid-aligned")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::dist_to_c;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_states_lie_in_c() {
        let g = AgeGrid::new(0.05, 200, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..4 {
            for _ in 0..20 {
                assert_eq!(dist_to_c(&random_rough_in_c(&g, n, 1.5, &mut rng), 1.5), 0.0);
                let smooth = random_smooth_in_c(&g, n, 1.5, &mut rng);
                assert!(dist_to_c(&smooth, 1.5) <= 1e-15);
                assert!(smooth.cells().any(|c| theta(c) == 0.0));
            }
        }
    }

    #[test]
    fn step_forcing_has_unit_sup() {
        let g = AgeGrid::new(0.1, 30, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let f = random_step_forcing(&g, 2, 3, 17, 5, &mut rng);
            assert_eq!(f.start_steps(), 3);
            assert_eq!(f.end_steps(), 17);
            assert!((f.sup_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn directions_are_unit() {
        let g = AgeGrid::new(0.1, 30, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!((random_direction(&g, 2, &mut rng).lp_norm() - 1.0).abs() < 1e-12);
    }
}
