//! The translation semigroup, the integrated semigroup, and their exact
//! algebraic identities on grid-aligned times.

use age_invariance::grid::{AgeGrid, GridFunction};
use age_invariance::semigroup::TranslationSemigroup;

fn main() -> age_invariance::Result<()> {
    let grid = AgeGrid::with_horizon(0.1, 3.0, 2.0)?;
    let sg = TranslationSemigroup::new(grid, 0.4);
    let phi = GridFunction::from_fn(grid, |a| (3.0 * a).sin());

    // Transport by 0.5 then 0.7 equals transport by 1.2.
    let two_steps = sg.apply_t0(&sg.apply_t0(&phi, 0.5)?, 0.7)?;
    println!("|T(0.7)T(0.5) - T(1.2)| = {:e}", two_steps.distance(&sg.apply_t0(&phi, 1.2)?));

    // S(s + h) - S(s) = T(s) S(h) for a boundary value and a density.
    let x = [0.3];
    let (s, h) = (0.8, 0.6);
    let lhs = sg.apply_s(&x, &phi, s + h)?.sub(&sg.apply_s(&x, &phi, s)?);
    let rhs = sg.apply_t0(&sg.apply_s(&x, &phi, h)?, s)?;
    println!("translation identity defect = {:e}", lhs.distance(&rhs));

    // A constant density integrates along the age axis.
    let unit = TranslationSemigroup::unperturbed(grid);
    let ramp = unit.apply_s(&[0.0], &GridFunction::constant(grid, &[1.0]), 0.3)?;
    println!("S(0.3)(0, 1) on the first cells: {:?}", &ramp.values()[..5]);
    Ok(())
}
