//! Convolution of the integrated semigroup with step forcings: telescoping
//! evaluation, the brute-force Riemann quotient, the cocycle identity and the
//! semi-variation bound.

use age_invariance::convolution::{cocycle_check, s_diamond_bound_check, s_diamond_riemann, s_diamond_step};
use age_invariance::grid::AgeGrid;
use age_invariance::probes::random_step_forcing;
use age_invariance::semigroup::{DeltaTable, TranslationSemigroup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> age_invariance::Result<()> {
    let grid = AgeGrid::with_horizon(0.02, 4.0, 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let forcing = random_step_forcing(&grid, 1, 0, 50, 3, &mut rng);
    println!("breakpoints (cells): {:?}", forcing.breakpoints());

    let t = forcing.end();
    let exact = s_diamond_step(&forcing, t)?;
    let brute = s_diamond_riemann(&forcing, t)?;
    println!("|telescoping - Riemann quotient| = {:e}", exact.distance(&brute));
    println!("cocycle defect at (0.3, 0.4)      = {:e}", cocycle_check(&forcing, 0.3, 0.4)?);

    let delta = DeltaTable::build(&TranslationSemigroup::unperturbed(grid), 1.0, 1, 8, 2)?;
    let check = s_diamond_bound_check(&forcing, t, &delta)?;
    println!("||conv|| = {:.5} <= delta * sup||f|| = {:.5}: {}", check.lhs, check.rhs, check.holds);
    Ok(())
}
