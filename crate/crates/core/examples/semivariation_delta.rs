//! Empirical growth bound delta(t) of the integrated semigroup.

use age_invariance::grid::AgeGrid;
use age_invariance::semigroup::{DeltaTable, TranslationSemigroup};

fn main() -> age_invariance::Result<()> {
    let grid = AgeGrid::with_horizon(0.01, 10.0, 2.0)?;
    let table = DeltaTable::build(&TranslationSemigroup::unperturbed(grid), 2.0, 1, 8, 42)?;
    println!("{:>6} {:>10} {:>10}", "t", "delta(t)", "sqrt(t)");
    for t in [0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0] {
        let d = table.at(t).expect("inside the table");
        println!("{t:>6} {d:>10.5} {:>10.5}", f64::sqrt(t));
    }
    Ok(())
}
