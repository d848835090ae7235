//! Picard iteration on the variation-of-constants formula against the
//! method of characteristics, and both against the knot scheme.

use age_invariance::model::{bump, ModelParams};
use age_invariance::oracles::{characteristics_solve, picard_solve, sup_gap};
use age_invariance::scheme::{simulate, SchemeConfig};

fn main() -> age_invariance::Result<()> {
    let params = ModelParams::reference();
    let x0 = bump(params.grid(), 1, 0.02, 0.5, 4.0);
    let picard = picard_solve(&x0, 1.0, 50, &params)?;
    println!(
        "picard: {} windows, Lambda * delta(window) = {:.3}, worst ratio = {:.3}",
        picard.windows.len(),
        picard.contraction_bound(),
        picard.worst_ratio()
    );
    let chars = characteristics_solve(&x0, 1.0, &params)?;
    println!("sup |picard - characteristics| = {:e}", sup_gap(&picard.samples, &chars));

    let traj = simulate(&x0, &SchemeConfig::new(0.0125, 1.0), &params)?;
    let scheme: Vec<_> = traj.samples.iter().map(|s| (s.t, s.u.clone())).collect();
    println!("sup |scheme - picard| = {:e}", sup_gap(&scheme, &picard.samples));
    Ok(())
}
