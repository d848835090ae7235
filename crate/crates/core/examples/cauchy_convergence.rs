//! Successive halvings of epsilon and the sup-distance between levels.

use age_invariance::model::{bump, ModelParams};
use age_invariance::scheme::{converge_run, SchemeConfig};

fn main() -> age_invariance::Result<()> {
    let params = ModelParams::reference();
    let x0 = bump(params.grid(), 1, 0.02, 0.5, 4.0);
    let conv = converge_run(&x0, &SchemeConfig::new(0.1, 1.0).with_seed(7), &params, 4)?;
    for (j, (eps, traj)) in conv.epsilons.iter().zip(&conv.trajectories).enumerate() {
        let next = conv.cauchy.get(j).map_or(String::new(), |c| format!("{c:.3e}"));
        println!("eps = {eps:<7} knots = {:<4} sup|u_j - u_(j+1)| = {next}", traj.run.knots.len());
    }
    Ok(())
}
