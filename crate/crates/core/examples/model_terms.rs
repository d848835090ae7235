//! Birth and death terms of the crowding model, the split of the one-step
//! map, and the certificate quantities that make the Euler part invariant.

use age_invariance::grid::dist_to_c;
use age_invariance::model::{
    check_beta_condition, crowding_extremal, f0, h0_bound, subtangency_defect, vhat1, vhat2, ModelParams,
};
use age_invariance::probes::random_smooth_in_c;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> age_invariance::Result<()> {
    let params = ModelParams::reference();
    let beta = check_beta_condition(&params);
    println!("integral of beta = {} (bound {}) -> {}", beta.integral, beta.bound, beta.holds);
    println!("h0 = {}", h0_bound(&params)?);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = random_smooth_in_c(params.grid(), 1, params.kappa(), &mut rng);
    println!("births F0(phi) = {:?}", f0(&phi, &params));
    println!("{:>6} {:>14} {:>14}", "h", "||vhat2||/h", "defect");
    for h in [0.08, 0.04, 0.02, 0.01] {
        let ratio = vhat2(&phi, h, &params)?.lp_norm() / h;
        println!("{h:>6} {ratio:>14.6e} {:>14.6e}", subtangency_defect(&phi, h, &params)?);
    }

    // Births of the crowding extremal state overflow the cap once beta is too large.
    let heavy = params.with_beta_scaled(8.0 / 3.0)?;
    let spill = vhat1(&crowding_extremal(&heavy), 0.01, &heavy)?;
    println!(
        "beta x 8/3: condition {}, Euler defect {:e}",
        check_beta_condition(&heavy).holds,
        dist_to_c(&spill, heavy.kappa())
    );
    Ok(())
}
