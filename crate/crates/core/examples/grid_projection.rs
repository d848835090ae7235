//! Grid functions, the L^p norm, and the nearest point of the invariant set.

use age_invariance::grid::{dist_to_c, project_to_c, theta, AgeGrid, GridFunction};

fn main() -> age_invariance::Result<()> {
    let grid = AgeGrid::with_horizon(0.05, 4.0, 2.0)?;
    let kappa = 1.0;

    // Two species whose total overshoots kappa near a = 2 and dips negative late.
    let phi = GridFunction::from_fn_vec(grid, 2, |a, out| {
        out[0] = 0.8 * (-(a - 2.0).powi(2)).exp();
        out[1] = 0.6 * (-(a - 2.0).powi(2)).exp() - 0.1 * (a > 3.5) as u8 as f64;
    });
    println!("||phi||_2          = {:.6}", phi.lp_norm());
    println!("max Theta(phi(a))  = {:.6}", phi.cells().map(theta).fold(f64::MIN, f64::max));
    println!("dist(phi, C)       = {:.6}", dist_to_c(&phi, kappa));

    let p = project_to_c(&phi, kappa);
    println!("||P phi - phi||_2  = {:.6}", p.distance(&phi));
    println!("dist(P phi, C)     = {:e}", dist_to_c(&p, kappa));
    println!("max Theta(P phi)   = {:.6}", p.cells().map(theta).fold(f64::MIN, f64::max));
    Ok(())
}
