//! Dynkin martingale `f(eta_t) - f(eta_0) - int_0^t Lf(eta_s) ds` for a local
//! function; its replica mean should be zero within a few standard errors.

use std::error::Error;

use zrp::diagnostics::{generator_apply, martingale_residual, LocalFunction, Start};
use zrp::{BoundaryPolicy, Configuration, Kernel, RateFn, Site};

fn main() -> Result<(), Box<dyn Error>> {
    let rate = RateFn::power(2.0)?;
    let kernel = Kernel::nearest_neighbour(0.7)?;
    let eta0 = Configuration::d1(&[(-1, 2), (0, 3), (2, 1)]);

    let f = LocalFunction::product(vec![
        LocalFunction::min_occupancy(Site::d1(0), 2),
        LocalFunction::indicator(Site::d1(1), 0),
    ]);
    println!("Lf(eta_0) = {}", generator_apply(&f, &eta0, &rate, &kernel)?);

    let r = martingale_residual(&f, &Start::Fixed(eta0), &rate, &kernel, BoundaryPolicy::Open, 1.0, 20000, 9, 10)?;
    println!("{}: mean residual {:.5} +- {:.5} (z = {:.2})", r.function, r.mean, r.se, r.z);
    println!("E f(eta_T) = {:.4}, E int Lf = {:.4}", r.mean_f_final, r.mean_integral);
    println!("{:>6} {:>10} {:>10}", "t", "mean", "se");
    for (t, m, se) in &r.curve {
        println!("{t:>6.2} {m:>10.5} {se:>10.5}");
    }
    Ok(())
}
