//! Hitting curves of the rate-1 walk and the arrival bound `m-bar`, then the
//! exponential-moment check on a simulated system.

use std::error::Error;

use zrp::hitting::{enumerate_particles, estimate_f, exact_f_small, exp_moment_check, mbar, MbarOptions, TailMethod};
use zrp::{Configuration, Kernel, RateFn, Site};

fn main() -> Result<(), Box<dyn Error>> {
    let kernel = Kernel::nearest_neighbour(0.5)?;
    let z = Site::d1(3);
    let curve = estimate_f(&kernel, z, &[1.0, 2.0, 4.0, 8.0], 50_000, 1)?;
    println!("{:>5} {:>8} {:>17} {:>21}", "t", "MC F", "Wilson interval", "exact bracket");
    for p in &curve.points {
        let b = exact_f_small(&kernel, z, p.t, 30)?;
        println!("{:>5} {:>8.4} [{:.4}, {:.4}] [{:.6}, {:.6}]", p.t, p.f, p.ci_low, p.ci_high, b.lower, b.upper);
    }

    let rate = RateFn::power(2.0)?;
    let eta = Configuration::d1(&[(-6, 2), (-1, 1), (0, 1), (2, 3), (9, 1)]);
    let en = enumerate_particles(&eta, Site::ORIGIN);
    println!("\nparticles by distance to 0: {:?}", en.distances);
    let opts = MbarOptions { cutoff: 4, tail: TailMethod::ExpSum, ..MbarOptions::default() };
    let m = mbar(&eta, Site::ORIGIN, 0.5, &rate, &kernel, &opts)?;
    println!("m-bar(0.5): partial {:.4} + tail {:.2e} = {:.4} {:?}", m.partial, m.tail, m.total, m.flags);

    let eta = Configuration::d1(&[(-4, 1), (3, 2), (6, 1)]);
    let r = exp_moment_check(&eta, Site::ORIGIN, &rate, &kernel, 0.5, 1.0, 4000, 5, 5, &MbarOptions::default())?;
    println!("\nexp moment, theta = 0.5, T = 1: bound {:.4}", r.bound);
    for p in &r.points {
        println!("  {p:?}");
    }
    println!("pass: {}", r.pass);
    Ok(())
}
