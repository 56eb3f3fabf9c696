//! Rate functions, the increment envelope `h`, and the growth heuristics.

use std::error::Error;

use zrp::{Kernel, RateFn};

fn main() -> Result<(), Box<dyn Error>> {
    let kernel = Kernel::nearest_neighbour(0.5)?;
    let rates = [
        ("k", RateFn::linear()),
        ("k^1.5", RateFn::power(1.5)?),
        ("k^2", RateFn::power(2.0)?),
        ("e^{k/2}", RateFn::exponential(1.0, 0.5)?),
    ];
    for (name, g) in &rates {
        let gs: Vec<f64> = (0..6).map(|k| g.g(k)).collect::<Result<_, _>>()?;
        let hs: Vec<f64> = (1..6).map(|n| g.h(n)).collect::<Result<_, _>>()?;
        let c = g.check_corollary_conditions(&kernel, 100_000, 50)?;
        println!("g(k) = {name}");
        println!("  g(0..6) = {gs:?}");
        println!("  h(1..6) = {hs:.3?}");
        println!(
            "  fitted exponent {:.3}, condition a: {}, condition b: {}, exp bound (c=1, theta=1): {}",
            c.a_estimate,
            c.condition_a,
            c.condition_b,
            g.check_exponential_bound(1.0, 1.0, 1000)
        );
    }
    Ok(())
}
