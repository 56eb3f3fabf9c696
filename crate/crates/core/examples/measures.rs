//! Invariant product measures for a few rate families: partition function,
//! density, and the fugacity identity `E[g(eta(0))] = phi`.

use std::error::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zrp::measures::canonical_torus_measure;
use zrp::{FugacityMeasure, RateFn, Torus};

fn main() -> Result<(), Box<dyn Error>> {
    let rates = [
        ("g(k) = k", RateFn::linear()),
        ("g(k) = k^2", RateFn::power(2.0)?),
        ("g(k) = e^{k/2}", RateFn::exponential(1.0, 0.5)?),
    ];
    println!("{:<16} {:>5} {:>12} {:>10} {:>10} {:>14}", "rate", "phi", "log Z", "density", "variance", "E[g] - phi");
    for (name, g) in &rates {
        for phi in [0.5, 1.0, 4.0] {
            let m = FugacityMeasure::new(g, phi)?;
            println!(
                "{name:<16} {phi:>5} {:>12.6} {:>10.5} {:>10.5} {:>14.2e}",
                m.partition().log_z,
                m.density(),
                m.variance(),
                m.fugacity_identity() - phi
            );
        }
    }

    let m = FugacityMeasure::new(&RateFn::power(2.0)?, 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = m.sample_box_config(20, 1, &mut rng);
    println!("\nmu_2 sample on [-20, 20] (g = k^2): {} particles, expected {:.2}", c.total(), 41.0 * m.density());

    let canon = canonical_torus_measure(&RateFn::power(2.0)?, Torus::with_side(3, 1), 3)?;
    println!("canonical measure, 3 particles on 3 sites: {} states", canon.probs.len());
    for (occ, p) in canon.states.iter().zip(&canon.probs) {
        println!("  {occ:?}  {p:.4}");
    }
    Ok(())
}
