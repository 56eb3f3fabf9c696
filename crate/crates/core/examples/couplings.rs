//! Shared-noise couplings: truncations of an infinite configuration stay
//! ordered, and the nearest-neighbour `(p, q)` family is sandwiched between
//! the totally asymmetric runs.

use std::error::Error;

use zrp::config::ConfigRule;
use zrp::engine::{simulate_pq_family, simulate_truncation_schedule, Labelling};
use zrp::{Configuration, Kernel, RateFn};

fn main() -> Result<(), Box<dyn Error>> {
    let rate = RateFn::power(2.0)?;
    let kernel = Kernel::nearest_neighbour(0.5)?;

    let rule = ConfigRule::Constant { d: 1, density: 2 };
    let run = simulate_truncation_schedule(&rule, &[4, 8, 16, 32], &rate, &kernel, 1.0, 7, 20)?;
    let r = &run.report;
    // An ordering violation would have come back as SimError::CouplingViolation.
    println!("truncations {:?}: {} ordered comparisons", r.levels, r.comparisons);
    println!("{} of {} window sites stable across the last two levels", r.stabilized_sites.len(), r.window_sites);
    for (n, t) in r.levels.iter().zip(&run.trajectories) {
        println!("  n = {n:>2}: eta_T(0) = {}, {} jumps", t.final_config.get(zrp::Site::ORIGIN), t.events.len());
    }

    let eta0 = Configuration::d1(&[(-2, 1), (0, 2), (1, 1)]);
    let pq = [(0.7, 0.3), (0.5, 0.5), (0.2, 0.8)];
    for labelling in [Labelling::Positional, Labelling::Distance] {
        let mut order = 0;
        let mut reach = 0;
        for seed in 0..200 {
            let fam = simulate_pq_family(&eta0, &RateFn::linear(), 2.0, seed, &pq, Some(labelling))?;
            let s = fam.sandwich.expect("labelling requested");
            order += s.violations.len();
            reach += s.reach_violations;
        }
        println!("{labelling:?} labels, 200 runs: {order} order violations, {reach} reach-count violations");
    }
    Ok(())
}
