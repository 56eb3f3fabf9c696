//! Simulate one trajectory with the graphical construction, write its event
//! log, and check that replaying the log reproduces the final state.

use std::error::Error;
use std::io;

use zrp::engine::{simulate, simulate_gillespie};
use zrp::{BoundaryPolicy, Configuration, HarrisNoise, Kernel, RateFn};

fn main() -> Result<(), Box<dyn Error>> {
    let eta0 = Configuration::d1(&[(-2, 3), (0, 5), (3, 1)]);
    let rate = RateFn::power(2.0)?;
    let kernel = Kernel::nearest_neighbour(0.6)?;
    let noise = HarrisNoise::new(42);

    let traj = simulate(&eta0, &rate, &kernel, &BoundaryPolicy::Open, 1.0, &noise)?;
    println!("{} jumps by T = 1, fingerprint {}", traj.events.len(), traj.fingerprint);
    println!("final: {:?}", traj.final_config.iter().map(|(x, n)| (x.0[0], n)).collect::<Vec<_>>());
    assert_eq!(traj.replay()?, traj.final_config);

    // Same noise, same path.
    let again = simulate(&eta0, &rate, &kernel, &BoundaryPolicy::Open, 1.0, &noise)?;
    assert_eq!(again.fingerprint, traj.fingerprint);

    // Killed outside [-3, 3], run to T = 4.
    let killed = simulate(&eta0, &rate, &kernel, &BoundaryPolicy::Killed { n: 3 }, 4.0, &noise)?;
    println!("killed at |x| > 3: {} particles left, {} removed", killed.final_config.total(), killed.kill_count());

    let g = simulate_gillespie(&eta0, &rate, &kernel, &BoundaryPolicy::Open, 1.0, 42)?;
    println!("gillespie: {} jumps\n", g.events.len());

    println!("first events:");
    let head = zrp::Trajectory { events: traj.events.iter().take(8).cloned().collect(), ..traj.clone() };
    head.write_csv(io::stdout())?;
    Ok(())
}
