use rand::Rng;

use super::{fingerprint, BoundaryPolicy, SimError, MAX_EVENTS};
use crate::config::{Configuration, Event, EventKind, Trajectory};
use crate::lattice::Kernel;
use crate::noise::stream_rng;
use crate::rates::RateFn;

const GILLESPIE_STREAM: u64 = 0x6111_e5b1;

/// Next-event sampling from the total rate `sum_x g(eta(x))`. Same law as
/// [`super::simulate`], independent noise.
pub fn simulate_gillespie(
    initial: &Configuration,
    rate: &RateFn,
    kernel: &Kernel,
    policy: &BoundaryPolicy,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory, SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::BadHorizon(horizon));
    }
    if initial.dim() != kernel.dim() {
        return Err(SimError::Dimension(initial.dim(), kernel.dim()));
    }
    policy.check_initial(initial)?;
    let mut rng = stream_rng(seed, GILLESPIE_STREAM);
    let mut occ = initial.clone();
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut rates: Vec<(crate::lattice::Site, f64)> = Vec::new();
    loop {
        rates.clear();
        for (x, k) in occ.iter() {
            rates.push((x, rate.g(k as u64)?));
        }
        let total: f64 = rates.iter().map(|r| r.1).sum();
        if total <= 0.0 {
            break;
        }
        t += -(1.0 - rng.gen::<f64>()).ln() / total;
        if t > horizon {
            break;
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut src = rates[rates.len() - 1].0;
        for &(x, r) in &rates {
            acc += r;
            if target < acc {
                src = x;
                break;
            }
        }
        let (dst, kind) = policy.resolve(src.offset(kernel.sample_jump(rng.gen::<f64>())));
        occ.remove_one(src);
        if kind != EventKind::Kill {
            occ.add(dst, 1);
        }
        events.push(Event { time: t, src, dst, kind, marginal: 0 });
        if events.len() > MAX_EVENTS {
            return Err(SimError::EventLimit);
        }
    }
    Ok(Trajectory {
        initial: initial.clone(),
        events,
        final_config: occ,
        horizon,
        seed,
        fingerprint: fingerprint("gillespie", rate, &format!("{:?}", kernel.to_spec()), policy, horizon),
    })
}
