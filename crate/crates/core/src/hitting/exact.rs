use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use super::curve::check_site;
use super::HittingError;
use crate::lattice::{Kernel, Site};

/// Mass below which the live part of the box chain is treated as exhausted.
const LIVE_EPS: f64 = 1e-18;
/// Poisson tail at which uniformization stops.
const TAIL_EPS: f64 = 1e-18;

/// Largest box radius accepted by [`exact_f_small`] in dimension `d`.
pub fn max_radius(d: usize) -> Option<i64> {
    match d {
        1 => Some(30),
        2 => Some(8),
        _ => None,
    }
}

/// `[lower, upper]` enclosing `F_z(t)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub radius: i64,
    /// Jump-chain steps taken.
    pub steps: usize,
}

impl Bracket {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Transient solve for the walk from `z`, absorbed at the origin and killed on
/// leaving `[-radius, radius]^d`.
///
/// The rate-1 walk is its own uniformization: after `N_t ~ Poisson(t)` jumps of
/// the kernel chain, `F_z(t) = sum_n P(N_t = n) P(hit within n jumps)`. The
/// lower end counts only paths absorbed before leaving the box; the upper end
/// adds every path that left the box and the unprocessed Poisson tail.
pub fn exact_f_small(kernel: &Kernel, z: Site, t: f64, radius: i64) -> Result<Bracket, HittingError> {
    check_site(kernel, z)?;
    let d = kernel.dim();
    let max = max_radius(d).ok_or(HittingError::Dimension(d))?;
    if radius > max || radius < 1 {
        return Err(HittingError::BoxTooLarge { d, radius, max });
    }
    if !t.is_finite() || t < 0.0 {
        return Err(HittingError::Invalid(format!("time must be finite and non-negative, got {t}")));
    }
    if z.norm_max() > radius {
        return Err(HittingError::OutsideBox(z.join(d), radius));
    }
    if z == Site::ORIGIN {
        return Ok(Bracket { lower: 1.0, upper: 1.0, radius, steps: 0 });
    }

    let side = (2 * radius + 1) as usize;
    let states = side.pow(d as u32);
    let index = |x: Site| -> Option<usize> {
        let mut i = 0;
        for &c in x.coords(d).iter().rev() {
            if c.abs() > radius {
                return None;
            }
            i = i * side + (c + radius) as usize;
        }
        Some(i)
    };
    let support: Vec<(Site, f64)> = kernel.support().collect();
    let sites: Vec<Site> = (0..states)
        .map(|mut i| {
            let mut c = [0i64; 4];
            for slot in c.iter_mut().take(d) {
                *slot = (i % side) as i64 - radius;
                i /= side;
            }
            Site(c)
        })
        .collect();
    let origin = index(Site::ORIGIN).expect("origin in box");

    let mut live = vec![0.0; states];
    live[index(z).expect("checked above")] = 1.0;
    let mut next = vec![0.0; states];
    let (mut absorbed, mut escaped, mut live_mass) = (0.0, 0.0, 1.0);
    let (mut lower, mut upper) = (0.0, 0.0);
    let ln_t = t.ln();
    let mut log_w = -t;
    let mut n = 0usize;
    loop {
        let w = log_w.exp();
        lower += w * absorbed;
        upper += w * (absorbed + escaped);
        let exhausted = live_mass < LIVE_EPS;
        if exhausted || n as f64 > t {
            // P(N_t > n)
            let rest = if t == 0.0 { 0.0 } else { gamma_lr(n as f64 + 1.0, t) };
            if exhausted || rest < TAIL_EPS {
                lower += rest * absorbed;
                upper += rest * (absorbed + escaped + live_mass);
                return Ok(Bracket { lower, upper: upper.min(1.0), radius, steps: n });
            }
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &m) in live.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(dz, p) in &support {
                match index(sites[i].offset(dz)) {
                    Some(j) if j == origin => absorbed += m * p,
                    Some(j) => next[j] += m * p,
                    None => escaped += m * p,
                }
            }
        }
        std::mem::swap(&mut live, &mut next);
        live_mass = live.iter().sum();
        n += 1;
        log_w += ln_t - (n as f64).ln();
    }
}
