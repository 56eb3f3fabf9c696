use std::collections::BTreeSet;

use super::LocalFunction;
use crate::config::{Configuration, EventKind};
use crate::engine::BoundaryPolicy;
use crate::lattice::{Kernel, Site};
use crate::rates::{RateError, RateFn};

/// `Lf(eta) = sum_{x,y} g(eta(x)) p(x,y) (f(eta^{x,y}) - f(eta))` with the
/// target transformed by a boundary policy (wrapped on a torus, removed when
/// killed).
#[derive(Clone, Debug)]
pub struct Generator<'a> {
    pub rate: &'a RateFn,
    pub kernel: &'a Kernel,
    pub policy: BoundaryPolicy,
}

impl<'a> Generator<'a> {
    pub fn new(rate: &'a RateFn, kernel: &'a Kernel, policy: BoundaryPolicy) -> Self {
        Generator { rate, kernel, policy }
    }

    /// `A-bar`: the sites whose departures can change `f`, i.e. `A` and every
    /// site with a jump into `A`.
    pub fn sources(&self, f: &LocalFunction) -> BTreeSet<Site> {
        let mut out: BTreeSet<Site> = f.support().iter().copied().collect();
        for &a in f.support() {
            for (z, _) in self.kernel.support() {
                let x = a.offset(z.neg());
                out.insert(match self.policy {
                    BoundaryPolicy::Periodic { torus } => torus.wrap(x),
                    _ => x,
                });
            }
        }
        out
    }

    /// Exact `Lf(eta)`, summing only over sources in `A-bar`.
    pub fn apply(&self, f: &LocalFunction, eta: &Configuration) -> Result<f64, RateError> {
        let sources = self.sources(f);
        self.apply_over(f, eta, sources.iter().copied())
    }

    /// `Lf(eta)` restricted to departures from `sources`.
    pub fn apply_over(
        &self,
        f: &LocalFunction,
        eta: &Configuration,
        sources: impl IntoIterator<Item = Site>,
    ) -> Result<f64, RateError> {
        let base = f.restrict(eta);
        let f0 = f.eval_values(&base);
        let mut buf = base.clone();
        let mut total = 0.0;
        for x in sources {
            let k = eta.get(x);
            if k == 0 {
                continue;
            }
            let gx = self.rate.g(k as u64)?;
            let ix = f.position(x);
            let mut acc = 0.0;
            for (z, p) in self.kernel.support() {
                let (dst, kind) = self.policy.resolve(x.offset(z));
                let iy = if kind == EventKind::Kill { None } else { f.position(dst) };
                if ix.is_none() && iy.is_none() {
                    continue;
                }
                buf.copy_from_slice(&base);
                if let Some(i) = ix {
                    buf[i] -= 1;
                }
                if let Some(i) = iy {
                    buf[i] += 1;
                }
                acc += p * (f.eval_values(&buf) - f0);
            }
            total += gx * acc;
        }
        Ok(total)
    }
}

/// `Lf(eta)` on the open lattice.
pub fn generator_apply(f: &LocalFunction, eta: &Configuration, rate: &RateFn, kernel: &Kernel) -> Result<f64, RateError> {
    Generator::new(rate, kernel, BoundaryPolicy::Open).apply(f, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Torus;
    use proptest::prelude::*;

    fn nn(p: f64) -> Kernel {
        Kernel::nearest_neighbour(p).unwrap()
    }

    /// Every ordered pair (x, x+z) with x in the bounding box of eta and A.
    fn brute_force(f: &LocalFunction, eta: &Configuration, rate: &RateFn, kernel: &Kernel, policy: BoundaryPolicy) -> f64 {
        let mut sites: BTreeSet<Site> = eta.iter().map(|(x, _)| x).collect();
        sites.extend(f.support().iter().copied());
        let f0 = f.eval(eta);
        let mut total = 0.0;
        for x in sites {
            let k = eta.get(x);
            if k == 0 {
                continue;
            }
            for (z, p) in kernel.support() {
                let (dst, kind) = policy.resolve(x.offset(z));
                let next = if kind == EventKind::Kill { eta.removed(x) } else { eta.moved(x, dst) };
                total += rate.g(k as u64).unwrap() * p * (f.eval(&next) - f0);
            }
        }
        total
    }

    #[test]
    fn constant_is_annihilated() {
        let eta = Configuration::d1(&[(0, 3), (2, 1)]);
        let v = generator_apply(&LocalFunction::constant(4.0), &eta, &RateFn::power(2.0).unwrap(), &nn(0.3)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn single_particle_leaves_origin() {
        let f = LocalFunction::min_occupancy(Site::d1(0), 1);
        let v = generator_apply(&f, &Configuration::d1(&[(0, 1)]), &RateFn::linear(), &nn(1.0)).unwrap();
        assert_eq!(v, -1.0);
    }

    #[test]
    fn arrival_from_the_left() {
        // Only pair (-1, 0) contributes: g(1) p (f(eta^{-1,0}) - f(eta)) = 1 * 1 * (0 - 1).
        let f = LocalFunction::indicator(Site::d1(0), 0);
        let v = generator_apply(&f, &Configuration::d1(&[(-1, 1)]), &RateFn::linear(), &nn(1.0)).unwrap();
        assert_eq!(v, -1.0);
    }

    #[test]
    fn policies_change_boundary_terms() {
        let f = LocalFunction::min_occupancy(Site::d1(-1), 5);
        let eta = Configuration::d1(&[(1, 2)]);
        let rate = RateFn::linear();
        let torus = Torus::centered(1, 1);
        let k = nn(0.75);
        // On the 3-torus a right jump from 1 lands on -1.
        let g = Generator::new(&rate, &k, BoundaryPolicy::Periodic { torus });
        assert!((g.apply(&f, &eta).unwrap() - 2.0 * 0.75).abs() < 1e-15);
        let g = Generator::new(&rate, &k, BoundaryPolicy::Killed { n: 1 });
        assert_eq!(g.apply(&f, &eta).unwrap(), 0.0);
        let f1 = LocalFunction::min_occupancy(Site::d1(1), 5);
        assert!((g.apply(&f1, &eta).unwrap() + 2.0).abs() < 1e-15);
    }

    fn config() -> impl Strategy<Value = Configuration> {
        prop::collection::vec((-3i64..=3, 1u32..=4), 0..5).prop_map(|v| Configuration::d1(&v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_brute_force(
            eta in config(),
            p in 0.0f64..=1.0,
            which in 0usize..4,
            policy_tag in 0usize..3,
            a in prop::sample::select(vec![1.0, 2.0]),
        ) {
            let o = Site::d1(0);
            let f = match which {
                0 => LocalFunction::indicator(o, 0),
                1 => LocalFunction::min_occupancy(Site::d1(1), 2),
                2 => LocalFunction::product(vec![LocalFunction::min_occupancy(o, 3), LocalFunction::indicator(Site::d1(-1), 1)]),
                _ => LocalFunction::constant(1.0),
            };
            let policy = match policy_tag {
                0 => BoundaryPolicy::Open,
                1 => BoundaryPolicy::Killed { n: 3 },
                _ => BoundaryPolicy::periodic(3, 1),
            };
            let rate = RateFn::power(a).unwrap();
            let kernel = Kernel::new(1, &[(vec![1], p * 0.8), (vec![-1], (1.0 - p) * 0.8), (vec![2], 0.2)]).unwrap();
            let fast = Generator::new(&rate, &kernel, policy).apply(&f, &eta).unwrap();
            let slow = brute_force(&f, &eta, &rate, &kernel, policy);
            prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()), "{fast} vs {slow}");
        }
    }
}
