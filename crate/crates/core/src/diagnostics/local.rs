use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::config::Configuration;
use crate::lattice::Site;

type Eval = dyn Fn(&[u32]) -> f64 + Send + Sync;

/// Bounded function of the occupancies on a finite support `A`. The
/// evaluator receives `eta` restricted to `A`, in the order of `support()`.
#[derive(Clone)]
pub struct LocalFunction {
    name: String,
    support: Vec<Site>,
    bound: f64,
    eval: Arc<Eval>,
}

impl fmt::Debug for LocalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalFunction")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("bound", &self.bound)
            .finish()
    }
}

impl LocalFunction {
    /// `support` is sorted and deduplicated; `eval` sees values in that order.
    pub fn new(
        name: impl Into<String>,
        mut support: Vec<Site>,
        bound: f64,
        eval: impl Fn(&[u32]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        support.sort();
        support.dedup();
        LocalFunction { name: name.into(), support, bound, eval: Arc::new(eval) }
    }

    pub fn constant(c: f64) -> Self {
        LocalFunction::new(format!("const({c})"), Vec::new(), c.abs(), move |_| c)
    }

    /// `1{eta(x) = k}`.
    pub fn indicator(x: Site, k: u32) -> Self {
        LocalFunction::new(format!("1{{eta({x})={k}}}"), vec![x], 1.0, move |v| (v[0] == k) as u32 as f64)
    }

    /// `min(eta(x), m)`.
    pub fn min_occupancy(x: Site, m: u32) -> Self {
        LocalFunction::new(format!("min(eta({x}),{m})"), vec![x], m as f64, move |v| v[0].min(m) as f64)
    }

    /// Pointwise product; the bound is the product of bounds.
    pub fn product(factors: Vec<LocalFunction>) -> Self {
        let support: Vec<Site> = factors.iter().flat_map(|f| f.support.iter().copied()).collect();
        let mut sorted = support.clone();
        sorted.sort();
        sorted.dedup();
        let index: BTreeMap<Site, usize> = sorted.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let maps: Vec<Vec<usize>> = factors.iter().map(|f| f.support.iter().map(|x| index[x]).collect()).collect();
        let name = factors.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join("*");
        let bound = factors.iter().map(|f| f.bound).product();
        LocalFunction::new(name, sorted, bound, move |v| {
            let mut buf = Vec::new();
            factors.iter().zip(&maps).fold(1.0, |acc, (f, m)| {
                buf.clear();
                buf.extend(m.iter().map(|&i| v[i]));
                acc * (f.eval)(&buf)
            })
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> &[Site] {
        &self.support
    }

    /// Declared `sup |f|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn restrict(&self, c: &Configuration) -> Vec<u32> {
        self.support.iter().map(|&x| c.get(x)).collect()
    }

    pub fn eval_values(&self, v: &[u32]) -> f64 {
        (self.eval)(v)
    }

    pub fn eval(&self, c: &Configuration) -> f64 {
        (self.eval)(&self.restrict(c))
    }

    /// Index of `x` in the support.
    pub fn position(&self, x: Site) -> Option<usize> {
        self.support.binary_search(&x).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn builtins() -> Vec<LocalFunction> {
        let o = Site::d1(0);
        vec![
            LocalFunction::constant(2.5),
            LocalFunction::indicator(o, 0),
            LocalFunction::indicator(Site::d1(1), 2),
            LocalFunction::min_occupancy(o, 3),
            LocalFunction::product(vec![LocalFunction::min_occupancy(o, 2), LocalFunction::indicator(Site::d1(-1), 1)]),
        ]
    }

    #[test]
    fn builtin_values() {
        let c = Configuration::d1(&[(-1, 1), (0, 5)]);
        let v: Vec<f64> = builtins().iter().map(|f| f.eval(&c)).collect();
        assert_eq!(v, vec![2.5, 0.0, 0.0, 3.0, 2.0]);
        assert_eq!(builtins()[4].support(), &[Site::d1(-1), Site::d1(0)]);
        assert_eq!(builtins()[4].bound(), 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn depends_only_on_support_and_is_bounded(
            inside in prop::collection::vec(0u32..8, 3),
            outside in prop::collection::vec((2i64..20, 0u32..8), 0..6),
        ) {
            let base = Configuration::d1(&[(-1, inside[0]), (0, inside[1]), (1, inside[2])]);
            let mut noisy = base.clone();
            for (x, n) in outside {
                noisy.add(Site::d1(if x % 2 == 0 { x } else { -x }), n);
            }
            for f in builtins() {
                prop_assert_eq!(f.eval(&base), f.eval(&noisy));
                prop_assert!(f.eval(&noisy).abs() <= f.bound());
            }
        }
    }
}
