//! Stationarity of the product measures: exact global balance of the
//! canonical measure on a small torus, then a chi-square test of `eta_T(0)`
//! after running from `mu_phi` on a larger one.

use std::error::Error;
use std::sync::Arc;

use zrp::diagnostics::{stationarity_exact, stationarity_statistical, Reference, Start};
use zrp::measures::TorusProductSampler;
use zrp::{FugacityMeasure, Kernel, RateFn, Torus};

fn main() -> Result<(), Box<dyn Error>> {
    let rate = RateFn::power(2.0)?;
    let kernel = Kernel::nearest_neighbour(0.7)?;

    for (side, n) in [(3, 4), (4, 5), (5, 6)] {
        let r = stationarity_exact(&rate, &kernel, Torus::with_side(side, 1), n)?;
        println!("torus {side}, {n} particles: {} states, residual {:.2e}", r.states, r.residual);
    }

    let measure = Arc::new(FugacityMeasure::new(&rate, 1.5)?);
    let torus = Torus::with_side(11, 1);
    let start = Start::Sampled(Arc::new(TorusProductSampler { measure: measure.clone(), torus }));
    let r = stationarity_statistical(&start, &Reference::Marginal(measure), &rate, &kernel, torus, 2.0, 4000, 3, 0.01)?;
    println!(
        "\nmu_phi start, T = 2: chi2 = {:.2} on {} dof, p = {:.3} ({})",
        r.chi.statistic,
        r.chi.dof,
        r.chi.p_value,
        if r.pass { "pass" } else { "fail" }
    );
    println!("eta_0(0) histogram {:?}", r.histogram_initial);
    println!("eta_T(0) histogram {:?}", r.histogram_final);
    Ok(())
}
