//! The squared-correlation spike limit as a chain of maps: population spike
//! alpha -> f(alpha) -> psi_Xi -> covariance stage -> Fisher stage -> t(alpha),
//! printed stage by stage, then checked against the closed form available
//! when the population bulk is concentrated at zero.

use spiked_fisher::measure::DiscreteMeasure;
use spiked_fisher::phase::{phi_zero_case, CcaChain};
use spiked_fisher::Result;

fn main() -> Result<()> {
    let (p, q, n) = (200, 200, 1000);
    let chain = CcaChain::new(p, q, n, DiscreteMeasure::point_mass(0.0))?;
    println!("dims p = {p}, q = {q}, n = {n}  (zero bulk)");
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "alpha", "f", "psi_Xi", "cov", "fisher", "t", "phi"
    );
    for alpha in [0.3, 0.5, 0.7, 0.9] {
        let s = chain.spike_limit(alpha)?;
        let zero = phi_zero_case(alpha, p as f64 / n as f64, q as f64 / n as f64)?;
        println!(
            "{alpha:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.6} {:>10.6}",
            s.f, s.psi_xi, s.psi_c, s.psi, s.t, zero.phi
        );
    }
    let zero = phi_zero_case(0.5, 0.2, 0.2)?;
    println!(
        "\ndetection threshold at r1 = r2 = 0.2: alpha_r = {:.6}",
        zero.alpha_r
    );

    // a nonzero bulk shifts every stage
    let bulk = DiscreteMeasure::new(vec![(0.5, 1.0)])?;
    let chain = CcaChain::new(p, q, n, bulk)?;
    println!("\nsame dims, bulk at 0.5:");
    for alpha in [10.0 / 11.0, 15.0 / 17.0] {
        let s = chain.spike_limit(alpha)?;
        println!("  alpha = {alpha:.4} -> t = {:.6}", s.t);
    }
    Ok(())
}
