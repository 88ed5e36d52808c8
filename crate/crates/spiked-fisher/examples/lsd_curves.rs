//! Limit spectral densities against simulated spectra: tabulate each
//! ensemble's bulk density and report the sup distance between a sampled
//! empirical distribution and the limit CDF.

use spiked_fisher::fluctuation::Field;
use spiked_fisher::measure::DiscreteMeasure;
use spiked_fisher::phase::CcaChain;
use spiked_fisher::simulate::{
    esd_distance, lsd_curve_cca, lsd_curve_cov, lsd_curve_fisher, sample_spectrum, ModelSpec,
};
use spiked_fisher::Result;

fn sketch(xs: &[f64], ys: &[f64], rows: usize) {
    let max = ys.iter().cloned().fold(0.0, f64::max);
    let step = xs.len() / rows;
    for i in (0..xs.len()).step_by(step.max(1)) {
        let width = (40.0 * ys[i] / max) as usize;
        println!("{:>8.3} |{}", xs[i], "*".repeat(width));
    }
}

fn main() -> Result<()> {
    let bulk = DiscreteMeasure::point_mass(1.0);

    println!("covariance bulk density, c1 = 0.1");
    let curve = lsd_curve_cov(&bulk, 0.1, 0.2, 4.2, 320)?;
    sketch(&curve.xs, &curve.density, 24);
    let spec = ModelSpec::covariance(400, 4000, &[], bulk.clone(), Field::Real)?;
    let eigs = sample_spectrum(&spec, 1)?;
    println!("  ESD sup distance at p = 400: {:.4}\n", esd_distance(&eigs, &curve)?);

    println!("fisher bulk density, c1 = 0.1, c2 = 0.2");
    let curve = lsd_curve_fisher(&bulk, 0.1, 0.2, 0.2, 8.5, 400)?;
    sketch(&curve.xs, &curve.density, 24);
    let spec = ModelSpec::fisher(400, 4000, 2000, &[], bulk, Field::Real)?;
    let eigs = sample_spectrum(&spec, 1)?;
    println!("  ESD sup distance at p = 400: {:.4}\n", esd_distance(&eigs, &curve)?);

    println!("squared-correlation bulk density, p = 40, q = 60, n = 400");
    let chain = CcaChain::new(40, 60, 400, DiscreteMeasure::point_mass(0.0))?;
    let curve = lsd_curve_cca(&chain, 0.002, 0.7, 280)?;
    sketch(&curve.xs, &curve.density, 24);
    let spec = ModelSpec::cca(40, 60, 400, &[], DiscreteMeasure::point_mass(0.0), Field::Real)?;
    let eigs = sample_spectrum(&spec, 1)?;
    println!("  ESD sup distance at p = 40: {:.4}", esd_distance(&eigs, &curve)?);
    Ok(())
}
