//! Where spikes separate: sweep population spike strengths through the
//! detection threshold for the covariance and Fisher ensembles and print
//! the limit each supercritical spike converges to.

use spiked_fisher::phase::{
    assess_spike_cov, fisher_spike_limit, psi_cov_prime, PsiForm, SpikeSpec,
};
use spiked_fisher::stieltjes::SpectralLaw;
use spiked_fisher::Result;

fn main() -> Result<()> {
    let law = SpectralLaw::delta_one();
    let (c1, c2) = (0.1, 0.2);

    println!("covariance ensemble, c1 = {c1}, unit bulk");
    println!("{:>8} {:>12} {:>10}", "spike a", "limit", "class");
    for a in [1.2, 1.4, 1.57, 1.8, 2.5, 5.0, 7.5, 10.0] {
        let report = assess_spike_cov(&law, c1, &SpikeSpec::solitary(a)?, PsiForm::Sum)?;
        let limit = report
            .lambda_c
            .filter(|_| report.is_valid())
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into());
        println!("{a:>8.2} {limit:>12} {:>10?}", report.class);
    }

    // the threshold sits where the spike map stops increasing
    let mut lo = 1.05;
    let mut hi = 3.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if psi_cov_prime(&law, c1, mid, PsiForm::Sum)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    println!("covariance detection threshold ~ {:.4}\n", 0.5 * (lo + hi));

    println!("fisher ensemble, c1 = {c1}, c2 = {c2}");
    println!(
        "{:>8} {:>12} {:>12} {:>10}",
        "spike a", "cov stage", "limit", "class"
    );
    for a in [1.2, 1.57, 2.0, 3.0, 5.0, 7.5, 10.0] {
        let report = fisher_spike_limit(&law, c1, c2, &SpikeSpec::solitary(a)?, PsiForm::Sum)?;
        let fmt = |v: Option<f64>| {
            v.filter(|_| report.is_valid())
                .map(|x| format!("{x:.4}"))
                .unwrap_or_else(|| "-".into())
        };
        println!(
            "{a:>8.2} {:>12} {:>12} {:>10?}",
            fmt(report.lambda_c),
            fmt(report.lambda),
            report.class
        );
    }
    Ok(())
}
