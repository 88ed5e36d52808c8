//! Plug-in estimators recovering population spikes from observed spectra.
//!
//! Each estimate is anchored at one sample eigenvalue. A trimmed Stieltjes
//! sum over the rest of the spectrum stands in for the limiting bulk
//! transform, with the dimension ratios shrunk by the size of the trimmed
//! cluster. The covariance path inverts the one-stage spike map, the Fisher
//! path first pulls the eigenvalue back to the covariance scale, and the
//! correlation path runs the Fisher inverse on the squared-correlation
//! spectrum mapped through its Fisher-scale transform.

use crate::error::{Error, Result};

/// Relative-gap cutoff for the exclusion cluster around the target eigenvalue.
pub const DEFAULT_EXCLUSION_THRESHOLD: f64 = 0.2;

/// Trimmed Stieltjes estimate around one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSt {
    /// Mean of 1/(lambda_i - lambda_k) over the kept eigenvalues.
    pub m_hat: f64,
    /// Kept count over the configured denominator.
    pub c_tilde: f64,
    /// Excluded count; the target itself is always excluded.
    pub set_size: usize,
}

/// Shift-sign variant of the spike inverse.
///
/// The inverse identity (plug exact transform values in, recover the
/// population spike) holds only for `Minus`; `Plus` flips the shift term and
/// is kept for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlugInSign {
    #[default]
    Minus,
    Plus,
}

/// Inputs and outputs of one plug-in evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EstimateReport {
    /// Sample eigenvalue the estimate is anchored at (squared correlation for
    /// the correlation path).
    pub observed: f64,
    /// Size of the exclusion cluster around the anchor.
    pub exclusion_set_size: usize,
    /// Adjusted primary ratio: kept count over the first sample count.
    pub adjusted_ratio: f64,
    /// Fisher-based paths only: kept count over the second sample count.
    pub adjusted_ratio_2: Option<f64>,
    /// Trimmed Stieltjes value behind the estimate.
    pub local_st: f64,
    /// Fisher-based paths only: the covariance-scale pullback of the anchor.
    pub intermediate: Option<f64>,
    /// The plug-in value: a population spike, or a squared correlation for
    /// the correlation path.
    pub estimate: f64,
}

fn check_spectrum(eigs: &[f64], k: usize) -> Result<()> {
    if eigs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "spectrum length {} < 2",
            eigs.len()
        )));
    }
    if k >= eigs.len() {
        return Err(Error::Config(format!(
            "target index {k} out of range for spectrum length {}",
            eigs.len()
        )));
    }
    if let Some(bad) = eigs.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite eigenvalue {bad}")));
    }
    Ok(())
}

/// Trimmed Stieltjes sum at `eigs[k]`.
///
/// Excludes every eigenvalue within relative gap `threshold` of the target,
/// averages 1/(lambda_i - lambda_k) over the rest, and reports the dimension
/// ratio kept/`denom`.
pub fn local_stieltjes(eigs: &[f64], k: usize, threshold: f64, denom: usize) -> Result<LocalSt> {
    check_spectrum(eigs, k)?;
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::Config(format!(
            "exclusion threshold {threshold} must be positive and finite"
        )));
    }
    if denom == 0 {
        return Err(Error::Config("ratio denominator is zero".into()));
    }
    let lam = eigs[k];
    let mut sum = 0.0;
    let mut kept = 0usize;
    for (i, &x) in eigs.iter().enumerate() {
        // the target is always excluded, even at lambda_k = 0 where the
        // relative gap is undefined
        if i == k || (x - lam).abs() / lam.abs() <= threshold {
            continue;
        }
        sum += 1.0 / (x - lam);
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::DegenerateSpectrum);
    }
    let m_hat = sum / kept as f64;
    if !m_hat.is_finite() {
        return Err(Error::Singular(format!(
            "trimmed Stieltjes sum diverged at eigenvalue {lam}"
        )));
    }
    Ok(LocalSt {
        m_hat,
        c_tilde: kept as f64 / denom as f64,
        set_size: eigs.len() - kept,
    })
}

/// Covariance-scale spike inverse at eigenvalue `lambda` with bulk transform
/// value `m2`: lambda*(1+c1*m2)^2 - (1-c1)*(1+c1*m2).
pub fn cov_plugin(lambda: f64, c1: f64, m2: f64) -> f64 {
    let u = 1.0 + c1 * m2;
    lambda * u * u - (1.0 - c1) * u
}

/// Fisher-scale spike inverse at eigenvalue `lambda` with bulk transform
/// value `m3`. Returns (covariance-scale pullback, population spike).
pub fn fisher_plugin(
    lambda: f64,
    c1: f64,
    c2: f64,
    m3: f64,
    sign: PlugInSign,
) -> Result<(f64, f64)> {
    let b = 1.0 + c2 * lambda * m3;
    if b.abs() < 1e-12 {
        return Err(Error::Singular(format!(
            "covariance-scale pullback degenerate at eigenvalue {lambda}"
        )));
    }
    let a_tilde = lambda * b;
    // the two bulk transforms are linked by m2(a_tilde) = m3/(1 + c2*lambda*m3)
    let m2 = m3 / b;
    let u = 1.0 + c1 * m2;
    let shift = match sign {
        PlugInSign::Minus => -(1.0 - c1),
        PlugInSign::Plus => 1.0 - c1,
    };
    Ok((a_tilde, u * (a_tilde * u + shift)))
}

/// Maps a Fisher-scale population spike to a squared correlation via the
/// q/n-weighted Moebius step.
pub fn correlation_from_spike(a_hat: f64, q: usize, n: usize) -> Result<f64> {
    if q == 0 || n == 0 {
        return Err(Error::Config("sample counts must be positive".into()));
    }
    let w = q as f64 / n as f64 * a_hat;
    if (1.0 + w).abs() < 1e-12 {
        return Err(Error::Singular(format!(
            "correlation map degenerate at spike {a_hat}"
        )));
    }
    Ok(w / (1.0 + w))
}

/// Population spike from a covariance spectrum, anchored at `eigs[k]`, with
/// the default exclusion threshold. `n` is the sample count.
pub fn estimate_spike_cov(eigs: &[f64], k: usize, p: usize, n: usize) -> Result<EstimateReport> {
    estimate_spike_cov_with(eigs, k, p, n, DEFAULT_EXCLUSION_THRESHOLD)
}

/// As [`estimate_spike_cov`] with a configurable exclusion threshold.
pub fn estimate_spike_cov_with(
    eigs: &[f64],
    k: usize,
    p: usize,
    n: usize,
    threshold: f64,
) -> Result<EstimateReport> {
    if eigs.len() != p {
        return Err(Error::Config(format!(
            "spectrum length {} does not match p={p}",
            eigs.len()
        )));
    }
    let st = local_stieltjes(eigs, k, threshold, n)?;
    let lam = eigs[k];
    Ok(EstimateReport {
        observed: lam,
        exclusion_set_size: st.set_size,
        adjusted_ratio: st.c_tilde,
        adjusted_ratio_2: None,
        local_st: st.m_hat,
        intermediate: None,
        estimate: cov_plugin(lam, st.c_tilde, st.m_hat),
    })
}

/// Population spike from a Fisher spectrum, anchored at `eigs[k]`, with the
/// default threshold and shift sign. `n1`, `n2` are the sample counts behind
/// the numerator and denominator covariances.
pub fn estimate_spike_fisher(
    eigs: &[f64],
    k: usize,
    p: usize,
    n1: usize,
    n2: usize,
) -> Result<EstimateReport> {
    estimate_spike_fisher_with(
        eigs,
        k,
        p,
        n1,
        n2,
        DEFAULT_EXCLUSION_THRESHOLD,
        PlugInSign::default(),
    )
}

/// As [`estimate_spike_fisher`] with configurable threshold and shift sign.
pub fn estimate_spike_fisher_with(
    eigs: &[f64],
    k: usize,
    p: usize,
    n1: usize,
    n2: usize,
    threshold: f64,
    sign: PlugInSign,
) -> Result<EstimateReport> {
    if eigs.len() != p {
        return Err(Error::Config(format!(
            "spectrum length {} does not match p={p}",
            eigs.len()
        )));
    }
    if n1 == 0 {
        return Err(Error::Config("sample counts must be positive".into()));
    }
    let st = local_stieltjes(eigs, k, threshold, n2)?;
    let kept = p - st.set_size;
    let c1t = kept as f64 / n1 as f64;
    let lam = eigs[k];
    let (a_tilde, a_hat) = fisher_plugin(lam, c1t, st.c_tilde, st.m_hat, sign)?;
    Ok(EstimateReport {
        observed: lam,
        exclusion_set_size: st.set_size,
        adjusted_ratio: c1t,
        adjusted_ratio_2: Some(st.c_tilde),
        local_st: st.m_hat,
        intermediate: Some(a_tilde),
        estimate: a_hat,
    })
}

/// Squared-correlation plug-ins for a descending spectrum of squared sample
/// canonical correlations, one report per entry.
///
/// Maps the spectrum to its Fisher scale with (n-q)/q weights, runs the
/// Fisher-path inverse with sample-count roles (q, n-q), and sends each spike
/// through [`correlation_from_spike`]. Entries anchored inside a bulk cluster
/// carry no meaning; callers pick the isolated indices.
pub fn estimate_cca(lambda_sq: &[f64], p: usize, q: usize, n: usize) -> Result<Vec<EstimateReport>> {
    estimate_cca_with(
        lambda_sq,
        p,
        q,
        n,
        DEFAULT_EXCLUSION_THRESHOLD,
        PlugInSign::default(),
    )
}

/// As [`estimate_cca`] with configurable threshold and shift sign.
pub fn estimate_cca_with(
    lambda_sq: &[f64],
    p: usize,
    q: usize,
    n: usize,
    threshold: f64,
    sign: PlugInSign,
) -> Result<Vec<EstimateReport>> {
    if !(p <= q && q < n) {
        return Err(Error::Config(format!(
            "dimensions must satisfy p <= q < n, got p={p} q={q} n={n}"
        )));
    }
    if lambda_sq.len() != p {
        return Err(Error::Config(format!(
            "spectrum length {} does not match p={p}",
            lambda_sq.len()
        )));
    }
    for &v in lambda_sq {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Domain(format!(
                "squared correlation {v} outside [0,1)"
            )));
        }
    }
    let scale = (n - q) as f64 / q as f64;
    let fisher: Vec<f64> = lambda_sq.iter().map(|&v| v / (1.0 - v) * scale).collect();
    (0..p)
        .map(|k| {
            let mut rep = estimate_spike_fisher_with(&fisher, k, p, q, n - q, threshold, sign)?;
            rep.observed = lambda_sq[k];
            rep.estimate = correlation_from_spike(rep.estimate, q, n)?;
            Ok(rep)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{psi_cov, psi_fisher, PsiForm};
    use crate::stieltjes::{solve_m2, solve_m3, SpectralLaw, DEFAULT_TOL};
    use proptest::prelude::*;

    #[test]
    fn local_st_worked_example() {
        let st = local_stieltjes(&[4.0, 2.0, 1.0], 0, 0.2, 6).unwrap();
        assert!((st.m_hat - (-5.0 / 12.0)).abs() < 1e-15, "{}", st.m_hat);
        assert!((st.c_tilde - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(st.set_size, 1);
    }

    #[test]
    fn local_st_rejects_fully_clustered_spectrum() {
        // every gap is within 20% of the anchor
        let err = local_stieltjes(&[4.0, 3.9, 3.5], 0, 0.2, 6).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum));
    }

    #[test]
    fn local_st_input_validation() {
        assert!(local_stieltjes(&[1.0], 0, 0.2, 6).is_err());
        assert!(local_stieltjes(&[4.0, 2.0], 5, 0.2, 6).is_err());
        assert!(local_stieltjes(&[4.0, 2.0], 0, 0.0, 6).is_err());
        assert!(local_stieltjes(&[4.0, 2.0], 0, 0.2, 0).is_err());
        assert!(local_stieltjes(&[4.0, f64::NAN], 0, 0.2, 6).is_err());
    }

    #[test]
    fn cov_plugin_collapses_without_dimension_effect() {
        assert_eq!(cov_plugin(11.0, 0.0, -0.3), 10.0);
    }

    #[test]
    fn fisher_plugin_collapses_without_dimension_effect() {
        let (a_tilde, a_hat) = fisher_plugin(11.0, 0.0, 0.0, -0.3, PlugInSign::Minus).unwrap();
        assert_eq!(a_tilde, 11.0);
        assert_eq!(a_hat, 10.0);
    }

    #[test]
    fn cov_round_trip_at_exact_transform_values() {
        let law = SpectralLaw::delta_one();
        let c1 = 0.1;
        for a in [3.0, 5.0, 7.5, 10.0] {
            let lam_c = psi_cov(&law, c1, a, PsiForm::Sum).unwrap();
            let m2 = solve_m2(&law, c1, lam_c, DEFAULT_TOL).unwrap().value;
            let back = cov_plugin(lam_c, c1, m2);
            assert!((back - a).abs() < 1e-8, "a={a} back={back}");
        }
    }

    #[test]
    fn fisher_round_trip_at_exact_transform_values() {
        let law = SpectralLaw::delta_one();
        let (c1, c2) = (0.1, 0.2);
        for a in [3.0, 5.0, 7.5, 10.0] {
            let lam_c = psi_cov(&law, c1, a, PsiForm::Sum).unwrap();
            let lam = psi_fisher(&law, c1, c2, lam_c).unwrap();
            let m3 = solve_m3(&law, c1, c2, lam, DEFAULT_TOL).unwrap().value;
            let (a_tilde, a_hat) = fisher_plugin(lam, c1, c2, m3, PlugInSign::Minus).unwrap();
            assert!((a_tilde - lam_c).abs() < 1e-8, "a={a} a_tilde={a_tilde}");
            assert!((a_hat - a).abs() < 1e-8, "a={a} a_hat={a_hat}");
        }
    }

    #[test]
    fn plus_variant_breaks_the_round_trip() {
        let law = SpectralLaw::delta_one();
        let (c1, c2) = (0.1, 0.2);
        let a = 10.0;
        let lam_c = psi_cov(&law, c1, a, PsiForm::Sum).unwrap();
        let lam = psi_fisher(&law, c1, c2, lam_c).unwrap();
        let m3 = solve_m3(&law, c1, c2, lam, DEFAULT_TOL).unwrap().value;
        let (_, a_hat) = fisher_plugin(lam, c1, c2, m3, PlugInSign::Plus).unwrap();
        assert!((a_hat - a).abs() > 0.5, "a_hat={a_hat}");
    }

    #[test]
    fn correlation_step_worked_example() {
        assert_eq!(correlation_from_spike(10.0, 1, 5).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn cov_estimate_report_is_plumbed_through() {
        let eigs = [12.0, 3.0, 2.0, 1.0, 0.5];
        let rep = estimate_spike_cov(&eigs, 0, 5, 50).unwrap();
        let st = local_stieltjes(&eigs, 0, 0.2, 50).unwrap();
        assert_eq!(rep.observed, 12.0);
        assert_eq!(rep.exclusion_set_size, st.set_size);
        assert_eq!(rep.adjusted_ratio, st.c_tilde);
        assert_eq!(rep.local_st, st.m_hat);
        assert!(rep.intermediate.is_none() && rep.adjusted_ratio_2.is_none());
        assert_eq!(rep.estimate, cov_plugin(12.0, st.c_tilde, st.m_hat));
    }

    #[test]
    fn cca_real_data_spectrum() {
        let lambda_sq = [0.9152, 0.7755, 0.4560, 0.4034, 0.2548, 0.2247, 0.0492];
        let reps = estimate_cca(&lambda_sq, 7, 11, 188).unwrap();
        let rho = [
            0.906363523201805,
            0.754424937281015,
            0.411807729344724,
            0.376859893662972,
            0.229648223694159,
            0.195520735076317,
            0.026131323998005,
        ];
        for (rep, want) in reps.iter().zip(rho) {
            assert!((rep.estimate - want).abs() < 1e-12, "{}", rep.estimate);
            assert!(rep.estimate > 0.0 && rep.estimate < 1.0);
        }
        assert!((reps[0].estimate - 0.9064).abs() < 5e-4);
        assert_eq!(reps[0].exclusion_set_size, 1);
        assert!((reps[0].observed - 0.9152).abs() < 1e-15);
    }

    #[test]
    fn cca_input_validation() {
        assert!(estimate_cca(&[0.5, 0.3], 2, 1, 10).is_err());
        assert!(estimate_cca(&[0.5, 0.3], 2, 3, 3).is_err());
        assert!(estimate_cca(&[0.5, 0.3, 0.1], 2, 3, 10).is_err());
        assert!(estimate_cca(&[0.5, 1.0], 2, 3, 10).is_err());
        assert!(estimate_cca(&[0.5, -0.1], 2, 3, 10).is_err());
    }

    proptest! {
        #[test]
        fn correlation_is_monotone_in_the_spike(
            a in 0.01f64..500.0,
            da in 0.01f64..50.0,
        ) {
            let lo = correlation_from_spike(a, 3, 10).unwrap();
            let hi = correlation_from_spike(a + da, 3, 10).unwrap();
            prop_assert!(hi > lo);
            prop_assert!(lo > 0.0 && hi < 1.0);
        }

        #[test]
        fn exclusion_cluster_grows_with_the_threshold(
            seed in 0u64..1000,
            thr in 0.05f64..0.5,
        ) {
            // deterministic pseudo-spectrum spread over [1, 100]
            let eigs: Vec<f64> = (0..40)
                .map(|i| 1.0 + ((seed * 2654435761 + i * 40503) % 9901) as f64 / 100.0)
                .collect();
            let narrow = local_stieltjes(&eigs, 0, thr, 100);
            let wide = local_stieltjes(&eigs, 0, thr * 1.5, 100);
            if let (Ok(narrow), Ok(wide)) = (narrow, wide) {
                prop_assert!(wide.set_size >= narrow.set_size);
                prop_assert!(narrow.set_size >= 1);
            }
        }

        #[test]
        fn trimmed_sum_at_the_top_eigenvalue_is_negative(
            gap in 0.3f64..3.0,
            base in 0.1f64..2.0,
        ) {
            // strictly descending spectrum with an isolated top
            let top = 10.0 * (base + gap);
            let eigs = [top, base + 0.21 * base, base, 0.5 * base];
            let st = local_stieltjes(&eigs, 0, 0.2, 10).unwrap();
            prop_assert!(st.m_hat < 0.0);
        }
    }
}
