//! Goodness-of-fit statistics and reference-ensemble samplers used by the
//! Monte Carlo harness: one-sample Kolmogorov tests against the standard
//! normal or an arbitrary CDF, a two-sample two-dimensional Kolmogorov
//! distance for paired-eigenvalue comparisons, a 2x2 Gaussian-ensemble pair
//! sampler, and histogram / quantile-pair extraction for plot-ready reports.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal as NormalDist};
use statrs::distribution::{ContinuousCDF, Normal};

/// One-sample Kolmogorov test result.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub distance: f64,
    pub p_value: f64,
}

const KS_MIN_SAMPLES: usize = 20;

/// Kolmogorov distance of `samples` against the standard normal CDF with the
/// asymptotic p-value. Requires at least 20 samples.
pub fn ks_normal(samples: &[f64]) -> Result<KsResult> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    ks_test(samples, |x| normal.cdf(x))
}

/// Kolmogorov distance of `samples` against an arbitrary continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "Kolmogorov test needs at least {KS_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InsufficientData("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok(KsResult {
        distance: d,
        p_value: kolmogorov_tail(lambda),
    })
}

/// Tail probability of the Kolmogorov distribution, 2 sum (-1)^{k-1} e^{-2k^2 x^2}.
fn kolmogorov_tail(x: f64) -> f64 {
    if x <= 0.1 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov distance in the plane using lower-left quadrant
/// counts, evaluated at every point of both samples.
pub fn ks2d_two_sample(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.len() < KS_MIN_SAMPLES || b.len() < KS_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "planar Kolmogorov test needs at least {KS_MIN_SAMPLES} samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let frac_le = |pts: &[(f64, f64)], x: f64, y: f64| -> f64 {
        let c = pts.iter().filter(|(u, v)| *u <= x && *v <= y).count();
        c as f64 / pts.len() as f64
    };
    let mut d: f64 = 0.0;
    for &(x, y) in a.iter().chain(b.iter()) {
        d = d.max((frac_le(a, x, y) - frac_le(b, x, y)).abs());
    }
    Ok(d)
}

/// Eigenvalue pair of one 2x2 Gaussian ensemble draw, descending.
///
/// Real mode: diagonal N(0,1), off-diagonal N(0, 1/2). Complex mode: the
/// off-diagonal entry has independent real and imaginary parts of variance
/// 1/2 each. Matches the normalization in which the diagonal entries are
/// standard normals.
pub fn gaussian_pair_sample<R: Rng + ?Sized>(rng: &mut R, complex_field: bool) -> (f64, f64) {
    let std = NormalDist::new(0.0, 1.0).expect("unit normal");
    let half = NormalDist::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("scaled normal");
    let d1: f64 = std.sample(rng);
    let d2: f64 = std.sample(rng);
    let h2 = if complex_field {
        let re: f64 = half.sample(rng);
        let im: f64 = half.sample(rng);
        re * re + im * im
    } else {
        let h: f64 = half.sample(rng);
        h * h
    };
    let mid = (d1 + d2) / 2.0;
    let disc = ((d1 - d2) / 2.0).powi(2) + h2;
    let r = disc.sqrt();
    (mid + r, mid - r)
}

/// Sample mean and unbiased variance.
pub fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// One histogram bin: center, count, and density normalized to unit area.
#[derive(Debug, Clone, Copy)]
pub struct HistogramBin {
    pub center: f64,
    pub count: usize,
    pub density: f64,
}

/// Equal-width histogram over the sample range.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if samples.is_empty() || bins == 0 {
        return Err(Error::InsufficientData(
            "histogram needs samples and a positive bin count".into(),
        ));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = samples.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistogramBin {
            center: lo + (i as f64 + 0.5) * width,
            count: c,
            density: c as f64 / (n * width),
        })
        .collect())
}

/// Sorted (theoretical standard-normal quantile, sample quantile) pairs.
pub fn normal_qq_pairs(samples: &[f64]) -> Vec<(f64, f64)> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (normal.inverse_cdf((i as f64 + 0.5) / n), x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded_normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = NormalDist::new(0.0, 1.0).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    #[test]
    fn normal_sample_passes() {
        let xs = seeded_normals(1000, 7);
        let r = ks_normal(&xs).unwrap();
        assert!(r.distance < 0.05, "distance {}", r.distance);
        assert!(r.p_value > 0.01, "p {}", r.p_value);
    }

    #[test]
    fn degenerate_sample_has_half_gap() {
        let xs = vec![0.0; 25];
        let r = ks_normal(&xs).unwrap();
        assert!((r.distance - 0.5).abs() < 0.03, "distance {}", r.distance);
        assert!(r.p_value < 1e-4);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(matches!(
            ks_normal(&[0.0; 19]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(ks_normal(&[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn shifted_sample_fails() {
        let xs: Vec<f64> = seeded_normals(1000, 11).iter().map(|x| x + 0.3).collect();
        let r = ks_normal(&xs).unwrap();
        assert!(r.p_value < 1e-4, "p {}", r.p_value);
    }

    #[test]
    fn p_values_spread_under_null() {
        let ps: Vec<f64> = (0..10)
            .map(|s| ks_normal(&seeded_normals(400, 100 + s)).unwrap().p_value)
            .collect();
        let lo = ps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo > 0.2, "p range {lo}..{hi}");
    }

    #[test]
    fn planar_distance_small_for_same_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dist = NormalDist::new(0.0, 1.0).unwrap();
        let mut draw = |n: usize| -> Vec<(f64, f64)> {
            (0..n)
                .map(|_| (dist.sample(&mut rng), dist.sample(&mut rng)))
                .collect()
        };
        let a = draw(1500);
        let b = draw(1500);
        let d = ks2d_two_sample(&a, &b).unwrap();
        assert!(d < 0.06, "distance {d}");
        let shifted: Vec<(f64, f64)> = a.iter().map(|(x, y)| (x + 1.0, *y)).collect();
        let d2 = ks2d_two_sample(&shifted, &b).unwrap();
        assert!(d2 > 0.2, "distance {d2}");
    }

    #[test]
    fn pair_sampler_moments() {
        // E[l1 + l2] = 0; E[(l1 - l2)^2] = 2 + 4*E|h|^2 = 4 real, 6 complex
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (complex_field, gap_sq) in [(false, 4.0), (true, 6.0)] {
            let n = 40_000;
            let mut sum = 0.0;
            let mut gap = 0.0;
            for _ in 0..n {
                let (a, b) = gaussian_pair_sample(&mut rng, complex_field);
                assert!(a >= b);
                sum += a + b;
                gap += (a - b).powi(2);
            }
            assert!((sum / n as f64).abs() < 0.05);
            assert!(
                (gap / n as f64 - gap_sq).abs() < 0.15,
                "gap^2 {} vs {gap_sq}",
                gap / n as f64
            );
        }
    }

    #[test]
    fn histogram_counts_and_area() {
        let xs = seeded_normals(5000, 13);
        let h = histogram(&xs, 40).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5000);
        let width = h[1].center - h[0].center;
        let area: f64 = h.iter().map(|b| b.density * width).sum();
        assert!((area - 1.0).abs() < 1e-9, "area {area}");
    }

    #[test]
    fn qq_pairs_track_identity_for_normal_data() {
        let xs = seeded_normals(4000, 17);
        let pairs = normal_qq_pairs(&xs);
        assert_eq!(pairs.len(), 4000);
        // interior quantiles stay close to the diagonal
        for &(t, e) in &pairs[200..3800] {
            assert!((t - e).abs() < 0.25, "({t}, {e})");
        }
    }

    #[test]
    fn mean_var_basics() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((v - 5.0 / 3.0).abs() < 1e-12);
    }
}
