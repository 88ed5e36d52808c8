//! Seeded Monte Carlo harness for the three ensembles.
//!
//! A [`ModelSpec`] fixes dimensions, population spectrum, and scalar field;
//! [`sample_spectrum`] draws one ordered spectrum from it; [`run_clt`],
//! [`run_pair_clt`], and [`run_mse`] replicate draws and aggregate
//! standardized spike statistics or estimator errors. Replications use one
//! stream of a counter-based generator per replication index, so results are
//! bit-identical regardless of how the replication loop is scheduled.
//!
//! Fill order is part of the determinism contract: every matrix is filled
//! row by row, matrices in the documented per-ensemble order (covariance: X;
//! Fisher: X then the denominator sample; paired blocks: y then the noise).

use crate::error::{Error, Result};
use crate::estimator::{
    correlation_from_spike, estimate_spike_cov_with, estimate_spike_fisher_with, PlugInSign,
    DEFAULT_EXCLUSION_THRESHOLD,
};
use crate::fluctuation::{
    eta, standardize_cca, standardize_cov, standardize_fisher, theta1, theta2, Field,
};
use crate::linalg::{
    half_whiten, half_whiten_complex, herm_eigenvalues_desc, sym_eigenvalues_desc, whiten,
    whiten_complex, CMat, RMat,
};
use crate::measure::DiscreteMeasure;
use crate::phase::{build_spike_set, g_map, CcaChain, SpikeSpec, DEFAULT_SEPARATION};
use crate::stats::{gaussian_pair_sample, ks2d_two_sample, ks_normal, mean_var, KsResult};
use crate::stieltjes::SpectralLaw;
use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Spiked population: ordered spike blocks plus the law of the remaining
/// bulk eigenvalues.
#[derive(Debug, Clone)]
pub struct Population {
    pub spikes: Vec<SpikeSpec>,
    pub bulk: DiscreteMeasure,
}

impl Population {
    fn build(spikes: &[(f64, usize)], bulk: DiscreteMeasure) -> Result<Self> {
        let spikes = if spikes.is_empty() {
            Vec::new()
        } else {
            build_spike_set(spikes, DEFAULT_SEPARATION)?
        };
        Ok(Population { spikes, bulk })
    }

    /// Total spiked dimension count M.
    pub fn spiked_dims(&self) -> usize {
        self.spikes.iter().map(|s| s.multiplicity).sum()
    }

    /// All p population eigenvalues, descending: spikes then the bulk atoms
    /// expanded to integer counts.
    pub fn eigenvalues(&self, p: usize) -> Result<Vec<f64>> {
        let m = self.spiked_dims();
        if m > p {
            return Err(Error::Config(format!(
                "{m} spiked dimensions exceed p={p}"
            )));
        }
        let bulk_count = p - m;
        let mut out = Vec::with_capacity(p);
        for s in &self.spikes {
            out.extend(std::iter::repeat(s.value).take(s.multiplicity));
        }
        let mut assigned = 0usize;
        for &(loc, w) in self.bulk.atoms().iter().rev() {
            let exact = w * bulk_count as f64;
            let count = exact.round() as usize;
            if (exact - count as f64).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "bulk atom at {loc} implies a non-integer count {exact:.4} of {bulk_count} bulk eigenvalues"
                )));
            }
            out.extend(std::iter::repeat(loc).take(count));
            assigned += count;
        }
        if assigned != bulk_count {
            return Err(Error::Config(format!(
                "bulk atom counts sum to {assigned}, expected {bulk_count}"
            )));
        }
        Ok(out)
    }
}

/// One simulated ensemble: dimensions, population, and scalar field.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// Signal-plus-noise sample covariance at p variables, n samples.
    Covariance {
        p: usize,
        n: usize,
        pop: Population,
        field: Field,
    },
    /// Ratio of the covariance above to an independent white sample
    /// covariance with n2 samples.
    Fisher {
        p: usize,
        n1: usize,
        n2: usize,
        pop: Population,
        field: Field,
    },
    /// Sample squared canonical correlations between a p-block and a q-block
    /// of one Gaussian sample of size n. The population is over squared
    /// correlations in [0, 1).
    Cca {
        p: usize,
        q: usize,
        n: usize,
        pop: Population,
        field: Field,
    },
}

fn check_signal_rank(pop: &Population, p: usize, n: usize) -> Result<()> {
    let eigs = pop.eigenvalues(p)?;
    let nonzero = eigs.iter().filter(|&&l| l > 0.0).count();
    if nonzero > n.min(p) {
        return Err(Error::Config(format!(
            "{nonzero} nonzero population eigenvalues exceed the representable rank {}",
            n.min(p)
        )));
    }
    Ok(())
}

impl ModelSpec {
    pub fn covariance(
        p: usize,
        n: usize,
        spikes: &[(f64, usize)],
        bulk: DiscreteMeasure,
        field: Field,
    ) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        let pop = Population::build(spikes, bulk)?;
        check_signal_rank(&pop, p, n)?;
        Ok(ModelSpec::Covariance { p, n, pop, field })
    }

    pub fn fisher(
        p: usize,
        n1: usize,
        n2: usize,
        spikes: &[(f64, usize)],
        bulk: DiscreteMeasure,
        field: Field,
    ) -> Result<Self> {
        if p == 0 || n1 == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if n2 <= p {
            return Err(Error::Config(format!(
                "denominator sample count {n2} must exceed p={p} for an invertible denominator"
            )));
        }
        let pop = Population::build(spikes, bulk)?;
        check_signal_rank(&pop, p, n1)?;
        Ok(ModelSpec::Fisher { p, n1, n2, pop, field })
    }

    pub fn cca(
        p: usize,
        q: usize,
        n: usize,
        spikes_sq: &[(f64, usize)],
        bulk_sq: DiscreteMeasure,
        field: Field,
    ) -> Result<Self> {
        if p == 0 || p > q {
            return Err(Error::Config(format!("need 1 <= p <= q, got p={p}, q={q}")));
        }
        if n <= p + q {
            return Err(Error::Config(format!(
                "sample count {n} must exceed p+q={}",
                p + q
            )));
        }
        let pop = Population::build(spikes_sq, bulk_sq)?;
        for l in pop.eigenvalues(p)? {
            if !(0.0..1.0).contains(&l) {
                return Err(Error::Config(format!(
                    "squared correlation {l} outside [0, 1)"
                )));
            }
        }
        Ok(ModelSpec::Cca { p, q, n, pop, field })
    }

    pub fn p(&self) -> usize {
        match *self {
            ModelSpec::Covariance { p, .. }
            | ModelSpec::Fisher { p, .. }
            | ModelSpec::Cca { p, .. } => p,
        }
    }

    pub fn field(&self) -> Field {
        match *self {
            ModelSpec::Covariance { field, .. }
            | ModelSpec::Fisher { field, .. }
            | ModelSpec::Cca { field, .. } => field,
        }
    }

    pub fn population(&self) -> &Population {
        match self {
            ModelSpec::Covariance { pop, .. }
            | ModelSpec::Fisher { pop, .. }
            | ModelSpec::Cca { pop, .. } => pop,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Covariance { .. } => "covariance",
            ModelSpec::Fisher { .. } => "fisher",
            ModelSpec::Cca { .. } => "cca",
        }
    }

    /// Population eigenvalues, descending: signal matrix eigenvalues for the
    /// covariance and Fisher kinds, squared correlations for paired blocks.
    pub fn population_eigenvalues(&self) -> Result<Vec<f64>> {
        self.population().eigenvalues(self.p())
    }
}

/// The p x n noncentrality factor with diagonal entries √(n·lᵢ).
///
/// `pop_eigs` lists the intended eigenvalues of the signal matrix,
/// descending. Entries beyond min(p, n) must be zero: a p x n factor cannot
/// carry more than min(p, n) nonzero directions.
pub fn make_xi(pop_eigs: &[f64], p: usize, n: usize) -> Result<RMat> {
    if pop_eigs.len() != p {
        return Err(Error::Config(format!(
            "{} population eigenvalues for p={p}",
            pop_eigs.len()
        )));
    }
    let rank = p.min(n);
    if pop_eigs.iter().skip(rank).any(|&l| l != 0.0) {
        return Err(Error::Config(format!(
            "nonzero population eigenvalue beyond representable rank {rank}"
        )));
    }
    if pop_eigs.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::Config("population eigenvalues must be finite nonnegative".into()));
    }
    let mut xi = RMat::zeros(p, n);
    for (i, &l) in pop_eigs.iter().take(rank).enumerate() {
        xi[(i, i)] = (n as f64 * l).sqrt();
    }
    Ok(xi)
}

fn rep_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fill_real(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RMat {
    let dist = Normal::new(0.0, 1.0).expect("unit normal");
    let mut m = RMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = dist.sample(rng);
        }
    }
    m
}

// unit-variance complex entries: real and imaginary parts of variance 1/2
fn fill_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    let dist = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("scaled normal");
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = dist.sample(rng);
            let im = dist.sample(rng);
            m[(i, j)] = Complex::new(re, im);
        }
    }
    m
}

fn covariance_eigs_real(
    pop_eigs: &[f64],
    p: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let xi = make_xi(pop_eigs, p, n)?;
    let s = xi + fill_real(rng, p, n);
    sym_eigenvalues_desc(&(&s * s.transpose() / n as f64))
}

fn covariance_eigs_complex(
    pop_eigs: &[f64],
    p: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let xi = make_xi(pop_eigs, p, n)?.map(|v| Complex::new(v, 0.0));
    let s = xi + fill_complex(rng, p, n);
    herm_eigenvalues_desc(&(&s * s.adjoint() / Complex::new(n as f64, 0.0)))
}

fn spectrum_with_rng(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match spec {
        ModelSpec::Covariance { p, n, pop, field } => {
            let eigs = pop.eigenvalues(*p)?;
            match field {
                Field::Real => covariance_eigs_real(&eigs, *p, *n, rng),
                Field::Complex => covariance_eigs_complex(&eigs, *p, *n, rng),
            }
        }
        ModelSpec::Fisher { p, n1, n2, pop, field } => {
            let eigs = pop.eigenvalues(*p)?;
            match field {
                Field::Real => {
                    let xi = make_xi(&eigs, *p, *n1)?;
                    let s = xi + fill_real(rng, *p, *n1);
                    let c = &s * s.transpose() / *n1 as f64;
                    let y = fill_real(rng, *p, *n2);
                    let denom = &y * y.transpose() / *n2 as f64;
                    sym_eigenvalues_desc(&whiten(&denom, &c)?)
                }
                Field::Complex => {
                    let xi = make_xi(&eigs, *p, *n1)?.map(|v| Complex::new(v, 0.0));
                    let s = xi + fill_complex(rng, *p, *n1);
                    let c = &s * s.adjoint() / Complex::new(*n1 as f64, 0.0);
                    let y = fill_complex(rng, *p, *n2);
                    let denom = &y * y.adjoint() / Complex::new(*n2 as f64, 0.0);
                    herm_eigenvalues_desc(&whiten_complex(&denom, &c)?)
                }
            }
        }
        ModelSpec::Cca { p, q, n, pop, field } => {
            let rho: Vec<f64> = pop.eigenvalues(*p)?.iter().map(|l| l.sqrt()).collect();
            match field {
                Field::Real => {
                    let y = fill_real(rng, *q, *n);
                    let mut x = fill_real(rng, *p, *n);
                    for i in 0..*p {
                        let noise = (1.0 - rho[i] * rho[i]).sqrt();
                        for j in 0..*n {
                            x[(i, j)] = rho[i] * y[(i, j)] + noise * x[(i, j)];
                        }
                    }
                    let nf = *n as f64;
                    let sxx = &x * x.transpose() / nf;
                    let syy = &y * y.transpose() / nf;
                    let sxy = &x * y.transpose() / nf;
                    let a = half_whiten(&sxx, &sxy)?;
                    let g = half_whiten(&syy, &a.transpose())?.transpose();
                    sym_eigenvalues_desc(&(&g * g.transpose()))
                }
                Field::Complex => {
                    let y = fill_complex(rng, *q, *n);
                    let mut x = fill_complex(rng, *p, *n);
                    for i in 0..*p {
                        let noise = (1.0 - rho[i] * rho[i]).sqrt();
                        for j in 0..*n {
                            x[(i, j)] = y[(i, j)].scale(rho[i]) + x[(i, j)].scale(noise);
                        }
                    }
                    let nf = Complex::new(*n as f64, 0.0);
                    let sxx = &x * x.adjoint() / nf;
                    let syy = &y * y.adjoint() / nf;
                    let sxy = &x * y.adjoint() / nf;
                    let a = half_whiten_complex(&sxx, &sxy)?;
                    let g = half_whiten_complex(&syy, &a.adjoint())?.adjoint();
                    herm_eigenvalues_desc(&(&g * g.adjoint()))
                }
            }
        }
    }
}

/// One ordered spectrum draw (descending), deterministic in (spec, seed).
pub fn sample_spectrum(spec: &ModelSpec, seed: u64) -> Result<Vec<f64>> {
    spectrum_with_rng(spec, &mut rep_rng(seed, 0))
}

/// Where the standardization centers and scales come from.
///
/// `EmpiricalAdjusted` evaluates the limit maps and variance scales at the
/// ratios left after removing the spiked directions, (p − M)/n; this is the
/// centering the finite-sample theory prescribes and the default.
/// `DesignRatios` uses the raw p/n ratios; it is kept as a deliberate
/// control and shows a detectable mean shift at spiked designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    #[default]
    EmpiricalAdjusted,
    DesignRatios,
}

/// Center and scale for one spike's standardized statistic.
#[derive(Debug, Clone, Copy)]
pub struct SpikeTheory {
    /// Limit of the raw sample eigenvalue (or squared correlation).
    pub center: f64,
    /// Variance scale under the governing limit law (θ or η).
    pub scale: f64,
}

fn effective_p(p: usize, m: usize, centering: Centering) -> usize {
    match centering {
        Centering::EmpiricalAdjusted => p - m,
        Centering::DesignRatios => p,
    }
}

/// Resolve the centering and variance scale for one spike block.
pub fn spike_theory(spec: &ModelSpec, spike_index: usize, centering: Centering) -> Result<SpikeTheory> {
    let pop = spec.population();
    let spike = pop
        .spikes
        .get(spike_index)
        .ok_or_else(|| Error::Domain(format!("no spike at index {spike_index}")))?;
    let m = pop.spiked_dims();
    match spec {
        ModelSpec::Covariance { p, n, .. } => {
            let c1 = effective_p(*p, m, centering) as f64 / *n as f64;
            let law = SpectralLaw::Discrete(pop.bulk.clone());
            let s = theta1(&law, c1, spike.value)?;
            Ok(SpikeTheory { center: s.lambda_c, scale: s.theta1 })
        }
        ModelSpec::Fisher { p, n1, n2, .. } => {
            let pe = effective_p(*p, m, centering) as f64;
            let law = SpectralLaw::Discrete(pop.bulk.clone());
            let s = theta2(&law, pe / *n1 as f64, pe / *n2 as f64, spike.value)?;
            Ok(SpikeTheory { center: s.lambda, scale: s.theta2 })
        }
        ModelSpec::Cca { p, q, n, .. } => {
            let pe = effective_p(*p, m, centering);
            let chain = CcaChain::new(pe, *q, *n, pop.bulk.clone())?;
            let s = eta(&chain, spike.value)?;
            Ok(SpikeTheory { center: s.stages.t, scale: s.eta })
        }
    }
}

fn standardize(spec: &ModelSpec, theory: &SpikeTheory, observed: f64) -> f64 {
    match spec {
        ModelSpec::Covariance { n, field, .. } => {
            standardize_cov(observed, *n, theory.center, theory.scale, *field)
        }
        ModelSpec::Fisher { n1, field, .. } => {
            standardize_fisher(observed, *n1, theory.center, theory.scale, *field)
        }
        ModelSpec::Cca { q, field, .. } => {
            standardize_cca(observed, *q, theory.center, theory.scale, *field)
        }
    }
}

/// Replicated standardized statistics for one simple spike.
#[derive(Debug, Clone)]
pub struct CltSummary {
    pub spike_index: usize,
    pub spike_value: f64,
    pub centering: Centering,
    pub theory: SpikeTheory,
    /// Standardized statistics in replication order.
    pub gamma: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub ks: KsResult,
    pub reps: usize,
    pub seed: u64,
}

/// Standardized spike statistics with the default adjusted centering.
pub fn run_clt(spec: &ModelSpec, spike_index: usize, reps: usize, seed: u64) -> Result<CltSummary> {
    run_clt_with(spec, spike_index, reps, seed, Centering::default())
}

pub fn run_clt_with(
    spec: &ModelSpec,
    spike_index: usize,
    reps: usize,
    seed: u64,
    centering: Centering,
) -> Result<CltSummary> {
    let pop = spec.population();
    let spike = pop
        .spikes
        .get(spike_index)
        .ok_or_else(|| Error::Domain(format!("no spike at index {spike_index}")))?
        .clone();
    if spike.multiplicity != 1 {
        return Err(Error::Domain(format!(
            "spike at index {spike_index} has multiplicity {}; use the pair mode",
            spike.multiplicity
        )));
    }
    let theory = spike_theory(spec, spike_index, centering)?;
    let rank = spike.rank_set.start;
    let gamma: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let eigs = spectrum_with_rng(spec, &mut rep_rng(seed, rep))?;
            Ok(standardize(spec, &theory, eigs[rank]))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, variance) = mean_var(&gamma);
    let ks = ks_normal(&gamma)?;
    Ok(CltSummary {
        spike_index,
        spike_value: spike.value,
        centering,
        theory,
        gamma,
        mean,
        variance,
        ks,
        reps,
        seed,
    })
}

/// Joint statistics for one multiplicity-2 spike block against a brute-force
/// 2x2 Gaussian-ensemble reference sample.
#[derive(Debug, Clone)]
pub struct PairSummary {
    pub spike_index: usize,
    pub spike_value: f64,
    pub centering: Centering,
    pub theory: SpikeTheory,
    /// Standardized (upper, lower) pairs in replication order.
    pub pairs: Vec<(f64, f64)>,
    /// Reference eigenvalue pairs of the 2x2 ensemble.
    pub reference: Vec<(f64, f64)>,
    /// Two-sample planar Kolmogorov distance between the two clouds.
    pub distance: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Pair mode with the default centering and a 20000-draw reference sample.
pub fn run_pair_clt(spec: &ModelSpec, spike_index: usize, reps: usize, seed: u64) -> Result<PairSummary> {
    run_pair_clt_with(spec, spike_index, reps, seed, Centering::default(), 20_000)
}

pub fn run_pair_clt_with(
    spec: &ModelSpec,
    spike_index: usize,
    reps: usize,
    seed: u64,
    centering: Centering,
    reference_count: usize,
) -> Result<PairSummary> {
    let pop = spec.population();
    let spike = pop
        .spikes
        .get(spike_index)
        .ok_or_else(|| Error::Domain(format!("no spike at index {spike_index}")))?
        .clone();
    if spike.multiplicity != 2 {
        return Err(Error::Domain(format!(
            "pair mode needs multiplicity 2, spike has {}",
            spike.multiplicity
        )));
    }
    let theory = spike_theory(spec, spike_index, centering)?;
    let (hi, lo) = (spike.rank_set.start, spike.rank_set.start + 1);
    let pairs: Vec<(f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let eigs = spectrum_with_rng(spec, &mut rep_rng(seed, rep))?;
            Ok((
                standardize(spec, &theory, eigs[hi]),
                standardize(spec, &theory, eigs[lo]),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    // reference stream is disjoint from every replication stream
    let mut ref_rng = rep_rng(seed, u64::MAX);
    let complex_field = spec.field() == Field::Complex;
    let reference: Vec<(f64, f64)> = (0..reference_count)
        .map(|_| gaussian_pair_sample(&mut ref_rng, complex_field))
        .collect();
    let distance = ks2d_two_sample(&pairs, &reference)?;
    Ok(PairSummary {
        spike_index,
        spike_value: spike.value,
        centering,
        theory,
        pairs,
        reference,
        distance,
        reps,
        seed,
    })
}

/// Estimate one spike block from one spectrum, averaging the block's sample
/// eigenvalues (after any scale transform) before inverting.
pub fn block_estimate(spec: &ModelSpec, eigs: &[f64], spike: &SpikeSpec) -> Result<f64> {
    let k = spike.rank_set.start;
    let block_mean = |vals: &[f64]| -> f64 {
        let s: f64 = spike.rank_set.clone().map(|r| vals[r]).sum();
        s / spike.multiplicity as f64
    };
    match spec {
        ModelSpec::Covariance { p, n, .. } => {
            let mut adj = eigs.to_vec();
            let m = block_mean(eigs);
            for r in spike.rank_set.clone() {
                adj[r] = m;
            }
            Ok(estimate_spike_cov_with(&adj, k, *p, *n, DEFAULT_EXCLUSION_THRESHOLD)?.estimate)
        }
        ModelSpec::Fisher { p, n1, n2, .. } => {
            let mut adj = eigs.to_vec();
            let m = block_mean(eigs);
            for r in spike.rank_set.clone() {
                adj[r] = m;
            }
            Ok(estimate_spike_fisher_with(
                &adj,
                k,
                *p,
                *n1,
                *n2,
                DEFAULT_EXCLUSION_THRESHOLD,
                PlugInSign::Minus,
            )?
            .estimate)
        }
        ModelSpec::Cca { p, q, n, .. } => {
            let mut scaled = Vec::with_capacity(eigs.len());
            for &l in eigs {
                scaled.push(g_map(l, *q, *n)?);
            }
            let m = block_mean(&scaled);
            for r in spike.rank_set.clone() {
                scaled[r] = m;
            }
            let a_hat = estimate_spike_fisher_with(
                &scaled,
                k,
                *p,
                *q,
                *n - *q,
                DEFAULT_EXCLUSION_THRESHOLD,
                PlugInSign::Minus,
            )?
            .estimate;
            correlation_from_spike(a_hat, *q, *n)
        }
    }
}

/// Accuracy of one spike block's estimator at one design point.
#[derive(Debug, Clone)]
pub struct MseCell {
    pub kind: &'static str,
    pub p: usize,
    pub spike_index: usize,
    /// True population value the estimator targets.
    pub spike_value: f64,
    pub estimate_mean: f64,
    pub mse: f64,
    pub reps: usize,
}

#[derive(Debug, Clone)]
pub struct MseSummary {
    pub cells: Vec<MseCell>,
    pub seed: u64,
}

/// Replicated estimator errors for every spike block of every design.
///
/// Stream layout: design index in the high bits, replication in the low, so
/// adding designs never reshuffles earlier ones.
pub fn run_mse(designs: &[(ModelSpec, usize)], seed: u64) -> Result<MseSummary> {
    let mut cells = Vec::new();
    for (idx, (spec, reps)) in designs.iter().enumerate() {
        let spikes = spec.population().spikes.clone();
        if spikes.is_empty() {
            return Err(Error::Config("design has no spikes to estimate".into()));
        }
        let per_rep: Vec<Vec<f64>> = (0..*reps as u64)
            .into_par_iter()
            .map(|rep| {
                let stream = ((idx as u64) << 32) | rep;
                let eigs = spectrum_with_rng(spec, &mut rep_rng(seed, stream))?;
                spikes.iter().map(|s| block_estimate(spec, &eigs, s)).collect()
            })
            .collect::<Result<Vec<_>>>()?;
        for (si, spike) in spikes.iter().enumerate() {
            let truth = spike.value;
            let ests: Vec<f64> = per_rep.iter().map(|r| r[si]).collect();
            let mse = ests.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / ests.len() as f64;
            let mean = ests.iter().sum::<f64>() / ests.len() as f64;
            cells.push(MseCell {
                kind: spec.kind_name(),
                p: spec.p(),
                spike_index: si,
                spike_value: truth,
                estimate_mean: mean,
                mse,
                reps: *reps,
            });
        }
    }
    Ok(MseSummary { cells, seed })
}

/// Bulk density and CDF of a limit law on a grid, from the imaginary part of
/// its transform just above the real axis. The CDF is the trapezoid integral
/// normalized to end at one.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
}

fn curve_from(xs: Vec<f64>, density: Vec<f64>) -> Result<DensityCurve> {
    let mut cdf = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (xs[i] - xs[i - 1]);
    }
    let total = *cdf.last().unwrap_or(&0.0);
    if total <= 0.0 {
        return Err(Error::Domain("density integrates to zero on the grid".into()));
    }
    for c in &mut cdf {
        *c /= total;
    }
    Ok(DensityCurve { xs, density, cdf })
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(hi > lo) || points < 2 {
        return Err(Error::Config(format!(
            "need an increasing grid with at least 2 points, got [{lo}, {hi}] x {points}"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

const LSD_EPS: f64 = 5e-4;

/// Bulk density of the signal-plus-noise covariance ensemble on [lo, hi].
pub fn lsd_curve_cov(
    bulk: &DiscreteMeasure,
    c1: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<DensityCurve> {
    let law = SpectralLaw::Discrete(bulk.clone());
    let xs = grid(lo, hi, points)?;
    let density = xs
        .iter()
        .map(|&x| {
            let m = crate::stieltjes::solve_m2_complex(&law, c1, Complex::new(x, LSD_EPS))?;
            Ok((m.im / std::f64::consts::PI).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    curve_from(xs, density)
}

/// Bulk density of the Fisher-type ratio ensemble on [lo, hi].
pub fn lsd_curve_fisher(
    bulk: &DiscreteMeasure,
    c1: f64,
    c2: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<DensityCurve> {
    let law = SpectralLaw::Discrete(bulk.clone());
    let xs = grid(lo, hi, points)?;
    let density = xs
        .iter()
        .map(|&x| {
            let m = crate::stieltjes::solve_m3_complex(&law, c1, c2, Complex::new(x, LSD_EPS))?;
            Ok((m.im / std::f64::consts::PI).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    curve_from(xs, density)
}

/// Bulk density of squared sample canonical correlations on [lo, hi] inside
/// (0, 1): the Fisher-scale bulk law pushed through the correlation map.
pub fn lsd_curve_cca(chain: &CcaChain, lo: f64, hi: f64, points: usize) -> Result<DensityCurve> {
    if !(0.0 < lo && hi < 1.0) {
        return Err(Error::Config(format!(
            "squared-correlation grid must sit inside (0, 1), got [{lo}, {hi}]"
        )));
    }
    let (_, q, n) = chain.dims();
    let scale = (n - q) as f64 / q as f64;
    let xs = grid(lo, hi, points)?;
    let density = xs
        .iter()
        .map(|&y| {
            let x = scale * y / (1.0 - y);
            let m = crate::stieltjes::solve_m3_complex(
                chain.noise_law(),
                chain.c3(),
                chain.c4(),
                Complex::new(x, LSD_EPS),
            )?;
            let jac = scale / ((1.0 - y) * (1.0 - y));
            Ok((m.im / std::f64::consts::PI * jac).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    curve_from(xs, density)
}

/// Kolmogorov distance between an eigenvalue sample and a limit CDF curve,
/// interpolating the curve linearly.
pub fn esd_distance(eigs: &[f64], curve: &DensityCurve) -> Result<f64> {
    if eigs.is_empty() {
        return Err(Error::InsufficientData("no eigenvalues".into()));
    }
    let cdf_at = |x: f64| -> f64 {
        let xs = &curve.xs;
        if x <= xs[0] {
            return 0.0;
        }
        if x >= *xs.last().unwrap() {
            return 1.0;
        }
        let i = xs.partition_point(|&g| g < x);
        let (x0, x1) = (xs[i - 1], xs[i]);
        let (f0, f1) = (curve.cdf[i - 1], curve.cdf[i]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    };
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf_at(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Covariance accuracy-study design: dimension p with p/3 samples (rounded),
/// unit bulk filling the representable rank and zeros beyond it.
pub fn study_design_cov(p: usize, field: Field) -> Result<ModelSpec> {
    let n = ((p as f64) / 3.0).round() as usize;
    let spiked = 3usize;
    let rank = p.min(n);
    if rank <= spiked {
        return Err(Error::Config(format!("p={p} too small for the study design")));
    }
    let ones = (rank - spiked) as f64;
    let zeros = (p - rank) as f64;
    let bulk = if zeros > 0.0 {
        DiscreteMeasure::new(vec![(1.0, ones), (0.0, zeros)])?
    } else {
        DiscreteMeasure::point_mass(1.0)
    };
    ModelSpec::covariance(p, n, &[(10.0, 1), (7.5, 2)], bulk, field)
}

/// Fisher accuracy-study design: (p, 6p, 18p) with unit bulk.
pub fn study_design_fisher(p: usize, field: Field) -> Result<ModelSpec> {
    ModelSpec::fisher(p, 6 * p, 18 * p, &[(10.0, 1), (7.5, 2)], DiscreteMeasure::point_mass(1.0), field)
}

/// Paired-block accuracy-study design: (p, 3p, 9p) over squared correlations
/// 10/11 and 15/17 above a 1/2 bulk; `multiple_roots` doubles the second.
pub fn study_design_cca(p: usize, field: Field, multiple_roots: bool) -> Result<ModelSpec> {
    let second_mult = if multiple_roots { 2 } else { 1 };
    ModelSpec::cca(
        p,
        3 * p,
        9 * p,
        &[(10.0 / 11.0, 1), (15.0 / 17.0, second_mult)],
        DiscreteMeasure::point_mass(0.5),
        field,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta1() -> DiscreteMeasure {
        DiscreteMeasure::point_mass(1.0)
    }

    #[test]
    fn xi_diagonal_matches_hand_values() {
        let spec = ModelSpec::covariance(5, 10, &[(10.0, 1), (7.5, 1)], delta1(), Field::Real).unwrap();
        let eigs = spec.population_eigenvalues().unwrap();
        assert_eq!(eigs, vec![10.0, 7.5, 1.0, 1.0, 1.0]);
        let xi = make_xi(&eigs, 5, 10).unwrap();
        let expect = [10.0, 75.0_f64.sqrt(), 10.0_f64.sqrt(), 10.0_f64.sqrt(), 10.0_f64.sqrt()];
        for (i, e) in expect.iter().enumerate() {
            assert!((xi[(i, i)] - e).abs() < 1e-12);
        }
        assert!((xi[(1, 1)] - 8.6603).abs() < 1e-4);
        assert!((xi[(2, 2)] - 3.1623).abs() < 1e-4);
        // construction identity: the signal matrix has exactly the prescribed spectrum
        let c = &xi * xi.transpose() / 10.0;
        let ev = sym_eigenvalues_desc(&c).unwrap();
        for (a, b) in ev.iter().zip(&eigs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_rejects_count_mismatch_and_hidden_rank() {
        assert!(matches!(make_xi(&[1.0; 4], 5, 10), Err(Error::Config(_))));
        // 6 nonzero eigenvalues cannot fit a 6x4 factor
        assert!(matches!(make_xi(&[1.0; 6], 6, 4), Err(Error::Config(_))));
        let mut eigs = vec![0.0; 6];
        eigs[0] = 2.0;
        assert!(make_xi(&eigs, 6, 4).is_ok());
    }

    #[test]
    fn model_validation_rejects_bad_dimensions() {
        assert!(ModelSpec::covariance(0, 5, &[], delta1(), Field::Real).is_err());
        assert!(ModelSpec::fisher(10, 30, 10, &[], delta1(), Field::Real).is_err());
        assert!(ModelSpec::cca(6, 4, 100, &[], DiscreteMeasure::point_mass(0.5), Field::Real).is_err());
        assert!(ModelSpec::cca(4, 6, 10, &[], DiscreteMeasure::point_mass(0.5), Field::Real).is_err());
        // squared correlations must stay inside [0, 1)
        assert!(ModelSpec::cca(4, 6, 30, &[(1.2, 1)], DiscreteMeasure::point_mass(0.5), Field::Real).is_err());
        // all-ones bulk is unrepresentable when p exceeds n
        assert!(ModelSpec::covariance(10, 4, &[], delta1(), Field::Real).is_err());
    }

    #[test]
    fn bulk_counts_must_be_integers() {
        let bulk = DiscreteMeasure::new(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let spec = ModelSpec::covariance(5, 10, &[], bulk, Field::Real);
        assert!(matches!(spec, Err(Error::Config(_))));
    }

    #[test]
    fn fill_order_is_row_major() {
        let mut rng = rep_rng(9, 0);
        let m = fill_real(&mut rng, 2, 3);
        let mut rng2 = rep_rng(9, 0);
        let dist = Normal::new(0.0, 1.0).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let v: f64 = dist.sample(&mut rng2);
                assert_eq!(m[(i, j)], v, "entry ({i},{j}) out of fill order");
            }
        }
    }

    #[test]
    fn zero_correlation_spectra_stay_in_the_unit_interval() {
        let spec = ModelSpec::cca(4, 6, 40, &[], DiscreteMeasure::point_mass(0.0), Field::Real).unwrap();
        for seed in [1u64, 2, 3] {
            let ev = sample_spectrum(&spec, seed).unwrap();
            assert_eq!(ev.len(), 4);
            assert!(ev.iter().all(|&l| (0.0..1.0).contains(&l)), "{ev:?}");
            assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        }
        let complex = ModelSpec::cca(4, 6, 40, &[], DiscreteMeasure::point_mass(0.0), Field::Complex).unwrap();
        let ev = sample_spectrum(&complex, 1).unwrap();
        assert!(ev.iter().all(|&l| (0.0..1.0).contains(&l)), "{ev:?}");
    }

    #[test]
    fn nonnegative_spectra_for_ratio_ensembles() {
        let spec = ModelSpec::fisher(8, 40, 60, &[(5.0, 1)], delta1(), Field::Real).unwrap();
        let ev = sample_spectrum(&spec, 4).unwrap();
        assert_eq!(ev.len(), 8);
        assert!(ev.iter().all(|&l| l >= 0.0));
        let complex = ModelSpec::fisher(8, 40, 60, &[(5.0, 1)], delta1(), Field::Complex).unwrap();
        assert!(sample_spectrum(&complex, 4).unwrap().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = ModelSpec::covariance(12, 60, &[(6.0, 1)], delta1(), Field::Real).unwrap();
        let a = sample_spectrum(&spec, 11).unwrap();
        let b = sample_spectrum(&spec, 11).unwrap();
        let c = sample_spectrum(&spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn clt_results_do_not_depend_on_thread_count() {
        let spec = ModelSpec::covariance(30, 300, &[(10.0, 1)], delta1(), Field::Real).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_clt(&spec, 0, 60, 77).unwrap())
        };
        let a = run(1);
        let b = run(2);
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.ks.distance.to_bits(), b.ks.distance.to_bits());
    }

    #[test]
    fn clt_smoke_covariance_and_fisher() {
        let spec = ModelSpec::covariance(60, 600, &[(10.0, 1), (7.5, 1)], delta1(), Field::Real).unwrap();
        let s = run_clt(&spec, 0, 150, 5).unwrap();
        assert!(s.mean.abs() < 0.3, "mean {}", s.mean);
        assert!((0.6..1.5).contains(&s.variance), "variance {}", s.variance);
        let fisher = ModelSpec::fisher(60, 600, 300, &[(10.0, 1), (7.5, 1)], delta1(), Field::Real).unwrap();
        let f = run_clt(&fisher, 1, 150, 5).unwrap();
        assert!(f.mean.abs() < 0.35, "mean {}", f.mean);
        assert!((0.6..1.5).contains(&f.variance), "variance {}", f.variance);
    }

    #[test]
    fn clt_rejects_blocks_and_pair_mode_rejects_singles() {
        let spec =
            ModelSpec::covariance(30, 300, &[(10.0, 1), (7.5, 2)], delta1(), Field::Real).unwrap();
        assert!(matches!(run_clt(&spec, 1, 50, 1), Err(Error::Domain(_))));
        assert!(matches!(run_pair_clt(&spec, 0, 50, 1), Err(Error::Domain(_))));
        assert!(matches!(run_clt(&spec, 5, 50, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn mse_runs_and_orders_streams_stably() {
        let spec = ModelSpec::covariance(40, 200, &[(10.0, 1), (7.5, 2)], delta1(), Field::Real).unwrap();
        let one = run_mse(&[(spec.clone(), 30)], 3).unwrap();
        let two = run_mse(&[(spec.clone(), 30), (spec, 10)], 3).unwrap();
        // first design's cells unchanged when a second design is appended
        assert_eq!(one.cells[0].mse.to_bits(), two.cells[0].mse.to_bits());
        assert_eq!(one.cells[1].mse.to_bits(), two.cells[1].mse.to_bits());
        assert!(one.cells[0].mse.is_finite());
        // estimates track the true spikes loosely even at tiny dims
        assert!((one.cells[0].estimate_mean - 10.0).abs() < 1.5);
        assert!((one.cells[1].estimate_mean - 7.5).abs() < 1.5);
    }

    #[test]
    fn study_designs_validate() {
        let cov = study_design_cov(100, Field::Real).unwrap();
        assert_eq!(cov.p(), 100);
        let eigs = cov.population_eigenvalues().unwrap();
        assert_eq!(eigs.iter().filter(|&&l| l == 0.0).count(), 67);
        assert_eq!(eigs.iter().filter(|&&l| l == 1.0).count(), 30);
        assert_eq!(eigs[0], 10.0);
        study_design_fisher(100, Field::Real).unwrap();
        study_design_cca(100, Field::Real, true).unwrap();
        study_design_cca(100, Field::Real, false).unwrap();
    }

    #[test]
    fn density_curve_integrates_to_one_and_tracks_support() {
        let curve = lsd_curve_cov(&delta1(), 0.1, 0.2, 3.6, 300).unwrap();
        assert!((curve.cdf.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(curve.density.iter().all(|&d| d >= 0.0));
        // mass concentrates inside the bulk, none far outside
        assert!(curve.density[0] < 0.05);
        assert!(curve.density[299] < 0.05);
        let peak = curve.density.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.3, "peak {peak}");
    }

    #[test]
    fn correlation_density_matches_a_large_sample() {
        let chain = CcaChain::new(40, 60, 400, DiscreteMeasure::point_mass(0.0)).unwrap();
        let curve = lsd_curve_cca(&chain, 0.002, 0.7, 350).unwrap();
        assert!((curve.cdf.last().unwrap() - 1.0).abs() < 1e-12);
        let spec =
            ModelSpec::cca(40, 60, 400, &[], DiscreteMeasure::point_mass(0.0), Field::Real).unwrap();
        let mut eigs = Vec::new();
        for seed in 0..6 {
            eigs.extend(sample_spectrum(&spec, seed).unwrap());
        }
        let d = esd_distance(&eigs, &curve).unwrap();
        assert!(d < 0.08, "Kolmogorov distance {d}");
    }

    #[test]
    fn pair_mode_produces_ordered_pairs() {
        let spec =
            ModelSpec::covariance(30, 300, &[(10.0, 2)], delta1(), Field::Real).unwrap();
        let s = run_pair_clt_with(&spec, 0, 40, 9, Centering::default(), 500).unwrap();
        assert_eq!(s.pairs.len(), 40);
        assert!(s.pairs.iter().all(|(a, b)| a >= b));
        assert!(s.distance <= 1.0 && s.distance >= 0.0);
    }
}
