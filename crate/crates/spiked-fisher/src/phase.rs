//! Spike-limit maps for the three ensembles and the phase checks that decide
//! whether a population spike separates from the bulk.
//!
//! Covariance spikes map through ψ_C, Fisher spikes through ψ_F ∘ ψ_C, and
//! squared canonical correlations through the chain f → ψ_Ξ → ψ_C → ψ_F → g⁻¹
//! wrapped in [`CcaChain`]. Every map runs on the finite-sample ratios the
//! caller supplies; nothing here draws randomness.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::measure::{AspectRatios, DiscreteMeasure};
use crate::stieltjes::{derivative, solve_m2, SpectralLaw, DEFAULT_TOL};

/// Strict-positivity margin for the numerical ψ′ checks. A derivative within
/// this of zero classifies the spike as critical instead of valid or invalid.
pub const PHASE_MARGIN: f64 = 1e-8;

/// Default pairwise separation floor for spike lists, as min |hi/lo − 1|.
pub const DEFAULT_SEPARATION: f64 = 0.01;

/// Sign of the shift term (1 − c)·(1 − c·m₁(a)) in [`psi_cov`].
///
/// The variants coincide when c = 1, where the shift vanishes. `Sum` is the
/// covariance-ensemble map and the only variant whose chain output matches
/// the zero-bulk closed form [`phi_zero_case`] at unequal dimension ratios.
/// [`CcaChain`] nevertheless defaults to `Difference`, the form its stated
/// equations carry; callers in the unequal-ratio regime who trust the closed
/// form should construct the chain with [`CcaChain::with_form`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsiForm {
    #[default]
    Sum,
    Difference,
}

impl PsiForm {
    fn sign(self) -> f64 {
        match self {
            PsiForm::Sum => 1.0,
            PsiForm::Difference => -1.0,
        }
    }
}

fn check_unit(c: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Config(format!("{name}={c} outside [0,1]")));
    }
    Ok(())
}

/// Covariance-scale spike limit ψ_C(a) = a·u² ± (1−c₁)·u with
/// u = 1 − c₁·m₁(a) and m₁ the Stieltjes transform of the bulk.
///
/// `a` must lie outside the bulk support.
pub fn psi_cov(law: &SpectralLaw, c1: f64, a: f64, form: PsiForm) -> Result<f64> {
    check_unit(c1, "c1")?;
    let u = 1.0 - c1 * law.st_real(a)?;
    Ok(a * u * u + form.sign() * (1.0 - c1) * u)
}

/// d/da of [`psi_cov`] by Richardson-extrapolated central differences.
pub fn psi_cov_prime(law: &SpectralLaw, c1: f64, a: f64, form: PsiForm) -> Result<f64> {
    derivative(|x| psi_cov(law, c1, x, form), a)
}

/// Fisher-scale spike limit ψ_F(x) = x / (1 + c₂·x·m₂(x)).
///
/// `x` is a covariance-scale value outside the covariance-ensemble support.
pub fn psi_fisher(law: &SpectralLaw, c1: f64, c2: f64, x: f64) -> Result<f64> {
    check_unit(c2, "c2")?;
    let m2 = solve_m2(law, c1, x, DEFAULT_TOL)?.value;
    let den = 1.0 + c2 * x * m2;
    if den.abs() < 1e-12 {
        return Err(Error::Singular(format!("psi_F denominator vanishes at x={x}")));
    }
    Ok(x / den)
}

/// d/dx of [`psi_fisher`].
pub fn psi_fisher_prime(law: &SpectralLaw, c1: f64, c2: f64, x: f64) -> Result<f64> {
    derivative(|v| psi_fisher(law, c1, c2, v), x)
}

/// One population spike: the spiked value (covariance/Fisher scale a, or a
/// squared canonical correlation α ∈ (0,1)), its multiplicity, and the
/// zero-based positions its sample eigenvalues occupy in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSpec {
    pub value: f64,
    pub multiplicity: usize,
    pub rank_set: Range<usize>,
}

impl SpikeSpec {
    /// A single simple spike occupying the top rank.
    pub fn solitary(value: f64) -> Result<Self> {
        Ok(build_spike_set(&[(value, 1)], DEFAULT_SEPARATION)?.remove(0))
    }
}

/// Validate a spike list and assign rank sets.
///
/// Values must be finite and positive; after descending sort every adjacent
/// pair must satisfy hi/lo − 1 > `separation` (adjacent pairs realize the
/// pairwise minimum on a sorted list). Rank sets come out consecutive from 0.
pub fn build_spike_set(entries: &[(f64, usize)], separation: f64) -> Result<Vec<SpikeSpec>> {
    if entries.is_empty() {
        return Err(Error::Config("spike list is empty".into()));
    }
    if !(separation > 0.0) {
        return Err(Error::Config(format!("separation {separation} must be positive")));
    }
    for &(v, m) in entries {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Config(format!("spike value {v} not finite positive")));
        }
        if m == 0 {
            return Err(Error::Config(format!("spike {v} has multiplicity 0")));
        }
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for w in sorted.windows(2) {
        let (hi, lo) = (w[0].0, w[1].0);
        if hi / lo - 1.0 <= separation {
            return Err(Error::Config(format!(
                "spikes {hi} and {lo} violate the separation floor {separation}"
            )));
        }
    }
    let mut out = Vec::with_capacity(sorted.len());
    let mut next = 0usize;
    for (value, multiplicity) in sorted {
        out.push(SpikeSpec { value, multiplicity, rank_set: next..next + multiplicity });
        next += multiplicity;
    }
    Ok(out)
}

/// Phase classification of one spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseClass {
    /// Every map derivative along the chain exceeds [`PHASE_MARGIN`].
    Valid,
    /// Some derivative sits within [`PHASE_MARGIN`] of zero, none below.
    Critical,
    /// A derivative is negative beyond the margin, or a stage failed.
    Invalid,
}

/// Limit values and phase verdict for one spike.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeLimitReport {
    pub value: f64,
    pub multiplicity: usize,
    /// ψ_C image; Ψ_C for the canonical-correlation chain.
    pub lambda_c: Option<f64>,
    /// ψ_F image; Ψ for the canonical-correlation chain.
    pub lambda: Option<f64>,
    /// f(α), canonical-correlation chain only.
    pub f_alpha: Option<f64>,
    /// ψ_Ξ(f(α)), canonical-correlation chain only.
    pub psi_xi: Option<f64>,
    /// g⁻¹(Ψ), the squared-correlation limit, canonical-correlation chain only.
    pub t: Option<f64>,
    pub class: PhaseClass,
    /// Stage-tagged diagnostics: derivatives checked and failures hit.
    pub notes: Vec<String>,
}

impl SpikeLimitReport {
    pub fn is_valid(&self) -> bool {
        self.class == PhaseClass::Valid
    }

    fn bare(spike: &SpikeSpec) -> Self {
        SpikeLimitReport {
            value: spike.value,
            multiplicity: spike.multiplicity,
            lambda_c: None,
            lambda: None,
            f_alpha: None,
            psi_xi: None,
            t: None,
            class: PhaseClass::Invalid,
            notes: Vec::new(),
        }
    }
}

/// Conjunction of strict-positivity checks over the chain derivatives.
fn classify(derivs: &[(&str, f64)], notes: &mut Vec<String>) -> PhaseClass {
    let mut class = PhaseClass::Valid;
    for &(stage, d) in derivs {
        notes.push(format!("{stage}' = {d:.6e}"));
        if !d.is_finite() || d < -PHASE_MARGIN {
            class = PhaseClass::Invalid;
        } else if d <= PHASE_MARGIN && class == PhaseClass::Valid {
            class = PhaseClass::Critical;
        }
    }
    class
}

/// Phase check and limit for one covariance spike: ψ_C(a) with the verdict
/// taken from the sign of ψ_C′(a).
pub fn assess_spike_cov(
    law: &SpectralLaw,
    c1: f64,
    spike: &SpikeSpec,
    form: PsiForm,
) -> Result<SpikeLimitReport> {
    check_unit(c1, "c1")?;
    let mut rep = SpikeLimitReport::bare(spike);
    match psi_cov(law, c1, spike.value, form) {
        Ok(v) => rep.lambda_c = Some(v),
        Err(e) => {
            rep.notes.push(format!("psi_C: {e}"));
            return Ok(rep);
        }
    }
    match psi_cov_prime(law, c1, spike.value, form) {
        Ok(d) => rep.class = classify(&[("psi_C", d)], &mut rep.notes),
        Err(e) => rep.notes.push(format!("psi_C': {e}")),
    }
    Ok(rep)
}

/// Phase check and limits for one Fisher spike: λC = ψ_C(a), λ = ψ_F(λC),
/// with the verdict from the signs of ψ_C′(a) and ψ_F′(λC).
pub fn fisher_spike_limit(
    law: &SpectralLaw,
    c1: f64,
    c2: f64,
    spike: &SpikeSpec,
    form: PsiForm,
) -> Result<SpikeLimitReport> {
    check_unit(c1, "c1")?;
    check_unit(c2, "c2")?;
    let mut rep = SpikeLimitReport::bare(spike);
    let lam_c = match psi_cov(law, c1, spike.value, form) {
        Ok(v) => {
            rep.lambda_c = Some(v);
            v
        }
        Err(e) => {
            rep.notes.push(format!("psi_C: {e}"));
            return Ok(rep);
        }
    };
    let d_cov = match psi_cov_prime(law, c1, spike.value, form) {
        Ok(d) => d,
        Err(e) => {
            rep.notes.push(format!("psi_C': {e}"));
            return Ok(rep);
        }
    };
    if d_cov <= PHASE_MARGIN {
        // the Fisher stage has no meaning below the first-stage threshold
        rep.class = classify(&[("psi_C", d_cov)], &mut rep.notes);
        return Ok(rep);
    }
    match psi_fisher(law, c1, c2, lam_c) {
        Ok(v) => rep.lambda = Some(v),
        Err(e) => {
            classify(&[("psi_C", d_cov)], &mut rep.notes);
            rep.class = PhaseClass::Invalid;
            rep.notes.push(format!("psi_F at {lam_c:.6}: {e}"));
            return Ok(rep);
        }
    }
    match psi_fisher_prime(law, c1, c2, lam_c) {
        Ok(d_fish) => {
            rep.class = classify(&[("psi_C", d_cov), ("psi_F", d_fish)], &mut rep.notes);
        }
        Err(e) => {
            classify(&[("psi_C", d_cov)], &mut rep.notes);
            rep.class = PhaseClass::Invalid;
            rep.notes.push(format!("psi_F': {e}"));
        }
    }
    Ok(rep)
}

/// Fisher-scale transform of a squared canonical correlation:
/// g(λ²) = (n−q)·λ² / (q·(1−λ²)).
pub fn g_map(lambda_sq: f64, q: usize, n: usize) -> Result<f64> {
    check_cca_dims(q, n)?;
    if !(0.0..1.0).contains(&lambda_sq) {
        return Err(Error::Domain(format!("lambda^2={lambda_sq} outside [0,1)")));
    }
    Ok((n - q) as f64 * lambda_sq / (q as f64 * (1.0 - lambda_sq)))
}

/// Inverse of [`g_map`]: g⁻¹(l) = l·q / ((n−q) + l·q).
pub fn g_inv(l: f64, q: usize, n: usize) -> Result<f64> {
    check_cca_dims(q, n)?;
    if !(l >= 0.0) {
        return Err(Error::Domain(format!("l={l} negative or NaN")));
    }
    Ok(l * q as f64 / ((n - q) as f64 + l * q as f64))
}

fn check_cca_dims(q: usize, n: usize) -> Result<()> {
    if q == 0 || q >= n {
        return Err(Error::Config(format!("need 0 < q < n, got q={q} n={n}")));
    }
    Ok(())
}

/// Closed-form chain limit when the bulk degenerates to a point mass at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroBulkLimit {
    /// Limit of the spiked squared sample canonical correlation.
    pub phi: f64,
    /// Detection threshold; spikes at or below it stay in the bulk.
    pub alpha_r: f64,
}

/// φ(α) = [α(1−r₁)+r₁]·[α(1−r₂)+r₂] / α and α_r = √(r₁r₂/((1−r₁)(1−r₂)))
/// for dimension ratios r₁ = p/n, r₂ = q/n.
pub fn phi_zero_case(alpha: f64, r1: f64, r2: f64) -> Result<ZeroBulkLimit> {
    for (name, r) in [("r1", r1), ("r2", r2)] {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Config(format!("{name}={r} outside [0,1)")));
        }
    }
    if alpha == 0.0 {
        return Err(Error::Pole { point: 0.0 });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha={alpha} outside (0,1)")));
    }
    let phi = (alpha * (1.0 - r1) + r1) * (alpha * (1.0 - r2) + r2) / alpha;
    let alpha_r = (r1 * r2 / ((1.0 - r1) * (1.0 - r2))).sqrt();
    Ok(ZeroBulkLimit { phi, alpha_r })
}

/// Stage values of the canonical-correlation chain at one α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcaStages {
    /// f(α)
    pub f: f64,
    /// ψ_Ξ(f(α))
    pub psi_xi: f64,
    /// Ψ_C(α), the covariance-stage image
    pub psi_c: f64,
    /// Ψ(α), the Fisher-stage image
    pub psi: f64,
    /// t(α) = g⁻¹(Ψ(α)), the squared-correlation limit
    pub t: f64,
}

/// Spike-limit chain for sample canonical correlations with dimensions
/// p ≤ q < n and a population bulk law over squared correlations in [0,1).
///
/// A spike α maps to t(α) = g⁻¹(ψ_F(ψ_C(ψ_Ξ(f(α))))). The covariance and
/// Fisher stages run at ratios p/q and p/(n−q) against the generalized
/// Marchenko-Pastur law generated by the transformed bulk, evaluated through
/// the companion fixed point rather than any density quadrature.
#[derive(Debug, Clone)]
pub struct CcaChain {
    p: usize,
    q: usize,
    n: usize,
    bulk: DiscreteMeasure,
    form: PsiForm,
    h_tilde: DiscreteMeasure,
    noise_law: SpectralLaw,
    c3: f64,
    c4: f64,
    r1: f64,
}

impl CcaChain {
    /// Chain with the default `PsiForm::Difference` covariance stage.
    pub fn new(p: usize, q: usize, n: usize, bulk: DiscreteMeasure) -> Result<Self> {
        Self::with_form(p, q, n, bulk, PsiForm::Difference)
    }

    /// Chain with an explicit ψ_C sign variant.
    pub fn with_form(
        p: usize,
        q: usize,
        n: usize,
        bulk: DiscreteMeasure,
        form: PsiForm,
    ) -> Result<Self> {
        let dims = AspectRatios::cca(p, q, n)?;
        if bulk.max_atom() >= 1.0 {
            return Err(Error::Config(format!(
                "bulk atom {} outside [0,1)",
                bulk.max_atom()
            )));
        }
        let scale = n as f64 / q as f64;
        let h_tilde = bulk.pushforward(|w| scale * w / (1.0 - w))?;
        let r1 = dims.r1();
        let noise_law = SpectralLaw::GeneralizedMp { population: h_tilde.clone(), ratio: r1 };
        Ok(CcaChain {
            p,
            q,
            n,
            bulk,
            form,
            h_tilde,
            noise_law,
            c3: dims.c3()?,
            c4: dims.c4()?,
            r1,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.p, self.q, self.n)
    }

    pub fn bulk(&self) -> &DiscreteMeasure {
        &self.bulk
    }

    pub fn form(&self) -> PsiForm {
        self.form
    }

    /// Covariance-stage ratio p/q.
    pub fn c3(&self) -> f64 {
        self.c3
    }

    /// Fisher-stage ratio p/(n−q).
    pub fn c4(&self) -> f64 {
        self.c4
    }

    /// Noise-law ratio p/n.
    pub fn r1(&self) -> f64 {
        self.r1
    }

    /// Bulk law of the covariance stage: the generalized Marchenko-Pastur
    /// law with population H̃ and ratio p/n.
    pub fn noise_law(&self) -> &SpectralLaw {
        &self.noise_law
    }

    /// Transformed bulk H̃: atoms pushed through w ↦ (n/q)·w/(1−w).
    pub fn h_tilde(&self) -> &DiscreteMeasure {
        &self.h_tilde
    }

    /// Fisher-argument rescale f(α) = (n/q)·α/(1−α).
    pub fn f(&self, alpha: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha={alpha} outside [0,1)")));
        }
        Ok((self.n as f64 / self.q as f64) * alpha / (1.0 - alpha))
    }

    /// Noncentrality map ψ_Ξ(x) = x·(1 + (p/n)·∫ t/(x−t) dH̃(t)).
    pub fn psi_xi(&self, x: f64) -> Result<f64> {
        let mut s = 0.0;
        for &(t, w) in self.h_tilde.atoms() {
            let d = x - t;
            if d.abs() < 1e-12 * (1.0 + t.abs()) {
                return Err(Error::Pole { point: x });
            }
            s += w * t / d;
        }
        Ok(x * (1.0 + self.r1 * s))
    }

    /// Run the full chain at α; errors name the failing stage.
    pub fn spike_limit(&self, alpha: f64) -> Result<CcaStages> {
        let f = self.f(alpha)?;
        let psi_xi = self
            .psi_xi(f)
            .map_err(|e| Error::Domain(format!("psi_Xi stage: {e}")))?;
        let psi_c = psi_cov(&self.noise_law, self.c3, psi_xi, self.form)
            .map_err(|e| Error::Domain(format!("psi_C stage: {e}")))?;
        let psi = psi_fisher(&self.noise_law, self.c3, self.c4, psi_c)
            .map_err(|e| Error::Domain(format!("psi_F stage: {e}")))?;
        let t = g_inv(psi, self.q, self.n)?;
        Ok(CcaStages { f, psi_xi, psi_c, psi, t })
    }

    /// Phase check and limits for one α spike: chain values plus the
    /// conjunction of ψ_Ξ′, ψ_C′, ψ_F′ positivity at the visited points.
    pub fn assess(&self, spike: &SpikeSpec) -> SpikeLimitReport {
        let mut rep = SpikeLimitReport::bare(spike);
        let alpha = spike.value;
        if !(alpha > 0.0 && alpha < 1.0) {
            rep.notes.push(format!("alpha={alpha} outside (0,1)"));
            return rep;
        }
        if !self.bulk.clears_atoms(alpha, 1e-8 * (1.0 + alpha)) {
            rep.notes.push(format!("alpha={alpha} sits on a bulk atom"));
            return rep;
        }
        let stages = match self.spike_limit(alpha) {
            Ok(s) => s,
            Err(e) => {
                rep.notes.push(e.to_string());
                return rep;
            }
        };
        rep.f_alpha = Some(stages.f);
        rep.psi_xi = Some(stages.psi_xi);
        rep.lambda_c = Some(stages.psi_c);
        rep.lambda = Some(stages.psi);
        rep.t = Some(stages.t);

        let d_xi = match derivative(|x| self.psi_xi(x), stages.f) {
            Ok(d) => d,
            Err(e) => {
                rep.notes.push(format!("psi_Xi': {e}"));
                return rep;
            }
        };
        let d_cov =
            match derivative(|x| psi_cov(&self.noise_law, self.c3, x, self.form), stages.psi_xi) {
                Ok(d) => d,
                Err(e) => {
                    rep.notes.push(format!("psi_C': {e}"));
                    return rep;
                }
            };
        let d_fish = match derivative(
            |x| psi_fisher(&self.noise_law, self.c3, self.c4, x),
            stages.psi_c,
        ) {
            Ok(d) => d,
            Err(e) => {
                rep.notes.push(format!("psi_F': {e}"));
                return rep;
            }
        };
        rep.class = classify(
            &[("psi_Xi", d_xi), ("psi_C", d_cov), ("psi_F", d_fish)],
            &mut rep.notes,
        );
        rep
    }
}
