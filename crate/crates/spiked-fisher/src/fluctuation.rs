//! Variance scales for the spiked-eigenvalue fluctuation laws: θ₁ for the
//! covariance ensemble, ϑ and θ₂ for the Fisher ensemble, η with its three
//! components for sample canonical correlations, plus the standardization
//! helpers that turn a sample eigenvalue into an approximately normal score.

use crate::error::{Error, Result};
use crate::phase::{
    psi_cov, psi_cov_prime, psi_fisher_prime, CcaChain, CcaStages, PsiForm, SpikeSpec,
    PHASE_MARGIN,
};
use crate::stieltjes::{derivative, m2_prime, m3_prime, solve_m2, solve_m3, SpectralLaw, DEFAULT_TOL};

/// Sample field of the data-matrix entries.
///
/// The variance formulas here take β = 2 for real samples and β = 1 for
/// complex ones. This is the reverse of the usual β-ensemble naming; keep it
/// in mind when comparing against other random-matrix software.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Field {
    #[default]
    Real,
    Complex,
}

impl Field {
    pub fn beta(self) -> f64 {
        match self {
            Field::Real => 2.0,
            Field::Complex => 1.0,
        }
    }
}

/// Covariance-stage variance kernel, shared between θ₁ and η₁: evaluated
/// from the population spike a, its stage image λC, the stage ratio, and
/// m₂, m₂′, underline-m₂, underline-m₂′ at λC.
fn theta1_core(a: f64, lam_c: f64, c1: f64, m2: f64, m2p: f64, um2: f64, um2p: f64) -> f64 {
    let u = 1.0 + c1 * m2;
    let denom = lam_c * um2p + a * (1.0 + c1 * m2 + c1 * lam_c * m2p) / (lam_c * u * u);
    let num = um2p
        + a * a * c1 * m2p / (lam_c.powi(2) * u.powi(4))
        + 2.0 * a * (1.0 + um2 + lam_c * um2p) / (lam_c.powi(2) * u * u);
    num / (denom * denom)
}

/// Fisher-stage variance kernel, shared between ϑ and η₂.
fn vartheta_core(lam: f64, c2: f64, m3: f64, m3p: f64) -> f64 {
    1.0 + 2.0 * lam * c2 * m3 + c2 * lam * lam * m3p
}

/// θ₁ and the covariance-scale image it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceScale {
    pub lambda_c: f64,
    pub theta1: f64,
}

/// Covariance-ensemble variance scale θ₁ for a spike a above the phase
/// threshold.
pub fn theta1(law: &SpectralLaw, c1: f64, a: f64) -> Result<CovarianceScale> {
    let d = psi_cov_prime(law, c1, a, PsiForm::Sum)?;
    if d <= PHASE_MARGIN {
        return Err(Error::Domain(format!(
            "spike a={a} fails the phase condition (psi_C' = {d:.3e})"
        )));
    }
    let lam_c = psi_cov(law, c1, a, PsiForm::Sum)?;
    let m2 = solve_m2(law, c1, lam_c, DEFAULT_TOL)?.value;
    let m2p = m2_prime(law, c1, lam_c, DEFAULT_TOL)?;
    let um2 = -(1.0 - c1) / lam_c + c1 * m2;
    let um2p = (1.0 - c1) / (lam_c * lam_c) + c1 * m2p;
    let th = theta1_core(a, lam_c, c1, m2, m2p, um2, um2p);
    if !th.is_finite() || th <= 0.0 {
        return Err(Error::Domain(format!("theta1 = {th} not positive at a={a}")));
    }
    Ok(CovarianceScale { lambda_c: lam_c, theta1: th })
}

/// Fisher-ensemble variance scales for one spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherScales {
    pub lambda_c: f64,
    pub lambda: f64,
    pub theta1: f64,
    pub vartheta: f64,
    pub theta2: f64,
}

/// ϑ and θ₂ for a Fisher spike a above both stage thresholds. With c₂ = 0
/// the ensemble degenerates and θ₂ = θ₁ exactly.
pub fn theta2(law: &SpectralLaw, c1: f64, c2: f64, a: f64) -> Result<FisherScales> {
    let cov = theta1(law, c1, a)?;
    let lam_c = cov.lambda_c;
    if c2 == 0.0 {
        return Ok(FisherScales {
            lambda_c: lam_c,
            lambda: lam_c,
            theta1: cov.theta1,
            vartheta: 1.0,
            theta2: cov.theta1,
        });
    }
    if c1 == 0.0 {
        return Err(Error::Config("theta2 needs c1 > 0 when c2 > 0".into()));
    }
    let d = psi_fisher_prime(law, c1, c2, lam_c)?;
    if d <= PHASE_MARGIN {
        return Err(Error::Domain(format!(
            "spike a={a} fails the Fisher phase condition (psi_F' = {d:.3e})"
        )));
    }
    let m2 = solve_m2(law, c1, lam_c, DEFAULT_TOL)?.value;
    let m2p = m2_prime(law, c1, lam_c, DEFAULT_TOL)?;
    let den = 1.0 + c2 * lam_c * m2;
    if den.abs() < 1e-12 {
        return Err(Error::Singular(format!("psi_F denominator vanishes at x={lam_c}")));
    }
    let lam = lam_c / den;
    let m3 = solve_m3(law, c1, c2, lam, DEFAULT_TOL)?.value;
    let m3p = m3_prime(law, c1, c2, lam, DEFAULT_TOL)?;
    let vt = vartheta_core(lam, c2, m3, m3p);
    let bracket = (1.0 - c2 * lam_c * lam_c * m2p) / (1.0 + c2 * lam * m3);
    let th2 = c2 / (c1 * vt) + bracket * bracket * cov.theta1;
    for (name, v) in [("vartheta", vt), ("theta2", th2)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!("{name} = {v} not positive at a={a}")));
        }
    }
    Ok(FisherScales { lambda_c: lam_c, lambda: lam, theta1: cov.theta1, vartheta: vt, theta2: th2 })
}

/// Canonical-correlation variance scales for one spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcaScales {
    pub stages: CcaStages,
    /// m₂-type transform of the covariance stage at Ψ_C.
    pub m_c: f64,
    /// m₃-type transform of the Fisher stage at Ψ.
    pub m_f: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta: f64,
}

/// η and its components for a squared-correlation spike α. The spike must
/// pass the full chain phase check.
pub fn eta(chain: &CcaChain, alpha: f64) -> Result<CcaScales> {
    let spec = SpikeSpec { value: alpha, multiplicity: 1, rank_set: 0..1 };
    let rep = chain.assess(&spec);
    if !rep.is_valid() {
        return Err(Error::Domain(format!(
            "alpha={alpha} fails the phase conditions: {}",
            rep.notes.join("; ")
        )));
    }
    let stages = CcaStages {
        f: rep.f_alpha.unwrap(),
        psi_xi: rep.psi_xi.unwrap(),
        psi_c: rep.lambda_c.unwrap(),
        psi: rep.lambda.unwrap(),
        t: rep.t.unwrap(),
    };
    let (_, q, n) = chain.dims();
    let (c3, c4, r1) = (chain.c3(), chain.c4(), chain.r1());
    let law = chain.noise_law();
    let a_eff = stages.psi_xi;

    let m_c = solve_m2(law, c3, stages.psi_c, DEFAULT_TOL)?.value;
    let m_cp = m2_prime(law, c3, stages.psi_c, DEFAULT_TOL)?;
    let um_c = -(1.0 - c3) / stages.psi_c + c3 * m_c;
    let um_cp = (1.0 - c3) / stages.psi_c.powi(2) + c3 * m_cp;
    let eta1 = theta1_core(a_eff, stages.psi_c, c3, m_c, m_cp, um_c, um_cp);

    let m_f = solve_m3(law, c3, c4, stages.psi, DEFAULT_TOL)?.value;
    let m_fp = m3_prime(law, c3, c4, stages.psi, DEFAULT_TOL)?;
    let eta2 = vartheta_core(stages.psi, c4, m_f, m_fp);

    let psi_f_p = psi_fisher_prime(law, c3, c4, stages.psi_c)?;
    let psi_c_p = derivative(|x| psi_cov(law, c3, x, chain.form()), a_eff)?;
    // companion derivative of the stage-one noise law at the effective spike
    let um_p = derivative(|z| Ok(-(1.0 - r1) / z + r1 * law.st_real(z)?), a_eff)?;
    let eta3 = (q as f64 / n as f64) * psi_f_p.powi(2) * psi_c_p.powi(2)
        / (um_p * stages.psi.powi(2));

    let bracket = (1.0 - c4 * stages.psi_c.powi(2) * m_cp) / (1.0 + c4 * stages.psi * m_f);
    let inner = c4 / (c3 * eta2) + bracket * bracket * eta1 + eta3;
    let pref = c3.powi(2) * c4.powi(2) * stages.psi.powi(2)
        / ((c3 + c4 * stages.psi).powi(4) * stages.t * stages.t);
    let eta = inner * pref;
    for (name, v) in [("eta1", eta1), ("eta2", eta2), ("eta3", eta3), ("eta", eta)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Domain(format!("{name} = {v} not positive at alpha={alpha}")));
        }
    }
    Ok(CcaScales { stages, m_c, m_f, eta1, eta2, eta3, eta })
}

/// Variance scales for one spike in a uniform shape, with β recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    pub beta: f64,
    pub theta1: Option<f64>,
    pub vartheta: Option<f64>,
    pub theta2: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub eta3: Option<f64>,
    pub eta: Option<f64>,
}

impl VarianceReport {
    pub fn from_cov(s: CovarianceScale, field: Field) -> Self {
        VarianceReport {
            beta: field.beta(),
            theta1: Some(s.theta1),
            vartheta: None,
            theta2: None,
            eta1: None,
            eta2: None,
            eta3: None,
            eta: None,
        }
    }

    pub fn from_fisher(s: FisherScales, field: Field) -> Self {
        VarianceReport {
            beta: field.beta(),
            theta1: Some(s.theta1),
            vartheta: Some(s.vartheta),
            theta2: Some(s.theta2),
            eta1: None,
            eta2: None,
            eta3: None,
            eta: None,
        }
    }

    pub fn from_cca(s: CcaScales, field: Field) -> Self {
        VarianceReport {
            beta: field.beta(),
            theta1: None,
            vartheta: None,
            theta2: None,
            eta1: Some(s.eta1),
            eta2: Some(s.eta2),
            eta3: Some(s.eta3),
            eta: Some(s.eta),
        }
    }
}

/// Standardized covariance-spike score √n·(l/λC − 1)/√(β·θ₁).
pub fn standardize_cov(l: f64, n: usize, lambda_c: f64, theta1: f64, field: Field) -> f64 {
    (n as f64).sqrt() * (l / lambda_c - 1.0) / (field.beta() * theta1).sqrt()
}

/// Standardized Fisher-spike score √n·(l − λ)/(λ·√(β·θ₂)).
pub fn standardize_fisher(l: f64, n: usize, lambda: f64, theta2: f64, field: Field) -> f64 {
    (n as f64).sqrt() * (l - lambda) / (lambda * (field.beta() * theta2).sqrt())
}

/// Standardized squared-correlation score √q·(λ² − t)/(t·√(β·η)).
pub fn standardize_cca(lambda_sq: f64, q: usize, t: f64, eta: f64, field: Field) -> f64 {
    (q as f64).sqrt() * (lambda_sq - t) / (t * (field.beta() * eta).sqrt())
}
