//! Fixed-point solvers for the Stieltjes transforms of the limiting spectral
//! laws: the noncentral-covariance transform m₂, the noncentral-Fisher
//! transform m₃, the companion transform, and the generalized
//! Marchenko-Pastur transform given an arbitrary discrete population measure.
//!
//! All real-axis evaluations use the same continuation scheme: start high in
//! the upper half plane where the transform is close to −1/z, walk the
//! imaginary part down geometrically while damping the fixed-point map, then
//! polish on the real axis with secant steps. The branch reached this way is
//! the one analytic at infinity, which is the branch every formula here needs.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use num_complex::Complex64;

/// Default residual tolerance for real-axis solves.
pub const DEFAULT_TOL: f64 = 1e-10;

const DAMPING: f64 = 0.5;
const LEVEL_SHRINK: f64 = 0.6;
const LEVEL_ITERS: u32 = 200;
const POLISH_ITERS: u32 = 100;

/// One converged Stieltjes-transform evaluation at a real point.
#[derive(Debug, Clone, Copy)]
pub struct StSolution {
    pub value: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// A bulk spectral law usable as the population input of the covariance and
/// Fisher equations. Either finitely many atoms, or a generalized
/// Marchenko-Pastur law described by its own population measure and ratio
/// (solved on demand, never discretized).
#[derive(Debug, Clone)]
pub enum SpectralLaw {
    Discrete(DiscreteMeasure),
    GeneralizedMp { population: DiscreteMeasure, ratio: f64 },
}

impl SpectralLaw {
    pub fn delta_one() -> Self {
        SpectralLaw::Discrete(DiscreteMeasure::point_mass(1.0))
    }

    /// Stieltjes transform of the law at a strictly complex point.
    pub fn st_complex(&self, z: Complex64) -> Complex64 {
        match self {
            SpectralLaw::Discrete(m) => m.st(z),
            SpectralLaw::GeneralizedMp { population, ratio } => {
                silverstein_complex(population, *ratio, z)
            }
        }
    }

    /// Stieltjes transform at a real point outside the support.
    pub fn st_real(&self, x: f64) -> Result<f64> {
        match self {
            SpectralLaw::Discrete(m) => m.st_real(x),
            SpectralLaw::GeneralizedMp { population, ratio } => {
                Ok(solve_silverstein(population, *ratio, x, DEFAULT_TOL)?.value)
            }
        }
    }

    /// Upper bound estimate for the support, used to scale continuation starts.
    pub fn support_hint(&self) -> f64 {
        match self {
            SpectralLaw::Discrete(m) => m.max_atom(),
            SpectralLaw::GeneralizedMp { population, ratio } => {
                let y = ratio.max(0.0);
                population.max_atom() * (1.0 + y.sqrt()).powi(2)
            }
        }
    }
}

/// Vertical-descent continuation toward a real target point.
///
/// `step` maps (current value, evaluation point) to the next fixed-point
/// iterate. Returns the polished real value, the final real-axis residual,
/// and the leftover imaginary part at the lowest descent level (large when the
/// target sits inside the support, where no real solution exists).
fn descend(
    target: f64,
    init_scale: f64,
    step: impl Fn(Complex64, Complex64) -> Complex64,
) -> (f64, f64, f64, u32) {
    let mut iterations = 0u32;
    let mut height = init_scale;
    let mut m = -1.0 / Complex64::new(target, height);
    while height > 1e-9 * init_scale {
        let z = Complex64::new(target, height);
        for _ in 0..LEVEL_ITERS {
            let next = m + DAMPING * (step(m, z) - m);
            iterations += 1;
            let done = (next - m).norm() < 1e-14 * (1.0 + m.norm());
            m = next;
            if done {
                break;
            }
        }
        height *= LEVEL_SHRINK;
    }
    let im_residual = m.im.abs();

    // real-axis polish: secant iteration on R(m) = m − step(m, x)
    let x = Complex64::new(target, 0.0);
    let residual = |mm: Complex64| mm - step(mm, x);
    let mut prev = Complex64::new(m.re, 0.0);
    let mut r_prev = residual(prev);
    let mut cur = prev - 0.5 * r_prev;
    let mut r_cur = residual(cur);
    for _ in 0..POLISH_ITERS {
        iterations += 1;
        if r_cur.norm() < 1e-14 * (1.0 + cur.norm()) {
            break;
        }
        let denom = r_cur - r_prev;
        if denom.norm() == 0.0 {
            break;
        }
        let step_len = r_cur * (cur - prev) / denom;
        prev = cur;
        r_prev = r_cur;
        cur -= step_len;
        r_cur = residual(cur);
    }
    (cur.re, r_cur.norm(), im_residual, iterations)
}

fn finish(
    value: f64,
    residual: f64,
    im_residual: f64,
    iterations: u32,
    tol: f64,
) -> Result<StSolution> {
    if residual < tol {
        return Ok(StSolution { value, residual, iterations });
    }
    if im_residual > 1e-4 * (1.0 + value.abs()) {
        return Err(Error::Domain(
            "evaluation point lies inside the spectral support".into(),
        ));
    }
    Err(Error::NoConvergence { residual, iterations })
}

fn m2_step(law: &SpectralLaw, c1: f64) -> impl Fn(Complex64, Complex64) -> Complex64 + '_ {
    move |m, z| {
        let u = 1.0 + c1 * m;
        let w = u * (u * z - (1.0 - c1));
        u * law.st_complex(w)
    }
}

/// Stieltjes transform of the noncentral sample-covariance limit: the unique
/// solution of m = (1+c₁m)·m₁((1+c₁m)((1+c₁m)z − (1−c₁))) on the branch that
/// behaves like −1/z at infinity.
pub fn solve_m2(law: &SpectralLaw, c1: f64, z: f64, tol: f64) -> Result<StSolution> {
    check_ratio(c1, "c1")?;
    if c1 == 0.0 {
        let v = law.st_real(z)?;
        return Ok(StSolution { value: v, residual: 0.0, iterations: 0 });
    }
    let scale = 10.0 * (1.0 + law.support_hint()) + z.abs();
    let (value, residual, im_res, iters) = descend(z, scale, m2_step(law, c1));
    finish(value, residual, im_res, iters, tol)
}

/// m₂ at a strictly complex point (no polish, plain damped iteration).
pub fn solve_m2_complex(law: &SpectralLaw, c1: f64, z: Complex64) -> Result<Complex64> {
    check_ratio(c1, "c1")?;
    if c1 == 0.0 {
        return Ok(law.st_complex(z));
    }
    Ok(damped_complex(z, m2_step(law, c1)))
}

fn m3_step<'a>(
    law: &'a SpectralLaw,
    c1: f64,
    c2: f64,
) -> impl Fn(Complex64, Complex64) -> Complex64 + 'a {
    move |m, z| {
        let a = 1.0 + (c1 + c2 * z) * m;
        let b = 1.0 + c2 * z * m;
        // ∫ dH(t) / (t/A + (1−c1)/B − zA/B)
        match law {
            SpectralLaw::Discrete(h) => h
                .atoms()
                .iter()
                .map(|&(t, w)| w / (t / a + (1.0 - c1) / b - z * a / b))
                .sum(),
            SpectralLaw::GeneralizedMp { population, ratio } => {
                // 1/(t/A + K) = A/(t + KA) = A · ∫-kernel at −KA
                let k = (1.0 - c1) / b - z * a / b;
                a * silverstein_complex(population, *ratio, -k * a)
            }
        }
    }
}

/// Stieltjes transform of the noncentral Fisher limit. The returned branch
/// additionally satisfies the consistency identity
/// m₃/(1+c₂zm₃) = m₂(z(1+c₂zm₃)); violation flags a wrong root.
pub fn solve_m3(law: &SpectralLaw, c1: f64, c2: f64, z: f64, tol: f64) -> Result<StSolution> {
    check_ratio(c1, "c1")?;
    check_ratio(c2, "c2")?;
    if c2 == 0.0 {
        return solve_m2(law, c1, z, tol);
    }
    let scale = 10.0 * (1.0 + law.support_hint()) + z.abs();
    let (value, residual, im_res, iters) = descend(z, scale, m3_step(law, c1, c2));
    let sol = finish(value, residual, im_res, iters, tol)?;

    let b = 1.0 + c2 * z * sol.value;
    let lhs = sol.value / b;
    let rhs = solve_m2(law, c1, z * b, tol)?.value;
    if (lhs - rhs).abs() > 10.0 * tol.max(1e-12) * (1.0 + lhs.abs()) {
        return Err(Error::Domain(format!(
            "m3 branch inconsistent with m2: identity residual {:.3e}",
            (lhs - rhs).abs()
        )));
    }
    Ok(sol)
}

/// m₃ at a strictly complex point.
pub fn solve_m3_complex(law: &SpectralLaw, c1: f64, c2: f64, z: Complex64) -> Result<Complex64> {
    check_ratio(c1, "c1")?;
    check_ratio(c2, "c2")?;
    if c2 == 0.0 {
        return solve_m2_complex(law, c1, z);
    }
    Ok(damped_complex(z, m3_step(law, c1, c2)))
}

/// Companion transform of m₂: −(1−c₁)/z + c₁·m₂(z).
pub fn underline_m2(law: &SpectralLaw, c1: f64, z: f64, tol: f64) -> Result<f64> {
    if z == 0.0 {
        return Err(Error::Pole { point: 0.0 });
    }
    let m2 = solve_m2(law, c1, z, tol)?.value;
    Ok(-(1.0 - c1) / z + c1 * m2)
}

fn silverstein_step(population: &DiscreteMeasure, y: f64) -> impl Fn(Complex64, Complex64) -> Complex64 + '_ {
    move |um, z| {
        let g: Complex64 = population
            .atoms()
            .iter()
            .map(|&(t, w)| w * t / (1.0 + t * um))
            .sum::<Complex64>()
            * y;
        1.0 / (g - z)
    }
}

/// Stieltjes transform of the generalized Marchenko-Pastur law with
/// population measure `population` and dimension ratio `y`, solved through
/// its companion fixed point um = 1/(y·∫ t/(1+t·um) dG − z).
pub fn solve_silverstein(
    population: &DiscreteMeasure,
    y: f64,
    z: f64,
    tol: f64,
) -> Result<StSolution> {
    check_ratio(y, "ratio")?;
    if y == 0.0 {
        let v = population.st_real(z)?;
        return Ok(StSolution { value: v, residual: 0.0, iterations: 0 });
    }
    if z == 0.0 {
        return Err(Error::Pole { point: 0.0 });
    }
    let scale = 10.0 * (1.0 + population.max_atom()) + z.abs();
    let (um, residual, im_res, iters) = descend(z, scale, silverstein_step(population, y));
    let sol = finish(um, residual, im_res, iters, tol)?;
    Ok(StSolution {
        value: (sol.value + (1.0 - y) / z) / y,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

fn silverstein_complex(population: &DiscreteMeasure, y: f64, z: Complex64) -> Complex64 {
    if y == 0.0 {
        return population.st(z);
    }
    let um = damped_complex(z, silverstein_step(population, y));
    (um + (1.0 - y) / z) / y
}

/// Companion value um of the generalized Marchenko-Pastur law at a real point.
pub fn silverstein_companion(
    population: &DiscreteMeasure,
    y: f64,
    z: f64,
    tol: f64,
) -> Result<StSolution> {
    check_ratio(y, "ratio")?;
    if z == 0.0 {
        return Err(Error::Pole { point: 0.0 });
    }
    let scale = 10.0 * (1.0 + population.max_atom()) + z.abs();
    let (um, residual, im_res, iters) = descend(z, scale, silverstein_step(population, y));
    finish(um, residual, im_res, iters, tol)
}

fn damped_complex(z: Complex64, step: impl Fn(Complex64, Complex64) -> Complex64) -> Complex64 {
    let mut m = -1.0 / z;
    for _ in 0..20_000 {
        let next = m + DAMPING * (step(m, z) - m);
        let done = (next - m).norm() < 1e-15 * (1.0 + m.norm());
        m = next;
        if done {
            break;
        }
    }
    m
}

fn check_ratio(c: f64, name: &str) -> Result<()> {
    // ratio 1 is admissible: the fixed-point equations stay well posed there
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Config(format!("{name}={c} outside [0,1]")));
    }
    Ok(())
}

/// Richardson-extrapolated central difference of a real-axis transform.
///
/// Step h = max(1e-6, 1e-6·|z|); inner evaluations must clear the support by
/// 2h, otherwise their domain errors propagate.
pub fn derivative(f: impl Fn(f64) -> Result<f64>, z: f64) -> Result<f64> {
    let h = 1e-6_f64.max(1e-6 * z.abs());
    let d = |hh: f64| -> Result<f64> { Ok((f(z + hh)? - f(z - hh)?) / (2.0 * hh)) };
    let d1 = d(h)?;
    let d2 = d(h / 2.0)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// d/dz of m₂ at a real point outside the support.
pub fn m2_prime(law: &SpectralLaw, c1: f64, z: f64, tol: f64) -> Result<f64> {
    derivative(|x| Ok(solve_m2(law, c1, x, tol)?.value), z)
}

/// d/dz of m₃ at a real point outside the support.
pub fn m3_prime(law: &SpectralLaw, c1: f64, c2: f64, z: f64, tol: f64) -> Result<f64> {
    derivative(|x| Ok(solve_m3(law, c1, c2, x, tol)?.value), z)
}

/// d/dz of the companion transform of m₂.
pub fn underline_m2_prime(law: &SpectralLaw, c1: f64, z: f64, tol: f64) -> Result<f64> {
    let m2p = m2_prime(law, c1, z, tol)?;
    Ok((1.0 - c1) / (z * z) + c1 * m2p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;

    /// Closed-form Marchenko-Pastur transform for identity population,
    /// branch analytic at infinity: c·z·m² + (z+c−1)·m + 1 = 0.
    fn mp_closed_form(c: f64, z: f64) -> f64 {
        let b = z + c - 1.0;
        let disc = (b * b - 4.0 * c * z).sqrt();
        let r1 = (-b + disc) / (2.0 * c * z);
        let r2 = (-b - disc) / (2.0 * c * z);
        // pick the root closest to -1/z behaviour far from support
        if (r1 + 1.0 / z).abs() < (r2 + 1.0 / z).abs() {
            r1
        } else {
            r2
        }
    }

    fn delta0() -> SpectralLaw {
        SpectralLaw::Discrete(DiscreteMeasure::point_mass(0.0))
    }

    #[test]
    fn m2_zero_signal_matches_mp_quadratic() {
        let law = delta0();
        let got = solve_m2(&law, 0.5, -1.0, DEFAULT_TOL).unwrap();
        let want = mp_closed_form(0.5, -1.0);
        assert!((got.value - want).abs() < 1e-12, "{} vs {}", got.value, want);
        // frozen value: (−3+√17)/2
        assert!((got.value - 0.5615528128088303).abs() < 1e-12);
    }

    #[test]
    fn m2_mp_grid_both_sides_of_support() {
        let law = delta0();
        let c = 0.5;
        // support is [(1−√c)², (1+√c)²] ≈ [0.0858, 2.914]
        let mut pts: Vec<f64> = (0..10).map(|i| -5.0 + 0.5 * i as f64).collect();
        pts.extend((0..10).map(|i| 3.2 + 0.5 * i as f64));
        for z in pts {
            let got = solve_m2(&law, c, z, DEFAULT_TOL).unwrap().value;
            let want = mp_closed_form(c, z);
            assert!((got - want).abs() < 1e-8, "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn m2_inside_support_is_domain_error() {
        let law = delta0();
        match solve_m2(&law, 0.5, 1.0, DEFAULT_TOL) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn m2_c1_zero_collapses_to_m1() {
        let law = SpectralLaw::delta_one();
        let got = solve_m2(&law, 0.0, 11.0, DEFAULT_TOL).unwrap().value;
        assert!((got - (-0.1)).abs() < 1e-14);
    }

    #[test]
    fn m2_sign_above_and_below_support() {
        let law = SpectralLaw::delta_one();
        // noncentral covariance bulk for delta-1 signal, c1=0.1
        let above = solve_m2(&law, 0.1, 11.1335, DEFAULT_TOL).unwrap().value;
        assert!(above < 0.0);
        let below = solve_m2(&law, 0.1, -1.0, DEFAULT_TOL).unwrap().value;
        assert!(below > 0.0);
    }

    #[test]
    fn m2_frozen_point_at_spike_image() {
        // m2 at psi_C(10) with delta-1 bulk, c1=0.1 equals −10/91 exactly in the limit
        let law = SpectralLaw::delta_one();
        let lam_c = 11.133456790123455;
        let got = solve_m2(&law, 0.1, lam_c, DEFAULT_TOL).unwrap().value;
        assert!((got - (-10.0 / 91.0)).abs() < 1e-10, "{got}");
    }

    #[test]
    fn m3_consistency_identity_holds() {
        let law = SpectralLaw::delta_one();
        // bulk support for this design reaches about 7.1; stay above it
        let (c1, c2) = (0.1, 0.2);
        for z in [9.0, 12.0, 16.0, 24.0] {
            let m3 = solve_m3(&law, c1, c2, z, DEFAULT_TOL).unwrap().value;
            let b = 1.0 + c2 * z * m3;
            let m2 = solve_m2(&law, c1, z * b, DEFAULT_TOL).unwrap().value;
            assert!((m3 / b - m2).abs() < 1e-8, "z={z}");
        }
    }

    #[test]
    fn m3_c2_zero_reduces_to_m2() {
        let law = SpectralLaw::delta_one();
        let a = solve_m3(&law, 0.3, 0.0, 9.0, DEFAULT_TOL).unwrap().value;
        let b = solve_m2(&law, 0.3, 9.0, DEFAULT_TOL).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn silverstein_identity_population_matches_mp() {
        let pop = DiscreteMeasure::point_mass(1.0);
        let got = solve_silverstein(&pop, 0.5, -1.0, DEFAULT_TOL).unwrap().value;
        let want = mp_closed_form(0.5, -1.0);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn silverstein_zero_population_is_minus_inverse() {
        let pop = DiscreteMeasure::point_mass(0.0);
        let got = solve_silverstein(&pop, 0.3, 2.0, DEFAULT_TOL).unwrap().value;
        assert!((got - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn underline_m2_linear_identity() {
        let law = SpectralLaw::delta_one();
        let z = 11.1335;
        let c1 = 0.1;
        let m2 = solve_m2(&law, c1, z, DEFAULT_TOL).unwrap().value;
        let um = underline_m2(&law, c1, z, DEFAULT_TOL).unwrap();
        assert!((um - (-(1.0 - c1) / z + c1 * m2)).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_discrete_st_is_exact() {
        let d = DiscreteMeasure::point_mass(1.0);
        let got = derivative(|x| d.st_real(x), 2.0).unwrap();
        assert!((got - 1.0).abs() < 1e-8);
        let got = derivative(|x| d.st_real(x), 11.0).unwrap();
        assert!((got - 0.01).abs() < 1e-9);
    }

    #[test]
    fn derivative_of_mp_matches_closed_form() {
        let law = delta0();
        let got = m2_prime(&law, 0.5, -1.0, DEFAULT_TOL).unwrap();
        // frozen from the differentiated quadratic
        assert!((got - 0.3488746876271654).abs() < 1e-8, "{got}");
    }

    #[test]
    fn monotone_and_negative_above_support() {
        let law = SpectralLaw::delta_one();
        // bulk support for delta-1 signal at c1=0.1 tops out near 3.3
        let mut prev = f64::NEG_INFINITY;
        for i in 0..100 {
            let z = 4.0 + 0.25 * i as f64;
            let v = solve_m2(&law, 0.1, z, DEFAULT_TOL).unwrap().value;
            assert!(v < 0.0);
            assert!(v > prev, "not increasing at z={z}");
            prev = v;
        }
    }

    #[test]
    fn generalized_mp_law_as_bulk_input() {
        // m2 with a generalized MP bulk must still satisfy its own equation
        let pop = DiscreteMeasure::new(vec![(1.0, 0.5), (4.0, 0.5)]).unwrap();
        let law = SpectralLaw::GeneralizedMp { population: pop, ratio: 0.3 };
        let z = 30.0;
        let c1 = 0.4;
        let m = solve_m2(&law, c1, z, DEFAULT_TOL).unwrap();
        let u = 1.0 + c1 * m.value;
        let w = u * (u * z - (1.0 - c1));
        let back = u * law.st_real(w).unwrap();
        assert!((back - m.value).abs() < 1e-9);
    }
}
