//! Finitely supported spectral measures and the aspect ratios of the
//! dimension triples they are paired with.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// A probability measure with finitely many atoms on `[0, ∞)`.
///
/// Atoms are kept sorted ascending, duplicates merged, weights normalized to
/// sum to one within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config("measure needs at least one atom".into()));
        }
        for &(loc, w) in &atoms {
            if !loc.is_finite() || loc < 0.0 {
                return Err(Error::Config(format!("atom location {loc} not finite nonnegative")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::Config(format!("atom weight {w} not positive")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        // merge duplicates (exact or within 1e-12 relative)
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (loc, w) in atoms {
            match merged.last_mut() {
                Some(last) if (loc - last.0).abs() <= 1e-12 * (1.0 + loc.abs()) => last.1 += w,
                _ => merged.push((loc, w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            for a in &mut merged {
                a.1 /= total;
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn point_mass(loc: f64) -> Self {
        Self { atoms: vec![(loc, 1.0)] }
    }

    /// Empirical spectral distribution: mass 1/len at each value.
    pub fn from_eigenvalues(eigs: &[f64]) -> Result<Self> {
        let w = 1.0 / eigs.len() as f64;
        Self::new(eigs.iter().map(|&l| (l, w)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.last().map(|a| a.0).unwrap_or(0.0)
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms.first().map(|a| a.0).unwrap_or(0.0)
    }

    pub fn is_point_mass_at(&self, loc: f64) -> bool {
        self.atoms.len() == 1 && (self.atoms[0].0 - loc).abs() <= 1e-12 * (1.0 + loc.abs())
    }

    /// Stieltjes transform Σ wᵢ/(tᵢ − z) at a complex point.
    pub fn st(&self, z: Complex64) -> Complex64 {
        self.atoms.iter().map(|&(t, w)| w / (Complex64::new(t, 0.0) - z)).sum()
    }

    /// Stieltjes transform at a real point off the atoms.
    pub fn st_real(&self, x: f64) -> Result<f64> {
        for &(t, _) in &self.atoms {
            if (t - x).abs() <= 1e-14 * (1.0 + x.abs()) {
                return Err(Error::Pole { point: x });
            }
        }
        Ok(self.atoms.iter().map(|&(t, w)| w / (t - x)).sum())
    }

    /// Σ wᵢ/(tᵢ − x)², the derivative of the transform.
    pub fn st_prime_real(&self, x: f64) -> Result<f64> {
        self.st_real(x)?; // pole check
        Ok(self.atoms.iter().map(|&(t, w)| w / ((t - x) * (t - x))).sum())
    }

    /// Image measure under a monotone map of the atom locations.
    pub fn pushforward(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|&(t, w)| (f(t), w)).collect())
    }

    /// True if `x` sits strictly outside every atom by the given relative margin.
    pub fn clears_atoms(&self, x: f64, margin: f64) -> bool {
        self.atoms.iter().all(|&(t, _)| (t - x).abs() > margin * (1.0 + x.abs()))
    }
}

/// Integer dimensions of a model together with the ratios derived from them.
///
/// Covariance models use (p, n); Fisher adds the denominator sample count N;
/// CCA uses (p, q, n) with p ≤ q < n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AspectRatios {
    pub p: usize,
    pub n: usize,
    pub denom_n: Option<usize>,
    pub q: Option<usize>,
}

impl AspectRatios {
    pub fn covariance(p: usize, n: usize) -> Result<Self> {
        if p == 0 || n == 0 || p > n {
            return Err(Error::Config(format!("need 0 < p <= n, got p={p} n={n}")));
        }
        Ok(Self { p, n, denom_n: None, q: None })
    }

    pub fn fisher(p: usize, n: usize, denom_n: usize) -> Result<Self> {
        if p == 0 || p > n || p >= denom_n {
            return Err(Error::Config(format!(
                "need 0 < p <= n and p < N, got p={p} n={n} N={denom_n}"
            )));
        }
        Ok(Self { p, n, denom_n: Some(denom_n), q: None })
    }

    pub fn cca(p: usize, q: usize, n: usize) -> Result<Self> {
        if p == 0 || p > q || q >= n {
            return Err(Error::Config(format!("need 0 < p <= q < n, got p={p} q={q} n={n}")));
        }
        Ok(Self { p, n, denom_n: None, q: Some(q) })
    }

    /// p/n
    pub fn c1(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// p/N
    pub fn c2(&self) -> Result<f64> {
        let n2 = self.denom_n.ok_or_else(|| Error::Config("model has no denominator N".into()))?;
        Ok(self.p as f64 / n2 as f64)
    }

    /// p/q
    pub fn c3(&self) -> Result<f64> {
        let q = self.q.ok_or_else(|| Error::Config("model has no q dimension".into()))?;
        Ok(self.p as f64 / q as f64)
    }

    /// p/(n−q)
    pub fn c4(&self) -> Result<f64> {
        let q = self.q.ok_or_else(|| Error::Config("model has no q dimension".into()))?;
        Ok(self.p as f64 / (self.n - q) as f64)
    }

    /// p/n, same quotient as c1 under the CCA naming.
    pub fn r1(&self) -> f64 {
        self.c1()
    }

    /// q/n
    pub fn r2(&self) -> Result<f64> {
        let q = self.q.ok_or_else(|| Error::Config("model has no q dimension".into()))?;
        Ok(q as f64 / self.n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn st_single_atom() {
        let d = DiscreteMeasure::point_mass(1.0);
        assert_eq!(d.st_real(2.0).unwrap(), -1.0);
        assert_eq!(d.st_real(11.0).unwrap(), -0.1);
    }

    #[test]
    fn st_symmetric_pair_cancels() {
        let d = DiscreteMeasure::new(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        assert!(d.st_real(2.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn st_at_atom_is_pole() {
        let d = DiscreteMeasure::point_mass(1.0);
        assert!(matches!(d.st_real(1.0), Err(Error::Pole { .. })));
    }

    #[test]
    fn atoms_merge_and_normalize() {
        let d = DiscreteMeasure::new(vec![(1.0, 1.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!(d.atoms().len(), 2);
        let total: f64 = d.atoms().iter().map(|a| a.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((d.atoms()[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ratios_validate_dims() {
        assert!(AspectRatios::covariance(10, 5).is_err());
        assert!(AspectRatios::fisher(10, 20, 10).is_err());
        assert!(AspectRatios::cca(10, 5, 100).is_err());
        assert!(AspectRatios::cca(5, 10, 8).is_err());
        let r = AspectRatios::cca(7, 11, 188).unwrap();
        assert_eq!(r.c3().unwrap(), 7.0 / 11.0);
        assert_eq!(r.c4().unwrap(), 7.0 / 177.0);
        assert_eq!(r.r2().unwrap(), 11.0 / 188.0);
    }
}
