//! Shrinkage rules δ_φ(x) = (I − G·φ(z)/z)·x with z = Σ gᵢxᵢ²/σᵢ².

use crate::error::{Error, Result};
use crate::model::{casella_g, CovarianceSpec, ShrinkageMatrix};
use crate::phi::{PhiSpec, PhiTerms};

/// A fully specified estimator: covariance, shrinkage matrix and profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageRule {
    sigma: CovarianceSpec,
    g: ShrinkageMatrix,
    phi: PhiSpec,
    // gᵢ/σᵢ², cached for z.
    weights: Vec<f64>,
}

impl ShrinkageRule {
    pub fn new(sigma: CovarianceSpec, g: ShrinkageMatrix, phi: PhiSpec) -> Result<Self> {
        if g.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: g.dim(),
            });
        }
        phi.validate()?;
        if let PhiSpec::GeneralizedBayes { p } = phi {
            if p != sigma.dim() {
                return Err(Error::DimensionMismatch {
                    expected: sigma.dim(),
                    found: p,
                });
            }
        }
        let weights = g
            .g()
            .iter()
            .zip(sigma.sigma2())
            .map(|(gi, s)| gi / s)
            .collect();
        Ok(Self {
            sigma,
            g,
            phi,
            weights,
        })
    }

    /// G = Σ/σ₁² with the given profile.
    pub fn casella(sigma: CovarianceSpec, phi: PhiSpec) -> Result<Self> {
        let g = casella_g(&sigma);
        Self::new(sigma, g, phi)
    }

    /// (I − Σ(p−2)/((p−2)σ₁² + ‖x‖²))x: Casella G with c₁ = c₂ = p − 2.
    pub fn james_stein_variant(sigma: CovarianceSpec) -> Result<Self> {
        let phi = PhiSpec::james_stein_variant(sigma.dim())?;
        Self::casella(sigma, phi)
    }

    /// The generalized-Bayes rule δ* with Casella G.
    pub fn generalized_bayes(sigma: CovarianceSpec) -> Result<Self> {
        let phi = PhiSpec::generalized_bayes(sigma.dim())?;
        Self::casella(sigma, phi)
    }

    /// δ = x.
    pub fn mle(sigma: CovarianceSpec) -> Result<Self> {
        let g = ShrinkageMatrix::identity(sigma.dim());
        Self::new(sigma, g, PhiSpec::Mle)
    }

    pub fn sigma(&self) -> &CovarianceSpec {
        &self.sigma
    }

    pub fn g(&self) -> &ShrinkageMatrix {
        &self.g
    }

    pub fn phi(&self) -> &PhiSpec {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// z = xᵀGΣ⁻¹x without dimension checks.
    #[inline]
    pub(crate) fn z_unchecked(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, xi)| w * xi * xi).sum()
    }

    /// φ(z)/z at the z of `x`, using the right limit when x = 0.
    #[inline]
    pub(crate) fn terms_at(&self, x: &[f64]) -> (f64, PhiTerms) {
        let z = self.z_unchecked(x);
        (z, self.phi.terms(z))
    }

    /// Writes δ(x) into `out`. At x = 0 the output is 0 for every profile.
    #[inline]
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (z, t) = self.terms_at(x);
        if z == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        for ((o, &xi), &gi) in out.iter_mut().zip(x).zip(self.g.g()) {
            *o = (1.0 - gi * t.ratio) * xi;
        }
    }
}

/// δ, z, and the per-coordinate factors 1 − gᵢφ(z)/z.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub delta: Vec<f64>,
    pub z: f64,
    pub factors: Vec<f64>,
    /// Set when x = 0 and φ(z)/z has no finite limit (Stein form with c₂ = 0);
    /// δ is then defined as 0 and the factors are reported as 1.
    pub singular_origin: bool,
}

pub fn statistic_z(rule: &ShrinkageRule, x: &[f64]) -> Result<f64> {
    rule.check_dim(x.len())?;
    Ok(rule.z_unchecked(x))
}

pub fn apply(rule: &ShrinkageRule, x: &[f64]) -> Result<EstimateResult> {
    rule.check_dim(x.len())?;
    if let Some(&bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(crate::error::invalid("x", bad, "observations must be finite"));
    }
    let (z, t) = rule.terms_at(x);
    if !t.ratio.is_finite() {
        return Ok(EstimateResult {
            delta: vec![0.0; x.len()],
            z,
            factors: vec![1.0; x.len()],
            singular_origin: true,
        });
    }
    let factors: Vec<f64> = rule.g.g().iter().map(|gi| 1.0 - gi * t.ratio).collect();
    let delta = factors.iter().zip(x).map(|(f, xi)| f * xi).collect();
    Ok(EstimateResult {
        delta,
        z,
        factors,
        singular_origin: false,
    })
}
