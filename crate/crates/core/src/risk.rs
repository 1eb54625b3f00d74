//! Ordinary and ensemble (Bayes) risk of shrinkage rules.
//!
//! Ordinary risk R(δ, θ) = E‖δ(x) − θ‖² under x ~ N(θ, Σ) has two engines:
//! plain Monte Carlo on the loss, and the average of Stein's unbiased risk
//! estimate over the same draws.
//!
//! Ensemble risk R̄(δ, τ) under θ ~ N(0, τI) has three: direct sampling of
//! (θ, x); the Rao–Blackwellised form that integrates θ out through the
//! posterior N(τxᵢ/(τ+σᵢ²), τσᵢ²/(τ+σᵢ²)); and an oracle that rebuilds x from
//! w ~ χ²ₚ and t ~ Dirichlet(½, …, ½) with xᵢ² = w·tᵢ·(σᵢ² + τ).

use std::fmt;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma};

use crate::error::{invalid, Error, Result};
use crate::estimator::ShrinkageRule;
use crate::model::{check_tau, draw_gaussian, marginal_sd, reduce_blocks, CovarianceSpec, MeanVector};
use crate::stats::SampleStats;

/// Which engine produced a `RiskEstimate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Mc,
    Sure,
    Rb,
    Dirichlet,
    Closed,
}

impl Engine {
    pub fn tag(&self) -> &'static str {
        match self {
            Engine::Mc => "MC",
            Engine::Sure => "SURE",
            Engine::Rb => "RB",
            Engine::Dirichlet => "DIRICHLET",
            Engine::Closed => "CLOSED",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Point estimate of a risk with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub engine: Engine,
}

impl RiskEstimate {
    fn from_stats(offset: f64, stats: &SampleStats, engine: Engine) -> Self {
        Self {
            mean: offset + stats.mean(),
            stderr: stats.stderr(),
            n: stats.count(),
            engine,
        }
    }

    /// √(se₁² + se₂²).
    pub fn combined_stderr(&self, other: &RiskEstimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    /// |mean₁ − mean₂| ≤ k·√(se₁² + se₂²).
    pub fn agrees_with(&self, other: &RiskEstimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.combined_stderr(other)
    }
}

/// χ²ₚ radius and Dirichlet(½, …, ½) direction of a marginal draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofDecomposition {
    pub w: f64,
    pub t: Vec<f64>,
}

impl ProofDecomposition {
    /// Independent draws of w ~ χ²ₚ and t ~ Dirichlet(½, …, ½), the latter
    /// as normalised Gamma(½, 1) variates.
    pub fn sample<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Self {
        let mut t = vec![0.0; p];
        let w = Self::sample_into(p, rng, &mut t);
        Self { w, t }
    }

    fn sample_into<R: Rng + ?Sized>(p: usize, rng: &mut R, t: &mut [f64]) -> f64 {
        let chi = ChiSquared::new(p as f64).expect("p >= 1");
        let gamma = Gamma::new(0.5, 1.0).expect("valid shape");
        let w = chi.sample(rng);
        let mut total = 0.0;
        for ti in t.iter_mut() {
            *ti = gamma.sample(rng);
            total += *ti;
        }
        t.iter_mut().for_each(|ti| *ti /= total);
        w
    }
}

/// Squared-error loss ‖δ − θ‖².
pub fn loss(delta: &[f64], theta: &MeanVector) -> Result<f64> {
    if delta.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            found: delta.len(),
        });
    }
    Ok(sq_dist(delta, theta.theta()))
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(invalid("n", n as f64, "at least two replications are needed"));
    }
    Ok(())
}

fn check_theta(rule: &ShrinkageRule, theta: &MeanVector) -> Result<()> {
    rule.check_dim(theta.dim())
}

fn sd_of(sigma: &CovarianceSpec) -> Vec<f64> {
    sigma.sigma2().iter().map(|s| s.sqrt()).collect()
}

/// Pointwise unbiased estimate of R(δ_φ, θ) − trΣ:
///
/// ```text
///   −2 Σ gᵢσᵢ² φ/z + Σ gᵢ²xᵢ² (φ²/z² − 4φ′/z + 4φ/z²)
/// ```
pub fn sure_risk_diff(rule: &ShrinkageRule, x: &[f64]) -> Result<f64> {
    rule.check_dim(x.len())?;
    Ok(sure_unchecked(rule, g_sigma_sum(rule), x))
}

fn g_sigma_sum(rule: &ShrinkageRule) -> f64 {
    rule.g()
        .g()
        .iter()
        .zip(rule.sigma().sigma2())
        .map(|(g, s)| g * s)
        .sum()
}

#[inline]
fn sure_unchecked(rule: &ShrinkageRule, g_sigma: f64, x: &[f64]) -> f64 {
    if rule.phi().is_zero() {
        return 0.0;
    }
    let (z, t) = rule.terms_at(x);
    if z == 0.0 {
        return -2.0 * g_sigma * t.ratio;
    }
    let g2x2: f64 = rule.g().g().iter().zip(x).map(|(g, xi)| g * g * xi * xi).sum();
    -2.0 * g_sigma * t.ratio + g2x2 * (t.ratio * t.ratio + 4.0 * t.curvature)
}

/// Monte Carlo average of ‖δ(x) − θ‖² over x ~ N(θ, Σ).
pub fn mc_ordinary_risk(rule: &ShrinkageRule, theta: &MeanVector, n: u64, seed: u64) -> Result<RiskEstimate> {
    check_theta(rule, theta)?;
    check_n(n)?;
    let p = rule.dim();
    let sd = sd_of(rule.sigma());
    let th = theta.theta();
    let stats = reduce_blocks(n, seed, |rng, len, out| {
        let mut x = vec![0.0; p];
        let mut delta = vec![0.0; p];
        for _ in 0..len {
            draw_gaussian(rng, Some(th), &sd, &mut x);
            rule.apply_into(&x, &mut delta);
            out.push(sq_dist(&delta, th));
        }
    });
    Ok(RiskEstimate::from_stats(0.0, &stats, Engine::Mc))
}

/// trΣ plus the average of `sure_risk_diff` over x ~ N(θ, Σ); uses the same
/// draws as `mc_ordinary_risk` for a given seed.
pub fn mc_ordinary_risk_sure(rule: &ShrinkageRule, theta: &MeanVector, n: u64, seed: u64) -> Result<RiskEstimate> {
    check_theta(rule, theta)?;
    check_n(n)?;
    let p = rule.dim();
    let sd = sd_of(rule.sigma());
    let th = theta.theta();
    let g_sigma = g_sigma_sum(rule);
    let stats = reduce_blocks(n, seed, |rng, len, out| {
        let mut x = vec![0.0; p];
        for _ in 0..len {
            draw_gaussian(rng, Some(th), &sd, &mut x);
            out.push(sure_unchecked(rule, g_sigma, &x));
        }
    });
    Ok(RiskEstimate::from_stats(rule.sigma().trace(), &stats, Engine::Sure))
}

/// Per-draw pieces of the ensemble risk at one marginal observation x.
///
/// `rao_blackwell − trΣ == difference + control` holds exactly, where
/// `difference` is the integrand of
/// R̄ − trΣ = −2E[Σ σᵢ²gᵢxᵢ²/(τ+σᵢ²)·φ/z] + E[Σ gᵢ²xᵢ²·φ²/z²] and `control`
/// is the zero-mean term Σ σᵢ⁴(xᵢ²/(τ+σᵢ²) − 1)/(τ+σᵢ²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRiskTerms {
    pub rao_blackwell: f64,
    pub difference: f64,
    pub control: f64,
}

pub fn ensemble_risk_terms(rule: &ShrinkageRule, tau: f64, x: &[f64]) -> Result<EnsembleRiskTerms> {
    rule.check_dim(x.len())?;
    check_tau(tau)?;
    let (z, t) = rule.terms_at(x);
    let ratio = if z == 0.0 && !t.ratio.is_finite() { 0.0 } else { t.ratio };
    let mut posterior_var = 0.0;
    let mut bias_sq = 0.0;
    let mut cross = 0.0;
    let mut g2x2 = 0.0;
    let mut control = 0.0;
    for ((&s, &g), &xi) in rule.sigma().sigma2().iter().zip(rule.g().g()).zip(x) {
        let v = s + tau;
        posterior_var += tau * s / v;
        let b = s * xi / v - g * xi * ratio;
        bias_sq += b * b;
        cross += s * g * xi * xi / v;
        g2x2 += g * g * xi * xi;
        control += s * s * (xi * xi / v - 1.0) / v;
    }
    Ok(EnsembleRiskTerms {
        rao_blackwell: posterior_var + bias_sq,
        difference: -2.0 * cross * ratio + g2x2 * ratio * ratio,
        control,
    })
}

/// Στσᵢ²/(τ+σᵢ²) + E_x[Σ(σᵢ²xᵢ/(τ+σᵢ²) − gᵢxᵢφ(z)/z)²] over the marginal
/// x ~ N(0, Σ + τI).
pub fn bayes_risk_rb(rule: &ShrinkageRule, tau: f64, n: u64, seed: u64) -> Result<RiskEstimate> {
    check_tau(tau)?;
    check_n(n)?;
    let p = rule.dim();
    let sd = marginal_sd(tau, rule.sigma());
    let shrink_to_posterior: Vec<f64> = rule.sigma().sigma2().iter().map(|s| s / (s + tau)).collect();
    let g = rule.g().g();
    let stats = reduce_blocks(n, seed, |rng, len, out| {
        let mut x = vec![0.0; p];
        for _ in 0..len {
            draw_gaussian(rng, None, &sd, &mut x);
            let (z, t) = rule.terms_at(&x);
            let ratio = if z == 0.0 { 0.0 } else { t.ratio };
            let v: f64 = x
                .iter()
                .zip(&shrink_to_posterior)
                .zip(g)
                .map(|((xi, c), gi)| {
                    let b = (c - gi * ratio) * xi;
                    b * b
                })
                .sum();
            out.push(v);
        }
    });
    let base = posterior_mean_bayes_risk(tau, rule.sigma())?.mean;
    Ok(RiskEstimate::from_stats(base, &stats, Engine::Rb))
}

/// Average loss over θ ~ N(0, τI), x | θ ~ N(θ, Σ).
pub fn bayes_risk_direct(rule: &ShrinkageRule, tau: f64, n: u64, seed: u64) -> Result<RiskEstimate> {
    check_tau(tau)?;
    check_n(n)?;
    let p = rule.dim();
    let sd = sd_of(rule.sigma());
    let prior_sd = vec![tau.sqrt(); p];
    let stats = reduce_blocks(n, seed, |rng, len, out| {
        let mut theta = vec![0.0; p];
        let mut x = vec![0.0; p];
        let mut delta = vec![0.0; p];
        for _ in 0..len {
            draw_gaussian(rng, None, &prior_sd, &mut theta);
            draw_gaussian(rng, Some(&theta), &sd, &mut x);
            rule.apply_into(&x, &mut delta);
            out.push(sq_dist(&delta, &theta));
        }
    });
    Ok(RiskEstimate::from_stats(0.0, &stats, Engine::Mc))
}

/// trΣ plus the risk-difference functional evaluated on x rebuilt from
/// w ~ χ²ₚ and t ~ Dirichlet(½, …, ½).
///
/// Valid for every rule here since φ and the functional see x only through
/// the squares xᵢ².
pub fn bayes_risk_dirichlet_oracle(rule: &ShrinkageRule, tau: f64, n: u64, seed: u64) -> Result<RiskEstimate> {
    check_tau(tau)?;
    check_n(n)?;
    let p = rule.dim();
    let s2 = rule.sigma().sigma2();
    let g = rule.g().g();
    let stats = reduce_blocks(n, seed, |rng, len, out| {
        let mut t = vec![0.0; p];
        let mut x = vec![0.0; p];
        for _ in 0..len {
            let w = ProofDecomposition::sample_into(p, rng, &mut t);
            for ((xi, ti), s) in x.iter_mut().zip(&t).zip(s2) {
                // Only xᵢ² enters; the positive root is as good as any.
                *xi = (w * ti * (s + tau)).sqrt();
            }
            let (z, terms) = rule.terms_at(&x);
            let ratio = if z == 0.0 { 0.0 } else { terms.ratio };
            let mut cross = 0.0;
            let mut g2x2 = 0.0;
            for ((xi, s), gi) in x.iter().zip(s2).zip(g) {
                let x2 = xi * xi;
                cross += s * gi * x2 / (s + tau);
                g2x2 += gi * gi * x2;
            }
            out.push(-2.0 * cross * ratio + g2x2 * ratio * ratio);
        }
    });
    Ok(RiskEstimate::from_stats(rule.sigma().trace(), &stats, Engine::Dirichlet))
}

/// Bayes risk of the posterior mean, Σᵢ τσᵢ²/(τ + σᵢ²).
pub fn posterior_mean_bayes_risk(tau: f64, sigma: &CovarianceSpec) -> Result<RiskEstimate> {
    check_tau(tau)?;
    let mean = sigma.sigma2().iter().map(|s| tau * s / (tau + s)).sum();
    Ok(RiskEstimate {
        mean,
        stderr: 0.0,
        n: 0,
        engine: Engine::Closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_geometric_covariance, ShrinkageMatrix};
    use crate::phi::PhiSpec;
    use rand::SeedableRng;

    fn classical_js(p: usize) -> ShrinkageRule {
        let s = CovarianceSpec::identity(p).unwrap();
        ShrinkageRule::new(
            s,
            ShrinkageMatrix::identity(p),
            PhiSpec::stein_form((p - 2) as f64, 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn loss_examples() {
        let t = MeanVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(loss(&[1.0, 2.0], &t).unwrap(), 5.0);
        assert_eq!(loss(&[0.0, 0.0], &t).unwrap(), 0.0);
        let t = MeanVector::new(vec![3.0, -1.0, 2.0]).unwrap();
        assert_eq!(loss(&[4.0, -1.0, 2.0], &t).unwrap(), 1.0);
        assert!(loss(&[1.0], &t).is_err());
    }

    #[test]
    fn mle_risk_is_trace() {
        let s = CovarianceSpec::identity(10).unwrap();
        let rule = ShrinkageRule::mle(s.clone()).unwrap();
        let theta = MeanVector::new((0..10).map(|i| i as f64).collect()).unwrap();
        let r = mc_ordinary_risk(&rule, &theta, 200_000, 1).unwrap();
        assert!((r.mean - 10.0).abs() <= 4.0 * r.stderr, "{r:?}");
        let r = mc_ordinary_risk_sure(&rule, &theta, 1000, 1).unwrap();
        assert_eq!(r.mean, 10.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.engine, Engine::Sure);
    }

    #[test]
    fn small_n_smoke() {
        let s = make_geometric_covariance(4, 1.2).unwrap();
        let rule = ShrinkageRule::generalized_bayes(s).unwrap();
        let r = mc_ordinary_risk(&rule, &MeanVector::zeros(4), 2, 3).unwrap();
        assert!(r.mean.is_finite() && r.stderr.is_finite());
        assert_eq!(r.n, 2);
        assert!(mc_ordinary_risk(&rule, &MeanVector::zeros(4), 1, 3).is_err());
    }

    #[test]
    fn sure_vanishes_for_mle() {
        let s = make_geometric_covariance(5, 1.3).unwrap();
        let rule = ShrinkageRule::mle(s).unwrap();
        assert_eq!(sure_risk_diff(&rule, &[1.0, -3.0, 2.0, 0.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn classical_js_sure_average() {
        // θ = 0, Σ = G = I, φ ≡ p − 2: R − p = −(p−2)²E[1/‖x‖²] = −(p − 2).
        let rule = classical_js(10);
        let r = mc_ordinary_risk_sure(&rule, &MeanVector::zeros(10), 1_000_000, 5).unwrap();
        assert!((r.mean - 10.0 + 8.0).abs() <= 4.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn sure_matches_finite_difference_divergence() {
        // SURE = ‖g(x)‖² − 2 Σ σᵢ² ∂gᵢ/∂xᵢ with gᵢ = gᵢ φ(z)/z · xᵢ, checked
        // against central differences of the shrinkage map.
        let s = make_geometric_covariance(6, 1.4).unwrap();
        for phi in [PhiSpec::generalized_bayes(6).unwrap(), PhiSpec::stein_form(3.0, 2.0).unwrap()] {
            let rule = ShrinkageRule::casella(s.clone(), phi).unwrap();
            let x = [1.3, -0.4, 2.2, 0.9, -1.7, 0.6];
            let shrink = |x: &[f64]| -> Vec<f64> {
                let (_, t) = rule.terms_at(x);
                x.iter().zip(rule.g().g()).map(|(xi, g)| g * t.ratio * xi).collect()
            };
            let gx = shrink(&x);
            let mut div = 0.0;
            for i in 0..6 {
                let h = 1e-5;
                let mut up = x;
                let mut dn = x;
                up[i] += h;
                dn[i] -= h;
                div += s.sigma2()[i] * (shrink(&up)[i] - shrink(&dn)[i]) / (2.0 * h);
            }
            let expected = gx.iter().map(|v| v * v).sum::<f64>() - 2.0 * div;
            let got = sure_risk_diff(&rule, &x).unwrap();
            assert!((got - expected).abs() < 1e-7 * expected.abs().max(1.0), "{phi}: {got} vs {expected}");
        }
    }

    #[test]
    fn posterior_mean_examples() {
        let s = CovarianceSpec::new(vec![4.0, 1.0, 1.0]).unwrap();
        assert!((posterior_mean_bayes_risk(4.0, &s).unwrap().mean - 3.6).abs() < 1e-14);
        let i = CovarianceSpec::identity(7).unwrap();
        assert_eq!(posterior_mean_bayes_risk(1.0, &i).unwrap().mean, 3.5);
        let s = make_geometric_covariance(10, 1.5).unwrap();
        let r = posterior_mean_bayes_risk(1e8, &s).unwrap();
        assert!((r.mean - s.trace()).abs() <= 1e-4 * s.trace());
        assert_eq!(r.stderr, 0.0);
        assert!(posterior_mean_bayes_risk(0.0, &s).is_err());
    }

    #[test]
    fn dirichlet_sampler_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = 6;
        let n = 200_000;
        let mut w_sum = 0.0;
        let mut t_sum = vec![0.0; p];
        for _ in 0..n {
            let d = ProofDecomposition::sample(p, &mut rng);
            assert!(d.w >= 0.0);
            assert!(d.t.iter().all(|&t| t >= 0.0));
            assert!((d.t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            w_sum += d.w;
            for (acc, t) in t_sum.iter_mut().zip(&d.t) {
                *acc += t;
            }
        }
        let w_mean = w_sum / n as f64;
        // sd(w) = √(2p), so 4 standard errors ≈ 0.038.
        assert!((w_mean - p as f64).abs() < 4.0 * (2.0 * p as f64 / n as f64).sqrt());
        for t in t_sum {
            let mean = t / n as f64;
            assert!((mean - 1.0 / p as f64).abs() < 2e-3);
        }
    }

    #[test]
    fn mle_bayes_risk_is_trace() {
        let s = make_geometric_covariance(10, 1.25).unwrap();
        let rule = ShrinkageRule::mle(s.clone()).unwrap();
        let tr = s.trace();
        let rb = bayes_risk_rb(&rule, 3.0, 100_000, 9).unwrap();
        assert!((rb.mean - tr).abs() <= 3.0 * rb.stderr, "{rb:?}");
        let direct = bayes_risk_direct(&rule, 3.0, 100_000, 9).unwrap();
        assert!((direct.mean - tr).abs() <= 3.0 * direct.stderr, "{direct:?}");
        let d = bayes_risk_dirichlet_oracle(&rule, 3.0, 1000, 9).unwrap();
        assert_eq!(d.mean, tr);
        assert_eq!(d.stderr, 0.0);
    }

    #[test]
    fn engines_are_deterministic() {
        let s = make_geometric_covariance(10, 1.5).unwrap();
        let rule = ShrinkageRule::generalized_bayes(s).unwrap();
        let a = bayes_risk_rb(&rule, 5.0, 10_000, 42).unwrap();
        let b = bayes_risk_rb(&rule, 5.0, 10_000, 42).unwrap();
        assert_eq!(a, b);
    }
}
